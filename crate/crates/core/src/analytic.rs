//! Continuum predictions: the affine solutions on the equilateral triangle, Cardy's
//! hypergeometric crossing function and the aspect-ratio to cross-ratio map of a rectangle.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::Error;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// The unit equilateral triangle with vertices a'⟨1⟩, a'⟨τ⟩, a'⟨τ²⟩ counterclockwise.
///
/// Matches `build_triangle(N, 1/N)`: the marks (0,N), (0,0), (N,0) land on these vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuumTriangle {
    pub vertices: [(f64, f64); 3],
}

impl Default for ContinuumTriangle {
    fn default() -> Self {
        ContinuumTriangle { vertices: [(0.5, SQRT3_2), (0.0, 0.0), (1.0, 0.0)] }
    }
}

impl ContinuumTriangle {
    /// Barycentric coordinates of `z`; entry `k` is 1 at vertex `k`.
    pub fn barycentric(&self, z: (f64, f64)) -> [f64; 3] {
        let [a, b, c] = self.vertices;
        let det = (b.1 - c.1) * (a.0 - c.0) + (c.0 - b.0) * (a.1 - c.1);
        let l0 = ((b.1 - c.1) * (z.0 - c.0) + (c.0 - b.0) * (z.1 - c.1)) / det;
        let l1 = ((c.1 - a.1) * (z.0 - c.0) + (a.0 - c.0) * (z.1 - c.1)) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// h_α for α = τ^k: the rescaled distance to the side opposite vertex `k`.
    pub fn h(&self, k: usize, z: (f64, f64)) -> Result<f64, Error> {
        let l = self.barycentric(z);
        if l.iter().any(|&v| v < -1e-12) {
            return Err(Error::Argument(format!("point ({}, {}) lies outside the triangle", z.0, z.1)));
        }
        Ok(l[k % 3].clamp(0.0, 1.0))
    }

    /// Euclidean distance from `z` (inside) to the nearest side.
    pub fn boundary_distance(&self, z: (f64, f64)) -> f64 {
        let height = self.side() * SQRT3_2;
        self.barycentric(z).iter().fold(f64::INFINITY, |m, &l| m.min(l * height))
    }

    pub fn side(&self) -> f64 {
        let (a, b) = (self.vertices[0], self.vertices[1]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }

    pub fn centroid(&self) -> (f64, f64) {
        let v = self.vertices;
        ((v[0].0 + v[1].0 + v[2].0) / 3.0, (v[0].1 + v[1].1 + v[2].1) / 3.0)
    }
}

/// h_α on the unit triangle, α = τ^k.
pub fn h_triangle(k: usize, z: (f64, f64)) -> Result<f64, Error> {
    ContinuumTriangle::default().h(k, z)
}

/// Gauss series ₂F₁(a, b; c; x) for |x| ≤ ½, summed until terms drop below 1e-17.
pub fn hyp2f1(a: f64, b: f64, c: f64, x: f64) -> f64 {
    debug_assert!(x.abs() <= 0.5 + 1e-12);
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 0..400 {
        let n = n as f64;
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * x;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// C = Γ(2/3) / (Γ(1/3) Γ(4/3)).
pub fn cardy_constant() -> f64 {
    gamma(2.0 / 3.0) / (gamma(1.0 / 3.0) * gamma(4.0 / 3.0))
}

/// Cardy's crossing probability π(η) = C η^{1/3} ₂F₁(1/3, 2/3; 4/3; η).
pub fn cardy_crossing(eta: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Argument(format!("cross-ratio {eta} outside [0, 1]")));
    }
    let series = |x: f64| cardy_constant() * x.cbrt() * hyp2f1(1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, x);
    Ok(if eta <= 0.5 { series(eta) } else { 1.0 - series(1.0 - eta) })
}

fn theta2_theta3(q: f64) -> (f64, f64) {
    let (mut t2, mut t3) = (0.0, 1.0);
    for n in 0..60 {
        let n = n as f64;
        t2 += 2.0 * q.powf((n + 0.5) * (n + 0.5));
        if n > 0.0 {
            t3 += 2.0 * q.powf(n * n);
        }
    }
    (t2, t3)
}

/// Cross-ratio η = k² of a rectangle of width ρ and height 1, where K'(k)/K(k) = ρ; the
/// horizontal crossing probability is `cardy_crossing(η)`. Uses η = θ₂⁴/θ₃⁴ at nome
/// q = e^{−πρ}, with η(ρ) = 1 − η(1/ρ) to keep q ≤ e^{−π}.
pub fn rectangle_cross_ratio(rho: f64) -> Result<f64, Error> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Argument(format!("aspect ratio {rho} must be positive")));
    }
    if rho < 1.0 {
        return Ok(1.0 - rectangle_cross_ratio(1.0 / rho)?);
    }
    let (t2, t3) = theta2_theta3((-PI * rho).exp());
    Ok((t2 / t3).powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    /// Euler integral with t = u³: π(η) = C ∫₀^{η^{1/3}} (1 − u³)^{−2/3} du.
    fn cardy_quadrature(eta: f64) -> f64 {
        cardy_constant() * simpson(&|u: f64| (1.0 - u * u * u).powf(-2.0 / 3.0), 0.0, eta.cbrt(), 1e-14)
    }

    fn elliptic_k(k: f64) -> f64 {
        simpson(&|t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, PI / 2.0, 1e-14)
    }

    #[test]
    fn triangle_solutions() {
        let t = ContinuumTriangle::default();
        for k in 0..3 {
            assert!((h_triangle(k, t.vertices[k]).unwrap() - 1.0).abs() < 1e-12);
            assert!((h_triangle(k, t.centroid()).unwrap() - 1.0 / 3.0).abs() < 1e-12);
            let (p, q) = (t.vertices[(k + 1) % 3], t.vertices[(k + 2) % 3]);
            let mid = (0.3 * p.0 + 0.7 * q.0, 0.3 * p.1 + 0.7 * q.1);
            assert!(h_triangle(k, mid).unwrap().abs() < 1e-12);
        }
        for &z in &[(0.1, 0.05), (0.5, 0.3), (0.8, 0.1), (0.45, 0.7)] {
            let s: f64 = (0..3).map(|k| h_triangle(k, z).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(h_triangle(0, (0.5, -0.01)).is_err());
        assert!((t.boundary_distance(t.centroid()) - SQRT3_2 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cardy_normalization_and_symmetry() {
        assert_eq!(cardy_crossing(0.0).unwrap(), 0.0);
        assert!((cardy_crossing(1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((cardy_crossing(0.5).unwrap() - 0.5).abs() < 1e-10);
        let mut prev = -1.0;
        for i in 0..=1000 {
            let eta = i as f64 / 1000.0;
            let p = cardy_crossing(eta).unwrap();
            assert!((p + cardy_crossing(1.0 - eta).unwrap() - 1.0).abs() < 1e-10);
            assert!(p > prev);
            prev = p;
        }
        assert!(cardy_crossing(-0.1).is_err() && cardy_crossing(1.1).is_err());
    }

    #[test]
    fn cardy_matches_quadrature() {
        for &eta in &[0.01, 0.1, 0.25, 0.4, 0.5] {
            assert!((cardy_crossing(eta).unwrap() - cardy_quadrature(eta)).abs() < 1e-8, "eta={eta}");
        }
    }

    #[test]
    fn gauss_normalization_fixes_the_constant() {
        let c = 3.0 * gamma(2.0 / 3.0) / gamma(1.0 / 3.0).powi(2);
        assert!((cardy_constant() - c).abs() < 1e-12);
        let gauss = gamma(4.0 / 3.0) * gamma(1.0 / 3.0) / gamma(2.0 / 3.0);
        assert!((cardy_constant() * gauss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_ratio_duality() {
        assert!((rectangle_cross_ratio(1.0).unwrap() - 0.5).abs() < 1e-12);
        for &rho in &[0.5, 2.0, 3.0] {
            let s = rectangle_cross_ratio(rho).unwrap() + rectangle_cross_ratio(1.0 / rho).unwrap();
            assert!((s - 1.0).abs() < 1e-10);
        }
        assert!((cardy_crossing(rectangle_cross_ratio(1.0).unwrap()).unwrap() - 0.5).abs() < 1e-10);
        assert!(rectangle_cross_ratio(0.0).is_err() && rectangle_cross_ratio(-1.0).is_err());
    }

    #[test]
    fn cross_ratio_matches_schwarz_christoffel_periods() {
        // The map ∫ dz / √((1 − z²)(1 − k²z²)) sends the half-plane onto a rectangle with
        // sides K(k) and K(k'); their ratio must reproduce ρ.
        let eta = rectangle_cross_ratio(2.0).unwrap();
        let (k, kp) = (eta.sqrt(), (1.0 - eta).sqrt());
        assert!((elliptic_k(kp) / elliptic_k(k) - 2.0).abs() < 1e-6);
    }
}
