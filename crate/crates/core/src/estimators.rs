//! Monte Carlo estimators with Wilson intervals, paired designs, discrete contour integrals
//! and log-log exponent fits.
//!
//! Every estimator runs trials `0..trials` of one logical stream and sums integer tallies,
//! so results depend only on the seed, never on the worker count or scheduling.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analytic::ContinuumTriangle;
use crate::connectivity::{arm_event, count_spanning_clusters, label_clusters, Annulus};
use crate::interface::{exploration_endpoint, InterfaceWorkspace, SeparationArcs};
use crate::lattice::{build_parallelogram, Corner, Domain, FaceDirection, FaceId, Shape};
use crate::sampler::{fill_coloring, Coloring, StreamSpec};
use crate::Error;

/// Stream families; an estimator's stream is `lane(family, parameter)`.
pub mod family {
    pub const EVENT: u64 = 1;
    pub const CARDY: u64 = 2;
    pub const FIELD: u64 = 3;
    pub const PAIR: u64 = 4;
    pub const ENDPOINT: u64 = 5;
    pub const HULL: u64 = 6;
    pub const CLUSTERS: u64 = 7;
    pub const DIMENSION: u64 = 8;
    pub const ARMS: u64 = 9;
}

pub fn lane(family: u64, parameter: u64) -> u64 {
    family << 40 | (parameter & ((1 << 40) - 1))
}

/// Seed, worker count and confidence shared by all estimators of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Runner {
    pub seed: u64,
    pub workers: usize,
    pub confidence: f64,
}

impl Runner {
    pub fn new(seed: u64, workers: usize, confidence: f64) -> Result<Self, Error> {
        if workers == 0 {
            return Err(Error::Argument("worker count must be at least 1".into()));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::Argument(format!("confidence {confidence} must lie in (0, 1)")));
        }
        Ok(Runner { seed, workers, confidence })
    }

    /// Sums `width` integer tallies over trials `0..trials` of `stream`.
    ///
    /// `init` builds per-worker scratch state; `trial` adds one coloring's contribution.
    pub fn tally<S, I, F>(
        &self,
        sites: usize,
        stream: u64,
        trials: u64,
        width: usize,
        init: I,
        trial: F,
    ) -> Result<Vec<u64>, Error>
    where
        S: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, &Coloring, &mut [u64]) + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
        let seed = self.seed;
        Ok(pool.install(|| {
            (0..trials)
                .into_par_iter()
                .fold(
                    || (init(), Coloring::yellow(sites), vec![0u64; width]),
                    |(mut s, mut c, mut acc), t| {
                        fill_coloring(StreamSpec::new(seed, stream, t), &mut c);
                        trial(&mut s, &c, &mut acc);
                        (s, c, acc)
                    },
                )
                .map(|(_, _, acc)| acc)
                .reduce(|| vec![0; width], add_tallies)
        }))
    }
}

fn add_tallies(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Two-sided standard normal quantile for a confidence level.
pub fn normal_quantile(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + confidence / 2.0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal_quantile(confidence);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let (mut lo, mut hi) = ((centre - half).max(0.0), (centre + half).min(1.0));
    // guard rounding at the degenerate ends
    if successes == 0 {
        lo = 0.0;
    }
    if successes == trials {
        hi = 1.0;
    }
    (lo.min(p), hi.max(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarEstimate {
    pub name: String,
    pub successes: u64,
    pub trials: u64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
    pub confidence: f64,
}

impl ScalarEstimate {
    pub fn new(name: impl Into<String>, successes: u64, trials: u64, confidence: f64) -> Self {
        let (lo, hi) = wilson_interval(successes, trials, confidence);
        let p = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        ScalarEstimate { name: name.into(), successes, trials, p, lo, hi, confidence }
    }

    pub fn merge(&self, other: &ScalarEstimate) -> ScalarEstimate {
        ScalarEstimate::new(self.name.clone(), self.successes + other.successes, self.trials + other.trials, self.confidence)
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Frequency of an event over sampled colorings.
pub fn estimate_event<F>(
    runner: &Runner,
    d: &Domain,
    stream: u64,
    trials: u64,
    name: &str,
    event: F,
) -> Result<ScalarEstimate, Error>
where
    F: Fn(&Coloring) -> bool + Sync + Send,
{
    let t = runner.tally(d.site_count(), stream, trials, 1, || (), |_, c, acc| acc[0] += event(c) as u64)?;
    Ok(ScalarEstimate::new(name, t[0], trials, runner.confidence))
}

/// Per-face hit counts of Q_α for α = τ^alpha.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldEstimate {
    pub domain: String,
    pub alpha: usize,
    pub hits: Vec<u64>,
    pub trials: u64,
}

impl FieldEstimate {
    pub fn p(&self, f: FaceId) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.hits[f as usize] as f64 / self.trials as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.hits.len() as FaceId).map(|f| self.p(f)).collect()
    }

    pub fn interval(&self, f: FaceId, confidence: f64) -> (f64, f64) {
        wilson_interval(self.hits[f as usize], self.trials, confidence)
    }

    /// Sums counts; both estimates must describe the same field.
    pub fn merge(&self, other: &FieldEstimate) -> Result<FieldEstimate, Error> {
        if self.domain != other.domain || self.alpha != other.alpha || self.hits.len() != other.hits.len() {
            return Err(Error::Argument("merging estimates of different fields".into()));
        }
        Ok(FieldEstimate {
            domain: self.domain.clone(),
            alpha: self.alpha,
            hits: add_tallies(self.hits.clone(), other.hits.clone()),
            trials: self.trials + other.trials,
        })
    }
}

/// H_α fields for every `k` in `alphas`, evaluated on the same colorings.
pub fn estimate_h_fields(runner: &Runner, d: &Domain, alphas: &[usize], trials: u64) -> Result<Vec<FieldEstimate>, Error> {
    let nf = d.face_count();
    let stream = lane(family::FIELD, d.site_count() as u64);
    let t = runner.tally(
        d.site_count(),
        stream,
        trials,
        nf * alphas.len(),
        || InterfaceWorkspace::new(d),
        |ws, c, acc| {
            for (j, &k) in alphas.iter().enumerate() {
                ws.solve(d, c, true, SeparationArcs::alpha(k));
                let row = &mut acc[j * nf..(j + 1) * nf];
                for (f, r) in ws.reached().iter().enumerate() {
                    row[f] += !r as u64;
                }
            }
        },
    )?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(j, &k)| FieldEstimate {
            domain: d.spec().to_string(),
            alpha: k % 3,
            hits: t[j * nf..(j + 1) * nf].to_vec(),
            trials,
        })
        .collect())
}

pub fn estimate_h_field(runner: &Runner, d: &Domain, k: usize, trials: u64) -> Result<FieldEstimate, Error> {
    Ok(estimate_h_fields(runner, d, &[k], trials)?.remove(0))
}

/// Largest deviations of estimated fields from the affine triangle solutions, over faces at
/// distance at least `margin` (as a fraction of the side) from the boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldComparison {
    pub faces: usize,
    pub sup_error: Vec<f64>,
    pub sup_sum_error: f64,
}

pub fn compare_with_triangle(d: &Domain, fields: &[FieldEstimate], margin: f64) -> Result<FieldComparison, Error> {
    let Shape::Triangle { n } = d.shape() else {
        return Err(Error::InvalidDomain("field comparison needs a triangle".into()));
    };
    let side = n as f64 * d.delta();
    let tri = ContinuumTriangle::default();
    let mut sup_error = vec![0.0f64; fields.len()];
    let (mut sup_sum_error, mut faces) = (0.0f64, 0);
    for f in 0..d.face_count() as FaceId {
        let (x, y) = d.face_center(f);
        let z = (x / side, y / side);
        if tri.boundary_distance(z) < margin {
            continue;
        }
        faces += 1;
        let mut sum = 0.0;
        for (j, field) in fields.iter().enumerate() {
            let p = field.p(f);
            sum += p;
            sup_error[j] = sup_error[j].max((p - tri.h(field.alpha, z)?).abs());
        }
        sup_sum_error = sup_sum_error.max((sum - 1.0).abs());
    }
    Ok(FieldComparison { faces, sup_error, sup_sum_error })
}

/// Outcomes of Q_β(z+η)∖Q_β(z) and Q_{τβ}(z+τη)∖Q_{τβ}(z) on one coloring.
pub fn p_pair_outcome(
    ws: &mut InterfaceWorkspace,
    d: &Domain,
    c: &Coloring,
    k: usize,
    z: FaceId,
    g: FaceId,
    h: FaceId,
) -> (bool, bool) {
    ws.solve(d, c, true, SeparationArcs::alpha(k));
    let left = ws.separated(g) && !ws.separated(z);
    ws.solve(d, c, true, SeparationArcs::alpha(k + 1));
    let right = ws.separated(h) && !ws.separated(z);
    (left, right)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairEstimate {
    pub left: ScalarEstimate,
    pub right: ScalarEstimate,
    /// Mean of the per-trial difference and its normal interval.
    pub diff: f64,
    pub diff_lo: f64,
    pub diff_hi: f64,
}

impl PairEstimate {
    pub fn covers_zero(&self) -> bool {
        self.diff_lo <= 0.0 && 0.0 <= self.diff_hi
    }
}

/// Paired estimate of P_β(z,η) and P_{τβ}(z,τη) for β = τ^k.
pub fn estimate_p_pair(
    runner: &Runner,
    d: &Domain,
    k: usize,
    z: FaceId,
    eta: FaceDirection,
    trials: u64,
) -> Result<PairEstimate, Error> {
    Ok(estimate_p_pairs(runner, d, &[(k, z, eta)], trials)?.remove(0))
}

/// Paired estimates for several `(k, z, η)` on the same colorings; each α is solved once
/// per trial.
pub fn estimate_p_pairs(
    runner: &Runner,
    d: &Domain,
    cases: &[(usize, FaceId, FaceDirection)],
    trials: u64,
) -> Result<Vec<PairEstimate>, Error> {
    let mut faces = Vec::with_capacity(cases.len());
    for &(_, z, eta) in cases {
        let g = d.face_step(z, eta).ok_or_else(|| Error::Geometry(format!("z+η leaves the domain at face {z}")))?;
        let h = d
            .face_step(z, eta.rotate())
            .ok_or_else(|| Error::Geometry(format!("z+τη leaves the domain at face {z}")))?;
        faces.push((g, h));
    }
    let stream = lane(family::PAIR, d.site_count() as u64);
    let t = runner.tally(
        d.site_count(),
        stream,
        trials,
        4 * cases.len(),
        || (InterfaceWorkspace::new(d), vec![(false, false); cases.len()]),
        |(ws, out), c, acc| {
            for alpha in 0..3 {
                if !cases.iter().any(|&(k, _, _)| k % 3 == alpha || (k + 1) % 3 == alpha) {
                    continue;
                }
                ws.solve(d, c, true, SeparationArcs::alpha(alpha));
                for (i, &(k, z, _)) in cases.iter().enumerate() {
                    let (g, h) = faces[i];
                    if k % 3 == alpha {
                        out[i].0 = ws.separated(g) && !ws.separated(z);
                    }
                    if (k + 1) % 3 == alpha {
                        out[i].1 = ws.separated(h) && !ws.separated(z);
                    }
                }
            }
            for (i, &(l, r)) in out.iter().enumerate() {
                acc[4 * i] += l as u64;
                acc[4 * i + 1] += r as u64;
                acc[4 * i + 2] += (l && !r) as u64;
                acc[4 * i + 3] += (r && !l) as u64;
            }
        },
    )?;
    let n = trials.max(1) as f64;
    let q = normal_quantile(runner.confidence);
    Ok(cases
        .iter()
        .enumerate()
        .map(|(i, &(k, z, eta))| {
            let t = &t[4 * i..4 * i + 4];
            let diff = (t[2] as f64 - t[3] as f64) / n;
            let second = (t[2] + t[3]) as f64 / n;
            let half = q * ((second - diff * diff).max(0.0) / n).sqrt();
            PairEstimate {
                left: ScalarEstimate::new(format!("P_{}(z={z},eta={eta})", k % 3), t[0], trials, runner.confidence),
                right: ScalarEstimate::new(
                    format!("P_{}(z={z},eta={})", (k + 1) % 3, eta.rotate()),
                    t[1],
                    trials,
                    runner.confidence,
                ),
                diff,
                diff_lo: diff - half,
                diff_hi: diff + half,
            }
        })
        .collect())
}

/// Upright equilateral contour through the centres of the up faces anchored at
/// `(x0, y0)`, `(x0 + len, y0)` and `(x0, y0 + len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Contour {
    pub x0: i32,
    pub y0: i32,
    pub len: i32,
}

impl Contour {
    /// The fixed-shape contour used across sizes: corner at N/8, side N/2.
    pub fn standard(n: u32) -> Self {
        let n = n as i32;
        Contour { x0: n / 8, y0: n / 8, len: n / 2 }
    }

    /// Faces on the bottom, right and left sides, counterclockwise; corners appear on
    /// both sides that meet there.
    pub fn sides(&self, d: &Domain) -> Result<[Vec<FaceId>; 3], Error> {
        if self.len < 1 {
            return Err(Error::Geometry("contour side must be at least 1".into()));
        }
        let (x0, y0, l) = (self.x0, self.y0, self.len);
        let face = |x: i32, y: i32| {
            d.up_face(x, y).ok_or_else(|| Error::Geometry(format!("contour face ({x}, {y}) lies outside the domain")))
        };
        let mut sides: [Vec<FaceId>; 3] = Default::default();
        for i in 0..=l {
            sides[0].push(face(x0 + i, y0)?);
            sides[1].push(face(x0 + l - i, y0 + i)?);
            sides[2].push(face(x0, y0 + l - i)?);
        }
        Ok(sides)
    }
}

/// δ·Σ_bottom H + δτ·Σ_right H + δτ²·Σ_left H; each weight is δ times the unit direction
/// of its side.
pub fn discrete_contour_integral(d: &Domain, values: &[f64], contour: &Contour) -> Result<Complex64, Error> {
    if values.len() != d.face_count() {
        return Err(Error::Argument("field length does not match the domain".into()));
    }
    let sides = contour.sides(d)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (j, side) in sides.iter().enumerate() {
        let weight = Complex64::from_polar(d.delta(), 2.0 * std::f64::consts::PI * j as f64 / 3.0);
        let sum: f64 = side.iter().map(|&f| values[f as usize]).sum();
        total += weight * sum;
    }
    Ok(total)
}

/// |∮ H_β − τ⁻¹ ∮ H_{τβ}|.
pub fn contour_residual(d: &Domain, h_beta: &[f64], h_tau_beta: &[f64], contour: &Contour) -> Result<f64, Error> {
    let tau_inv = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
    let a = discrete_contour_integral(d, h_beta, contour)?;
    let b = discrete_contour_integral(d, h_tau_beta, contour)?;
    Ok((a - tau_inv * b).norm())
}

/// Residual of a contour with its sampling error.
///
/// Per trial, `X = ∮ 1[Q_β] − τ⁻¹ ∮ 1[Q_{τβ}]` is an integer combination of the numbers of
/// separated faces on each side; `mean` estimates E[X] and `residual = |mean|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContourEstimate {
    pub beta: usize,
    pub contour: Contour,
    pub trials: u64,
    pub mean: (f64, f64),
    pub residual: f64,
    /// Standard error of `residual` along the direction of `mean`.
    pub stderr: f64,
    /// Expected `residual` if E[X] were 0: √(π/4 · tr Cov / trials).
    pub noise_floor: f64,
}

/// Contour residual for β = τ^k, on the colorings of the field stream of `d`.
pub fn estimate_contour(runner: &Runner, d: &Domain, k: usize, contour: Contour, trials: u64) -> Result<ContourEstimate, Error> {
    let sides = contour.sides(d)?;
    let nf = d.face_count();
    // side membership per face; corner faces lie on two sides
    let mut on_side = vec![[false; 3]; nf];
    for (j, side) in sides.iter().enumerate() {
        for &f in side {
            on_side[f as usize][j] = true;
        }
    }
    let t = runner.tally(
        d.site_count(),
        lane(family::FIELD, d.site_count() as u64),
        trials,
        6 + 21,
        || (InterfaceWorkspace::new(d), [0u64; 6]),
        |(ws, v), c, acc| {
            *v = [0; 6];
            for (half, alpha) in [k, k + 1].into_iter().enumerate() {
                ws.solve(d, c, true, SeparationArcs::alpha(alpha));
                for (j, side) in sides.iter().enumerate() {
                    v[3 * half + j] = side.iter().filter(|&&f| ws.separated(f)).count() as u64;
                }
            }
            let mut m = 6;
            for a in 0..6 {
                acc[a] += v[a];
                for b in a..6 {
                    acc[m] += v[a] * v[b];
                    m += 1;
                }
            }
        },
    )?;
    let n = trials.max(1) as f64;
    let tau = |p: i32| Complex64::from_polar(d.delta(), 2.0 * std::f64::consts::PI * p as f64 / 3.0);
    let coef: Vec<Complex64> = (0..6).map(|i| if i < 3 { tau(i) } else { -tau(i - 4) }).collect();
    let mean_v: Vec<f64> = (0..6).map(|i| t[i] as f64 / n).collect();
    let mut cov = [[0.0f64; 6]; 6];
    let mut m = 6;
    for a in 0..6 {
        for b in a..6 {
            let c = t[m] as f64 / n - mean_v[a] * mean_v[b];
            cov[a][b] = c;
            cov[b][a] = c;
            m += 1;
        }
    }
    let mean: Complex64 = coef.iter().zip(&mean_v).map(|(c, v)| c * v).sum();
    // covariance of (Re X, Im X)
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for a in 0..6 {
        for b in 0..6 {
            xx += coef[a].re * coef[b].re * cov[a][b];
            yy += coef[a].im * coef[b].im * cov[a][b];
            xy += coef[a].re * coef[b].im * cov[a][b];
        }
    }
    let residual = mean.norm();
    let (ux, uy) = if residual > 0.0 { (mean.re / residual, mean.im / residual) } else { (1.0, 0.0) };
    let var = (ux * ux * xx + uy * uy * yy + 2.0 * ux * uy * xy).max(0.0);
    Ok(ContourEstimate {
        beta: k % 3,
        contour,
        trials,
        mean: (mean.re, mean.im),
        residual,
        stderr: (var / n).sqrt(),
        noise_floor: (std::f64::consts::PI / 4.0 * (xx + yy).max(0.0) / n).sqrt(),
    })
}

/// Law of the touch point w on arc bc, as counts per lattice position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointLaw {
    /// `counts[y]` counts trials with w = (N − y, y), i.e. at distance y/N from b.
    pub counts: Vec<u64>,
    pub trials: u64,
    pub ks: f64,
}

/// KS distance between the law with `counts[i]` at `i / (len − 1)` and
/// Uniform[0, 1].
pub fn ks_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 || counts.is_empty() {
        return 1.0;
    }
    let m = (counts.len() - 1).max(1) as f64;
    let (mut below, mut d) = (0u64, 0.0f64);
    for (i, &c) in counts.iter().enumerate() {
        let x = if counts.len() == 1 { 0.0 } else { i as f64 / m };
        let before = below as f64 / total as f64;
        below += c;
        let after = below as f64 / total as f64;
        d = d.max((before - x).abs()).max((after - x).abs());
    }
    d
}

/// Endpoint law on a triangle built by `build_triangle`.
pub fn endpoint_law(runner: &Runner, d: &Domain, trials: u64) -> Result<EndpointLaw, Error> {
    let Shape::Triangle { n } = d.shape() else {
        return Err(Error::InvalidDomain("endpoint law needs a triangle".into()));
    };
    let stream = lane(family::ENDPOINT, n as u64);
    let counts = runner.tally(
        d.site_count(),
        stream,
        trials,
        n as usize + 1,
        || (),
        |_, c, acc| {
            let w = exploration_endpoint(d, c, SeparationArcs::alpha(0));
            acc[d.coords(w).1 as usize] += 1;
        },
    )?;
    let ks = ks_uniform(&counts);
    Ok(EndpointLaw { counts, trials, ks })
}

/// Whether `z` lies between the lowest blue and the highest yellow crossing for α = τ^k.
pub fn hull_contains(ws: &mut InterfaceWorkspace, d: &Domain, c: &Coloring, k: usize, z: FaceId) -> bool {
    let arcs = SeparationArcs::alpha(k);
    ws.solve(d, c, true, arcs);
    if ws.separated(z) {
        return false;
    }
    ws.solve(d, c, false, arcs.mirror());
    !ws.separated(z)
}

/// Hull containment for every face; entry `f` of the result counts trials containing `f`.
pub fn hull_field(runner: &Runner, d: &Domain, k: usize, trials: u64) -> Result<FieldEstimate, Error> {
    let nf = d.face_count();
    let arcs = SeparationArcs::alpha(k);
    let hits = runner.tally(
        d.site_count(),
        lane(family::HULL, d.site_count() as u64),
        trials,
        nf,
        || (InterfaceWorkspace::new(d), vec![false; nf]),
        |(ws, below), c, acc| {
            ws.solve(d, c, true, arcs);
            below.copy_from_slice(ws.reached());
            ws.solve(d, c, false, arcs.mirror());
            for (f, (&b, &y)) in below.iter().zip(ws.reached()).enumerate() {
                acc[f] += (b && y) as u64;
            }
        },
    )?;
    Ok(FieldEstimate { domain: d.spec().to_string(), alpha: (k + 1) % 3, hits, trials })
}

pub fn hull_containment(runner: &Runner, d: &Domain, k: usize, z: FaceId, trials: u64) -> Result<ScalarEstimate, Error> {
    if z as usize >= d.face_count() {
        return Err(Error::Geometry(format!("face {z} does not exist")));
    }
    let t = runner.tally(
        d.site_count(),
        lane(family::HULL, d.site_count() as u64),
        trials,
        1,
        || InterfaceWorkspace::new(d),
        |ws, c, acc| acc[0] += hull_contains(ws, d, c, k, z) as u64,
    )?;
    Ok(ScalarEstimate::new(format!("hull(z={z})"), t[0], trials, runner.confidence))
}

/// Face of a triangle domain nearest to its centroid.
pub fn centroid_face(d: &Domain) -> FaceId {
    let n = d.face_count() as FaceId;
    let (cx, cy) = (0..d.face_count()).fold((0.0, 0.0), |(x, y), f| {
        let p = d.face_center(f as FaceId);
        (x + p.0, y + p.1)
    });
    let c = (cx / n as f64, cy / n as f64);
    (0..n)
        .min_by(|&a, &b| {
            let da = dist2(d.face_center(a), c);
            let db = dist2(d.face_center(b), c);
            da.total_cmp(&db)
        })
        .expect("domain has faces")
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Cardy–Carleson crossings on a triangle for several split points at once.
///
/// For each `t`, the mark x sits at (round((1−t)N), 0) so that |xb| ≈ t, and the event is a
/// blue cluster joining [xb] to [ca]. Returns one estimate per `t` together with the exact
/// length |xb| realized on the lattice.
pub fn cardy_estimates(runner: &Runner, n: u32, ts: &[f64], trials: u64) -> Result<Vec<(f64, ScalarEstimate)>, Error> {
    if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Argument("split points must lie in [0, 1]".into()));
    }
    let d = crate::lattice::build_triangle(n, 1.0 / n as f64)?;
    let ms: Vec<i32> = ts.iter().map(|t| ((1.0 - t) * n as f64).round() as i32).collect();
    let stream = lane(family::CARDY, n as u64);
    let counts = runner.tally(
        d.site_count(),
        stream,
        trials,
        ts.len(),
        || (),
        |_, c, acc| {
            let l = label_clusters(&d, c, true);
            // per cluster: touches the left side, and the largest x among its bottom sites
            let mut left = vec![false; l.clusters.len()];
            let mut right_most = vec![-1i32; l.clusters.len()];
            for y in 0..=n as i32 {
                if let Some(id) = l.label(d.site_at(0, y)) {
                    left[id as usize] = true;
                }
            }
            for x in 0..=n as i32 {
                if let Some(id) = l.label(d.site_at(x, 0)) {
                    right_most[id as usize] = x;
                }
            }
            for (j, &m) in ms.iter().enumerate() {
                acc[j] += (0..left.len()).any(|i| left[i] && right_most[i] >= m) as u64;
            }
        },
    )?;
    Ok(ts
        .iter()
        .zip(&ms)
        .zip(counts)
        .map(|((t, &m), s)| {
            let exact = (n as i32 - m) as f64 / n as f64;
            (exact, ScalarEstimate::new(format!("cardy(t={t})"), s, trials, runner.confidence))
        })
        .collect())
}

/// Mean number of blue clusters joining the bottom and top of a parallelogram strip.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StripCount {
    pub length: f64,
    pub width: u32,
    pub rows: u32,
    pub trials: u64,
    pub total: u64,
    pub total_sq: u64,
}

impl StripCount {
    pub fn mean(&self) -> f64 {
        self.total as f64 / self.trials.max(1) as f64
    }

    pub fn stderr(&self) -> f64 {
        let n = self.trials.max(1) as f64;
        let m = self.mean();
        ((self.total_sq as f64 / n - m * m).max(0.0) / n).sqrt()
    }
}

/// Strip of unit height with `rows` lattice rows and horizontal length close to `length`.
pub fn strip_domain(length: f64, rows: u32) -> Result<Domain, Error> {
    if !(length > 0.0) || rows == 0 {
        return Err(Error::Argument("strip needs positive length and rows".into()));
    }
    let delta = 2.0 / (rows as f64 * 3f64.sqrt());
    let w = (length / delta).round().max(1.0) as u32;
    build_parallelogram(w, rows, delta, &[Corner::BottomLeft, Corner::BottomRight, Corner::TopRight, Corner::TopLeft])
}

pub fn strip_cluster_count(runner: &Runner, length: f64, rows: u32, trials: u64) -> Result<StripCount, Error> {
    let d = strip_domain(length, rows)?;
    let Shape::Parallelogram { w, .. } = d.shape() else { unreachable!() };
    let t = runner.tally(
        d.site_count(),
        lane(family::CLUSTERS, (w as u64) << 16 | rows as u64),
        trials,
        2,
        || (),
        |_, c, acc| {
            let k = count_spanning_clusters(&label_clusters(&d, c, true), 0, 2) as u64;
            acc[0] += k;
            acc[1] += k * k;
        },
    )?;
    Ok(StripCount { length: w as f64 * d.delta(), width: w, rows, trials, total: t[0], total_sq: t[1] })
}

/// Least-squares slope of mean counts against strip length.
pub fn cluster_count_slope(points: &[(f64, f64)]) -> Result<f64, Error> {
    if points.len() < 2 {
        return Err(Error::Argument("slope needs at least two lengths".into()));
    }
    Ok(least_squares(points)?.0)
}

/// Returns (slope, intercept, stderr of slope).
fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64, f64), Error> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if points.len() > 2 {
        let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, intercept, stderr))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Exponent of s ∝ N^e by least squares on (ln N, ln s).
pub fn scaling_exponent_fit(points: &[(f64, f64)]) -> Result<ExponentFit, Error> {
    if points.len() < 3 {
        return Err(Error::Argument("exponent fit needs at least three sizes".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Argument("exponent fit needs positive sizes and statistics".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let (exponent, intercept, stderr) = least_squares(&logs)?;
    Ok(ExponentFit { exponent, stderr, intercept })
}

/// Length statistics of the lowest crossing on one triangle size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthEstimate {
    pub n: u32,
    pub trials: u64,
    /// Trials with a crossing; the others contribute nothing.
    pub crossings: u64,
    pub total: u64,
    pub total_sq: u64,
}

impl LengthEstimate {
    /// Mean length in lattice steps, over trials with a crossing.
    pub fn mean(&self) -> f64 {
        self.total as f64 / self.crossings.max(1) as f64
    }

    pub fn stderr(&self) -> f64 {
        let k = self.crossings.max(1) as f64;
        let m = self.mean();
        ((self.total_sq as f64 / k - m * m).max(0.0) / k).sqrt()
    }
}

pub fn lowest_crossing_lengths(runner: &Runner, n: u32, trials: u64) -> Result<LengthEstimate, Error> {
    let d = crate::lattice::build_triangle(n, 1.0 / n as f64)?;
    let t = runner.tally(
        d.site_count(),
        lane(family::DIMENSION, n as u64),
        trials,
        3,
        || InterfaceWorkspace::new(&d),
        |ws, c, acc| {
            ws.solve(&d, c, true, SeparationArcs::alpha(0));
            let p = ws.lowest_path(&d);
            if !p.sentinel {
                let l = p.len() as u64;
                acc[0] += 1;
                acc[1] += l;
                acc[2] += l * l;
            }
        },
    )?;
    Ok(LengthEstimate { n, trials, crossings: t[0], total: t[1], total_sq: t[2] })
}

/// Square lattice parallelogram hosting an annulus of outer radius `big_r` at its centre.
pub fn annulus_domain(r: u32, big_r: u32) -> Result<(Domain, Annulus), Error> {
    let side = 2 * big_r;
    let d = build_parallelogram(side, side, 1.0, &[Corner::BottomLeft, Corner::TopRight])?;
    let centre = d.site_at(big_r as i32, big_r as i32);
    let a = Annulus::new(&d, centre, r, big_r)?;
    Ok((d, a))
}

pub fn arm_probability(runner: &Runner, r: u32, big_r: u32, pattern: &[bool], trials: u64) -> Result<ScalarEstimate, Error> {
    let (d, a) = annulus_domain(r, big_r)?;
    let code: u64 = pattern.iter().fold(1, |acc, &b| acc << 1 | b as u64);
    let name: String = pattern.iter().map(|&b| if b { 'B' } else { 'Y' }).collect();
    estimate_event(
        runner,
        &d,
        lane(family::ARMS, (r as u64) << 24 | (big_r as u64) << 12 | (code & 0xfff)),
        trials,
        &format!("arms({name},r={r},R={big_r})"),
        |c| arm_event(&d, c, &a, pattern),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::{crossing_exists, parse_pattern};
    use crate::lattice::build_triangle;
    use crate::oracle::{color_switch_cases, exact_arm_probability, exact_probability, SeparationTable};
    use crate::sampler::enumerate_colorings;

    fn runner(workers: usize) -> Runner {
        Runner::new(20260101, workers, 0.999).unwrap()
    }

    #[test]
    fn wilson_basics() {
        let (lo, hi) = wilson_interval(0, 100, 0.99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson_interval(100, 100, 0.99);
        assert!(lo > 0.9 && hi == 1.0);
        let (lo, hi) = wilson_interval(50, 100, 0.95);
        assert!((lo + hi - 1.0).abs() < 1e-12 && lo < 0.5 && hi > 0.5);
        let small = wilson_interval(500, 1000, 0.95);
        let large = wilson_interval(5000, 10000, 0.95);
        assert!(large.1 - large.0 < small.1 - small.0);
        assert!((normal_quantile(0.95) - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn certain_event_is_degenerate() {
        let d = build_triangle(4, 0.25).unwrap();
        let e = estimate_event(&runner(1), &d, 0, 500, "true", |_| true).unwrap();
        assert_eq!((e.p, e.hi), (1.0, 1.0));
        assert!(e.lo > 0.97);
    }

    #[test]
    fn event_matches_oracle() {
        let d = build_triangle(4, 0.25).unwrap();
        let event = |c: &Coloring| crossing_exists(&label_clusters(&d, c, true), 0, 1);
        let exact = exact_probability(&d, event).unwrap().to_f64();
        let e = estimate_event(&runner(2), &d, 3, 100_000, "cross", event).unwrap();
        assert!(e.covers(exact), "{e:?} vs {exact}");
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let d = build_triangle(6, 1.0 / 6.0).unwrap();
        let a = estimate_h_fields(&runner(1), &d, &[0, 1, 2], 3000).unwrap();
        let b = estimate_h_fields(&runner(3), &d, &[0, 1, 2], 3000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn merge_sums_counts() {
        let d = build_triangle(3, 1.0 / 3.0).unwrap();
        let r = runner(1);
        let a = estimate_h_field(&r, &d, 0, 100).unwrap();
        let b = estimate_h_field(&Runner { seed: 5, ..r }, &d, 0, 50).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.trials, 150);
        assert_eq!(m, b.merge(&a).unwrap());
        assert!(m.hits.iter().zip(&a.hits).zip(&b.hits).all(|((m, a), b)| *m == a + b));
        let other = estimate_h_field(&r, &d, 1, 10).unwrap();
        assert!(a.merge(&other).is_err());
    }

    #[test]
    fn field_matches_oracle() {
        let d = build_triangle(4, 0.25).unwrap();
        let table = SeparationTable::enumerate(&d).unwrap();
        let fields = estimate_h_fields(&runner(2), &d, &[0, 1, 2], 100_000).unwrap();
        for field in &fields {
            let exact = table.h_field(field.alpha);
            for f in 0..d.face_count() as FaceId {
                let (lo, hi) = field.interval(f, 0.999);
                let x = exact[f as usize].to_f64();
                assert!(lo <= x && x <= hi, "alpha {} face {f}: {x} not in [{lo}, {hi}]", field.alpha);
            }
        }
    }

    #[test]
    fn paired_estimates() {
        let d = build_triangle(4, 0.25).unwrap();
        let mut ws = InterfaceWorkspace::new(&d);
        let yellow = Coloring::yellow(d.site_count());
        let (z, eta) = (0..d.face_count() as FaceId)
            .flat_map(|z| d.face_adjacency(z).into_iter().map(move |(_, e)| (z, e)))
            .find(|&(z, e)| d.face_step(z, e.rotate()).is_some())
            .unwrap();
        let (g, h) = (d.face_step(z, eta).unwrap(), d.face_step(z, eta.rotate()).unwrap());
        assert_eq!(p_pair_outcome(&mut ws, &d, &yellow, 0, z, g, h), (false, false));
        let table = SeparationTable::enumerate(&d).unwrap();
        let pe = estimate_p_pair(&runner(1), &d, 0, z, eta, 50_000).unwrap();
        assert!(pe.left.covers(table.p(0, z, g).to_f64()));
        assert!(pe.right.covers(table.p(1, z, h).to_f64()));
        assert!(pe.covers_zero());
        let cases: Vec<_> = color_switch_cases(&d).into_iter().take(5).collect();
        let batch = estimate_p_pairs(&runner(1), &d, &cases, 2000).unwrap();
        for (case, b) in cases.iter().zip(&batch) {
            assert_eq!(&estimate_p_pair(&runner(1), &d, case.0, case.1, case.2, 2000).unwrap(), b);
        }
        let far = d.face_count() as FaceId - 1;
        let outward = FaceDirection::ALL.into_iter().find(|&e| d.face_step(far, e).is_none()).unwrap();
        assert!(estimate_p_pair(&runner(1), &d, 0, far, outward, 10).is_err());
    }

    #[test]
    fn contour_integrals() {
        let d = build_triangle(16, 1.0 / 16.0).unwrap();
        let c = Contour { x0: 2, y0: 2, len: 6 };
        let constant = vec![0.7; d.face_count()];
        assert!(discrete_contour_integral(&d, &constant, &c).unwrap().norm() < 1e-12);
        assert!(contour_residual(&d, &constant, &constant, &c).unwrap() >= 0.0);
        let zero = vec![0.0; d.face_count()];
        assert_eq!(contour_residual(&d, &zero, &zero, &c).unwrap(), 0.0);

        // H = Re z on a side-1 contour: bottom faces at x = 1/3, 4/3; right 4/3, 5/6;
        // left 5/6, 1/3 (times δ), all offset by the anchor.
        let small = Contour { x0: 0, y0: 0, len: 1 };
        let re: Vec<f64> = (0..d.face_count() as FaceId).map(|f| d.face_center(f).0).collect();
        let got = discrete_contour_integral(&d, &re, &small).unwrap();
        let dl = d.delta();
        let cx = |x: f64, y: f64| dl * (x + 1.0 / 3.0 + (y + 1.0 / 3.0) / 2.0);
        let tau = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let want = dl * (cx(0.0, 0.0) + cx(1.0, 0.0))
            + dl * tau * (cx(1.0, 0.0) + cx(0.0, 1.0))
            + dl * tau * tau * (cx(0.0, 1.0) + cx(0.0, 0.0));
        assert!((got - want).norm() < 1e-14);

        let a: Vec<f64> = (0..d.face_count()).map(|f| (f as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..d.face_count()).map(|f| (f as f64 * 0.11).cos()).collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let lhs = discrete_contour_integral(&d, &mix, &c).unwrap();
        let rhs = 2.0 * discrete_contour_integral(&d, &a, &c).unwrap() - 3.0 * discrete_contour_integral(&d, &b, &c).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);

        assert!(Contour { x0: 10, y0: 2, len: 6 }.sides(&d).is_err());
        assert!(Contour::standard(32).sides(&build_triangle(32, 1.0 / 32.0).unwrap()).is_ok());
    }

    #[test]
    fn contour_estimate_matches_field_residual() {
        let d = build_triangle(16, 1.0 / 16.0).unwrap();
        let r = runner(2);
        let c = Contour::standard(16);
        let f = estimate_h_fields(&r, &d, &[1, 2], 4000).unwrap();
        let from_fields = contour_residual(&d, &f[0].values(), &f[1].values(), &c).unwrap();
        let e = estimate_contour(&r, &d, 1, c, 4000).unwrap();
        assert!((e.residual - from_fields).abs() < 1e-12);
        assert!(e.stderr > 0.0 && e.noise_floor > 0.0);
    }

    #[test]
    fn exact_fields_give_a_finite_contour_residual() {
        let d = build_triangle(4, 0.25).unwrap();
        let t = SeparationTable::enumerate(&d).unwrap();
        let h = |k| t.h_field(k).iter().map(|p| p.to_f64()).collect::<Vec<_>>();
        let r = contour_residual(&d, &h(0), &h(1), &Contour { x0: 0, y0: 0, len: 2 }).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn ks_distance() {
        assert!((ks_uniform(&[1]) - 1.0).abs() < 1e-12);
        assert!((ks_uniform(&[1, 0]) - 1.0).abs() < 1e-12);
        assert!((ks_uniform(&[1, 1]) - 0.5).abs() < 1e-12);
        assert!(ks_uniform(&[1; 101]) < 0.011);
    }

    #[test]
    fn endpoint_law_matches_enumeration() {
        let d = build_triangle(1, 1.0).unwrap();
        let law = endpoint_law(&runner(1), &d, 100).unwrap();
        assert_eq!(law.counts.iter().sum::<u64>(), 100);

        let d = build_triangle(4, 0.25).unwrap();
        let mut exact = vec![0u64; 5];
        for c in enumerate_colorings(&d).unwrap() {
            let w = exploration_endpoint(&d, &c, SeparationArcs::alpha(0));
            exact[d.coords(w).1 as usize] += 1;
        }
        let total = exact.iter().sum::<u64>();
        let law = endpoint_law(&runner(2), &d, 50_000).unwrap();
        for (y, &e) in exact.iter().enumerate() {
            let s = ScalarEstimate::new("w", law.counts[y], law.trials, 0.999);
            assert!(s.covers(e as f64 / total as f64), "position {y}");
        }
    }

    #[test]
    fn hull_matches_enumeration() {
        let d = build_triangle(4, 0.25).unwrap();
        let mut ws = InterfaceWorkspace::new(&d);
        let colorings: Vec<Coloring> = enumerate_colorings(&d).unwrap().collect();
        let field = hull_field(&runner(2), &d, 0, 50_000).unwrap();
        for z in 0..d.face_count() as FaceId {
            let hits = colorings.iter().filter(|c| hull_contains(&mut ws, &d, c, 0, z)).count();
            let exact = hits as f64 / colorings.len() as f64;
            let (lo, hi) = field.interval(z, 0.999);
            assert!(lo <= exact && exact <= hi, "face {z}");
        }
        let z = centroid_face(&d);
        let single = hull_containment(&runner(1), &d, 0, z, 50_000).unwrap();
        assert_eq!(single.successes, field.hits[z as usize]);
    }

    #[test]
    fn cardy_split_points() {
        let r = runner(1);
        let e = cardy_estimates(&r, 8, &[0.0, 0.5, 1.0], 2000).unwrap();
        // [xb] shrinks to the single site b at t = 0
        assert!(e[0].1.p < e[1].1.p && e[1].1.p < e[2].1.p);
        assert!((e[1].0 - 0.5).abs() < 1e-12);
        assert!(cardy_estimates(&r, 8, &[1.5], 10).is_err());
    }

    #[test]
    fn slopes_and_fits() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0].iter().map(|&l| (l, 0.25 * l + 0.1)).collect();
        assert!((cluster_count_slope(&pts).unwrap() - 0.25).abs() < 1e-12);
        let flat = [(2.0, 1.5), (4.0, 1.5), (8.0, 1.5)];
        assert_eq!(cluster_count_slope(&flat).unwrap(), 0.0);
        assert!(cluster_count_slope(&pts[..1]).is_err());

        let sizes = [64.0, 128.0, 256.0, 512.0];
        let pow: Vec<(f64, f64)> = sizes.iter().map(|&n: &f64| (n, n.powf(4.0 / 3.0))).collect();
        let fit = scaling_exponent_fit(&pow).unwrap();
        assert!((fit.exponent - 4.0 / 3.0).abs() < 1e-12 && fit.stderr < 1e-9);
        let constant: Vec<(f64, f64)> = sizes.iter().map(|&n| (n, 7.0)).collect();
        assert!(scaling_exponent_fit(&constant).unwrap().exponent.abs() < 1e-12);
        assert!(scaling_exponent_fit(&pow[..2]).is_err());
        assert!(scaling_exponent_fit(&[(1.0, 1.0), (2.0, 0.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn strip_geometry() {
        let d = strip_domain(2.0, 74).unwrap();
        let Shape::Parallelogram { w, h } = d.shape() else { panic!() };
        assert_eq!(h, 74);
        assert!((h as f64 * d.delta() * 3f64.sqrt() / 2.0 - 1.0).abs() < 1e-12);
        assert!((w as f64 * d.delta() - 2.0).abs() < d.delta());
        let s = strip_cluster_count(&runner(1), 0.5, 8, 200).unwrap();
        assert!(s.mean() > 0.0 && s.stderr() > 0.0);
    }

    #[test]
    fn arm_estimates() {
        let r = runner(1);
        assert_eq!(arm_probability(&r, 1, 3, &[], 100).unwrap().p, 1.0);
        let (d, a) = annulus_domain(1, 3).unwrap();
        let pattern = parse_pattern("BYBYB").unwrap();
        let exact = exact_arm_probability(&d, &a, &pattern).unwrap().to_f64();
        let e = arm_probability(&r, 1, 3, &pattern, 100_000).unwrap();
        assert!(e.covers(exact), "{e:?} vs {exact}");
        assert!(arm_probability(&r, 3, 3, &pattern, 1).is_err());
    }

    #[test]
    fn lengths_are_tallied() {
        let e = lowest_crossing_lengths(&runner(1), 16, 200).unwrap();
        assert!(e.crossings > 0 && e.crossings <= 200);
        assert!(e.mean() >= 1.0);
    }
}
