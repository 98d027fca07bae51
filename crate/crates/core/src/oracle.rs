//! Exact probabilities by exhaustive enumeration on tiny domains.

use std::fmt;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::connectivity::{arm_event, Annulus};
use crate::interface::{InterfaceWorkspace, SeparationArcs};
use crate::lattice::{Domain, FaceDirection, FaceId, SiteId, NONE};
use crate::sampler::{Coloring, ENUMERATION_LIMIT};
use crate::Error;

/// `numerator / 2^exponent`, exact.
#[derive(Clone, Debug, Eq)]
pub struct ExactProbability {
    numerator: BigUint,
    exponent: u32,
}

impl ExactProbability {
    pub fn new(numerator: impl Into<BigUint>, exponent: u32) -> Self {
        let numerator = numerator.into();
        assert!(numerator <= BigUint::from(1u8) << exponent, "probability exceeds one");
        ExactProbability { numerator, exponent }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn denominator(&self) -> BigUint {
        BigUint::from(1u8) << self.exponent
    }

    pub fn to_f64(&self) -> f64 {
        let n: f64 = self.numerator.to_string().parse().unwrap_or(f64::NAN);
        n / 2f64.powi(self.exponent as i32)
    }

    /// Exact difference `self - other` as a signed pair of numerators over a common power of two.
    pub fn sub(&self, other: &Self) -> (bool, ExactProbability) {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        if a >= b {
            (false, ExactProbability { numerator: a - b, exponent: e })
        } else {
            (true, ExactProbability { numerator: b - a, exponent: e })
        }
    }
}

impl PartialEq for ExactProbability {
    fn eq(&self, other: &Self) -> bool {
        let e = self.exponent.max(other.exponent);
        (&self.numerator << (e - self.exponent)) == (&other.numerator << (e - other.exponent))
    }
}

impl fmt::Display for ExactProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator())
    }
}

impl Serialize for ExactProbability {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn check_size(sites: usize, limit: usize) -> Result<(), Error> {
    if sites > limit || sites > 63 {
        return Err(Error::TooLarge { sites, limit });
    }
    Ok(())
}

/// Number of colorings of `sites` sites satisfying `event`, split across the rayon pool.
fn count_colorings<F>(sites: usize, event: F) -> u64
where
    F: Fn(&Coloring) -> bool + Sync,
{
    let total = 1u64 << sites;
    let chunk = 1u64 << sites.saturating_sub(8).min(16);
    let chunks = total.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|j| {
            let end = ((j + 1) * chunk).min(total);
            (j * chunk..end).filter(|&i| event(&Coloring::from_index(sites, i))).count() as u64
        })
        .sum()
}

/// Fraction of all colorings of `d` satisfying `event`.
pub fn exact_probability<F>(d: &Domain, event: F) -> Result<ExactProbability, Error>
where
    F: Fn(&Coloring) -> bool + Sync,
{
    exact_probability_with_limit(d, event, ENUMERATION_LIMIT)
}

pub fn exact_probability_with_limit<F>(d: &Domain, event: F, limit: usize) -> Result<ExactProbability, Error>
where
    F: Fn(&Coloring) -> bool + Sync,
{
    let n = d.site_count();
    check_size(n, limit)?;
    Ok(ExactProbability::new(count_colorings(n, event), n as u32))
}

/// Exact probability of an arm event, enumerating only the annulus sites.
pub fn exact_arm_probability(d: &Domain, a: &Annulus, pattern: &[bool]) -> Result<ExactProbability, Error> {
    let m = a.sites.len();
    check_size(m, ENUMERATION_LIMIT)?;
    let hits = count_colorings(m, |local| {
        let mut c = Coloring::yellow(d.site_count());
        for (i, &s) in a.sites.iter().enumerate() {
            c.set(s as usize, local.is_blue(i));
        }
        arm_event(d, &c, a, pattern)
    });
    Ok(ExactProbability::new(hits, m as u32))
}

/// Separated faces of every coloring for the three α, stored as bitsets.
///
/// Row `i` holds coloring `Coloring::from_index(n, i)`; the event for α = τ^k is
/// `Q_α(z)` for blue paths.
#[derive(Clone, Debug)]
pub struct SeparationTable {
    sites: usize,
    faces: usize,
    words: usize,
    bits: Vec<u64>,
}

impl SeparationTable {
    pub fn enumerate(d: &Domain) -> Result<Self, Error> {
        let n = d.site_count();
        check_size(n, ENUMERATION_LIMIT)?;
        let faces = d.face_count();
        let words = faces.div_ceil(64);
        let total = 1usize << n;
        let row = 3 * words;
        let mut bits = vec![0u64; total * row];
        let chunk = 1usize << n.saturating_sub(6).min(12);
        bits.par_chunks_mut(row * chunk).enumerate().for_each_init(
            || InterfaceWorkspace::new(d),
            |ws, (j, out)| {
                for (r, slot) in out.chunks_mut(row).enumerate() {
                    let c = Coloring::from_index(n, (j * chunk + r) as u64);
                    for k in 0..3 {
                        ws.solve(d, &c, true, SeparationArcs::alpha(k));
                        for f in 0..faces {
                            if ws.separated(f as FaceId) {
                                slot[k * words + f / 64] |= 1 << (f % 64);
                            }
                        }
                    }
                }
            },
        );
        Ok(SeparationTable { sites: n, faces, words, bits })
    }

    pub fn face_count(&self) -> usize {
        self.faces
    }

    /// Whether coloring `i` separates face `z` for α = τ^k.
    #[inline]
    pub fn separated(&self, i: usize, k: usize, z: FaceId) -> bool {
        let z = z as usize;
        self.bits[i * 3 * self.words + (k % 3) * self.words + z / 64] >> (z % 64) & 1 == 1
    }

    fn count(&self, pred: impl Fn(usize) -> bool) -> ExactProbability {
        let hits = (0..1usize << self.sites).filter(|&i| pred(i)).count();
        ExactProbability::new(hits as u64, self.sites as u32)
    }

    /// H_α(z) for α = τ^k.
    pub fn h(&self, k: usize, z: FaceId) -> ExactProbability {
        self.count(|i| self.separated(i, k, z))
    }

    /// P_β(z, η) with `g = z + η`: probability of Q_β(g) without Q_β(z).
    pub fn p(&self, k: usize, z: FaceId, g: FaceId) -> ExactProbability {
        self.count(|i| self.separated(i, k, g) && !self.separated(i, k, z))
    }

    pub fn h_field(&self, k: usize) -> Vec<ExactProbability> {
        (0..self.faces as FaceId).map(|z| self.h(k, z)).collect()
    }
}

/// Exact H_α field for α = τ^k.
pub fn exact_h_field(d: &Domain, k: usize) -> Result<Vec<ExactProbability>, Error> {
    Ok(SeparationTable::enumerate(d)?.h_field(k))
}

#[derive(Clone, Debug, Serialize)]
pub struct ColorSwitchCheck {
    pub beta: usize,
    pub z: FaceId,
    pub eta: FaceDirection,
    pub left: ExactProbability,
    pub right: ExactProbability,
    pub equal: bool,
}

/// Every valid `(β, z, η)`: both `z + η` and `z + τη` are faces of the domain.
pub fn color_switch_cases(d: &Domain) -> Vec<(usize, FaceId, FaceDirection)> {
    let mut out = Vec::new();
    for k in 0..3 {
        for z in 0..d.face_count() as FaceId {
            for (_, eta) in d.face_adjacency(z) {
                if d.face_step(z, eta.rotate()).is_some() {
                    out.push((k, z, eta));
                }
            }
        }
    }
    out
}

/// P_β(z,η) and P_{τβ}(z,τη) from a table, for β = τ^k.
pub fn color_switch_from_table(
    d: &Domain,
    t: &SeparationTable,
    k: usize,
    z: FaceId,
    eta: FaceDirection,
) -> Result<ColorSwitchCheck, Error> {
    let g = d.face_step(z, eta).ok_or_else(|| Error::Geometry(format!("z+η leaves the domain at face {z}")))?;
    let h = d
        .face_step(z, eta.rotate())
        .ok_or_else(|| Error::Geometry(format!("z+τη leaves the domain at face {z}")))?;
    let left = t.p(k, z, g);
    let right = t.p(k + 1, z, h);
    let equal = left == right;
    Ok(ColorSwitchCheck { beta: k % 3, z, eta, left, right, equal })
}

pub fn verify_color_switch(d: &Domain, k: usize, z: FaceId, eta: FaceDirection) -> Result<ColorSwitchCheck, Error> {
    let t = SeparationTable::enumerate(d)?;
    color_switch_from_table(d, &t, k, z, eta)
}

/// Checks H_β(z+η) − H_β(z) = P_β(z,η) − P_β(z+η,−η) exactly.
pub fn derivative_identity_holds(t: &SeparationTable, k: usize, z: FaceId, g: FaceId) -> bool {
    let lhs = t.h(k, g).sub(&t.h(k, z));
    let rhs = t.p(k, z, g).sub(&t.p(k, g, z));
    lhs == rhs
}

/// Separation by explicit simple paths, straight from the definition. Exponential in the
/// number of paths; meant for domains of a few dozen sites.
pub struct PathSeparation<'a> {
    d: &'a Domain,
    arcs: SeparationArcs,
    edge_id: Vec<[u32; 6]>,
    far_edges: Vec<(u32, FaceId)>,
    far_sites: Vec<SiteId>,
    face_edges: Vec<Vec<(FaceId, u32)>>,
}

impl<'a> PathSeparation<'a> {
    pub fn new(d: &'a Domain, arcs: SeparationArcs) -> Result<Self, Error> {
        let n = d.site_count();
        if n > 64 || d.face_count() > 128 || d.edge_count() > 128 {
            return Err(Error::TooLarge { sites: n, limit: 64 });
        }
        let mut edge_id = vec![[NONE; 6]; n];
        let mut next = 0;
        for s in 0..n {
            for k in 0..3 {
                let t = d.neighbor(s as SiteId, k);
                if t != NONE {
                    edge_id[s][k] = next;
                    edge_id[t as usize][k + 3] = next;
                    next += 1;
                }
            }
        }
        let far = arcs.far;
        let len = d.boundary().len();
        let mut far_edges = Vec::new();
        for i in 0..len {
            let (u, v) = (d.boundary()[i], d.boundary()[(i + 1) % len]);
            if d.touches(u, far) && d.touches(v, far) {
                let k = (0..6).find(|&k| d.neighbor(u, k) == v).unwrap();
                far_edges.push((edge_id[u as usize][k], d.wedge_face(u, k)));
            }
        }
        let far_sites = (0..n as SiteId).filter(|&s| d.touches(s, far)).collect();
        let face_edges = (0..d.face_count() as FaceId)
            .map(|f| {
                d.face_edges(f)
                    .iter()
                    .filter(|e| e.0 != NONE)
                    .map(|&(g, _, s, k)| (g, edge_id[s as usize][k as usize]))
                    .collect()
            })
            .collect();
        Ok(PathSeparation { d, arcs, edge_id, far_edges, far_sites, face_edges })
    }

    /// Faces cut off from the far arc by a path with site mask `on` and edge mask `edges`.
    fn cut_off(&self, on: u64, edges: u128) -> u128 {
        let d = self.d;
        let mut reached = 0u128;
        let mut stack = Vec::new();
        for &s in &self.far_sites {
            if on >> s & 1 == 0 {
                for k in 0..6 {
                    let f = d.wedge_face(s, k);
                    if f != NONE && reached >> f & 1 == 0 {
                        reached |= 1 << f;
                        stack.push(f);
                    }
                }
            }
        }
        for &(e, f) in &self.far_edges {
            if edges >> e & 1 == 0 && f != NONE && reached >> f & 1 == 0 {
                reached |= 1 << f;
                stack.push(f);
            }
        }
        while let Some(f) = stack.pop() {
            for &(g, e) in &self.face_edges[f as usize] {
                if edges >> e & 1 == 0 && reached >> g & 1 == 0 {
                    reached |= 1 << g;
                    stack.push(g);
                }
            }
        }
        let faces = d.face_count();
        let all = if faces == 128 { u128::MAX } else { (1u128 << faces) - 1 };
        !reached & all
    }

    fn unpack(&self, mask: u128) -> Vec<bool> {
        (0..self.d.face_count()).map(|f| mask >> f & 1 == 1).collect()
    }

    /// Faces separated by one given site path.
    pub fn by_path(&self, sites: &[SiteId]) -> Vec<bool> {
        let mut on = 0u64;
        let mut edges = 0u128;
        for (i, &s) in sites.iter().enumerate() {
            on |= 1 << s;
            if i > 0 {
                let u = sites[i - 1];
                let k = (0..6).find(|&k| self.d.neighbor(u, k) == s).expect("consecutive path sites are adjacent");
                edges |= 1 << self.edge_id[u as usize][k];
            }
        }
        self.unpack(self.cut_off(on, edges))
    }

    /// Union over every simple path of `color` from a site touching `arcs.from` to a site
    /// touching `arcs.to`.
    pub fn union_over_paths(&self, c: &Coloring, color: bool) -> Vec<bool> {
        let d = self.d;
        let mut union = 0u128;
        let is_col = |s: SiteId| c.is_blue(s as usize) == color;
        let mut seen = std::collections::HashSet::new();
        for s0 in 0..d.site_count() as SiteId {
            if !is_col(s0) || !d.touches(s0, self.arcs.from) {
                continue;
            }
            // iterative DFS over simple paths: (site, site mask, edge mask, next direction)
            let mut stack: Vec<(SiteId, u64, u128, usize)> = vec![(s0, 1 << s0, 0, 0)];
            while let Some(top) = stack.last_mut() {
                let (u, on, edges, k) = *top;
                if k == 0 && d.touches(u, self.arcs.to) && seen.insert((on, edges)) {
                    union |= self.cut_off(on, edges);
                }
                if k == 6 {
                    stack.pop();
                    continue;
                }
                top.3 += 1;
                let t = d.neighbor(u, k);
                if t != NONE && is_col(t) && on >> t & 1 == 0 {
                    stack.push((t, on | 1 << t, edges | 1 << self.edge_id[u as usize][k], 0));
                }
            }
        }
        self.unpack(union)
    }
}

/// Separated faces by definition: the union over all spanning simple paths of `color`.
pub fn simple_path_separated(d: &Domain, c: &Coloring, color: bool, arcs: SeparationArcs) -> Result<Vec<bool>, Error> {
    Ok(PathSeparation::new(d, arcs)?.union_over_paths(c, color))
}
