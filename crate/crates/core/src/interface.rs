//! Separation events, lowest crossings, outer boundaries and the exploration process.
//!
//! Arcs are closed: a mark touches both arcs it separates. A blue simple path from arc `from`
//! to arc `to` separates a face when the face cannot reach the far arc by steps across
//! lattice edges that are not path edges. The face reaches the far arc through any far-arc
//! site that is off the path (via the faces around it) or through any far-arc boundary edge
//! that is not a path edge.
//!
//! Sites and edges lying on some simple spanning path are exactly the vertices and edges of
//! the biconnected block containing the virtual edge `s–t`, where `s` is joined to every
//! site touching `from` and `t` to every site touching `to`. The union of the separated sets
//! over all spanning paths is the complement of the flood fill from the far arc that is
//! blocked by that block; its frontier is the lowest crossing.

use std::io::Write;

use crate::lattice::{Domain, FaceId, SiteId, DIRS, NONE};
use crate::sampler::Coloring;

/// Arc roles for a separation event: paths run from `from` to `to` and separate from `far`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeparationArcs {
    pub from: usize,
    pub to: usize,
    pub far: usize,
}

impl SeparationArcs {
    /// Roles for α = τ^k on a triangle: from a⟨α⟩a⟨τα⟩, to a⟨τ²α⟩a⟨α⟩, far a⟨τα⟩a⟨τ²α⟩.
    pub fn alpha(k: usize) -> Self {
        SeparationArcs { from: k % 3, to: (k + 2) % 3, far: (k + 1) % 3 }
    }

    /// Roles of the highest crossing of the opposite color (marks relabeled c, a, b).
    pub fn mirror(self) -> Self {
        SeparationArcs { from: self.to, to: self.far, far: self.from }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Exploration,
    LowestCrossing,
    OuterBoundary,
}

/// A path extracted from a coloring.
///
/// Crossings and outer boundaries are site sequences. The exploration path is the sequence of
/// lattice edges it crosses, as `(blue, yellow)` axial coordinate pairs; the endpoints may lie
/// one step outside the domain, where their colors are the virtual boundary colors.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfacePath {
    pub kind: PathKind,
    pub sites: Vec<SiteId>,
    pub edges: Vec<((i32, i32), (i32, i32))>,
    /// True when no crossing exists and `sites` is the single-vertex placeholder.
    pub sentinel: bool,
    /// Touch vertex on the arc where the two halves of an outer boundary meet.
    pub w: Option<SiteId>,
    /// Number of leading sites that belong to the blue half of an outer boundary.
    pub split: usize,
}

impl InterfacePath {
    /// Number of lattice steps (site paths) or crossed edges (exploration).
    pub fn len(&self) -> usize {
        match self.kind {
            PathKind::Exploration => self.edges.len(),
            _ => self.sites.len().saturating_sub(1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `index,id,x,y` rows: site ids with plane coordinates, or for the exploration
    /// the midpoints of crossed edges with id `-1`.
    pub fn write_csv<W: Write>(&self, d: &Domain, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,id,x,y")?;
        match self.kind {
            PathKind::Exploration => {
                for (i, &((bx, by), (yx, yy))) in self.edges.iter().enumerate() {
                    let mx = (bx + yx) as f64 / 2.0;
                    let my = (by + yy) as f64 / 2.0;
                    let (x, y) = crate::lattice::axial_to_plane(mx, my, d.delta());
                    writeln!(out, "{i},-1,{x:.9},{y:.9}")?;
                }
            }
            _ => {
                for (i, &s) in self.sites.iter().enumerate() {
                    let (x, y) = d.site_point(s);
                    writeln!(out, "{i},{s},{x:.9},{y:.9}")?;
                }
            }
        }
        Ok(())
    }
}

/// Reusable buffers for separation queries on one domain.
#[derive(Clone, Debug)]
pub struct InterfaceWorkspace {
    disc: Vec<u32>,
    low: Vec<u32>,
    frames: Vec<(u32, u32, u32)>,
    edge_stack: Vec<(u32, u32)>,
    on: Vec<bool>,
    blocked: Vec<u8>,
    reached: Vec<bool>,
    queue: Vec<FaceId>,
    from_sites: Vec<SiteId>,
    to_sites: Vec<SiteId>,
    arcs: SeparationArcs,
    color: bool,
}

impl InterfaceWorkspace {
    pub fn new(d: &Domain) -> Self {
        let n = d.site_count();
        InterfaceWorkspace {
            disc: vec![0; n + 2],
            low: vec![0; n + 2],
            frames: Vec::new(),
            edge_stack: Vec::new(),
            on: vec![false; n],
            blocked: vec![0; n],
            reached: vec![false; d.face_count()],
            queue: Vec::new(),
            from_sites: Vec::new(),
            to_sites: Vec::new(),
            arcs: SeparationArcs::alpha(0),
            color: true,
        }
    }

    /// Computes the separated face set for paths of `color` with the given arc roles.
    pub fn solve(&mut self, d: &Domain, c: &Coloring, color: bool, arcs: SeparationArcs) {
        self.arcs = arcs;
        self.color = color;
        self.backbone(d, c);
        self.flood(d);
    }

    /// True iff the last solved event separates face `f`.
    #[inline]
    pub fn separated(&self, f: FaceId) -> bool {
        !self.reached[f as usize]
    }

    /// Faces reachable from the far arc (the below region).
    pub fn reached(&self) -> &[bool] {
        &self.reached
    }

    /// True iff site `s` lies on some spanning simple path of the last solved event.
    pub fn on_crossing(&self, s: SiteId) -> bool {
        self.on[s as usize]
    }

    /// True iff some spanning simple path exists.
    pub fn has_crossing(&self) -> bool {
        self.on.iter().any(|&b| b)
    }

    fn backbone(&mut self, d: &Domain, c: &Coloring) {
        let n = d.site_count();
        let (src, snk) = (n as u32, n as u32 + 1);
        let color = self.color;
        let is_col = |s: u32| c.is_blue(s as usize) == color;
        self.from_sites.clear();
        self.to_sites.clear();
        for &s in d.boundary() {
            if is_col(s) {
                if d.touches(s, self.arcs.from) {
                    self.from_sites.push(s);
                }
                if d.touches(s, self.arcs.to) {
                    self.to_sites.push(s);
                }
            }
        }
        self.disc.iter_mut().for_each(|x| *x = 0);
        self.on.iter_mut().for_each(|x| *x = false);
        self.blocked.iter_mut().for_each(|x| *x = 0);
        self.edge_stack.clear();
        self.frames.clear();
        if self.from_sites.is_empty() || self.to_sites.is_empty() {
            return;
        }
        let (from_arc, to_arc) = (self.arcs.from, self.arcs.to);
        let from_sites = &self.from_sites;
        let to_sites = &self.to_sites;
        // i-th neighbour of node u, or None when exhausted; Some(NONE) marks a skipped slot
        let neighbor = |u: u32, i: u32| -> Option<u32> {
            if u == src {
                return if i == 0 { Some(snk) } else { from_sites.get(i as usize - 1).copied() };
            }
            if u == snk {
                return if i == 0 { Some(src) } else { to_sites.get(i as usize - 1).copied() };
            }
            match i {
                0..=5 => {
                    let t = d.neighbor(u, i as usize);
                    Some(if t != NONE && is_col(t) { t } else { NONE })
                }
                6 => Some(if d.touches(u, from_arc) { src } else { NONE }),
                7 => Some(if d.touches(u, to_arc) { snk } else { NONE }),
                _ => None,
            }
        };
        let mut time = 1;
        self.disc[src as usize] = time;
        self.low[src as usize] = time;
        self.frames.push((src, NONE, 0));
        while let Some(&mut (u, parent, ref mut i)) = self.frames.last_mut() {
            match neighbor(u, *i) {
                Some(v) => {
                    *i += 1;
                    if v == NONE || v == parent {
                        continue;
                    }
                    if u == src && v != snk {
                        // only the block through s–t is needed
                        continue;
                    }
                    if self.disc[v as usize] == 0 {
                        time += 1;
                        self.disc[v as usize] = time;
                        self.low[v as usize] = time;
                        self.edge_stack.push((u, v));
                        self.frames.push((v, u, 0));
                    } else if self.disc[v as usize] < self.disc[u as usize] {
                        self.low[u as usize] = self.low[u as usize].min(self.disc[v as usize]);
                        self.edge_stack.push((u, v));
                    }
                }
                None => {
                    self.frames.pop();
                    if parent == NONE {
                        break;
                    }
                    let lu = self.low[u as usize];
                    let p = parent as usize;
                    self.low[p] = self.low[p].min(lu);
                    if lu >= self.disc[p] {
                        let keep = parent == src;
                        while let Some((a, b)) = self.edge_stack.pop() {
                            if keep {
                                mark_edge(d, &mut self.on, &mut self.blocked, a, b, n as u32);
                            }
                            if (a, b) == (parent, u) {
                                break;
                            }
                        }
                        if keep {
                            break;
                        }
                    }
                }
            }
        }
    }

    #[inline]
    fn is_blocked(&self, s: SiteId, k: usize) -> bool {
        self.blocked[s as usize] & (1 << k) != 0
    }

    fn flood(&mut self, d: &Domain) {
        self.reached.iter_mut().for_each(|x| *x = false);
        self.queue.clear();
        let far = self.arcs.far;
        let bnd = d.boundary();
        let len = bnd.len();
        for (i, &u) in bnd.iter().enumerate() {
            if !d.touches(u, far) {
                continue;
            }
            if !self.on[u as usize] {
                for k in 0..6 {
                    let f = d.wedge_face(u, k);
                    if f != NONE && !self.reached[f as usize] {
                        self.reached[f as usize] = true;
                        self.queue.push(f);
                    }
                }
            }
            if d.boundary_edge_arc(i) == far {
                let v = bnd[(i + 1) % len];
                let k = (0..6).find(|&k| d.neighbor(u, k) == v).expect("boundary loop is connected");
                let f = d.wedge_face(u, k);
                if !self.is_blocked(u, k) && f != NONE && !self.reached[f as usize] {
                    self.reached[f as usize] = true;
                    self.queue.push(f);
                }
            }
        }
        while let Some(f) = self.queue.pop() {
            for &(g, _, s, k) in d.face_edges(f) {
                if g != NONE && !self.reached[g as usize] && !self.is_blocked(s, k as usize) {
                    self.reached[g as usize] = true;
                    self.queue.push(g);
                }
            }
        }
    }

    /// Whether the edge `(s, s + DIRS[k])` lies on the curve separating the separated faces
    /// (and the exterior beyond `from` and `to`) from the reached faces (and the exterior
    /// beyond `far`).
    fn is_curve(&self, d: &Domain, s: SiteId, k: usize) -> bool {
        let t = d.neighbor(s, k);
        if t == NONE {
            return false;
        }
        let left = d.wedge_face(s, k);
        let right = d.wedge_face(s, (k + 5) % 6);
        match (left != NONE, right != NONE) {
            (true, true) => self.reached[left as usize] != self.reached[right as usize],
            (true, false) | (false, true) => {
                let f = if left != NONE { left } else { right };
                let far_edge = boundary_edge_owner(d, s, t) == self.arcs.far;
                far_edge != self.reached[f as usize]
            }
            (false, false) => false,
        }
    }

    /// The lowest crossing of the last solved event, oriented from `from` to `to` with the
    /// far arc on its right.
    ///
    /// The separated faces, together with the exterior beyond `from` and `to`, are bounded
    /// by a curve running from the mark opening the far arc to the mark closing it. The
    /// crossing is that curve without its leading run along `from` and trailing run along
    /// `to` over edges that lie on no crossing. Without any crossing this is the sentinel
    /// vertex `marks[from]`.
    pub fn lowest_path(&self, d: &Domain) -> InterfacePath {
        let marks = d.marks();
        let corner = marks[self.arcs.from];
        let sentinel = InterfacePath {
            kind: PathKind::LowestCrossing,
            sites: vec![corner],
            edges: Vec::new(),
            sentinel: true,
            w: None,
            split: 0,
        };
        if !self.has_crossing() {
            return sentinel;
        }
        let (a, b) = (marks[self.arcs.far], marks[self.arcs.to]);
        let bnd = d.boundary();
        let next_c = bnd[(d.boundary_position(a).unwrap() + 1) % bnd.len()];
        let m0 = (0..6).find(|&k| d.neighbor(a, k) == next_c).unwrap();
        let Some(first) = (0..6).map(|i| (m0 + i) % 6).find(|&m| self.is_curve(d, a, m)) else {
            return sentinel;
        };
        let mut sites = vec![a, d.neighbor(a, first)];
        let limit = 6 * d.site_count();
        while *sites.last().unwrap() != b && sites.len() <= limit {
            let v = sites[sites.len() - 1];
            let u = sites[sites.len() - 2];
            let j = (0..6).find(|&k| d.neighbor(v, k) == u).unwrap();
            let Some(m) = (1..6).map(|i| (j + 6 - i) % 6).find(|&m| self.is_curve(d, v, m)) else {
                break;
            };
            sites.push(d.neighbor(v, m));
        }
        let (from, to) = (self.arcs.from, self.arcs.to);
        // runs along `from` or `to` through edges on no crossing are boundary, not path
        let loose = |u: SiteId, v: SiteId, arc: usize| {
            let k = (0..6).find(|&k| d.neighbor(u, k) == v).unwrap();
            d.touches(u, arc) && d.touches(v, arc) && !self.is_blocked(u, k)
        };
        let lead = sites.windows(2).take_while(|w| loose(w[0], w[1], from)).count();
        sites.drain(..lead);
        while sites.len() > 1 && loose(sites[sites.len() - 2], sites[sites.len() - 1], to) {
            sites.pop();
        }
        InterfacePath { kind: PathKind::LowestCrossing, sites, edges: Vec::new(), sentinel: false, w: None, split: 0 }
    }
}

fn mark_edge(d: &Domain, on: &mut [bool], blocked: &mut [u8], a: u32, b: u32, n: u32) {
    if a < n {
        on[a as usize] = true;
    }
    if b < n {
        on[b as usize] = true;
    }
    if a < n && b < n {
        let k = (0..6).find(|&k| d.neighbor(a, k) == b).expect("block edge is a lattice edge");
        blocked[a as usize] |= 1 << k;
        blocked[b as usize] |= 1 << ((k + 3) % 6);
    }
}

/// Arc owning the boundary edge between consecutive loop sites `s` and `t`.
fn boundary_edge_owner(d: &Domain, s: SiteId, t: SiteId) -> usize {
    let len = d.boundary().len();
    let (ps, pt) = (d.boundary_position(s).unwrap(), d.boundary_position(t).unwrap());
    if (ps + 1) % len == pt {
        d.boundary_edge_arc(ps)
    } else {
        d.boundary_edge_arc(pt)
    }
}

/// Faces reachable from the far arc of α = τ^k for blue paths (`true` = reached).
pub fn below_region(d: &Domain, c: &Coloring, k: usize) -> Vec<bool> {
    let mut ws = InterfaceWorkspace::new(d);
    ws.solve(d, c, true, SeparationArcs::alpha(k));
    ws.reached
}

/// Event Q_α(z) for α = τ^k.
pub fn separates(d: &Domain, c: &Coloring, k: usize, z: FaceId) -> bool {
    !below_region(d, c, k)[z as usize]
}

/// Lowest blue crossing from arc ca to arc bc with respect to ab, where the marks are
/// `c = marks[0]`, `a = marks[1]`, `b = marks[2]`.
pub fn lowest_crossing(d: &Domain, c: &Coloring) -> InterfacePath {
    let mut ws = InterfaceWorkspace::new(d);
    ws.solve(d, c, true, SeparationArcs::alpha(0));
    ws.lowest_path(d)
}

/// Lowest blue crossing followed by the highest yellow crossing; `w` is the last site of
/// the blue half.
pub fn outer_boundary(d: &Domain, c: &Coloring) -> InterfacePath {
    let mut ws = InterfaceWorkspace::new(d);
    outer_boundary_with(&mut ws, d, c, SeparationArcs::alpha(0))
}

pub fn outer_boundary_with(
    ws: &mut InterfaceWorkspace,
    d: &Domain,
    c: &Coloring,
    arcs: SeparationArcs,
) -> InterfacePath {
    ws.solve(d, c, true, arcs);
    let blue = ws.lowest_path(d);
    ws.solve(d, c, false, arcs.mirror());
    let yellow = ws.lowest_path(d);
    let w = *blue.sites.last().unwrap();
    let split = blue.sites.len();
    let mut sites = blue.sites;
    if !yellow.sentinel {
        sites.extend(yellow.sites);
    }
    InterfacePath { kind: PathKind::OuterBoundary, sites, edges: Vec::new(), sentinel: blue.sentinel, w: Some(w), split }
}

/// Exploration process from mark `a` to mark `b`.
///
/// The domain is surrounded by a ring of virtual sites: those next to the arc running
/// counterclockwise from `a` to `b` are blue, the others yellow. Each virtual site takes the
/// arc of its clockwise-most neighbouring boundary site. The walk keeps blue on its right and
/// ends when it leaves the ring near `b`.
pub fn trace_exploration(d: &Domain, a: SiteId, b: SiteId, c: &Coloring) -> InterfacePath {
    let ring = VirtualRing::new(d, a, b);
    let mut edges = Vec::new();
    let Some((mut u, mut v)) = ring.start(d, a) else {
        return InterfacePath { kind: PathKind::Exploration, sites: vec![a], edges, sentinel: true, w: None, split: 0 };
    };
    let limit = 6 * (d.site_count() + ring.virt.len()) + 6;
    while edges.len() < limit {
        edges.push((u, v));
        let k = (0..6).find(|&k| (u.0 + DIRS[k].0, u.1 + DIRS[k].1) == v).expect("crossed edge is a lattice edge");
        let t = (u.0 + DIRS[(k + 5) % 6].0, u.1 + DIRS[(k + 5) % 6].1);
        match ring.color(d, c, t) {
            None => break,
            Some(true) => u = t,
            Some(false) => v = t,
        }
    }
    InterfacePath { kind: PathKind::Exploration, sites: Vec::new(), edges, sentinel: false, w: None, split: 0 }
}

struct VirtualRing {
    /// Virtual color and arc of each ring site.
    virt: std::collections::HashMap<(i32, i32), (bool, usize)>,
}

impl VirtualRing {
    fn new(d: &Domain, a: SiteId, b: SiteId) -> Self {
        let bnd = d.boundary();
        let len = bnd.len();
        let pa = d.boundary_position(a).expect("a is a boundary site");
        let pb = d.boundary_position(b).expect("b is a boundary site");
        let span = (pb + len - pa) % len;
        // offset of each boundary position from a, counterclockwise
        let rel = |p: usize| (p + len - pa) % len;
        let mut best: std::collections::HashMap<(i32, i32), (usize, usize)> = std::collections::HashMap::new();
        for (p, &s) in bnd.iter().enumerate() {
            let (x, y) = d.coords(s);
            for (dx, dy) in DIRS {
                let q = (x + dx, y + dy);
                if d.site_at(q.0, q.1) != NONE {
                    continue;
                }
                // clockwise-most = smallest offset, with the wrap handled by comparing the pair
                // of neighbours that straddle the loop start
                let entry = best.entry(q).or_insert((p, rel(p)));
                let cur = entry.1;
                let cand = rel(p);
                let adjacent_wrap = (cur == 0 && cand == len - 1) || (cand == 0 && cur == len - 1);
                if adjacent_wrap {
                    if cand == len - 1 {
                        *entry = (p, cand);
                    }
                } else if cand < cur {
                    *entry = (p, cand);
                }
            }
        }
        let virt = best
            .into_iter()
            .map(|(q, (p, r))| (q, (r < span, d.arc_of(bnd[p]).expect("boundary site has an arc"))))
            .collect();
        VirtualRing { virt }
    }

    fn color(&self, d: &Domain, c: &Coloring, q: (i32, i32)) -> Option<bool> {
        let s = d.site_at(q.0, q.1);
        if s != NONE {
            return Some(c.is_blue(s as usize));
        }
        self.virt.get(&q).map(|v| v.0)
    }

    /// Whether `q` is a domain site touching `arc` or a ring site assigned to it.
    fn on_arc(&self, d: &Domain, q: (i32, i32), arc: usize) -> bool {
        let s = d.site_at(q.0, q.1);
        if s != NONE {
            return d.touches(s, arc);
        }
        self.virt.get(&q).is_some_and(|v| v.1 == arc)
    }

    /// The crossed edge (blue, yellow) between the virtual sites around `a`.
    fn start(&self, d: &Domain, a: SiteId) -> Option<((i32, i32), (i32, i32))> {
        let (x, y) = d.coords(a);
        let around: Vec<Option<bool>> =
            DIRS.iter().map(|&(dx, dy)| self.virt.get(&(x + dx, y + dy)).map(|v| v.0)).collect();
        (0..6).find_map(|k| {
            let k1 = (k + 1) % 6;
            match (around[k], around[k1]) {
                (Some(false), Some(true)) => Some(((x + DIRS[k1].0, y + DIRS[k1].1), (x + DIRS[k].0, y + DIRS[k].1))),
                _ => None,
            }
        })
    }
}

/// Touch vertex obtained from the exploration: the walk from a keeps the blue cluster of arc
/// ca on one side and the yellow cluster of arc ab on the other, and `w` is the blue end of
/// the first crossed edge lying along arc bc. Falls back to c.
pub fn exploration_endpoint(d: &Domain, c: &Coloring, arcs: SeparationArcs) -> SiteId {
    let marks = d.marks();
    let (a, cc) = (marks[arcs.far], marks[arcs.from]);
    let flipped = crate::sampler::flip_colors(c);
    let ring = VirtualRing::new(d, a, cc);
    let path = trace_exploration(d, a, cc, &flipped);
    for &(u, v) in &path.edges {
        let s = d.site_at(v.0, v.1);
        if s != NONE && d.touches(s, arcs.to) && ring.on_arc(d, u, arcs.to) {
            return s;
        }
    }
    cc
}
