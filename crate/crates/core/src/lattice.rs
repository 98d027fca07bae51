//! Discrete domains on the triangular lattice.
//!
//! Sites use axial coordinates `(x, y)`; the plane embedding is
//! `δ·(x + y/2, y·√3/2)`, so one lattice direction is parallel to the real axis.
//! Faces are the elementary triangles: `up(x,y)` has corners `(x,y),(x+1,y),(x,y+1)`
//! and `down(x,y)` has corners `(x+1,y),(x,y+1),(x+1,y+1)`.

use serde::Serialize;
use std::fmt;

use crate::Error;

pub type SiteId = u32;
pub type FaceId = u32;

/// Marker for a missing neighbour / face.
pub const NONE: u32 = u32::MAX;

/// The six lattice directions in counterclockwise order starting at angle 0.
pub const DIRS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Direction from a face centre to an adjacent face centre.
///
/// Up faces see their neighbours at 30°, 150° and 270°; down faces at 90°, 210° and 330°.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FaceDirection {
    D30,
    D90,
    D150,
    D210,
    D270,
    D330,
}

impl FaceDirection {
    pub const ALL: [FaceDirection; 6] = [
        FaceDirection::D30,
        FaceDirection::D90,
        FaceDirection::D150,
        FaceDirection::D210,
        FaceDirection::D270,
        FaceDirection::D330,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn from_index(k: usize) -> Self {
        Self::ALL[k % 6]
    }

    pub fn degrees(self) -> u32 {
        30 + 60 * self.index() as u32
    }

    /// Rotation by τ = e^{2πi/3}.
    pub fn rotate(self) -> Self {
        Self::from_index(self.index() + 2)
    }

    pub fn negate(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    /// True for the directions used by up faces.
    pub fn is_up_class(self) -> bool {
        matches!(self, FaceDirection::D30 | FaceDirection::D150 | FaceDirection::D270)
    }

    /// Unit vector (length 1; multiply by δ/√3 for the centre-to-centre step).
    pub fn unit(self) -> (f64, f64) {
        let a = (self.degrees() as f64).to_radians();
        (a.cos(), a.sin())
    }
}

impl fmt::Display for FaceDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

pub fn rotate_direction(eta: FaceDirection) -> FaceDirection {
    eta.rotate()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub corners: [SiteId; 3],
    pub up: bool,
    pub anchor: (i32, i32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Triangle { n: u32 },
    Parallelogram { w: u32, h: u32 },
}

/// A bounded region of the lattice with a counterclockwise boundary loop and marked points.
///
/// Arc `i` runs counterclockwise from `marks[i]` up to (excluding) `marks[i+1]`; this is the
/// partition of boundary sites. For connectivity a site *touches* arc `i` if it belongs to it
/// or is its closing mark, so each mark touches both arcs it separates.
#[derive(Clone, Debug)]
pub struct Domain {
    shape: Shape,
    delta: f64,
    coords: Vec<(i32, i32)>,
    origin: (i32, i32),
    grid_w: usize,
    grid_h: usize,
    grid: Vec<SiteId>,
    nbr: Vec<[SiteId; 6]>,
    faces: Vec<Face>,
    wedge: Vec<[FaceId; 6]>,
    face_adj: Vec<[(FaceId, FaceDirection, SiteId, u8); 3]>,
    face_deg: Vec<u8>,
    boundary: Vec<SiteId>,
    boundary_pos: Vec<u32>,
    marks: Vec<SiteId>,
    arc_of: Vec<u8>,
    touch: Vec<u8>,
}

/// Serializable description of a domain, echoed into reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub delta: f64,
    pub marks: Vec<(i32, i32)>,
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            Shape::Triangle { n } => write!(f, "shape=triangle;n={n}")?,
            Shape::Parallelogram { w, h } => write!(f, "shape=parallelogram;w={w};h={h}")?,
        }
        write!(f, ";delta={}", self.delta)?;
        let marks: Vec<String> = self.marks.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        write!(f, ";marks={}", marks.join(","))
    }
}

/// Equilateral triangle `{x, y ≥ 0, x + y ≤ n}` with marks a⟨1⟩=(0,n), a⟨τ⟩=(0,0), a⟨τ²⟩=(n,0).
pub fn build_triangle(n: u32, delta: f64) -> Result<Domain, Error> {
    if n == 0 {
        return Err(Error::InvalidDomain("triangle size must be at least 1".into()));
    }
    check_delta(delta)?;
    let n = n as i32;
    let mut pts = Vec::new();
    for y in 0..=n {
        for x in 0..=(n - y) {
            pts.push((x, y));
        }
    }
    let mut loop_pts = Vec::new();
    for y in (1..=n).rev() {
        loop_pts.push((0, y));
    }
    for x in 0..n {
        loop_pts.push((x, 0));
    }
    for k in 0..n {
        loop_pts.push((n - k, k));
    }
    let marks = [(0, n), (0, 0), (n, 0)];
    Domain::assemble(Shape::Triangle { n: n as u32 }, delta, pts, loop_pts, &marks)
}

/// Corners of a parallelogram, in counterclockwise order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    BottomLeft,
    BottomRight,
    TopRight,
    TopLeft,
}

/// Lattice parallelogram `0 ≤ x ≤ w, 0 ≤ y ≤ h` with marks at the given corners.
///
/// Marks must be listed counterclockwise (starting anywhere); 2 to 4 of them.
pub fn build_parallelogram(w: u32, h: u32, delta: f64, marks: &[Corner]) -> Result<Domain, Error> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidDomain("parallelogram sides must be at least 1".into()));
    }
    check_delta(delta)?;
    if !(2..=4).contains(&marks.len()) {
        return Err(Error::InvalidDomain("parallelogram needs 2 to 4 marks".into()));
    }
    let (w, h) = (w as i32, h as i32);
    let mut pts = Vec::new();
    for y in 0..=h {
        for x in 0..=w {
            pts.push((x, y));
        }
    }
    let mut loop_pts = Vec::new();
    for x in 0..w {
        loop_pts.push((x, 0));
    }
    for y in 0..h {
        loop_pts.push((w, y));
    }
    for x in (1..=w).rev() {
        loop_pts.push((x, h));
    }
    for y in (1..=h).rev() {
        loop_pts.push((0, y));
    }
    let mark_pts: Vec<(i32, i32)> = marks
        .iter()
        .map(|c| match c {
            Corner::BottomLeft => (0, 0),
            Corner::BottomRight => (w, 0),
            Corner::TopRight => (w, h),
            Corner::TopLeft => (0, h),
        })
        .collect();
    Domain::assemble(Shape::Parallelogram { w: w as u32, h: h as u32 }, delta, pts, loop_pts, &mark_pts)
}

fn check_delta(delta: f64) -> Result<(), Error> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("mesh must be positive, got {delta}")))
    }
}

impl Domain {
    fn assemble(
        shape: Shape,
        delta: f64,
        pts: Vec<(i32, i32)>,
        loop_pts: Vec<(i32, i32)>,
        marks: &[(i32, i32)],
    ) -> Result<Domain, Error> {
        let x0 = pts.iter().map(|p| p.0).min().unwrap() - 1;
        let y0 = pts.iter().map(|p| p.1).min().unwrap() - 1;
        let x1 = pts.iter().map(|p| p.0).max().unwrap() + 1;
        let y1 = pts.iter().map(|p| p.1).max().unwrap() + 1;
        let grid_w = (x1 - x0 + 1) as usize;
        let grid_h = (y1 - y0 + 1) as usize;
        let mut grid = vec![NONE; grid_w * grid_h];
        for (i, &(x, y)) in pts.iter().enumerate() {
            grid[(y - y0) as usize * grid_w + (x - x0) as usize] = i as SiteId;
        }
        let mut d = Domain {
            shape,
            delta,
            coords: pts,
            origin: (x0, y0),
            grid_w,
            grid_h,
            grid,
            nbr: Vec::new(),
            faces: Vec::new(),
            wedge: Vec::new(),
            face_adj: Vec::new(),
            face_deg: Vec::new(),
            boundary: Vec::new(),
            boundary_pos: Vec::new(),
            marks: Vec::new(),
            arc_of: Vec::new(),
            touch: Vec::new(),
        };
        d.nbr = d
            .coords
            .iter()
            .map(|&(x, y)| {
                let mut out = [NONE; 6];
                for (k, (dx, dy)) in DIRS.iter().enumerate() {
                    out[k] = d.site_at(x + dx, y + dy);
                }
                out
            })
            .collect();
        d.build_faces();
        d.boundary = loop_pts.iter().map(|&(x, y)| d.site_at(x, y)).collect();
        debug_assert!(d.boundary.iter().all(|&s| s != NONE));
        d.boundary_pos = vec![NONE; d.coords.len()];
        for (i, &s) in d.boundary.iter().enumerate() {
            d.boundary_pos[s as usize] = i as u32;
        }
        let mark_ids: Vec<SiteId> = marks.iter().map(|&(x, y)| d.site_at(x, y)).collect();
        d.set_marks(mark_ids)?;
        Ok(d)
    }

    fn build_faces(&mut self) {
        let (x0, y0) = self.origin;
        let cells = self.grid_w * self.grid_h;
        let mut up_id = vec![NONE; cells];
        let mut down_id = vec![NONE; cells];
        for gy in 0..self.grid_h {
            for gx in 0..self.grid_w {
                let (x, y) = (x0 + gx as i32, y0 + gy as i32);
                let up = [self.site_at(x, y), self.site_at(x + 1, y), self.site_at(x, y + 1)];
                if up.iter().all(|&s| s != NONE) {
                    up_id[gy * self.grid_w + gx] = self.faces.len() as FaceId;
                    self.faces.push(Face { corners: up, up: true, anchor: (x, y) });
                }
                let down = [self.site_at(x + 1, y), self.site_at(x, y + 1), self.site_at(x + 1, y + 1)];
                if down.iter().all(|&s| s != NONE) {
                    down_id[gy * self.grid_w + gx] = self.faces.len() as FaceId;
                    self.faces.push(Face { corners: down, up: false, anchor: (x, y) });
                }
            }
        }
        let lookup = |tab: &Vec<u32>, x: i32, y: i32| -> FaceId {
            let gx = x - x0;
            let gy = y - y0;
            if gx < 0 || gy < 0 || gx as usize >= self.grid_w || gy as usize >= self.grid_h {
                NONE
            } else {
                tab[gy as usize * self.grid_w + gx as usize]
            }
        };
        self.wedge = self
            .coords
            .iter()
            .map(|&(x, y)| {
                [
                    lookup(&up_id, x, y),
                    lookup(&down_id, x - 1, y),
                    lookup(&up_id, x - 1, y),
                    lookup(&down_id, x - 1, y - 1),
                    lookup(&up_id, x, y - 1),
                    lookup(&down_id, x, y - 1),
                ]
            })
            .collect();
        // Each adjacency entry records the crossed lattice edge as (site, direction index).
        let mut adj = Vec::with_capacity(self.faces.len());
        let mut deg = Vec::with_capacity(self.faces.len());
        for f in &self.faces {
            let (x, y) = f.anchor;
            let cand: [(FaceId, FaceDirection, SiteId, u8); 3] = if f.up {
                [
                    (lookup(&down_id, x, y), FaceDirection::D30, f.corners[1], 2),
                    (lookup(&down_id, x - 1, y), FaceDirection::D150, f.corners[0], 1),
                    (lookup(&down_id, x, y - 1), FaceDirection::D270, f.corners[0], 0),
                ]
            } else {
                [
                    (lookup(&up_id, x, y + 1), FaceDirection::D90, f.corners[1], 0),
                    (lookup(&up_id, x, y), FaceDirection::D210, f.corners[0], 2),
                    (lookup(&up_id, x + 1, y), FaceDirection::D330, f.corners[0], 1),
                ]
            };
            let mut row = [(NONE, FaceDirection::D30, NONE, 0u8); 3];
            let mut k = 0;
            for c in cand.iter() {
                if c.0 != NONE {
                    row[k] = *c;
                    k += 1;
                }
            }
            // keep boundary edges too, after the real neighbours
            for c in cand.iter() {
                if c.0 == NONE {
                    row[k] = *c;
                    k += 1;
                }
            }
            adj.push(row);
            deg.push(cand.iter().filter(|c| c.0 != NONE).count() as u8);
        }
        self.face_adj = adj;
        self.face_deg = deg;
    }

    fn set_marks(&mut self, marks: Vec<SiteId>) -> Result<(), Error> {
        if marks.is_empty() || marks.len() > 8 {
            return Err(Error::InvalidDomain("between 1 and 8 marks are supported".into()));
        }
        let mut pos = Vec::with_capacity(marks.len());
        for &m in &marks {
            if m == NONE || self.boundary_pos[m as usize] == NONE {
                return Err(Error::InvalidDomain("mark is not a boundary site".into()));
            }
            pos.push(self.boundary_pos[m as usize] as usize);
        }
        let len = self.boundary.len();
        let rel: Vec<usize> = pos.iter().map(|&p| (p + len - pos[0]) % len).collect();
        if rel.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDomain("marks must be distinct and counterclockwise".into()));
        }
        let n = self.coords.len();
        let mut arc_of = vec![NONE as u8; n];
        let m = marks.len();
        for i in 0..m {
            let start = pos[i];
            let span = match (pos[(i + 1) % m] + len - start) % len {
                0 => len,
                k => k,
            };
            for p in start..start + span {
                arc_of[self.boundary[p % len] as usize] = i as u8;
            }
        }
        let mut touch = vec![0u8; n];
        for s in 0..n {
            if arc_of[s] != NONE as u8 {
                touch[s] |= 1 << arc_of[s];
            }
        }
        for i in 0..m {
            let closing = marks[(i + 1) % m] as usize;
            touch[closing] |= 1 << i;
        }
        self.marks = marks;
        self.arc_of = arc_of;
        self.touch = touch;
        Ok(())
    }

    /// Same region with a new list of marks (boundary sites in counterclockwise order).
    pub fn with_marks(&self, marks: &[SiteId]) -> Result<Domain, Error> {
        let mut d = self.clone();
        d.set_marks(marks.to_vec())?;
        Ok(d)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn site_count(&self) -> usize {
        self.coords.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn coords(&self, s: SiteId) -> (i32, i32) {
        self.coords[s as usize]
    }

    pub fn site_at(&self, x: i32, y: i32) -> SiteId {
        let gx = x - self.origin.0;
        let gy = y - self.origin.1;
        if gx < 0 || gy < 0 || gx as usize >= self.grid_w || gy as usize >= self.grid_h {
            return NONE;
        }
        self.grid[gy as usize * self.grid_w + gx as usize]
    }

    /// Neighbour in direction `k` of [`DIRS`], or [`NONE`].
    #[inline]
    pub fn neighbor(&self, s: SiteId, k: usize) -> SiteId {
        self.nbr[s as usize][k]
    }

    #[inline]
    pub fn neighbors(&self, s: SiteId) -> &[SiteId; 6] {
        &self.nbr[s as usize]
    }

    /// Face between directions `k` and `k+1` around `s` (the face on the left of `s → s+DIRS[k]`).
    #[inline]
    pub fn wedge_face(&self, s: SiteId, k: usize) -> FaceId {
        self.wedge[s as usize][k % 6]
    }

    pub fn face(&self, f: FaceId) -> &Face {
        &self.faces[f as usize]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// In-domain faces sharing an edge with `f`, with the direction from `f` to each.
    pub fn face_adjacency(&self, f: FaceId) -> Vec<(FaceId, FaceDirection)> {
        let k = self.face_deg[f as usize] as usize;
        self.face_adj[f as usize][..k].iter().map(|e| (e.0, e.1)).collect()
    }

    /// All three edges of `f`: neighbour (or [`NONE`]) and crossed lattice edge `(site, dir)`.
    #[inline]
    pub(crate) fn face_edges(&self, f: FaceId) -> &[(FaceId, FaceDirection, SiteId, u8); 3] {
        &self.face_adj[f as usize]
    }

    /// Neighbour of `f` in direction `eta`, if inside the domain.
    pub fn face_step(&self, f: FaceId, eta: FaceDirection) -> Option<FaceId> {
        let k = self.face_deg[f as usize] as usize;
        self.face_adj[f as usize][..k].iter().find(|e| e.1 == eta).map(|e| e.0)
    }

    pub fn boundary(&self) -> &[SiteId] {
        &self.boundary
    }

    pub fn is_boundary(&self, s: SiteId) -> bool {
        self.boundary_pos[s as usize] != NONE
    }

    pub fn boundary_position(&self, s: SiteId) -> Option<usize> {
        let p = self.boundary_pos[s as usize];
        (p != NONE).then_some(p as usize)
    }

    pub fn marks(&self) -> &[SiteId] {
        &self.marks
    }

    pub fn arc_count(&self) -> usize {
        self.marks.len()
    }

    /// Arc containing `s` in the boundary partition.
    pub fn arc_of(&self, s: SiteId) -> Option<usize> {
        let a = self.arc_of[s as usize];
        (a != NONE as u8).then_some(a as usize)
    }

    /// Bit mask of arcs touched by `s`.
    #[inline]
    pub fn touch_mask(&self, s: SiteId) -> u8 {
        self.touch[s as usize]
    }

    pub fn touches(&self, s: SiteId, arc: usize) -> bool {
        self.touch[s as usize] & (1 << arc) != 0
    }

    /// Sites of arc `i` in counterclockwise order, closing mark included.
    pub fn arc_sites(&self, i: usize) -> Vec<SiteId> {
        let len = self.boundary.len();
        let start = self.boundary_pos[self.marks[i] as usize] as usize;
        let mut out = Vec::new();
        for k in 0..len {
            let s = self.boundary[(start + k) % len];
            if k > 0 && s == self.marks[(i + 1) % self.marks.len()] {
                out.push(s);
                break;
            }
            out.push(s);
        }
        out
    }

    /// Boundary edge `(boundary[i], boundary[i+1])` belongs to the arc of its first site.
    pub fn boundary_edge_arc(&self, i: usize) -> usize {
        self.arc_of[self.boundary[i] as usize] as usize
    }

    pub fn site_point(&self, s: SiteId) -> (f64, f64) {
        let (x, y) = self.coords[s as usize];
        axial_to_plane(x as f64, y as f64, self.delta)
    }

    pub fn face_center(&self, f: FaceId) -> (f64, f64) {
        let fc = &self.faces[f as usize];
        let (x, y) = fc.anchor;
        let t = if fc.up { 1.0 / 3.0 } else { 2.0 / 3.0 };
        axial_to_plane(x as f64 + t, y as f64 + t, self.delta)
    }

    pub fn spec(&self) -> DomainSpec {
        DomainSpec {
            shape: self.shape,
            delta: self.delta,
            marks: self.marks.iter().map(|&m| self.coords[m as usize]).collect(),
        }
    }

    /// Up face anchored at `(x, y)`, if present.
    pub fn up_face(&self, x: i32, y: i32) -> Option<FaceId> {
        let s = self.site_at(x, y);
        (s != NONE).then(|| self.wedge[s as usize][0]).filter(|&f| f != NONE)
    }

    /// Down face anchored at `(x, y)`, if present.
    pub fn down_face(&self, x: i32, y: i32) -> Option<FaceId> {
        let s = self.site_at(x + 1, y);
        (s != NONE).then(|| self.wedge[s as usize][1]).filter(|&f| f != NONE)
    }

    /// Number of lattice edges with both ends in the domain.
    pub fn edge_count(&self) -> usize {
        self.nbr.iter().map(|n| n.iter().filter(|&&t| t != NONE).count()).sum::<usize>() / 2
    }
}

pub fn axial_to_plane(x: f64, y: f64, delta: f64) -> (f64, f64) {
    (delta * (x + 0.5 * y), delta * y * SQRT3_2)
}
