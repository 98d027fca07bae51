//! Cluster labeling, crossing queries and annulus arm events.

use crate::lattice::{Domain, SiteId, DIRS, NONE};
use crate::sampler::Coloring;
use crate::Error;

/// Disjoint sets with path compression and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parents: Vec<u32>,
    sizes: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parents: (0..n as u32).collect(), sizes: vec![1; n] }
    }

    pub fn reset(&mut self, n: usize) {
        self.parents.clear();
        self.parents.extend(0..n as u32);
        self.sizes.clear();
        self.sizes.resize(n, 1);
    }

    pub fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parents[root as usize] != root {
            root = self.parents[root as usize];
        }
        let mut cur = x;
        while self.parents[cur as usize] != root {
            let next = self.parents[cur as usize];
            self.parents[cur as usize] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.sizes[ra as usize] < self.sizes[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parents[rb as usize] = ra;
        self.sizes[ra as usize] += self.sizes[rb as usize];
        true
    }

    pub fn size(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.sizes[r as usize]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterInfo {
    pub size: u32,
    /// Bit `i` set iff the cluster touches arc `i`.
    pub arcs: u8,
}

/// Connected components of one color, numbered in order of their first site.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    pub color: bool,
    pub labels: Vec<u32>,
    pub clusters: Vec<ClusterInfo>,
}

impl ClusterLabeling {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn label(&self, s: SiteId) -> Option<u32> {
        let l = self.labels[s as usize];
        (l != NONE).then_some(l)
    }
}

pub fn label_clusters(d: &Domain, c: &Coloring, color: bool) -> ClusterLabeling {
    let n = d.site_count();
    let mut uf = UnionFind::new(n);
    for s in 0..n {
        if c.is_blue(s) != color {
            continue;
        }
        for k in 0..3 {
            let t = d.neighbor(s as SiteId, k);
            if t != NONE && c.is_blue(t as usize) == color {
                uf.union(s as u32, t);
            }
        }
    }
    let mut labels = vec![NONE; n];
    let mut root_label = vec![NONE; n];
    let mut clusters: Vec<ClusterInfo> = Vec::new();
    for s in 0..n {
        if c.is_blue(s) != color {
            continue;
        }
        let r = uf.find(s as u32) as usize;
        if root_label[r] == NONE {
            root_label[r] = clusters.len() as u32;
            clusters.push(ClusterInfo { size: 0, arcs: 0 });
        }
        let l = root_label[r];
        labels[s] = l;
        clusters[l as usize].size += 1;
        clusters[l as usize].arcs |= d.touch_mask(s as SiteId);
    }
    ClusterLabeling { color, labels, clusters }
}

/// True iff one cluster touches both arcs.
pub fn crossing_exists(l: &ClusterLabeling, arc_a: usize, arc_b: usize) -> bool {
    count_spanning_clusters(l, arc_a, arc_b) > 0
}

pub fn count_spanning_clusters(l: &ClusterLabeling, arc_a: usize, arc_b: usize) -> usize {
    let m = (1u8 << arc_a) | (1u8 << arc_b);
    l.clusters.iter().filter(|k| k.arcs & m == m).count()
}

/// Hexagonal (graph) distance between axial offsets.
pub fn hex_distance(dx: i32, dy: i32) -> u32 {
    ((dx.abs() + dy.abs() + (dx + dy).abs()) / 2) as u32
}

/// Sites at graph distance `r ≤ dist < big_r` from a centre site.
#[derive(Clone, Debug)]
pub struct Annulus {
    pub center: SiteId,
    pub r: u32,
    pub big_r: u32,
    /// Annulus sites; `local[s]` indexes into this list.
    pub sites: Vec<SiteId>,
    local: Vec<u32>,
    dist: Vec<u32>,
    /// Inner ring (distance `r`) in counterclockwise order, as local indices.
    pub inner_ring: Vec<u32>,
}

impl Annulus {
    pub fn new(d: &Domain, center: SiteId, r: u32, big_r: u32) -> Result<Annulus, Error> {
        if r == 0 || r >= big_r {
            return Err(Error::Geometry(format!("annulus needs 0 < r < R, got r={r}, R={big_r}")));
        }
        let (cx, cy) = d.coords(center);
        let rr = big_r as i32 - 1;
        let mut sites = Vec::new();
        let mut dist = Vec::new();
        let mut local = vec![NONE; d.site_count()];
        for dy in -rr..=rr {
            for dx in -rr..=rr {
                let h = hex_distance(dx, dy);
                if h > rr as u32 {
                    continue;
                }
                let s = d.site_at(cx + dx, cy + dy);
                if s == NONE {
                    return Err(Error::Geometry("annulus does not fit in the domain".into()));
                }
                if h >= r {
                    local[s as usize] = sites.len() as u32;
                    sites.push(s);
                    dist.push(h);
                }
            }
        }
        let mut inner_ring = Vec::new();
        let (mut x, mut y) = (cx + DIRS[4].0 * r as i32, cy + DIRS[4].1 * r as i32);
        for side in 0..6 {
            for _ in 0..r {
                inner_ring.push(local[d.site_at(x, y) as usize]);
                x += DIRS[side].0;
                y += DIRS[side].1;
            }
        }
        Ok(Annulus { center, r, big_r, sites, local, dist, inner_ring })
    }

    pub fn is_inner(&self, i: u32) -> bool {
        self.dist[i as usize] == self.r
    }

    pub fn is_outer(&self, i: u32) -> bool {
        self.dist[i as usize] == self.big_r - 1
    }

    fn local_neighbors<'a>(&'a self, d: &'a Domain, i: u32) -> impl Iterator<Item = u32> + 'a {
        d.neighbors(self.sites[i as usize])
            .iter()
            .filter(|&&t| t != NONE)
            .map(move |&t| self.local[t as usize])
            .filter(|&j| j != NONE)
    }
}

/// Parses a pattern such as `"BYBYB"` (B = blue = true).
pub fn parse_pattern(p: &str) -> Result<Vec<bool>, Error> {
    p.chars()
        .map(|ch| match ch {
            'B' | 'b' => Ok(true),
            'Y' | 'y' => Ok(false),
            _ => Err(Error::Argument(format!("pattern letter {ch:?} is not B or Y"))),
        })
        .collect()
}

/// Whether the annulus is crossed by `pattern.len()` disjoint monochromatic paths whose
/// colors, read counterclockwise, match `pattern` up to rotation.
///
/// Crossing clusters of the two colors alternate around the annulus; each contributes as many
/// arms as it has vertex-disjoint crossings, and the pattern is matched greedily around the
/// cyclic sequence of clusters from every starting cluster and rotation.
pub fn arm_event(d: &Domain, c: &Coloring, a: &Annulus, pattern: &[bool]) -> bool {
    if pattern.is_empty() {
        return true;
    }
    let n = a.sites.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n as u32 {
        let col = c.is_blue(a.sites[i as usize] as usize);
        for j in a.local_neighbors(d, i) {
            if j > i && c.is_blue(a.sites[j as usize] as usize) == col {
                uf.union(i, j);
            }
        }
    }
    let mut touches = vec![0u8; n];
    for i in 0..n as u32 {
        let r = uf.find(i) as usize;
        if a.is_inner(i) {
            touches[r] |= 1;
        }
        if a.is_outer(i) {
            touches[r] |= 2;
        }
    }
    let crossing = |uf: &mut UnionFind, i: u32| touches[uf.find(i) as usize] == 3;
    let need_blue = pattern.iter().filter(|&&b| b).count();
    let need_yellow = pattern.len() - need_blue;

    // cyclic order of crossing clusters along the inner ring
    let mut order: Vec<u32> = Vec::new();
    for &i in &a.inner_ring {
        if crossing(&mut uf, i) {
            let root = uf.find(i);
            if order.last() != Some(&root) {
                order.push(root);
            }
        }
    }
    while order.len() > 1 && order.first() == order.last() {
        order.pop();
    }
    let color_of = |root: u32| c.is_blue(a.sites[root as usize] as usize);
    let mut distinct = order.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < order.len() {
        // a cluster wraps around the only cluster of the other color
        debug_assert_eq!(distinct.len(), 2);
        order = distinct;
    }
    let caps: Vec<usize> = order
        .iter()
        .map(|&root| {
            let need = if color_of(root) { need_blue } else { need_yellow };
            disjoint_crossings(d, a, &mut uf, root, need)
        })
        .collect();

    if need_yellow == 0 || need_blue == 0 {
        let col = need_blue > 0;
        let total: usize = order.iter().zip(&caps).filter(|(&r, _)| color_of(r) == col).map(|(_, &k)| k).sum();
        return total >= pattern.len();
    }
    let m = order.len();
    let len = pattern.len();
    for start in 0..m {
        for rot in 0..len {
            let mut idx = 0;
            for j in 0..m {
                let k = (start + j) % m;
                let col = color_of(order[k]);
                let mut used = 0;
                while idx < len && pattern[(rot + idx) % len] == col && used < caps[k] {
                    idx += 1;
                    used += 1;
                }
                if idx == len {
                    return true;
                }
            }
        }
    }
    false
}

/// Maximum number (capped at `cap`) of vertex-disjoint inner-to-outer paths inside one cluster.
fn disjoint_crossings(d: &Domain, a: &Annulus, uf: &mut UnionFind, root: u32, cap: usize) -> usize {
    if cap == 0 {
        return 0;
    }
    let members: Vec<u32> = (0..a.sites.len() as u32).filter(|&i| uf.find(i) == root).collect();
    let mut idx = vec![NONE; a.sites.len()];
    for (k, &i) in members.iter().enumerate() {
        idx[i as usize] = k as u32;
    }
    let m = members.len();
    // node 2k = in, 2k+1 = out; source 2m, sink 2m+1
    let (src, snk) = (2 * m, 2 * m + 1);
    let mut head = vec![usize::MAX; 2 * m + 2];
    let mut to = Vec::new();
    let mut capy = Vec::new();
    let mut next = Vec::new();
    let mut add = |u: usize, v: usize, c: i32, head: &mut Vec<usize>| {
        for (a_, b_, c_) in [(u, v, c), (v, u, 0)] {
            to.push(b_);
            capy.push(c_);
            next.push(head[a_]);
            head[a_] = to.len() - 1;
        }
    };
    for (k, &i) in members.iter().enumerate() {
        add(2 * k, 2 * k + 1, 1, &mut head);
        if a.is_inner(i) {
            add(src, 2 * k, 1, &mut head);
        }
        if a.is_outer(i) {
            add(2 * k + 1, snk, 1, &mut head);
        }
        for j in a.local_neighbors(d, i) {
            let kj = idx[j as usize];
            if kj != NONE {
                add(2 * k + 1, 2 * kj as usize, 1, &mut head);
            }
        }
    }
    let mut flow = 0;
    let mut prev_edge = vec![usize::MAX; 2 * m + 2];
    while flow < cap {
        prev_edge.iter_mut().for_each(|p| *p = usize::MAX);
        let mut queue = std::collections::VecDeque::from([src]);
        let mut seen = vec![false; 2 * m + 2];
        seen[src] = true;
        while let Some(u) = queue.pop_front() {
            if u == snk {
                break;
            }
            let mut e = head[u];
            while e != usize::MAX {
                let v = to[e];
                if capy[e] > 0 && !seen[v] {
                    seen[v] = true;
                    prev_edge[v] = e;
                    queue.push_back(v);
                }
                e = next[e];
            }
        }
        if !seen[snk] {
            break;
        }
        let mut v = snk;
        while v != src {
            let e = prev_edge[v];
            capy[e] -= 1;
            capy[e ^ 1] += 1;
            v = to[e ^ 1];
        }
        flow += 1;
    }
    flow
}
