//! Polygonal curve networks in the plane.
//!
//! Chains are polylines whose ends are triple junctions or points on the
//! truncation circle `|x| = R`. A chain carries the labels `(left, right)`
//! of the faces on either side of its direction of travel; its unit normal
//! points from `left` into `right`. Face areas are computed from the 1-form
//! `ω = (2π)^{-1}(1 - e^{-r²/2}) dθ` along chains plus `Δθ / 2π` for each
//! arc of the circle a face owns, so the region beyond the circle is split
//! radially and the areas sum to 1 exactly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SimplicialPartition;
use crate::measure::{omega_kernel, segment_measure, segments_intersect, TRUNCATION_RADIUS};
use crate::normal::{INV_SQRT_2PI, SQRT_2PI};
use crate::quadrature::gauss_legendre_unit;
use crate::simplicial::{solve_shift, VolumeVector};

/// Longest sub-segment handled by a single Gauss–Legendre panel.
const PANEL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Interior,
    Junction,
    /// On the truncation circle; moves only along it.
    Boundary,
}

/// Polyline with face labels `(left, right)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub nodes: Vec<usize>,
    pub labels: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalNetwork {
    pub m: usize,
    pub radius: f64,
    pub vertices: Vec<[f64; 2]>,
    pub kinds: Vec<VertexKind>,
    #[serde(rename = "edges")]
    pub chains: Vec<Chain>,
}

/// What stopped a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyEvent {
    EdgeCollision { chains: (usize, usize), segments: (usize, usize) },
    JunctionCollapse { vertex: usize, length: f64 },
}

/// Moments of `γ_1` along a segment, `τ ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SegmentMoments {
    pub m0: f64,
    pub m1: f64,
    pub xa: [f64; 2],
    pub xb: [f64; 2],
}

pub(crate) fn segment_moments(a: [f64; 2], b: [f64; 2]) -> SegmentMoments {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let panels = ((len / PANEL).ceil() as usize).max(1);
    let gl = gauss_legendre_unit();
    let mut out = SegmentMoments {
        m0: 0.0,
        m1: 0.0,
        xa: [0.0; 2],
        xb: [0.0; 2],
    };
    let width = 1.0 / panels as f64;
    for p in 0..panels {
        for &(node, weight) in &gl {
            let tau = (p as f64 + node) * width;
            let w = weight * width;
            let x = [a[0] + tau * d[0], a[1] + tau * d[1]];
            let g = INV_SQRT_2PI * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp();
            out.m0 += w * g;
            out.m1 += w * tau * g;
            for c in 0..2 {
                out.xa[c] += w * (1.0 - tau) * x[c] * g;
                out.xb[c] += w * tau * x[c] * g;
            }
        }
    }
    out
}

/// `∫ ω` along the segment A→B.
pub(crate) fn segment_omega(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    if cross == 0.0 {
        return 0.0;
    }
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let panels = ((len / PANEL).ceil() as usize).max(1);
    let width = 1.0 / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        for &(node, weight) in &gauss_legendre_unit() {
            let tau = (p as f64 + node) * width;
            let x = [a[0] + tau * d[0], a[1] + tau * d[1]];
            acc += weight * width * omega_kernel(x[0] * x[0] + x[1] * x[1]);
        }
    }
    cross / (2.0 * PI) * acc
}

pub(crate) fn right_normal(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    [d[1] / len, -d[0] / len]
}

fn angle_of(p: [f64; 2]) -> f64 {
    p[1].atan2(p[0]).rem_euclid(2.0 * PI)
}

/// Where a chain touches the circle: owner of the arc just after the point
/// (counter-clockwise) and just before it.
struct BoundaryEnd {
    angle: f64,
    after: usize,
    before: usize,
}

impl PolygonalNetwork {
    pub fn new(
        m: usize,
        radius: f64,
        vertices: Vec<[f64; 2]>,
        kinds: Vec<VertexKind>,
        chains: Vec<Chain>,
    ) -> Result<Self> {
        let net = PolygonalNetwork {
            m,
            radius,
            vertices,
            kinds,
            chains,
        };
        net.validate()?;
        Ok(net)
    }

    /// Three straight chains from `center` to the circle along the
    /// interfaces of the m = 3 simplicial partition shifted to `center`.
    pub fn tripod(center: [f64; 2], nodes_per_ray: usize, radius: f64) -> Result<Self> {
        if nodes_per_ray < 3 {
            return Err(Error::invalid("a tripod ray needs at least 3 nodes"));
        }
        if center[0].hypot(center[1]) >= 0.5 * radius {
            return Err(Error::invalid("tripod center is too close to the truncation circle"));
        }
        let p = SimplicialPartition::with_shift(3, &center)?;
        let mut vertices = vec![center];
        let mut kinds = vec![VertexKind::Junction];
        let mut chains = Vec::with_capacity(3);
        for piece in p.interfaces()? {
            let d = [piece.frame[0][0], piece.frame[0][1]];
            let n = [piece.normal[0], piece.normal[1]];
            // |c + s d| = R
            let cd = center[0] * d[0] + center[1] * d[1];
            let cc = center[0] * center[0] + center[1] * center[1];
            let smax = -cd + (cd * cd - cc + radius * radius).sqrt();
            let mut nodes = vec![0];
            for k in 1..nodes_per_ray {
                let s = smax * k as f64 / (nodes_per_ray - 1) as f64;
                let mut x = [center[0] + s * d[0], center[1] + s * d[1]];
                let kind = if k + 1 == nodes_per_ray {
                    let r = x[0].hypot(x[1]);
                    x = [x[0] * radius / r, x[1] * radius / r];
                    VertexKind::Boundary
                } else {
                    VertexKind::Interior
                };
                nodes.push(vertices.len());
                vertices.push(x);
                kinds.push(kind);
            }
            // Travelling along d, the right normal is (d_y, -d_x).
            let (i, j) = piece.labels;
            let labels = if d[1] * n[0] - d[0] * n[1] > 0.0 { (i, j) } else { (j, i) };
            chains.push(Chain { nodes, labels });
        }
        Self::new(3, radius, vertices, kinds, chains)
    }

    /// Tripod at the shift `y(a)`.
    pub fn tripod_for(a: &VolumeVector, nodes_per_ray: usize) -> Result<Self> {
        if a.m() != 3 {
            return Err(Error::invalid("tripod networks need m = 3"));
        }
        let y = solve_shift(a)?.y;
        Self::tripod([y[0], y[1]], nodes_per_ray, TRUNCATION_RADIUS)
    }

    /// Vertical lines `x = t_k` across the disc; the face left of `t_k`
    /// carries `labels[k]`.
    pub fn slabs(breaks: &[f64], labels: &[usize], nodes_per_line: usize, radius: f64) -> Result<Self> {
        if labels.len() != breaks.len() + 1 || breaks.is_empty() {
            return Err(Error::invalid("slabs need one more label than breakpoints"));
        }
        if nodes_per_line < 3 {
            return Err(Error::invalid("a slab line needs at least 3 nodes"));
        }
        let m = labels.iter().max().map_or(0, |l| l + 1);
        let mut vertices = vec![];
        let mut kinds = vec![];
        let mut chains = vec![];
        for (k, &t) in breaks.iter().enumerate() {
            if t.abs() >= 0.5 * radius {
                return Err(Error::invalid("slab breakpoint too close to the truncation circle"));
            }
            let h = (radius * radius - t * t).sqrt();
            let mut nodes = vec![];
            for q in 0..nodes_per_line {
                let y = -h + 2.0 * h * q as f64 / (nodes_per_line - 1) as f64;
                let end = q == 0 || q + 1 == nodes_per_line;
                nodes.push(vertices.len());
                vertices.push([t, y]);
                kinds.push(if end { VertexKind::Boundary } else { VertexKind::Interior });
            }
            chains.push(Chain {
                nodes,
                labels: (labels[k], labels[k + 1]),
            });
        }
        Self::new(m, radius, vertices, kinds, chains)
    }

    /// Uniform jitter of every vertex: `[-amp, amp]²` off the circle, an
    /// arc of at most `amp` along it.
    pub fn jittered(&self, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for (v, kind) in out.vertices.iter_mut().zip(&self.kinds) {
            match kind {
                VertexKind::Boundary => {
                    let th = angle_of(*v) + rng.gen_range(-amplitude..=amplitude) / self.radius;
                    *v = [self.radius * th.cos(), self.radius * th.sin()];
                }
                _ => {
                    v[0] += rng.gen_range(-amplitude..=amplitude);
                    v[1] += rng.gen_range(-amplitude..=amplitude);
                }
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn node_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn junctions(&self) -> Vec<usize> {
        (0..self.kinds.len())
            .filter(|&v| self.kinds[v] == VertexKind::Junction)
            .collect()
    }

    /// Chains touching `v` as `(chain, starts_at_v)`.
    pub fn incident(&self, v: usize) -> Vec<(usize, bool)> {
        let mut out = vec![];
        for (c, chain) in self.chains.iter().enumerate() {
            if chain.nodes[0] == v {
                out.push((c, true));
            }
            if *chain.nodes.last().unwrap() == v {
                out.push((c, false));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMesh(m));
        let nv = self.vertices.len();
        if self.kinds.len() != nv {
            return bad("one kind per vertex is required".into());
        }
        if !(self.radius > 0.0) || self.m < 2 {
            return bad("need a positive truncation radius and m >= 2".into());
        }
        if self.vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return bad("non-finite vertex".into());
        }
        let mut uses = vec![0usize; nv];
        for (c, chain) in self.chains.iter().enumerate() {
            let (l, r) = chain.labels;
            if l == r || l >= self.m || r >= self.m {
                return bad(format!("chain {c} has invalid labels {:?}", chain.labels));
            }
            if chain.nodes.len() < 2 || chain.nodes.iter().any(|&v| v >= nv) {
                return bad(format!("chain {c} has fewer than 2 nodes or a bad index"));
            }
            for (k, &v) in chain.nodes.iter().enumerate() {
                uses[v] += 1;
                let end = k == 0 || k + 1 == chain.nodes.len();
                let ok = match self.kinds[v] {
                    VertexKind::Interior => !end,
                    _ => end,
                };
                if !ok {
                    return bad(format!("chain {c}: vertex {v} has the wrong kind for its position"));
                }
            }
            for w in chain.nodes.windows(2) {
                let (a, b) = (self.vertices[w[0]], self.vertices[w[1]]);
                if a == b {
                    return bad(format!("chain {c} has a zero-length segment"));
                }
            }
        }
        for v in 0..nv {
            let want = match self.kinds[v] {
                VertexKind::Interior | VertexKind::Boundary => 1,
                VertexKind::Junction => 3,
            };
            if uses[v] != want {
                return bad(format!("vertex {v} is used {} times, expected {want}", uses[v]));
            }
            if self.kinds[v] == VertexKind::Boundary {
                let r = self.vertices[v][0].hypot(self.vertices[v][1]);
                if (r - self.radius).abs() > 1e-9 * self.radius {
                    return bad(format!("boundary vertex {v} is off the truncation circle"));
                }
            } else if self.vertices[v][0].hypot(self.vertices[v][1]) >= self.radius {
                return bad(format!("vertex {v} lies outside the truncation disc"));
            }
        }
        for j in self.junctions() {
            self.check_junction(j)?;
        }
        let ends = self.boundary_ends();
        if ends.is_empty() {
            return bad("at least one chain must reach the truncation circle".into());
        }
        for k in 0..ends.len() {
            let next = &ends[(k + 1) % ends.len()];
            if ends[k].after != next.before {
                return bad("face labels along the truncation circle are inconsistent".into());
            }
        }
        if let Some(ev) = self.collision() {
            return bad(format!("network intersects itself: {ev:?}"));
        }
        Ok(())
    }

    fn check_junction(&self, j: usize) -> Result<()> {
        let p = self.vertices[j];
        let mut arms: Vec<(f64, usize, usize)> = self
            .incident(j)
            .into_iter()
            .map(|(c, start)| {
                let chain = &self.chains[c];
                let q = if start {
                    self.vertices[chain.nodes[1]]
                } else {
                    self.vertices[chain.nodes[chain.nodes.len() - 2]]
                };
                let (l, r) = chain.labels;
                // Leaving the junction, the face counter-clockwise of the arm
                // is the left face when travelling forward.
                let (ccw, cw) = if start { (l, r) } else { (r, l) };
                ((q[1] - p[1]).atan2(q[0] - p[0]), ccw, cw)
            })
            .collect();
        arms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut labels = vec![];
        for k in 0..3 {
            if arms[k].1 != arms[(k + 1) % 3].2 {
                return Err(Error::InvalidMesh(format!(
                    "faces around junction {j} are inconsistent"
                )));
            }
            labels.push(arms[k].1);
        }
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != 3 {
            return Err(Error::InvalidMesh(format!(
                "junction {j} does not join three distinct faces"
            )));
        }
        Ok(())
    }

    fn boundary_ends(&self) -> Vec<BoundaryEnd> {
        let mut ends = vec![];
        for chain in &self.chains {
            let (l, r) = chain.labels;
            let first = chain.nodes[0];
            let last = *chain.nodes.last().unwrap();
            if self.kinds[first] == VertexKind::Boundary {
                ends.push(BoundaryEnd {
                    angle: angle_of(self.vertices[first]),
                    after: r,
                    before: l,
                });
            }
            if self.kinds[last] == VertexKind::Boundary {
                ends.push(BoundaryEnd {
                    angle: angle_of(self.vertices[last]),
                    after: l,
                    before: r,
                });
            }
        }
        ends.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        ends
    }

    /// Weighted length `Σ ∫ γ_1 ds` over all segments.
    pub fn cost(&self) -> f64 {
        self.segments().map(|(a, b)| segment_measure(a, b)).sum()
    }

    fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.chains.iter().flat_map(move |c| {
            c.nodes
                .windows(2)
                .map(move |w| (self.vertices[w[0]], self.vertices[w[1]]))
        })
    }

    /// Gaussian area of each face.
    pub fn volumes(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for chain in &self.chains {
            let w: f64 = chain
                .nodes
                .windows(2)
                .map(|s| segment_omega(self.vertices[s[0]], self.vertices[s[1]]))
                .sum();
            out[chain.labels.0] += w;
            out[chain.labels.1] -= w;
        }
        let ends = self.boundary_ends();
        for k in 0..ends.len() {
            let next = ends[(k + 1) % ends.len()].angle;
            let mut span = (next - ends[k].angle).rem_euclid(2.0 * PI);
            if ends.len() == 1 {
                span = 2.0 * PI;
            }
            out[ends[k].after] += span / (2.0 * PI);
        }
        out
    }

    /// Gradient of [`cost`](Self::cost) with respect to every vertex
    /// position.
    pub fn cost_gradient(&self) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0; 2]; self.vertices.len()];
        for chain in &self.chains {
            for w in chain.nodes.windows(2) {
                let (a, b) = (self.vertices[w[0]], self.vertices[w[1]]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let len = d[0].hypot(d[1]);
                let u = [d[0] / len, d[1] / len];
                let mo = segment_moments(a, b);
                for c in 0..2 {
                    g[w[0]][c] += -u[c] * mo.m0 - len * mo.xa[c];
                    g[w[1]][c] += u[c] * mo.m0 - len * mo.xb[c];
                }
            }
        }
        g
    }

    /// `grad[face][vertex]` of [`volumes`](Self::volumes) for motions that
    /// keep boundary vertices on the circle; the circle term
    /// `e^{-R²/2}/(2π)` per radian is returned separately as
    /// `arc[face][vertex]` (derivative with respect to the angle).
    pub fn volume_gradient(&self) -> (Vec<Vec<[f64; 2]>>, Vec<Vec<f64>>) {
        let nv = self.vertices.len();
        let mut g = vec![vec![[0.0; 2]; nv]; self.m];
        for chain in &self.chains {
            let (l, r) = chain.labels;
            for w in chain.nodes.windows(2) {
                let (a, b) = (self.vertices[w[0]], self.vertices[w[1]]);
                let n = right_normal(a, b);
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let mo = segment_moments(a, b);
                let ca = len * (mo.m0 - mo.m1) / SQRT_2PI;
                let cb = len * mo.m1 / SQRT_2PI;
                for c in 0..2 {
                    g[l][w[0]][c] += n[c] * ca;
                    g[l][w[1]][c] += n[c] * cb;
                    g[r][w[0]][c] -= n[c] * ca;
                    g[r][w[1]][c] -= n[c] * cb;
                }
            }
        }
        let tail = (-0.5 * self.radius * self.radius).exp() / (2.0 * PI);
        let mut arc = vec![vec![0.0; nv]; self.m];
        for chain in &self.chains {
            let (l, r) = chain.labels;
            let first = chain.nodes[0];
            let last = *chain.nodes.last().unwrap();
            // Rotating an end counter-clockwise grows the face before it.
            if self.kinds[first] == VertexKind::Boundary {
                arc[l][first] += tail;
                arc[r][first] -= tail;
            }
            if self.kinds[last] == VertexKind::Boundary {
                arc[r][last] += tail;
                arc[l][last] -= tail;
            }
        }
        (g, arc)
    }

    /// Lumped weighted mass at each vertex: half the weighted length of the
    /// adjacent segments.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.vertices.len()];
        for chain in &self.chains {
            for w in chain.nodes.windows(2) {
                let s = 0.5 * segment_measure(self.vertices[w[0]], self.vertices[w[1]]);
                mass[w[0]] += s;
                mass[w[1]] += s;
            }
        }
        mass
    }

    /// Unit normal at an interior node of a chain (mean of the adjacent
    /// segment normals), pointing from the left face into the right one.
    pub fn node_normal(&self, chain: usize, k: usize) -> [f64; 2] {
        let nodes = &self.chains[chain].nodes;
        let p = |i: usize| self.vertices[nodes[i]];
        let n1 = right_normal(p(k - 1), p(k));
        let n2 = right_normal(p(k), p(k + 1));
        let s = [n1[0] + n2[0], n1[1] + n2[1]];
        let len = s[0].hypot(s[1]);
        if len < 1e-12 {
            n2
        } else {
            [s[0] / len, s[1] / len]
        }
    }

    /// First crossing between non-adjacent segments, or a segment at a
    /// junction shorter than `1e-6`.
    pub fn collision(&self) -> Option<TopologyEvent> {
        let mut segs: Vec<(usize, usize, usize, usize)> = vec![];
        for (c, chain) in self.chains.iter().enumerate() {
            for (k, w) in chain.nodes.windows(2).enumerate() {
                segs.push((c, k, w[0], w[1]));
                for &v in w {
                    if self.kinds[v] == VertexKind::Junction {
                        let length = (self.vertices[w[1]][0] - self.vertices[w[0]][0])
                            .hypot(self.vertices[w[1]][1] - self.vertices[w[0]][1]);
                        if length < 1e-6 {
                            return Some(TopologyEvent::JunctionCollapse { vertex: v, length });
                        }
                    }
                }
            }
        }
        // Uniform grid with cells no smaller than the longest segment.
        let cell = segs
            .iter()
            .map(|s| {
                let (a, b) = (self.vertices[s.2], self.vertices[s.3]);
                (b[0] - a[0]).abs().max((b[1] - a[1]).abs())
            })
            .fold(1e-9, f64::max);
        let key = |x: f64| (x / cell).floor() as i64;
        let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
        for (i, s) in segs.iter().enumerate() {
            let (a, b) = (self.vertices[s.2], self.vertices[s.3]);
            for gx in key(a[0].min(b[0]))..=key(a[0].max(b[0])) {
                for gy in key(a[1].min(b[1]))..=key(a[1].max(b[1])) {
                    grid.entry((gx, gy)).or_default().push(i);
                }
            }
        }
        let mut keys: Vec<_> = grid.keys().copied().collect();
        keys.sort_unstable();
        for cellkey in keys {
            let list = &grid[&cellkey];
            for (x, &i) in list.iter().enumerate() {
                for &j in &list[x + 1..] {
                    let (si, sj) = (segs[i], segs[j]);
                    if si.2 == sj.2 || si.2 == sj.3 || si.3 == sj.2 || si.3 == sj.3 {
                        continue;
                    }
                    if segments_intersect(
                        self.vertices[si.2],
                        self.vertices[si.3],
                        self.vertices[sj.2],
                        self.vertices[sj.3],
                    ) {
                        return Some(TopologyEvent::EdgeCollision {
                            chains: (si.0, sj.0),
                            segments: (si.1, sj.1),
                        });
                    }
                }
            }
        }
        None
    }

    /// Redistributes the interior nodes of every chain uniformly in
    /// arclength; ends stay fixed.
    pub fn remesh(&mut self) {
        for c in 0..self.chains.len() {
            let nodes = self.chains[c].nodes.clone();
            let pts: Vec<[f64; 2]> = nodes.iter().map(|&v| self.vertices[v]).collect();
            let mut cum = vec![0.0];
            for w in pts.windows(2) {
                let l = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
                cum.push(cum.last().unwrap() + l);
            }
            let total = *cum.last().unwrap();
            let n = nodes.len();
            let mut seg = 0;
            for k in 1..n - 1 {
                let s = total * k as f64 / (n - 1) as f64;
                while seg + 2 < cum.len() && cum[seg + 1] < s {
                    seg += 1;
                }
                let t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
                let (a, b) = (pts[seg], pts[seg + 1]);
                self.vertices[nodes[k]] = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            }
        }
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: PolygonalNetwork = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("network JSON: {e}")))?;
        net.validate()?;
        Ok(net)
    }

    /// `x,y,edge_label` rows, one per node and chain.
    pub fn to_plot_csv(&self) -> String {
        let mut out = String::from("x,y,edge_label\n");
        for chain in &self.chains {
            for &v in &chain.nodes {
                let p = self.vertices[v];
                out.push_str(&format!(
                    "{:.16e},{:.16e},{}-{}\n",
                    p[0], p[1], chain.labels.0, chain.labels.1
                ));
            }
        }
        out
    }
}
