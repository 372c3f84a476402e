//! Second variation on planar curve networks.
//!
//! For a family `F = (f_ij)` of normal speeds on the interfaces,
//!
//! ```text
//! Q(F, G) = Σ ∫ [<∇f, ∇g> - (|A|² + 1) f g] γ ds + Σ_junctions Σ q f g γ
//! <F, G>  = Σ ∫ f g γ ds
//! L f     = f'' - <x, T> f' + (|A|² + 1) f
//! ```
//!
//! with γ the one-dimensional Gaussian weight at ambient points. Edges are
//! discretised by P1 elements: trapezoidal stiffness weights and a lumped
//! mass. The admissibility condition `Σ ±f = 0` at each triple junction is
//! imposed strongly by a two-dimensional reduced basis per junction; outer
//! ends cut at the truncation radius carry Dirichlet conditions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::SimplicialPartition;
use crate::normal::INV_SQRT_2PI;

/// Fewest nodes per edge accepted by [`apply_l`].
pub const MIN_NODES: usize = 8;

/// Largest reduced system solved with a full eigendecomposition; larger
/// systems compute eigenvalues only and recover one eigenvector by inverse
/// iteration.
const FULL_EIGEN_LIMIT: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EndCondition {
    /// Value pinned to zero (truncation radius).
    Dirichlet,
    /// Natural boundary condition.
    Free,
    /// Endpoint of junction number `.0`.
    Junction(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Start,
    End,
}

/// One meshed interface Σ_ij.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshEdge {
    pub points: Vec<[f64; 2]>,
    /// Unit normal N_ij at each node, pointing from `labels.0` into `labels.1`.
    pub normals: Vec<[f64; 2]>,
    /// |A|² at each node.
    pub a2: Vec<f64>,
    pub labels: (usize, usize),
    /// Closed curves wrap around; `ends` is ignored for them.
    pub closed: bool,
    pub ends: [EndCondition; 2],
}

impl MeshEdge {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn node(&self, end: End) -> usize {
        match end {
            End::Start => 0,
            End::End => self.points.len() - 1,
        }
    }

    fn spacing(&self, k: usize) -> f64 {
        let a = self.points[k];
        let b = self.points[(k + 1) % self.points.len()];
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    fn segments(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }
}

/// Three edge endpoints identified at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Junction {
    pub slots: [(usize, End); 3],
    /// Junction coefficients q per slot; zero on straight networks.
    pub q: [f64; 3],
}

/// Junction coefficients from the geodesic curvatures of the three edges.
///
/// `c[s]` is `<∇_ν ν, N>` of the edge in slot `s` at the junction (ν the
/// outward conormal, N the edge normal), with labels `labels[s]`. Returns
/// `q_ij = (c_kj + c_ki)/√3` per slot; these sum to zero because `c`
/// changes sign with the label order.
pub fn junction_q(labels: [(usize, usize); 3], c: [f64; 3]) -> Result<[f64; 3]> {
    let oriented = |p: usize, q: usize| -> Result<f64> {
        for s in 0..3 {
            if labels[s] == (p, q) {
                return Ok(c[s]);
            }
            if labels[s] == (q, p) {
                return Ok(-c[s]);
            }
        }
        Err(Error::InvalidMesh(format!("no edge with labels {{{p}, {q}}} at junction")))
    };
    let mut out = [0.0; 3];
    for s in 0..3 {
        let (i, j) = labels[s];
        let k = third_label(&labels, i, j)?;
        out[s] = (oriented(k, j)? + oriented(k, i)?) / 3f64.sqrt();
    }
    Ok(out)
}

fn third_label(labels: &[(usize, usize); 3], i: usize, j: usize) -> Result<usize> {
    labels
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .find(|&l| l != i && l != j)
        .ok_or_else(|| Error::InvalidMesh("junction does not join three labels".into()))
}

/// A meshed planar curve network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveNetworkMesh {
    pub edges: Vec<MeshEdge>,
    pub junctions: Vec<Junction>,
}

fn weight(p: [f64; 2]) -> f64 {
    INV_SQRT_2PI * (-0.5 * (p[0] * p[0] + p[1] * p[1])).exp()
}

impl CurveNetworkMesh {
    pub fn new(edges: Vec<MeshEdge>, junctions: Vec<Junction>) -> Result<Self> {
        let mesh = CurveNetworkMesh { edges, junctions };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Straight line `{<x, n> = offset}` cut at radius `radius`, Dirichlet at
    /// both ends, labels (0, 1) with normal `n`.
    pub fn line(normal: [f64; 2], offset: f64, radius: f64, nodes: usize) -> Result<Self> {
        let len = normal[0].hypot(normal[1]);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("line normal must be a unit vector"));
        }
        if offset.abs() >= radius || nodes < 2 {
            return Err(Error::invalid("line misses the truncation disc or has too few nodes"));
        }
        let tangent = [-normal[1], normal[0]];
        let half = (radius * radius - offset * offset).sqrt();
        let points = (0..nodes)
            .map(|k| {
                let s = -half + 2.0 * half * k as f64 / (nodes - 1) as f64;
                [offset * normal[0] + s * tangent[0], offset * normal[1] + s * tangent[1]]
            })
            .collect();
        Self::new(
            vec![MeshEdge {
                points,
                normals: vec![normal; nodes],
                a2: vec![0.0; nodes],
                labels: (0, 1),
                closed: false,
                ends: [EndCondition::Dirichlet, EndCondition::Dirichlet],
            }],
            vec![],
        )
    }

    /// Circle of the given radius about the origin, outward normal, labels
    /// (0, 1) with set 0 inside.
    pub fn circle(radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) || nodes < 3 {
            return Err(Error::invalid("circle needs a positive radius and at least 3 nodes"));
        }
        let mut points = Vec::with_capacity(nodes);
        let mut normals = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let th = 2.0 * PI * k as f64 / nodes as f64;
            let (s, c) = th.sin_cos();
            points.push([radius * c, radius * s]);
            normals.push([c, s]);
        }
        Self::new(
            vec![MeshEdge {
                points,
                normals,
                a2: vec![1.0 / (radius * radius); nodes],
                labels: (0, 1),
                closed: true,
                ends: [EndCondition::Free, EndCondition::Free],
            }],
            vec![],
        )
    }

    /// Interfaces of a partition of R² (m = 3) or R¹ × R (m = 2), cut at
    /// `radius`, with `nodes` uniformly spaced nodes per edge.
    pub fn from_partition(p: &SimplicialPartition, radius: f64, nodes: usize) -> Result<Self> {
        match p.m() {
            2 => {
                let n = p.normal(0, 1)[0];
                // The plane {x_1 = y} of R², normal along the first axis.
                Self::line([n, 0.0], p.shift()[0] * n, radius, nodes)
            }
            3 => Self::tripod([p.shift()[0], p.shift()[1]], radius, nodes),
            m => Err(Error::Unsupported(format!(
                "curve network meshes exist for m in {{2, 3}}, got {m}"
            ))),
        }
    }

    /// The three rays of the m = 3 simplicial partition with junction
    /// `center`, cut at `radius`.
    pub fn tripod(center: [f64; 2], radius: f64, nodes: usize) -> Result<Self> {
        if center[0].hypot(center[1]) >= radius {
            return Err(Error::invalid("junction lies outside the truncation disc"));
        }
        if nodes < 2 {
            return Err(Error::invalid("each ray needs at least two nodes"));
        }
        let p = SimplicialPartition::with_shift(3, &center)?;
        let pieces = p.interfaces()?;
        let mut edges = Vec::with_capacity(3);
        let mut slots = Vec::with_capacity(3);
        for (e, piece) in pieces.iter().enumerate() {
            let d = [piece.frame[0][0], piece.frame[0][1]];
            // |c + s d| = R
            let b = center[0] * d[0] + center[1] * d[1];
            let c2 = center[0] * center[0] + center[1] * center[1];
            let s_max = -b + (b * b - c2 + radius * radius).sqrt();
            let points = (0..nodes)
                .map(|k| {
                    let s = s_max * k as f64 / (nodes - 1) as f64;
                    [center[0] + s * d[0], center[1] + s * d[1]]
                })
                .collect();
            edges.push(MeshEdge {
                points,
                normals: vec![[piece.normal[0], piece.normal[1]]; nodes],
                a2: vec![0.0; nodes],
                labels: piece.labels,
                closed: false,
                ends: [EndCondition::Junction(0), EndCondition::Dirichlet],
            });
            slots.push((e, End::Start));
        }
        Self::new(
            edges,
            vec![Junction {
                slots: [slots[0], slots[1], slots[2]],
                q: [0.0; 3],
            }],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::InvalidMesh("mesh has no edges".into()));
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let n = edge.len();
            if n < 2 || (edge.closed && n < 3) {
                return Err(Error::InvalidMesh(format!("edge {e} has too few nodes")));
            }
            if edge.normals.len() != n || edge.a2.len() != n {
                return Err(Error::InvalidMesh(format!("edge {e} has ragged node data")));
            }
            if edge.labels.0 == edge.labels.1 {
                return Err(Error::InvalidMesh(format!("edge {e} separates a set from itself")));
            }
            for k in 0..edge.segments() {
                if !(edge.spacing(k) > 0.0) {
                    return Err(Error::InvalidMesh(format!("edge {e} has coincident nodes")));
                }
            }
            if !edge.closed {
                for (side, cond) in edge.ends.iter().enumerate() {
                    if let EndCondition::Junction(j) = cond {
                        let end = if side == 0 { End::Start } else { End::End };
                        let ok = self
                            .junctions
                            .get(*j)
                            .map(|jn| jn.slots.contains(&(e, end)))
                            .unwrap_or(false);
                        if !ok {
                            return Err(Error::InvalidMesh(format!(
                                "edge {e} names junction {j}, which does not list it"
                            )));
                        }
                    }
                }
            }
        }
        for (j, jn) in self.junctions.iter().enumerate() {
            let mut seen = Vec::with_capacity(3);
            for &(e, end) in &jn.slots {
                let edge = self
                    .edges
                    .get(e)
                    .ok_or_else(|| Error::InvalidMesh(format!("junction {j} names missing edge {e}")))?;
                if edge.closed || seen.contains(&(e, end)) {
                    return Err(Error::InvalidMesh(format!(
                        "junction {j} needs three distinct open edge endpoints"
                    )));
                }
                let side = if end == End::Start { 0 } else { 1 };
                if edge.ends[side] != EndCondition::Junction(j) {
                    return Err(Error::InvalidMesh(format!(
                        "edge {e} does not end at junction {j}"
                    )));
                }
                seen.push((e, end));
            }
            let labels = self.junction_labels(j);
            let mut pairs: Vec<(usize, usize)> =
                labels.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            pairs.sort_unstable();
            pairs.dedup();
            let mut sets: Vec<usize> = labels.iter().flat_map(|&(a, b)| [a, b]).collect();
            sets.sort_unstable();
            sets.dedup();
            if pairs.len() != 3 || sets.len() != 3 {
                return Err(Error::InvalidMesh(format!(
                    "junction {j} labels {labels:?} do not form a cycle (i,j),(j,k),(k,i)"
                )));
            }
            let p0 = self.edges[jn.slots[0].0].points[self.edges[jn.slots[0].0].node(jn.slots[0].1)];
            for &(e, end) in &jn.slots[1..] {
                let p = self.edges[e].points[self.edges[e].node(end)];
                if (p[0] - p0[0]).hypot(p[1] - p0[1]) > 1e-9 {
                    return Err(Error::InvalidMesh(format!(
                        "junction {j} endpoints are not coincident"
                    )));
                }
            }
        }
        Ok(())
    }

    fn junction_labels(&self, j: usize) -> [(usize, usize); 3] {
        let s = &self.junctions[j].slots;
        [
            self.edges[s[0].0].labels,
            self.edges[s[1].0].labels,
            self.edges[s[2].0].labels,
        ]
    }

    /// Orientation signs σ with `Σ σ_s f_s = 0` expressing
    /// `f_ij + f_jk + f_ki = 0` for the sorted labels `i < j < k`.
    pub fn junction_signs(&self, j: usize) -> [f64; 3] {
        let labels = self.junction_labels(j);
        let mut sets: Vec<usize> = labels.iter().flat_map(|&(a, b)| [a, b]).collect();
        sets.sort_unstable();
        sets.dedup();
        let cycle = [(sets[0], sets[1]), (sets[1], sets[2]), (sets[2], sets[0])];
        let mut out = [0.0; 3];
        for s in 0..3 {
            out[s] = if cycle.contains(&labels[s]) { 1.0 } else { -1.0 };
        }
        out
    }

    /// Total number of nodes.
    pub fn node_count(&self) -> usize {
        self.edges.iter().map(|e| e.len()).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.edges.len());
        let mut acc = 0;
        for e in &self.edges {
            out.push(acc);
            acc += e.len();
        }
        out
    }

    /// Serialised mesh.
    pub fn to_json(&self) -> String {
        crate::report::to_json_string(self)
    }
}

/// One scalar per node of every edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteField {
    pub values: Vec<Vec<f64>>,
}

impl DiscreteField {
    pub fn zeros(mesh: &CurveNetworkMesh) -> Self {
        DiscreteField {
            values: mesh.edges.iter().map(|e| vec![0.0; e.len()]).collect(),
        }
    }

    /// Field with value `f(edge, node)`.
    pub fn from_fn(mesh: &CurveNetworkMesh, f: impl Fn(usize, usize) -> f64) -> Self {
        DiscreteField {
            values: mesh
                .edges
                .iter()
                .enumerate()
                .map(|(e, edge)| (0..edge.len()).map(|k| f(e, k)).collect())
                .collect(),
        }
    }

    /// `f_ij = <v, N_ij>` at every node.
    pub fn linear(mesh: &CurveNetworkMesh, v: [f64; 2]) -> Self {
        Self::from_fn(mesh, |e, k| {
            let n = mesh.edges[e].normals[k];
            v[0] * n[0] + v[1] * n[1]
        })
    }

    pub fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.values.iter().map(|v| v.len()).sum(),
            self.values.iter().flatten().copied(),
        )
    }

    pub fn from_flat(mesh: &CurveNetworkMesh, v: &DVector<f64>) -> Self {
        let offsets = mesh.offsets();
        Self::from_fn(mesh, |e, k| v[offsets[e] + k])
    }

    /// `max |Σ σ f|` over junctions.
    pub fn junction_residual(&self, mesh: &CurveNetworkMesh) -> f64 {
        (0..mesh.junctions.len())
            .map(|j| {
                let sig = mesh.junction_signs(j);
                mesh.junctions[j]
                    .slots
                    .iter()
                    .zip(sig)
                    .map(|(&(e, end), s)| s * self.values[e][mesh.edges[e].node(end)])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// True if no edge carries both clearly positive and clearly negative
    /// values (relative threshold 1e-8 of the largest magnitude).
    pub fn sign_constant_per_edge(&self) -> bool {
        let top = self
            .values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let thr = 1e-8 * top;
        self.values.iter().all(|vals| {
            let pos = vals.iter().any(|v| *v > thr);
            let neg = vals.iter().any(|v| *v < -thr);
            !(pos && neg)
        })
    }

    /// CSV rows `x,y,edge_label,value`.
    pub fn to_csv(&self, mesh: &CurveNetworkMesh) -> String {
        let mut out = String::from("x,y,edge_label,value\n");
        for (edge, vals) in mesh.edges.iter().zip(&self.values) {
            for (p, v) in edge.points.iter().zip(vals) {
                out.push_str(&format!(
                    "{:.16e},{:.16e},{}-{},{:.16e}\n",
                    p[0], p[1], edge.labels.0, edge.labels.1, v
                ));
            }
        }
        out
    }
}

/// Discrete forms: `Q(F, G) = Fᵀ S G`, `<F, G> = Fᵀ M G` with `M` diagonal.
#[derive(Debug, Clone)]
pub struct Operators {
    /// Symmetric stiffness in triplet form (both triangles stored).
    pub stiffness: Vec<(usize, usize, f64)>,
    /// Lumped mass (diagonal).
    pub mass: Vec<f64>,
}

impl Operators {
    pub fn q(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        self.stiffness.iter().map(|&(i, j, v)| v * f[i] * g[j]).sum()
    }

    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        self.mass.iter().enumerate().map(|(i, m)| m * f[i] * g[i]).sum()
    }

    pub fn q_fields(&self, f: &DiscreteField, g: &DiscreteField) -> f64 {
        self.q(&f.flatten(), &g.flatten())
    }

    pub fn inner_fields(&self, f: &DiscreteField, g: &DiscreteField) -> f64 {
        self.inner(&f.flatten(), &g.flatten())
    }
}

/// Assembles the discrete quadratic form and mass on the full node space.
pub fn assemble(mesh: &CurveNetworkMesh) -> Result<Operators> {
    mesh.validate()?;
    let offsets = mesh.offsets();
    let n = mesh.node_count();
    let mut mass = vec![0.0; n];
    let mut stiffness = Vec::with_capacity(4 * n);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let o = offsets[e];
        let len = edge.len();
        let w: Vec<f64> = edge.points.iter().map(|&p| weight(p)).collect();
        for k in 0..edge.segments() {
            let k1 = (k + 1) % len;
            let h = edge.spacing(k);
            let gbar = 0.5 * (w[k] + w[k1]);
            let s = gbar / h;
            stiffness.push((o + k, o + k, s));
            stiffness.push((o + k1, o + k1, s));
            stiffness.push((o + k, o + k1, -s));
            stiffness.push((o + k1, o + k, -s));
            mass[o + k] += 0.5 * h * w[k];
            mass[o + k1] += 0.5 * h * w[k1];
        }
        for k in 0..len {
            stiffness.push((o + k, o + k, -(edge.a2[k] + 1.0) * mass[o + k]));
        }
    }
    for jn in &mesh.junctions {
        for (slot, &(e, end)) in jn.slots.iter().enumerate() {
            if jn.q[slot] != 0.0 {
                let k = mesh.edges[e].node(end);
                let wj = weight(mesh.edges[e].points[k]);
                stiffness.push((offsets[e] + k, offsets[e] + k, jn.q[slot] * wj));
            }
        }
    }
    Ok(Operators { stiffness, mass })
}

/// Reduced admissible basis: each full node maps to a list of
/// (reduced column, coefficient) pairs. Junction bases are chosen
/// mass-orthogonal so the reduced mass stays diagonal.
struct Reduction {
    columns: usize,
    map: Vec<Vec<(usize, f64)>>,
}

fn reduction(mesh: &CurveNetworkMesh, ops: &Operators) -> Reduction {
    let offsets = mesh.offsets();
    let n = mesh.node_count();
    let mut map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut col = 0;
    let mut in_junction = vec![false; n];
    for jn in &mesh.junctions {
        for &(e, end) in &jn.slots {
            in_junction[offsets[e] + mesh.edges[e].node(end)] = true;
        }
    }
    for (e, edge) in mesh.edges.iter().enumerate() {
        for k in 0..edge.len() {
            let idx = offsets[e] + k;
            if in_junction[idx] {
                continue;
            }
            let pinned = !edge.closed
                && ((k == 0 && edge.ends[0] == EndCondition::Dirichlet)
                    || (k + 1 == edge.len() && edge.ends[1] == EndCondition::Dirichlet));
            if pinned {
                continue;
            }
            map[idx].push((col, 1.0));
            col += 1;
        }
    }
    for (j, jn) in mesh.junctions.iter().enumerate() {
        let sig = DVector::from_row_slice(&mesh.junction_signs(j));
        let idx: Vec<usize> = jn
            .slots
            .iter()
            .map(|&(e, end)| offsets[e] + mesh.edges[e].node(end))
            .collect();
        let m = DMatrix::from_diagonal(&DVector::from_iterator(3, idx.iter().map(|&i| ops.mass[i])));
        // Basis of σ^⊥, then made M-orthogonal.
        let mut basis = Vec::new();
        for c in 0..3 {
            let mut v = DVector::from_fn(3, |r, _| if r == c { 1.0 } else { 0.0 });
            let s = v.dot(&sig) / 3.0;
            v.axpy(-s, &sig, 1.0);
            for b in &basis {
                let b: &DVector<f64> = b;
                let proj = (b.transpose() * &m * &v)[(0, 0)] / (b.transpose() * &m * b)[(0, 0)];
                v.axpy(-proj, b, 1.0);
            }
            if v.norm() > 1e-8 {
                basis.push(v);
            }
            if basis.len() == 2 {
                break;
            }
        }
        for b in basis {
            for (slot, &i) in idx.iter().enumerate() {
                if b[slot] != 0.0 {
                    map[i].push((col, b[slot]));
                }
            }
            col += 1;
        }
    }
    Reduction { columns: col, map }
}

/// Fundamental-tone computation result.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// `-min Q(F,F)/<F,F>` over the admissible class.
    pub tone: f64,
    /// Largest eigenvalues of L on the admissible class, descending.
    pub top_eigenvalues: Vec<f64>,
    pub argmax_field: DiscreteField,
    pub constrained: bool,
    pub sign_constant: bool,
    pub dofs: usize,
}

/// Whitened reduced operator `A = M_r^{-1/2} S_r M_r^{-1/2}` and the
/// reduced-to-full map.
struct Reduced {
    a: DMatrix<f64>,
    inv_sqrt_mass: DVector<f64>,
    red: Reduction,
}

fn reduce(mesh: &CurveNetworkMesh, ops: &Operators) -> Reduced {
    let red = reduction(mesh, ops);
    let nr = red.columns;
    let mut s = DMatrix::zeros(nr, nr);
    for &(i, j, v) in &ops.stiffness {
        for &(ci, ai) in &red.map[i] {
            for &(cj, aj) in &red.map[j] {
                s[(ci, cj)] += ai * aj * v;
            }
        }
    }
    let mut mdiag = DVector::zeros(nr);
    for (i, cols) in red.map.iter().enumerate() {
        for &(c, a) in cols {
            mdiag[c] += a * a * ops.mass[i];
        }
    }
    let inv_sqrt_mass = mdiag.map(|m: f64| 1.0 / m.sqrt());
    let mut a = s;
    for r in 0..nr {
        for c in 0..nr {
            a[(r, c)] *= inv_sqrt_mass[r] * inv_sqrt_mass[c];
        }
    }
    // Symmetrise away rounding.
    let a = (&a + a.transpose()).scale(0.5);
    Reduced {
        a,
        inv_sqrt_mass,
        red,
    }
}

fn expand(mesh: &CurveNetworkMesh, reduced: &Reduced, u: &DVector<f64>) -> DiscreteField {
    let v = u.component_mul(&reduced.inv_sqrt_mass);
    let full = DVector::from_iterator(
        reduced.red.map.len(),
        reduced
            .red
            .map
            .iter()
            .map(|cols| cols.iter().map(|&(c, a)| a * v[c]).sum::<f64>()),
    );
    DiscreteField::from_flat(mesh, &full)
}

/// Tone and leading spectrum of L on the admissible class.
///
/// With `constrained`, the class is further cut down to volume-preserving
/// families: `Σ_{j≠i} ∫_{Σ_ij} f_ij γ = 0` for every set `i` (with `f_ij`
/// read against the normal pointing out of Ω_i).
pub fn fundamental_tone(mesh: &CurveNetworkMesh, constrained: bool) -> Result<SpectralReport> {
    let ops = assemble(mesh)?;
    let mut reduced = reduce(mesh, &ops);
    let nr = reduced.red.columns;
    if nr == 0 {
        return Err(Error::InvalidMesh("no free degrees of freedom".into()));
    }
    let mut excluded = 0;
    if constrained {
        let offsets = mesh.offsets();
        let sets = mesh
            .edges
            .iter()
            .map(|e| e.labels.0.max(e.labels.1))
            .max()
            .unwrap_or(0)
            + 1;
        let mut rows = DMatrix::zeros(nr, sets);
        for (e, edge) in mesh.edges.iter().enumerate() {
            for k in 0..edge.len() {
                let i = offsets[e] + k;
                for &(c, a) in &reduced.red.map[i] {
                    let w = a * ops.mass[i] * reduced.inv_sqrt_mass[c];
                    rows[(c, edge.labels.0)] += w;
                    rows[(c, edge.labels.1)] -= w;
                }
            }
        }
        let svd = rows.svd(true, false);
        let u = svd.u.expect("requested U");
        let top = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > 1e-10 * top)
            .collect();
        let r: DMatrix<f64> = DMatrix::from_fn(nr, keep.len(), |i, c| u[(i, keep[c])]);
        let rrt: DMatrix<f64> = &r * r.transpose();
        let proj = DMatrix::identity(nr, nr) - &rrt;
        // Park the excluded directions above the whole spectrum (Gershgorin).
        let shift: f64 = 2.0
            * reduced
                .a
                .row_iter()
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
            + 1.0;
        let a = &proj * &reduced.a * &proj + rrt.scale(shift);
        reduced.a = (&a + a.transpose()).scale(0.5);
        excluded = keep.len();
    }
    let (eigs, vec0) = lowest_pairs(&reduced.a)?;
    let usable = eigs.len() - excluded;
    let lowest: Vec<f64> = eigs[..usable].to_vec();
    let tone = -lowest[0];
    let top_eigenvalues: Vec<f64> = lowest.iter().take(8).map(|l| -l).collect();
    let field = expand(mesh, &reduced, &vec0);
    Ok(SpectralReport {
        tone,
        top_eigenvalues,
        sign_constant: field.sign_constant_per_edge(),
        argmax_field: field,
        constrained,
        dofs: nr - excluded,
    })
}

/// The `count` largest eigenvalues of L on the admissible class with their
/// eigenfields, descending. Needs a full eigendecomposition, so the reduced
/// system is limited to a few hundred unknowns.
pub fn eigenpairs(mesh: &CurveNetworkMesh, count: usize) -> Result<Vec<(f64, DiscreteField)>> {
    let ops = assemble(mesh)?;
    let reduced = reduce(mesh, &ops);
    let n = reduced.red.columns;
    if n > FULL_EIGEN_LIMIT {
        return Err(Error::Unsupported(format!(
            "eigenpairs needs at most {FULL_EIGEN_LIMIT} unknowns, the mesh has {n}"
        )));
    }
    let eig = reduced.a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| {
            let v = eig.eigenvectors.column(i).into_owned();
            (-eig.eigenvalues[i], expand(mesh, &reduced, &v))
        })
        .collect())
}

/// All eigenvalues ascending and a unit eigenvector of the smallest.
fn lowest_pairs(a: &DMatrix<f64>) -> Result<(Vec<f64>, DVector<f64>)> {
    let n = a.nrows();
    if n <= FULL_EIGEN_LIMIT {
        let eig = a.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let v = eig.eigenvectors.column(order[0]).into_owned();
        return Ok((vals, v));
    }
    let mut vals: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("eigenvalue computation produced non-finite values", None));
    }
    let v = inverse_iteration(a, vals[0], vals.get(1).copied())?;
    Ok((vals, v))
}

fn inverse_iteration(a: &DMatrix<f64>, lambda: f64, next: Option<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let gap = next.map(|l| l - lambda).unwrap_or(1.0).abs().max(1e-12);
    let sigma = lambda - 1e-3 * gap;
    let shifted = a - DMatrix::identity(n, n).scale(sigma);
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 101) as f64);
    v /= v.norm();
    for _ in 0..50 {
        let w = lu
            .solve(&v)
            .ok_or_else(|| Error::numeric("inverse iteration hit a singular shift", None))?;
        let nw = w.norm();
        if !nw.is_finite() || nw == 0.0 {
            return Err(Error::numeric("inverse iteration diverged", None));
        }
        let next_v = w / nw;
        let change = (&next_v - &v).norm().min((&next_v + &v).norm());
        v = next_v;
        if change < 1e-13 {
            break;
        }
    }
    let rq = (v.transpose() * a * &v)[(0, 0)];
    if (rq - lambda).abs() > 1e-6 * lambda.abs().max(1.0) {
        return Err(Error::numeric(
            format!("inverse iteration converged to {rq}, expected {lambda}"),
            None,
        ));
    }
    Ok(v)
}

/// `L F` by second-order finite differences; interior nodes only (every
/// node of a closed curve). End nodes of open edges are returned as zero.
pub fn apply_l(mesh: &CurveNetworkMesh, f: &DiscreteField) -> Result<DiscreteField> {
    mesh.validate()?;
    let mut out = DiscreteField::zeros(mesh);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let n = edge.len();
        if n < MIN_NODES {
            return Err(Error::InvalidMesh(format!(
                "edge {e} has {n} nodes; at least {MIN_NODES} are needed"
            )));
        }
        if f.values.get(e).map(|v| v.len()) != Some(n) {
            return Err(Error::invalid("field does not match the mesh"));
        }
        let fv = &f.values[e];
        let range: Box<dyn Iterator<Item = usize>> = if edge.closed {
            Box::new(0..n)
        } else {
            Box::new(1..n - 1)
        };
        for k in range {
            let km = (k + n - 1) % n;
            let kp = (k + 1) % n;
            let hm = edge.spacing(km);
            let hp = edge.spacing(k);
            let den = hm * hp * (hm + hp);
            let d2 = 2.0 * (hm * fv[kp] - (hm + hp) * fv[k] + hp * fv[km]) / den;
            let d1 = (hm * hm * fv[kp] + (hp * hp - hm * hm) * fv[k] - hp * hp * fv[km]) / den;
            let (pm, pp, p) = (edge.points[km], edge.points[kp], edge.points[k]);
            let t = [pp[0] - pm[0], pp[1] - pm[1]];
            let tl = t[0].hypot(t[1]);
            let xt = (p[0] * t[0] + p[1] * t[1]) / tl;
            out.values[e][k] = d2 - xt * d1 + (edge.a2[k] + 1.0) * fv[k];
        }
    }
    Ok(out)
}

/// Discrete mean curvature `H = -<κ, N>` at interior nodes from the circle
/// through three consecutive nodes. End nodes of open edges are NaN.
pub fn discrete_curvature(edge: &MeshEdge) -> Vec<f64> {
    let n = edge.len();
    let mut out = vec![f64::NAN; n];
    let range: Vec<usize> = if edge.closed {
        (0..n).collect()
    } else {
        (1..n.saturating_sub(1)).collect()
    };
    for k in range {
        let a = edge.points[(k + n - 1) % n];
        let b = edge.points[k];
        let c = edge.points[(k + 1) % n];
        out[k] = curvature_at(a, b, c, edge.normals[k]);
    }
    out
}

/// Signed curvature of the circle through `a, b, c` at `b`, as `-<κ, N>`.
pub(crate) fn curvature_at(a: [f64; 2], b: [f64; 2], c: [f64; 2], n: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let bc = [c[0] - b[0], c[1] - b[1]];
    let ac = [c[0] - a[0], c[1] - a[1]];
    let cross = ab[0] * bc[1] - ab[1] * bc[0];
    let lab = ab[0].hypot(ab[1]);
    let lbc = bc[0].hypot(bc[1]);
    let lac = ac[0].hypot(ac[1]);
    // |κ| = 2 sin(angle)/|ac|; κ points to the left of the travel direction
    // when the turn is counter-clockwise.
    let kappa = 2.0 * cross / (lab * lbc * lac);
    let left = [-ac[1] / lac, ac[0] / lac];
    -kappa * (left[0] * n[0] + left[1] * n[1])
}

/// Residual report of [`linear_eigenfield_check`].
#[derive(Debug, Clone, Serialize)]
pub struct EigenfieldReport {
    /// `max |L F - F|` over interior nodes.
    pub residual: f64,
    /// `max |Σ σ f|` over junctions for `F = <v, N>`.
    pub junction_residual: f64,
    /// Measured first-variation residual of the network.
    pub stationarity: f64,
}

/// Tolerance on `|H - <x, N> - λ|` for treating a mesh as stationary.
pub const STATIONARITY_TOL: f64 = 1e-3;

/// Checks `L <v, N> = <v, N>` on a stationary network.
pub fn linear_eigenfield_check(mesh: &CurveNetworkMesh, v: [f64; 2]) -> Result<EigenfieldReport> {
    mesh.validate()?;
    let mut stationarity = 0.0f64;
    for edge in &mesh.edges {
        let h = discrete_curvature(edge);
        let dev: Vec<f64> = (0..edge.len())
            .filter(|&k| h[k].is_finite())
            .map(|k| {
                let p = edge.points[k];
                let n = edge.normals[k];
                h[k] - (p[0] * n[0] + p[1] * n[1])
            })
            .collect();
        if dev.is_empty() {
            continue;
        }
        let lambda = dev.iter().sum::<f64>() / dev.len() as f64;
        let worst = dev.iter().map(|d| (d - lambda).abs()).fold(0.0, f64::max);
        stationarity = stationarity.max(worst);
    }
    if stationarity > STATIONARITY_TOL {
        return Err(Error::PreconditionViolation {
            message: "network is not stationary".into(),
            residual: stationarity,
        });
    }
    let f = DiscreteField::linear(mesh, v);
    let lf = apply_l(mesh, &f)?;
    let mut residual = 0.0f64;
    for (e, edge) in mesh.edges.iter().enumerate() {
        let n = edge.len();
        let range = if edge.closed { 0..n } else { 1..n - 1 };
        for k in range {
            residual = residual.max((lf.values[e][k] - f.values[e][k]).abs());
        }
    }
    Ok(EigenfieldReport {
        residual,
        junction_residual: f.junction_residual(mesh),
        stationarity,
    })
}

/// Field equal to the constant `c[e]` on edge `e`.
pub fn piecewise_constant(mesh: &CurveNetworkMesh, c: &[f64]) -> DiscreteField {
    DiscreteField::from_fn(mesh, |e, _| c[e])
}
