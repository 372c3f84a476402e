//! Volume-constrained descent on polygonal networks.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::network::{PolygonalNetwork, TopologyEvent, VertexKind};
use crate::error::{Error, Result};
use crate::simplicial::VolumeVector;
use crate::stability::curvature_at;

/// Largest node count accepted by [`optimize_2d`].
pub const MAX_NODES: usize = 2000;
/// Volume tolerance targeted by the projection.
pub const VOLUME_TOL: f64 = 1e-12;
const VOLUME_ACCEPT: f64 = 1e-9;
const PROJECT_ITER: usize = 30;

/// Motion coordinates of a network: interior nodes move along their normal,
/// junctions freely, boundary nodes along the circle (arclength).
#[derive(Debug, Clone, Copy)]
enum Coord {
    Shift(usize, [f64; 2]),
    Rotate(usize),
}

struct Basis {
    coords: Vec<Coord>,
    mass: Vec<f64>,
}

impl Basis {
    fn new(net: &PolygonalNetwork) -> Self {
        let lumped = net.lumped_mass();
        let mut coords = vec![];
        for (c, chain) in net.chains.iter().enumerate() {
            for k in 1..chain.nodes.len() - 1 {
                coords.push(Coord::Shift(chain.nodes[k], net.node_normal(c, k)));
            }
        }
        for v in 0..net.vertices.len() {
            match net.kinds[v] {
                VertexKind::Junction => {
                    coords.push(Coord::Shift(v, [1.0, 0.0]));
                    coords.push(Coord::Shift(v, [0.0, 1.0]));
                }
                VertexKind::Boundary => coords.push(Coord::Rotate(v)),
                VertexKind::Interior => {}
            }
        }
        let mass = coords
            .iter()
            .map(|c| match c {
                Coord::Shift(v, _) | Coord::Rotate(v) => lumped[*v].max(1e-300),
            })
            .collect();
        Basis { coords, mass }
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    fn apply(&self, net: &PolygonalNetwork, s: &DVector<f64>) -> PolygonalNetwork {
        let mut out = net.clone();
        for (c, &x) in self.coords.iter().zip(s.iter()) {
            match *c {
                Coord::Shift(v, d) => {
                    out.vertices[v][0] += x * d[0];
                    out.vertices[v][1] += x * d[1];
                }
                Coord::Rotate(v) => {
                    let p = net.vertices[v];
                    let th = p[1].atan2(p[0]) + x / net.radius;
                    out.vertices[v] = [net.radius * th.cos(), net.radius * th.sin()];
                }
            }
        }
        out
    }

    fn project_vertex(&self, net: &PolygonalNetwork, g: &[[f64; 2]], c: &Coord) -> f64 {
        match *c {
            Coord::Shift(v, d) => g[v][0] * d[0] + g[v][1] * d[1],
            Coord::Rotate(v) => {
                let p = net.vertices[v];
                (g[v][0] * -p[1] + g[v][1] * p[0]) / net.radius
            }
        }
    }

    fn cost_gradient(&self, net: &PolygonalNetwork) -> DVector<f64> {
        let g = net.cost_gradient();
        DVector::from_iterator(self.len(), self.coords.iter().map(|c| self.project_vertex(net, &g, c)))
    }

    /// Jacobian of the first `m - 1` face volumes.
    fn volume_jacobian(&self, net: &PolygonalNetwork) -> DMatrix<f64> {
        let (g, arc) = net.volume_gradient();
        let rows = net.m - 1;
        let mut j = DMatrix::zeros(rows, self.len());
        for f in 0..rows {
            for (k, c) in self.coords.iter().enumerate() {
                let mut x = self.project_vertex(net, &g[f], c);
                if let Coord::Rotate(v) = c {
                    x += arc[f][*v] / net.radius;
                }
                j[(f, k)] = x;
            }
        }
        j
    }

    /// `M⁻¹ Jᵀ (J M⁻¹ Jᵀ)⁻¹`.
    fn pseudo_right_inverse(&self, j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut minv_jt = j.transpose();
        for (k, m) in self.mass.iter().enumerate() {
            let mut row = minv_jt.row_mut(k);
            row /= *m;
        }
        let s = j * &minv_jt;
        let sv = s.clone().svd(false, false).singular_values;
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 1e-14 * hi.max(1e-300)) {
            return Err(Error::numeric(
                format!("volume Jacobian is rank deficient (singular values {hi:e} .. {lo:e})"),
                None,
            ));
        }
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::numeric("volume Jacobian Gram matrix is singular", None))?;
        Ok(minv_jt * s_inv)
    }
}

fn volume_error(net: &PolygonalNetwork, a: &[f64]) -> (DVector<f64>, f64) {
    let v = net.volumes();
    let r = DVector::from_fn(net.m - 1, |i, _| a[i] - v[i]);
    let worst = v.iter().zip(a).map(|(x, t)| (x - t).abs()).fold(0.0, f64::max);
    (r, worst)
}

/// Moves nodes along their motion coordinates by the minimal-norm
/// (weighted) Newton correction until the face volumes equal `a`.
pub fn volume_project(net: &PolygonalNetwork, a: &VolumeVector) -> Result<PolygonalNetwork> {
    if a.m() != net.m {
        return Err(Error::invalid(format!(
            "volume vector has {} entries for a network with m = {}",
            a.m(),
            net.m
        )));
    }
    let target = a.as_slice();
    let (_, start) = volume_error(net, target);
    if start > 0.1 {
        return Err(Error::PreconditionViolation {
            message: "network volumes are more than 0.1 away from the target".into(),
            residual: start,
        });
    }
    let mut cur = net.clone();
    let mut worst = start;
    for _ in 0..PROJECT_ITER {
        if worst <= VOLUME_TOL {
            break;
        }
        let basis = Basis::new(&cur);
        let j = basis.volume_jacobian(&cur);
        let (r, _) = volume_error(&cur, target);
        let step = basis.pseudo_right_inverse(&j)? * r;
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial = basis.apply(&cur, &step.scale(scale));
            let (_, w) = volume_error(&trial, target);
            if w < worst {
                cur = trial;
                worst = w;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if worst > VOLUME_ACCEPT {
        return Err(Error::numeric(
            format!("volume projection stalled at residual {worst:e}"),
            Some(cur.volumes()),
        ));
    }
    Ok(cur)
}

/// Settings of [`optimize_2d_with`].
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOptions {
    /// Jitter applied to the initial network (seeded), 0 for none.
    pub jitter: f64,
    pub remesh_every: usize,
    pub armijo_c: f64,
    pub grad_tol: f64,
    /// Interval (in steps) between stored node snapshots, 0 for none.
    pub snapshot_every: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            jitter: 0.0,
            remesh_every: 25,
            armijo_c: 1e-4,
            grad_tol: 1e-7,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub max_residual: f64,
    /// The network was remeshed (and re-projected) before this step.
    pub remeshed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeResult {
    pub network: PolygonalNetwork,
    pub initial_cost: f64,
    pub cost: f64,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub event: Option<TopologyEvent>,
    #[serde(skip)]
    pub snapshots: Vec<(usize, PolygonalNetwork)>,
}

impl OptimizeResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,cost,grad_norm,max_residual\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                r.step, r.cost, r.grad_norm, r.max_residual
            ));
        }
        out
    }

    /// `snapshot,x,y,edge_label` rows for the stored snapshots.
    pub fn snapshots_csv(&self) -> String {
        let mut out = String::from("snapshot,x,y,edge_label\n");
        for (step, net) in &self.snapshots {
            for line in net.to_plot_csv().lines().skip(1) {
                out.push_str(&format!("{step},{line}\n"));
            }
        }
        out
    }
}

/// [`optimize_2d_with`] with default options.
pub fn optimize_2d(a: &VolumeVector, init: &PolygonalNetwork, steps: usize, seed: u64) -> Result<OptimizeResult> {
    optimize_2d_with(a, init, steps, seed, &OptimizeOptions::default())
}

/// Projected gradient descent of the weighted length at fixed volumes.
///
/// The search direction is the mass-preconditioned negative gradient,
/// projected onto the tangent space of the volume constraints; each trial
/// point is projected back onto the constraints and accepted by an Armijo
/// test on the projected cost.
pub fn optimize_2d_with(
    a: &VolumeVector,
    init: &PolygonalNetwork,
    steps: usize,
    seed: u64,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    if a.m() != 3 || init.m != 3 {
        return Err(Error::invalid("the 2-D optimizer handles m = 3 only"));
    }
    if init.node_count() > MAX_NODES {
        return Err(Error::invalid(format!(
            "network has {} nodes, the limit is {MAX_NODES}",
            init.node_count()
        )));
    }
    if !(opts.armijo_c > 0.0 && opts.armijo_c < 1.0) || !(opts.grad_tol > 0.0) || opts.jitter < 0.0 {
        return Err(Error::invalid("optimizer options out of range"));
    }
    init.validate()?;
    let start = if opts.jitter > 0.0 {
        init.jittered(opts.jitter, seed)?
    } else {
        init.clone()
    };
    let initial_cost = start.cost();
    let mut net = volume_project(&start, a)?;
    let mut cost = net.cost();
    let mut trace = vec![TraceRow {
        step: 0,
        cost,
        grad_norm: f64::NAN,
        max_residual: residual_max(&net),
        remeshed: false,
    }];
    let mut snapshots = vec![];
    if opts.snapshot_every > 0 {
        snapshots.push((0, net.clone()));
    }
    let mut dt = 1e-3;
    let mut converged = false;
    let mut event = None;
    for step in 1..=steps {
        let mut remeshed = false;
        if opts.remesh_every > 0 && step % opts.remesh_every == 0 {
            let mut fresh = net.clone();
            fresh.remesh();
            if fresh.collision().is_none() {
                if let Ok(p) = volume_project(&fresh, a) {
                    net = p;
                    cost = net.cost();
                    remeshed = true;
                }
            }
        }
        let basis = Basis::new(&net);
        let g = basis.cost_gradient(&net);
        let j = basis.volume_jacobian(&net);
        let pinv = basis.pseudo_right_inverse(&j)?;
        let mut d = DVector::from_fn(basis.len(), |k, _| -g[k] / basis.mass[k]);
        let correction = &pinv * (&j * &d);
        d -= correction;
        let slope = g.dot(&d);
        let grad_norm = d
            .iter()
            .zip(&basis.mass)
            .map(|(x, m)| m * x * x)
            .sum::<f64>()
            .sqrt();
        if grad_norm <= opts.grad_tol {
            converged = true;
            info!("gradient norm {grad_norm:e} below tolerance at step {step}");
            break;
        }
        let mut accepted = None;
        while dt > 1e-14 {
            let trial = basis.apply(&net, &d.scale(dt));
            if trial.collision().is_none() {
                if let Ok(p) = volume_project(&trial, a) {
                    let c = p.cost();
                    if c <= cost + opts.armijo_c * dt * slope {
                        accepted = Some((p, c));
                        break;
                    }
                }
            }
            dt *= 0.5;
        }
        let Some((next, c)) = accepted else {
            debug!("line search exhausted at step {step}");
            converged = true;
            break;
        };
        net = next;
        cost = c;
        dt = (dt * 2.0).min(1.0);
        trace.push(TraceRow {
            step,
            cost,
            grad_norm,
            max_residual: residual_max(&net),
            remeshed,
        });
        if opts.snapshot_every > 0 && step % opts.snapshot_every == 0 {
            snapshots.push((step, net.clone()));
        }
        if let Some(ev) = net.collision() {
            event = Some(ev);
            break;
        }
    }
    Ok(OptimizeResult {
        network: net,
        initial_cost,
        cost,
        trace,
        converged,
        event,
        snapshots,
    })
}

fn residual_max(net: &PolygonalNetwork) -> f64 {
    first_variation_residual(net).map_or(f64::NAN, |r| r.max_pointwise)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainResidual {
    pub labels: (usize, usize),
    /// Fitted multiplier `λ_{left,right}`.
    pub lambda: f64,
    /// `max |H - <x, N> - λ|` over interior nodes.
    pub max_pointwise: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JunctionResidual {
    pub vertex: usize,
    pub cocycle: f64,
    pub conormal_sum: f64,
    /// Angles between consecutive arms, degrees.
    pub angles_deg: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub chains: Vec<ChainResidual>,
    pub junctions: Vec<JunctionResidual>,
    pub max_pointwise: f64,
    pub max_cocycle: f64,
    pub max_conormal: f64,
    pub max_angle_error_deg: f64,
}

impl ResidualReport {
    /// Multiplier of the chain between faces `i` and `j`, oriented `i → j`.
    pub fn lambda(&self, i: usize, j: usize) -> Option<f64> {
        self.chains.iter().find_map(|c| {
            if c.labels == (i, j) {
                Some(c.lambda)
            } else if c.labels == (j, i) {
                Some(-c.lambda)
            } else {
                None
            }
        })
    }
}

/// Discrete stationarity residuals: curvature balance along chains,
/// multiplier cocycle and conormal balance at junctions.
pub fn first_variation_residual(net: &PolygonalNetwork) -> Result<ResidualReport> {
    let mut chains = vec![];
    for (c, chain) in net.chains.iter().enumerate() {
        let n = chain.nodes.len();
        if n < 8 {
            return Err(Error::InvalidMesh(format!("chain {c} has {n} nodes, at least 8 are needed")));
        }
        let p = |k: usize| net.vertices[chain.nodes[k]];
        let r: Vec<f64> = (1..n - 1)
            .map(|k| {
                let nn = net.node_normal(c, k);
                let h = curvature_at(p(k - 1), p(k), p(k + 1), nn);
                h - (p(k)[0] * nn[0] + p(k)[1] * nn[1])
            })
            .collect();
        let lambda = r.iter().sum::<f64>() / r.len() as f64;
        let max_pointwise = r.iter().map(|x| (x - lambda).abs()).fold(0.0, f64::max);
        chains.push(ChainResidual {
            labels: chain.labels,
            lambda,
            max_pointwise,
        });
    }
    let mut report = ResidualReport {
        max_pointwise: chains.iter().map(|c| c.max_pointwise).fold(0.0, f64::max),
        chains,
        junctions: vec![],
        max_cocycle: 0.0,
        max_conormal: 0.0,
        max_angle_error_deg: 0.0,
    };
    for v in net.junctions() {
        let o = net.vertices[v];
        let arms = net.incident(v);
        let mut dirs: Vec<(f64, [f64; 2])> = arms
            .iter()
            .map(|&(c, start)| {
                let nodes = &net.chains[c].nodes;
                let q = net.vertices[if start { nodes[1] } else { nodes[nodes.len() - 2] }];
                let d = [q[0] - o[0], q[1] - o[1]];
                let l = d[0].hypot(d[1]);
                (d[1].atan2(d[0]), [d[0] / l, d[1] / l])
            })
            .collect();
        dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sum = dirs.iter().fold([0.0, 0.0], |s, d| [s[0] + d.1[0], s[1] + d.1[1]]);
        let mut angles = [0.0; 3];
        for k in 0..3 {
            let next = dirs[(k + 1) % 3].0 + if k == 2 { 2.0 * std::f64::consts::PI } else { 0.0 };
            angles[k] = (next - dirs[k].0).to_degrees();
        }
        let (i, j) = net.chains[arms[0].0].labels;
        let k = (0..net.m)
            .find(|&l| {
                l != i && l != j && arms.iter().any(|&(c, _)| {
                    let lab = net.chains[c].labels;
                    lab.0 == l || lab.1 == l
                })
            })
            .unwrap_or(i);
        let cocycle = report.lambda(i, j).unwrap_or(0.0)
            + report.lambda(j, k).unwrap_or(0.0)
            + report.lambda(k, i).unwrap_or(0.0);
        report.max_cocycle = report.max_cocycle.max(cocycle.abs());
        let conormal = sum[0].hypot(sum[1]);
        report.max_conormal = report.max_conormal.max(conormal);
        let err = angles.iter().map(|a| (a - 120.0).abs()).fold(0.0, f64::max);
        report.max_angle_error_deg = report.max_angle_error_deg.max(err);
        report.junctions.push(JunctionResidual {
            vertex: v,
            cocycle: cocycle.abs(),
            conormal_sum: conormal,
            angles_deg: angles,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::TRUNCATION_RADIUS;

    #[test]
    fn exact_tripod_residuals_vanish() {
        let net = PolygonalNetwork::tripod([0.0, 0.0], 30, TRUNCATION_RADIUS).unwrap();
        let r = first_variation_residual(&net).unwrap();
        assert!(r.max_pointwise < 1e-8);
        assert!(r.max_cocycle < 1e-8);
        assert!(r.max_conormal < 1e-8);
        assert!(r.max_angle_error_deg < 1e-8);
        for c in &r.chains {
            assert!(c.lambda.abs() < 1e-8);
        }
    }

    #[test]
    fn short_chains_rejected() {
        let net = PolygonalNetwork::tripod([0.0, 0.0], 6, TRUNCATION_RADIUS).unwrap();
        assert!(matches!(first_variation_residual(&net), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn projection_is_identity_at_target() {
        let net = PolygonalNetwork::tripod([0.0, 0.0], 20, TRUNCATION_RADIUS).unwrap();
        let out = volume_project(&net, &VolumeVector::uniform(3).unwrap()).unwrap();
        assert_eq!(out.vertices, net.vertices);
    }

    #[test]
    fn projection_recentres_offset_tripod() {
        let net = PolygonalNetwork::tripod([0.05, 0.0], 20, TRUNCATION_RADIUS).unwrap();
        let out = volume_project(&net, &VolumeVector::uniform(3).unwrap()).unwrap();
        for v in out.volumes() {
            assert!((v - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn far_target_is_a_precondition_error() {
        let net = PolygonalNetwork::tripod([0.0, 0.0], 20, TRUNCATION_RADIUS).unwrap();
        let a = VolumeVector::new(vec![0.6, 0.2, 0.2]).unwrap();
        assert!(matches!(volume_project(&net, &a), Err(Error::PreconditionViolation { .. })));
    }

    #[test]
    fn rejects_wrong_m() {
        let t = 0.4307272992954575;
        let net = PolygonalNetwork::slabs(&[-t, t], &[0, 1, 2], 20, TRUNCATION_RADIUS).unwrap();
        assert!(optimize_2d(&VolumeVector::uniform(2).unwrap(), &net, 5, 0).is_err());
    }
}
