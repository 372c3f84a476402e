//! Gaussian volumes, weighted interface measures and barycenters.
//!
//! Volumes use the standard Gaussian γ_d. Interface pieces in R^d carry the
//! weight γ_{d-1}(x) = (2π)^{-(d-1)/2} e^{-|x|²/2} evaluated at ambient points.
//!
//! Closed forms are used wherever they exist. The remaining cases reduce to
//! one-dimensional integrals:
//!
//! * a planar wedge with apex `p` integrates radially in closed form, leaving
//!   an integral over the opening angle;
//! * a sector of R^3 is conditioned on one of its three constraint
//!   functionals, leaving a 1-D integral over planar wedge measures.
//!
//! Quadrature domains are truncated at radius [`TRUNCATION_RADIUS`]; the
//! discarded tail mass is added to the reported error bound.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{InterfacePiece, PieceShape, SimplicialPartition};
use crate::normal::{cdf, cdf_diff, pdf, SQRT_2PI};
use crate::quadrature::adaptive;

/// Radius beyond which quadrature domains are cut off.
pub const TRUNCATION_RADIUS: f64 = 8.5;

/// Absolute tolerance for the adaptive rules used by [`gaussian_volume`],
/// [`interface_measure`] and [`barycenter`].
pub const DEFAULT_TOLERANCE: f64 = 1e-13;

const CLOSED_FORM_ERROR: f64 = 1e-15;

/// Upper bound on the γ_k mass (k ≤ 2) of a flat piece outside the
/// truncation ball, `e^{-R²/2}`.
fn tail_bound() -> f64 {
    (-0.5 * TRUNCATION_RADIUS * TRUNCATION_RADIUS).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    AdaptiveQuadrature,
    Qmc,
}

impl Method {
    /// The less exact of two methods.
    fn combine(self, other: Method) -> Method {
        use Method::*;
        match (self, other) {
            (Qmc, _) | (_, Qmc) => Qmc,
            (AdaptiveQuadrature, _) | (_, AdaptiveQuadrature) => AdaptiveQuadrature,
            _ => ClosedForm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureResult {
    pub value: f64,
    pub abs_error_bound: f64,
    pub method: Method,
}

impl MeasureResult {
    fn closed(value: f64) -> Self {
        MeasureResult {
            value,
            abs_error_bound: CLOSED_FORM_ERROR * value.abs().max(1.0),
            method: Method::ClosedForm,
        }
    }

    fn quad(value: f64, error: f64) -> Self {
        MeasureResult {
            value,
            abs_error_bound: error.max(0.0),
            method: Method::AdaptiveQuadrature,
        }
    }

    /// Sum of two results with added error bounds.
    pub fn plus(self, other: MeasureResult) -> Self {
        MeasureResult {
            value: self.value + other.value,
            abs_error_bound: self.abs_error_bound + other.abs_error_bound,
            method: self.method.combine(other.method),
        }
    }

    pub fn zero() -> Self {
        MeasureResult {
            value: 0.0,
            abs_error_bound: 0.0,
            method: Method::ClosedForm,
        }
    }
}

/// Vector-valued measure with a component-wise error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMeasure {
    pub value: DVector<f64>,
    pub abs_error_bound: DVector<f64>,
    pub method: Method,
}

/// A measurable subset of R^d.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// `{x : <x, normal> <= offset}` with a unit normal.
    HalfSpace { normal: DVector<f64>, offset: f64 },
    /// Sector `index` of a simplicial partition (trailing factor included).
    Sector {
        partition: SimplicialPartition,
        index: usize,
    },
    /// Union of closed intervals of R; endpoints may be infinite.
    Intervals(Vec<(f64, f64)>),
    /// Interior of a simple polygon in R², either orientation.
    Polygon(Vec<[f64; 2]>),
    /// `base × R^extra`.
    Product { base: Box<Region>, extra: usize },
}

impl Region {
    pub fn half_space(normal: &[f64], offset: f64) -> Self {
        Region::HalfSpace {
            normal: DVector::from_row_slice(normal),
            offset,
        }
    }

    pub fn product(base: Region, extra: usize) -> Self {
        Region::Product {
            base: Box::new(base),
            extra,
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Region::HalfSpace { normal, .. } => normal.len(),
            Region::Sector { partition, .. } => partition.ambient_dim(),
            Region::Intervals(_) => 1,
            Region::Polygon(_) => 2,
            Region::Product { base, extra } => base.dim() + extra,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::HalfSpace { normal, offset } => {
                if normal.is_empty() || (normal.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid("half-space normal must be a unit vector"));
                }
                if offset.is_nan() {
                    return Err(Error::invalid("half-space offset is NaN"));
                }
            }
            Region::Sector { partition, index } => {
                if *index >= partition.m() {
                    return Err(Error::invalid(format!(
                        "sector index {index} out of range for m = {}",
                        partition.m()
                    )));
                }
            }
            Region::Intervals(list) => {
                let mut prev = f64::NEG_INFINITY;
                for (k, &(lo, hi)) in list.iter().enumerate() {
                    if lo.is_nan() || hi.is_nan() || lo > hi || (k > 0 && lo < prev) {
                        return Err(Error::invalid(
                            "interval breakpoints must be ordered and non-overlapping",
                        ));
                    }
                    prev = hi;
                }
            }
            Region::Polygon(vertices) => validate_polygon(vertices)?,
            Region::Product { base, .. } => base.validate()?,
        }
        Ok(())
    }

    /// Membership test (boundary points count as inside where cheap).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::HalfSpace { normal, offset } => {
                normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() <= *offset
            }
            Region::Sector { partition, index } => {
                let mut full = x.to_vec();
                full.resize(partition.ambient_dim(), 0.0);
                partition.sector_of(&full).map(|s| s == *index).unwrap_or(false)
            }
            Region::Intervals(list) => list.iter().any(|&(lo, hi)| lo <= x[0] && x[0] <= hi),
            Region::Polygon(v) => point_in_polygon(v, [x[0], x[1]]),
            Region::Product { base, .. } => base.contains(&x[..base.dim()]),
        }
    }
}

// ---------------------------------------------------------------------------
// Volumes

/// Gaussian volume γ_d(r).
pub fn gaussian_volume(r: &Region) -> Result<MeasureResult> {
    r.validate()?;
    volume_unchecked(r, DEFAULT_TOLERANCE)
}

fn volume_unchecked(r: &Region, tol: f64) -> Result<MeasureResult> {
    match r {
        Region::HalfSpace { offset, .. } => Ok(MeasureResult::closed(cdf(*offset))),
        Region::Intervals(list) => Ok(MeasureResult::closed(
            list.iter().map(|&(lo, hi)| cdf_diff(lo, hi)).sum(),
        )),
        Region::Polygon(v) => Ok(polygon_volume(v, tol)),
        Region::Sector { partition, index } => sector_volume(partition, *index, tol),
        Region::Product { base, .. } => volume_unchecked(base, tol),
    }
}

/// Half-space description `{<x, w_j> <= h_j}` of sector `i` in base
/// coordinates, one constraint per other label.
pub fn sector_constraints(p: &SimplicialPartition, i: usize) -> Vec<(DVector<f64>, f64)> {
    (0..p.m())
        .filter(|&j| j != i)
        .map(|j| {
            let w = p.normal(i, j);
            let h = w.dot(p.shift());
            (w, h)
        })
        .collect()
}

fn sector_volume(p: &SimplicialPartition, i: usize, tol: f64) -> Result<MeasureResult> {
    let cons = sector_constraints(p, i);
    match p.base_dim() {
        1 => Ok(MeasureResult::closed(cdf(cons[0].1))),
        2 => {
            let w = Wedge2::from_half_planes(
                [cons[0].0[0], cons[0].0[1]],
                cons[0].1,
                [cons[1].0[0], cons[1].0[1]],
                cons[1].1,
            )?;
            Ok(w.volume(tol))
        }
        3 => trivariate_orthant(&cons, tol),
        d => Err(Error::Unsupported(format!(
            "sector volumes are implemented for base dimension <= 3, got {d}"
        ))),
    }
}

/// Volumes of all sectors of a partition.
pub fn sector_volumes(p: &SimplicialPartition) -> Result<Vec<MeasureResult>> {
    (0..p.m())
        .map(|i| sector_volume(p, i, DEFAULT_TOLERANCE))
        .collect()
}

/// Planar wedge `apex + {r e_θ : r >= 0, θ in [start, start + sweep]}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wedge2 {
    pub apex: [f64; 2],
    pub start: f64,
    pub sweep: f64,
}

impl Wedge2 {
    /// The wedge `{u : <u, a> <= alpha, <u, b> <= beta}` for non-parallel
    /// `a`, `b`.
    pub fn from_half_planes(a: [f64; 2], alpha: f64, b: [f64; 2], beta: f64) -> Result<Self> {
        let det = a[0] * b[1] - a[1] * b[0];
        let scale = (a[0].hypot(a[1])) * (b[0].hypot(b[1]));
        if det.abs() <= 1e-12 * scale {
            return Err(Error::invalid("wedge half-planes are parallel"));
        }
        let apex = [(alpha * b[1] - beta * a[1]) / det, (a[0] * beta - b[0] * alpha) / det];
        // Edge directions: along each boundary line, pointing into the other
        // half-plane.
        let mut d1 = [-a[1], a[0]];
        if d1[0] * b[0] + d1[1] * b[1] > 0.0 {
            d1 = [-d1[0], -d1[1]];
        }
        let mut d2 = [-b[1], b[0]];
        if d2[0] * a[0] + d2[1] * a[1] > 0.0 {
            d2 = [-d2[0], -d2[1]];
        }
        let t1 = d1[1].atan2(d1[0]);
        let t2 = d2[1].atan2(d2[0]);
        let cross = d1[0] * d2[1] - d1[1] * d2[0];
        let (start, end) = if cross > 0.0 { (t1, t2) } else { (t2, t1) };
        let mut sweep = end - start;
        if sweep < 0.0 {
            sweep += 2.0 * PI;
        }
        Ok(Wedge2 { apex, start, sweep })
    }

    fn apex_is_origin(&self) -> bool {
        self.apex[0] == 0.0 && self.apex[1] == 0.0
    }

    /// γ_2 of the wedge.
    pub fn volume(&self, tol: f64) -> MeasureResult {
        if self.apex_is_origin() {
            return MeasureResult::closed(self.sweep / (2.0 * PI));
        }
        let [px, py] = self.apex;
        let p2 = px * px + py * py;
        let e_p = (-0.5 * p2).exp();
        let f = |th: f64| {
            let (s, c) = th.sin_cos();
            let b = px * c + py * s;
            let perp = px * s - py * c;
            (e_p - b * SQRT_2PI * (-0.5 * perp * perp).exp() * cdf(-b)) / (2.0 * PI)
        };
        let r = adaptive(f, self.start, self.start + self.sweep, tol);
        MeasureResult::quad(r.value, r.error)
    }

    /// ∫ x dγ_2 over the wedge.
    pub fn barycenter(&self, tol: f64) -> VectorMeasure {
        let [px, py] = self.apex;
        let p2 = px * px + py * py;
        let e_p = (-0.5 * p2).exp();
        let parts = |th: f64| {
            let (s, c) = th.sin_cos();
            let b = px * c + py * s;
            let perp = px * s - py * c;
            let g = (-0.5 * perp * perp).exp() * cdf(-b);
            let w = (e_p - b * SQRT_2PI * g) / (2.0 * PI);
            let w2 = (-b * e_p + (1.0 + b * b) * SQRT_2PI * g) / (2.0 * PI);
            (w, w2, c, s)
        };
        let (a, b) = (self.start, self.start + self.sweep);
        let rx = adaptive(
            |th| {
                let (w, w2, c, _) = parts(th);
                px * w + c * w2
            },
            a,
            b,
            tol,
        );
        let ry = adaptive(
            |th| {
                let (w, w2, _, s) = parts(th);
                py * w + s * w2
            },
            a,
            b,
            tol,
        );
        VectorMeasure {
            value: DVector::from_row_slice(&[rx.value, ry.value]),
            abs_error_bound: DVector::from_row_slice(&[rx.error, ry.error]),
            method: Method::AdaptiveQuadrature,
        }
    }
}

/// γ_3 of `{x : <x, w_j> <= h_j, j = 0, 1, 2}` for unit `w_j`.
///
/// Conditions on `s = <x, w_0>`: each slice is a planar wedge in w_0^⊥, so the
/// volume is `∫_{-∞}^{h_0} φ(s) γ_2(wedge(s)) ds`.
fn trivariate_orthant(cons: &[(DVector<f64>, f64)], tol: f64) -> Result<MeasureResult> {
    let w0 = &cons[0].0;
    let h0 = cons[0].1;
    let (e1, e2) = orthonormal_complement_3(w0);
    let proj = |w: &DVector<f64>| [w.dot(&e1), w.dot(&e2)];
    let (a, b) = (proj(&cons[1].0), proj(&cons[2].0));
    let (r1, r2) = (w0.dot(&cons[1].0), w0.dot(&cons[2].0));
    let (h1, h2) = (cons[1].1, cons[2].1);
    let lower = -TRUNCATION_RADIUS;
    if h0 <= lower {
        return Ok(MeasureResult::quad(0.0, cdf(h0)));
    }
    let inner_tol = tol * 0.1;
    let inner_err = std::cell::Cell::new(0.0f64);
    let f = |s: f64| {
        match Wedge2::from_half_planes(a, h1 - s * r1, b, h2 - s * r2) {
            Ok(w) => {
                let v = w.volume(inner_tol);
                inner_err.set(inner_err.get().max(v.abs_error_bound));
                pdf(s) * v.value
            }
            Err(_) => 0.0,
        }
    };
    let outer = adaptive(f, lower, h0, tol * 0.5);
    // Inner errors integrate against φ, whose total mass is at most one.
    let err = outer.error + inner_err.get() + cdf(lower);
    Ok(MeasureResult::quad(outer.value, err))
}

fn orthonormal_complement_3(w: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let pick = if w[0].abs() < 0.6 { 0 } else if w[1].abs() < 0.6 { 1 } else { 2 };
    let mut e1 = DVector::from_fn(3, |k, _| if k == pick { 1.0 } else { 0.0 });
    let c = e1.dot(w);
    e1.axpy(-c, w, 1.0);
    e1 /= e1.norm();
    let e2 = DVector::from_row_slice(&[
        w[1] * e1[2] - w[2] * e1[1],
        w[2] * e1[0] - w[0] * e1[2],
        w[0] * e1[1] - w[1] * e1[0],
    ]);
    (e1, e2)
}

// ---------------------------------------------------------------------------
// Polygons

fn validate_polygon(v: &[[f64; 2]]) -> Result<()> {
    let n = v.len();
    if n < 3 {
        return Err(Error::invalid("a polygon needs at least three vertices"));
    }
    if v.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::invalid("polygon vertices must be finite"));
    }
    if shoelace(v).abs() == 0.0 {
        return Err(Error::invalid("polygon is degenerate"));
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if a == b {
            return Err(Error::invalid("polygon has repeated consecutive vertices"));
        }
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(a, b, v[j], v[(j + 1) % n]) {
                return Err(Error::invalid("polygon is not simple"));
            }
        }
    }
    Ok(())
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Closed-segment intersection test.
pub(crate) fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

fn point_in_polygon(v: &[[f64; 2]], x: [f64; 2]) -> bool {
    let n = v.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let t = (x[1] - a[1]) / (b[1] - a[1]);
            if x[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

/// `(1 - e^{-s/2}) / s`, continuous at 0.
#[inline]
pub(crate) fn omega_kernel(s: f64) -> f64 {
    if s < 1e-8 {
        0.5 - s / 8.0
    } else {
        -(-0.5 * s).exp_m1() / s
    }
}

/// ∫ over the segment A→B of the 1-form ω = (2π)^{-1}(1 - e^{-r²/2}) dθ,
/// whose exterior derivative is γ_2 dx.
fn omega_segment(a: [f64; 2], b: [f64; 2], tol: f64) -> (f64, f64) {
    let cross = a[0] * b[1] - a[1] * b[0];
    if cross == 0.0 {
        return (0.0, 0.0);
    }
    let d = [b[0] - a[0], b[1] - a[1]];
    let g = |t: f64| {
        let x = a[0] + t * d[0];
        let y = a[1] + t * d[1];
        omega_kernel(x * x + y * y)
    };
    let scale = cross.abs() / (2.0 * PI);
    let r = adaptive(g, 0.0, 1.0, tol / scale.max(1e-300));
    (cross / (2.0 * PI) * r.value, scale * r.error)
}

fn polygon_volume(v: &[[f64; 2]], tol: f64) -> MeasureResult {
    let n = v.len();
    let sign = shoelace(v).signum();
    let per_edge = tol / n as f64;
    let (mut total, mut err) = (0.0, 0.0);
    for i in 0..n {
        let (val, e) = omega_segment(v[i], v[(i + 1) % n], per_edge);
        total += val;
        err += e;
    }
    MeasureResult::quad(sign * total, err)
}

/// Weighted length `∫ γ_1(x) ds` of the segment A→B in R², in closed form.
pub fn segment_measure(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return 0.0;
    }
    let u = [d[0] / len, d[1] / len];
    let s0 = a[0] * u[0] + a[1] * u[1];
    let h = a[0] * u[1] - a[1] * u[0];
    (-0.5 * h * h).exp() * cdf_diff(s0, s0 + len)
}

fn polygon_barycenter(v: &[[f64; 2]]) -> VectorMeasure {
    // ∫_P x dγ = -∮ γ_2 ν ds with ν the outward normal.
    let n = v.len();
    let sign = shoelace(v).signum();
    let mut acc = [0.0, 0.0];
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        // Outward normal of a counter-clockwise boundary is the right normal.
        let nu = [sign * d[1] / len, -sign * d[0] / len];
        let m = segment_measure(a, b) / SQRT_2PI;
        acc[0] -= m * nu[0];
        acc[1] -= m * nu[1];
    }
    VectorMeasure {
        value: DVector::from_row_slice(&acc),
        abs_error_bound: DVector::from_element(2, CLOSED_FORM_ERROR * n as f64),
        method: Method::ClosedForm,
    }
}

// ---------------------------------------------------------------------------
// Barycenters

/// ∫_r x dγ_d(x), component-wise.
pub fn barycenter(r: &Region) -> Result<VectorMeasure> {
    r.validate()?;
    barycenter_unchecked(r)
}

fn barycenter_unchecked(r: &Region) -> Result<VectorMeasure> {
    match r {
        Region::HalfSpace { normal, offset } => Ok(VectorMeasure {
            value: normal.scale(-pdf(*offset)),
            abs_error_bound: DVector::from_element(normal.len(), CLOSED_FORM_ERROR),
            method: Method::ClosedForm,
        }),
        Region::Intervals(list) => {
            let v: f64 = list.iter().map(|&(lo, hi)| pdf(lo) - pdf(hi)).sum();
            Ok(VectorMeasure {
                value: DVector::from_element(1, v),
                abs_error_bound: DVector::from_element(1, CLOSED_FORM_ERROR),
                method: Method::ClosedForm,
            })
        }
        Region::Polygon(v) => Ok(polygon_barycenter(v)),
        Region::Sector { partition, index } => {
            let base = match partition.base_dim() {
                1 => {
                    let (w, h) = sector_constraints(partition, *index).remove(0);
                    VectorMeasure {
                        value: w.scale(-pdf(h)),
                        abs_error_bound: DVector::from_element(1, CLOSED_FORM_ERROR),
                        method: Method::ClosedForm,
                    }
                }
                2 => sector_barycenter_polar(partition, *index)?,
                _ => sector_barycenter_flux(partition, *index)?,
            };
            Ok(pad(base, partition.extra()))
        }
        Region::Product { base, extra } => Ok(pad(barycenter_unchecked(base)?, *extra)),
    }
}

fn pad(mut v: VectorMeasure, extra: usize) -> VectorMeasure {
    if extra > 0 {
        let n = v.value.len();
        v.value = v.value.resize_vertically(n + extra, 0.0);
        v.abs_error_bound = v.abs_error_bound.resize_vertically(n + extra, 0.0);
    }
    v
}

/// Barycenter of a sector of R² by integrating the radial moments over the
/// opening angle.
pub fn sector_barycenter_polar(p: &SimplicialPartition, i: usize) -> Result<VectorMeasure> {
    if p.base_dim() != 2 {
        return Err(Error::invalid("polar barycenter route needs a partition of R^2"));
    }
    let cons = sector_constraints(p, i);
    let w = Wedge2::from_half_planes(
        [cons[0].0[0], cons[0].0[1]],
        cons[0].1,
        [cons[1].0[0], cons[1].0[1]],
        cons[1].1,
    )?;
    Ok(w.barycenter(DEFAULT_TOLERANCE))
}

/// Barycenter of sector `i` from the interface measures:
/// `∫_{Ω_i} x dγ_d = -(2π)^{-1/2} Σ_j γ_{d-1}(Σ_ij) N_ij`, N_ij pointing
/// out of Ω_i. Base coordinates only.
pub fn sector_barycenter_flux(p: &SimplicialPartition, i: usize) -> Result<VectorMeasure> {
    let pieces = p.interfaces()?;
    let d = p.base_dim();
    let mut value = DVector::zeros(d);
    let mut err = DVector::zeros(d);
    let mut method = Method::ClosedForm;
    for piece in &pieces {
        let sign = if piece.labels.0 == i {
            1.0
        } else if piece.labels.1 == i {
            -1.0
        } else {
            continue;
        };
        let m = interface_measure_unchecked(piece, DEFAULT_TOLERANCE)?;
        method = method.combine(m.method);
        value.axpy(-sign * m.value / SQRT_2PI, &piece.normal, 1.0);
        err += piece.normal.abs().scale(m.abs_error_bound / SQRT_2PI);
    }
    Ok(VectorMeasure {
        value,
        abs_error_bound: err,
        method,
    })
}

/// Barycenters of all sectors (rows), base coordinates only.
pub fn sector_barycenters(p: &SimplicialPartition) -> Result<DMatrix<f64>> {
    let d = p.base_dim();
    let mut out = DMatrix::zeros(p.m(), d);
    if d == 1 || d == 2 {
        for i in 0..p.m() {
            let r = Region::Sector {
                partition: p.clone().with_extra(0),
                index: i,
            };
            out.row_mut(i).copy_from(&barycenter_unchecked(&r)?.value.transpose());
        }
        return Ok(out);
    }
    let pieces = p.interfaces()?;
    for piece in &pieces {
        let m = interface_measure_unchecked(piece, DEFAULT_TOLERANCE)?.value / SQRT_2PI;
        let (i, j) = piece.labels;
        for k in 0..d {
            out[(i, k)] -= m * piece.normal[k];
            out[(j, k)] += m * piece.normal[k];
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Interface measures

/// γ_{d-1}-measure of a flat interface piece in R^d.
pub fn interface_measure(piece: &InterfacePiece) -> Result<MeasureResult> {
    piece.validate()?;
    interface_measure_unchecked(piece, DEFAULT_TOLERANCE)
}

fn interface_measure_unchecked(piece: &InterfacePiece, tol: f64) -> Result<MeasureResult> {
    let o = &piece.origin;
    match piece.shape {
        PieceShape::Hyperplane => {
            let t = o.dot(&piece.normal);
            Ok(MeasureResult::closed((-0.5 * t * t).exp()))
        }
        PieceShape::Segment { lo, hi } => Ok(MeasureResult::closed(line_piece(piece, lo, hi))),
        PieceShape::Ray => Ok(MeasureResult::closed(line_piece(piece, 0.0, f64::INFINITY))),
        PieceShape::Wedge { lo, hi } => {
            let t = o.dot(&piece.normal);
            let w = Wedge2 {
                apex: [o.dot(&piece.frame[0]), o.dot(&piece.frame[1])],
                start: lo,
                sweep: hi - lo,
            };
            let v = w.volume(tol);
            let scale = (-0.5 * t * t).exp();
            Ok(MeasureResult {
                value: scale * v.value,
                abs_error_bound: scale * v.abs_error_bound,
                method: v.method,
            })
        }
    }
}

/// `∫_{lo}^{hi} γ_1(o + s u) ds` for a line piece in R².
fn line_piece(piece: &InterfacePiece, lo: f64, hi: f64) -> f64 {
    let o = &piece.origin;
    let u = &piece.frame[0];
    let s0 = o.dot(u);
    let h = o[0] * u[1] - o[1] * u[0];
    (-0.5 * h * h).exp() * cdf_diff(s0 + lo, s0 + hi)
}

/// Same quantity as [`interface_measure`], by direct quadrature of the weight
/// over the piece truncated to the ball of radius [`TRUNCATION_RADIUS`].
///
/// Independent of the closed forms; used to cross-check them. Hyperplanes are
/// supported up to R^3.
pub fn interface_measure_quadrature(piece: &InterfacePiece, tol: f64) -> Result<MeasureResult> {
    piece.validate()?;
    let r2 = TRUNCATION_RADIUS * TRUNCATION_RADIUS;
    let o = &piece.origin;
    let d = piece.ambient_dim();
    match piece.shape {
        PieceShape::Hyperplane => match d {
            1 => {
                let x = o[0];
                Ok(MeasureResult::quad((-0.5 * x * x).exp(), 0.0))
            }
            2 => {
                let u = &piece.frame[0];
                let s0 = o.dot(u);
                let foot = o - u.scale(s0);
                line_quadrature(&foot, u, f64::NEG_INFINITY, f64::INFINITY, tol)
            }
            3 => {
                let t = o.dot(&piece.normal);
                plane_quadrature(t, [0.0, 0.0], 0.0, 2.0 * PI, tol)
            }
            _ => Err(Error::Unsupported(
                "quadrature route for hyperplanes covers d <= 3".into(),
            )),
        },
        PieceShape::Segment { lo, hi } => {
            line_quadrature(&(o + piece.frame[0].scale(lo)), &piece.frame[0], 0.0, hi - lo, tol)
        }
        PieceShape::Ray => line_quadrature(o, &piece.frame[0], 0.0, f64::INFINITY, tol),
        PieceShape::Wedge { lo, hi } => {
            let t = o.dot(&piece.normal);
            if t * t >= r2 {
                return Ok(MeasureResult::quad(0.0, tail_bound()));
            }
            let p = [o.dot(&piece.frame[0]), o.dot(&piece.frame[1])];
            plane_quadrature(t, p, lo, hi, tol)
        }
    }
}

/// ∫ γ_1(a + s u) ds over `s in [lo, hi]` ∩ ball, in R².
fn line_quadrature(
    a: &DVector<f64>,
    u: &DVector<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<MeasureResult> {
    let r2 = TRUNCATION_RADIUS * TRUNCATION_RADIUS;
    // |a + s u|² <= R² on an interval around the closest point.
    let c = a.dot(u);
    let q = a.norm_squared() - c * c;
    if q >= r2 {
        return Ok(MeasureResult::quad(0.0, tail_bound()));
    }
    let half = (r2 - q).sqrt();
    let (s_lo, s_hi) = ((-c - half).max(lo), (-c + half).min(hi));
    if s_lo >= s_hi {
        return Ok(MeasureResult::quad(0.0, tail_bound()));
    }
    let f = |s: f64| {
        let x = a + u.scale(s);
        pdf(x.norm())
    };
    let r = adaptive(f, s_lo, s_hi, tol);
    Ok(MeasureResult::quad(r.value, r.error + tail_bound()))
}

/// ∫ γ_2 over the planar wedge with in-plane apex `p`, angles `[lo, hi]`,
/// lying in a plane at distance `t` from the origin of R^3 (weight
/// `(2π)^{-1} e^{-(t² + |x'|²)/2}`), truncated to the ball.
fn plane_quadrature(t: f64, p: [f64; 2], lo: f64, hi: f64, tol: f64) -> Result<MeasureResult> {
    let rho2 = TRUNCATION_RADIUS * TRUNCATION_RADIUS - t * t;
    let scale = (-0.5 * t * t).exp() / (2.0 * PI);
    let p2 = p[0] * p[0] + p[1] * p[1];
    let inner_err = std::cell::Cell::new(0.0f64);
    let width = (hi - lo).max(1e-300);
    let inner_tol = tol / width;
    let f = |th: f64| {
        let (s, c) = th.sin_cos();
        let b = p[0] * c + p[1] * s;
        let disc = b * b - (p2 - rho2);
        if disc <= 0.0 {
            return 0.0;
        }
        let r_max = -b + disc.sqrt();
        if r_max <= 0.0 {
            return 0.0;
        }
        let r_min = (-b - disc.sqrt()).max(0.0);
        let g = |r: f64| {
            let x = p[0] + r * c;
            let y = p[1] + r * s;
            r * (-0.5 * (x * x + y * y)).exp()
        };
        let res = adaptive(g, r_min, r_max, inner_tol);
        inner_err.set(inner_err.get().max(res.error));
        res.value
    };
    let outer = adaptive(f, lo, hi, tol / scale.max(1e-300));
    let err = scale * (outer.error + inner_err.get() * width) + tail_bound();
    Ok(MeasureResult::quad(scale * outer.value, err))
}

// ---------------------------------------------------------------------------
// Quasi-Monte Carlo

/// Randomised QMC estimate of γ_d(r).
///
/// Uses the additive recurrence with generalised golden-ratio increments
/// (2^`log2_points` points), Cranley–Patterson shifted once per replicate.
/// The error bound is three standard errors over the replicates.
pub fn gaussian_volume_qmc(
    r: &Region,
    log2_points: u32,
    replicates: usize,
    seed: u64,
) -> Result<MeasureResult> {
    r.validate()?;
    if replicates < 2 {
        return Err(Error::invalid("QMC needs at least two replicates"));
    }
    if log2_points > 24 {
        return Err(Error::invalid("QMC point count capped at 2^24"));
    }
    let d = match r {
        Region::Product { base, .. } => base.dim(),
        Region::Sector { partition, .. } => partition.base_dim(),
        other => other.dim(),
    };
    let alpha = kronecker_increments(d);
    let n = 1usize << log2_points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(replicates);
    let mut x = vec![0.0; d];
    for _ in 0..replicates {
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let mut hits = 0usize;
        for k in 0..n {
            for j in 0..d {
                let u = (shift[j] + (k as f64) * alpha[j]).fract();
                x[j] = crate::normal::inv_cdf(u.clamp(1e-300, 1.0 - 1e-16));
            }
            if r.contains(&x) {
                hits += 1;
            }
        }
        estimates.push(hits as f64 / n as f64);
    }
    let mean = estimates.iter().sum::<f64>() / replicates as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (replicates - 1) as f64;
    Ok(MeasureResult {
        value: mean,
        abs_error_bound: 3.0 * (var / replicates as f64).sqrt(),
        method: Method::Qmc,
    })
}

fn kronecker_increments(d: usize) -> Vec<f64> {
    // φ_d is the positive root of x^{d+1} = x + 1.
    let mut phi: f64 = 2.0;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|k| (1.0 / phi.powi(k as i32)).fract()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::{inv_cdf, INV_SQRT_2PI};

    fn sector(m: usize, y: &[f64], i: usize) -> Region {
        Region::Sector {
            partition: SimplicialPartition::with_shift(m, y).unwrap(),
            index: i,
        }
    }

    #[test]
    fn half_space_volumes() {
        let v = gaussian_volume(&Region::half_space(&[1.0, 0.0], 0.0)).unwrap();
        assert!((v.value - 0.5).abs() <= 1e-15);
        assert_eq!(v.method, Method::ClosedForm);
        let v = gaussian_volume(&Region::half_space(&[1.0, 0.0], 0.2533471031357998)).unwrap();
        assert!((v.value - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn centred_sectors_have_equal_volume() {
        for m in 2..=4 {
            for i in 0..m {
                let v = gaussian_volume(&sector(m, &vec![0.0; m - 1], i)).unwrap();
                assert!((v.value - 1.0 / m as f64).abs() <= 1e-12, "m={m} i={i}: {}", v.value);
            }
        }
    }

    #[test]
    fn shifted_sector_volumes_sum_to_one() {
        for (m, y) in [(3, vec![0.3, -0.4]), (4, vec![0.2, -0.1, 0.35]), (3, vec![1.5, 0.7])] {
            let p = SimplicialPartition::with_shift(m, &y).unwrap();
            let vols = sector_volumes(&p).unwrap();
            let sum: f64 = vols.iter().map(|v| v.value).sum();
            let err: f64 = vols.iter().map(|v| v.abs_error_bound).sum();
            assert!((sum - 1.0).abs() <= err.max(1e-12), "m={m}: {sum}");
        }
    }

    #[test]
    fn wedge_matches_qmc_in_r3() {
        let p = SimplicialPartition::with_shift(4, &[0.3, -0.2, 0.1]).unwrap();
        for i in 0..4 {
            let r = Region::Sector {
                partition: p.clone(),
                index: i,
            };
            let exact = gaussian_volume(&r).unwrap();
            let qmc = gaussian_volume_qmc(&r, 14, 8, 5).unwrap();
            assert!(
                (exact.value - qmc.value).abs() <= qmc.abs_error_bound + 1e-4,
                "{} vs {} ± {}",
                exact.value,
                qmc.value,
                qmc.abs_error_bound
            );
        }
    }

    #[test]
    fn m4_sector_matches_orthant_oracle() {
        // Independent oracle: P(W ≤ h) for a standard trivariate normal with
        // all correlations 1/2, via W_k = (Z_0 + Z_k)/√2 conditioned on Z_0.
        let p = SimplicialPartition::with_shift(4, &[0.25, 0.1, -0.3]).unwrap();
        let cons = sector_constraints(&p, 2);
        for a in 0..3 {
            for b in a + 1..3 {
                assert!((cons[a].0.dot(&cons[b].0) - 0.5).abs() < 1e-12);
            }
        }
        let h: Vec<f64> = cons.iter().map(|c| c.1).collect();
        let oracle = adaptive(
            |z: f64| {
                pdf(z)
                    * h.iter()
                        .map(|&hk| cdf(std::f64::consts::SQRT_2 * hk - z))
                        .product::<f64>()
            },
            -12.0,
            12.0,
            1e-15,
        );
        let v = gaussian_volume(&Region::Sector {
            partition: p,
            index: 2,
        })
        .unwrap();
        assert!((v.value - oracle.value).abs() < 1e-12, "{} vs {}", v.value, oracle.value);
    }

    #[test]
    fn interval_and_product_volumes() {
        let t = inv_cdf(2.0 / 3.0);
        let mid = Region::Intervals(vec![(-t, t)]);
        assert!((gaussian_volume(&mid).unwrap().value - 1.0 / 3.0).abs() < 1e-14);
        let prod = Region::product(mid.clone(), 3);
        assert_eq!(prod.dim(), 4);
        assert_eq!(gaussian_volume(&prod).unwrap().value, gaussian_volume(&mid).unwrap().value);
        assert!(gaussian_volume(&Region::Intervals(vec![(1.0, 0.0)])).is_err());
    }

    #[test]
    fn polygon_volume_matches_grid_oracle() {
        let square = vec![[-0.5, -0.3], [1.2, -0.3], [1.2, 0.8], [-0.5, 0.8]];
        let v = gaussian_volume(&Region::Polygon(square.clone())).unwrap();
        let exact = cdf_diff(-0.5, 1.2) * cdf_diff(-0.3, 0.8);
        assert!((v.value - exact).abs() < 1e-13);
        let mut rev = square;
        rev.reverse();
        assert!((gaussian_volume(&Region::Polygon(rev)).unwrap().value - exact).abs() < 1e-13);
        // Triangle containing the origin against a tensor-product oracle.
        let tri = vec![[-1.0, -1.0], [2.0, -0.5], [0.0, 1.5]];
        let v = gaussian_volume(&Region::Polygon(tri.clone())).unwrap().value;
        let oracle = adaptive(
            |x| {
                // vertical extent of the triangle at abscissa x
                let mut ys = vec![];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    if (a[0] - x) * (b[0] - x) <= 0.0 && a[0] != b[0] {
                        ys.push(a[1] + (x - a[0]) / (b[0] - a[0]) * (b[1] - a[1]));
                    }
                }
                let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if ys.is_empty() {
                    0.0
                } else {
                    pdf(x) * cdf_diff(lo, hi)
                }
            },
            -1.0,
            2.0,
            1e-14,
        );
        assert!((v - oracle.value).abs() < 1e-10, "{v} vs {}", oracle.value);
    }

    #[test]
    fn non_simple_polygon_rejected() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            gaussian_volume(&Region::Polygon(bow)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn half_space_barycenter() {
        let b = barycenter(&Region::half_space(&[1.0, 0.0], 0.0)).unwrap();
        assert!((b.value[0] + INV_SQRT_2PI).abs() < 1e-15);
        assert_eq!(b.value[1], 0.0);
        // Oracle: 1-D quadrature of xφ(x) over x ≤ 0.
        let q = adaptive(|x| x * pdf(x), -12.0, 0.0, 1e-14);
        assert!((b.value[0] - q.value).abs() < 1e-6);
    }

    #[test]
    fn whole_plane_barycenter_vanishes() {
        let sq = vec![[-9.0, -9.0], [9.0, -9.0], [9.0, 9.0], [-9.0, 9.0]];
        let b = barycenter(&Region::Polygon(sq)).unwrap();
        assert!(b.value.amax() < 1e-15);
    }

    #[test]
    fn tripod_barycenters_point_along_directions() {
        let p = SimplicialPartition::centered(3).unwrap();
        let mut sum = DVector::zeros(2);
        for i in 0..3 {
            let b = barycenter(&sector(3, &[0.0, 0.0], i)).unwrap().value;
            let z = p.directions().vector(i);
            let c = b.dot(z);
            assert!(c > 0.0);
            assert!((b - z.scale(c)).amax() < 1e-12);
            sum += barycenter(&sector(3, &[0.0, 0.0], i)).unwrap().value;
        }
        assert!(sum.amax() < 1e-8);
    }

    #[test]
    fn flux_identity_holds_with_volume_density() {
        for y in [[0.0, 0.0], [0.3, -0.2], [-0.7, 0.45]] {
            let p = SimplicialPartition::with_shift(3, &y).unwrap();
            for i in 0..3 {
                let direct = sector_barycenter_polar(&p, i).unwrap();
                let flux = sector_barycenter_flux(&p, i).unwrap();
                assert!((direct.value - flux.value).amax() < 1e-11, "y={y:?} i={i}");
            }
        }
    }

    #[test]
    fn m4_barycenters_sum_to_zero() {
        let p = SimplicialPartition::with_shift(4, &[0.2, 0.1, -0.15]).unwrap();
        let b = sector_barycenters(&p).unwrap();
        assert!(b.row_sum().amax() < 1e-10);
    }

    #[test]
    fn interface_closed_forms() {
        let n = DVector::from_row_slice(&[0.0, 0.0, 1.0]);
        let h = InterfacePiece::hyperplane(DVector::zeros(3), n, (0, 1)).unwrap();
        assert!((interface_measure(&h).unwrap().value - 1.0).abs() <= 1e-15);
        let ray = InterfacePiece::ray(
            DVector::zeros(2),
            DVector::from_row_slice(&[0.6, 0.8]),
            DVector::from_row_slice(&[0.8, -0.6]),
            (0, 1),
        )
        .unwrap();
        assert!((interface_measure(&ray).unwrap().value - 0.5).abs() <= 1e-15);
        let t = inv_cdf(2.0 / 3.0);
        let line = InterfacePiece::hyperplane(
            DVector::from_row_slice(&[t, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0]),
            (0, 1),
        )
        .unwrap();
        let v = interface_measure(&line).unwrap().value;
        assert!((v - 0.9114094758506122).abs() < 1e-15);
        let q = interface_measure_quadrature(&line, 1e-13).unwrap();
        assert!((v - q.value).abs() <= q.abs_error_bound + 1e-15);
    }

    #[test]
    fn shifted_wedge_closed_vs_quadrature() {
        let p = SimplicialPartition::with_shift(4, &[0.4, -0.3, 0.2]).unwrap();
        for piece in p.interfaces().unwrap() {
            let a = interface_measure(&piece).unwrap();
            let b = interface_measure_quadrature(&piece, 1e-12).unwrap();
            assert!(
                (a.value - b.value).abs() <= a.abs_error_bound + b.abs_error_bound,
                "{} vs {}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn segment_measure_formula() {
        let v = segment_measure([0.3, -1.0], [0.3, 2.0]);
        let expected = (-0.045f64).exp() * cdf_diff(-1.0, 2.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((segment_measure([0.3, 2.0], [0.3, -1.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn kronecker_root() {
        let a = kronecker_increments(1);
        assert!((a[0] - 0.6180339887498949).abs() < 1e-12);
    }
}
