//! Regular-simplex direction systems, shifted simplicial-cone partitions and
//! their interfaces.
//!
//! A partition with directions `z_1..z_m` in R^{m-1} and shift `y` has sectors
//!
//! ```text
//! Ω_i(y) = y + { x : <x, z_i> = max_j <x, z_j> }
//! ```
//!
//! optionally crossed with `extra` trailing copies of R. The trailing factor is
//! never materialised: Gaussian measure factorises, so every measure of a
//! product sector equals the measure of its base.
//!
//! Indices are zero-based throughout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{self, Region};

const UNIT_TOL: f64 = 1e-12;

/// `m` unit vectors in R^{m-1} forming a regular simplex centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexDirections {
    vectors: Vec<DVector<f64>>,
}

impl SimplexDirections {
    /// Canonical regular simplex with `m` vertices.
    ///
    /// Construction: the centred basis vectors `e_i - (1/m) 1` of R^m span the
    /// zero-sum hyperplane. Gram–Schmidt on `e_1 - 1/m, e_2 - 1/m, ...` gives an
    /// orthonormal basis of that hyperplane, and the normalised centred basis
    /// vectors are expressed in it. The first direction therefore lies on the
    /// first axis, and every later direction has zero components beyond its
    /// own index.
    pub fn regular(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(format!(
                "a simplex partition needs m >= 2 sets, got {m}"
            )));
        }
        let inv_m = 1.0 / m as f64;
        let centred = |i: usize| {
            DVector::from_fn(m, |k, _| if k == i { 1.0 - inv_m } else { -inv_m })
        };
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            let mut v = centred(i);
            for b in &basis {
                let c = v.dot(b);
                v.axpy(-c, b, 1.0);
            }
            // Second pass keeps the basis orthonormal to rounding level.
            for b in &basis {
                let c = v.dot(b);
                v.axpy(-c, b, 1.0);
            }
            v /= v.norm();
            basis.push(v);
        }
        let vectors = (0..m)
            .map(|i| {
                let c = centred(i);
                let n = c.norm();
                let v = DVector::from_iterator(m - 1, basis.iter().map(|b| b.dot(&c) / n));
                let len = v.norm();
                v / len
            })
            .collect();
        Ok(SimplexDirections { vectors })
    }

    /// Number of directions.
    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    /// Dimension of the space the directions live in (`m - 1`).
    pub fn dim(&self) -> usize {
        self.vectors.len() - 1
    }

    pub fn vector(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// Gram matrix `<z_i, z_j>`.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, j| self.vectors[i].dot(&self.vectors[j]))
    }
}

/// A shifted simplicial-cone partition of R^{m-1} × R^{extra}.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialPartition {
    directions: SimplexDirections,
    shift: DVector<f64>,
    extra: usize,
}

impl SimplicialPartition {
    pub fn new(directions: SimplexDirections, shift: DVector<f64>, extra: usize) -> Result<Self> {
        if shift.len() != directions.dim() {
            return Err(Error::invalid(format!(
                "shift has dimension {}, expected {}",
                shift.len(),
                directions.dim()
            )));
        }
        if shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("shift must be finite"));
        }
        Ok(SimplicialPartition {
            directions,
            shift,
            extra,
        })
    }

    /// Canonical partition with `m` sets and the given shift.
    pub fn with_shift(m: usize, shift: &[f64]) -> Result<Self> {
        let directions = SimplexDirections::regular(m)?;
        Self::new(directions, DVector::from_row_slice(shift), 0)
    }

    /// Canonical unshifted partition (all sectors have volume 1/m).
    pub fn centered(m: usize) -> Result<Self> {
        Self::with_shift(m, &vec![0.0; m.saturating_sub(1)])
    }

    /// Same partition crossed with `extra` trailing real lines.
    pub fn with_extra(mut self, extra: usize) -> Self {
        self.extra = extra;
        self
    }

    pub fn m(&self) -> usize {
        self.directions.m()
    }

    /// Dimension `m - 1` of the base space carrying the cone structure.
    pub fn base_dim(&self) -> usize {
        self.directions.dim()
    }

    pub fn extra(&self) -> usize {
        self.extra
    }

    /// Dimension of the full ambient space, trailing factor included.
    pub fn ambient_dim(&self) -> usize {
        self.base_dim() + self.extra
    }

    pub fn directions(&self) -> &SimplexDirections {
        &self.directions
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    /// Unit normal of Σ_ij pointing from Ω_i into Ω_j (base coordinates).
    pub fn normal(&self, i: usize, j: usize) -> DVector<f64> {
        let d = self.directions.vector(j) - self.directions.vector(i);
        let n = d.norm();
        d / n
    }

    /// Index of the sector containing `x`.
    ///
    /// `x` must have the ambient dimension; trailing coordinates are ignored.
    /// On the measure-zero interface set the smallest maximising index wins.
    pub fn sector_of(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.ambient_dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, partition lives in dimension {}",
                x.len(),
                self.ambient_dim()
            )));
        }
        let base = &x[..self.base_dim()];
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, z) in self.directions.vectors().iter().enumerate() {
            let v: f64 = base
                .iter()
                .zip(self.shift.iter())
                .zip(z.iter())
                .map(|((xk, yk), zk)| (xk - yk) * zk)
                .sum();
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        Ok(best)
    }

    /// The interfaces Σ_ij as geometric primitives in base coordinates.
    ///
    /// m = 2: one hyperplane (a point of R^1); m = 3: three rays from the
    /// junction `y`; m = 4: six planar wedges with apex `y`, bounded by the
    /// four rays `y - t z_k`.
    pub fn interfaces(&self) -> Result<Vec<InterfacePiece>> {
        let m = self.m();
        let z = self.directions.vectors();
        let y = &self.shift;
        match m {
            2 => Ok(vec![InterfacePiece::hyperplane(
                y.clone(),
                self.normal(0, 1),
                (0, 1),
            )?]),
            3 => {
                let mut out = Vec::with_capacity(3);
                for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
                    let dir = -&z[k];
                    out.push(InterfacePiece::ray(y.clone(), dir, self.normal(i, j), (i, j))?);
                }
                Ok(out)
            }
            4 => {
                let mut out = Vec::with_capacity(6);
                for i in 0..4 {
                    for j in i + 1..4 {
                        let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
                        let e0 = -&z[others[0]];
                        let e1 = -&z[others[1]];
                        out.push(InterfacePiece::wedge_between(
                            y.clone(),
                            &e0,
                            &e1,
                            self.normal(i, j),
                            (i, j),
                        )?);
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Unsupported(format!(
                "closed-form interface catalogue covers m in {{2, 3, 4}}, got m = {m}"
            ))),
        }
    }

    /// The sectors as measurable regions (trailing factor included).
    pub fn regions(&self) -> Vec<Region> {
        (0..self.m())
            .map(|index| Region::Sector {
                partition: self.clone(),
                index,
            })
            .collect()
    }

    pub fn to_doc(&self) -> PartitionDoc {
        PartitionDoc {
            m: self.m(),
            dim: self.base_dim(),
            shift: self.shift.iter().copied().collect(),
            extra: self.extra,
        }
    }

    pub fn from_doc(doc: &PartitionDoc) -> Result<Self> {
        if doc.m < 2 || doc.dim + 1 != doc.m {
            return Err(Error::invalid(format!(
                "partition document has m = {} and dim = {}; expected dim = m - 1",
                doc.m, doc.dim
            )));
        }
        let dirs = SimplexDirections::regular(doc.m)?;
        Self::new(dirs, DVector::from_row_slice(&doc.shift), doc.extra)
    }

    /// JSON form `{m, dim, shift, extra}` with 17 significant digits.
    pub fn to_json(&self) -> String {
        crate::report::to_json_string(&self.to_doc())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PartitionDoc = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("bad partition document: {e}")))?;
        Self::from_doc(&doc)
    }
}

/// Serialised description of a [`SimplicialPartition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub m: usize,
    pub dim: usize,
    pub shift: Vec<f64>,
    pub extra: usize,
}

/// Shape and parameter bounds of an interface piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceShape {
    /// The full affine hyperplane through `origin` spanned by the frame.
    Hyperplane,
    /// `origin + s f_0` for `s` in `[lo, hi]`.
    Segment { lo: f64, hi: f64 },
    /// `origin + s f_0` for `s >= 0`.
    Ray,
    /// `origin + r (cos θ f_0 + sin θ f_1)` for `r >= 0` and `θ` in `[lo, hi]`,
    /// with `hi - lo < π`.
    Wedge { lo: f64, hi: f64 },
}

/// A flat codimension-one piece of an interface Σ_ij.
///
/// `frame` is an orthonormal basis of the carrier's direction space and
/// `normal` completes it to an orthonormal basis of the ambient space; for
/// pieces produced by a partition, `normal` points from `Ω_labels.0` into
/// `Ω_labels.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePiece {
    pub shape: PieceShape,
    pub origin: DVector<f64>,
    pub frame: Vec<DVector<f64>>,
    pub normal: DVector<f64>,
    pub labels: (usize, usize),
}

impl InterfacePiece {
    /// Hyperplane through `point` with the given unit normal.
    pub fn hyperplane(point: DVector<f64>, normal: DVector<f64>, labels: (usize, usize)) -> Result<Self> {
        let frame = complement_frame(&normal)?;
        Self::checked(PieceShape::Hyperplane, point, frame, normal, labels)
    }

    /// Ray in the plane from `start` along the unit vector `direction`.
    pub fn ray(
        start: DVector<f64>,
        direction: DVector<f64>,
        normal: DVector<f64>,
        labels: (usize, usize),
    ) -> Result<Self> {
        Self::checked(PieceShape::Ray, start, vec![direction], normal, labels)
    }

    /// Segment in the plane `origin + s u`, `s` in `[lo, hi]`.
    pub fn segment(
        origin: DVector<f64>,
        direction: DVector<f64>,
        lo: f64,
        hi: f64,
        normal: DVector<f64>,
        labels: (usize, usize),
    ) -> Result<Self> {
        Self::checked(PieceShape::Segment { lo, hi }, origin, vec![direction], normal, labels)
    }

    /// Planar wedge in R^3 with the given apex, spanned by the unit edge
    /// directions `e0` and `e1`.
    pub fn wedge_between(
        apex: DVector<f64>,
        e0: &DVector<f64>,
        e1: &DVector<f64>,
        normal: DVector<f64>,
        labels: (usize, usize),
    ) -> Result<Self> {
        let f0 = e0.normalize();
        let mut f1 = e1 - f0.scale(f0.dot(e1));
        let n1 = f1.norm();
        if n1 < 1e-12 {
            return Err(Error::invalid("wedge edge directions are parallel"));
        }
        f1 /= n1;
        let angle = f0.dot(&e1.normalize()).clamp(-1.0, 1.0).acos();
        Self::checked(
            PieceShape::Wedge { lo: 0.0, hi: angle },
            apex,
            vec![f0, f1],
            normal,
            labels,
        )
    }

    fn checked(
        shape: PieceShape,
        origin: DVector<f64>,
        frame: Vec<DVector<f64>>,
        normal: DVector<f64>,
        labels: (usize, usize),
    ) -> Result<Self> {
        let piece = InterfacePiece {
            shape,
            origin,
            frame,
            normal,
            labels,
        };
        piece.validate()?;
        Ok(piece)
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    /// Checks the frame/normal orthonormality, extents and labels.
    pub fn validate(&self) -> Result<()> {
        let d = self.ambient_dim();
        if self.labels.0 == self.labels.1 {
            return Err(Error::invalid("interface labels must differ"));
        }
        if self.normal.len() != d || self.frame.iter().any(|f| f.len() != d) {
            return Err(Error::invalid("interface vectors have inconsistent dimensions"));
        }
        if self.frame.len() + 1 != d {
            return Err(Error::invalid(format!(
                "interface piece must have codimension one: frame of {} vectors in R^{d}",
                self.frame.len()
            )));
        }
        let mut all: Vec<&DVector<f64>> = self.frame.iter().collect();
        all.push(&self.normal);
        for (a, u) in all.iter().enumerate() {
            if (u.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::invalid("carrier frame is not orthonormal"));
            }
            for v in &all[a + 1..] {
                if u.dot(v).abs() > 1e-10 {
                    return Err(Error::invalid("carrier frame is not orthonormal"));
                }
            }
        }
        match self.shape {
            PieceShape::Hyperplane => {}
            PieceShape::Ray | PieceShape::Segment { .. } if d != 2 => {
                return Err(Error::invalid("rays and segments are interface pieces of R^2 only"));
            }
            PieceShape::Wedge { .. } if d != 3 => {
                return Err(Error::invalid("wedges are interface pieces of R^3 only"));
            }
            PieceShape::Segment { lo, hi } => {
                if !(lo <= hi) || !lo.is_finite() {
                    return Err(Error::invalid("segment bounds are not ordered"));
                }
            }
            PieceShape::Wedge { lo, hi } => {
                if !(lo <= hi) || hi - lo >= std::f64::consts::PI {
                    return Err(Error::invalid("wedge angles must satisfy lo <= hi < lo + π"));
                }
            }
            PieceShape::Ray => {}
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("interface origin must be finite"));
        }
        Ok(())
    }

    /// A point of the piece (its origin/apex).
    pub fn anchor(&self) -> DVector<f64> {
        match self.shape {
            PieceShape::Segment { lo, .. } => &self.origin + self.frame[0].scale(lo),
            _ => self.origin.clone(),
        }
    }

    /// The piece after applying the orthogonal map `q` to the ambient space.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        InterfacePiece {
            shape: self.shape,
            origin: q * &self.origin,
            frame: self.frame.iter().map(|f| q * f).collect(),
            normal: q * &self.normal,
            labels: self.labels,
        }
    }
}

/// Orthonormal basis of the orthogonal complement of a unit vector.
fn complement_frame(normal: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let d = normal.len();
    if d == 0 || (normal.norm() - 1.0).abs() > UNIT_TOL.max(1e-10) {
        return Err(Error::invalid("hyperplane normal must be a unit vector"));
    }
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(d - 1);
    for k in 0..d {
        if frame.len() == d - 1 {
            break;
        }
        let mut v = DVector::from_fn(d, |r, _| if r == k { 1.0 } else { 0.0 });
        for _ in 0..2 {
            let c = v.dot(normal);
            v.axpy(-c, normal, 1.0);
            for f in &frame {
                let c = v.dot(f);
                v.axpy(-c, f, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            frame.push(v / n);
        }
    }
    Ok(frame)
}

/// Numerical rank of the Gaussian barycenters of a partition.
#[derive(Debug, Clone)]
pub struct RankReport {
    pub rank: usize,
    /// Singular values of the m × d barycenter matrix, descending.
    pub singular_values: Vec<f64>,
    /// Rows: barycenters ∫_{Ω_i} x dγ.
    pub barycenters: DMatrix<f64>,
    pub volume_sum: f64,
}

impl RankReport {
    /// Smallest retained singular value over the largest dropped one, both
    /// relative to the largest; infinite if nothing was dropped.
    pub fn gap(&self) -> f64 {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if top == 0.0 || self.rank == 0 {
            return 0.0;
        }
        let kept = self.singular_values[self.rank - 1] / top;
        match self.singular_values.get(self.rank) {
            Some(&s) if s > 0.0 => kept / (s / top),
            _ => f64::INFINITY,
        }
    }
}

/// Dimension of the span of the Gaussian barycenters ∫_{Ω_i} x dγ_d.
///
/// `regions` must partition R^d: their volumes must sum to 1 within
/// `tolerance`. The rank counts singular values above `tolerance` times the
/// largest.
pub fn barycenter_rank(regions: &[Region], tolerance: f64) -> Result<RankReport> {
    if regions.is_empty() {
        return Err(Error::invalid("no regions given"));
    }
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let d = regions[0].dim();
    if regions.iter().any(|r| r.dim() != d) {
        return Err(Error::invalid("regions live in different dimensions"));
    }
    let mut volume_sum = 0.0;
    let mut rows = DMatrix::zeros(regions.len(), d);
    for (i, r) in regions.iter().enumerate() {
        volume_sum += measure::gaussian_volume(r)?.value;
        let b = measure::barycenter(r)?;
        rows.row_mut(i).copy_from(&b.value.transpose());
    }
    if (volume_sum - 1.0).abs() > tolerance {
        return Err(Error::InconsistentPartition {
            sum: volume_sum,
            tolerance,
        });
    }
    let mut singular_values: Vec<f64> = rows.clone().singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let top = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values
        .iter()
        .filter(|&&s| top > 0.0 && s > tolerance * top)
        .count();
    Ok(RankReport {
        rank,
        singular_values,
        barycenters: rows,
        volume_sum,
    })
}
