//! Cost functional of the simplicial candidates.
//!
//! For prescribed volumes `a` the shift `y(a)` is the unique shift whose
//! sectors have Gaussian volumes `a`; the candidate cost is the total
//! interface measure `I(a) = B(y(a))`. The derivative identities checked here
//! are
//!
//! ```text
//! ∇_b I(a)     = √(2π) <λ(y(a)), b>
//! ∇_b ∇_b I(a) = -2π bᵀ K̃⁺ b
//! ```
//!
//! with λ the Lagrange multipliers of the flat interfaces and K̃ the interface
//! matrix of the shifted partition.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::SimplicialPartition;
use crate::measure::{self, MeasureResult};
use crate::normal::SQRT_2PI;

const SUM_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TARGET: f64 = 1e-13;
/// Residual at which a stalled Newton run still counts as converged.
const NEWTON_ACCEPT: f64 = 1e-9;

/// Prescribed volumes: a point of the open simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeVector(Vec<f64>);

impl VolumeVector {
    /// Checks positivity and `Σ a_i = 1` within 1e-12.
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::invalid("a volume vector needs at least two entries"));
        }
        if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!(
                "volumes must be strictly positive: {a:?}"
            )));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("volumes sum to {sum}, not 1")));
        }
        Ok(VolumeVector(a))
    }

    /// Accepts sums within `tolerance` of 1 and rescales them; returns whether
    /// a rescaling happened.
    pub fn renormalized(a: Vec<f64>, tolerance: f64) -> Result<(Self, bool)> {
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::invalid(format!(
                "volumes sum to {sum}, more than {tolerance} away from 1"
            )));
        }
        if (sum - 1.0).abs() <= SUM_TOL {
            return Ok((Self::new(a)?, false));
        }
        let scaled = a.iter().map(|v| v / sum).collect();
        Ok((Self::new(scaled)?, true))
    }

    /// Equal volumes `1/m`.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_m(m: usize) -> Result<()> {
    if (2..=4).contains(&m) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "the simplicial cost is implemented for m in {{2, 3, 4}}, got {m}"
        )))
    }
}

fn partition(y: &[f64], m: usize) -> Result<SimplicialPartition> {
    check_m(m)?;
    if y.len() + 1 != m {
        return Err(Error::invalid(format!(
            "shift has dimension {}, expected {}",
            y.len(),
            m - 1
        )));
    }
    SimplicialPartition::with_shift(m, y)
}

/// Interface measures γ(Σ_ij) of the partition shifted by `y`, keyed by the
/// label pair.
pub fn interface_measures(y: &[f64], m: usize) -> Result<Vec<((usize, usize), MeasureResult)>> {
    let p = partition(y, m)?;
    p.interfaces()?
        .iter()
        .map(|piece| Ok((piece.labels, measure::interface_measure(piece)?)))
        .collect()
}

/// Total interface measure `B(y)` of the partition shifted by `y`.
pub fn total_perimeter(y: &[f64], m: usize) -> Result<MeasureResult> {
    Ok(interface_measures(y, m)?
        .into_iter()
        .fold(MeasureResult::zero(), |acc, (_, r)| acc.plus(r)))
}

/// Output of [`solve_shift`].
#[derive(Debug, Clone, Serialize)]
pub struct ShiftSolution {
    pub y: Vec<f64>,
    /// Sector volumes at `y`.
    pub volumes: Vec<f64>,
    /// `max_i |γ(Ω_i(y)) - a_i|`.
    pub residual: f64,
    pub iterations: usize,
}

fn volumes_at(p: &SimplicialPartition) -> Result<Vec<f64>> {
    Ok(measure::sector_volumes(p)?.iter().map(|v| v.value).collect())
}

fn residual_of(vols: &[f64], a: &[f64]) -> f64 {
    vols.iter()
        .zip(a)
        .map(|(v, t)| (v - t).abs())
        .fold(0.0, f64::max)
}

/// Shift `y(a)` with `γ(Ω_i(y)) = a_i`.
///
/// Damped Newton on the first `m - 1` volume equations. The Jacobian row of
/// sector `i` is minus its Gaussian barycenter.
pub fn solve_shift(a: &VolumeVector) -> Result<ShiftSolution> {
    let m = a.m();
    check_m(m)?;
    let target = a.as_slice();
    let d = m - 1;
    let mut y = DVector::zeros(d);
    let mut p = partition(y.as_slice(), m)?;
    let mut vols = volumes_at(&p)?;
    let mut res = residual_of(&vols, target);
    let mut iterations = 0;
    while res > NEWTON_TARGET && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let bary = measure::sector_barycenters(&p)?;
        let jac = DMatrix::from_fn(d, d, |i, k| -bary[(i, k)]);
        let rhs = DVector::from_fn(d, |i, _| target[i] - vols[i]);
        let step = jac.lu().solve(&rhs).ok_or_else(|| {
            Error::numeric("singular volume Jacobian", Some(y.iter().copied().collect()))
        })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &y + step.scale(scale);
            let tp = partition(trial.as_slice(), m)?;
            let tv = volumes_at(&tp)?;
            let tr = residual_of(&tv, target);
            if tr < res {
                y = trial;
                p = tp;
                vols = tv;
                res = tr;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res > NEWTON_ACCEPT {
        return Err(Error::numeric(
            format!("shift solve stalled at residual {res:e} after {iterations} iterations"),
            Some(y.iter().copied().collect()),
        ));
    }
    Ok(ShiftSolution {
        y: y.iter().copied().collect(),
        volumes: vols,
        residual: res,
        iterations,
    })
}

/// Candidate cost `I(a) = B(y(a))`. The error bound adds the perimeter's
/// quadrature bound and the effect of the volume residual.
pub fn cost(a: &VolumeVector) -> Result<MeasureResult> {
    let sol = solve_shift(a)?;
    let mut b = total_perimeter(&sol.y, a.m())?;
    // |∂B/∂y| stays below a few units; the volume residual moves y by at most
    // residual / (smallest Jacobian singular value), bounded crudely here.
    b.abs_error_bound += 10.0 * sol.residual;
    Ok(b)
}

/// Interface matrix `K = Σ_{i<j} γ(Σ_ij) (u_i - u_j)(u_i - u_j)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMatrix {
    pub k: DMatrix<f64>,
}

impl InterfaceMatrix {
    /// Quadratic form `bᵀ K⁺ b` on the pseudo-inverse.
    pub fn pinv_form(&self, b: &[f64]) -> f64 {
        let b = DVector::from_row_slice(b);
        (b.transpose() * pseudo_inverse(&self.k) * &b)[(0, 0)]
    }
}

pub fn interface_matrix(y: &[f64], m: usize) -> Result<InterfaceMatrix> {
    let mut k = DMatrix::zeros(m, m);
    for ((i, j), r) in interface_measures(y, m)? {
        let g = r.value;
        k[(i, i)] += g;
        k[(j, j)] += g;
        k[(i, j)] -= g;
        k[(j, i)] -= g;
    }
    Ok(InterfaceMatrix { k })
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, dropping eigenvalues
/// below `1e-12` times the largest in magnitude.
pub fn pseudo_inverse(k: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = k.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let n = k.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() > 1e-12 * top {
            let v = eig.eigenvectors.column(idx);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// Lagrange multipliers of a flat partition.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierVector {
    pub lambda: Vec<f64>,
    /// Measured `λ_ij` per interface, before the least-squares fit.
    pub pairwise: Vec<((usize, usize), f64)>,
    /// `max |λ_i - λ_j - λ_ij|` after the fit.
    pub residual: f64,
}

impl MultiplierVector {
    pub fn lambda_ij(&self, i: usize, j: usize) -> f64 {
        self.lambda[i] - self.lambda[j]
    }
}

const MULTIPLIER_TOL: f64 = 1e-10;

/// Multipliers λ with `λ_i - λ_j = λ_ij = -<x, N_ij>` on each flat interface.
pub fn multipliers(y: &[f64], m: usize) -> Result<MultiplierVector> {
    let p = partition(y, m)?;
    let pieces = p.interfaces()?;
    let pairwise: Vec<((usize, usize), f64)> = pieces
        .iter()
        .map(|piece| (piece.labels, -piece.anchor().dot(&piece.normal)))
        .collect();
    fit_multipliers(m, &pairwise)
}

/// Least-squares fit of `λ_i - λ_j = λ_ij` with `Σ λ_i = 0`.
pub fn fit_multipliers(m: usize, pairwise: &[((usize, usize), f64)]) -> Result<MultiplierVector> {
    let rows = pairwise.len() + 1;
    let mut a = DMatrix::zeros(rows, m);
    let mut rhs = DVector::zeros(rows);
    for (r, &((i, j), v)) in pairwise.iter().enumerate() {
        a[(r, i)] = 1.0;
        a[(r, j)] = -1.0;
        rhs[r] = v;
    }
    for c in 0..m {
        a[(rows - 1, c)] = 1.0;
    }
    let svd = a.clone().svd(true, true);
    let lambda = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::numeric(format!("multiplier least squares: {e}"), None))?;
    let residual = pairwise
        .iter()
        .map(|&((i, j), v)| (lambda[i] - lambda[j] - v).abs())
        .fold(0.0, f64::max);
    if residual > MULTIPLIER_TOL {
        return Err(Error::StructuralViolation(format!(
            "interface multipliers do not form a cocycle (residual {residual:e})"
        )));
    }
    Ok(MultiplierVector {
        lambda: lambda.iter().copied().collect(),
        pairwise: pairwise.to_vec(),
        residual,
    })
}

/// Finite-difference check of a derivative identity.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeCheck {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub fd: f64,
    pub identity: f64,
    pub rel_err: f64,
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub const GRADIENT_STEP: f64 = 1e-4;
pub const HESSIAN_STEP: f64 = 1e-3;

fn check_direction(a: &VolumeVector, b: &[f64], h: f64, reach: f64) -> Result<()> {
    if b.len() != a.m() {
        return Err(Error::invalid("direction and volume vector differ in length"));
    }
    if b.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("direction must be non-zero"));
    }
    let sum: f64 = b.iter().sum();
    if sum.abs() > 1e-12 * b.iter().map(|v| v.abs()).sum::<f64>().max(1.0) {
        return Err(Error::invalid(format!("direction must sum to zero, sums to {sum}")));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    for (ai, bi) in a.as_slice().iter().zip(b) {
        if ai - reach * h * bi.abs() <= 0.0 {
            return Err(Error::invalid(
                "finite-difference stencil leaves the open simplex",
            ));
        }
    }
    Ok(())
}

fn shifted(a: &VolumeVector, b: &[f64], eps: f64) -> Result<VolumeVector> {
    let v: Vec<f64> = a.as_slice().iter().zip(b).map(|(x, d)| x + eps * d).collect();
    // Re-centre the rounding so the sum stays exactly at 1.
    let s: f64 = v.iter().sum();
    let last = v.len() - 1;
    let mut v = v;
    v[last] -= s - 1.0;
    VolumeVector::new(v)
}

fn finish(a: &VolumeVector, b: &[f64], fd: f64, identity: f64, h: f64) -> DerivativeCheck {
    let rel_err = (fd - identity).abs() / identity.abs().max(1e-6);
    let warning = if fd.abs() < 1e-10 && identity.abs() > 1e-6 {
        let w = format!(
            "finite difference {fd:e} vanishes while the identity gives {identity:e}; step may underflow"
        );
        warn!("{w}");
        Some(w)
    } else {
        None
    };
    DerivativeCheck {
        a: a.as_slice().to_vec(),
        b: b.to_vec(),
        fd,
        identity,
        rel_err,
        h,
        warning,
    }
}

/// Central difference of `ε ↦ I(a + εb)` against `√(2π) <λ(y(a)), b>`.
pub fn gradient_check(a: &VolumeVector, b: &[f64], h: f64) -> Result<DerivativeCheck> {
    check_direction(a, b, h, 1.0)?;
    let m = a.m();
    let plus = cost(&shifted(a, b, h)?)?.value;
    let minus = cost(&shifted(a, b, -h)?)?.value;
    let fd = (plus - minus) / (2.0 * h);
    let y = solve_shift(a)?.y;
    let lambda = multipliers(&y, m)?.lambda;
    let identity = SQRT_2PI * lambda.iter().zip(b).map(|(l, v)| l * v).sum::<f64>();
    Ok(finish(a, b, fd, identity, h))
}

/// Second central difference of `ε ↦ I(a + εb)` against `-2π bᵀ K̃⁺ b` with
/// K̃ the interface matrix at `y(a)`.
pub fn hessian_check(a: &VolumeVector, b: &[f64], h: f64) -> Result<DerivativeCheck> {
    check_direction(a, b, h, 1.0)?;
    let m = a.m();
    let plus = cost(&shifted(a, b, h)?)?.value;
    let mid = cost(a)?.value;
    let minus = cost(&shifted(a, b, -h)?)?.value;
    let fd = (plus - 2.0 * mid + minus) / (h * h);
    let y = solve_shift(a)?.y;
    let k = interface_matrix(&y, m)?;
    let identity = -2.0 * std::f64::consts::PI * k.pinv_form(b);
    Ok(finish(a, b, fd, identity, h))
}

/// Outcome of [`matrix_cs_check`].
#[derive(Debug, Clone, Serialize)]
pub struct CauchySchwarzReport {
    pub trials: usize,
    pub passed: bool,
    pub failures: usize,
    /// Smallest eigenvalue of `E[DDᵀ] - E[DEᵀ] E[EEᵀ]⁻¹ E[EDᵀ]` seen.
    pub min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CsSample>,
}

/// A finite distribution of vector pairs `(D, E)`.
#[derive(Debug, Clone, Serialize)]
pub struct CsSample {
    pub weights: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
}

impl CsSample {
    /// Condition number of `E[EEᵀ]`.
    pub fn e_condition(&self) -> f64 {
        let q = self.e[0].len();
        let mut ee = DMatrix::zeros(q, q);
        for (w, e) in self.weights.iter().zip(&self.e) {
            let e = DVector::from_row_slice(e);
            ee += (&e * e.transpose()).scale(*w);
        }
        let ev = ee.symmetric_eigenvalues();
        let lo = ev.min();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            ev.max() / lo
        }
    }

    /// Smallest eigenvalue of the Schur-complement difference, or `None` if
    /// `E[EEᵀ]` is singular.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        let p = self.d[0].len();
        let q = self.e[0].len();
        let mut dd = DMatrix::zeros(p, p);
        let mut de = DMatrix::zeros(p, q);
        let mut ee = DMatrix::zeros(q, q);
        for ((w, d), e) in self.weights.iter().zip(&self.d).zip(&self.e) {
            let d = DVector::from_row_slice(d);
            let e = DVector::from_row_slice(e);
            dd += (&d * d.transpose()).scale(*w);
            de += (&d * e.transpose()).scale(*w);
            ee += (&e * e.transpose()).scale(*w);
        }
        let chol = ee.cholesky()?;
        let diff = dd - &de * chol.solve(&de.transpose());
        let sym = (&diff + diff.transpose()).scale(0.5);
        Some(sym.symmetric_eigenvalues().min())
    }
}

/// Samples random finite distributions and checks the matrix Cauchy–Schwarz
/// ordering `E[DEᵀ] E[EEᵀ]⁻¹ E[EDᵀ] ≤ E[DDᵀ]`.
pub fn matrix_cs_check(trials: usize, seed: u64) -> Result<CauchySchwarzReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    let mut failures = 0;
    let mut counterexample = None;
    let mut done = 0;
    while done < trials {
        let p = rng.gen_range(1..=4);
        let q = rng.gen_range(1..=4);
        let n = rng.gen_range(q.max(2)..=q + 6);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let d: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let e: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let sample = CsSample { weights, d, e };
        // Near-singular draws only probe rounding, not the inequality.
        if sample.e_condition() > 1e6 {
            continue;
        }
        let Some(lo) = sample.min_eigenvalue() else {
            continue;
        };
        done += 1;
        min_eig = min_eig.min(lo);
        if lo < -1e-10 {
            failures += 1;
            if counterexample.is_none() {
                counterexample = Some(sample);
            }
        }
    }
    Ok(CauchySchwarzReport {
        trials,
        passed: failures == 0,
        failures,
        min_eigenvalue: min_eig,
        counterexample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::{cdf, inv_cdf};

    fn vv(a: &[f64]) -> VolumeVector {
        VolumeVector::new(a.to_vec()).unwrap()
    }

    #[test]
    fn volume_vector_validation() {
        assert!(VolumeVector::new(vec![0.5, 0.6]).is_err());
        assert!(VolumeVector::new(vec![1.0, 0.0]).is_err());
        let (v, changed) = VolumeVector::renormalized(vec![0.3333, 0.3333, 0.3334], 1e-6).unwrap();
        assert!(!changed || (v.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let (_, changed) = VolumeVector::renormalized(vec![0.3333, 0.3333, 0.3333], 1e-3).unwrap();
        assert!(changed);
        assert!(VolumeVector::renormalized(vec![0.3, 0.3, 0.3], 1e-6).is_err());
    }

    #[test]
    fn perimeters() {
        assert!((total_perimeter(&[0.0], 2).unwrap().value - 1.0).abs() < 1e-12);
        assert!((total_perimeter(&[0.0, 0.0], 3).unwrap().value - 1.5).abs() < 1e-12);
        let t = 0.2533471031357998;
        let b = total_perimeter(&[-t], 2).unwrap().value;
        assert!((b - 0.968417118155805).abs() < 1e-12);
        assert!(matches!(total_perimeter(&[0.0; 4], 5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn symmetric_shift_is_zero() {
        for m in 2..=4 {
            let s = solve_shift(&VolumeVector::uniform(m).unwrap()).unwrap();
            assert!(s.y.iter().all(|v| v.abs() < 1e-9), "m={m}: {:?}", s.y);
        }
    }

    #[test]
    fn m2_shift_matches_inverse_cdf() {
        let s = solve_shift(&vv(&[0.6, 0.4])).unwrap();
        // Sector 0 is {x >= y}, so y = -Φ⁻¹(0.6).
        assert!((s.y[0] + inv_cdf(0.6)).abs() < 1e-12);
        assert!((cdf(-s.y[0]) - 0.6).abs() < 1e-13);
        assert!(s.residual <= 1e-9);
    }

    #[test]
    fn m4_shift_converges_tightly() {
        let a = vv(&[0.4, 0.3, 0.2, 0.1]);
        let s = solve_shift(&a).unwrap();
        assert!(s.residual <= 1e-11, "{}", s.residual);
    }

    #[test]
    fn costs() {
        assert!((cost(&vv(&[0.5, 0.5])).unwrap().value - 1.0).abs() < 1e-12);
        assert!((cost(&vv(&[0.6, 0.4])).unwrap().value - 0.968417118155805).abs() < 1e-9);
        let third = 1.0 / 3.0;
        let c = cost(&vv(&[third, third, 1.0 - 2.0 * third])).unwrap();
        assert!((c.value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn interface_matrices() {
        let k = interface_matrix(&[0.0], 2).unwrap().k;
        assert!((k - DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).amax() < 1e-14);
        let k3 = interface_matrix(&[0.0, 0.0], 3).unwrap();
        let expected = (DMatrix::identity(3, 3) * 3.0 - DMatrix::from_element(3, 3, 1.0)) * 0.5;
        assert!((&k3.k - expected).amax() < 1e-14);
        assert!((k3.pinv_form(&[1.0, -1.0, 0.0]) - 4.0 / 3.0).abs() < 1e-9);
        assert!((k3.k.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn multiplier_values() {
        for m in 2..=4 {
            let lam = multipliers(&vec![0.0; m - 1], m).unwrap();
            assert!(lam.lambda.iter().all(|v| v.abs() < 1e-15));
        }
        let t = inv_cdf(0.6);
        let s = solve_shift(&vv(&[0.6, 0.4])).unwrap();
        let lam = multipliers(&s.y, 2).unwrap();
        assert!((lam.lambda[0] + t / 2.0).abs() < 1e-12);
        assert!((lam.lambda[1] - t / 2.0).abs() < 1e-12);
        assert!((lam.lambda_ij(0, 1) + t).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_cocycle_rejected() {
        let bad = [((0, 1), 0.1), ((0, 2), 0.1), ((1, 2), 0.3)];
        assert!(matches!(
            fit_multipliers(3, &bad),
            Err(Error::StructuralViolation(_))
        ));
    }

    #[test]
    fn gradient_examples() {
        let g = gradient_check(&vv(&[0.5, 0.5]), &[1.0, -1.0], GRADIENT_STEP).unwrap();
        assert!(g.fd.abs() < 1e-9 && g.identity.abs() < 1e-12);
        let g = gradient_check(&vv(&[0.6, 0.4]), &[1.0, -1.0], GRADIENT_STEP).unwrap();
        assert!((g.identity + 0.635047012016052).abs() < 1e-12);
        assert!(g.rel_err <= 1e-5, "{g:?}");
        let g = gradient_check(&vv(&[0.4, 0.35, 0.25]), &[1.0, 0.0, -1.0], GRADIENT_STEP).unwrap();
        assert!(g.rel_err <= 1e-4, "{g:?}");
    }

    #[test]
    fn hessian_examples() {
        let h = hessian_check(&vv(&[0.6, 0.4]), &[1.0, -1.0], HESSIAN_STEP).unwrap();
        assert!((h.identity + 6.488098144263399).abs() < 1e-9, "{h:?}");
        assert!(h.rel_err <= 1e-3);
        let third = 1.0 / 3.0;
        let h = hessian_check(&vv(&[third, third, 1.0 - 2.0 * third]), &[1.0, -1.0, 0.0], HESSIAN_STEP)
            .unwrap();
        assert!((h.identity + 8.377580409572782).abs() < 1e-8, "{h:?}");
        assert!(h.rel_err <= 1e-3, "{h:?}");
        let h = hessian_check(&vv(&[0.5, 0.5]), &[1.0, -1.0], HESSIAN_STEP).unwrap();
        assert!((h.identity + 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn direction_validation() {
        let a = vv(&[0.6, 0.4]);
        assert!(gradient_check(&a, &[1.0, 1.0], 1e-4).is_err());
        assert!(gradient_check(&a, &[0.0, 0.0], 1e-4).is_err());
        assert!(hessian_check(&a, &[1.0, -1.0], 0.5).is_err());
    }

    #[test]
    fn cauchy_schwarz_equality_and_orthogonal_cases() {
        let d = vec![vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, -1.0]];
        let same = CsSample {
            weights: vec![0.2, 0.3, 0.5],
            d: d.clone(),
            e: d.clone(),
        };
        assert!(same.min_eigenvalue().unwrap().abs() < 1e-12);
        // Symmetric two-point law: D = ±1 independent of E's sign pattern.
        let orth = CsSample {
            weights: vec![0.25; 4],
            d: vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]],
            e: vec![vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]],
        };
        assert!((orth.min_eigenvalue().unwrap() - 1.0).abs() < 1e-14);
        let r = matrix_cs_check(1000, 0).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
