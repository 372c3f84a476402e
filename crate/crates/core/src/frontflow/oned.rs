//! Exact-topology optimization of 1-D partitions.
//!
//! A partition of R into labelled intervals has cost `Σ_k e^{-t_k²/2}` over
//! its breakpoints. In the coordinates `ℓ_r` = Gaussian mass of interval `r`
//! the volume constraints are linear (one simplex per label) and the cost
//! `Σ_k I(u_k)`, `u_k = ℓ_0 + … + ℓ_{k-1}`, is concave because the Gaussian
//! isoperimetric profile `I(u) = √(2π) φ(Φ⁻¹(u))` is. Each topology is
//! descended by projected gradient with Armijo backtracking, and the result
//! is canonicalised by dropping empty intervals and merging equal neighbours.

use log::debug;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::{cdf, inv_cdf, SQRT_2PI};
use crate::simplicial::VolumeVector;

/// Largest number of breakpoints enumerated.
pub const MAX_BREAKS: usize = 6;

const MAX_ITER: usize = 5000;
const ARMIJO_C: f64 = 1e-4;
const EMPTY: f64 = 1e-12;

/// Labelled breakpoints `t_1 < … < t_K`; interval `r` carries `labels[r]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition1D {
    pub breakpoints: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Partition1D {
    pub fn new(breakpoints: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let p = Partition1D {
            breakpoints,
            labels,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.breakpoints.len() + 1 {
            return Err(Error::invalid("a 1-D partition needs one more label than breakpoints"));
        }
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if self.labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("adjacent intervals must carry different labels"));
        }
        Ok(())
    }

    /// Gaussian volume of each label `0..m`.
    pub fn volumes(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        let mut lo = f64::NEG_INFINITY;
        for (r, &label) in self.labels.iter().enumerate() {
            let hi = self.breakpoints.get(r).copied().unwrap_or(f64::INFINITY);
            if label < m {
                out[label] += crate::normal::cdf_diff(lo, hi);
            }
            lo = hi;
        }
        out
    }

    /// `Σ e^{-t_k²/2}`.
    pub fn cost(&self) -> f64 {
        self.breakpoints.iter().map(|t| (-0.5 * t * t).exp()).sum()
    }
}

/// Outcome of [`optimize_1d`].
#[derive(Debug, Clone, Serialize)]
pub struct OneDResult {
    pub best: Partition1D,
    pub cost: f64,
    pub topologies_tried: usize,
    pub skipped: Vec<String>,
}

/// Best labelled partition of R with volumes `a` and at most `max_breaks`
/// breakpoints.
pub fn optimize_1d(m: usize, a: &VolumeVector, max_breaks: usize) -> Result<OneDResult> {
    if m < 2 || a.m() != m {
        return Err(Error::invalid(format!(
            "need m >= 2 and a volume vector of length m (m = {m}, got {})",
            a.m()
        )));
    }
    if max_breaks > MAX_BREAKS {
        return Err(Error::invalid(format!(
            "max_breaks is capped at {MAX_BREAKS}, got {max_breaks}"
        )));
    }
    let mut best: Option<(f64, Partition1D)> = None;
    let mut skipped = Vec::new();
    let mut tried = 0;
    for k in 0..=max_breaks {
        for seq in label_sequences(m, k + 1) {
            // Mirror images have the same cost.
            let mut rev = seq.clone();
            rev.reverse();
            if rev < seq {
                continue;
            }
            if (0..m).any(|l| !seq.contains(&l)) {
                let msg = format!("topology {seq:?} omits a label; infeasible");
                debug!("{msg}");
                skipped.push(msg);
                continue;
            }
            tried += 1;
            let p = descend(&seq, a.as_slice());
            let c = p.cost();
            let better = match &best {
                None => true,
                Some((bc, bp)) => {
                    c < bc - 1e-12
                        || ((c - bc).abs() <= 1e-12
                            && (p.breakpoints.len(), &p.labels) < (bp.breakpoints.len(), &bp.labels))
                }
            };
            if better {
                best = Some((c, p));
            }
        }
    }
    let (cost, best) = best.ok_or_else(|| {
        Error::invalid(format!(
            "no feasible topology with at most {max_breaks} breakpoints for m = {m}"
        ))
    })?;
    Ok(OneDResult {
        best,
        cost,
        topologies_tried: tried,
        skipped,
    })
}

/// All label sequences of the given length with distinct neighbours.
pub fn label_sequences(m: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = Vec::with_capacity(len);
    fn rec(m: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for l in 0..m {
            if cur.last() != Some(&l) {
                cur.push(l);
                rec(m, len, cur, out);
                cur.pop();
            }
        }
    }
    rec(m, len, &mut cur, &mut out);
    out
}

fn profile(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let t = inv_cdf(u);
    (-0.5 * t * t).exp()
}

fn profile_slope(u: f64) -> f64 {
    -SQRT_2PI * inv_cdf(u.clamp(1e-15, 1.0 - 1e-15))
}

fn cumulative(ell: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(ell.len().saturating_sub(1));
    let mut acc = 0.0;
    for l in &ell[..ell.len() - 1] {
        acc += l;
        u.push(acc);
    }
    u
}

fn objective(ell: &[f64]) -> f64 {
    cumulative(ell).into_iter().map(profile).sum()
}

fn gradient(ell: &[f64]) -> Vec<f64> {
    let u = cumulative(ell);
    let slopes: Vec<f64> = u.iter().map(|&x| profile_slope(x)).collect();
    // ∂/∂ℓ_r = Σ_{k >= r} I'(u_k)
    let mut g = vec![0.0; ell.len()];
    let mut acc = 0.0;
    for r in (0..ell.len()).rev() {
        g[r] = acc;
        if r > 0 {
            acc += slopes[r - 1];
        }
    }
    g
}

/// Euclidean projection onto `{x >= 0, Σ x = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, x) in s.iter().enumerate() {
        acc += x;
        let t = (acc - total) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn project(ell: &[f64], labels: &[usize], a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ell.len()];
    for (l, &total) in a.iter().enumerate() {
        let idx: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == l).collect();
        let vals: Vec<f64> = idx.iter().map(|&r| ell[r]).collect();
        for (r, v) in idx.iter().zip(project_simplex(&vals, total)) {
            out[*r] = v;
        }
    }
    out
}

fn descend(labels: &[usize], a: &[f64]) -> Partition1D {
    // Interior start, slightly tilted so symmetric saddles are left.
    let mut ell = vec![0.0; labels.len()];
    for (l, &total) in a.iter().enumerate() {
        let idx: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == l).collect();
        let weights: Vec<f64> = (0..idx.len()).map(|q| 1.0 + 0.1 * q as f64).collect();
        let wsum: f64 = weights.iter().sum();
        for (r, w) in idx.iter().zip(weights) {
            ell[*r] = total * w / wsum;
        }
    }
    let mut f = objective(&ell);
    let mut step = 0.1;
    for _ in 0..MAX_ITER {
        let g = gradient(&ell);
        let mut accepted = false;
        while step > 1e-16 {
            let trial: Vec<f64> = ell.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            let trial = project(&trial, labels, a);
            let moved: f64 = trial.iter().zip(&ell).zip(&g).map(|((t, x), d)| d * (t - x)).sum();
            let ft = objective(&trial);
            if ft <= f + ARMIJO_C * moved {
                let change: f64 = trial.iter().zip(&ell).map(|(t, x)| (t - x).abs()).sum();
                ell = trial;
                f = ft;
                accepted = true;
                step *= 2.0;
                if change < 1e-15 {
                    return canonical(labels, &ell);
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    canonical(labels, &ell)
}

/// Drops empty intervals, merges equal neighbours and converts the masses
/// back to breakpoints.
fn canonical(labels: &[usize], ell: &[f64]) -> Partition1D {
    let mut merged: Vec<(usize, f64)> = Vec::new();
    for (&l, &x) in labels.iter().zip(ell) {
        if x <= EMPTY {
            continue;
        }
        match merged.last_mut() {
            Some((last, mass)) if *last == l => *mass += x,
            _ => merged.push((l, x)),
        }
    }
    let mut breakpoints = Vec::with_capacity(merged.len().saturating_sub(1));
    let mut acc = 0.0;
    for (_, x) in &merged[..merged.len() - 1] {
        acc += x;
        breakpoints.push(inv_cdf(acc));
    }
    debug_assert!(breakpoints.iter().all(|t| cdf(*t) > 0.0));
    Partition1D {
        breakpoints,
        labels: merged.into_iter().map(|(l, _)| l).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_halves() {
        let r = optimize_1d(2, &VolumeVector::uniform(2).unwrap(), 3).unwrap();
        assert_eq!(r.best.breakpoints.len(), 1);
        assert!(r.best.breakpoints[0].abs() < 1e-12);
        assert!((r.cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_equal_slabs() {
        let r = optimize_1d(3, &VolumeVector::uniform(3).unwrap(), 6).unwrap();
        let t = 0.4307272992954575;
        assert_eq!(r.best.breakpoints.len(), 2);
        assert!((r.best.breakpoints[0] + t).abs() < 1e-9);
        assert!((r.best.breakpoints[1] - t).abs() < 1e-9);
        assert!((r.cost - 1.822818951701224).abs() < 1e-9);
        assert!(r.cost > 1.5);
        assert!(!r.skipped.is_empty());
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, -0.2, 0.9], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|x| *x >= 0.0));
        assert_eq!(project_simplex(&[0.3, 0.7], 1.0), vec![0.3, 0.7]);
    }

    #[test]
    fn partition_validation_and_volumes() {
        assert!(Partition1D::new(vec![0.0, -1.0], vec![0, 1, 0]).is_err());
        assert!(Partition1D::new(vec![0.0], vec![1, 1]).is_err());
        let p = Partition1D::new(vec![-0.5, 0.5], vec![0, 1, 0]).unwrap();
        let v = p.volumes(2);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((v[1] - crate::normal::cdf_diff(-0.5, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn limits() {
        let a = VolumeVector::uniform(3).unwrap();
        assert!(optimize_1d(3, &a, 7).is_err());
        assert!(optimize_1d(3, &a, 1).is_err());
        assert!(optimize_1d(2, &a, 3).is_err());
    }
}
