//! Approximate G-optimal designs over finite arm sets.
//!
//! The pipeline seeds a count vector with a barycentric spanner and then
//! greedily adds the arm of largest leverage under the running count matrix
//! `V̄ = Σ count(a) a aᵀ` until no arm has leverage above one. Normalizing
//! the counts by their total `τ` gives a design whose maximum leverage is at
//! most `τ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::ArmVector;

/// Slack on the greedy stopping rule `max leverage ≤ 1`.
pub const LEVERAGE_SLACK: f64 = 1e-9;

/// Candidate directions shorter than this are treated as already spanned.
pub const SPAN_TOLERANCE: f64 = 1e-10;

/// Arms whose weight in the rescaled set falls below this are left to the
/// uniform component of the sampling mixture.
pub const MIN_RESCALE_WEIGHT: f64 = 1e-12;

const EIGEN_RELATIVE_FLOOR: f64 = 1e-10;
const RANGE_RELATIVE_RESIDUAL: f64 = 1e-8;

/// Upper bound on the greedy round count: `ceil(16·d·(1 + ln d))`.
pub fn design_cap(dim: usize) -> usize {
    let d = dim as f64;
    (16.0 * d * (1.0 + d.ln())).ceil() as usize
}

/// Sparse probability weights over arm indices, sorted by index.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    weights: Vec<(usize, f64)>,
}

impl Design {
    fn from_counts(counts: &[usize], total: usize) -> Self {
        let weights = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c as f64 / total as f64))
            .collect();
        Self { weights }
    }

    /// Uniform weights over the given (distinct) indices.
    pub fn uniform(indices: &[usize]) -> Self {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let w = 1.0 / idx.len() as f64;
        Self {
            weights: idx.into_iter().map(|i| (i, w)).collect(),
        }
    }

    pub fn weights(&self) -> &[(usize, f64)] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.weights[pos].1)
            .unwrap_or(0.0)
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|(_, w)| *w > 0.0).count()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, w) in &self.weights {
            out[i] = w;
        }
        out
    }

    fn remap(self, original: &[usize]) -> Self {
        Self {
            weights: self
                .weights
                .into_iter()
                .map(|(i, w)| (original[i], w))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignReport {
    /// `g(π) = max_a ‖a‖²_{V(π)⁻¹}` over the input arms.
    pub max_leverage: f64,
    /// Total count after the greedy phase.
    pub tau: usize,
    /// Rank of the subspace spanned by the selected arms.
    pub effective_rank: usize,
}

/// Eigen-based pseudo-inverse of a PSD matrix, restricted to its numerical
/// range.
#[derive(Clone, Debug)]
pub(crate) struct RangeInverse {
    vectors: Vec<DVector<f64>>,
    inv_values: Vec<f64>,
}

impl RangeInverse {
    pub(crate) fn new(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let floor = top * EIGEN_RELATIVE_FLOOR;
        let mut vectors = Vec::new();
        let mut inv_values = Vec::new();
        if top > 0.0 {
            for (k, &val) in eig.eigenvalues.iter().enumerate() {
                if val > floor {
                    vectors.push(eig.eigenvectors.column(k).into_owned());
                    inv_values.push(1.0 / val);
                }
            }
        }
        Self {
            vectors,
            inv_values,
        }
    }

    pub(crate) fn rank(&self) -> usize {
        self.vectors.len()
    }

    /// Returns `(leverage within the range, squared residual outside it)`.
    pub(crate) fn leverage(&self, a: &DVector<f64>) -> (f64, f64) {
        let mut lev = 0.0;
        let mut captured = 0.0;
        for (u, inv) in self.vectors.iter().zip(&self.inv_values) {
            let c = u.dot(a);
            lev += c * c * inv;
            captured += c * c;
        }
        (lev, (a.norm_squared() - captured).max(0.0))
    }

    /// `M⁺ x`.
    pub(crate) fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for (u, inv) in self.vectors.iter().zip(&self.inv_values) {
            out.axpy(u.dot(x) * inv, u, 1.0);
        }
        out
    }

    pub(crate) fn in_range(&self, a: &DVector<f64>) -> bool {
        let (_, resid) = self.leverage(a);
        resid <= RANGE_RELATIVE_RESIDUAL * a.norm_squared()
    }
}

fn check_arms(arms: &[ArmVector]) -> Result<usize> {
    let first = arms
        .first()
        .ok_or_else(|| Error::invalid("arm set must be nonempty"))?;
    let d = first.dim();
    if let Some(bad) = arms.iter().position(|a| a.dim() != d) {
        return Err(Error::invalid(format!(
            "arm {bad} has dimension {}, expected {d}",
            arms[bad].dim()
        )));
    }
    Ok(d)
}

/// Index of the max (or min) of `score` over arms; ties go to the lowest index.
fn arg_extreme(arms: &[ArmVector], b: &DVector<f64>, maximize: bool) -> usize {
    let mut best = 0;
    let mut best_val = arms[0].dot(b);
    for (i, a) in arms.iter().enumerate().skip(1) {
        let v = a.dot(b);
        if (maximize && v > best_val) || (!maximize && v < best_val) {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Barycentric-spanner seed set.
///
/// Small sets (`K ≤ 2d`) are returned whole. Otherwise each coordinate
/// direction, orthogonalized against the differences picked so far, selects
/// its argmax and argmin arm; a pair is kept only when its difference grows
/// the spanned subspace.
pub fn bh_spanner(arms: &[ArmVector]) -> Result<Vec<usize>> {
    let d = check_arms(arms)?;
    let k = arms.len();
    if k <= 2 * d {
        return Ok((0..k).collect());
    }

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut chosen: Vec<usize> = Vec::with_capacity(2 * d);
    let orthogonalize = |v: &mut DVector<f64>, basis: &[DVector<f64>]| {
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for u in basis {
                let c = u.dot(v);
                v.axpy(-c, u, 1.0);
            }
        }
    };

    for i in 0..d {
        if basis.len() == d {
            break;
        }
        let mut b = DVector::zeros(d);
        b[i] = 1.0;
        orthogonalize(&mut b, &basis);
        if b.norm() <= SPAN_TOLERANCE {
            continue;
        }
        let p = arg_extreme(arms, &b, true);
        let q = arg_extreme(arms, &b, false);
        let mut v = arms[p].as_vector() - arms[q].as_vector();
        orthogonalize(&mut v, &basis);
        let len = v.norm();
        if len <= SPAN_TOLERANCE {
            continue;
        }
        basis.push(v / len);
        for idx in [p, q] {
            if !chosen.contains(&idx) {
                chosen.push(idx);
            }
        }
    }

    if chosen.is_empty() {
        // Every arm is identical along every direction tried.
        let idx = arms.iter().position(|a| !a.is_zero()).unwrap_or(0);
        chosen.push(idx);
    }
    Ok(chosen)
}

/// Greedy leverage-score rounding on top of [`bh_spanner`].
pub fn approx_design(arms: &[ArmVector]) -> Result<(Design, DesignReport)> {
    let d = check_arms(arms)?;
    if arms.iter().all(ArmVector::is_zero) {
        return Err(Error::invalid("design requires at least one nonzero arm"));
    }
    let cap = design_cap(d);
    let seeds = bh_spanner(arms)?;

    let mut counts = vec![0usize; arms.len()];
    let mut vbar = DMatrix::<f64>::zeros(d, d);
    for &s in &seeds {
        counts[s] += 1;
        let a = arms[s].as_vector();
        vbar.ger(1.0, a, a, 1.0);
    }
    let mut tau = seeds.len();
    // Arms already picked while outside the range of V̄ are not treated as
    // unbounded again, so round-off cannot loop the greedy phase.
    let mut tried_outside = vec![false; arms.len()];

    loop {
        let pinv = RangeInverse::new(&vbar);
        let mut best: Option<(usize, f64)> = None;
        let mut max_finite: f64 = 0.0;
        for (i, a) in arms.iter().enumerate() {
            let v = a.as_vector();
            let (lev, _) = pinv.leverage(v);
            max_finite = max_finite.max(lev);
            let score = if !tried_outside[i] && !a.is_zero() && !pinv.in_range(v) {
                f64::INFINITY
            } else {
                lev
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (pick, score) = best.expect("arm set is nonempty");
        if score <= 1.0 + LEVERAGE_SLACK {
            let design = Design::from_counts(&counts, tau);
            let report = DesignReport {
                max_leverage: tau as f64 * max_finite,
                tau,
                effective_rank: pinv.rank(),
            };
            return Ok((design, report));
        }
        if score.is_infinite() {
            tried_outside[pick] = true;
        }
        counts[pick] += 1;
        let a = arms[pick].as_vector();
        vbar.ger(1.0, a, a, 1.0);
        tau += 1;
        if tau > cap {
            return Err(Error::Internal {
                message: format!("design round count exceeded cap {cap}"),
                report: format!(
                    "d={d}, K={}, tau={tau}, last leverage={score}, rank={}",
                    arms.len(),
                    pinv.rank()
                ),
            });
        }
    }
}

/// Which arm-set transformation feeds the design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AugmentVersion {
    /// Rescale each arm by `sqrt(f(a))`.
    #[default]
    Rescale,
    /// Keep only arms with `f(a) ≥ 1/e`.
    Eliminate,
}

impl AugmentVersion {
    pub fn from_index(ver: u8) -> Result<Self> {
        match ver {
            0 => Ok(Self::Rescale),
            1 => Ok(Self::Eliminate),
            other => Err(Error::invalid(format!("ver must be 0 or 1, got {other}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Rescale => 0,
            Self::Eliminate => 1,
        }
    }
}

/// Design over an arm set transformed by the exponential weights `f`.
///
/// The returned weights are indexed by the original arms. Zero arms never
/// enter the design computation.
pub fn design_augmented(arms: &[ArmVector], f: &[f64], ver: AugmentVersion) -> Result<Design> {
    check_arms(arms)?;
    if f.len() != arms.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} arms",
            f.len(),
            arms.len()
        )));
    }
    if let Some(bad) = f.iter().position(|&w| !(w > 0.0 && w <= 1.0)) {
        return Err(Error::invalid(format!(
            "weight f[{bad}] = {} is outside (0, 1]",
            f[bad]
        )));
    }

    let (kept, transformed): (Vec<usize>, Vec<ArmVector>) = match ver {
        AugmentVersion::Rescale => arms
            .iter()
            .zip(f)
            .enumerate()
            .filter(|(_, (a, &w))| w >= MIN_RESCALE_WEIGHT && !a.is_zero())
            .map(|(i, (a, &w))| (i, a.scaled(w.sqrt())))
            .unzip(),
        AugmentVersion::Eliminate => arms
            .iter()
            .zip(f)
            .enumerate()
            .filter(|(_, (a, &w))| w >= (-1.0f64).exp() && !a.is_zero())
            .map(|(i, (a, _))| (i, a.clone()))
            .unzip(),
    };
    if kept.is_empty() {
        return Err(Error::invalid(
            "no arm survives the augmentation step".to_string(),
        ));
    }
    let (design, _) = approx_design(&transformed)?;
    Ok(design.remap(&kept))
}
