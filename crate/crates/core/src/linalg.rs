//! Online ridge-regression state for the bandit loop.
//!
//! [`GramState`] keeps `V = λI + Σ a aᵀ` together with its inverse, the
//! response accumulator `Σ a y`, the ridge estimate and the running
//! `log det V − log det V₀`. The inverse is maintained by Sherman–Morrison
//! rank-1 updates and rebuilt from `V` by Cholesky every
//! [`DEFAULT_REFACTOR_INTERVAL`] updates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the unit-norm bound of an arm.
pub const ARM_NORM_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_REFACTOR_INTERVAL: usize = 512;

/// A feature vector with Euclidean norm at most one.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmVector(DVector<f64>);

impl ArmVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("arm vector must have at least one coordinate"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("arm vector has a non-finite coordinate"));
        }
        let norm = v.norm();
        if norm > 1.0 + ARM_NORM_TOLERANCE {
            return Err(Error::invalid(format!("arm norm {norm} exceeds 1")));
        }
        Ok(Self(v))
    }

    /// Divides by the norm when it exceeds one; shorter vectors pass through.
    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        let mut v = DVector::from_vec(coords);
        let norm = v.norm();
        if norm.is_finite() && norm > 1.0 {
            v /= norm;
        }
        Self::from_vector(v)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    /// Multiplies by a factor in `[0, 1]`, which cannot break the norm bound.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&factor));
        Self(&self.0 * factor)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn dot(&self, other: &DVector<f64>) -> f64 {
        self.0.dot(other)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// Failure-rate schedule `t ↦ δ_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSchedule {
    /// `δ_t = 1/(t+1)`.
    #[default]
    InverseTPlusOne,
    Constant(f64),
}

impl DeltaSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            DeltaSchedule::InverseTPlusOne => 1.0 / (t as f64 + 1.0),
            DeltaSchedule::Constant(d) => d,
        }
    }
}

/// Guesses for the noise scale `σ` and `‖θ*‖₂`, plus the failure schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceParams {
    pub sigma: f64,
    pub s: f64,
    pub delta: DeltaSchedule,
}

impl ConfidenceParams {
    pub fn new(sigma: f64, s: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!(
                "confidence parameters must be positive (sigma={sigma}, S={s})"
            )));
        }
        Ok(Self {
            sigma,
            s,
            delta: DeltaSchedule::InverseTPlusOne,
        })
    }

    pub fn with_delta(mut self, delta: DeltaSchedule) -> Self {
        self.delta = delta;
        self
    }
}

#[derive(Clone, Debug)]
pub struct GramState {
    dim: usize,
    lambda: f64,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    b: DVector<f64>,
    theta_hat: DVector<f64>,
    log_det_ratio: f64,
    t: u64,
    refactor_every: usize,
}

impl GramState {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            dim,
            lambda,
            v: DMatrix::identity(dim, dim) * lambda,
            v_inv: DMatrix::identity(dim, dim) / lambda,
            b: DVector::zeros(dim),
            theta_hat: DVector::zeros(dim),
            log_det_ratio: 0.0,
            t: 0,
            refactor_every: DEFAULT_REFACTOR_INTERVAL,
        })
    }

    /// Sets how many updates pass between full refactorizations (0 disables).
    pub fn with_refactor_interval(mut self, every: usize) -> Self {
        self.refactor_every = every;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn log_det_ratio(&self) -> f64 {
        self.log_det_ratio
    }

    /// Number of rounds absorbed so far.
    pub fn rounds(&self) -> u64 {
        self.t
    }

    fn check_dim(&self, arm: &ArmVector) -> Result<()> {
        if arm.dim() != self.dim {
            return Err(Error::invalid(format!(
                "arm has dimension {}, state has dimension {}",
                arm.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Absorbs one observation `(a, y)`.
    pub fn update(&mut self, arm: &ArmVector, reward: f64) -> Result<()> {
        self.check_dim(arm)?;
        if !reward.is_finite() {
            return Err(Error::invalid(format!("reward must be finite, got {reward}")));
        }
        let a = arm.as_vector();
        self.t += 1;
        if !arm.is_zero() {
            let u = &self.v_inv * a;
            let lev = a.dot(&u).max(0.0);
            self.v_inv.ger(-1.0 / (1.0 + lev), &u, &u, 1.0);
            self.v.ger(1.0, a, a, 1.0);
            self.b.axpy(reward, a, 1.0);
            self.log_det_ratio += lev.ln_1p();
        }
        if self.refactor_every > 0 && self.t.is_multiple_of(self.refactor_every as u64) {
            self.refactorize()?;
        }
        self.theta_hat = &self.v_inv * &self.b;
        Ok(())
    }

    /// Rebuilds the inverse and log-determinant from `V` directly.
    pub fn refactorize(&mut self) -> Result<()> {
        let chol = self.v.clone().cholesky().ok_or_else(|| Error::Internal {
            message: "Gram matrix lost positive definiteness".into(),
            report: format!("t={}, dim={}", self.t, self.dim),
        })?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let mut inv = chol.inverse();
        // Cholesky inverse is symmetric only up to round-off.
        for i in 0..self.dim {
            for j in 0..i {
                let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        self.v_inv = inv;
        self.log_det_ratio = log_det - self.dim as f64 * self.lambda.ln();
        self.theta_hat = &self.v_inv * &self.b;
        Ok(())
    }

    /// `‖x‖²_{V⁻¹}` for a raw vector of matching dimension, clamped at 0.
    pub(crate) fn quad_inv(&self, x: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim {
            let mut row = 0.0;
            for i in 0..self.dim {
                row += self.v_inv[(i, j)] * x[i];
            }
            acc += row * x[j];
        }
        acc.max(0.0)
    }

    /// Leverage score `‖a‖²_{V⁻¹}`.
    pub fn leverage(&self, arm: &ArmVector) -> Result<f64> {
        self.check_dim(arm)?;
        Ok(self.quad_inv(arm.as_vector()))
    }

    /// `‖a − b‖²_{V⁻¹}`; exactly zero for coordinate-wise identical inputs.
    pub fn mahalanobis_gap(&self, a: &ArmVector, b: &ArmVector) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        if a == b {
            return Ok(0.0);
        }
        Ok(self.quad_inv(&(a.as_vector() - b.as_vector())))
    }

    /// Confidence radius `β_t(δ_t)` at the current round count.
    pub fn beta(&self, params: &ConfidenceParams) -> Result<f64> {
        let delta = params.delta.at(self.t);
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid(format!(
                "delta_{} = {delta} is outside (0, 1]",
                self.t
            )));
        }
        let inner = (self.log_det_ratio + 2.0 * (1.0 / delta).ln()).max(0.0);
        let root = params.sigma * inner.sqrt() + self.lambda.sqrt() * params.s;
        Ok(root * root)
    }
}
