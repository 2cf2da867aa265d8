//! Parameter sets for the marked (shared-decay) and unmarked (per-pair decay) models.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::kernel::check_beta;
use crate::season::SeasonalProfile;

/// `θ = {μ, K, α, β}` with a fixed seasonal profile.
///
/// `k[(l, m)]` is the expected number of direct offspring in dimension `m`
/// of a non-alarm event in dimension `l`; `alpha[(l, m)]` is the extra
/// offspring when the parent bin sounded an alarm.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedParams {
    pub mu: Vec<f64>,
    pub k: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub beta: f64,
    pub season: SeasonalProfile,
}

impl MarkedParams {
    pub fn new(
        mu: Vec<f64>,
        k: DMatrix<f64>,
        alpha: DMatrix<f64>,
        beta: f64,
        season: SeasonalProfile,
    ) -> Result<Self> {
        let p = Self {
            mu,
            k,
            alpha,
            beta,
            season,
        };
        p.validate()?;
        Ok(p)
    }

    /// Background only: `K ≡ α ≡ 0`.
    pub fn poisson(mu: Vec<f64>, season: SeasonalProfile) -> Self {
        let m = mu.len();
        Self {
            mu,
            k: DMatrix::zeros(m, m),
            alpha: DMatrix::zeros(m, m),
            beta: 0.5,
            season,
        }
    }

    pub fn dims(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mu.len();
        if m == 0 {
            return Err(HawkesError::InvalidParameter("empty parameter set".into()));
        }
        if self.k.shape() != (m, m) || self.alpha.shape() != (m, m) {
            return Err(HawkesError::InvalidParameter(format!(
                "K and alpha must be {m}×{m}"
            )));
        }
        if let Some(v) = self.mu.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HawkesError::InvalidParameter(format!("mu must be non-negative, got {v}")));
        }
        for v in self.k.iter().chain(self.alpha.iter()) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(HawkesError::InvalidParameter(format!(
                    "K and alpha entries must be non-negative, got {v}"
                )));
            }
        }
        check_beta(self.beta)
    }

    /// Mean offspring matrix `K + p·α` when a fraction `p` of event bins alarm.
    pub fn branching_matrix(&self, p_alarm: f64) -> DMatrix<f64> {
        &self.k + &self.alpha * p_alarm
    }

    /// Spectral radius of `K + p·α`; below one the process is subcritical.
    pub fn spectral_radius(&self, p_alarm: f64) -> f64 {
        spectral_radius(&self.branching_matrix(p_alarm))
    }

    /// Ridge penalty `Σ_{l≠m} K²_{l,m} + Σ_{l,m} α²_{l,m}`.
    pub fn ridge_penalty(&self) -> f64 {
        let m = self.dims();
        let mut p = 0.0;
        for l in 0..m {
            for j in 0..m {
                if l != j {
                    p += self.k[(l, j)] * self.k[(l, j)];
                }
                p += self.alpha[(l, j)] * self.alpha[(l, j)];
            }
        }
        p
    }
}

/// Per-pair decay model with constant background.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmarkedParams {
    pub mu: Vec<f64>,
    pub k: DMatrix<f64>,
    /// `b[(l, m)]` is the geometric decay parameter from `l` to `m`.
    pub b: DMatrix<f64>,
}

impl UnmarkedParams {
    pub fn new(mu: Vec<f64>, k: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let p = Self { mu, k, b };
        p.validate()?;
        Ok(p)
    }

    pub fn dims(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mu.len();
        if m == 0 {
            return Err(HawkesError::InvalidParameter("empty parameter set".into()));
        }
        if self.k.shape() != (m, m) || self.b.shape() != (m, m) {
            return Err(HawkesError::InvalidParameter(format!("K and B must be {m}×{m}")));
        }
        if let Some(v) = self.mu.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HawkesError::InvalidParameter(format!("mu must be non-negative, got {v}")));
        }
        if let Some(v) = self.k.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HawkesError::InvalidParameter(format!("K entries must be non-negative, got {v}")));
        }
        self.b.iter().try_for_each(|b| check_beta(*b))
    }

    /// Unmarked model with every pair sharing one decay.
    pub fn tied(mu: Vec<f64>, k: DMatrix<f64>, beta: f64) -> Result<Self> {
        let m = mu.len();
        Self::new(mu, k, DMatrix::from_element(m, m, beta))
    }
}

/// Largest eigenvalue modulus. Uses a bounded Schur iteration; if that does
/// not converge (it can stall on highly degenerate spectra), falls back to
/// `‖A^(2^j)‖^(1/2^j)` by repeated squaring.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if let Some(schur) = Schur::try_new(a.clone(), 1e-13, 10_000) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    gelfand_radius(a)
}

fn gelfand_radius(a: &DMatrix<f64>) -> f64 {
    let mut power = a.clone();
    let mut log_scale = 0.0;
    let mut exponent = 1.0;
    for _ in 0..60 {
        let norm = power.norm();
        if norm == 0.0 || !norm.is_finite() {
            return 0.0;
        }
        power /= norm;
        log_scale += norm.ln() / exponent;
        power = &power * &power;
        exponent *= 2.0;
    }
    (log_scale + power.norm().ln() / exponent).exp()
}

/// JSON shape of a marked parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedParamsRepr {
    pub mu: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: f64,
    pub season: Vec<f64>,
}

pub(crate) fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|r| a.row(r).iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(HawkesError::InvalidParameter(format!("expected a {m}×{m} matrix")));
    }
    Ok(DMatrix::from_fn(m, m, |r, c| rows[r][c]))
}

impl From<&MarkedParams> for MarkedParamsRepr {
    fn from(p: &MarkedParams) -> Self {
        Self {
            mu: p.mu.clone(),
            k: matrix_rows(&p.k),
            alpha: matrix_rows(&p.alpha),
            beta: p.beta,
            season: p.season.values().to_vec(),
        }
    }
}

impl TryFrom<&MarkedParamsRepr> for MarkedParams {
    type Error = HawkesError;

    fn try_from(r: &MarkedParamsRepr) -> Result<Self> {
        let m = r.mu.len();
        MarkedParams::new(
            r.mu.clone(),
            matrix_from_rows(&r.k, m)?,
            matrix_from_rows(&r.alpha, m)?,
            r.beta,
            SeasonalProfile::new(r.season.clone())?,
        )
    }
}

/// JSON shape of an unmarked parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmarkedParamsRepr {
    pub mu: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

impl From<&UnmarkedParams> for UnmarkedParamsRepr {
    fn from(p: &UnmarkedParams) -> Self {
        Self {
            mu: p.mu.clone(),
            k: matrix_rows(&p.k),
            b: matrix_rows(&p.b),
        }
    }
}

impl TryFrom<&UnmarkedParamsRepr> for UnmarkedParams {
    type Error = HawkesError;

    fn try_from(r: &UnmarkedParamsRepr) -> Result<Self> {
        let m = r.mu.len();
        UnmarkedParams::new(r.mu.clone(), matrix_from_rows(&r.k, m)?, matrix_from_rows(&r.b, m)?)
    }
}
