//! Penalized maximum-likelihood fitting and ridge cross-validation.
//!
//! Free parameters are mapped to an unconstrained vector (`log` for `μ`,
//! `K`, `α`; `logit` for `β`) and the penalized log-likelihood is climbed by
//! gradient ascent with Armijo backtracking. Entries fixed by the model
//! variant stay exactly zero.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::evaluator::predictive_loglik;
use crate::gradient::grad_regularized;
use crate::likelihood::{loglik_regularized_with, PenaltySign};
use crate::params::{matrix_rows, MarkedParams};
use crate::rng::{derive_seed, Purpose, Stream};
use crate::season::SeasonalProfile;
use crate::series::BinnedSeries;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 50;

/// Which parameters a model frees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    /// Inhomogeneous Poisson: background only.
    Ipp,
    /// Independent self-exciting wards: diagonal `K`.
    Uhp,
    /// Full `K`, no alarm effect.
    Mhp,
    /// Full `K` and `α`.
    Mhpa,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ipp, Variant::Uhp, Variant::Mhp, Variant::Mhpa];

    pub fn frees_k(self, l: usize, m: usize) -> bool {
        match self {
            Self::Ipp => false,
            Self::Uhp => l == m,
            Self::Mhp | Self::Mhpa => true,
        }
    }

    pub fn frees_alpha(self) -> bool {
        self == Self::Mhpa
    }

    pub fn frees_beta(self) -> bool {
        self != Self::Ipp
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ipp => "IPP",
            Self::Uhp => "UHP",
            Self::Mhp => "MHP",
            Self::Mhpa => "MHPA",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IPP" => Ok(Self::Ipp),
            "UHP" => Ok(Self::Uhp),
            "MHP" => Ok(Self::Mhp),
            "MHPA" => Ok(Self::Mhpa),
            _ => Err(HawkesError::InvalidParameter(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitRule {
    /// `μ = 0.5 ×` event rate, `K = 0.1 I + 0.01` off the diagonal, `α = 0.01`, `β = 0.1`.
    #[default]
    Default,
    /// The default start with every free entry scaled by an independent factor in `[0.9, 1.1)`.
    Jittered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub variant: Variant,
    pub lambda_h: f64,
    pub max_iters: usize,
    /// Stop once an accepted step changes the objective by less than `tol` relative.
    pub tol: f64,
    pub seed: u64,
    pub init: InitRule,
    pub penalty: PenaltySign,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Mhpa,
            lambda_h: 0.0,
            max_iters: 5000,
            tol: 1e-8,
            seed: 0,
            init: InitRule::Default,
            penalty: PenaltySign::Shrink,
        }
    }
}

impl FitConfig {
    pub fn new(variant: Variant, lambda_h: f64) -> Self {
        Self {
            variant,
            lambda_h,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(HawkesError::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.lambda_h >= 0.0 && self.lambda_h.is_finite()) {
            return Err(HawkesError::InvalidParameter(format!(
                "lambda_h must be finite and non-negative, got {}",
                self.lambda_h
            )));
        }
        if self.max_iters == 0 {
            return Err(HawkesError::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub variant: Variant,
    pub lambda_h: f64,
    pub params: MarkedParams,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub n_iters: usize,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    pub fn to_json(&self) -> FitReportJson {
        FitReportJson {
            variant: self.variant,
            lambda_h: self.lambda_h,
            mu: self.params.mu.clone(),
            k: matrix_rows(&self.params.k),
            alpha: matrix_rows(&self.params.alpha),
            beta: self.params.beta,
            season: self.params.season.values().to_vec(),
            converged: self.converged,
            n_iters: self.n_iters,
            final_objective: self.final_objective(),
        }
    }
}

/// Serialized form of a [`FitReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportJson {
    pub variant: Variant,
    pub lambda_h: f64,
    pub mu: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: f64,
    pub season: Vec<f64>,
    pub converged: bool,
    pub n_iters: usize,
    pub final_objective: f64,
}

impl FitReportJson {
    pub fn params(&self) -> Result<MarkedParams> {
        MarkedParams::try_from(&crate::params::MarkedParamsRepr {
            mu: self.mu.clone(),
            k: self.k.clone(),
            alpha: self.alpha.clone(),
            beta: self.beta,
            season: self.season.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Mu(usize),
    K(usize, usize),
    Alpha(usize, usize),
    Beta,
}

/// Maps the free entries of a parameter set to an unconstrained vector.
struct Layout {
    slots: Vec<Slot>,
    base: MarkedParams,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Layout {
    fn new(variant: Variant, base: MarkedParams) -> Self {
        let m = base.dims();
        let mut slots: Vec<Slot> = (0..m).map(Slot::Mu).collect();
        for j in 0..m {
            for l in 0..m {
                if variant.frees_k(l, j) {
                    slots.push(Slot::K(l, j));
                }
            }
        }
        if variant.frees_alpha() {
            for j in 0..m {
                for l in 0..m {
                    slots.push(Slot::Alpha(l, j));
                }
            }
        }
        if variant.frees_beta() {
            slots.push(Slot::Beta);
        }
        Self { slots, base }
    }

    fn encode(&self, p: &MarkedParams) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Mu(m) => p.mu[m].ln(),
                Slot::K(l, j) => p.k[(l, j)].ln(),
                Slot::Alpha(l, j) => p.alpha[(l, j)].ln(),
                Slot::Beta => (p.beta / (1.0 - p.beta)).ln(),
            })
            .collect()
    }

    /// `None` if the point maps outside the feasible region in floating point.
    fn decode(&self, x: &[f64]) -> Option<MarkedParams> {
        let mut p = self.base.clone();
        for (s, &v) in self.slots.iter().zip(x) {
            match *s {
                Slot::Mu(m) => p.mu[m] = v.exp(),
                Slot::K(l, j) => p.k[(l, j)] = v.exp(),
                Slot::Alpha(l, j) => p.alpha[(l, j)] = v.exp(),
                Slot::Beta => p.beta = sigmoid(v),
            }
        }
        let ok = p.mu.iter().all(|v| *v > 0.0 && v.is_finite())
            && p.k.iter().chain(p.alpha.iter()).all(|v| *v >= 0.0 && v.is_finite())
            && p.beta > 0.0
            && p.beta < 1.0;
        ok.then_some(p)
    }
}

struct Objective<'a> {
    series: &'a BinnedSeries,
    layout: Layout,
    lambda_h: f64,
    sign: PenaltySign,
}

impl Objective<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let p = self.layout.decode(x)?;
        loglik_regularized_with(&p, self.series, self.lambda_h, self.sign)
            .ok()
            .filter(|v| v.is_finite())
    }

    /// Chain rule from natural to unconstrained coordinates.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self
            .layout
            .decode(x)
            .ok_or_else(|| HawkesError::Numerical("iterate left the feasible region".into()))?;
        let g = grad_regularized(&p, self.series, self.lambda_h, self.sign)?;
        let out: Vec<f64> = self
            .layout
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Mu(m) => g.d_mu[m] * p.mu[m],
                Slot::K(l, j) => g.d_k[(l, j)] * p.k[(l, j)],
                Slot::Alpha(l, j) => g.d_alpha[(l, j)] * p.alpha[(l, j)],
                Slot::Beta => g.d_beta * p.beta * (1.0 - p.beta),
            })
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(HawkesError::Numerical("non-finite gradient".into()));
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Starting point for `variant` on `series`.
pub fn initial_params(series: &BinnedSeries, season: &SeasonalProfile, config: &FitConfig) -> Result<MarkedParams> {
    let m = series.dims();
    let season_mass = season.sum_over_bins(1, series.n_bins(), series.bin_minutes(), series.origin_hour());
    let mut mu = Vec::with_capacity(m);
    for d in 0..m {
        let count = series.dim_count(d);
        if count == 0 {
            return Err(HawkesError::InvalidSeries(format!("dimension {d} has no events to fit")));
        }
        mu.push(0.5 * count as f64 / season_mass);
    }
    let v = config.variant;
    let k = DMatrix::from_fn(m, m, |l, j| match (v.frees_k(l, j), l == j) {
        (false, _) => 0.0,
        (true, true) => 0.1,
        (true, false) => 0.01,
    });
    let alpha = DMatrix::from_element(m, m, if v.frees_alpha() { 0.01 } else { 0.0 });
    let mut p = MarkedParams::new(mu, k, alpha, 0.1, season.clone())?;
    if config.init == InitRule::Jittered {
        let mut stream = Stream::new(derive_seed(config.seed, 0x1417), 0, 0, Purpose::Count);
        let mut jitter = |x: &mut f64| *x *= 0.9 + 0.2 * stream.uniform();
        p.mu.iter_mut().for_each(&mut jitter);
        p.k.iter_mut().filter(|x| **x > 0.0).for_each(&mut jitter);
        p.alpha.iter_mut().filter(|x| **x > 0.0).for_each(&mut jitter);
        if v.frees_beta() {
            jitter(&mut p.beta);
        }
    }
    Ok(p)
}

/// Maximizes the penalized log-likelihood over the variant's free parameters.
///
/// The first trial step is 1; later iterations start from the
/// Barzilai–Borwein step `sᵀs / −sᵀy` when it is positive. A step is accepted
/// when it gains at least `1e-4 · step · |g|²`, halving up to 50 times.
pub fn fit(series: &BinnedSeries, season: &SeasonalProfile, config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    let init = initial_params(series, season, config)?;
    let obj = Objective {
        series,
        layout: Layout::new(config.variant, init.clone()),
        lambda_h: config.lambda_h,
        sign: config.penalty,
    };
    let mut x = obj.layout.encode(&init);
    let mut f = obj.value(&x).ok_or_else(|| {
        HawkesError::Numerical("objective is not finite at the initial parameters".into())
    })?;
    let mut g = obj.gradient(&x)?;
    let mut trace = vec![f];
    let mut converged = false;
    let mut n_iters = 0;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;

    while n_iters < config.max_iters {
        let gg = dot(&g, &g);
        if gg == 0.0 {
            converged = true;
            break;
        }
        let mut step = match &previous {
            Some((xp, gp)) => {
                let s: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy < 0.0 {
                    (dot(&s, &s) / -sy).clamp(1e-12, 1e12)
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let scale = f.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            // No step this short can move the objective by more than the tolerance.
            if step * gg < config.tol * scale {
                break;
            }
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            if let Some(ft) = obj.value(&trial) {
                if ft >= f + ARMIJO_C * step * gg {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= BACKTRACK;
        }
        let Some((x_new, f_new)) = accepted else {
            if step * gg < config.tol * scale {
                converged = true;
                break;
            }
            return Err(HawkesError::Optimizer(format!(
                "line search failed {MAX_BACKTRACKS} consecutive times at iteration {n_iters}"
            )));
        };
        assert!(f_new >= f, "objective decreased from {f} to {f_new}");
        let g_new = obj.gradient(&x_new)?;
        let rel = (f_new - f) / scale;
        previous = Some((std::mem::replace(&mut x, x_new), std::mem::replace(&mut g, g_new)));
        f = f_new;
        trace.push(f);
        n_iters += 1;
        if rel < config.tol {
            converged = true;
            break;
        }
    }

    let params = obj.layout.decode(&x).expect("accepted iterates are feasible");
    debug_assert!(params.validate().is_ok());
    Ok(FitReport {
        variant: config.variant,
        lambda_h: config.lambda_h,
        params,
        objective_trace: trace,
        converged,
        n_iters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPoint {
    pub lambda_h: f64,
    /// Predictive log-likelihood of the validation block, in nats.
    pub val_pll: f64,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    pub points: Vec<CvPoint>,
}

impl CvResult {
    pub fn best(&self) -> &CvPoint {
        self.points
            .iter()
            .find(|p| p.lambda_h == self.best_lambda)
            .expect("best lambda is on the grid")
    }
}

/// Fits on `train` once per grid value, scores `val` conditioned on `train`,
/// and keeps the best score; ties go to the larger `λ_h`.
pub fn cross_validate_lambda(
    train: &BinnedSeries,
    val: &BinnedSeries,
    season: &SeasonalProfile,
    grid: &[f64],
    config: &FitConfig,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(HawkesError::InvalidParameter("empty lambda_h grid".into()));
    }
    if let Some(v) = grid.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(HawkesError::InvalidParameter(format!("grid value {v} is not a non-negative number")));
    }
    let points: Vec<CvPoint> = grid
        .par_iter()
        .map(|&lambda_h| {
            let cfg = FitConfig { lambda_h, ..config.clone() };
            let report = fit(train, season, &cfg)?;
            let val_pll = predictive_loglik(&report.params, train, val)?.overall;
            Ok(CvPoint { lambda_h, val_pll, report })
        })
        .collect::<Result<_>>()?;
    let best = points
        .iter()
        .max_by(|a, b| {
            a.val_pll
                .total_cmp(&b.val_pll)
                .then(a.lambda_h.total_cmp(&b.lambda_h))
        })
        .expect("grid is non-empty");
    Ok(CvResult {
        best_lambda: best.lambda_h,
        points,
    })
}
