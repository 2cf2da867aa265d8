//! Poisson log-likelihood of the marked model and its ridge-penalized form.
//!
//! Three evaluators return the same number:
//! - [`loglik_naive`] sums `Y log λ − λ` over every bin and dimension;
//! - [`loglik_event_form`] keeps the log terms at event bins only and writes
//!   the summed intensity (the compensator) through geometric cumulative
//!   masses, with each `λ` still summed directly;
//! - [`loglik_recursive`] is the event form with `λ` from the recursion.
//!
//! The `log(y!)` constant is omitted throughout.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::intensity::{intensities_at_events, intensity_naive};
use crate::kernel::cdf_unchecked;
use crate::params::MarkedParams;
use crate::series::BinnedSeries;

/// Intensities below this are treated as zero when a logarithm is needed.
pub const MIN_LOG_INTENSITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikValue {
    pub value: f64,
    /// Bins (naive) or event bins (event forms) that contributed a term.
    pub n_terms: usize,
}

pub(crate) fn check_dims(params: &MarkedParams, series: &BinnedSeries) -> Result<()> {
    if params.dims() != series.dims() {
        return Err(HawkesError::InvalidParameter(format!(
            "parameters have {} dimensions, series has {}",
            params.dims(),
            series.dims()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn log_term(y: u32, lambda: f64, dim: usize, bin: usize) -> Result<f64> {
    if y == 0 {
        return Ok(0.0);
    }
    if !(lambda >= MIN_LOG_INTENSITY) || !lambda.is_finite() {
        return Err(HawkesError::VanishingIntensity {
            dim,
            bin,
            value: lambda,
        });
    }
    Ok(y as f64 * lambda.ln())
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(HawkesError::Numerical(format!("non-finite log-likelihood {v}")))
    }
}

/// Grid sum over all `N` bins. Cost `O(M · N · events)`.
pub fn loglik_naive(params: &MarkedParams, series: &BinnedSeries) -> Result<LogLikValue> {
    check_dims(params, series)?;
    let mut total = 0.0;
    for t in 1..=series.n_bins() {
        for m in 0..series.dims() {
            let lambda = intensity_naive(params, series, t, m)?;
            total += log_term(series.count_at(m, t), lambda, m, t)? - lambda;
        }
    }
    Ok(LogLikValue {
        value: finite(total)?,
        n_terms: series.n_bins(),
    })
}

/// `Σ_m Σ_t μ_m s(h(t)) + Σ_{l,m} K_{l,m} Σ_{τ_l} Y G(N−t) + Σ_{l,m} α_{l,m} Σ_{A_l} Y G(N−a)`.
pub fn compensator(params: &MarkedParams, series: &BinnedSeries) -> f64 {
    let n = series.n_bins();
    let season_sum = params
        .season
        .sum_over_bins(1, n, series.bin_minutes(), series.origin_hour());
    let mut total: f64 = params.mu.iter().sum::<f64>() * season_sum;
    for l in 0..series.dims() {
        let mut mass = 0.0;
        let mut alarm_mass = 0.0;
        for ev in series.events(l) {
            let g = ev.count as f64 * cdf_unchecked(params.beta, (n - ev.bin) as i64);
            mass += g;
            if ev.alarm {
                alarm_mass += g;
            }
        }
        let k_row: f64 = params.k.row(l).sum();
        let a_row: f64 = params.alpha.row(l).sum();
        total += k_row * mass + a_row * alarm_mass;
    }
    total
}

fn event_count_terms(series: &BinnedSeries) -> usize {
    series.timeline().len()
}

/// Event form with every `λ` evaluated by direct summation. Cost `O(M · events²)`.
pub fn loglik_event_form(params: &MarkedParams, series: &BinnedSeries) -> Result<LogLikValue> {
    check_dims(params, series)?;
    let mut total = 0.0;
    for m in 0..series.dims() {
        for ev in series.events(m) {
            let lambda = intensity_naive(params, series, ev.bin, m)?;
            total += log_term(ev.count, lambda, m, ev.bin)?;
        }
    }
    total -= compensator(params, series);
    Ok(LogLikValue {
        value: finite(total)?,
        n_terms: event_count_terms(series),
    })
}

/// Event form with `λ` from one recursive pass. Cost `O(M² · event bins)`.
pub fn loglik_recursive(params: &MarkedParams, series: &BinnedSeries) -> Result<LogLikValue> {
    check_dims(params, series)?;
    let lambdas = intensities_at_events(params, series);
    let mut total = 0.0;
    for m in 0..series.dims() {
        for (ev, &lambda) in series.events(m).iter().zip(&lambdas.per_dim[m]) {
            total += log_term(ev.count, lambda, m, ev.bin)?;
        }
    }
    total -= compensator(params, series);
    Ok(LogLikValue {
        value: finite(total)?,
        n_terms: event_count_terms(series),
    })
}

/// Ridge penalty `P(K, α) = Σ_{l≠m} K²_{l,m} + Σ_{l,m} α²_{l,m}`.
pub fn ridge_penalty(params: &MarkedParams) -> f64 {
    params.ridge_penalty()
}

/// How the ridge penalty enters the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltySign {
    /// `log L − λ_h P`: shrinks `P` under maximization.
    #[default]
    Shrink,
    /// `log L + λ_h P`: rewards a larger `P`.
    Additive,
}

impl PenaltySign {
    pub fn factor(self) -> f64 {
        match self {
            Self::Shrink => -1.0,
            Self::Additive => 1.0,
        }
    }
}

fn check_lambda_h(lambda_h: f64) -> Result<()> {
    if lambda_h >= 0.0 && lambda_h.is_finite() {
        Ok(())
    } else {
        Err(HawkesError::InvalidParameter(format!(
            "lambda_h must be a finite non-negative number, got {lambda_h}"
        )))
    }
}

/// `log L − λ_h P(K, α)`.
pub fn loglik_regularized(params: &MarkedParams, series: &BinnedSeries, lambda_h: f64) -> Result<f64> {
    loglik_regularized_with(params, series, lambda_h, PenaltySign::Shrink)
}

pub fn loglik_regularized_with(
    params: &MarkedParams,
    series: &BinnedSeries,
    lambda_h: f64,
    sign: PenaltySign,
) -> Result<f64> {
    check_lambda_h(lambda_h)?;
    let ll = loglik_recursive(params, series)?.value;
    if lambda_h == 0.0 {
        return Ok(ll);
    }
    Ok(ll + sign.factor() * lambda_h * params.ridge_penalty())
}
