//! Gradient of the log-likelihood with respect to `(μ, K, α, β)`.
//!
//! The β-derivative of the kernel is `∂g/∂β = (1−β)^(Δ−2)(1−βΔ)`, which the
//! recursive form carries as two running sums per source dimension:
//! `R¹ = Σ Y(1−β)^(Δ−2)` and `R² = Σ Y(1−β)^(Δ−2) βΔ`, so that
//! `Σ Y ∂g/∂β = R¹ − R²`. Over a gap of `Δ` bins they update as
//!
//! ```text
//! R¹ ← (1−β)^Δ R¹ + Y (1−β)^(Δ−2)
//! R² ← (1−β)^Δ R² + βΔ R¹          (R¹ already updated)
//! ```
//!
//! At adjacent bins `(1−β)^(−1)` appears; it is evaluated as the real power.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::kernel::{cdf_dbeta, cdf_unchecked, decay};
use crate::likelihood::{check_dims, log_term, loglik_recursive, PenaltySign};
use crate::params::MarkedParams;
use crate::series::BinnedSeries;

/// `∂ log L / ∂θ`, component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVector {
    pub d_mu: Vec<f64>,
    pub d_k: DMatrix<f64>,
    pub d_alpha: DMatrix<f64>,
    pub d_beta: f64,
}

impl GradVector {
    pub fn zeros(dims: usize) -> Self {
        Self {
            d_mu: vec![0.0; dims],
            d_k: DMatrix::zeros(dims, dims),
            d_alpha: DMatrix::zeros(dims, dims),
            d_beta: 0.0,
        }
    }

    /// Components in the order `μ, K (column-major), α (column-major), β`.
    pub fn flatten(&self) -> Vec<f64> {
        self.d_mu
            .iter()
            .chain(self.d_k.iter())
            .chain(self.d_alpha.iter())
            .copied()
            .chain(std::iter::once(self.d_beta))
            .collect()
    }

    /// Adds `sign · λ_h ∇P`, where `∇P` is `2K` off the diagonal and `2α` everywhere.
    pub fn add_penalty(&mut self, params: &MarkedParams, lambda_h: f64, sign: PenaltySign) {
        let f = sign.factor() * lambda_h;
        let m = params.dims();
        for l in 0..m {
            for j in 0..m {
                if l != j {
                    self.d_k[(l, j)] += f * 2.0 * params.k[(l, j)];
                }
                self.d_alpha[(l, j)] += f * 2.0 * params.alpha[(l, j)];
            }
        }
    }

    fn finish_compensator(&mut self, params: &MarkedParams, series: &BinnedSeries) {
        let n = series.n_bins();
        let beta = params.beta;
        let season_sum = params
            .season
            .sum_over_bins(1, n, series.bin_minutes(), series.origin_hour());
        for d in &mut self.d_mu {
            *d -= season_sum;
        }
        for l in 0..series.dims() {
            let (mut mass, mut alarm_mass, mut dmass, mut alarm_dmass) = (0.0, 0.0, 0.0, 0.0);
            for ev in series.events(l) {
                let y = ev.count as f64;
                let rest = (n - ev.bin) as i64;
                let g = y * cdf_unchecked(beta, rest);
                let dg = y * cdf_dbeta(beta, rest);
                mass += g;
                dmass += dg;
                if ev.alarm {
                    alarm_mass += g;
                    alarm_dmass += dg;
                }
            }
            for m in 0..series.dims() {
                self.d_k[(l, m)] -= mass;
                self.d_alpha[(l, m)] -= alarm_mass;
            }
            self.d_beta -= params.k.row(l).sum() * dmass + params.alpha.row(l).sum() * alarm_dmass;
        }
    }
}

/// Exact partials by direct summation over all earlier events.
pub fn grad_naive(params: &MarkedParams, series: &BinnedSeries) -> Result<GradVector> {
    check_dims(params, series)?;
    let dims = series.dims();
    let beta = params.beta;
    let mut g = GradVector::zeros(dims);
    for m in 0..dims {
        for ev in series.events(m) {
            let t = ev.bin;
            let mut s = vec![0.0; dims];
            let mut s_alarm = vec![0.0; dims];
            let mut ds = vec![0.0; dims];
            let mut ds_alarm = vec![0.0; dims];
            for l in 0..dims {
                for src in series.events(l).iter().take_while(|e| e.bin < t) {
                    let lag = (t - src.bin) as i64;
                    let y = src.count as f64;
                    let kern = beta * decay(beta, lag - 1);
                    let dkern = decay(beta, lag - 2) * (1.0 - beta * lag as f64);
                    s[l] += y * kern;
                    ds[l] += y * dkern;
                    if src.alarm {
                        s_alarm[l] += y * kern;
                        ds_alarm[l] += y * dkern;
                    }
                }
            }
            let seasonal = params.season.at_bin(t, series.bin_minutes(), series.origin_hour());
            let lambda = params.mu[m] * seasonal
                + (0..dims)
                    .map(|l| params.k[(l, m)] * s[l] + params.alpha[(l, m)] * s_alarm[l])
                    .sum::<f64>();
            log_term(ev.count, lambda, m, t)?;
            let w = ev.count as f64 / lambda;
            g.d_mu[m] += w * seasonal;
            for l in 0..dims {
                g.d_k[(l, m)] += w * s[l];
                g.d_alpha[(l, m)] += w * s_alarm[l];
                g.d_beta += w * (params.k[(l, m)] * ds[l] + params.alpha[(l, m)] * ds_alarm[l]);
            }
        }
    }
    g.finish_compensator(params, series);
    Ok(g)
}

/// Running sums for the β-gradient, alongside `R` and `R_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradRecursionState {
    pub r: Vec<f64>,
    pub r_alarm: Vec<f64>,
    pub r1: Vec<f64>,
    pub r1_alarm: Vec<f64>,
    pub r2: Vec<f64>,
    pub r2_alarm: Vec<f64>,
    pub cursor: usize,
}

impl GradRecursionState {
    pub fn new(dims: usize, cursor: usize) -> Self {
        Self {
            r: vec![0.0; dims],
            r_alarm: vec![0.0; dims],
            r1: vec![0.0; dims],
            r1_alarm: vec![0.0; dims],
            r2: vec![0.0; dims],
            r2_alarm: vec![0.0; dims],
            cursor,
        }
    }

    /// Moves to `to_bin`, folding in `counts`/`alarms` observed at the cursor.
    pub fn advance(&mut self, to_bin: usize, counts: &[u32], alarms: &[bool], beta: f64) {
        debug_assert!(to_bin > self.cursor);
        let gap = (to_bin - self.cursor) as i64;
        let carry = decay(beta, gap);
        let fresh = beta * decay(beta, gap - 1);
        let fresh1 = decay(beta, gap - 2);
        let slope = beta * gap as f64;
        for l in 0..self.r.len() {
            let y = counts[l] as f64;
            let ya = if alarms[l] { y } else { 0.0 };
            self.r[l] = carry * self.r[l] + y * fresh;
            self.r_alarm[l] = carry * self.r_alarm[l] + ya * fresh;
            self.r1[l] = carry * self.r1[l] + y * fresh1;
            self.r1_alarm[l] = carry * self.r1_alarm[l] + ya * fresh1;
            self.r2[l] = carry * self.r2[l] + slope * self.r1[l];
            self.r2_alarm[l] = carry * self.r2_alarm[l] + slope * self.r1_alarm[l];
        }
        self.cursor = to_bin;
    }
}

/// Gradient in one pass over the merged event timeline. Cost `O(M² · event bins)`.
pub fn grad_recursive(params: &MarkedParams, series: &BinnedSeries) -> Result<GradVector> {
    check_dims(params, series)?;
    let dims = series.dims();
    let mut g = GradVector::zeros(dims);
    let timeline = series.timeline();
    if let Some(first) = timeline.first() {
        let mut st = GradRecursionState::new(dims, first.bin);
        let mut counts = vec![0u32; dims];
        let mut alarms = vec![false; dims];
        for (i, mb) in timeline.iter().enumerate() {
            if i > 0 {
                st.advance(mb.bin, &counts, &alarms, params.beta);
                counts.iter_mut().for_each(|c| *c = 0);
                alarms.iter_mut().for_each(|a| *a = false);
            }
            for h in &mb.hits {
                let m = h.dim;
                let seasonal = params.season.at_bin(mb.bin, series.bin_minutes(), series.origin_hour());
                let mut lambda = params.mu[m] * seasonal;
                let mut dlambda_dbeta = 0.0;
                for l in 0..dims {
                    let (k, a) = (params.k[(l, m)], params.alpha[(l, m)]);
                    lambda += k * st.r[l] + a * st.r_alarm[l];
                    dlambda_dbeta += k * (st.r1[l] - st.r2[l]) + a * (st.r1_alarm[l] - st.r2_alarm[l]);
                }
                log_term(h.count, lambda, m, mb.bin)?;
                let w = h.count as f64 / lambda;
                g.d_mu[m] += w * seasonal;
                for l in 0..dims {
                    g.d_k[(l, m)] += w * st.r[l];
                    g.d_alpha[(l, m)] += w * st.r_alarm[l];
                }
                g.d_beta += w * dlambda_dbeta;
            }
            for h in &mb.hits {
                counts[h.dim] = h.count;
                alarms[h.dim] = h.alarm;
            }
        }
    }
    g.finish_compensator(params, series);
    Ok(g)
}

/// Gradient of `log L + sign·λ_h P`.
pub fn grad_regularized(
    params: &MarkedParams,
    series: &BinnedSeries,
    lambda_h: f64,
    sign: PenaltySign,
) -> Result<GradVector> {
    let mut g = grad_recursive(params, series)?;
    g.add_penalty(params, lambda_h, sign);
    Ok(g)
}

/// Largest `|analytic − central difference| / (|analytic| + 1e-12)` over all
/// components, differencing [`loglik_recursive`] with absolute step `step`.
pub fn check_gradient(params: &MarkedParams, series: &BinnedSeries, step: f64) -> Result<f64> {
    let analytic = grad_recursive(params, series)?.flatten();
    let numeric = central_differences(params, step, |p| Ok(loglik_recursive(p, series)?.value))?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + 1e-12))
        .fold(0.0, f64::max))
}

/// Central differences of `f` in the same component order as [`GradVector::flatten`].
pub fn central_differences<F>(params: &MarkedParams, step: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&MarkedParams) -> Result<f64>,
{
    let dims = params.dims();
    let mut out = Vec::with_capacity(dims + 2 * dims * dims + 1);
    let diff = |bump: &dyn Fn(&mut MarkedParams, f64)| -> Result<f64> {
        let mut up = params.clone();
        bump(&mut up, step);
        let mut down = params.clone();
        bump(&mut down, -step);
        Ok((f(&up)? - f(&down)?) / (2.0 * step))
    };
    for m in 0..dims {
        out.push(diff(&|p, h| p.mu[m] += h)?);
    }
    for i in 0..dims * dims {
        out.push(diff(&|p, h| p.k[i] += h)?);
    }
    for i in 0..dims * dims {
        out.push(diff(&|p, h| p.alpha[i] += h)?);
    }
    out.push(diff(&|p, h| p.beta += h)?);
    Ok(out)
}
