//! Unmarked multivariate model with a separate geometric decay per pair.
//!
//! `λ_m(t) = μ_m + Σ_l K_{l,m} Σ_{t_i < t} Y_l(t_i) β_{l,m}(1−β_{l,m})^(t−t_i−1)`
//!
//! The background is constant and there are no alarm marks. Because decay
//! differs per pair, the recursive state holds one entry per `(l, m)`.

use nalgebra::DMatrix;

use crate::error::{HawkesError, Result};
use crate::kernel::{cdf_dbeta, cdf_unchecked, decay};
use crate::likelihood::{log_term, LogLikValue};
use crate::params::UnmarkedParams;
use crate::rng::{Purpose, Stream};
use crate::series::{BinnedSeries, Event, Hit};
use crate::simulator::COUNT_CAP;

use rand_distr::{Distribution, Poisson};

fn check(params: &UnmarkedParams, series: &BinnedSeries) -> Result<()> {
    if params.dims() != series.dims() {
        return Err(HawkesError::InvalidParameter(format!(
            "parameters have {} dimensions, series has {}",
            params.dims(),
            series.dims()
        )));
    }
    Ok(())
}

/// Per-pair excitation state; entry `(l, m)` sits at `l · M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    dims: usize,
    r: Vec<f64>,
    r1: Vec<f64>,
    r2: Vec<f64>,
    cursor: usize,
}

impl PairState {
    pub fn new(dims: usize, cursor: usize) -> Self {
        Self {
            dims,
            r: vec![0.0; dims * dims],
            r1: vec![0.0; dims * dims],
            r2: vec![0.0; dims * dims],
            cursor,
        }
    }

    /// Number of excitation entries, `M²`.
    pub fn n_entries(&self) -> usize {
        self.r.len()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Decayed mass from `l` as seen by `m`.
    pub fn get(&self, l: usize, m: usize) -> f64 {
        self.r[l * self.dims + m]
    }

    /// Moves to `to_bin`, folding in `counts` observed at the cursor. With
    /// `with_grad` the β-gradient companions are carried as well.
    fn advance(&mut self, to_bin: usize, counts: &[u32], b: &DMatrix<f64>, with_grad: bool) {
        debug_assert!(to_bin > self.cursor);
        let gap = (to_bin - self.cursor) as i64;
        let d = self.dims;
        for l in 0..d {
            let y = counts[l] as f64;
            for m in 0..d {
                let beta = b[(l, m)];
                let i = l * d + m;
                let carry = decay(beta, gap);
                let fresh = beta * decay(beta, gap - 1);
                self.r[i] = carry * self.r[i] + y * fresh;
                if with_grad {
                    self.r1[i] = carry * self.r1[i] + y * decay(beta, gap - 2);
                    self.r2[i] = carry * self.r2[i] + beta * gap as f64 * self.r1[i];
                }
            }
        }
        self.cursor = to_bin;
    }

    fn excitation(&self, params: &UnmarkedParams, m: usize) -> f64 {
        let mut e = 0.0;
        for l in 0..self.dims {
            e += params.k[(l, m)] * self.r[l * self.dims + m];
        }
        e
    }
}

fn dense_counts(dims: usize, hits: &[Hit]) -> Vec<u32> {
    let mut c = vec![0u32; dims];
    for h in hits {
        c[h.dim] = h.count;
    }
    c
}

/// Direct sum over all earlier events.
pub fn u_intensity_naive(params: &UnmarkedParams, series: &BinnedSeries, t: usize, m: usize) -> Result<f64> {
    check(params, series)?;
    if t < 1 || t > series.n_bins() || m >= series.dims() {
        return Err(HawkesError::OutOfRange(format!("(bin {t}, dimension {m})")));
    }
    Ok(intensity_direct(params, series.all_events(), t, m))
}

fn intensity_direct(params: &UnmarkedParams, events: &[Vec<Event>], t: usize, m: usize) -> f64 {
    let mut excitation = 0.0;
    for (l, list) in events.iter().enumerate() {
        let beta = params.b[(l, m)];
        let mut r = 0.0;
        for ev in list.iter().take_while(|e| e.bin < t) {
            r += ev.count as f64 * beta * decay(beta, (t - ev.bin - 1) as i64);
        }
        excitation += params.k[(l, m)] * r;
    }
    params.mu[m] + excitation
}

/// Grid sum of `Y log λ − λ` over every bin.
pub fn u_loglik_naive(params: &UnmarkedParams, series: &BinnedSeries) -> Result<LogLikValue> {
    check(params, series)?;
    let mut total = 0.0;
    for t in 1..=series.n_bins() {
        for m in 0..series.dims() {
            let lambda = intensity_direct(params, series.all_events(), t, m);
            total += log_term(series.count_at(m, t), lambda, m, t)? - lambda;
        }
    }
    Ok(LogLikValue {
        value: total,
        n_terms: series.n_bins(),
    })
}

/// `N Σ_m μ_m + Σ_{l,m} K_{l,m} Σ_{τ_l} Y G_{l,m}(N−t)`.
pub fn u_compensator(params: &UnmarkedParams, series: &BinnedSeries) -> f64 {
    let n = series.n_bins();
    let mut total = n as f64 * params.mu.iter().sum::<f64>();
    for l in 0..series.dims() {
        for m in 0..series.dims() {
            let beta = params.b[(l, m)];
            let mass: f64 = series
                .events(l)
                .iter()
                .map(|e| e.count as f64 * cdf_unchecked(beta, (n - e.bin) as i64))
                .sum();
            total += params.k[(l, m)] * mass;
        }
    }
    total
}

/// Log terms at event bins by direct summation, minus the compensator.
pub fn u_loglik_event_form(params: &UnmarkedParams, series: &BinnedSeries) -> Result<LogLikValue> {
    check(params, series)?;
    let mut total = 0.0;
    for m in 0..series.dims() {
        for ev in series.events(m) {
            let lambda = intensity_direct(params, series.all_events(), ev.bin, m);
            total += log_term(ev.count, lambda, m, ev.bin)?;
        }
    }
    Ok(LogLikValue {
        value: total - u_compensator(params, series),
        n_terms: series.timeline().len(),
    })
}

/// Visits every merged event bin with the per-pair state at that bin.
fn walk<F>(params: &UnmarkedParams, series: &BinnedSeries, with_grad: bool, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &[Hit], &PairState) -> Result<()>,
{
    let timeline = series.timeline();
    let Some(first) = timeline.first() else {
        return Ok(());
    };
    let mut st = PairState::new(series.dims(), first.bin);
    let mut prev: Option<&[Hit]> = None;
    for mb in timeline {
        if let Some(hits) = prev {
            st.advance(mb.bin, &dense_counts(series.dims(), hits), &params.b, with_grad);
        }
        visit(mb.bin, &mb.hits, &st)?;
        prev = Some(&mb.hits);
    }
    Ok(())
}

/// Event form with intensities from the per-pair recursion.
pub fn u_loglik(params: &UnmarkedParams, series: &BinnedSeries) -> Result<LogLikValue> {
    check(params, series)?;
    let mut total = 0.0;
    walk(params, series, false, |bin, hits, st| {
        for h in hits {
            let lambda = params.mu[h.dim] + st.excitation(params, h.dim);
            total += log_term(h.count, lambda, h.dim, bin)?;
        }
        Ok(())
    })?;
    Ok(LogLikValue {
        value: total - u_compensator(params, series),
        n_terms: series.timeline().len(),
    })
}

/// `∂ log L / ∂(μ, K, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UGradVector {
    pub d_mu: Vec<f64>,
    pub d_k: DMatrix<f64>,
    pub d_b: DMatrix<f64>,
}

impl UGradVector {
    fn zeros(d: usize) -> Self {
        Self {
            d_mu: vec![0.0; d],
            d_k: DMatrix::zeros(d, d),
            d_b: DMatrix::zeros(d, d),
        }
    }

    /// Components in the order `μ, K (column-major), B (column-major)`.
    pub fn flatten(&self) -> Vec<f64> {
        self.d_mu
            .iter()
            .chain(self.d_k.iter())
            .chain(self.d_b.iter())
            .copied()
            .collect()
    }

    fn finish_compensator(&mut self, params: &UnmarkedParams, series: &BinnedSeries) {
        let n = series.n_bins();
        for d in &mut self.d_mu {
            *d -= n as f64;
        }
        for l in 0..series.dims() {
            for m in 0..series.dims() {
                let beta = params.b[(l, m)];
                let (mut mass, mut dmass) = (0.0, 0.0);
                for e in series.events(l) {
                    let rest = (n - e.bin) as i64;
                    mass += e.count as f64 * cdf_unchecked(beta, rest);
                    dmass += e.count as f64 * cdf_dbeta(beta, rest);
                }
                self.d_k[(l, m)] -= mass;
                self.d_b[(l, m)] -= params.k[(l, m)] * dmass;
            }
        }
    }
}

/// Exact partials by direct summation.
pub fn u_grad_naive(params: &UnmarkedParams, series: &BinnedSeries) -> Result<UGradVector> {
    check(params, series)?;
    let d = series.dims();
    let mut g = UGradVector::zeros(d);
    for m in 0..d {
        for ev in series.events(m) {
            let t = ev.bin;
            let mut s = vec![0.0; d];
            let mut ds = vec![0.0; d];
            for l in 0..d {
                let beta = params.b[(l, m)];
                for src in series.events(l).iter().take_while(|e| e.bin < t) {
                    let lag = (t - src.bin) as i64;
                    let y = src.count as f64;
                    s[l] += y * beta * decay(beta, lag - 1);
                    ds[l] += y * decay(beta, lag - 2) * (1.0 - beta * lag as f64);
                }
            }
            let lambda = params.mu[m] + (0..d).map(|l| params.k[(l, m)] * s[l]).sum::<f64>();
            log_term(ev.count, lambda, m, t)?;
            let w = ev.count as f64 / lambda;
            g.d_mu[m] += w;
            for l in 0..d {
                g.d_k[(l, m)] += w * s[l];
                g.d_b[(l, m)] += w * params.k[(l, m)] * ds[l];
            }
        }
    }
    g.finish_compensator(params, series);
    Ok(g)
}

/// Gradient in one pass over the merged timeline with per-pair companions.
pub fn u_grad(params: &UnmarkedParams, series: &BinnedSeries) -> Result<UGradVector> {
    check(params, series)?;
    let d = series.dims();
    let mut g = UGradVector::zeros(d);
    walk(params, series, true, |bin, hits, st| {
        for h in hits {
            let m = h.dim;
            let lambda = params.mu[m] + st.excitation(params, m);
            log_term(h.count, lambda, m, bin)?;
            let w = h.count as f64 / lambda;
            g.d_mu[m] += w;
            for l in 0..d {
                let i = l * d + m;
                g.d_k[(l, m)] += w * st.r[i];
                g.d_b[(l, m)] += w * params.k[(l, m)] * (st.r1[i] - st.r2[i]);
            }
        }
        Ok(())
    })?;
    g.finish_compensator(params, series);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimMode {
    Naive,
    #[default]
    Recursive,
}

impl std::str::FromStr for SimMode {
    type Err = HawkesError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "recursive" => Ok(Self::Recursive),
            _ => Err(HawkesError::InvalidParameter(format!("unknown simulation mode `{s}`"))),
        }
    }
}

fn draw_count(seed: u64, bin: usize, dim: usize, lambda: f64) -> Result<u32> {
    if !(lambda <= COUNT_CAP) {
        return Err(HawkesError::Explosive { bin, intensity: lambda });
    }
    if lambda <= 0.0 {
        return Ok(0);
    }
    let mut stream = Stream::new(seed, bin as u64, dim as u32, Purpose::Count);
    let y = Poisson::new(lambda)
        .map_err(|e| HawkesError::Numerical(format!("{e}")))?
        .sample(&mut stream);
    if y > COUNT_CAP {
        return Err(HawkesError::Explosive { bin, intensity: lambda });
    }
    Ok(y as u32)
}

/// Simulates `n_bins` bins on a 5-minute grid from midnight (the grid only
/// labels the output; the model has no seasonality). Counts use the same
/// substreams as the marked simulator, so a tied parameter set reproduces
/// its output exactly.
pub fn u_simulate(params: &UnmarkedParams, n_bins: usize, seed: u64, mode: SimMode) -> Result<BinnedSeries> {
    params.validate()?;
    let d = params.dims();
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); d];
    let mut state = PairState::new(d, 1);
    let mut counts = vec![0u32; d];
    for t in 1..=n_bins {
        if mode == SimMode::Recursive && t > 1 {
            state.advance(t, &counts, &params.b, false);
        }
        for (m, c) in counts.iter_mut().enumerate() {
            let lambda = match mode {
                SimMode::Naive => intensity_direct(params, &events, t, m),
                SimMode::Recursive => params.mu[m] + state.excitation(params, m),
            };
            *c = draw_count(seed, t, m, lambda)?;
        }
        for (m, &c) in counts.iter().enumerate() {
            if c > 0 {
                events[m].push(Event::new(t, c, false));
            }
        }
    }
    BinnedSeries::new(d, n_bins, 5, 0, events)
}
