//! Held-out evaluation: predictive log-likelihood, triggering attribution,
//! interarrival self-consistency and count forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::error::{HawkesError, Result};
use crate::intensity::{decompositions_at_events, IntensityDecomposition, RecursionState};
use crate::likelihood::{check_dims, loglik_recursive, MIN_LOG_INTENSITY};
use crate::params::MarkedParams;
use crate::rng::{derive_seed, Purpose, Stream};
use crate::series::BinnedSeries;
use crate::simulator::{simulate_recursive, SimConfig};

/// Log-probability of held-out bins, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveScore {
    pub per_ward: Vec<f64>,
    pub overall: f64,
    pub n_test_bins: usize,
}

fn log_poisson(y: u32, lambda: f64, dim: usize, bin: usize) -> Result<f64> {
    if y == 0 {
        return Ok(-lambda);
    }
    if !(lambda >= MIN_LOG_INTENSITY) {
        return Err(HawkesError::VanishingIntensity { dim, bin, value: lambda });
    }
    Ok(y as f64 * lambda.ln() - lambda - ln_factorial(y as u64))
}

/// Scores `test` bin by bin with every intensity conditioned on the full
/// history and on all earlier test bins. Includes the `−log(y!)` term.
pub fn predictive_loglik(params: &MarkedParams, history: &BinnedSeries, test: &BinnedSeries) -> Result<PredictiveScore> {
    check_dims(params, history)?;
    history.check_follows(test)?;
    let dims = test.dims();
    let mut per_ward = vec![0.0; dims];
    let offset = history.n_bins();
    let mut state = RecursionState::from_history(history, params.beta, offset + 1);
    let mut counts = vec![0u32; dims];
    let mut alarms = vec![false; dims];
    let mut next_hit = test.timeline().iter().peekable();
    for t in 1..=test.n_bins() {
        if t > 1 {
            state.advance(offset + t, &counts, &alarms, params.beta)?;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        alarms.iter_mut().for_each(|a| *a = false);
        if let Some(mb) = next_hit.next_if(|mb| mb.bin == t) {
            for h in &mb.hits {
                counts[h.dim] = h.count;
                alarms[h.dim] = h.alarm;
            }
        }
        let seasonal = params.season.at_bin(t, test.bin_minutes(), test.origin_hour());
        for m in 0..dims {
            let lambda = params.mu[m] * seasonal + state.excitation(params, m);
            per_ward[m] += log_poisson(counts[m], lambda, m, t)?;
        }
    }
    Ok(PredictiveScore {
        overall: per_ward.iter().sum(),
        per_ward,
        n_test_bins: test.n_bins(),
    })
}

/// Log-likelihood including the `−log(y!)` terms, i.e. the log-probability
/// of the whole series.
pub fn log_probability(params: &MarkedParams, series: &BinnedSeries) -> Result<f64> {
    let ll = loglik_recursive(params, series)?.value;
    let factorials: f64 = series
        .all_events()
        .iter()
        .flatten()
        .map(|e| ln_factorial(e.count as u64))
        .sum();
    Ok(ll - factorials)
}

/// Attribution of one event bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAttribution {
    pub bin: usize,
    pub ward: usize,
    pub count: u32,
    pub shares: IntensityDecomposition,
}

/// Count-weighted average probability that an event was caused by the
/// background, by non-alarm excitation, or by alarm excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeringReport {
    pub avg_background: f64,
    pub avg_nonalarm: f64,
    pub avg_alarm: f64,
    pub avg_nonalarm_self: f64,
    pub avg_nonalarm_cross: f64,
    pub avg_alarm_self: f64,
    pub avg_alarm_cross: f64,
    pub total_count: u64,
    /// Per event bin, in time order (ties by ward).
    pub per_event: Vec<EventAttribution>,
}

pub fn triggering_report(params: &MarkedParams, series: &BinnedSeries) -> Result<TriggeringReport> {
    check_dims(params, series)?;
    if series.total_count() == 0 {
        return Err(HawkesError::InvalidSeries("triggering report needs at least one event".into()));
    }
    let decomps = decompositions_at_events(params, series);
    let mut cursor = vec![0usize; series.dims()];
    let mut per_event = Vec::new();
    let mut acc = IntensityDecomposition::default();
    for mb in series.timeline() {
        for h in &mb.hits {
            let d = decomps[h.dim][cursor[h.dim]];
            cursor[h.dim] += 1;
            let total = d.total();
            if !(total >= MIN_LOG_INTENSITY) {
                return Err(HawkesError::VanishingIntensity { dim: h.dim, bin: mb.bin, value: total });
            }
            let shares = d.shares();
            let w = h.count as f64;
            acc.background += w * shares.background;
            acc.nonalarm_self += w * shares.nonalarm_self;
            acc.nonalarm_cross += w * shares.nonalarm_cross;
            acc.alarm_self += w * shares.alarm_self;
            acc.alarm_cross += w * shares.alarm_cross;
            per_event.push(EventAttribution {
                bin: mb.bin,
                ward: h.dim,
                count: h.count,
                shares,
            });
        }
    }
    let n = series.total_count();
    let scale = 1.0 / n as f64;
    let (ns, nc, als, alc) = (
        acc.nonalarm_self * scale,
        acc.nonalarm_cross * scale,
        acc.alarm_self * scale,
        acc.alarm_cross * scale,
    );
    Ok(TriggeringReport {
        avg_background: acc.background * scale,
        avg_nonalarm: ns + nc,
        avg_alarm: als + alc,
        avg_nonalarm_self: ns,
        avg_nonalarm_cross: nc,
        avg_alarm_self: als,
        avg_alarm_cross: alc,
        total_count: n,
        per_event,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalConfig {
    /// Simulated replicates per test event.
    pub n_sims: usize,
    /// Bucket width in hours.
    pub bin_hours: f64,
    /// Regular buckets before the open-ended last one.
    pub n_buckets: usize,
    /// Give up after this many bins without an arrival; `None` means 30 days.
    pub horizon_bins: Option<usize>,
    pub seed: u64,
}

impl Default for InterarrivalConfig {
    fn default() -> Self {
        Self {
            n_sims: 10,
            bin_hours: 4.0,
            n_buckets: 6,
            horizon_bins: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalBucket {
    pub lower_hours: f64,
    /// `None` for the open-ended last bucket.
    pub upper_hours: Option<f64>,
    pub observed: f64,
    pub sim_mean: f64,
    pub sim_sd: f64,
}

impl InterarrivalBucket {
    pub fn band(&self) -> (f64, f64) {
        (self.sim_mean - 2.0 * self.sim_sd, self.sim_mean + 2.0 * self.sim_sd)
    }

    pub fn observed_in_band(&self) -> bool {
        let (lo, hi) = self.band();
        self.observed >= lo && self.observed <= hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalReport {
    pub buckets: Vec<InterarrivalBucket>,
    pub n_intervals: usize,
    pub n_sims: usize,
}

impl InterarrivalReport {
    pub fn buckets_in_band(&self) -> usize {
        self.buckets.iter().filter(|b| b.observed_in_band()).count()
    }
}

fn bucket_of(gap_bins: usize, bin_minutes: u32, cfg: &InterarrivalConfig) -> usize {
    let hours = gap_bins as f64 * bin_minutes as f64 / 60.0;
    ((hours / cfg.bin_hours).floor() as usize).min(cfg.n_buckets)
}

fn proportions(gaps: &[usize], bin_minutes: u32, cfg: &InterarrivalConfig) -> Vec<f64> {
    let mut hist = vec![0.0; cfg.n_buckets + 1];
    for &g in gaps {
        hist[bucket_of(g, bin_minutes, cfg)] += 1.0;
    }
    let n = gaps.len().max(1) as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    hist
}

/// Compares observed gaps between consecutive test event bins (pooled over
/// wards) with simulated time to the next arrival.
///
/// For each test event bin that has a successor, the model is conditioned on
/// everything up to and including that bin and run forward until any ward
/// records an event. Before the first arrival no new events enter the state,
/// so each step only needs `P(arrival) = 1 − exp(−Σ_m λ_m)`.
pub fn interarrival_check(
    params: &MarkedParams,
    history: &BinnedSeries,
    test: &BinnedSeries,
    cfg: &InterarrivalConfig,
) -> Result<InterarrivalReport> {
    check_dims(params, history)?;
    history.check_follows(test)?;
    if cfg.n_sims < 2 {
        return Err(HawkesError::InvalidParameter("interarrival check needs n_sims ≥ 2".into()));
    }
    if !(cfg.bin_hours > 0.0) || cfg.n_buckets == 0 {
        return Err(HawkesError::InvalidParameter("bucket width and count must be positive".into()));
    }
    let bm = test.bin_minutes();
    let horizon = cfg
        .horizon_bins
        .unwrap_or((30 * 24 * 60 / bm as usize).max(1));
    let offset = history.n_bins();
    let timeline = test.timeline();
    let observed: Vec<usize> = timeline.windows(2).map(|w| w[1].bin - w[0].bin).collect();

    // State just after each starting event bin, including that bin's events.
    let mut starts = Vec::with_capacity(observed.len());
    let mut state = RecursionState::from_history(history, params.beta, offset + 1);
    let mut counts = vec![0u32; test.dims()];
    let mut alarms = vec![false; test.dims()];
    for mb in &timeline[..observed.len()] {
        if offset + mb.bin > state.cursor {
            state.advance(offset + mb.bin, &counts, &alarms, params.beta)?;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        alarms.iter_mut().for_each(|a| *a = false);
        for h in &mb.hits {
            counts[h.dim] = h.count;
            alarms[h.dim] = h.alarm;
        }
        let mut after = state.clone();
        after.advance(offset + mb.bin + 1, &counts, &alarms, params.beta)?;
        starts.push((mb.bin, after));
    }

    let replicate = |r: usize| -> Result<Vec<f64>> {
        let seed = derive_seed(cfg.seed, r as u64);
        let mut gaps = Vec::with_capacity(starts.len());
        for (bin, st) in &starts {
            let mut st = st.clone();
            let mut stream = Stream::new(seed, (offset + bin) as u64, 0, Purpose::Arrival);
            let zeros = vec![0u32; test.dims()];
            let no_alarm = vec![false; test.dims()];
            let mut gap = 1;
            loop {
                if gap > horizon {
                    return Err(HawkesError::HorizonExceeded { horizon_bins: horizon });
                }
                let t = bin + gap;
                let seasonal = params.season.at_bin(t, bm, test.origin_hour());
                let total: f64 = (0..test.dims())
                    .map(|m| params.mu[m] * seasonal + st.excitation(params, m))
                    .sum();
                if stream.uniform() < -(-total).exp_m1() {
                    break;
                }
                st.advance(offset + t + 1, &zeros, &no_alarm, params.beta)?;
                gap += 1;
            }
            gaps.push(gap);
        }
        Ok(proportions(&gaps, bm, cfg))
    };
    let sims: Vec<Vec<f64>> = (0..cfg.n_sims).into_par_iter().map(replicate).collect::<Result<_>>()?;

    let obs = proportions(&observed, bm, cfg);
    let buckets = (0..=cfg.n_buckets)
        .map(|k| {
            let column: Vec<f64> = sims.iter().map(|s| s[k]).collect();
            InterarrivalBucket {
                lower_hours: k as f64 * cfg.bin_hours,
                upper_hours: (k < cfg.n_buckets).then(|| (k + 1) as f64 * cfg.bin_hours),
                observed: obs[k],
                sim_mean: column.iter().mean(),
                sim_sd: column.iter().std_dev(),
            }
        })
        .collect();
    Ok(InterarrivalReport {
        buckets,
        n_intervals: observed.len(),
        n_sims: cfg.n_sims,
    })
}

/// Distribution of one ward's total count over the forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardForecast {
    pub ward: usize,
    pub mean: f64,
    /// 2.5% quantile.
    pub lower: f64,
    /// 97.5% quantile.
    pub upper: f64,
    pub totals: Vec<u64>,
}

impl WardForecast {
    pub fn covers(&self, observed: u64) -> bool {
        let o = observed as f64;
        o >= self.lower && o <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub horizon_bins: usize,
    pub n_sims: usize,
    pub per_ward: Vec<WardForecast>,
}

/// `n_sims` conditional simulations of `horizon_bins` bins after `history`.
/// Replicate `r` uses seed `derive_seed(seed, r)`.
pub fn forecast(
    params: &MarkedParams,
    history: &BinnedSeries,
    horizon_bins: usize,
    n_sims: usize,
    p_alarm: f64,
    seed: u64,
) -> Result<Forecast> {
    check_dims(params, history)?;
    if n_sims == 0 {
        return Err(HawkesError::InvalidParameter("forecast needs n_sims ≥ 1".into()));
    }
    let dims = history.dims();
    let offset = history.n_bins();
    let runs: Vec<Vec<u64>> = (0..n_sims)
        .into_par_iter()
        .map(|r| {
            let cfg = SimConfig::new(params.clone(), horizon_bins, p_alarm, derive_seed(seed, r as u64))
                .with_history(history.clone());
            let sim = simulate_recursive(&cfg)?;
            Ok((0..dims)
                .map(|m| {
                    sim.events(m)
                        .iter()
                        .filter(|e| e.bin > offset)
                        .map(|e| e.count as u64)
                        .sum()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let per_ward = (0..dims)
        .map(|m| {
            let totals: Vec<u64> = runs.iter().map(|r| r[m]).collect();
            let mut data = Data::new(totals.iter().map(|&v| v as f64).collect::<Vec<_>>());
            WardForecast {
                ward: m,
                mean: totals.iter().map(|&v| v as f64).mean(),
                lower: data.quantile(0.025),
                upper: data.quantile(0.975),
                totals,
            }
        })
        .collect();
    Ok(Forecast {
        horizon_bins,
        n_sims,
        per_ward,
    })
}
