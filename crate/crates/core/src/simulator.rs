//! Forward simulation of the marked model.
//!
//! Each bin draws, for `m = 0..M` in order, a Poisson count from `λ_m(t)`
//! and then, only if the count is positive, a Bernoulli(`p`) alarm flag.
//! Every draw comes from its own counter-based substream addressed by
//! `(seed, bin, dimension, purpose)`, so the naive and recursive simulators
//! consume identical randomness and produce identical series.

use rand_distr::{Distribution, Poisson};

use crate::error::{HawkesError, Result};
use crate::intensity::RecursionState;
use crate::kernel::decay;
use crate::params::MarkedParams;
use crate::rng::{Purpose, Stream};
use crate::series::{BinnedSeries, Event};

/// Largest intensity or count accepted in a single bin.
pub const COUNT_CAP: f64 = 1e9;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: MarkedParams,
    /// Bins to simulate after the history.
    pub n_bins: usize,
    pub p_alarm: f64,
    pub seed: u64,
    pub bin_minutes: u32,
    pub origin_hour: u32,
    /// Observed prefix to condition on; its grid overrides `bin_minutes`/`origin_hour`.
    pub history: Option<BinnedSeries>,
}

impl SimConfig {
    /// Hourly-aligned 5-minute grid starting at midnight, no history.
    pub fn new(params: MarkedParams, n_bins: usize, p_alarm: f64, seed: u64) -> Self {
        Self {
            params,
            n_bins,
            p_alarm,
            seed,
            bin_minutes: 5,
            origin_hour: 0,
            history: None,
        }
    }

    pub fn with_grid(mut self, bin_minutes: u32, origin_hour: u32) -> Self {
        self.bin_minutes = bin_minutes;
        self.origin_hour = origin_hour;
        self
    }

    pub fn with_history(mut self, history: BinnedSeries) -> Self {
        self.bin_minutes = history.bin_minutes();
        self.origin_hour = history.origin_hour();
        self.history = Some(history);
        self
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(0.0..=1.0).contains(&self.p_alarm) {
            return Err(HawkesError::InvalidParameter(format!(
                "alarm probability must lie in [0, 1], got {}",
                self.p_alarm
            )));
        }
        if let Some(h) = &self.history {
            if h.dims() != self.params.dims() {
                return Err(HawkesError::InvalidParameter(format!(
                    "history has {} dimensions, parameters have {}",
                    h.dims(),
                    self.params.dims()
                )));
            }
        }
        let rho = self.params.spectral_radius(self.p_alarm);
        if rho >= 1.0 {
            log::warn!("spectral radius of K + p·alpha is {rho:.3}; the process may explode");
        }
        Ok(())
    }

    fn history_len(&self) -> usize {
        self.history.as_ref().map_or(0, |h| h.n_bins())
    }
}

/// Fraction of event bins (over all dimensions) that carry an alarm.
pub fn estimate_alarm_prob(series: &BinnedSeries) -> Result<f64> {
    let (mut alarmed, mut total) = (0usize, 0usize);
    for m in 0..series.dims() {
        for ev in series.events(m) {
            total += 1;
            alarmed += ev.alarm as usize;
        }
    }
    if total == 0 {
        return Err(HawkesError::InvalidSeries(
            "cannot estimate an alarm probability without events".into(),
        ));
    }
    Ok(alarmed as f64 / total as f64)
}

/// Draws the count and alarm flag for one `(bin, dimension)` cell.
pub(crate) fn draw_cell(seed: u64, bin: usize, dim: usize, lambda: f64, p_alarm: f64) -> Result<(u32, bool)> {
    if !(lambda <= COUNT_CAP) {
        return Err(HawkesError::Explosive { bin, intensity: lambda });
    }
    if lambda <= 0.0 {
        return Ok((0, false));
    }
    let mut count_stream = Stream::new(seed, bin as u64, dim as u32, Purpose::Count);
    let poisson = Poisson::new(lambda).map_err(|e| HawkesError::Numerical(format!("{e}")))?;
    let y = poisson.sample(&mut count_stream);
    if y > COUNT_CAP {
        return Err(HawkesError::Explosive { bin, intensity: lambda });
    }
    let y = y as u32;
    let alarm = y > 0 && Stream::new(seed, bin as u64, dim as u32, Purpose::Alarm).uniform() < p_alarm;
    Ok((y, alarm))
}

fn finish(config: &SimConfig, events: Vec<Vec<Event>>) -> Result<BinnedSeries> {
    BinnedSeries::new(
        config.params.dims(),
        config.history_len() + config.n_bins,
        config.bin_minutes,
        config.origin_hour,
        events,
    )
}

fn initial_events(config: &SimConfig) -> Vec<Vec<Event>> {
    match &config.history {
        Some(h) => h.all_events().to_vec(),
        None => vec![Vec::new(); config.params.dims()],
    }
}

/// Recomputes every intensity by summing over all earlier events.
/// Returns history (if any) followed by the simulated bins.
pub fn simulate_naive(config: &SimConfig) -> Result<BinnedSeries> {
    config.validate()?;
    let p = &config.params;
    let dims = p.dims();
    let start = config.history_len() + 1;
    let mut events = initial_events(config);
    let mut lambdas = vec![0.0; dims];
    for t in start..start + config.n_bins {
        let seasonal = p.season.at_bin(t, config.bin_minutes, config.origin_hour);
        for (m, lambda) in lambdas.iter_mut().enumerate() {
            let mut excitation = 0.0;
            for (l, list) in events.iter().enumerate() {
                let mut r = 0.0;
                let mut r_alarm = 0.0;
                for ev in list {
                    let g = ev.count as f64 * p.beta * decay(p.beta, (t - ev.bin - 1) as i64);
                    r += g;
                    if ev.alarm {
                        r_alarm += g;
                    }
                }
                excitation += p.k[(l, m)] * r + p.alpha[(l, m)] * r_alarm;
            }
            *lambda = p.mu[m] * seasonal + excitation;
        }
        for (m, &lambda) in lambdas.iter().enumerate() {
            let (y, alarm) = draw_cell(config.seed, t, m, lambda, config.p_alarm)?;
            if y > 0 {
                events[m].push(Event::new(t, y, alarm));
            }
        }
    }
    finish(config, events)
}

/// Carries the excitation state forward one bin at a time:
/// `R ← (1−β)R + βY`, with the same update for the alarm part.
pub fn simulate_recursive(config: &SimConfig) -> Result<BinnedSeries> {
    config.validate()?;
    let p = &config.params;
    let dims = p.dims();
    let start = config.history_len() + 1;
    let mut state = match &config.history {
        Some(h) => RecursionState::from_history(h, p.beta, start),
        None => RecursionState::new(dims, start),
    };
    let mut events = initial_events(config);
    let mut counts = vec![0u32; dims];
    let mut alarms = vec![false; dims];
    for t in start..start + config.n_bins {
        if t > start {
            state.advance(t, &counts, &alarms, p.beta)?;
        }
        let seasonal = p.season.at_bin(t, config.bin_minutes, config.origin_hour);
        for m in 0..dims {
            let lambda = p.mu[m] * seasonal + state.excitation(p, m);
            let (y, alarm) = draw_cell(config.seed, t, m, lambda, config.p_alarm)?;
            counts[m] = y;
            alarms[m] = alarm;
        }
        for m in 0..dims {
            if counts[m] > 0 {
                events[m].push(Event::new(t, counts[m], alarms[m]));
            }
        }
    }
    finish(config, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::season::SeasonalProfile;
    use nalgebra::DMatrix;

    fn params2() -> MarkedParams {
        MarkedParams::new(
            vec![0.05, 0.08],
            DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.05, 0.2]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.0, 0.2]),
            0.2,
            SeasonalProfile::flat(),
        )
        .unwrap()
    }

    #[test]
    fn alarm_prob_counts_event_bins() {
        let mut ev: Vec<Event> = (1..=10).map(|t| Event::new(t, 1, false)).collect();
        for e in ev.iter_mut().take(3) {
            e.alarm = true;
        }
        let s = BinnedSeries::new(1, 10, 5, 0, vec![ev]).unwrap();
        assert_eq!(estimate_alarm_prob(&s).unwrap(), 0.3);
        assert!(estimate_alarm_prob(&BinnedSeries::empty(1, 10, 5, 0).unwrap()).is_err());
    }

    #[test]
    fn naive_and_recursive_agree() {
        for seed in 0..5 {
            let cfg = SimConfig::new(params2(), 2000, 0.3, seed);
            let a = simulate_naive(&cfg).unwrap();
            let b = simulate_recursive(&cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.total_count() > 0);
        }
    }

    #[test]
    fn zero_background_gives_empty_series() {
        let p = MarkedParams { mu: vec![0.0, 0.0], ..params2() };
        let s = simulate_recursive(&SimConfig::new(p, 500, 0.5, 1)).unwrap();
        assert_eq!(s.total_count(), 0);
    }

    #[test]
    fn history_is_kept_and_conditions_the_draws() {
        let hist = simulate_recursive(&SimConfig::new(params2(), 300, 0.3, 9)).unwrap();
        let cfg = SimConfig::new(params2(), 200, 0.3, 10).with_history(hist.clone());
        let full = simulate_recursive(&cfg).unwrap();
        assert_eq!(full.n_bins(), 500);
        assert_eq!(full.slice(1, 300).unwrap(), hist);
        assert_eq!(full, simulate_naive(&cfg).unwrap());
    }

    #[test]
    fn explosive_parameters_error() {
        let p = MarkedParams::new(
            vec![1.0],
            DMatrix::from_element(1, 1, 5.0),
            DMatrix::zeros(1, 1),
            0.9,
            SeasonalProfile::flat(),
        )
        .unwrap();
        assert!(matches!(
            simulate_recursive(&SimConfig::new(p, 10_000, 0.0, 3)),
            Err(HawkesError::Explosive { .. })
        ));
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let cfg = SimConfig::new(params2(), 1000, 0.2, 42);
        assert_eq!(simulate_recursive(&cfg).unwrap(), simulate_recursive(&cfg).unwrap());
        let other = SimConfig::new(params2(), 1000, 0.2, 43);
        assert_ne!(simulate_recursive(&cfg).unwrap(), simulate_recursive(&other).unwrap());
    }
}
