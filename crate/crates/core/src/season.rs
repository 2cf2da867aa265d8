//! Hour-of-day seasonality of the background rate.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::series::BinnedSeries;

/// Lower bound applied to empirical hourly proportions before renormalizing.
pub const SEASON_FLOOR: f64 = 1e-6;

/// Hour-of-day bucket (1..=24) containing the start of bin `t` (1-based).
pub fn hour_of_bin(t: usize, bin_minutes: u32, origin_hour: u32) -> usize {
    debug_assert!(t >= 1);
    let minutes = (t as u64 - 1) * bin_minutes as u64;
    ((origin_hour as u64 + minutes / 60) % 24) as usize + 1
}

/// The 24 multipliers `s(1), …, s(24)` applied to the background rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalProfile {
    values: Vec<f64>,
}

impl SeasonalProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != 24 {
            return Err(HawkesError::InvalidParameter(format!(
                "seasonal profile needs 24 values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(HawkesError::InvalidParameter(format!(
                "seasonal values must be strictly positive, got {v}"
            )));
        }
        Ok(Self { values })
    }

    /// `s ≡ 1`: no seasonal modulation.
    pub fn flat() -> Self {
        Self {
            values: vec![1.0; 24],
        }
    }

    /// `s(hour)` for `hour` in 1..=24.
    #[inline]
    pub fn at_hour(&self, hour: usize) -> f64 {
        self.values[hour - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `s(h(t))` for bin `t` of a grid with the given layout.
    #[inline]
    pub fn at_bin(&self, t: usize, bin_minutes: u32, origin_hour: u32) -> f64 {
        self.at_hour(hour_of_bin(t, bin_minutes, origin_hour))
    }

    /// `Σ_{t=first..=last} s(h(t))`, evaluated in closed form over whole days.
    pub fn sum_over_bins(&self, first: usize, last: usize, bin_minutes: u32, origin_hour: u32) -> f64 {
        if last < first {
            return 0.0;
        }
        let n = last - first + 1;
        let day_minutes = 24 * 60;
        let period = if day_minutes % bin_minutes as usize == 0 {
            day_minutes / bin_minutes as usize
        } else {
            day_minutes
        };
        let per_period: f64 = (first..first + period.min(n))
            .map(|t| self.at_bin(t, bin_minutes, origin_hour))
            .sum();
        if n <= period {
            return per_period;
        }
        let full = n / period;
        let rest_start = first + full * period;
        let tail: f64 = (rest_start..=last)
            .map(|t| self.at_bin(t, bin_minutes, origin_hour))
            .sum();
        per_period * full as f64 + tail
    }
}

/// Hourly proportion of all events (pooled over wards), floored and renormalized.
pub fn estimate_seasonal_profile(series: &BinnedSeries) -> Result<SeasonalProfile> {
    let mut per_hour = [0.0f64; 24];
    let mut total = 0.0;
    for dim in 0..series.dims() {
        for ev in series.events(dim) {
            per_hour[series.hour_of(ev.bin) - 1] += ev.count as f64;
            total += ev.count as f64;
        }
    }
    if total == 0.0 {
        return Err(HawkesError::InvalidSeries(
            "cannot estimate a seasonal profile from a series without events".into(),
        ));
    }
    let floored: Vec<f64> = per_hour
        .iter()
        .map(|c| (c / total).max(SEASON_FLOOR))
        .collect();
    let norm: f64 = floored.iter().sum();
    SeasonalProfile::new(floored.into_iter().map(|v| v / norm).collect())
}
