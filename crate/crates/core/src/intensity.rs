//! Conditional intensity of the marked model.
//!
//! `λ_m(t) = μ_m s(h(t)) + Σ_l Σ_{t_i ≤ t−1} Y_l(t_i) (K_{l,m} + α_{l,m} 1[alarm]) β(1−β)^{t−t_i−1}`
//!
//! The direct sum costs one pass over all earlier events. The recursive form
//! keeps, per source dimension, the decayed excitation mass `R` and its
//! alarm-only part `R_a` on a single timeline merged across dimensions; the
//! geometric decay composes over gaps, so the state at any bin holds exactly
//! the strict-past sums.

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::kernel::decay;
use crate::params::MarkedParams;
use crate::series::{BinnedSeries, Hit};

/// Intensity by direct summation over every earlier event.
pub fn intensity_naive(params: &MarkedParams, series: &BinnedSeries, t: usize, m: usize) -> Result<f64> {
    check_query(series, t, m)?;
    let d = decompose_unchecked(params, series, t, m);
    Ok(d.total())
}

fn check_query(series: &BinnedSeries, t: usize, m: usize) -> Result<()> {
    if t < 1 || t > series.n_bins() {
        return Err(HawkesError::OutOfRange(format!("bin {t} outside 1..={}", series.n_bins())));
    }
    if m >= series.dims() {
        return Err(HawkesError::OutOfRange(format!("dimension {m} of {}", series.dims())));
    }
    Ok(())
}

/// Decayed excitation mass per source dimension at `cursor`, counting only
/// events strictly before `cursor`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionState {
    pub r: Vec<f64>,
    pub r_alarm: Vec<f64>,
    pub cursor: usize,
}

impl RecursionState {
    pub fn new(dims: usize, cursor: usize) -> Self {
        Self {
            r: vec![0.0; dims],
            r_alarm: vec![0.0; dims],
            cursor,
        }
    }

    /// Moves from `cursor` to `to_bin`, folding in the counts observed at `cursor`.
    pub fn advance(&mut self, to_bin: usize, counts: &[u32], alarms: &[bool], beta: f64) -> Result<()> {
        if to_bin <= self.cursor {
            return Err(HawkesError::NonIncreasingBins {
                from: self.cursor,
                to: to_bin,
            });
        }
        let gap = (to_bin - self.cursor) as i64;
        let carry = decay(beta, gap);
        let fresh = beta * decay(beta, gap - 1);
        for l in 0..self.r.len() {
            let y = counts[l] as f64;
            self.r[l] = carry * self.r[l] + y * fresh;
            let ya = if alarms[l] { y } else { 0.0 };
            self.r_alarm[l] = carry * self.r_alarm[l] + ya * fresh;
        }
        self.cursor = to_bin;
        Ok(())
    }

    /// Sparse form of [`advance`](Self::advance) for the merged timeline.
    pub(crate) fn advance_hits(&mut self, to_bin: usize, hits: &[Hit], beta: f64) {
        debug_assert!(to_bin > self.cursor);
        let gap = (to_bin - self.cursor) as i64;
        let carry = decay(beta, gap);
        let fresh = beta * decay(beta, gap - 1);
        for v in self.r.iter_mut().chain(self.r_alarm.iter_mut()) {
            *v *= carry;
        }
        for h in hits {
            let y = h.count as f64;
            self.r[h.dim] += y * fresh;
            if h.alarm {
                self.r_alarm[h.dim] += y * fresh;
            }
        }
        self.cursor = to_bin;
    }

    /// Excitation part of `λ_m` at the cursor.
    #[inline]
    pub fn excitation(&self, params: &MarkedParams, m: usize) -> f64 {
        let mut e = 0.0;
        for l in 0..self.r.len() {
            e += params.k[(l, m)] * self.r[l] + params.alpha[(l, m)] * self.r_alarm[l];
        }
        e
    }

    /// `λ_m` at the cursor.
    #[inline]
    pub fn intensity(&self, params: &MarkedParams, series: &BinnedSeries, m: usize) -> f64 {
        params.mu[m] * params.season.at_bin(self.cursor, series.bin_minutes(), series.origin_hour())
            + self.excitation(params, m)
    }

    /// State at bin `at` given all events of `series` in bins `< at`.
    pub fn from_history(series: &BinnedSeries, beta: f64, at: usize) -> Self {
        let mut st = Self::new(series.dims(), 1);
        let mut pending: &[Hit] = &[];
        for mb in series.timeline() {
            if mb.bin >= at {
                break;
            }
            if mb.bin > st.cursor {
                st.advance_hits(mb.bin, pending, beta);
            }
            pending = &mb.hits;
        }
        if at > st.cursor {
            st.advance_hits(at, pending, beta);
        }
        st
    }
}

/// Intensities at every event bin, aligned with `series.events(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventIntensities {
    pub per_dim: Vec<Vec<f64>>,
}

impl EventIntensities {
    pub fn get(&self, m: usize, index: usize) -> f64 {
        self.per_dim[m][index]
    }
}

/// Calls `visit(bin, hits, state)` at each merged event bin with the state
/// holding the strict-past sums. One pass, `O(M · event bins)` state updates.
pub(crate) fn walk_events<F>(series: &BinnedSeries, beta: f64, mut visit: F)
where
    F: FnMut(usize, &[Hit], &RecursionState),
{
    let timeline = series.timeline();
    let Some(first) = timeline.first() else {
        return;
    };
    let mut st = RecursionState::new(series.dims(), first.bin);
    let mut prev: Option<&[Hit]> = None;
    for mb in timeline {
        if let Some(hits) = prev {
            st.advance_hits(mb.bin, hits, beta);
        }
        visit(mb.bin, &mb.hits, &st);
        prev = Some(&mb.hits);
    }
}

/// All event-bin intensities in one recursive pass.
pub fn intensities_at_events(params: &MarkedParams, series: &BinnedSeries) -> EventIntensities {
    let mut per_dim: Vec<Vec<f64>> = (0..series.dims())
        .map(|m| Vec::with_capacity(series.events(m).len()))
        .collect();
    walk_events(series, params.beta, |_, hits, st| {
        for h in hits {
            per_dim[h.dim].push(st.intensity(params, series, h.dim));
        }
    });
    EventIntensities { per_dim }
}

/// Split of `λ_m(t)` by source.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntensityDecomposition {
    pub background: f64,
    pub nonalarm_self: f64,
    pub nonalarm_cross: f64,
    pub alarm_self: f64,
    pub alarm_cross: f64,
}

impl IntensityDecomposition {
    pub fn total(&self) -> f64 {
        self.background + self.nonalarm_self + self.nonalarm_cross + self.alarm_self + self.alarm_cross
    }

    pub fn nonalarm(&self) -> f64 {
        self.nonalarm_self + self.nonalarm_cross
    }

    pub fn alarm(&self) -> f64 {
        self.alarm_self + self.alarm_cross
    }

    /// Every component divided by `λ`.
    pub fn shares(&self) -> Self {
        let total = self.total();
        Self {
            background: self.background / total,
            nonalarm_self: self.nonalarm_self / total,
            nonalarm_cross: self.nonalarm_cross / total,
            alarm_self: self.alarm_self / total,
            alarm_cross: self.alarm_cross / total,
        }
    }

    fn from_state(params: &MarkedParams, series: &BinnedSeries, st: &RecursionState, m: usize) -> Self {
        let mut d = Self {
            background: params.mu[m]
                * params.season.at_bin(st.cursor, series.bin_minutes(), series.origin_hour()),
            ..Self::default()
        };
        for l in 0..st.r.len() {
            let na = params.k[(l, m)] * st.r[l];
            let a = params.alpha[(l, m)] * st.r_alarm[l];
            if l == m {
                d.nonalarm_self += na;
                d.alarm_self += a;
            } else {
                d.nonalarm_cross += na;
                d.alarm_cross += a;
            }
        }
        d
    }
}

/// Decomposition of `λ_m(t)` by direct summation.
pub fn decompose(params: &MarkedParams, series: &BinnedSeries, t: usize, m: usize) -> Result<IntensityDecomposition> {
    check_query(series, t, m)?;
    Ok(decompose_unchecked(params, series, t, m))
}

fn decompose_unchecked(params: &MarkedParams, series: &BinnedSeries, t: usize, m: usize) -> IntensityDecomposition {
    let beta = params.beta;
    let mut d = IntensityDecomposition {
        background: params.mu[m] * params.season.at_bin(t, series.bin_minutes(), series.origin_hour()),
        ..Default::default()
    };
    for l in 0..series.dims() {
        let (k, a) = (params.k[(l, m)], params.alpha[(l, m)]);
        let mut na_sum = 0.0;
        let mut a_sum = 0.0;
        for ev in series.events(l).iter().take_while(|e| e.bin < t) {
            let g = beta * decay(beta, (t - ev.bin - 1) as i64);
            na_sum += ev.count as f64 * k * g;
            if ev.alarm {
                a_sum += ev.count as f64 * a * g;
            }
        }
        if l == m {
            d.nonalarm_self += na_sum;
            d.alarm_self += a_sum;
        } else {
            d.nonalarm_cross += na_sum;
            d.alarm_cross += a_sum;
        }
    }
    d
}

/// Decompositions at every event bin in one recursive pass, aligned with
/// `series.events(m)`.
pub fn decompositions_at_events(params: &MarkedParams, series: &BinnedSeries) -> Vec<Vec<IntensityDecomposition>> {
    let mut out: Vec<Vec<IntensityDecomposition>> = vec![Vec::new(); series.dims()];
    walk_events(series, params.beta, |_, hits, st| {
        for h in hits {
            out[h.dim].push(IntensityDecomposition::from_state(params, series, st, h.dim));
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::season::SeasonalProfile;
    use crate::series::Event;
    use nalgebra::DMatrix;

    fn one_dim(mu: f64, k: f64, alpha: f64, beta: f64) -> MarkedParams {
        MarkedParams::new(
            vec![mu],
            DMatrix::from_element(1, 1, k),
            DMatrix::from_element(1, 1, alpha),
            beta,
            SeasonalProfile::flat(),
        )
        .unwrap()
    }

    #[test]
    fn hand_values() {
        let empty = BinnedSeries::empty(1, 5, 5, 0).unwrap();
        assert_eq!(intensity_naive(&one_dim(0.1, 1.0, 0.0, 0.5), &empty, 1, 0).unwrap(), 0.1);

        let s = BinnedSeries::new(1, 5, 5, 0, vec![vec![Event::new(1, 2, false)]]).unwrap();
        let l2 = intensity_naive(&one_dim(0.1, 1.0, 0.0, 0.5), &s, 2, 0).unwrap();
        assert!((l2 - 1.1).abs() < 1e-15);

        let s = BinnedSeries::new(1, 5, 5, 0, vec![vec![Event::new(1, 1, true)]]).unwrap();
        let p = one_dim(0.1, 0.2, 0.3, 0.5);
        assert!((intensity_naive(&p, &s, 2, 0).unwrap() - 0.35).abs() < 1e-15);
        let d = decompose(&p, &s, 2, 0).unwrap();
        assert!((d.background - 0.1).abs() < 1e-15);
        assert!((d.nonalarm_self - 0.1).abs() < 1e-15);
        assert!((d.alarm_self - 0.15).abs() < 1e-15);
        assert_eq!(d.nonalarm_cross + d.alarm_cross, 0.0);
    }

    #[test]
    fn event_bin_does_not_excite_itself() {
        let s = BinnedSeries::new(1, 5, 5, 0, vec![vec![Event::new(3, 4, true)]]).unwrap();
        let p = one_dim(0.1, 1.0, 1.0, 0.5);
        assert_eq!(intensity_naive(&p, &s, 3, 0).unwrap(), 0.1);
        assert_eq!(intensities_at_events(&p, &s).get(0, 0), 0.1);
    }

    #[test]
    fn out_of_range_queries() {
        let s = BinnedSeries::empty(1, 5, 5, 0).unwrap();
        let p = one_dim(0.1, 1.0, 0.0, 0.5);
        assert!(intensity_naive(&p, &s, 0, 0).is_err());
        assert!(intensity_naive(&p, &s, 6, 0).is_err());
        assert!(intensity_naive(&p, &s, 1, 1).is_err());
    }

    #[test]
    fn advance_examples() {
        let mut st = RecursionState::new(1, 1);
        st.advance(2, &[2], &[false], 0.5).unwrap();
        assert_eq!(st.r[0], 1.0);
        assert_eq!(st.r_alarm[0], 0.0);
        let before = st.r[0];
        st.advance(7, &[0], &[false], 0.5).unwrap();
        assert!((st.r[0] - before * 0.5f64.powi(5)).abs() < 1e-15);
        assert!(st.advance(7, &[0], &[false], 0.5).is_err());
    }

    #[test]
    fn decay_only_advance_is_a_power() {
        for &beta in &[0.01, 0.3, 0.9] {
            for n in [1usize, 2, 17, 500, 1000] {
                let mut st = RecursionState::new(1, 1);
                st.r[0] = 3.7;
                st.advance(1 + n, &[0], &[false], beta).unwrap();
                let expected = 3.7 * (1.0 - beta).powi(n as i32);
                assert!((st.r[0] - expected).abs() <= 1e-14 * expected.abs());
            }
        }
    }

    #[test]
    fn from_history_matches_stepping() {
        let s = BinnedSeries::new(
            2,
            30,
            5,
            0,
            vec![
                vec![Event::new(2, 1, true), Event::new(9, 2, false)],
                vec![Event::new(9, 1, false), Event::new(20, 3, true)],
            ],
        )
        .unwrap();
        let beta = 0.2;
        let mut st = RecursionState::new(2, 1);
        for t in 1..25 {
            let counts: Vec<u32> = (0..2).map(|m| s.count_at(m, t)).collect();
            let alarms: Vec<bool> = (0..2).map(|m| s.alarm_at(m, t)).collect();
            st.advance(t + 1, &counts, &alarms, beta).unwrap();
        }
        let jumped = RecursionState::from_history(&s, beta, 25);
        for l in 0..2 {
            assert!((st.r[l] - jumped.r[l]).abs() < 1e-14);
            assert!((st.r_alarm[l] - jumped.r_alarm[l]).abs() < 1e-14);
        }
        assert_eq!(jumped.cursor, 25);
    }
}
