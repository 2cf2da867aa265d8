//! Multivariate count series on a discrete time grid, with per-bin alarm marks.
//!
//! Bins are 1-based. Each dimension stores its event bins sparsely as a
//! strictly increasing list; a bin that is not listed has count zero. The
//! alarm set of a dimension is the subset of its event bins whose mark is set.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HawkesError, Result};
use crate::season::hour_of_bin;

/// One non-empty bin of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub bin: usize,
    pub count: u32,
    pub alarm: bool,
}

impl Event {
    pub fn new(bin: usize, count: u32, alarm: bool) -> Self {
        Self { bin, count, alarm }
    }
}

/// A dimension's contribution to a bin of the merged timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hit {
    pub dim: usize,
    pub count: u32,
    pub alarm: bool,
}

/// A bin in which at least one dimension has events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedBin {
    pub bin: usize,
    pub hits: Vec<Hit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSeries {
    dims: usize,
    n_bins: usize,
    bin_minutes: u32,
    origin_hour: u32,
    events: Vec<Vec<Event>>,
    timeline: Vec<MergedBin>,
}

/// Grid description written next to the CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSidecar {
    pub dims: usize,
    pub n_bins: usize,
    pub bin_minutes: u32,
    pub origin_hour: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    bin: usize,
    ward: usize,
    count: u32,
    alarm: u8,
}

impl BinnedSeries {
    pub fn new(
        dims: usize,
        n_bins: usize,
        bin_minutes: u32,
        origin_hour: u32,
        events: Vec<Vec<Event>>,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(HawkesError::InvalidSeries("at least one dimension is required".into()));
        }
        if bin_minutes == 0 {
            return Err(HawkesError::InvalidSeries("bin_minutes must be positive".into()));
        }
        if origin_hour > 23 {
            return Err(HawkesError::InvalidSeries(format!(
                "origin_hour must be in 0..=23, got {origin_hour}"
            )));
        }
        if events.len() != dims {
            return Err(HawkesError::InvalidSeries(format!(
                "expected {dims} event lists, got {}",
                events.len()
            )));
        }
        for (m, list) in events.iter().enumerate() {
            let mut prev = 0usize;
            for ev in list {
                if ev.bin < 1 || ev.bin > n_bins {
                    return Err(HawkesError::InvalidSeries(format!(
                        "dimension {m}: bin {} outside 1..={n_bins}",
                        ev.bin
                    )));
                }
                if ev.bin <= prev {
                    return Err(HawkesError::InvalidSeries(format!(
                        "dimension {m}: event bins not strictly increasing at {}",
                        ev.bin
                    )));
                }
                if ev.count == 0 {
                    return Err(HawkesError::InvalidSeries(format!(
                        "dimension {m}: listed bin {} has zero count",
                        ev.bin
                    )));
                }
                prev = ev.bin;
            }
        }
        let timeline = merge(&events);
        Ok(Self {
            dims,
            n_bins,
            bin_minutes,
            origin_hour,
            events,
            timeline,
        })
    }

    pub fn empty(dims: usize, n_bins: usize, bin_minutes: u32, origin_hour: u32) -> Result<Self> {
        Self::new(dims, n_bins, bin_minutes, origin_hour, vec![Vec::new(); dims])
    }

    /// Builds a series from dense per-bin counts (`counts[t-1][m]`) and alarm flags.
    pub fn from_dense(
        counts: &[Vec<u32>],
        alarms: &[Vec<bool>],
        bin_minutes: u32,
        origin_hour: u32,
    ) -> Result<Self> {
        let dims = counts.first().map(Vec::len).unwrap_or(1);
        let mut events = vec![Vec::new(); dims];
        for (i, row) in counts.iter().enumerate() {
            for (m, &c) in row.iter().enumerate() {
                if c > 0 {
                    events[m].push(Event::new(i + 1, c, alarms[i][m]));
                }
            }
        }
        Self::new(dims, counts.len(), bin_minutes, origin_hour, events)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_minutes(&self) -> u32 {
        self.bin_minutes
    }

    pub fn origin_hour(&self) -> u32 {
        self.origin_hour
    }

    pub fn events(&self, dim: usize) -> &[Event] {
        &self.events[dim]
    }

    pub fn all_events(&self) -> &[Vec<Event>] {
        &self.events
    }

    /// Event bins of all dimensions merged in increasing bin order.
    pub fn timeline(&self) -> &[MergedBin] {
        &self.timeline
    }

    pub fn hour_of(&self, t: usize) -> usize {
        hour_of_bin(t, self.bin_minutes, self.origin_hour)
    }

    pub fn count_at(&self, dim: usize, t: usize) -> u32 {
        match self.events[dim].binary_search_by_key(&t, |e| e.bin) {
            Ok(i) => self.events[dim][i].count,
            Err(_) => 0,
        }
    }

    pub fn alarm_at(&self, dim: usize, t: usize) -> bool {
        match self.events[dim].binary_search_by_key(&t, |e| e.bin) {
            Ok(i) => self.events[dim][i].alarm,
            Err(_) => false,
        }
    }

    pub fn total_count(&self) -> u64 {
        self.events
            .iter()
            .flat_map(|l| l.iter().map(|e| e.count as u64))
            .sum()
    }

    pub fn dim_count(&self, dim: usize) -> u64 {
        self.events[dim].iter().map(|e| e.count as u64).sum()
    }

    pub fn sidecar(&self) -> SeriesSidecar {
        SeriesSidecar {
            dims: self.dims,
            n_bins: self.n_bins,
            bin_minutes: self.bin_minutes,
            origin_hour: self.origin_hour,
        }
    }

    /// True if a series starting right after this one can be described by an
    /// origin hour, i.e. this series covers a whole number of hours.
    pub fn ends_on_hour(&self) -> bool {
        (self.n_bins as u64 * self.bin_minutes as u64).is_multiple_of(60)
    }

    /// Origin hour of the bin that follows the last bin of this series.
    pub fn next_origin_hour(&self) -> Result<u32> {
        if !self.ends_on_hour() {
            return Err(HawkesError::GridMismatch(format!(
                "series of {} bins × {} min does not end on an hour boundary",
                self.n_bins, self.bin_minutes
            )));
        }
        let hours = self.n_bins as u64 * self.bin_minutes as u64 / 60;
        Ok(((self.origin_hour as u64 + hours) % 24) as u32)
    }

    /// Bins `first..=last` as a new series (re-indexed from 1).
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        if first < 1 || last > self.n_bins || last < first {
            return Err(HawkesError::OutOfRange(format!(
                "slice {first}..={last} of a {}-bin series",
                self.n_bins
            )));
        }
        let offset_minutes = (first as u64 - 1) * self.bin_minutes as u64;
        if !offset_minutes.is_multiple_of(60) {
            return Err(HawkesError::GridMismatch(format!(
                "slice start {first} is not on an hour boundary"
            )));
        }
        let origin = ((self.origin_hour as u64 + offset_minutes / 60) % 24) as u32;
        let events = self
            .events
            .iter()
            .map(|l| {
                l.iter()
                    .filter(|e| e.bin >= first && e.bin <= last)
                    .map(|e| Event::new(e.bin - first + 1, e.count, e.alarm))
                    .collect()
            })
            .collect();
        Self::new(self.dims, last - first + 1, self.bin_minutes, origin, events)
    }

    /// `self` followed immediately by `next` on the same grid.
    pub fn concat(&self, next: &Self) -> Result<Self> {
        self.check_follows(next)?;
        let events = self
            .events
            .iter()
            .zip(&next.events)
            .map(|(a, b)| {
                a.iter()
                    .copied()
                    .chain(b.iter().map(|e| Event::new(e.bin + self.n_bins, e.count, e.alarm)))
                    .collect()
            })
            .collect();
        Self::new(
            self.dims,
            self.n_bins + next.n_bins,
            self.bin_minutes,
            self.origin_hour,
            events,
        )
    }

    pub(crate) fn check_follows(&self, next: &Self) -> Result<()> {
        if self.dims != next.dims || self.bin_minutes != next.bin_minutes {
            return Err(HawkesError::GridMismatch(format!(
                "dims/bin width differ: ({}, {}) vs ({}, {})",
                self.dims, self.bin_minutes, next.dims, next.bin_minutes
            )));
        }
        if next.n_bins > 0 && self.next_origin_hour()? != next.origin_hour {
            return Err(HawkesError::GridMismatch(format!(
                "following series starts at hour {} but the grid continues at hour {}",
                next.origin_hour,
                self.next_origin_hour()?
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (m, list) in self.events.iter().enumerate() {
            for e in list {
                w.serialize(SeriesRow {
                    bin: e.bin,
                    ward: m + 1,
                    count: e.count,
                    alarm: e.alarm as u8,
                })?;
            }
        }
        if self.events.iter().all(Vec::is_empty) {
            w.write_record(["bin", "ward", "count", "alarm"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, sidecar: &SeriesSidecar) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut events = vec![Vec::new(); sidecar.dims];
        for (i, row) in r.deserialize::<SeriesRow>().enumerate() {
            let row = row.map_err(|e| HawkesError::Schema {
                row: i + 2,
                message: e.to_string(),
            })?;
            if row.ward < 1 || row.ward > sidecar.dims {
                return Err(HawkesError::Schema {
                    row: i + 2,
                    message: format!("ward {} outside 1..={}", row.ward, sidecar.dims),
                });
            }
            events[row.ward - 1].push(Event::new(row.bin, row.count, row.alarm != 0));
        }
        for list in &mut events {
            list.sort_by_key(|e| e.bin);
        }
        Self::new(
            sidecar.dims,
            sidecar.n_bins,
            sidecar.bin_minutes,
            sidecar.origin_hour,
            events,
        )
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str, extra: Option<serde_json::Value>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let mut json = serde_json::to_value(self.sidecar())?;
        if let (Some(serde_json::Value::Object(extra)), serde_json::Value::Object(obj)) = (extra, &mut json) {
            obj.extend(extra);
        }
        let mut f = std::fs::File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(&mut f, &json)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let sidecar: SeriesSidecar =
            serde_json::from_reader(std::fs::File::open(dir.join(format!("{stem}.json")))?)?;
        Self::read_csv(std::fs::File::open(dir.join(format!("{stem}.csv")))?, &sidecar)
    }
}

fn merge(events: &[Vec<Event>]) -> Vec<MergedBin> {
    let mut all: Vec<(usize, Hit)> = events
        .iter()
        .enumerate()
        .flat_map(|(dim, l)| {
            l.iter().map(move |e| {
                (
                    e.bin,
                    Hit {
                        dim,
                        count: e.count,
                        alarm: e.alarm,
                    },
                )
            })
        })
        .collect();
    all.sort_by_key(|(bin, hit)| (*bin, hit.dim));
    let mut out: Vec<MergedBin> = Vec::new();
    for (bin, hit) in all {
        match out.last_mut() {
            Some(last) if last.bin == bin => last.hits.push(hit),
            _ => out.push(MergedBin {
                bin,
                hits: vec![hit],
            }),
        }
    }
    out
}
