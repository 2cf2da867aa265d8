//! Raw incident records and their aggregation onto the bin grid.

use std::collections::BTreeSet;
use std::io::Read;

use chrono::{NaiveDateTime, Timelike};
use serde::Deserialize;

use crate::error::{HawkesError, Result};
use crate::series::{BinnedSeries, Event};

/// A single timestamped record from an incident log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub timestamp: NaiveDateTime,
    pub ward: String,
    pub alarm: bool,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    timestamp: String,
    ward: String,
    alarm: String,
}

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
];

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
}

/// Reads a `timestamp,ward,alarm` CSV. Errors name the offending line.
pub fn read_raw_events<R: Read>(reader: R) -> Result<Vec<RawEvent>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let expected = ["timestamp", "ward", "alarm"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
        return Err(HawkesError::Schema {
            row: 1,
            message: format!("expected header `timestamp,ward,alarm`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<RawRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| HawkesError::Schema {
            row: line,
            message: e.to_string(),
        })?;
        let timestamp = parse_timestamp(&row.timestamp).ok_or_else(|| HawkesError::Schema {
            row: line,
            message: format!("malformed timestamp `{}`", row.timestamp),
        })?;
        let alarm = match row.alarm.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(HawkesError::Schema {
                    row: line,
                    message: format!("alarm must be 0 or 1, got `{other}`"),
                })
            }
        };
        let ward = row.ward.trim().to_string();
        if ward.is_empty() {
            return Err(HawkesError::Schema {
                row: line,
                message: "empty ward label".into(),
            });
        }
        out.push(RawEvent {
            timestamp,
            ward,
            alarm,
        });
    }
    Ok(out)
}

/// Sorted distinct ward labels.
pub fn ward_labels(events: &[RawEvent]) -> Vec<String> {
    events
        .iter()
        .map(|e| e.ward.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Aggregates events over `[start, end)` into bins of `bin_minutes`.
///
/// Ward `wards[i]` becomes dimension `i`. A bin carries the alarm mark when
/// any of its events sounded an alarm. `start` must fall on the hour so the
/// grid can be described by an origin hour.
pub fn bin_events(
    events: &[RawEvent],
    wards: &[String],
    bin_minutes: u32,
    start: NaiveDateTime,
    end: NaiveDateTime,
) -> Result<BinnedSeries> {
    if bin_minutes == 0 {
        return Err(HawkesError::InvalidParameter("bin_minutes must be positive".into()));
    }
    if start.minute() != 0 || start.second() != 0 {
        return Err(HawkesError::InvalidParameter(format!(
            "span start {start} must fall on the hour"
        )));
    }
    let span = (end - start).num_minutes();
    if span <= 0 || span % bin_minutes as i64 != 0 {
        return Err(HawkesError::InvalidParameter(format!(
            "span of {span} minutes is not a positive multiple of {bin_minutes}"
        )));
    }
    let n_bins = (span / bin_minutes as i64) as usize;
    let dims = wards.len();
    // per-ward counts and alarm marks keyed by bin
    let mut acc: Vec<std::collections::BTreeMap<usize, (u32, bool)>> = vec![Default::default(); dims];
    for ev in events {
        let dim = wards
            .iter()
            .position(|w| *w == ev.ward)
            .ok_or_else(|| HawkesError::UnknownWard(ev.ward.clone()))?;
        if ev.timestamp < start || ev.timestamp >= end {
            return Err(HawkesError::OutsideSpan {
                timestamp: ev.timestamp.to_string(),
                start: start.to_string(),
                end: end.to_string(),
            });
        }
        let offset = (ev.timestamp - start).num_minutes();
        let bin = (offset / bin_minutes as i64) as usize + 1;
        let slot = acc[dim].entry(bin).or_insert((0, false));
        slot.0 += 1;
        slot.1 |= ev.alarm;
    }
    let lists = acc
        .into_iter()
        .map(|m| m.into_iter().map(|(bin, (c, a))| Event::new(bin, c, a)).collect())
        .collect();
    BinnedSeries::new(dims, n_bins, bin_minutes, start.hour(), lists)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn ev(t: &str, w: &str, a: bool) -> RawEvent {
        RawEvent {
            timestamp: ts(t),
            ward: w.into(),
            alarm: a,
        }
    }

    #[test]
    fn same_bin_events_accumulate() {
        let events = vec![ev("2020-01-01T00:01", "A", false), ev("2020-01-01T00:04", "A", true)];
        let s = bin_events(&events, &["A".into()], 5, ts("2020-01-01T00:00"), ts("2020-01-02T00:00")).unwrap();
        assert_eq!(s.n_bins(), 288);
        assert_eq!(s.events(0), &[Event::new(1, 2, true)]);
    }

    #[test]
    fn empty_input() {
        let s = bin_events(&[], &["A".into(), "B".into()], 5, ts("2020-01-01T06:00"), ts("2020-01-01T08:00")).unwrap();
        assert_eq!(s.n_bins(), 24);
        assert_eq!(s.origin_hour(), 6);
        assert_eq!(s.total_count(), 0);
    }

    #[test]
    fn errors() {
        let start = ts("2020-01-01T00:00");
        let end = ts("2020-01-01T01:00");
        let wards = vec!["A".to_string()];
        assert!(matches!(
            bin_events(&[ev("2020-01-01T00:10", "Z", false)], &wards, 5, start, end),
            Err(HawkesError::UnknownWard(_))
        ));
        assert!(matches!(
            bin_events(&[ev("2020-01-01T01:00", "A", false)], &wards, 5, start, end),
            Err(HawkesError::OutsideSpan { .. })
        ));
        assert!(bin_events(&[], &wards, 7, start, end).is_err());
        assert!(bin_events(&[], &wards, 5, ts("2020-01-01T00:30"), end).is_err());
    }

    #[test]
    fn csv_reader_reports_rows() {
        let text = "timestamp,ward,alarm\n2020-01-01T00:00,A,0\n2020-01-01 00:07,B,1\nnot-a-date,A,0\n";
        match read_raw_events(text.as_bytes()) {
            Err(HawkesError::Schema { row, message }) => {
                assert_eq!(row, 4);
                assert!(message.contains("not-a-date"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let ok = read_raw_events("timestamp,ward,alarm\n2020-01-01T00:00,A,0\n2020-01-01 00:07,B,1\n".as_bytes()).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(ok[1].alarm);
        assert_eq!(ward_labels(&ok), vec!["A".to_string(), "B".to_string()]);
        assert!(read_raw_events("time,ward,alarm\n".as_bytes()).is_err());
        assert!(read_raw_events("timestamp,ward,alarm\n2020-01-01T00:00,A,2\n".as_bytes()).is_err());
    }
}
