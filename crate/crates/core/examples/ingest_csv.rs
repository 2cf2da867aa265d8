//! From a raw `timestamp,ward,alarm` log to binned series and an hourly profile.

use chrono::NaiveDate;
use discrete_hawkes::ingest::{bin_events, read_raw_events, ward_labels};
use discrete_hawkes::season::estimate_seasonal_profile;

const LOG: &str = "timestamp,ward,alarm
2024-05-01 08:03,icu,0
2024-05-01 08:04,icu,1
2024-05-01 08:41,surgery,0
2024-05-01 13:12,icu,0
2024-05-01T22:59:30,surgery,1
2024-05-02 02:15,icu,0
2024-05-02 09:30,surgery,0
";

fn main() -> discrete_hawkes::Result<()> {
    let records = read_raw_events(LOG.as_bytes())?;
    let wards = ward_labels(&records);
    let start = NaiveDate::from_ymd_opt(2024, 5, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let end = NaiveDate::from_ymd_opt(2024, 5, 3).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let series = bin_events(&records, &wards, 5, start, end)?;
    println!("{} records, wards {:?}, {} five-minute bins", records.len(), wards, series.n_bins());
    for (m, ward) in wards.iter().enumerate() {
        for ev in series.events(m) {
            println!("  {ward:>8} bin {:>3} ({:02}:00 hour): count {}, alarm {}", ev.bin, series.hour_of(ev.bin) - 1, ev.count, ev.alarm);
        }
    }
    let season = estimate_seasonal_profile(&series)?;
    println!("hourly profile (sums to 1): {:.2?}", season.values());

    let mut csv = Vec::new();
    series.write_csv(&mut csv)?;
    println!("{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
