//! End-to-end runs of every subcommand on a synthetic incident log.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use discrete_hawkes::cli::{run_from_args, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;
use serde_json::Value;

fn dhawkes(args: &[&str]) -> i32 {
    run_from_args(std::iter::once("dhawkes").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three wards over 30 days, one CSV row per event (the alarm flag repeated
/// on every row of an alarmed bin).
fn write_log(dir: &Path) -> PathBuf {
    let p = MarkedParams::new(
        vec![0.01, 0.015, 0.008],
        DMatrix::from_row_slice(3, 3, &[0.3, 0.05, 0.0, 0.05, 0.25, 0.05, 0.0, 0.1, 0.3]),
        DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.0, 0.2, 0.0, 0.05, 0.0, 0.2]),
        0.2,
        SeasonalProfile::new((1..=24).map(|h| if (8..20).contains(&h) { 1.5 } else { 0.5 }).collect()).unwrap(),
    )
    .unwrap();
    let s = simulate_recursive(&SimConfig::new(p, 30 * 288, 0.3, 17)).unwrap();
    let origin = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let wards = ["east", "north", "west"];
    let mut text = String::from("timestamp,ward,alarm\n");
    for mb in s.timeline() {
        for h in &mb.hits {
            for i in 0..h.count {
                let at = origin + Duration::minutes(5 * (mb.bin as i64 - 1) + i as i64 % 5);
                text.push_str(&format!("{},{},{}\n", at.format("%Y-%m-%d %H:%M"), wards[h.dim], h.alarm as u8));
            }
        }
    }
    let file = dir.join("log.csv");
    fs::write(&file, text).unwrap();
    file
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let log = write_log(tmp.path());
    let data = tmp.path().join("data");
    let fits = tmp.path().join("fits");

    assert_eq!(dhawkes(&["ingest", "--input", path(&log), "--out", path(&data), "--splits", "0.6,0.2,0.2"]), EXIT_OK);
    for stem in ["series", "train", "val", "test"] {
        assert!(data.join(format!("{stem}.csv")).exists() && data.join(format!("{stem}.json")).exists());
    }
    let manifest = json(&data.join("manifest.json"));
    assert_eq!(manifest["wards"], serde_json::json!(["east", "north", "west"]));
    assert_eq!(manifest["n_bins"], 30 * 288);
    // Splits fall on whole hours.
    assert_eq!(manifest["train"][1].as_u64().unwrap() % 12, 0);
    assert_eq!(manifest["val"][1].as_u64().unwrap() % 12, 0);

    let mut fit_files = Vec::new();
    for v in ["IPP", "UHP", "MHP", "MHPA"] {
        let out = fits.join(v);
        assert_eq!(dhawkes(&["fit", "--data", path(&data), "--variant", v, "--out", path(&out)]), EXIT_OK);
        let f = json(&out.join("fit.json"));
        assert_eq!(f["variant"], v);
        assert!(f["provenance"]["config_hash"].as_str().unwrap().len() == 64);
        let renamed = fits.join(format!("{v}.json"));
        fs::copy(out.join("fit.json"), &renamed).unwrap();
        fit_files.push(renamed);
    }
    let mhpa = fits.join("MHPA.json");

    let cv = tmp.path().join("cv");
    assert_eq!(dhawkes(&["cv", "--data", path(&data), "--grid", "0,0.5,5", "--out", path(&cv)]), EXIT_OK);
    assert!(cv.join("cv.csv").exists());
    let best = json(&cv.join("cv.json"))["best_lambda"].as_f64().unwrap();
    assert!([0.0, 0.5, 5.0].contains(&best));

    let eval = tmp.path().join("eval");
    assert_eq!(
        dhawkes(&["evaluate", "--params", path(&mhpa), "--data", path(&data), "--out", path(&eval), "--seed", "3"]),
        EXIT_OK
    );
    for stem in ["pll", "triggering", "interarrival"] {
        assert!(eval.join(format!("{stem}.csv")).exists() && eval.join(format!("{stem}.json")).exists());
    }
    let pll = json(&eval.join("pll.json"));
    let per_ward: f64 = pll["per_ward"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((per_ward - pll["overall"].as_f64().unwrap()).abs() < 1e-9);

    let fc = tmp.path().join("forecast");
    let fc_args = ["forecast", "--params", path(&mhpa), "--data", path(&data), "--n-sims", "50", "--seed", "4", "--out", path(&fc)];
    assert_eq!(dhawkes(&fc_args), EXIT_OK);
    let first = fs::read(fc.join("forecast.csv")).unwrap();
    assert_eq!(dhawkes(&fc_args), EXIT_OK);
    assert_eq!(first, fs::read(fc.join("forecast.csv")).unwrap());

    let sim = tmp.path().join("sim");
    assert_eq!(
        dhawkes(&["simulate", "--params", path(&mhpa), "--n-bins", "2000", "--p-alarm", "0.3", "--out", path(&sim)]),
        EXIT_OK
    );
    assert!(sim.join("simulated.csv").exists() && sim.join("simulated.json").exists());

    let report = tmp.path().join("report");
    let list = fit_files.iter().map(|p| path(p).to_string()).collect::<Vec<_>>().join(",");
    assert_eq!(dhawkes(&["report", "--data", path(&data), "--fits", &list, "--out", path(&report)]), EXIT_OK);
    let models = json(&report.join("report.json"))["models"].as_array().unwrap().len();
    assert_eq!(models, 4);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let log = write_log(tmp.path());
    let data = tmp.path().join("data");
    assert_eq!(dhawkes(&["ingest", "--input", path(&log), "--out", path(&data)]), EXIT_OK);

    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, format!("data = \"{}\"\nvariant = \"MHP\"\nseed = 5\n", path(&data))).unwrap();
    let out = tmp.path().join("a");
    assert_eq!(dhawkes(&["fit", "--config", path(&cfg), "--out", path(&out)]), EXIT_OK);
    let a = json(&out.join("fit.json"));
    assert_eq!(a["variant"], "MHP");
    assert_eq!(a["provenance"]["seed"], 5);

    let out_b = tmp.path().join("b");
    assert_eq!(dhawkes(&["fit", "--config", path(&cfg), "--variant", "IPP", "--out", path(&out_b)]), EXIT_OK);
    let b = json(&out_b.join("fit.json"));
    assert_eq!(b["variant"], "IPP");
    assert_ne!(a["provenance"]["config_hash"], b["provenance"]["config_hash"]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    assert_eq!(dhawkes(&["fit", "--data", path(&missing), "--out", path(tmp.path())]), EXIT_INPUT);
    assert_eq!(dhawkes(&["frobnicate"]), EXIT_INPUT);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "timestamp,ward,alarm\n2024-01-01 00:00,a,2\n").unwrap();
    assert_eq!(dhawkes(&["ingest", "--input", path(&bad), "--out", path(tmp.path())]), EXIT_INPUT);

    let log = write_log(tmp.path());
    let data = tmp.path().join("data");
    assert_eq!(dhawkes(&["ingest", "--input", path(&log), "--out", path(&data)]), EXIT_OK);
    assert_eq!(
        dhawkes(&["fit", "--data", path(&data), "--max-iters", "2", "--out", path(tmp.path())]),
        EXIT_NOT_CONVERGED
    );
}

#[test]
fn bench_reports_growth() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(dhawkes(&["bench", "--n-bins", "5000", "--out", path(tmp.path())]), EXIT_OK);
    let b = json(&tmp.path().join("bench.json"));
    assert!(b["recursive_ratio"].as_f64().unwrap() > 0.0);
}
