//! Goodness of fit through the distribution of times between events.

use discrete_hawkes::estimator::{fit, FitConfig, Variant};
use discrete_hawkes::evaluator::{interarrival_check, InterarrivalConfig};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let truth = MarkedParams::new(
        vec![0.01, 0.01, 0.015],
        DMatrix::from_fn(3, 3, |l, m| if l == m { 0.35 } else { 0.03 }),
        DMatrix::from_fn(3, 3, |l, m| if l == m { 0.2 } else { 0.0 }),
        0.15,
        SeasonalProfile::flat(),
    )?;
    let s = simulate_recursive(&SimConfig::new(truth, 40_000, 0.3, 4))?;
    let train = s.slice(1, 30_000)?;
    let test = s.slice(30_001, 40_000)?;
    let cfg = InterarrivalConfig { n_sims: 20, ..InterarrivalConfig::default() };

    for v in [Variant::Ipp, Variant::Mhpa] {
        let fitted = fit(&train, &SeasonalProfile::flat(), &FitConfig::new(v, 0.0))?.params;
        let r = interarrival_check(&fitted, &train, &test, &cfg)?;
        println!("{} ({} gaps): {}/{} buckets inside mean ± 2 sd", v.name(), r.n_intervals, r.buckets_in_band(), r.buckets.len());
        for b in &r.buckets {
            let upper = b.upper_hours.map_or("inf".to_string(), |u| format!("{u}"));
            let (lo, hi) = b.band();
            println!("  [{:>2}, {:>3}) h  observed {:.3}  band [{:.3}, {:.3}]", b.lower_hours, upper, b.observed, lo, hi);
        }
    }
    Ok(())
}
