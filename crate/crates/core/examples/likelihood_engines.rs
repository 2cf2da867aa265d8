//! The three log-likelihood evaluators on one simulated series, with timings.

use std::time::Instant;

use discrete_hawkes::likelihood::{loglik_event_form, loglik_naive, loglik_recursive};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let params = MarkedParams::new(
        vec![0.03, 0.05],
        DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.05, 0.25]),
        DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.0, 0.2]),
        0.2,
        SeasonalProfile::flat(),
    )?;
    let series = simulate_recursive(&SimConfig::new(params.clone(), 20_000, 0.3, 1))?;
    println!("{} bins, {} events", series.n_bins(), series.total_count());

    for (name, eval) in [
        ("naive grid", loglik_naive as fn(&_, &_) -> _),
        ("event form", loglik_event_form),
        ("recursive", loglik_recursive),
    ] {
        let t = Instant::now();
        let v = eval(&params, &series)?;
        println!("{name:>11}: {:.9}  ({:.1} ms)", v.value, t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(())
}
