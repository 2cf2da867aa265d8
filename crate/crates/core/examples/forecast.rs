//! Distribution of next-day counts per ward after an observed history.

use discrete_hawkes::evaluator::forecast;
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let params = MarkedParams::new(
        vec![0.02, 0.04],
        DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3]),
        DMatrix::from_element(2, 2, 0.1),
        0.1,
        SeasonalProfile::flat(),
    )?;
    let s = simulate_recursive(&SimConfig::new(params.clone(), 10 * 288, 0.3, 21))?;
    let history = s.slice(1, 9 * 288)?;
    let actual = s.slice(9 * 288 + 1, 10 * 288)?;

    let f = forecast(&params, &history, 288, 500, 0.3, 7)?;
    for w in &f.per_ward {
        let seen = actual.dim_count(w.ward);
        println!(
            "ward {}: mean {:.1}, 95% interval [{}, {}], observed {} ({})",
            w.ward,
            w.mean,
            w.lower,
            w.upper,
            seen,
            if w.covers(seen) { "inside" } else { "outside" }
        );
    }
    Ok(())
}
