//! Seeded simulation: both simulators give the same series, and history conditions the future.

use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{estimate_alarm_prob, simulate_naive, simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let season = SeasonalProfile::new((1..=24).map(|h| if (8..=20).contains(&h) { 1.6 } else { 0.4 }).collect())?;
    let params = MarkedParams::new(
        vec![0.02, 0.03, 0.02],
        DMatrix::from_row_slice(3, 3, &[0.3, 0.05, 0.0, 0.05, 0.3, 0.05, 0.0, 0.05, 0.3]),
        DMatrix::from_element(3, 3, 0.05),
        0.15,
        season,
    )?;
    println!("spectral radius with p = 0.3: {:.3}", params.spectral_radius(0.3));

    let cfg = SimConfig::new(params.clone(), 8_640, 0.3, 11);
    let a = simulate_naive(&cfg)?;
    let b = simulate_recursive(&cfg)?;
    println!("identical: {}", a == b);
    for m in 0..3 {
        println!("ward {m}: {} events in {} bins", b.dim_count(m), b.events(m).len());
    }
    println!("alarm fraction {:.3}", estimate_alarm_prob(&b)?);

    let next_day = simulate_recursive(&SimConfig::new(params, 288, 0.3, 12).with_history(b))?;
    println!("with history: {} bins, {} events in the new day", next_day.n_bins(), next_day.slice(8_641, 8_928)?.total_count());
    Ok(())
}
