//! How much of each event's intensity came from background, ordinary excitation and alarms.

use discrete_hawkes::evaluator::triggering_report;
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let params = MarkedParams::new(
        vec![0.03, 0.03],
        DMatrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 0.25]),
        DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.4]),
        0.2,
        SeasonalProfile::flat(),
    )?;
    let s = simulate_recursive(&SimConfig::new(params.clone(), 50_000, 0.3, 8))?;
    let r = triggering_report(&params, &s)?;
    println!("events            {}", r.total_count);
    println!("background        {:5.1}%", 100.0 * r.avg_background);
    println!("non-alarm self    {:5.1}%", 100.0 * r.avg_nonalarm_self);
    println!("non-alarm cross   {:5.1}%", 100.0 * r.avg_nonalarm_cross);
    println!("alarm self        {:5.1}%", 100.0 * r.avg_alarm_self);
    println!("alarm cross       {:5.1}%", 100.0 * r.avg_alarm_cross);

    let most_excited = r.per_event.iter().min_by(|a, b| a.shares.background.total_cmp(&b.shares.background));
    if let Some(e) = most_excited {
        println!("most excited event: bin {} ward {}, background share {:.3}", e.bin, e.ward, e.shares.background);
    }
    Ok(())
}
