//! Fit IPP, UHP, MHP and MHPA to data simulated from an alarm-marked model.

use discrete_hawkes::estimator::{fit, FitConfig, Variant};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let truth = MarkedParams::new(
        vec![0.04, 0.05],
        DMatrix::from_row_slice(2, 2, &[0.3, 0.15, 0.12, 0.25]),
        DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.25]),
        0.2,
        SeasonalProfile::flat(),
    )?;
    let series = simulate_recursive(&SimConfig::new(truth.clone(), 100_000, 0.3, 6))?;
    println!("truth: mu {:?} beta {} K {:?}", truth.mu, truth.beta, truth.k.as_slice());

    for v in Variant::ALL {
        let r = fit(&series, &SeasonalProfile::flat(), &FitConfig::new(v, 0.0))?;
        let p = &r.params;
        println!(
            "{:>4}: logL {:>12.3}  iters {:>4}  mu {:.4?}  beta {:.3}  K {:.3?}  alpha {:.3?}",
            v.name(),
            r.final_objective(),
            r.n_iters,
            p.mu,
            p.beta,
            p.k.as_slice(),
            p.alpha.as_slice()
        );
    }
    Ok(())
}
