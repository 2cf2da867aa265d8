//! Analytic gradient against central finite differences.

use discrete_hawkes::gradient::{check_gradient, grad_recursive};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let truth = MarkedParams::new(
        vec![0.05, 0.04],
        DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.3]),
        DMatrix::from_element(2, 2, 0.1),
        0.3,
        SeasonalProfile::flat(),
    )?;
    let series = simulate_recursive(&SimConfig::new(truth.clone(), 5_000, 0.4, 2))?;

    // Evaluate away from the truth so the gradient is not near zero.
    let probe = MarkedParams { beta: 0.45, mu: vec![0.08, 0.02], ..truth };
    let g = grad_recursive(&probe, &series)?;
    println!("d/dmu    {:?}", g.d_mu);
    println!("d/dK     {:?}", g.d_k.as_slice());
    println!("d/dalpha {:?}", g.d_alpha.as_slice());
    println!("d/dbeta  {}", g.d_beta);
    for step in [1e-3, 1e-5, 1e-6] {
        println!("step {step:e}: max relative error {:.2e}", check_gradient(&probe, &series, step)?);
    }
    Ok(())
}
