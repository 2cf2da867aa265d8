//! The unmarked model with a separate decay for every ward pair.

use discrete_hawkes::params::{MarkedParams, UnmarkedParams};
use discrete_hawkes::likelihood::loglik_recursive;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::unmarked::{u_grad, u_loglik, u_loglik_naive, u_simulate, SimMode};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let params = UnmarkedParams::new(
        vec![0.05, 0.04],
        DMatrix::from_row_slice(2, 2, &[0.3, 0.2, 0.05, 0.3]),
        DMatrix::from_row_slice(2, 2, &[0.5, 0.05, 0.2, 0.1]),
    )?;
    let s = u_simulate(&params, 20_000, 9, SimMode::Recursive)?;
    println!("{} events; naive simulator agrees: {}", s.total_count(), s == u_simulate(&params, 20_000, 9, SimMode::Naive)?);
    println!("logL recursive {:.9}, naive {:.9}", u_loglik(&params, &s)?.value, u_loglik_naive(&params, &s)?.value);
    println!("d/dB {:?}", u_grad(&params, &s)?.d_b.as_slice());

    // With every decay equal the model reduces to the shared-decay one without alarms.
    let tied = UnmarkedParams::tied(params.mu.clone(), params.k.clone(), 0.3)?;
    let marked = MarkedParams::new(params.mu.clone(), params.k.clone(), DMatrix::zeros(2, 2), 0.3, SeasonalProfile::flat())?;
    println!("tied {:.12} vs marked {:.12}", u_loglik(&tied, &s)?.value, loglik_recursive(&marked, &s)?.value);
    Ok(())
}
