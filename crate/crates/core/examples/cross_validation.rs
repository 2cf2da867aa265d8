//! Choose the ridge weight on a validation block.

use discrete_hawkes::estimator::{cross_validate_lambda, FitConfig, Variant};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn main() -> discrete_hawkes::Result<()> {
    let truth = MarkedParams::new(
        vec![0.01, 0.012, 0.008],
        DMatrix::from_row_slice(3, 3, &[0.3, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.3]),
        DMatrix::from_element(3, 3, 0.02),
        0.2,
        SeasonalProfile::flat(),
    )?;
    let s = simulate_recursive(&SimConfig::new(truth, 12_000, 0.3, 3))?;
    let train = s.slice(1, 8_400)?;
    let val = s.slice(8_401, 12_000)?;
    println!("train events {}, validation events {}", train.total_count(), val.total_count());

    let grid = [0.0, 0.1, 0.5, 2.0, 10.0];
    let cv = cross_validate_lambda(&train, &val, &SeasonalProfile::flat(), &grid, &FitConfig::new(Variant::Mhpa, 0.0))?;
    for pt in &cv.points {
        println!(
            "lambda_h {:>5}: validation pLL {:>10.3}  penalty {:.4}",
            pt.lambda_h,
            pt.val_pll,
            pt.report.params.ridge_penalty()
        );
    }
    println!("best lambda_h = {}", cv.best_lambda);
    Ok(())
}
