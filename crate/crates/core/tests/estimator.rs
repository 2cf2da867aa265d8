mod common;

use approx::assert_relative_eq;
use common::{dense_of, oracle};
use discrete_hawkes::estimator::{cross_validate_lambda, fit, FitConfig, InitRule, Variant};
use discrete_hawkes::params::MarkedParams;
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::series::BinnedSeries;
use discrete_hawkes::simulator::{simulate_recursive, SimConfig};
use nalgebra::DMatrix;

fn season() -> SeasonalProfile {
    SeasonalProfile::new((1..=24).map(|h| 1.0 + 0.4 * (h as f64 / 24.0 * std::f64::consts::TAU).cos()).collect()).unwrap()
}

fn truth() -> MarkedParams {
    MarkedParams::new(
        vec![0.05, 0.08],
        DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.05, 0.2]),
        DMatrix::from_row_slice(2, 2, &[0.25, 0.05, 0.05, 0.2]),
        0.25,
        season(),
    )
    .unwrap()
}

fn data(n_bins: usize, seed: u64) -> BinnedSeries {
    simulate_recursive(&SimConfig::new(truth(), n_bins, 0.3, seed)).unwrap()
}

#[test]
fn nested_variants_order_their_likelihoods() {
    let s = data(20_000, 1);
    let objective = |v: Variant| {
        let cfg = FitConfig {
            tol: 1e-11,
            ..FitConfig::new(v, 0.0)
        };
        fit(&s, &season(), &cfg).unwrap().final_objective()
    };
    let values: Vec<f64> = Variant::ALL.iter().map(|&v| objective(v)).collect();
    for w in values.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "{values:?}");
    }
}

#[test]
fn poisson_fit_matches_the_closed_form() {
    let s = data(6_000, 2);
    let r = fit(&s, &season(), &FitConfig { tol: 1e-12, ..FitConfig::new(Variant::Ipp, 0.0) }).unwrap();
    let d = dense_of(&s);
    let seasonal_mass: f64 = (1..=s.n_bins()).map(|t| season().at_hour(oracle::hour(&d, t))).sum();
    for m in 0..2 {
        let count: f64 = d.counts.iter().map(|row| row[m] as f64).sum();
        assert_relative_eq!(r.params.mu[m], count / seasonal_mass, max_relative = 1e-4);
    }
}

#[test]
fn masks_hold_fixed_entries_at_zero() {
    let s = data(8_000, 3);
    let get = |v| fit(&s, &season(), &FitConfig::new(v, 0.0)).unwrap().params;
    let ipp = get(Variant::Ipp);
    assert!(ipp.k.iter().chain(ipp.alpha.iter()).all(|x| *x == 0.0));
    let uhp = get(Variant::Uhp);
    assert!(uhp.alpha.iter().all(|x| *x == 0.0));
    assert!(uhp.k[(0, 1)] == 0.0 && uhp.k[(1, 0)] == 0.0);
    assert!(uhp.k[(0, 0)] > 0.0 && uhp.k[(1, 1)] > 0.0);
    let mhp = get(Variant::Mhp);
    assert!(mhp.alpha.iter().all(|x| *x == 0.0));
    assert!(mhp.k.iter().all(|x| *x > 0.0));
}

#[test]
fn objective_trace_never_decreases() {
    let s = data(5_000, 4);
    for v in Variant::ALL {
        for lambda_h in [0.0, 3.0] {
            let r = fit(&s, &season(), &FitConfig::new(v, lambda_h)).unwrap();
            assert!(r.converged);
            assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0]), "{v:?} at {lambda_h}");
        }
    }
}

#[test]
fn jittered_starts_are_seeded() {
    let s = data(4_000, 5);
    let cfg = |seed| FitConfig {
        init: InitRule::Jittered,
        seed,
        tol: 1e-13,
        ..FitConfig::new(Variant::Mhpa, 0.0)
    };
    let a = fit(&s, &season(), &cfg(7)).unwrap();
    assert_eq!(a, fit(&s, &season(), &cfg(7)).unwrap());
    let b = fit(&s, &season(), &cfg(8)).unwrap();
    assert_ne!(a.objective_trace[0], b.objective_trace[0]);
    assert_relative_eq!(a.final_objective(), b.final_objective(), max_relative = 1e-6);
}

#[test]
fn cross_validation_on_scarce_data_stays_finite() {
    let p = MarkedParams::new(
        vec![0.004, 0.006],
        DMatrix::from_element(2, 2, 0.1),
        DMatrix::from_element(2, 2, 0.05),
        0.3,
        SeasonalProfile::flat(),
    )
    .unwrap();
    let s = simulate_recursive(&SimConfig::new(p, 4_800, 0.3, 6)).unwrap();
    let train = s.slice(1, 3_600).unwrap();
    let val = s.slice(3_601, 4_800).unwrap();
    assert!(train.dim_count(0) > 0 && train.dim_count(1) > 0);
    let grid = [0.0, 0.1, 0.5, 2.0, 10.0];
    let cv = cross_validate_lambda(&train, &val, &SeasonalProfile::flat(), &grid, &FitConfig::default()).unwrap();
    assert_eq!(cv.points.len(), grid.len());
    assert!(cv.points.iter().all(|pt| pt.val_pll.is_finite()));
    let best = cv.points.iter().map(|pt| pt.val_pll).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(cv.best().val_pll, best);
    assert!(grid.contains(&cv.best_lambda));
}
