mod common;

use common::{dense_of, oracle, rel_err_floor, utheta_of, Gen};
use discrete_hawkes::params::UnmarkedParams;
use discrete_hawkes::unmarked::{u_grad, u_grad_naive, u_loglik, u_loglik_event_form, u_loglik_naive, u_simulate, PairState, SimMode};
use proptest::prelude::*;

fn unmarked_instance(seed: u64, max_bins: usize) -> (UnmarkedParams, discrete_hawkes::series::BinnedSeries) {
    let mut g = Gen::new(seed);
    let dims = g.index(1, 3);
    let n_bins = g.index(1, max_bins);
    let p = common::random_unmarked(&mut g, dims);
    let s = common::random_series(&mut g, dims, n_bins, 0.2);
    (p, s)
}

fn flat(p: &UnmarkedParams) -> Vec<f64> {
    p.mu.iter().chain(p.k.iter()).chain(p.b.iter()).copied().collect()
}

fn from_flat(x: &[f64], dims: usize) -> oracle::UTheta {
    let at = |base: usize, l: usize, m: usize| x[base + m * dims + l];
    oracle::UTheta {
        mu: x[..dims].to_vec(),
        k: (0..dims).map(|l| (0..dims).map(|m| at(dims, l, m)).collect()).collect(),
        b: (0..dims).map(|l| (0..dims).map(|m| at(dims + dims * dims, l, m)).collect()).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn three_evaluators_match_oracle(seed in any::<u64>()) {
        let (p, s) = unmarked_instance(seed, 400);
        let reference = oracle::oracle_u_loglik(&utheta_of(&p), &dense_of(&s)).unwrap();
        for v in [u_loglik_naive(&p, &s), u_loglik_event_form(&p, &s), u_loglik(&p, &s)] {
            prop_assert!(rel_err_floor(v.unwrap().value, reference, 1e-300) <= 1e-9);
        }
    }

    #[test]
    fn gradient_matches_oracle_differences(seed in any::<u64>()) {
        let (p, s) = unmarked_instance(seed, 150);
        let d = dense_of(&s);
        let dims = p.dims();
        let fd = oracle::oracle_grad_fd(|x| oracle::oracle_u_loglik(&from_flat(x, dims), &d), &flat(&p), 1e-4).unwrap();
        let rec = u_grad(&p, &s).unwrap().flatten();
        let naive = u_grad_naive(&p, &s).unwrap().flatten();
        for i in 0..fd.len() {
            prop_assert!(rel_err_floor(rec[i], naive[i], 1.0) <= 1e-10);
            prop_assert!(rel_err_floor(rec[i], fd[i], 1e-2) <= 1e-5, "component {}: {} vs {} vs naive {}", i, rec[i], fd[i], naive[i]);
        }
    }

    #[test]
    fn simulators_agree(seed in any::<u64>()) {
        let (p, _) = unmarked_instance(seed, 1);
        prop_assert_eq!(
            u_simulate(&p, 1200, seed, SimMode::Naive).unwrap(),
            u_simulate(&p, 1200, seed, SimMode::Recursive).unwrap()
        );
    }
}

#[test]
fn state_holds_one_entry_per_pair() {
    for d in 1..=4 {
        assert_eq!(PairState::new(d, 1).n_entries(), d * d);
    }
}

#[test]
fn mode_names_parse() {
    assert_eq!("naive".parse::<SimMode>().unwrap(), SimMode::Naive);
    assert_eq!("recursive".parse::<SimMode>().unwrap(), SimMode::Recursive);
    assert!("fast".parse::<SimMode>().is_err());
}
