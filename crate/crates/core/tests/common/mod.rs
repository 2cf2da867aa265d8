#![allow(dead_code)]

pub mod oracle;

use discrete_hawkes::params::{MarkedParams, UnmarkedParams};
use discrete_hawkes::rng::{Purpose, Stream};
use discrete_hawkes::season::SeasonalProfile;
use discrete_hawkes::series::BinnedSeries;
use nalgebra::DMatrix;
use rand_distr::{Distribution, Poisson};

use oracle::{Dense, Theta, UTheta};

/// Test-side random source for building instances.
pub struct Gen(Stream);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self(Stream::new(seed ^ 0x7e57_0000_0000_0000, 0, 0, Purpose::Count))
    }

    pub fn unit(&mut self) -> f64 {
        self.0.uniform()
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + ((hi_inclusive - lo + 1) as f64 * self.unit()) as usize
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn poisson(&mut self, mean: f64) -> u32 {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).unwrap().sample(&mut self.0) as u32
    }
}

pub fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

pub fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

pub fn theta_of(p: &MarkedParams) -> Theta {
    Theta {
        mu: p.mu.clone(),
        k: rows(&p.k),
        alpha: rows(&p.alpha),
        beta: p.beta,
        season: p.season.values().to_vec(),
    }
}

pub fn utheta_of(p: &UnmarkedParams) -> UTheta {
    UTheta {
        mu: p.mu.clone(),
        k: rows(&p.k),
        b: rows(&p.b),
    }
}

pub fn dense_of(s: &BinnedSeries) -> Dense {
    Dense {
        counts: (1..=s.n_bins()).map(|t| (0..s.dims()).map(|m| s.count_at(m, t)).collect()).collect(),
        alarms: (1..=s.n_bins()).map(|t| (0..s.dims()).map(|m| s.alarm_at(m, t)).collect()).collect(),
        bin_minutes: s.bin_minutes(),
        origin_hour: s.origin_hour(),
    }
}

pub fn random_season(g: &mut Gen) -> SeasonalProfile {
    SeasonalProfile::new((0..24).map(|_| g.range(0.3, 2.0)).collect()).unwrap()
}

/// Parameters with `dims` dimensions and strictly positive entries.
pub fn random_params(g: &mut Gen, dims: usize) -> MarkedParams {
    let mu = (0..dims).map(|_| g.range(0.05, 0.6)).collect();
    let k = DMatrix::from_fn(dims, dims, |_, _| g.range(0.02, 0.4) / dims as f64);
    let alpha = DMatrix::from_fn(dims, dims, |_, _| g.range(0.01, 0.3) / dims as f64);
    let beta = g.range(0.05, 0.95);
    MarkedParams::new(mu, k, alpha, beta, random_season(g)).unwrap()
}

/// Sparse random counts with alarms; bins are empty with probability `1 − density`.
pub fn random_series(g: &mut Gen, dims: usize, n_bins: usize, density: f64) -> BinnedSeries {
    let bin_minutes = [5u32, 10, 15, 30, 60][g.index(0, 4)];
    let origin_hour = g.index(0, 23) as u32;
    let mut counts = vec![vec![0u32; dims]; n_bins];
    let mut alarms = vec![vec![false; dims]; n_bins];
    for t in 0..n_bins {
        for m in 0..dims {
            if g.coin(density) {
                counts[t][m] = 1 + g.poisson(0.7);
                alarms[t][m] = g.coin(0.35);
            }
        }
    }
    BinnedSeries::from_dense(&counts, &alarms, bin_minutes, origin_hour).unwrap()
}

pub fn random_instance(g: &mut Gen, max_dims: usize, max_bins: usize) -> (MarkedParams, BinnedSeries) {
    let dims = g.index(1, max_dims);
    let n_bins = g.index(1, max_bins);
    let density = g.range(0.02, 0.5);
    (random_params(g, dims), random_series(g, dims, n_bins, density))
}

pub fn random_unmarked(g: &mut Gen, dims: usize) -> UnmarkedParams {
    let mu = (0..dims).map(|_| g.range(0.05, 0.6)).collect();
    let k = DMatrix::from_fn(dims, dims, |_, _| g.range(0.02, 0.4) / dims as f64);
    let b = DMatrix::from_fn(dims, dims, |_, _| g.range(0.05, 0.95));
    UnmarkedParams::new(mu, k, b).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300).max(a.abs())
}

/// `|a − b| / max(|a|, |b|, floor)`, with the floor protecting tiny components.
pub fn rel_err_floor(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
