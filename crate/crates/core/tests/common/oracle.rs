//! Brute-force reference evaluations on small instances.
//!
//! Everything here works on plain dense arrays and recomputes each quantity
//! from its definition: no recursion, no closed-form compensator, nothing
//! borrowed from the library's numerics.

pub const MAX_DIMS: usize = 3;
pub const MAX_BINS: usize = 1000;

/// Dense data: `counts[t-1][m]`, `alarms[t-1][m]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub counts: Vec<Vec<u32>>,
    pub alarms: Vec<Vec<bool>>,
    pub bin_minutes: u32,
    pub origin_hour: u32,
}

impl Dense {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }
}

/// Marked parameters as plain arrays; `k[l][m]`, `alpha[l][m]`, `season[h-1]`.
#[derive(Debug, Clone)]
pub struct Theta {
    pub mu: Vec<f64>,
    pub k: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: f64,
    pub season: Vec<f64>,
}

/// Per-pair decay, constant background.
#[derive(Debug, Clone)]
pub struct UTheta {
    pub mu: Vec<f64>,
    pub k: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

fn check_size(dims: usize, n: usize) -> Result<(), String> {
    if dims > MAX_DIMS || n > MAX_BINS {
        return Err(format!("oracle instance too large: {dims} dimensions × {n} bins"));
    }
    Ok(())
}

/// Hour of day (1..=24) of bin `t`, by counting minutes from midnight.
pub fn hour(d: &Dense, t: usize) -> usize {
    let minutes = d.origin_hour as usize * 60 + (t - 1) * d.bin_minutes as usize;
    (minutes / 60) % 24 + 1
}

fn geometric(beta: f64, lag: usize) -> f64 {
    beta * (1.0 - beta).powf(lag as f64 - 1.0)
}

pub fn oracle_intensity(p: &Theta, d: &Dense, t: usize, m: usize) -> Result<f64, String> {
    check_size(p.mu.len(), d.n_bins())?;
    let mut lambda = p.mu[m] * p.season[hour(d, t) - 1];
    for s in 1..t {
        for l in 0..p.mu.len() {
            let y = d.counts[s - 1][l] as f64;
            let weight = if d.alarms[s - 1][l] { p.k[l][m] + p.alpha[l][m] } else { p.k[l][m] };
            lambda += y * weight * geometric(p.beta, t - s);
        }
    }
    Ok(lambda)
}

fn ln_fact(y: u32) -> f64 {
    (2..=y).map(|k| (k as f64).ln()).sum()
}

fn poisson_term(y: u32, lambda: f64, factorial: bool) -> f64 {
    let head = if y == 0 { -lambda } else { y as f64 * lambda.ln() - lambda };
    if factorial {
        head - ln_fact(y)
    } else {
        head
    }
}

/// `Σ_t Σ_m (Y log λ − λ)`; with `factorial` also `− log Y!`.
pub fn oracle_loglik(p: &Theta, d: &Dense, factorial: bool) -> Result<f64, String> {
    check_size(p.mu.len(), d.n_bins())?;
    let mut total = 0.0;
    for t in 1..=d.n_bins() {
        for m in 0..p.mu.len() {
            total += poisson_term(d.counts[t - 1][m], oracle_intensity(p, d, t, m)?, factorial);
        }
    }
    Ok(total)
}

pub fn oracle_u_intensity(p: &UTheta, d: &Dense, t: usize, m: usize) -> f64 {
    let mut lambda = p.mu[m];
    for s in 1..t {
        for l in 0..p.mu.len() {
            lambda += d.counts[s - 1][l] as f64 * p.k[l][m] * geometric(p.b[l][m], t - s);
        }
    }
    lambda
}

pub fn oracle_u_loglik(p: &UTheta, d: &Dense) -> Result<f64, String> {
    check_size(p.mu.len(), d.n_bins())?;
    let mut total = 0.0;
    for t in 1..=d.n_bins() {
        for m in 0..p.mu.len() {
            total += poisson_term(d.counts[t - 1][m], oracle_u_intensity(p, d, t, m), false);
        }
    }
    Ok(total)
}

/// Five-point central differences of `f` around `x`, one coordinate at a time.
pub fn oracle_grad_fd<F>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>, String>
where
    F: Fn(&[f64]) -> Result<f64, String>,
{
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let at = |offset: f64| {
            let mut y = x.to_vec();
            y[i] += offset;
            f(&y)
        };
        let near = at(step)? - at(-step)?;
        let far = at(2.0 * step)? - at(-2.0 * step)?;
        out.push((8.0 * near - far) / (12.0 * step));
    }
    Ok(out)
}

/// Stationary mean counts per bin, solving `(I − Bᵀ) m = μ s̄` with
/// `B = K + p α` by Gaussian elimination.
pub fn oracle_branching_mean(mu_sbar: &[f64], k: &[Vec<f64>], alpha: &[Vec<f64>], p: f64) -> Result<Vec<f64>, String> {
    let n = mu_sbar.len();
    check_size(n, 0)?;
    // a[i][j] = δ_ij − B[j][i], augmented with the right-hand side.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| (i == j) as u8 as f64 - (k[j][i] + p * alpha[j][i]))
                .collect();
            row.push(mu_sbar[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err("singular branching system".into());
        }
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Proportion of `values` in `[k·width, (k+1)·width)` for `k < n_buckets`,
/// with everything beyond in a final bucket.
pub fn oracle_histogram(values: &[f64], width: f64, n_buckets: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_buckets + 1];
    for &v in values {
        let mut k = 0;
        while k < n_buckets && v >= (k + 1) as f64 * width {
            k += 1;
        }
        counts[k] += 1;
    }
    counts.iter().map(|&c| c as f64 / values.len().max(1) as f64).collect()
}
