//! Straight-line reference implementations and the self-check sweep.
//!
//! Everything here is written as plain loops with no blocking and no
//! parallelism, so it can stand as an independent check on the fast paths.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::redundancy::{redundancy_bruteforce, redundancy_compact};
use crate::rnp::{NetworkParams, RnpNetwork};

/// Propagation one sample, one node, one round at a time.
pub fn propagate_unrolled(w: ArrayView2<'_, f64>, rounds: usize, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let p = w.nrows();
    let (d, n) = x.dim();
    let mut out = Array2::<f64>::zeros((p, n));
    for col in 0..n {
        let mut signal = vec![0.0; p];
        for i in 0..d {
            signal[i] = x[[i, col]];
        }
        let mut internal = vec![0.0; p];
        let mut acc = signal.clone();
        for _ in 0..rounds {
            let mut next = vec![0.0; p];
            for i in 0..p {
                let mut drive = 0.0;
                for k in 0..p {
                    drive = drive + w[[i, k]] * signal[k];
                }
                let a = internal[i] + drive;
                next[i] = if a > 0.0 { a } else { 0.0 };
                internal[i] = a - next[i];
                acc[i] = acc[i] + next[i];
            }
            signal = next;
        }
        for i in 0..p {
            out[[i, col]] = acc[i];
        }
    }
    out
}

/// `|(W + I)^rounds|` by repeated naive products, then restricted to the first `d` columns.
pub fn influence_naive(w: ArrayView2<'_, f64>, d: usize, rounds: usize) -> Array2<f64> {
    let p = w.nrows();
    let mut step = w.to_owned();
    for i in 0..p {
        step[[i, i]] += 1.0;
    }
    let mut power = step.clone();
    for _ in 1..rounds {
        let mut next = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..p {
                    s = s + power[[i, k]] * step[[k, j]];
                }
                next[[i, j]] = s;
            }
        }
        power = next;
    }
    Array2::from_shape_fn((p, d), |(i, j)| power[[i, j]].abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyCase {
    pub p: usize,
    pub n: usize,
    pub epsilon: f64,
    pub seed: u64,
}

/// The compact-vs-brute-force sweep: `count` seeded matrices cycling through
/// the feature counts up to `max_p`, with `n` drawn from `p/2..=4p`.
pub fn redundancy_cases(count: usize, max_p: usize, seed: u64) -> Vec<RedundancyCase> {
    let sizes: Vec<usize> = [1, 2, 8, 16, 32, 64].into_iter().filter(|&p| p <= max_p.max(1)).collect();
    let epsilons = [0.1, 0.5, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|c| {
            let p = sizes[c % sizes.len()];
            let n = rng.random_range((p / 2).max(1)..=4 * p);
            RedundancyCase { p, n, epsilon: epsilons[(c / sizes.len()) % 3], seed: seed.wrapping_add(c as u64) }
        })
        .collect()
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub case: usize,
    pub index: usize,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub redundancy_cases: usize,
    /// Worst `|compact − brute| / (1 + |brute|)` over all cases and features.
    pub redundancy_worst: Mismatch,
    pub redundancy_tolerance: f64,
    pub propagation_cases: usize,
    /// First propagation case whose output differs from the unrolled loop, if any.
    pub propagation_mismatch: Option<Mismatch>,
    pub influence_mismatch: Option<Mismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.redundancy_worst.relative_error < self.redundancy_tolerance
            && self.propagation_mismatch.is_none()
            && self.influence_mismatch.is_none()
    }
}

/// Settings for [`run_oracle_checks`]. `perturb` adds a small error to one
/// compact score of the first case, to show the sweep catches it.
#[derive(Debug, Clone)]
pub struct OracleSettings {
    pub cases: usize,
    pub max_p: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub perturb: Option<usize>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { cases: 50, max_p: 64, seed: 7, tolerance: 1e-8, perturb: None }
    }
}

/// Worst relative error of compact redundancy against brute force for one matrix.
pub fn redundancy_discrepancy(m: ArrayView2<'_, f64>, epsilon: f64) -> Result<(usize, f64)> {
    let compact = redundancy_compact(m, epsilon)?;
    let brute = redundancy_bruteforce(m, epsilon)?;
    Ok(worst(&compact.q, &brute.q))
}

fn worst(got: &Array1<f64>, want: &Array1<f64>) -> (usize, f64) {
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / (1.0 + w.abs()))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 || e.is_nan() { (i, e) } else { best })
}

/// Runs the redundancy sweep plus 20 propagation and influence cases.
pub fn run_oracle_checks(settings: &OracleSettings) -> Result<OracleReport> {
    if settings.cases == 0 {
        return Err(Error::InvalidConfig("oracle sweep needs at least one case".into()));
    }
    let mut redundancy_worst = Mismatch { case: 0, index: 0, relative_error: 0.0 };
    for (c, case) in redundancy_cases(settings.cases, settings.max_p, settings.seed).iter().enumerate() {
        let m = gaussian_matrix(case.p, case.n, case.seed);
        let mut compact = redundancy_compact(m.view(), case.epsilon)?.q;
        if c == 0 {
            if let Some(i) = settings.perturb {
                let i = i.min(compact.len() - 1);
                compact[i] += 1e-6 * (1.0 + compact[i].abs());
            }
        }
        let brute = redundancy_bruteforce(m.view(), case.epsilon)?.q;
        let (index, err) = worst(&compact, &brute);
        if err > redundancy_worst.relative_error || err.is_nan() {
            redundancy_worst = Mismatch { case: c, index, relative_error: err };
        }
    }

    let propagation_cases = 20;
    let mut propagation_mismatch = None;
    let mut influence_mismatch = None;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    for c in 0..propagation_cases {
        let d = rng.random_range(1..=8);
        let size = rng.random_range(d + 1..=16.max(d + 1));
        let mut params = NetworkParams::with_size(d, size)?;
        params.rounds = rng.random_range(1..=4);
        params.density = rng.random_range(0.1..=1.0);
        params.seed = rng.random();
        let net = RnpNetwork::build(&params)?;
        let x = gaussian_matrix(d, rng.random_range(1..=6), rng.random());
        let fast = net.propagate(x.view())?;
        let slow = propagate_unrolled(net.weights(), net.rounds(), x.view());
        if propagation_mismatch.is_none() {
            if let Some(index) = first_difference(&fast, &slow) {
                propagation_mismatch = Some(Mismatch { case: c, index, relative_error: f64::NAN });
            }
        }
        let e = net.influence_matrix();
        let e_ref = influence_naive(net.weights(), d, net.rounds());
        if influence_mismatch.is_none() {
            if let Some(index) = first_difference(&e, &e_ref) {
                influence_mismatch = Some(Mismatch { case: c, index, relative_error: f64::NAN });
            }
        }
    }

    Ok(OracleReport {
        redundancy_cases: settings.cases,
        redundancy_worst,
        redundancy_tolerance: settings.tolerance,
        propagation_cases,
        propagation_mismatch,
        influence_mismatch,
    })
}

/// Flat index of the first entry that differs bitwise, if any.
fn first_difference(a: &Array2<f64>, b: &Array2<f64>) -> Option<usize> {
    if a.dim() != b.dim() {
        return Some(0);
    }
    a.iter().zip(b.iter()).position(|(x, y)| x.to_bits() != y.to_bits())
}
