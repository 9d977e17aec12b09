//! Seeded synthetic datasets with known informative features.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::Result;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `y = sin(x0·x1) + x2² + x3 − x4 + 0.1·noise` over `d ≥ 5` standard-normal
/// features; features 0..5 are the informative ones.
pub fn planted_regression(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    assert!(d >= 5, "need at least five features");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((d, n), |_| normal(&mut rng));
    let y: Array1<f64> = (0..n)
        .map(|j| {
            (x[[0, j]] * x[[1, j]]).sin() + x[[2, j]].powi(2) + x[[3, j]] - x[[4, j]] + 0.1 * normal(&mut rng)
        })
        .collect();
    Dataset::regression(x, y, None)
}

/// Balanced Gaussian blobs. Each class has a random center on the first
/// `informative` coordinates (standard deviation `spread`); every coordinate
/// carries unit noise. Sample order is shuffled.
pub fn gaussian_blobs(
    n: usize,
    d: usize,
    informative: usize,
    classes: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = Array2::from_shape_fn((classes, informative), |_| spread * normal(&mut rng));
    let mut labels: Vec<usize> = (0..n).map(|j| j % classes).collect();
    labels.shuffle(&mut rng);
    let x = Array2::from_shape_fn((d, n), |(i, j)| {
        let center = if i < informative { centers[[labels[j], i]] } else { 0.0 };
        center + normal(&mut rng)
    });
    Dataset::classification(x, labels, classes, None)
}

/// Blocks of equicorrelated standard-normal features (pairwise correlation
/// `rho`) followed by `independent` unrelated ones. Returns features × samples.
pub fn correlated_blocks(n: usize, blocks: &[usize], independent: usize, rho: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = blocks.iter().sum::<usize>() + independent;
    let mut x = Array2::<f64>::zeros((p, n));
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    for j in 0..n {
        let mut row = 0;
        for &size in blocks {
            let z = normal(&mut rng);
            for _ in 0..size {
                x[[row, j]] = shared * z + own * normal(&mut rng);
                row += 1;
            }
        }
        for _ in 0..independent {
            x[[row, j]] = normal(&mut rng);
            row += 1;
        }
    }
    x
}

/// `independent` standard-normal features plus an exact copy of feature 0 as the last row.
pub fn with_duplicate(n: usize, independent: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((independent + 1, n));
    for v in x.iter_mut().take(independent * n) {
        *v = normal(&mut rng);
    }
    let first = x.row(0).to_owned();
    x.row_mut(independent).assign(&first);
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(planted_regression(20, 8, 1).unwrap(), planted_regression(20, 8, 1).unwrap());
        assert_ne!(planted_regression(20, 8, 1).unwrap(), planted_regression(20, 8, 2).unwrap());
        let b = gaussian_blobs(30, 6, 2, 3, 2.0, 4).unwrap();
        assert_eq!(b.n_classes(), 3);
        let x = with_duplicate(10, 4, 3);
        assert_eq!(x.row(0), x.row(4));
    }

    #[test]
    fn blocks_have_the_requested_correlation() {
        let x = correlated_blocks(20_000, &[3], 1, 0.95, 5);
        let r = crate::stats::pearson(&x.row(0).to_vec(), &x.row(2).to_vec());
        assert!((r - 0.95).abs() < 0.01);
        let r = crate::stats::pearson(&x.row(0).to_vec(), &x.row(3).to_vec());
        assert!(r.abs() < 0.03);
    }
}
