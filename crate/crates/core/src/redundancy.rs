//! Coding-rate redundancy.
//!
//! The coding rate of a feature set is `½ logdet(I + p/(n ε²) · M Mᵀ)` over
//! the `p × p` feature Gram. A feature's redundancy score is the drop in
//! coding rate when it is removed; the smaller the drop, the more the other
//! features already cover it.
//!
//! [`redundancy_compact`] gets all `p` scores from one factorization of
//! `G = I + (p−1)/(n ε²) · Gram` through `logdet G_{−i} = logdet G + ln (G⁻¹)_ii`.
//! [`redundancy_bruteforce`] deletes each row and recomputes; it exists as a
//! check on the compact route.
//!
//! Samples are put in a canonical column order before any arithmetic, so the
//! scores are exactly invariant to sample order. Rows with identical values
//! share one score.

use std::cmp::Ordering;
use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, GramLower, SpdFactor};

pub const DEFAULT_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyScores {
    /// Coding-rate drop per feature.
    pub q: Array1<f64>,
    /// Coding rate of the full matrix.
    pub r_full: f64,
}

fn check_inputs(m: ArrayView2<'_, f64>, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("input has non-finite entries".into()));
    }
    Ok(())
}

/// Columns sorted lexicographically, so any permutation of the samples maps
/// to the same matrix.
fn canonical_columns(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let m = m.as_standard_layout();
    let (p, n) = m.dim();
    let data = m.as_slice().expect("standard layout");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (0..p)
            .map(|r| data[r * n + a].total_cmp(&data[r * n + b]))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    let mut out = Array2::<f64>::zeros((p, n));
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let src = &data[r * n..(r + 1) * n];
        for (dst, &o) in row.iter_mut().zip(&order) {
            *dst = src[o];
        }
    }
    out
}

/// `½ logdet(I + coef · m mᵀ)`, factoring whichever Gram side is smaller.
fn half_logdet_shifted(m: ArrayView2<'_, f64>, coef: f64) -> Result<f64> {
    let factor = if m.nrows() <= m.ncols() {
        SpdFactor::identity_plus_gram(m, coef)?
    } else {
        SpdFactor::identity_plus_gram(m.t(), coef)?
    };
    Ok(0.5 * factor.logdet())
}

fn rate_coefficient(p: usize, n: usize, epsilon: f64) -> f64 {
    p as f64 / (n as f64 * epsilon * epsilon)
}

/// Coding rate of `m` (`p × n`, rows are features). An empty feature set codes at rate 0.
pub fn coding_rate(m: ArrayView2<'_, f64>, epsilon: f64) -> Result<f64> {
    check_inputs(m, epsilon)?;
    let (p, n) = m.dim();
    if p == 0 {
        return Ok(0.0);
    }
    if n == 0 {
        return Err(Error::Dimension("coding rate needs at least one sample".into()));
    }
    let m = canonical_columns(m);
    half_logdet_shifted(m.view(), rate_coefficient(p, n, epsilon))
}

/// All redundancy scores from a single factorization.
pub fn redundancy_compact(m: ArrayView2<'_, f64>, epsilon: f64) -> Result<RedundancyScores> {
    check_inputs(m, epsilon)?;
    let (p, n) = m.dim();
    if p == 0 || n == 0 {
        return Err(Error::Dimension(format!("redundancy needs a non-empty matrix, got {p}x{n}")));
    }
    let m = canonical_columns(m);
    let full_coef = rate_coefficient(p, n, epsilon);
    let reduced_coef = rate_coefficient(p - 1, n, epsilon);
    let (r_full, g) = if p <= n {
        // both determinants live on the same p × p Gram
        let gram = GramLower::new(m.view())?;
        let r_full = 0.5 * gram.shifted_factor(full_coef)?.logdet();
        (r_full, gram.into_shifted_factor(reduced_coef)?)
    } else {
        let r_full = half_logdet_shifted(m.view(), full_coef)?;
        (r_full, SpdFactor::identity_plus_gram(m.view(), reduced_coef)?)
    };
    let logdet_g = g.logdet();
    let mut q: Array1<f64> = g
        .inverse_diagonal()
        .mapv(|inv_ii| r_full - 0.5 * (logdet_g + inv_ii.ln()));
    share_duplicate_scores(m.view(), &mut q);
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("redundancy scores are not finite".into()));
    }
    Ok(RedundancyScores { q, r_full })
}

/// Identical rows have identical true scores; give them the first one's value
/// so rounding inside the factorization cannot split them.
fn share_duplicate_scores(m: ArrayView2<'_, f64>, q: &mut Array1<f64>) {
    // adding 0.0 folds -0.0 into +0.0
    let bits = |v: f64| (v + 0.0).to_bits();
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, row) in m.rows().into_iter().enumerate() {
        let key = row
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, &v| (h ^ bits(v)).wrapping_mul(0x0100_0000_01b3));
        let owners = buckets.entry(key).or_default();
        let same = owners
            .iter()
            .copied()
            .find(|&o| m.row(o).iter().zip(row.iter()).all(|(&a, &b)| bits(a) == bits(b)));
        match same {
            Some(o) => q[i] = q[o],
            None => owners.push(i),
        }
    }
}

/// Half log-determinant through the plain row-oriented Cholesky, on the `p × p` Gram.
fn half_logdet_naive(m: ArrayView2<'_, f64>, coef: f64) -> Result<f64> {
    let p = m.nrows();
    if p == 0 {
        return Ok(0.0);
    }
    let mut g = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let dot: f64 = m.row(i).iter().zip(m.row(j).iter()).map(|(a, b)| a * b).sum();
            g[[i, j]] = coef * dot;
            g[[j, i]] = coef * dot;
        }
        g[[i, i]] += 1.0;
    }
    let l = cholesky_lower(g.view())?;
    Ok(l.diag().iter().map(|v| v.ln()).sum())
}

/// Deletes each row in turn and recomputes the coding rate. `O(p⁴)`; a check
/// on [`redundancy_compact`], not something to run on real data.
pub fn redundancy_bruteforce(m: ArrayView2<'_, f64>, epsilon: f64) -> Result<RedundancyScores> {
    check_inputs(m, epsilon)?;
    let (p, n) = m.dim();
    if p == 0 || n == 0 {
        return Err(Error::Dimension(format!("redundancy needs a non-empty matrix, got {p}x{n}")));
    }
    let r_full = half_logdet_naive(m, rate_coefficient(p, n, epsilon))?;
    let reduced_coef = rate_coefficient(p - 1, n, epsilon);
    let mut q = Array1::<f64>::zeros(p);
    for i in 0..p {
        let keep: Vec<usize> = (0..p).filter(|&k| k != i).collect();
        let reduced = m.select(Axis(0), &keep);
        q[i] = r_full - half_logdet_naive(reduced.view(), reduced_coef)?;
    }
    Ok(RedundancyScores { q, r_full })
}

/// Compact redundancy per class, each on that class's samples only, with the
/// class sample count as `n`. Classes without samples yield `None`. Classes
/// run in parallel; each factorization is sequential, so results do not
/// depend on the worker count.
pub fn classwise_redundancy(
    m: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    epsilon: f64,
) -> Result<Vec<Option<RedundancyScores>>> {
    if labels.len() != m.ncols() {
        return Err(Error::Dimension(format!("{} samples but {} labels", m.ncols(), labels.len())));
    }
    (0..n_classes)
        .into_par_iter()
        .map(|k| {
            let cols: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == k).collect();
            if cols.is_empty() {
                return Ok(None);
            }
            redundancy_compact(m.select(Axis(1), &cols).view(), epsilon).map(Some)
        })
        .collect()
}
