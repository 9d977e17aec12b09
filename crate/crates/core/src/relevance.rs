//! Relevance of each expanded feature to the target.
//!
//! Regression uses the conditional variance of `Y` given one feature under a
//! bivariate Gaussian fit, `σ_YY − σ_YM² / σ_MM`; smaller means more
//! relevant. Classification uses the within-class standard deviation of each
//! feature, plus between-class spread statistics used later as weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Feature variances below this are treated as constant features.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Conditional variance `L_i` per row of `mhat` (`p × n`).
///
/// A feature with (near) zero variance explains nothing and scores `σ_YY`.
pub fn regression_relevance(mhat: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = mhat.ncols();
    if y.len() != n {
        return Err(Error::Dimension(format!("{n} samples but {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::Dimension("need at least two samples".into()));
    }
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::ConstantTarget);
    }
    let nf = n as f64;
    let y_mean = y.sum() / nf;
    let yc: Array1<f64> = y.mapv(|v| v - y_mean);
    let var_y = yc.dot(&yc) / nf;

    Ok(mhat
        .rows()
        .into_iter()
        .map(|row| {
            let mean = row.sum() / nf;
            let (mut var_m, mut cov) = (0.0, 0.0);
            for (&m, &yv) in row.iter().zip(yc.iter()) {
                let mc = m - mean;
                var_m += mc * mc;
                cov += mc * yv;
            }
            var_m /= nf;
            cov /= nf;
            if var_m < DEGENERATE_VARIANCE {
                var_y
            } else {
                (var_y - cov * cov / var_m).clamp(0.0, var_y)
            }
        })
        .collect())
}

/// Per-class means, population variances and sample counts (`c × p`, `c × p`, `c`).
pub fn class_moments(
    mhat: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let p = mhat.nrows();
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    let mut means = Array2::<f64>::zeros((n_classes, p));
    let mut vars = Array2::<f64>::zeros((n_classes, p));
    for (i, row) in mhat.rows().into_iter().enumerate() {
        let mut sums = vec![0.0; n_classes];
        for (&v, &l) in row.iter().zip(labels) {
            sums[l] += v;
        }
        for k in 0..n_classes {
            if counts[k] > 0 {
                means[[k, i]] = sums[k] / counts[k] as f64;
            }
        }
        let mut sq = vec![0.0; n_classes];
        for (&v, &l) in row.iter().zip(labels) {
            let c = v - means[[l, i]];
            sq[l] += c * c;
        }
        for k in 0..n_classes {
            if counts[k] > 0 {
                vars[[k, i]] = sq[k] / counts[k] as f64;
            }
        }
    }
    (means, vars, counts)
}

/// `c × p` within-class standard deviations. Singleton and empty classes give 0.
pub fn classwise_relevance(mhat: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> Array2<f64> {
    let (_, vars, _) = class_moments(mhat, labels, n_classes);
    vars.mapv(f64::sqrt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterClassStats {
    /// Variance over classes of the class means, per feature.
    pub sigma_mu: Array1<f64>,
    /// Variance over classes of the class variances, per feature.
    pub sigma_sigma: Array1<f64>,
}

/// Between-class spread of per-class means and variances. Classes without
/// samples are left out.
pub fn interclass_stats(mhat: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> InterClassStats {
    let (means, vars, counts) = class_moments(mhat, labels, n_classes);
    let present: Vec<usize> = (0..n_classes).filter(|&k| counts[k] > 0).collect();
    let spread = |m: &Array2<f64>, i: usize| {
        let vals: Vec<f64> = present.iter().map(|&k| m[[k, i]]).collect();
        crate::stats::variance(&vals)
    };
    let p = mhat.nrows();
    InterClassStats {
        sigma_mu: (0..p).map(|i| spread(&means, i)).collect(),
        sigma_sigma: (0..p).map(|i| spread(&vars, i)).collect(),
    }
}
