//! Model-free baseline rankers and a histogram mutual-information estimate.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Target};
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_MI_BINS: usize = 20;
const FISHER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Pearson,
    Variance,
    Fisher,
    #[serde(rename = "mi")]
    MutualInfo,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [Self::Pearson, Self::Variance, Self::Fisher, Self::MutualInfo];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pearson => "pearson",
            Self::Variance => "variance",
            Self::Fisher => "fisher",
            Self::MutualInfo => "mi",
        }
    }

    /// Fisher needs class labels; the others work for both tasks.
    pub fn supports(self, target: &Target) -> bool {
        !(self == Self::Fisher && matches!(target, Target::Regression(_)))
    }

    pub fn rank(self, data: &Dataset) -> Result<BaselineRanking> {
        let x = data.x();
        match (self, data.target()) {
            (Self::Pearson, Target::Regression(y)) => pearson_rank(x, y.view()),
            (Self::Pearson, Target::Classification { labels, .. }) => {
                let y: Array1<f64> = labels.iter().map(|&l| l as f64).collect();
                pearson_rank(x, y.view())
            }
            (Self::Variance, _) => Ok(variance_rank(x)),
            (Self::Fisher, Target::Classification { labels, classes }) => {
                Ok(fisher_rank(x, labels, classes.len()))
            }
            (Self::Fisher, Target::Regression(_)) => Err(Error::InvalidConfig(
                "the fisher ranker needs a classification target".into(),
            )),
            (Self::MutualInfo, Target::Regression(y)) => {
                let codes = discretize(y.view(), DEFAULT_MI_BINS);
                Ok(mi_rank(x, &codes, DEFAULT_MI_BINS, DEFAULT_MI_BINS))
            }
            (Self::MutualInfo, Target::Classification { labels, classes }) => {
                Ok(mi_rank(x, labels, classes.len(), DEFAULT_MI_BINS))
            }
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown baseline method '{s}'")))
    }
}

/// Per-feature scores, higher is better, and the resulting order.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRanking {
    pub method: BaselineMethod,
    pub scores: Array1<f64>,
    pub ranking: Vec<usize>,
}

impl BaselineRanking {
    fn new(method: BaselineMethod, scores: Array1<f64>) -> Self {
        let ranking = stats::descending_order(scores.as_slice().unwrap());
        Self { method, scores, ranking }
    }
}

/// `|ρ(X_j, Y)|`; constant features score 0.
pub fn pearson_rank(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<BaselineRanking> {
    let y = y.to_vec();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::ConstantTarget);
    }
    let scores = x.rows().into_iter().map(|row| stats::pearson(&row.to_vec(), &y).abs()).collect();
    Ok(BaselineRanking::new(BaselineMethod::Pearson, scores))
}

/// Population variance per feature.
pub fn variance_rank(x: ArrayView2<'_, f64>) -> BaselineRanking {
    let scores = x.rows().into_iter().map(|row| stats::variance(&row.to_vec())).collect();
    BaselineRanking::new(BaselineMethod::Variance, scores)
}

/// Between-class over within-class scatter, denominator floored at 1e−12.
pub fn fisher_rank(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> BaselineRanking {
    let (means, vars, counts) = crate::relevance::class_moments(x, labels, n_classes);
    let scores = x
        .rows()
        .into_iter()
        .enumerate()
        .map(|(j, row)| {
            let mu = row.sum() / row.len() as f64;
            let (mut between, mut within) = (0.0, 0.0);
            for k in 0..n_classes {
                let nk = counts[k] as f64;
                between += nk * (means[[k, j]] - mu).powi(2);
                within += nk * vars[[k, j]];
            }
            between / within.max(FISHER_FLOOR)
        })
        .collect();
    BaselineRanking::new(BaselineMethod::Fisher, scores)
}

/// Equal-width bin codes over the value range; a constant input lands in bin 0.
pub fn discretize(v: ArrayView1<'_, f64>, bins: usize) -> Vec<usize> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    v.iter()
        .map(|&x| {
            if width > 0.0 {
                (((x - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Plug-in mutual information of two code vectors, in nats.
pub fn mutual_information(a: &[usize], a_bins: usize, b: &[usize], b_bins: usize) -> f64 {
    let n = a.len();
    let mut joint = vec![0u32; a_bins * b_bins];
    let mut ca = vec![0u32; a_bins];
    let mut cb = vec![0u32; b_bins];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * b_bins + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for x in 0..a_bins {
        if ca[x] == 0 {
            continue;
        }
        for y in 0..b_bins {
            let c = joint[x * b_bins + y];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (ca[x] as f64 * cb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Global redundancy of each feature: `Σ_{j≠i} MI(i, j)` on equal-width
/// histograms. Each pair is estimated once, so the pairwise matrix is exactly
/// symmetric.
pub fn mi_redundancy(m: ArrayView2<'_, f64>, bins: usize) -> Result<Array1<f64>> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
    }
    let codes: Vec<Vec<usize>> = m.rows().into_iter().map(|r| discretize(r, bins)).collect();
    let p = codes.len();
    let upper: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            (i + 1..p)
                .map(|j| mutual_information(&codes[i], bins, &codes[j], bins))
                .collect()
        })
        .collect();
    let mut total = Array1::<f64>::zeros(p);
    for i in 0..p {
        for (off, &v) in upper[i].iter().enumerate() {
            total[i] += v;
            total[i + 1 + off] += v;
        }
    }
    Ok(total)
}

/// MI between each binned feature and already-coded target values.
pub fn mi_rank(x: ArrayView2<'_, f64>, target: &[usize], target_bins: usize, bins: usize) -> BaselineRanking {
    let scores = x
        .rows()
        .into_iter()
        .map(|row| mutual_information(&discretize(row, bins), bins, target, target_bins))
        .collect();
    BaselineRanking::new(BaselineMethod::MutualInfo, scores)
}
