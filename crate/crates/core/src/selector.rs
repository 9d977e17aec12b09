//! Score fusion, top-r selection and back-projection onto the inputs.
//!
//! [`select_features`] runs the whole pipeline: expand the inputs through a
//! random network, score every expanded feature for relevance and redundancy,
//! keep the best `r` percent, and credit each original feature with the
//! influence it has on the kept ones.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{minmax_normalize, Dataset, Target};
use crate::error::{Error, Result};
use crate::redundancy::{classwise_redundancy, redundancy_compact, DEFAULT_EPSILON};
use crate::relevance::{classwise_relevance, interclass_stats, regression_relevance, InterClassStats};
use crate::rnp::{default_size, NetworkParams, RnpNetwork, DEFAULT_DENSITY, DEFAULT_ROUNDS, DEFAULT_SPECTRAL_TARGET};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Network size; `None` picks `min(2d, d + 1000)`.
    pub p: Option<usize>,
    pub rounds: usize,
    pub epsilon: f64,
    /// Weight of the redundancy term in the fused score.
    pub lambda1: f64,
    /// Weight of the between-class variance spread in classification.
    pub lambda2: f64,
    /// Percentage of expanded features kept.
    pub r_percent: f64,
    pub density: f64,
    pub spectral_target: f64,
    /// Keep the unscaled standard-normal weights and ignore `spectral_target`.
    #[serde(default)]
    pub raw_weights: bool,
    pub seed: u64,
    pub use_rnp: bool,
    pub use_cr: bool,
    pub normalize_inputs: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            p: None,
            rounds: DEFAULT_ROUNDS,
            epsilon: DEFAULT_EPSILON,
            lambda1: 1.0,
            lambda2: 1.0,
            r_percent: 30.0,
            density: DEFAULT_DENSITY,
            spectral_target: DEFAULT_SPECTRAL_TARGET,
            raw_weights: false,
            seed: 42,
            use_rnp: true,
            use_cr: true,
            normalize_inputs: true,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.r_percent > 0.0 && self.r_percent <= 100.0) {
            return bad(format!("r must be in (0, 100], got {}", self.r_percent));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad(format!("lambda1 must be non-negative, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad(format!("lambda2 must be non-negative, got {}", self.lambda2));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must be in (0, 1], got {}", self.density));
        }
        if !(self.spectral_target > 0.0 && self.spectral_target.is_finite()) {
            return bad(format!("spectral target must be positive, got {}", self.spectral_target));
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        Ok(())
    }

    /// Network size used for `d` inputs.
    pub fn resolved_size(&self, d: usize) -> usize {
        self.p.unwrap_or_else(|| default_size(d))
    }

    /// Network parameters for `d` inputs. Fails if the size leaves no extra nodes.
    pub fn network_params(&self, d: usize) -> Result<NetworkParams> {
        let mut params = NetworkParams::with_size(d, self.resolved_size(d))?;
        params.density = self.density;
        params.seed = self.seed;
        params.spectral_target = (!self.raw_weights).then_some(self.spectral_target);
        params.rounds = self.rounds;
        Ok(params)
    }
}

/// Importance per original feature, and the features ordered best first.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceScores {
    pub h: Array1<f64>,
    pub ranking: Vec<usize>,
}

/// `S = L̃ − λ1 · Q̃ · (1 − e^{−Q̃})` on min-max normalized inputs. Smaller is better.
pub fn fuse_scores(l: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>, lambda1: f64) -> Array1<f64> {
    assert_eq!(l.len(), q.len(), "relevance and redundancy lengths differ");
    let l = stats::minmax(&l.to_vec());
    let q = stats::minmax(&q.to_vec());
    l.iter()
        .zip(&q)
        .map(|(&lv, &qv)| lv - lambda1 * qv * (1.0 - (-qv).exp()))
        .collect()
}

/// The `max(1, ⌊p·r/100⌋)` smallest scores, ties to the smaller index.
/// Returned in ascending index order.
pub fn top_r_indices(s: ArrayView1<'_, f64>, r_percent: f64) -> Vec<usize> {
    let p = s.len();
    let m = ((p as f64 * r_percent / 100.0).floor() as usize).clamp(1, p.max(1));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    order.truncate(m.min(p));
    order.sort_unstable();
    order
}

/// `H_j = Σ_i weight_i · rows[i, j]`, summed in row order.
fn accumulate(rows: ArrayView2<'_, f64>, weights: Option<&[f64]>) -> Array1<f64> {
    let mut h = Array1::<f64>::zeros(rows.ncols());
    for (i, row) in rows.rows().into_iter().enumerate() {
        match weights {
            Some(w) => h.scaled_add(w[i], &row),
            None => h += &row,
        }
    }
    h
}

/// Descending `h`; exact ties go to the smaller `tie_key` (when given), then the smaller index.
fn rank_importance(h: &Array1<f64>, tie_key: Option<&[f64]>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..h.len()).collect();
    idx.sort_by(|&a, &b| {
        h[b].total_cmp(&h[a])
            .then_with(|| tie_key.map_or(Ordering::Equal, |k| k[a].total_cmp(&k[b])))
            .then(a.cmp(&b))
    });
    idx
}

/// Sums the rows of `e` (`p × d`) picked by `selected`.
pub fn back_project_regression(e: ArrayView2<'_, f64>, selected: &[usize]) -> ImportanceScores {
    let h = accumulate(e.select(Axis(0), selected).view(), None);
    let ranking = rank_importance(&h, None);
    ImportanceScores { h, ranking }
}

/// Per-feature class-separation weight `σ̃μ + λ2 · σ̃σ`, each term min-max normalized.
pub fn class_weights(stats: &InterClassStats, lambda2: f64) -> Array1<f64> {
    let mu = stats::minmax(&stats.sigma_mu.to_vec());
    let sigma = stats::minmax(&stats.sigma_sigma.to_vec());
    mu.iter().zip(&sigma).map(|(m, s)| m + lambda2 * s).collect()
}

/// Per class, the top-r rows of `e` weighted by [`class_weights`]; classes summed in order.
pub fn back_project_classification(
    e: ArrayView2<'_, f64>,
    sk: ArrayView2<'_, f64>,
    stats: &InterClassStats,
    r_percent: f64,
    lambda2: f64,
) -> ImportanceScores {
    let w = class_weights(stats, lambda2);
    back_project_weighted(e, sk, w.view(), r_percent)
}

/// [`back_project_classification`] with the per-feature weights given directly.
pub fn back_project_weighted(
    e: ArrayView2<'_, f64>,
    sk: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    r_percent: f64,
) -> ImportanceScores {
    let mut h = Array1::<f64>::zeros(e.ncols());
    for s in sk.rows() {
        let selected = top_r_indices(s, r_percent);
        let w: Vec<f64> = selected.iter().map(|&i| weights[i]).collect();
        h += &accumulate(e.select(Axis(0), &selected).view(), Some(&w));
    }
    let ranking = rank_importance(&h, None);
    ImportanceScores { h, ranking }
}

/// Source of influence rows: a real network, or the identity when the
/// expansion is switched off.
enum Influence<'a> {
    Network(&'a RnpNetwork),
    Identity(usize),
}

impl Influence<'_> {
    fn rows(&self, idx: &[usize]) -> Array2<f64> {
        match self {
            Influence::Network(net) => net.influence_rows(idx),
            Influence::Identity(d) => {
                let mut out = Array2::zeros((idx.len(), *d));
                for (r, &i) in idx.iter().enumerate() {
                    out[[r, i]] = 1.0;
                }
                out
            }
        }
    }
}

/// Builds the network `cfg` asks for on `d` inputs.
pub fn build_network(cfg: &SelectionConfig, d: usize) -> Result<RnpNetwork> {
    RnpNetwork::build(&cfg.network_params(d)?)
}

/// Ranks the original features of `data`. Every step sees only `data`, so
/// callers control leakage by what they pass in.
pub fn select_features(data: &Dataset, cfg: &SelectionConfig) -> Result<ImportanceScores> {
    cfg.validate()?;
    let x = if cfg.normalize_inputs {
        minmax_normalize(data.x())
    } else {
        data.x().to_owned()
    };
    let d = x.nrows();
    let network = if cfg.use_rnp { Some(build_network(cfg, d)?) } else { None };
    let (mhat, influence) = match &network {
        Some(net) => (net.propagate(x.view())?, Influence::Network(net)),
        None => (x, Influence::Identity(d)),
    };
    match data.target() {
        Target::Regression(y) => select_regression(mhat.view(), y.view(), &influence, cfg),
        Target::Classification { labels, classes } => {
            select_classification(mhat.view(), labels, classes.len(), &influence, cfg)
        }
    }
}

fn select_regression(
    mhat: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    influence: &Influence<'_>,
    cfg: &SelectionConfig,
) -> Result<ImportanceScores> {
    let l = regression_relevance(mhat, y)?;
    let q = if cfg.use_cr {
        redundancy_compact(mhat, cfg.epsilon)?.q
    } else {
        Array1::zeros(l.len())
    };
    let s = fuse_scores(l.view(), q.view(), cfg.lambda1);
    let selected = top_r_indices(s.view(), cfg.r_percent);
    let h = accumulate(influence.rows(&selected).view(), None);
    // input node j is expanded feature j, so its own fused score breaks exact ties
    let d = h.len();
    let ranking = rank_importance(&h, Some(&s.as_slice().unwrap()[..d]));
    Ok(ImportanceScores { h, ranking })
}

fn select_classification(
    mhat: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    influence: &Influence<'_>,
    cfg: &SelectionConfig,
) -> Result<ImportanceScores> {
    let p = mhat.nrows();
    let spread = classwise_relevance(mhat, labels, n_classes);
    let redundancy = if cfg.use_cr {
        classwise_redundancy(mhat, labels, n_classes, cfg.epsilon)?
    } else {
        let mut counts = vec![0usize; n_classes];
        labels.iter().for_each(|&l| counts[l] += 1);
        counts
            .iter()
            .map(|&c| (c > 0).then(|| crate::redundancy::RedundancyScores { q: Array1::zeros(p), r_full: 0.0 }))
            .collect()
    };
    let weights = class_weights(&interclass_stats(mhat, labels, n_classes), cfg.lambda2);

    let mut fused = Vec::new();
    for (k, red) in redundancy.iter().enumerate() {
        if let Some(red) = red {
            fused.push(fuse_scores(spread.row(k), red.q.view(), cfg.lambda1));
        }
    }
    let selections: Vec<Vec<usize>> = fused.iter().map(|s| top_r_indices(s.view(), cfg.r_percent)).collect();
    let mut union: Vec<usize> = selections.iter().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    let rows = influence.rows(&union);

    let d = rows.ncols();
    let mut h = Array1::<f64>::zeros(d);
    for selected in &selections {
        let pos: Vec<usize> = selected.iter().map(|i| union.binary_search(i).unwrap()).collect();
        let w: Vec<f64> = selected.iter().map(|&i| weights[i]).collect();
        h += &accumulate(rows.select(Axis(0), &pos).view(), Some(&w));
    }
    let tie_key: Vec<f64> = (0..d)
        .map(|j| fused.iter().map(|s| s[j]).sum::<f64>() / fused.len() as f64)
        .collect();
    let ranking = rank_importance(&h, Some(&tie_key));
    Ok(ImportanceScores { h, ranking })
}
