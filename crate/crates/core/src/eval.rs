//! Downstream evaluation: metrics, two small closed-form learners and a
//! k-fold protocol that re-runs selection on every training split.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::baselines::BaselineMethod;
use crate::dataset::{kfold_split, Dataset, MinMaxScaler, Target};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::selector::{select_features, SelectionConfig};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_FOLDS: usize = 5;

/// `Σ (y − ŷ)² / Σ (y − ȳ)²`.
pub fn nmse(y_true: ArrayView1<'_, f64>, y_pred: ArrayView1<'_, f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension(format!(
            "{} targets but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::Dimension("NMSE needs at least two targets".into()));
    }
    if y_true.iter().all(|&v| v == y_true[0]) {
        return Err(Error::ConstantTarget);
    }
    let mean = y_true.sum() / y_true.len() as f64;
    let err: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    let total: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    Ok(err / total)
}

/// Fraction of exact label matches.
pub fn accuracy(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "{} labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Ridge regression with an unpenalized intercept. Features are rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: Array1<f64>,
    pub bias: f64,
}

impl RidgeModel {
    /// Solves on centered data, which is the same as leaving the bias
    /// coordinate out of the penalty.
    pub fn fit(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, alpha: f64) -> Result<Self> {
        let fitted = Self::fit_many(x, y.insert_axis(Axis(1)), alpha)?;
        Ok(fitted.into_iter().next().unwrap())
    }

    /// One model per column of `ys`, sharing the factorization.
    fn fit_many(x: ArrayView2<'_, f64>, ys: ArrayView2<'_, f64>, alpha: f64) -> Result<Vec<Self>> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("ridge alpha must be positive, got {alpha}")));
        }
        let (k, n) = x.dim();
        if ys.nrows() != n || n == 0 {
            return Err(Error::Dimension(format!("{n} samples but {} targets", ys.nrows())));
        }
        let x_mean = x.mean_axis(Axis(1)).unwrap();
        let y_mean = ys.mean_axis(Axis(0)).unwrap();
        let xc = &x - &x_mean.view().insert_axis(Axis(1));
        let yc = &ys - &y_mean.view().insert_axis(Axis(0));
        let mut a = xc.dot(&xc.t());
        for i in 0..k {
            a[[i, i]] += alpha;
        }
        let w = solve_spd(a.view(), xc.dot(&yc).view())?;
        Ok(w.columns()
            .into_iter()
            .zip(y_mean.iter())
            .map(|(wc, &ym)| RidgeModel { bias: ym - wc.dot(&x_mean), weights: wc.to_owned() })
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.t().dot(&self.weights) + self.bias
    }
}

/// One-vs-rest ridge on ±1 targets; the class with the highest score wins,
/// ties going to the smaller class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub models: Vec<RidgeModel>,
}

impl LinearClassifier {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, alpha: f64) -> Result<Self> {
        let targets = Array2::from_shape_fn((labels.len(), n_classes), |(j, k)| {
            if labels[j] == k {
                1.0
            } else {
                -1.0
            }
        });
        Ok(Self { models: RidgeModel::fit_many(x, targets.view(), alpha)? })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        let scores: Vec<Array1<f64>> = self.models.iter().map(|m| m.predict(x)).collect();
        (0..x.ncols())
            .map(|j| {
                let mut best = 0;
                for k in 1..scores.len() {
                    if scores[k][j] > scores[best][j] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Anything that orders the features of a training set, best first.
pub trait Ranker: Sync {
    fn name(&self) -> String;
    fn rank(&self, data: &Dataset) -> Result<Vec<usize>>;
}

impl Ranker for SelectionConfig {
    fn name(&self) -> String {
        "easyfs".into()
    }

    fn rank(&self, data: &Dataset) -> Result<Vec<usize>> {
        Ok(select_features(data, self)?.ranking)
    }
}

impl Ranker for BaselineMethod {
    fn name(&self) -> String {
        BaselineMethod::name(*self).into()
    }

    fn rank(&self, data: &Dataset) -> Result<Vec<usize>> {
        Ok(BaselineMethod::rank(*self, data)?.ranking)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    /// Number of top-ranked features handed to the learner.
    pub ns: usize,
    /// `nmse` or `accuracy`.
    pub metric: String,
    pub fold_metrics: Vec<f64>,
    pub mean: f64,
    /// Mean wall-clock seconds of one selection run.
    pub selection_seconds: f64,
}

/// Ranking of each fold's training split, with its selection time in seconds.
pub fn fold_rankings(data: &Dataset, ranker: &dyn Ranker, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, f64)>> {
    let plan = kfold_split(data.n_samples(), k, seed)?;
    (0..k)
        .map(|fold| {
            let train = data.select_samples(&plan.train_indices(fold));
            let start = Instant::now();
            let ranking = ranker.rank(&train)?;
            Ok((ranking, start.elapsed().as_secs_f64()))
        })
        .collect()
}

/// Fits the task's learner on `train` restricted to `features` and scores it on `test`.
pub fn fit_and_score(train: &Dataset, test: &Dataset, features: &[usize], alpha: f64) -> Result<f64> {
    let scaler = MinMaxScaler::fit(train.x().select(Axis(0), features).view());
    let xtr = scaler.transform(train.x().select(Axis(0), features).view());
    let xte = scaler.transform(test.x().select(Axis(0), features).view());
    match (train.target(), test.target()) {
        (Target::Regression(ytr), Target::Regression(yte)) => {
            let model = RidgeModel::fit(xtr.view(), ytr.view(), alpha)?;
            nmse(yte.view(), model.predict(xte.view()).view())
        }
        (Target::Classification { labels: ltr, classes }, Target::Classification { labels: lte, .. }) => {
            let model = LinearClassifier::fit(xtr.view(), ltr, classes.len(), alpha)?;
            accuracy(lte, &model.predict(xte.view()))
        }
        _ => Err(Error::InvalidConfig("train and test tasks differ".into())),
    }
}

/// k-fold evaluation of `ranker` at each feature count in `ns_list`.
/// Selection and scaling see only the training split of each fold.
pub fn cross_validate(
    data: &Dataset,
    ranker: &dyn Ranker,
    ns_list: &[usize],
    k: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<EvalReport>> {
    let d = data.n_features();
    if let Some(&bad) = ns_list.iter().find(|&&ns| ns == 0 || ns > d) {
        return Err(Error::InvalidConfig(format!("feature count {bad} outside 1..={d}")));
    }
    let plan = kfold_split(data.n_samples(), k, seed)?;
    let rankings = fold_rankings(data, ranker, k, seed)?;
    let mut per_ns = vec![Vec::with_capacity(k); ns_list.len()];
    for (fold, (ranking, _)) in rankings.iter().enumerate() {
        let train = data.select_samples(&plan.train_indices(fold));
        let test = data.select_samples(&plan.test_indices(fold));
        for (slot, &ns) in per_ns.iter_mut().zip(ns_list) {
            slot.push(fit_and_score(&train, &test, &ranking[..ns], alpha)?);
        }
    }
    let selection_seconds = rankings.iter().map(|(_, t)| t).sum::<f64>() / k as f64;
    let metric = match data.target() {
        Target::Regression(_) => "nmse",
        Target::Classification { .. } => "accuracy",
    };
    Ok(ns_list
        .iter()
        .zip(per_ns)
        .map(|(&ns, fold_metrics)| EvalReport {
            method: ranker.name(),
            ns,
            metric: metric.into(),
            mean: fold_metrics.iter().sum::<f64>() / fold_metrics.len() as f64,
            fold_metrics,
            selection_seconds,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn nmse_examples() {
        let y = array![0.0, 2.0];
        assert_eq!(nmse(y.view(), y.view()).unwrap(), 0.0);
        assert_eq!(nmse(y.view(), array![1.0, 1.0].view()).unwrap(), 1.0);
        let y = array![0.3, 1.7, -2.2, 5.1, 0.0];
        let mean = Array1::from_elem(5, y.sum() / 5.0);
        assert!((nmse(y.view(), mean.view()).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(nmse(array![1.0, 1.0].view(), y.slice(ndarray::s![..2])), Err(Error::ConstantTarget)));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 2], &[0, 1, 0, 2]).unwrap(), 0.75);
    }

    #[test]
    fn ridge_hand_case() {
        let x = array![[1.0, 2.0, 3.0]];
        let m = RidgeModel::fit(x.view(), array![1.0, 2.0, 3.0].view(), 1.0).unwrap();
        // augmented normal equations with the bias left unpenalized
        let a = array![[15.0, 6.0], [6.0, 3.0]];
        let direct = solve_spd(a.view(), array![[14.0], [6.0]].view()).unwrap();
        assert!((m.weights[0] - direct[[0, 0]]).abs() < 1e-12);
        assert!((m.bias - direct[[1, 0]]).abs() < 1e-12);
        assert!((m.weights[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((3, 50), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Array1<f64> = (0..50).map(|j| 2.0 * x[[0, j]] - x[[2, j]] + 0.5).collect();
        let exact = RidgeModel::fit(x.view(), y.view(), 1e-8).unwrap();
        assert!(nmse(y.view(), exact.predict(x.view()).view()).unwrap() < 1e-6);
        let flat = RidgeModel::fit(x.view(), y.view(), 1e12).unwrap();
        let mean = y.sum() / 50.0;
        assert!(flat.predict(x.view()).iter().all(|p| (p - mean).abs() < 1e-6));
    }

    #[test]
    fn linear_classifier_cases() {
        let x = array![[0.0, 0.1, 0.2, 0.8, 0.9, 1.0]];
        let labels = [0, 0, 0, 1, 1, 1];
        let model = LinearClassifier::fit(x.view(), &labels, 2, 0.01).unwrap();
        assert_eq!(model.predict(x.view()), labels);

        let single = LinearClassifier::fit(x.view(), &[0; 6], 1, 1.0).unwrap();
        assert_eq!(single.predict(x.view()), vec![0; 6]);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let centers = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        let labels: Vec<usize> = (0..300).map(|j| j % 3).collect();
        let x = Array2::from_shape_fn((2, 300), |(i, j)| centers[labels[j]][i] + rng.sample::<f64, _>(StandardNormal));
        let model = LinearClassifier::fit(x.view(), &labels, 3, 1.0).unwrap();
        assert!(accuracy(&labels, &model.predict(x.view())).unwrap() > 0.9);
    }

    #[test]
    fn ties_go_to_the_smaller_class() {
        let model = LinearClassifier {
            models: vec![
                RidgeModel { weights: array![0.0], bias: 1.0 },
                RidgeModel { weights: array![0.0], bias: 1.0 },
            ],
        };
        assert_eq!(model.predict(array![[5.0]].view()), vec![0]);
    }

    #[test]
    fn all_features_make_rankers_interchangeable() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((4, 40), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Array1<f64> = (0..40).map(|j| x[[1, j]] + 0.1 * x[[3, j]]).collect();
        let data = Dataset::regression(x, y, None).unwrap();
        let a = cross_validate(&data, &BaselineMethod::Variance, &[4], 5, 1, 1.0).unwrap();
        let b = cross_validate(&data, &BaselineMethod::Pearson, &[4], 5, 1, 1.0).unwrap();
        for (x, y) in a[0].fold_metrics.iter().zip(&b[0].fold_metrics) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(cross_validate(&data, &BaselineMethod::Pearson, &[5], 5, 1, 1.0).is_err());
    }

    #[test]
    fn report_shape_and_repeatability() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Array2::from_shape_fn((6, 60), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Array1<f64> = (0..60).map(|j| x[[0, j]] - x[[5, j]]).collect();
        let data = Dataset::regression(x, y, None).unwrap();
        let cfg = SelectionConfig::default();
        let a = cross_validate(&data, &cfg, &[2, 4], 3, 7, 1.0).unwrap();
        let b = cross_validate(&data, &cfg, &[2, 4], 3, 7, 1.0).unwrap();
        assert_eq!(a.len(), 2);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.fold_metrics.len(), 3);
            assert_eq!(ra.fold_metrics, rb.fold_metrics);
            assert!((ra.mean - ra.fold_metrics.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        }
    }
}
