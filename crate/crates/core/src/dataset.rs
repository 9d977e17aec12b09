//! Tabular supervised datasets: loading, validation, normalization, folds.
//!
//! Features are stored features-by-samples (`d × n`): row `j` of [`Dataset::x`]
//! is feature `j` across all samples.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Regression(Array1<f64>),
    /// Labels in `0..classes.len()`; `classes[k]` is the raw label text of class `k`.
    Classification {
        labels: Vec<usize>,
        classes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    target: Target,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn regression(x: Array2<f64>, y: Array1<f64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if let Some(j) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: j, column: x.nrows() });
        }
        Self::build(x, Target::Regression(y), feature_names)
    }

    /// `labels` must lie in `0..n_classes` with every class present.
    pub fn classification(
        x: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let classes = (0..n_classes).map(|k| k.to_string()).collect();
        Self::classification_named(x, labels, classes, feature_names)
    }

    pub fn classification_named(
        x: Array2<f64>,
        labels: Vec<usize>,
        classes: Vec<String>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut counts = vec![0usize; classes.len()];
        for &l in &labels {
            match counts.get_mut(l) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "label {l} out of range for {} classes",
                        classes.len()
                    )))
                }
            }
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(classes[k].clone()));
        }
        Self::build(x, Target::Classification { labels, classes }, feature_names)
    }

    fn build(x: Array2<f64>, target: Target, feature_names: Option<Vec<String>>) -> Result<Self> {
        let (d, n) = x.dim();
        if d < 1 || n < 2 {
            return Err(Error::Dimension(format!(
                "need at least 1 feature and 2 samples, got {d} x {n}"
            )));
        }
        let target_len = match &target {
            Target::Regression(y) => y.len(),
            Target::Classification { labels, .. } => labels.len(),
        };
        if target_len != n {
            return Err(Error::Dimension(format!(
                "{n} samples but {target_len} target values"
            )));
        }
        if let Some(((j, i), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: i, column: j });
        }
        let feature_names = match feature_names {
            Some(names) if names.len() != d => {
                return Err(Error::Dimension(format!(
                    "{} feature names for {d} features",
                    names.len()
                )))
            }
            Some(names) => names,
            None => (0..d).map(|j| format!("x{j}")).collect(),
        };
        Ok(Self {
            x,
            target,
            feature_names,
        })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn task(&self) -> Task {
        match self.target {
            Target::Regression(_) => Task::Regression,
            Target::Classification { .. } => Task::Classification,
        }
    }

    pub fn n_features(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Regression target, if any.
    pub fn y(&self) -> Option<ArrayView1<'_, f64>> {
        match &self.target {
            Target::Regression(y) => Some(y.view()),
            Target::Classification { .. } => None,
        }
    }

    /// Class labels, if any.
    pub fn labels(&self) -> Option<&[usize]> {
        match &self.target {
            Target::Classification { labels, .. } => Some(labels),
            Target::Regression(_) => None,
        }
    }

    pub fn n_classes(&self) -> usize {
        match &self.target {
            Target::Classification { classes, .. } => classes.len(),
            Target::Regression(_) => 0,
        }
    }

    /// Same target and names, different feature values.
    pub fn with_features(&self, x: Array2<f64>) -> Result<Self> {
        if x.dim() != self.x.dim() {
            return Err(Error::Dimension(format!(
                "replacement features are {:?}, expected {:?}",
                x.dim(),
                self.x.dim()
            )));
        }
        Self::build(x, self.target.clone(), Some(self.feature_names.clone()))
    }

    /// Column subset, e.g. one side of a fold split.
    ///
    /// Unlike the constructors, classes may end up empty here; the class count
    /// is kept so label values stay comparable with the parent dataset.
    pub fn select_samples(&self, samples: &[usize]) -> Dataset {
        let x = self.x.select(Axis(1), samples);
        let target = match &self.target {
            Target::Regression(y) => Target::Regression(samples.iter().map(|&i| y[i]).collect()),
            Target::Classification { labels, classes } => Target::Classification {
                labels: samples.iter().map(|&i| labels[i]).collect(),
                classes: classes.clone(),
            },
        };
        Dataset {
            x,
            target,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Feature subset in the given order.
    pub fn select_features(&self, features: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), features),
            target: self.target.clone(),
            feature_names: features.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }
}

/// Which CSV column holds the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Numbers are column indices, anything else a header name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_cell(s: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue { row, column });
    }
    Ok(v)
}

#[derive(Default)]
struct LabelMap {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl LabelMap {
    fn id(&mut self, raw: &str) -> usize {
        let raw = raw.trim();
        if let Some(&k) = self.index.get(raw) {
            return k;
        }
        let k = self.names.len();
        self.index.insert(raw.to_string(), k);
        self.names.push(raw.to_string());
        k
    }
}

/// Reads a CSV file (samples as rows). Row and column numbers in errors are
/// 1-based positions in the file.
pub fn load_csv(path: &Path, target: &TargetColumn, task: Task, header: bool) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers: Option<Vec<String>> = if header {
        let h = reader.headers().map_err(|e| csv_err(e, 1))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };
    let target_idx = match (target, &headers) {
        (TargetColumn::Index(i), _) => *i,
        (TargetColumn::Name(name), Some(h)) => h.iter().position(|c| c == name).ok_or_else(|| {
            Error::InvalidConfig(format!("target column `{name}` not found in header"))
        })?,
        (TargetColumn::Name(name), None) => {
            return Err(Error::InvalidConfig(format!(
                "target column `{name}` given by name but the file has no header"
            )))
        }
    };

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut y_reg = Vec::new();
    let mut labels = Vec::new();
    let mut map = LabelMap::default();
    let mut width = headers.as_ref().map(Vec::len);

    for (r, rec) in reader.records().enumerate() {
        let row = r + 1 + usize::from(header);
        let rec = rec.map_err(|e| csv_err(e, row))?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                row,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        if target_idx >= w {
            return Err(Error::InvalidConfig(format!(
                "target column {target_idx} out of range for {w} columns"
            )));
        }
        if columns.is_empty() {
            columns = vec![Vec::new(); w - 1];
        }
        let mut f = 0;
        for (c, cell) in rec.iter().enumerate() {
            if c == target_idx {
                match task {
                    Task::Regression => y_reg.push(parse_cell(cell, row, c + 1)?),
                    Task::Classification => labels.push(map.id(cell)),
                }
            } else {
                columns[f].push(parse_cell(cell, row, c + 1)?);
                f += 1;
            }
        }
    }

    let n = y_reg.len().max(labels.len());
    let d = columns.len();
    let x = Array2::from_shape_fn((d, n), |(j, i)| columns[j][i]);
    let names = headers.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|&(c, _)| c != target_idx)
            .map(|(_, name)| name)
            .collect()
    });
    match task {
        Task::Regression => Dataset::regression(x, Array1::from(y_reg), names),
        Task::Classification => Dataset::classification_named(x, labels, map.names, names),
    }
}

fn csv_err(e: csv::Error, row: usize) -> Error {
    Error::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

/// Reads the sparse text format: one sample per line, `label idx:val idx:val ...`
/// with 1-based feature indices. Missing entries are zero; the feature count is
/// the largest index seen. Blank lines and lines starting with `#` are skipped.
pub fn load_sparse(path: &Path, task: Task) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut y_reg = Vec::new();
    let mut labels = Vec::new();
    let mut map = LabelMap::default();
    let mut d = 0usize;

    for (r, line) in BufReader::new(file).lines().enumerate() {
        let row = r + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        match task {
            Task::Regression => y_reg.push(parse_cell(label, row, 1)?),
            Task::Classification => labels.push(map.id(label)),
        }
        let mut sample = Vec::new();
        for (t, tok) in tokens.enumerate() {
            let column = t + 2;
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                row,
                column,
                message: format!("expected `index:value`, found `{tok}`"),
            })?;
            let idx: usize = idx.parse().ok().filter(|&i| i >= 1).ok_or_else(|| Error::Parse {
                row,
                column,
                message: format!("feature index `{idx}` is not a positive integer"),
            })?;
            let val = parse_cell(val, row, column)?;
            d = d.max(idx);
            sample.push((idx - 1, val));
        }
        entries.push(sample);
    }

    let n = entries.len();
    let mut x = Array2::<f64>::zeros((d, n));
    for (i, sample) in entries.iter().enumerate() {
        for &(j, v) in sample {
            x[[j, i]] = v;
        }
    }
    match task {
        Task::Regression => Dataset::regression(x, Array1::from(y_reg), None),
        Task::Classification => Dataset::classification_named(x, labels, map.names, None),
    }
}

/// Per-feature min-max scaling fitted on one matrix and applicable to another.
#[derive(Debug, Clone)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let (min, range) = x
            .rows()
            .into_iter()
            .map(|row| {
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            })
            .unzip();
        Self { min, range }
    }

    /// Constant training rows map to zero.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.min.len(), "feature count differs from fit");
        let mut out = x.to_owned();
        for (j, mut row) in out.rows_mut().into_iter().enumerate() {
            let (lo, range) = (self.min[j], self.range[j]);
            if range > 0.0 {
                row.mapv_inplace(|v| (v - lo) / range);
            } else {
                row.fill(0.0);
            }
        }
        out
    }
}

/// Maps each row (feature) onto [0, 1]; constant rows become zeros.
pub fn minmax_normalize(x: ArrayView2<'_, f64>) -> Array2<f64> {
    MinMaxScaler::fit(x).transform(x)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Seeded shuffle of `0..n` followed by round-robin fold assignment.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { k, assignments, seed })
}
