//! CSV ingestion, z-scoring, stratified splitting, mini-batch sampling and
//! the PCA target space used by every fitness objective.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::baselines::pca::Pca;
use crate::error::{invalid, Error, Result};
use crate::numerics::Matrix;
use crate::rng::{seeded, Rng};

/// Tabular data: `n × p` features with optional integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
    pub feature_names: Vec<String>,
    /// Original label strings; `labels` index into this.
    pub class_names: Vec<String>,
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    None,
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// `"name"` or a bare integer index; empty means no label.
    pub fn parse(spec: &str) -> Self {
        let spec = spec.trim();
        if spec.is_empty() {
            LabelColumn::None
        } else if let Ok(i) = spec.parse::<usize>() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(spec.to_string())
        }
    }
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Option<Vec<usize>>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n < 2 {
            return Err(invalid(format!("dataset needs at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(invalid("dataset needs at least one feature"));
        }
        if feature_names.len() != p {
            return Err(invalid("feature name count does not match column count"));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(invalid("label count does not match row count"));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
                return Err(invalid(format!("label {bad} outside [0, {})", class_names.len())));
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Load a comma-separated file. Columns whose cells never parse as numbers
/// are dropped; the label column is factorised to `0..c` in sorted order of
/// its distinct values.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let fail = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;

    let names: Option<Vec<String>> = if header {
        Some(
            reader
                .headers()
                .map_err(|e| fail(e.to_string()))?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };

    let mut records: Vec<Vec<String>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fail(format!("row {}: {e}", i + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect());
    }
    if records.is_empty() {
        return Err(fail("no data rows".into()));
    }
    let width = names.as_ref().map_or(records[0].len(), Vec::len);
    if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(fail(format!(
            "row {} has {} fields, expected {width}",
            i + 1,
            r.len()
        )));
    }
    let names = names.unwrap_or_else(|| (0..width).map(|j| format!("x{j}")).collect());

    let label_idx = match label {
        LabelColumn::None => None,
        LabelColumn::Index(i) if *i < width => Some(*i),
        LabelColumn::Index(i) => return Err(fail(format!("label column index {i} out of range"))),
        LabelColumn::Name(name) => Some(
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| fail(format!("label column '{name}' not found")))?,
        ),
    };

    let mut feature_cols = Vec::new();
    for col in (0..width).filter(|&c| Some(c) != label_idx) {
        let parsed: Vec<Option<f64>> = records
            .iter()
            .map(|r| r[col].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let ok = parsed.iter().filter(|v| v.is_some()).count();
        if ok == 0 {
            continue;
        }
        if ok < parsed.len() {
            let row = parsed.iter().position(Option::is_none).unwrap_or(0);
            return Err(fail(format!(
                "row {}, column '{}': cannot parse '{}' as a number",
                row + 1,
                names[col],
                records[row][col]
            )));
        }
        feature_cols.push((col, parsed.into_iter().map(|v| v.unwrap_or(0.0)).collect::<Vec<_>>()));
    }
    if feature_cols.is_empty() {
        return Err(fail("no numeric feature columns".into()));
    }

    let n = records.len();
    let p = feature_cols.len();
    let mut data = vec![0.0; n * p];
    for (j, (_, values)) in feature_cols.iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            data[i * p + j] = *v;
        }
    }
    let feature_names = feature_cols.iter().map(|(c, _)| names[*c].clone()).collect();

    let (labels, class_names) = match label_idx {
        None => (None, Vec::new()),
        Some(col) => {
            let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &records {
                classes.entry(r[col].as_str()).or_insert(0);
            }
            for (i, v) in classes.values_mut().enumerate() {
                *v = i;
            }
            let labels = records.iter().map(|r| classes[r[col].as_str()]).collect();
            (Some(labels), classes.keys().map(|s| s.to_string()).collect())
        }
    };

    Dataset::new(Matrix::from_vec(n, p, data)?, labels, feature_names, class_names)
        .map_err(|e| fail(e.to_string()))
}

/// Per-feature affine map `(x - mean) / std`. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant feature.
    pub stds: Vec<f64>,
}

const CONSTANT_STD: f64 = 1e-12;

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let means = x.column_means();
        let n = x.rows().max(1) as f64;
        let mut vars = vec![0.0; x.cols()];
        for r in x.row_iter() {
            for ((v, m), s) in r.iter().zip(&means).zip(vars.iter_mut()) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > CONSTANT_STD {
                    sd
                } else {
                    0.0
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(invalid("standardizer width mismatch"));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.stds[j] == 0.0 {
                    0.0
                } else {
                    (*v - self.means[j]) / self.stds[j]
                };
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.means.len() {
            return Err(invalid("standardizer width mismatch"));
        }
        let mut out = z.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

/// Fit z-scoring on `d` and apply it.
pub fn standardize(d: &Dataset) -> (Dataset, Standardizer) {
    let s = Standardizer::fit(&d.features);
    let features = s.transform(&d.features).expect("width matches by construction");
    (Dataset { features, ..d.clone() }, s)
}

/// Disjoint row sets for fitting the reduction model and for evaluating it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub dr_train: Vec<usize>,
    pub dr_heldout: Vec<usize>,
    pub seed: u64,
}

/// Shuffle split, stratified by class when labels exist. Each class
/// contributes `round(fraction * class_size)` rows to the training side.
pub fn split(d: &Dataset, dr_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(dr_fraction > 0.0 && dr_fraction < 1.0) {
        return Err(invalid(format!("dr_fraction must be in (0, 1), got {dr_fraction}")));
    }
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    for mut group in strata(d.labels.as_deref(), d.n()) {
        group.shuffle(&mut rng);
        let take = (dr_fraction * group.len() as f64).round() as usize;
        train.extend_from_slice(&group[..take]);
        heldout.extend_from_slice(&group[take..]);
    }
    if train.is_empty() || heldout.is_empty() {
        return Err(invalid(format!(
            "dr_fraction {dr_fraction} leaves an empty side ({} / {})",
            train.len(),
            heldout.len()
        )));
    }
    train.sort_unstable();
    heldout.sort_unstable();
    Ok(SplitPlan {
        dr_train: train,
        dr_heldout: heldout,
        seed,
    })
}

/// Row indices grouped by label (one group when unlabelled).
pub(crate) fn strata(labels: Option<&[usize]>, n: usize) -> Vec<Vec<usize>> {
    match labels {
        None => vec![(0..n).collect()],
        Some(labels) => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &l) in labels.iter().enumerate() {
                groups.entry(l).or_default().push(i);
            }
            groups.into_values().collect()
        }
    }
}

/// Draws a fresh mini-batch of distinct row indices each call.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pub batch_size: usize,
    pub seed: u64,
    pub generation: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(batch_size: usize, seed: u64) -> Self {
        Self {
            batch_size,
            seed,
            generation: 0,
            rng: seeded(seed),
        }
    }

    /// Sorted distinct indices in `0..source_size`; the whole range when the
    /// batch is at least as large as the source.
    pub fn next_batch(&mut self, source_size: usize) -> Vec<usize> {
        self.generation += 1;
        if self.batch_size >= source_size {
            return (0..source_size).collect();
        }
        let mut idx = index::sample(&mut self.rng, source_size, self.batch_size).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// The data projected onto the leading principal components that together
/// explain at least `variance_fraction` of the variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaTarget {
    pub transformed: Matrix,
    pub components_retained: usize,
    /// Cumulative explained-variance ratio actually retained.
    pub variance_fraction: f64,
    pub pca: Pca,
}

impl PcaTarget {
    /// Project unseen (standardized) rows into the same target space.
    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        self.pca.transform(rows)
    }
}

pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.99;

pub fn pca_target(x: &Matrix, variance_fraction: f64) -> Result<PcaTarget> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(invalid("variance_fraction must be in (0, 1]"));
    }
    let full = Pca::fit_all(x)?;
    let mut cum = 0.0;
    let mut keep = full.explained_ratio.len();
    for (i, r) in full.explained_ratio.iter().enumerate() {
        cum += r;
        if cum >= variance_fraction - 1e-10 {
            keep = i + 1;
            break;
        }
    }
    let keep = keep.max(1);
    let pca = full.truncated(keep);
    let transformed = pca.transform(x)?;
    let retained = pca.explained_ratio[..keep].iter().sum();
    Ok(PcaTarget {
        transformed,
        components_retained: keep,
        variance_fraction: retained,
        pca,
    })
}
