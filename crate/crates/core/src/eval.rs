//! Two-stage evaluation: a DR model fitted on one split is applied to the
//! held-out split, and the held-out latent rows are scored by 10-fold
//! cross-validation of a random forest (balanced accuracy) and of a neural
//! decoder back to the PCA-space target (reconstruction error).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::DrModel;
use crate::dataset::{pca_target, strata, Dataset, PcaTarget, SplitPlan, Standardizer, DEFAULT_VARIANCE_FRACTION};
use crate::error::{invalid, Result};
use crate::neural::{train_decoder, TrainConfig};
use crate::numerics::Matrix;
use crate::par::map_indices;
use crate::rng::{derive, seeded};
use crate::stats::balanced_accuracy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// Candidate features per split; `None` means `⌊√p⌋` (at least one).
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: None,
            min_samples_split: 2,
            min_samples_leaf: 2,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { distribution: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Axis-aligned CART classification tree grown on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    classes: usize,
    mtry: usize,
    cfg: &'a ForestConfig,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&mut self, counts: &[usize], total: usize) -> usize {
        let distribution = counts.iter().map(|&c| c as f64 / total as f64).collect();
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn grow<R: Rng + ?Sized>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let mut counts = vec![0usize; self.classes];
        for &r in rows.iter() {
            counts[self.y[r]] += 1;
        }
        let total = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.cfg.max_depth.is_some_and(|m| depth >= m);
        if pure || total < self.cfg.min_samples_split || total < 2 * self.cfg.min_samples_leaf || depth_capped {
            return self.leaf(&counts, total);
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts, rng) else {
            return self.leaf(&counts, total);
        };
        let mid = partition(rows, |r| self.x.get(r, feature) <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { distribution: Vec::new() });
        let (l, r) = rows.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }

    /// Lowest weighted Gini impurity split over a random feature subset; further
    /// features are examined only while no valid split has been found.
    fn best_split<R: Rng + ?Sized>(&self, rows: &[usize], counts: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let p = self.x.cols();
        let mut features: Vec<usize> = (0..p).collect();
        features.shuffle(rng);
        let total = rows.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(total);
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            // weighted Gini = 1 − (Σ left² / n_l + Σ right² / n_r) / n, so
            // the best split maximises the bracket
            let mut left = vec![0usize; self.classes];
            let mut right = counts.to_vec();
            let mut left_sq = 0usize;
            let mut right_sq: usize = counts.iter().map(|c| c * c).sum();
            for i in 0..total - 1 {
                let c = sorted[i].1;
                left_sq += 2 * left[c] + 1;
                right_sq -= 2 * right[c] - 1;
                left[c] += 1;
                right[c] -= 1;
                let nl = i + 1;
                if sorted[i].0 == sorted[i + 1].0 || nl < min_leaf || total - nl < min_leaf {
                    continue;
                }
                let purity = left_sq as f64 / nl as f64 + right_sq as f64 / (total - nl) as f64;
                if best.is_none_or(|(b, _, _)| purity > b) {
                    let threshold = sorted[i].0 + (sorted[i + 1].0 - sorted[i].0) / 2.0;
                    // guard against the midpoint rounding onto the upper value
                    let threshold = if threshold < sorted[i + 1].0 { threshold } else { sorted[i].0 };
                    best = Some((purity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

impl DecisionTree {
    pub fn fit<R: Rng + ?Sized>(x: &Matrix, y: &[usize], classes: usize, rows: &[usize], cfg: &ForestConfig, rng: &mut R) -> Self {
        let mtry = cfg
            .max_features
            .unwrap_or_else(|| (x.cols() as f64).sqrt().floor() as usize)
            .clamp(1, x.cols().max(1));
        let mut grower = Grower {
            x,
            y,
            classes,
            mtry,
            cfg,
            nodes: Vec::new(),
        };
        let mut rows = rows.to_vec();
        grower.grow(&mut rows, 0, rng);
        Self { nodes: grower.nodes }
    }

    pub fn distribution(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { distribution } => return distribution,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(self.distribution(row))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub classes: usize,
    pub features: usize,
    /// Set when the training labels held a single class.
    pub degenerate: bool,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[usize], cfg: &ForestConfig, seed: u64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(invalid(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if x.rows() < 2 {
            return Err(invalid("a forest needs at least two training rows"));
        }
        if cfg.trees == 0 {
            return Err(invalid("a forest needs at least one tree"));
        }
        let classes = y.iter().max().map_or(1, |m| m + 1);
        let degenerate = y.iter().all(|&c| c == y[0]);
        let n = x.rows();
        let trees = map_indices(cfg.trees, |t| {
            let mut rng = seeded(derive(seed, &format!("tree {t}")));
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(x, y, classes, &rows, cfg, &mut rng)
        });
        Ok(Self {
            trees,
            classes,
            features: x.cols(),
            degenerate,
        })
    }

    /// Majority vote of the trees; ties go to the lower class index.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<usize>> {
        if rows.cols() != self.features {
            return Err(invalid(format!("forest trained on {} features, got {}", self.features, rows.cols())));
        }
        Ok(rows
            .row_iter()
            .map(|r| {
                let mut votes = vec![0.0; self.classes];
                for t in &self.trees {
                    votes[t.predict_row(r)] += 1.0;
                }
                argmax(&votes)
            })
            .collect())
    }
}

pub fn rf_fit(x: &Matrix, y: &[usize], trees: usize, seed: u64) -> Result<RandomForest> {
    RandomForest::fit(x, y, &ForestConfig { trees, ..Default::default() }, seed)
}

pub fn rf_predict(rf: &RandomForest, rows: &Matrix) -> Result<Vec<usize>> {
    rf.predict(rows)
}

/// One run's data after the protocol's preprocessing: both splits
/// standardized with DR-train statistics and projected onto the DR-train
/// PCA target space.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train_x: Matrix,
    pub heldout_x: Matrix,
    pub train_target: Matrix,
    pub heldout_target: Matrix,
    pub train_labels: Option<Vec<usize>>,
    pub heldout_labels: Option<Vec<usize>>,
    pub class_count: usize,
    pub standardizer: Standardizer,
    pub target: PcaTarget,
}

impl PreparedSplit {
    pub fn new(d: &Dataset, plan: &SplitPlan, variance_fraction: f64) -> Result<Self> {
        let train = d.select(&plan.dr_train);
        let heldout = d.select(&plan.dr_heldout);
        let standardizer = Standardizer::fit(&train.features);
        let train_x = standardizer.transform(&train.features)?;
        let heldout_x = standardizer.transform(&heldout.features)?;
        let target = pca_target(&train_x, variance_fraction)?;
        let train_target = target.transformed.clone();
        let heldout_target = target.transform(&heldout_x)?;
        Ok(Self {
            train_x,
            heldout_x,
            train_target,
            heldout_target,
            train_labels: train.labels,
            heldout_labels: heldout.labels,
            class_count: d.class_count(),
            standardizer,
            target,
        })
    }

    pub fn with_default_fraction(d: &Dataset, plan: &SplitPlan) -> Result<Self> {
        Self::new(d, plan, DEFAULT_VARIANCE_FRACTION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub folds: usize,
    pub forest: ForestConfig,
    pub decoder: TrainConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            forest: ForestConfig::default(),
            decoder: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub balanced_accuracy: f64,
    pub reconstruction_error: f64,
    pub fold_accuracies: Vec<f64>,
    pub fold_errors: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Stratified fold id of every row. Rows of each class are shuffled and
/// dealt round-robin, continuing the rotation across classes.
pub fn stratified_folds(labels: Option<&[usize]>, n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let mut fold = vec![0; n];
    let mut next = 0;
    for mut group in strata(labels, n) {
        group.shuffle(&mut rng);
        for r in group {
            fold[r] = next % folds;
            next += 1;
        }
    }
    fold
}

/// Cross-validated scores of precomputed held-out latent rows.
pub fn evaluate_latent(latent: &Matrix, prepared: &PreparedSplit, cfg: &EvalConfig, seed: u64) -> Result<Evaluation> {
    let n = latent.rows();
    if n != prepared.heldout_target.rows() {
        return Err(invalid(format!("{n} latent rows for {} held-out rows", prepared.heldout_target.rows())));
    }
    let labels = prepared.heldout_labels.as_deref();
    let mut warnings = Vec::new();
    let mut folds = cfg.folds.max(2);
    if let Some(y) = labels {
        let smallest = strata(Some(y), n).iter().map(Vec::len).filter(|&s| s > 0).min().unwrap_or(0);
        if smallest < folds {
            let reduced = smallest.max(2).min(folds);
            warnings.push(format!("smallest class has {smallest} held-out rows; using {reduced} folds instead of {folds}"));
            folds = reduced;
        }
    }
    if n < folds {
        return Err(invalid(format!("{n} held-out rows cannot fill {folds} folds")));
    }
    let assignment = stratified_folds(labels, n, folds, derive(seed, "folds"));
    let results = map_indices(folds, |f| -> Result<(Option<f64>, f64)> {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        let (lx, tx) = (latent.select_rows(&train), latent.select_rows(&test));

        let accuracy = match labels {
            Some(y) => {
                let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
                let yte: Vec<usize> = test.iter().map(|&i| y[i]).collect();
                let rf = RandomForest::fit(&lx, &ytr, &cfg.forest, derive(seed, &format!("forest {f}")))?;
                Some(balanced_accuracy(&yte, &rf.predict(&tx)?)?)
            }
            None => None,
        };

        let scaler = Standardizer::fit(&lx);
        let decoder_cfg = TrainConfig {
            seed: derive(seed, &format!("decoder {f}")),
            ..cfg.decoder
        };
        let target_train = prepared.heldout_target.select_rows(&train);
        let target_test = prepared.heldout_target.select_rows(&test);
        let decoder = train_decoder(&scaler.transform(&lx)?, &target_train, &decoder_cfg)?;
        let error = decoder.loss(&scaler.transform(&tx)?, &target_test)?;
        Ok((accuracy, error))
    });
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut fold_errors = Vec::with_capacity(folds);
    for r in results {
        let (a, e) = r?;
        fold_accuracies.extend(a);
        fold_errors.push(e);
    }
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(Evaluation {
        balanced_accuracy: mean(&fold_accuracies),
        reconstruction_error: mean(&fold_errors),
        fold_accuracies,
        fold_errors,
        warnings,
    })
}

/// Apply `model` to the held-out rows and cross-validate the result.
pub fn evaluate_prepared(model: &DrModel, prepared: &PreparedSplit, cfg: &EvalConfig, seed: u64) -> Result<Evaluation> {
    let latent = model.transform(&prepared.heldout_x)?;
    evaluate_latent(&latent, prepared, cfg, seed)
}

/// [`evaluate_prepared`] after preparing `d` under `plan` with default settings.
pub fn evaluate(model: &DrModel, d: &Dataset, plan: &SplitPlan, seed: u64) -> Result<Evaluation> {
    let prepared = PreparedSplit::with_default_fraction(d, plan)?;
    evaluate_prepared(model, &prepared, &EvalConfig::default(), seed)
}
