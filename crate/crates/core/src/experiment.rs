//! Method × k × run sweeps with per-run record files, summary tables and
//! expression export.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::baselines::{DrModel, Isomap, Pca};
use crate::dataset::{load_csv, split, Dataset, LabelColumn, DEFAULT_VARIANCE_FRACTION};
use crate::distances::DEFAULT_NEIGHBORS;
use crate::error::{Error, Result};
use crate::eval::{evaluate_prepared, EvalConfig, PreparedSplit};
use crate::evolution::{evolve, GpRunConfig};
use crate::fitness::{FitnessContext, FitnessSpec, Metric, WeightScheme};
use crate::gp::Genome;
use crate::neural::{train_autoencoder, Mlp, TrainConfig};
use crate::par::map_indices;
use crate::rng::derive;
use crate::stats::{mann_whitney_u, mean, significance_stars, std_dev};

pub const RECORD_FORMAT: &str = "gpdr-run-record";
pub const RECORD_VERSION: u32 = 1;
/// Significance level below which a method is considered worse than the best.
pub const ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pca,
    Isomap,
    MtDistEuclidean,
    MtDistGeodesic,
    MtRankEuclidean,
    MtRankGeodesic,
    MtTeacher,
    AmtGp,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Pca,
        Method::Isomap,
        Method::MtDistEuclidean,
        Method::MtDistGeodesic,
        Method::MtRankEuclidean,
        Method::MtRankGeodesic,
        Method::MtTeacher,
        Method::AmtGp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Isomap => "isomap",
            Method::MtDistEuclidean => "mt_dist_euclidean",
            Method::MtDistGeodesic => "mt_dist_geodesic",
            Method::MtRankEuclidean => "mt_rank_euclidean",
            Method::MtRankGeodesic => "mt_rank_geodesic",
            Method::MtTeacher => "mt_teacher",
            Method::AmtGp => "amt_gp",
        }
    }

    /// Row label used in summary tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Pca => "PCA",
            Method::Isomap => "Isomap",
            Method::MtDistEuclidean => "MT F_dist (Euclidean)",
            Method::MtDistGeodesic => "MT F_dist (geodesic)",
            Method::MtRankEuclidean => "MT F_rank (Euclidean)",
            Method::MtRankGeodesic => "MT F_rank (geodesic)",
            Method::MtTeacher => "MT F_AE",
            Method::AmtGp => "AMT F_GP",
        }
    }

    /// The GP objective, or `None` for the baselines.
    pub fn fitness_spec(self) -> Option<FitnessSpec> {
        let rank = |metric| FitnessSpec::Rank {
            metric,
            weights: WeightScheme::Hyperbolic,
        };
        match self {
            Method::Pca | Method::Isomap => None,
            Method::MtDistEuclidean => Some(FitnessSpec::Dist { metric: Metric::Euclidean }),
            Method::MtDistGeodesic => Some(FitnessSpec::Dist { metric: Metric::Geodesic }),
            Method::MtRankEuclidean => Some(rank(Metric::Euclidean)),
            Method::MtRankGeodesic => Some(rank(Metric::Geodesic)),
            Method::MtTeacher => Some(FitnessSpec::Teacher),
            Method::AmtGp => Some(FitnessSpec::GpAutoencoder),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Column name or index of the class label; empty for unlabelled data.
    pub label_column: String,
    pub header: bool,
    pub methods: Vec<Method>,
    pub k: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub dr_fraction: f64,
    pub variance_fraction: f64,
    pub n_neighbors: usize,
    /// GP settings; `k` and `seed` are set per run.
    pub gp: GpRunConfig,
    pub teacher: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            label_column: "class".into(),
            header: true,
            methods: Method::ALL.to_vec(),
            k: vec![2, 3],
            runs: 30,
            seed: 0,
            output: PathBuf::from("results"),
            dr_fraction: 0.5,
            variance_fraction: DEFAULT_VARIANCE_FRACTION,
            n_neighbors: DEFAULT_NEIGHBORS,
            gp: GpRunConfig::default(),
            teacher: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML config; a relative `dataset` or `output` path is taken
    /// relative to the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.dataset, &mut cfg.output] {
                if p.is_relative() && !p.as_os_str().is_empty() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    /// The reduced budget used for quick reproductions: 200 genomes,
    /// 30 generations, batches of 100 and 10 runs per cell.
    pub fn desk_scale(mut self) -> Self {
        self.gp.population = 200;
        self.gp.generations = 30;
        self.gp.batch_size = 100;
        self.runs = 10;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(Error::Config("k values must be given and positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if !(self.variance_fraction > 0.0 && self.variance_fraction <= 1.0) {
            return Err(Error::Config(format!("variance_fraction {} outside (0, 1]", self.variance_fraction)));
        }
        if self.n_neighbors == 0 {
            return Err(Error::Config("n_neighbors must be positive".into()));
        }
        if self.methods.iter().any(|m| m.fitness_spec().is_some()) {
            GpRunConfig { k: 1, ..self.gp.clone() }.validate()?;
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        load_csv(&self.dataset, &LabelColumn::parse(&self.label_column), self.header)
    }

    /// Every `(method, k, run)` cell in sweep order.
    pub fn jobs(&self) -> Vec<(Method, usize, usize)> {
        let mut jobs = Vec::new();
        for &m in &self.methods {
            for &k in &self.k {
                jobs.extend((0..self.runs).map(|r| (m, k, r)));
            }
        }
        jobs
    }

    pub fn run_seed(&self, method: Method, k: usize, run: usize) -> u64 {
        derive(self.seed, &format!("{method}/k{k}/run{run}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub fit_secs: f64,
    pub eval_secs: f64,
}

/// Outcome of one `(method, k, run)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub k: usize,
    pub run: usize,
    pub seed: u64,
    /// Error text of a failed run; all metrics are then absent.
    pub error: Option<String>,
    pub balanced_accuracy: Option<f64>,
    pub reconstruction_error: Option<f64>,
    pub fold_accuracies: Vec<f64>,
    pub fold_errors: Vec<f64>,
    pub warnings: Vec<String>,
    /// Columns of the PCA target space.
    pub target_dims: usize,
    /// Fitness of the returned genome on all DR-train rows.
    pub train_fitness: Option<f64>,
    pub fitness_history: Vec<f64>,
    pub expressions: Vec<String>,
    pub decoder_expressions: Vec<String>,
    pub genome: Option<Genome>,
    pub teacher: Option<Mlp>,
    pub timing: Timing,
}

impl RunRecord {
    fn failed(method: Method, k: usize, run: usize, seed: u64, error: String, timing: Timing) -> Self {
        Self {
            method,
            k,
            run,
            seed,
            error: Some(error),
            balanced_accuracy: None,
            reconstruction_error: None,
            fold_accuracies: Vec::new(),
            fold_errors: Vec::new(),
            warnings: Vec::new(),
            target_dims: 0,
            train_fitness: None,
            fitness_history: Vec::new(),
            expressions: Vec::new(),
            decoder_expressions: Vec::new(),
            genome: None,
            teacher: None,
            timing,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn metric(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::BalancedAccuracy => self.balanced_accuracy,
            MetricKind::ReconstructionError => self.reconstruction_error,
        }
    }

    /// The record with its timing cleared, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord {
            timing: Timing::default(),
            ..self.clone()
        }
    }

    pub fn file_name(method: Method, k: usize, run: usize) -> String {
        format!("{method}-k{k}-run{run:03}.jsonl")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordHeader {
    format: String,
    version: u32,
    target: String,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn fit_and_evaluate(cfg: &ExperimentConfig, data: &Dataset, method: Method, k: usize, seed: u64, rec: &mut RunRecord) -> Result<()> {
    let plan = split(data, cfg.dr_fraction, derive(seed, "split"))?;
    let prepared = PreparedSplit::new(data, &plan, cfg.variance_fraction)?;
    rec.target_dims = prepared.train_target.cols();

    let started = Stopwatch::start();
    let model = match method.fitness_spec() {
        None if method == Method::Pca => DrModel::Pca(Pca::fit(&prepared.train_x, k)?),
        None => DrModel::Isomap(Box::new(Isomap::fit(&prepared.train_x, k, cfg.n_neighbors)?)),
        Some(spec) => {
            let teacher_latent = if spec == FitnessSpec::Teacher {
                let teacher_cfg = TrainConfig {
                    seed: derive(seed, "teacher"),
                    ..cfg.teacher
                };
                let teacher = train_autoencoder(&prepared.train_target, k, &teacher_cfg)?;
                let l = teacher.latent(&prepared.train_target)?;
                rec.teacher = Some(teacher);
                Some(l)
            } else {
                None
            };
            let ctx = FitnessContext::with_neighbors(
                spec,
                prepared.train_x.clone(),
                prepared.train_target.clone(),
                teacher_latent,
                cfg.n_neighbors,
            )?;
            let gp = GpRunConfig {
                k,
                seed: derive(seed, "gp"),
                ..cfg.gp.clone()
            };
            let result = evolve(&ctx, &gp)?;
            rec.train_fitness = finite(result.best_fitness);
            rec.fitness_history = result.history;
            rec.expressions = result.expressions;
            rec.decoder_expressions = result.decoder_expressions;
            rec.genome = Some(result.best.clone());
            match result.best {
                Genome::Multi(m) => DrModel::Gp(m),
                Genome::Autoencoder(a) => DrModel::GpAuto(a),
            }
        }
    };
    rec.timing.fit_secs = started.secs();

    let started = Stopwatch::start();
    let evaluation = evaluate_prepared(&model, &prepared, &cfg.eval, derive(seed, "evaluate"))?;
    rec.timing.eval_secs = started.secs();
    rec.balanced_accuracy = finite(evaluation.balanced_accuracy);
    rec.reconstruction_error = finite(evaluation.reconstruction_error);
    rec.fold_accuracies = evaluation.fold_accuracies;
    rec.fold_errors = evaluation.fold_errors;
    rec.warnings = evaluation.warnings;
    if rec.reconstruction_error.is_none() {
        return Err(Error::Numeric("reconstruction error is not finite".into()));
    }
    Ok(())
}

/// Runs a single cell. Failures are returned as records carrying the error.
pub fn run_single(cfg: &ExperimentConfig, data: &Dataset, method: Method, k: usize, run: usize) -> RunRecord {
    let seed = cfg.run_seed(method, k, run);
    let started = Stopwatch::start();
    let mut rec = RunRecord::failed(method, k, run, seed, String::new(), Timing::default());
    rec.error = None;
    let outcome = fit_and_evaluate(cfg, data, method, k, seed, &mut rec);
    let mut timing = rec.timing;
    timing.total_secs = started.secs();
    match outcome {
        Ok(()) => RunRecord { timing, ..rec },
        Err(e) => RunRecord::failed(method, k, run, seed, e.to_string(), timing),
    }
}

/// Every run record of a sweep, sorted by method, k and run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultStore {
    pub records: Vec<RunRecord>,
}

impl ResultStore {
    pub fn new(mut records: Vec<RunRecord>) -> Self {
        records.sort_by_key(|r| (r.method, r.k, r.run));
        Self { records }
    }

    pub fn records_dir(root: &Path) -> PathBuf {
        root.join("runs")
    }

    /// Reads every record file under `root`.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let dir = Self::records_dir(root.as_ref());
        let mut records = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for path in entries {
            if path.extension().is_some_and(|e| e == "jsonl") {
                records.push(read_record(&path)?);
            }
        }
        Ok(Self::new(records))
    }

    pub fn cell(&self, method: Method, k: usize) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.method == method && r.k == k)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.records.iter().map(|r| r.method).collect();
        m.dedup();
        m
    }

    pub fn ks(&self) -> Vec<usize> {
        let mut k: Vec<usize> = self.records.iter().map(|r| r.k).collect();
        k.sort_unstable();
        k.dedup();
        k
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| !r.is_ok())
    }
}

pub fn write_record(path: &Path, record: &RunRecord, target: &str) -> Result<()> {
    let header = RecordHeader {
        format: RECORD_FORMAT.into(),
        version: RECORD_VERSION,
        target: target.into(),
    };
    let mut text = serde_json::to_string(&header)?;
    text.push('\n');
    text.push_str(&serde_json::to_string(record)?);
    text.push('\n');
    let tmp = path.with_extension("jsonl.partial");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path)?;
    let bad = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header: RecordHeader = serde_json::from_str(lines.next().ok_or_else(|| bad("empty record file".into()))?)?;
    if header.format != RECORD_FORMAT || header.version != RECORD_VERSION {
        return Err(bad(format!("unsupported record format {} v{}", header.format, header.version)));
    }
    Ok(serde_json::from_str(lines.next().ok_or_else(|| bad("record line missing".into()))?)?)
}

/// Runs every missing cell of the sweep, writing one record file per run,
/// and returns the complete store. Existing record files are kept, so an
/// interrupted sweep resumes where it stopped.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultStore> {
    run_experiment_with(cfg, |_| {})
}

/// [`run_experiment`] calling `on_record` after each newly finished run.
pub fn run_experiment_with(cfg: &ExperimentConfig, on_record: impl Fn(&RunRecord) + Sync) -> Result<ResultStore> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    let dir = ResultStore::records_dir(&cfg.output);
    fs::create_dir_all(&dir)?;
    let target = format!("pca(variance_fraction={})", cfg.variance_fraction);
    let pending: Vec<(Method, usize, usize)> = cfg
        .jobs()
        .into_iter()
        .filter(|&(m, k, r)| read_record(&dir.join(RunRecord::file_name(m, k, r))).is_err())
        .collect();
    let written = map_indices(pending.len(), |i| {
        let (m, k, r) = pending[i];
        let record = run_single(cfg, &data, m, k, r);
        write_record(&dir.join(RunRecord::file_name(m, k, r)), &record, &target)?;
        on_record(&record);
        Ok::<_, Error>(())
    });
    written.into_iter().collect::<Result<Vec<()>>>()?;

    let mut records = Vec::with_capacity(cfg.jobs().len());
    for (m, k, r) in cfg.jobs() {
        records.push(read_record(&dir.join(RunRecord::file_name(m, k, r)))?);
    }
    Ok(ResultStore::new(records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    BalancedAccuracy,
    ReconstructionError,
}

impl MetricKind {
    pub fn higher_is_better(self) -> bool {
        self == MetricKind::BalancedAccuracy
    }

    pub fn title(self) -> &'static str {
        match self {
            MetricKind::BalancedAccuracy => "Balanced accuracy (higher is better)",
            MetricKind::ReconstructionError => "Reconstruction error (lower is better)",
        }
    }
}

/// One method's entry in a summary column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub method: Method,
    pub k: usize,
    pub metric: MetricKind,
    /// Runs contributing a value, and all runs recorded.
    pub n: usize,
    pub recorded: usize,
    pub mean: f64,
    pub std: f64,
    /// Mann-Whitney p-value against the best method (`None` for the best).
    pub p_value: Option<f64>,
    pub stars: String,
    pub best: bool,
    /// The best method or one not significantly different from it.
    pub bold: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
}

fn summarize_column(samples: &[(Method, Vec<f64>, usize)], k: usize, metric: MetricKind) -> Result<Vec<SummaryCell>> {
    let stats: Vec<(f64, f64)> = samples.iter().map(|(_, v, _)| (mean(v), std_dev(v))).collect();
    let best = (0..samples.len()).filter(|&i| !samples[i].1.is_empty()).min_by(|&a, &b| {
        let (ma, sa) = stats[a];
        let (mb, sb) = stats[b];
        let by_mean = if metric.higher_is_better() { mb.total_cmp(&ma) } else { ma.total_cmp(&mb) };
        by_mean.then(sa.total_cmp(&sb))
    });
    let mut cells = Vec::with_capacity(samples.len());
    for (i, (method, values, recorded)) in samples.iter().enumerate() {
        let is_best = Some(i) == best;
        let p_value = match best {
            Some(b) if !is_best && !values.is_empty() => Some(mann_whitney_u(values, &samples[b].1)?.p),
            _ => None,
        };
        cells.push(SummaryCell {
            method: *method,
            k,
            metric,
            n: values.len(),
            recorded: *recorded,
            mean: stats[i].0,
            std: stats[i].1,
            stars: p_value.map_or("", significance_stars).to_string(),
            bold: is_best || p_value.is_some_and(|p| p >= ALPHA),
            p_value,
            best: is_best,
        });
    }
    Ok(cells)
}

/// Mean ± standard deviation per method, metric and k, with Mann-Whitney
/// tests of every method against the best one. Failed runs are left out.
pub fn summarize(store: &ResultStore) -> Result<Summary> {
    if store.records.is_empty() {
        return Err(Error::Lookup("the result store is empty".into()));
    }
    let mut cells = Vec::new();
    for metric in [MetricKind::BalancedAccuracy, MetricKind::ReconstructionError] {
        for k in store.ks() {
            let samples: Vec<(Method, Vec<f64>, usize)> = store
                .methods()
                .into_iter()
                .filter(|&m| store.cell(m, k).next().is_some())
                .map(|m| {
                    let values = store.cell(m, k).filter_map(|r| r.metric(metric)).collect();
                    (m, values, store.cell(m, k).count())
                })
                .collect();
            cells.extend(summarize_column(&samples, k, metric)?);
        }
    }
    Ok(Summary { cells })
}

impl Summary {
    pub fn get(&self, method: Method, k: usize, metric: MetricKind) -> Option<&SummaryCell> {
        self.cells.iter().find(|c| c.method == method && c.k == k && c.metric == metric)
    }

    /// Markdown tables, one per metric, with methods as rows and k as
    /// columns. Bold marks the best method and those not significantly
    /// worse; stars give the significance level against the best.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut grouped: BTreeMap<MetricKind, (Vec<usize>, Vec<Method>)> = BTreeMap::new();
        for c in &self.cells {
            let (ks, methods) = grouped.entry(c.metric).or_default();
            if !ks.contains(&c.k) {
                ks.push(c.k);
            }
            if !methods.contains(&c.method) {
                methods.push(c.method);
            }
        }
        for (metric, (ks, methods)) in grouped {
            let _ = writeln!(out, "{}\n", metric.title());
            let _ = write!(out, "| Method |");
            for k in &ks {
                let _ = write!(out, " k = {k} |");
            }
            let _ = write!(out, "\n|---|");
            out.push_str(&"---|".repeat(ks.len()));
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "| {} |", m.label());
                for &k in &ks {
                    let text = match self.get(*m, k, metric) {
                        Some(c) if c.n == 0 => "n/a".to_string(),
                        Some(c) => {
                            let body = format!("{:.2} ± {:.2}", c.mean, c.std);
                            let body = if c.bold { format!("**{body}**") } else { body };
                            let reduced = if c.n < c.recorded { format!(" (n={})", c.n) } else { String::new() };
                            format!("{body}{}{reduced}", c.stars)
                        }
                        None => String::new(),
                    };
                    let _ = write!(out, " {text} |");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    BestReconstruction,
    BestAccuracy,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "best_reconstruction" => Ok(Criterion::BestReconstruction),
            "best_accuracy" => Ok(Criterion::BestAccuracy),
            other => Err(Error::Config(format!("unknown criterion `{other}`"))),
        }
    }
}

/// The successful run of `(method, k)` that is best under `criterion`;
/// ties go to the lowest run index.
pub fn select_run(store: &ResultStore, method: Method, k: usize, criterion: Criterion) -> Result<&RunRecord> {
    let (metric, sign) = match criterion {
        Criterion::BestReconstruction => (MetricKind::ReconstructionError, 1.0),
        Criterion::BestAccuracy => (MetricKind::BalancedAccuracy, -1.0),
    };
    let mut best: Option<(&RunRecord, f64)> = None;
    for r in store.cell(method, k) {
        if let Some(v) = r.metric(metric) {
            if best.is_none_or(|(_, b)| sign * v < sign * b) {
                best = Some((r, v));
            }
        }
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| Error::Lookup(format!("no successful {method} runs with k = {k}")))
}

/// The selected run's expressions, one `X~j = ...` line per latent
/// dimension (and `X^j = ...` per decoder output), after a comment line
/// naming the run.
pub fn export_expressions(store: &ResultStore, method: Method, k: usize, criterion: Criterion) -> Result<String> {
    let r = select_run(store, method, k, criterion)?;
    if r.expressions.is_empty() {
        return Err(Error::Lookup(format!("{method} produces no expressions")));
    }
    let mut out = format!(
        "# {method} k={k} run={} balanced_accuracy={} reconstruction_error={}\n",
        r.run,
        r.balanced_accuracy.map_or("n/a".into(), |v| format!("{v:.4}")),
        r.reconstruction_error.map_or("n/a".into(), |v| format!("{v:.4}")),
    );
    for (j, e) in r.expressions.iter().enumerate() {
        let _ = writeln!(out, "X~{} = {e}", j + 1);
    }
    for (j, e) in r.decoder_expressions.iter().enumerate() {
        let _ = writeln!(out, "X^{} = {e}", j + 1);
    }
    Ok(out)
}

/// Reads `lhs = rhs` lines back from [`export_expressions`] output.
pub fn parse_exported(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(" = "))
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .collect()
}

/// What `validate-data` reports about a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataReport {
    pub path: PathBuf,
    pub rows: usize,
    pub features: usize,
    pub feature_names: Vec<String>,
    pub class_counts: Vec<(String, usize)>,
    pub constant_features: Vec<String>,
}

impl fmt::Display for DataReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {} rows, {} numeric features", self.path.display(), self.rows, self.features)?;
        if self.class_counts.is_empty() {
            writeln!(f, "no label column")?;
        } else {
            writeln!(f, "{} classes:", self.class_counts.len())?;
            for (name, n) in &self.class_counts {
                writeln!(f, "  {name}: {n}")?;
            }
        }
        if !self.constant_features.is_empty() {
            writeln!(f, "constant features: {}", self.constant_features.join(", "))?;
        }
        Ok(())
    }
}

pub fn validate_data(cfg: &ExperimentConfig) -> Result<DataReport> {
    let d = cfg.load_dataset()?;
    let class_counts = match &d.labels {
        Some(labels) => d
            .class_names
            .iter()
            .enumerate()
            .map(|(c, name)| (name.clone(), labels.iter().filter(|&&l| l == c).count()))
            .collect(),
        None => Vec::new(),
    };
    let constant_features = (0..d.p())
        .filter(|&j| {
            let col = d.features.column(j);
            col.iter().all(|&v| v == col[0])
        })
        .map(|j| d.feature_names[j].clone())
        .collect();
    Ok(DataReport {
        path: cfg.dataset.clone(),
        rows: d.n(),
        features: d.p(),
        feature_names: d.feature_names.clone(),
        class_counts,
        constant_features,
    })
}
