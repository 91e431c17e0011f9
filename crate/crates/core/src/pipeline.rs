//! End-to-end training: load features, reduce with PCA, seed the mixture
//! with K-means++, run the first EM phase, pseudo-label once, augment the
//! labeled set, run the second EM phase and evaluate on the test split.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{self, BaselineConfig};
use crate::dataio::{self, FeatureMatrix, LabelSet};
use crate::error::{Error, Result};
use crate::pca::{self, PcaModel};
use crate::pseudo::{self, PseudoConfig, PseudoLabelSet, SamplingStatus, TrainingSet};
use crate::sgmm::{self, CovarianceCentering, EmConfig, EmData, InitOptions, SgmmModel};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// Labeled samples drawn per class.
    pub per_class: usize,
    /// Mixture components `L`.
    pub components: usize,
    pub pca_dim: usize,
    pub tau: f64,
    pub alpha: f64,
    pub phase1: EmConfig,
    pub phase2: EmConfig,
    pub seed: u64,
    pub reg_epsilon: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            per_class: 4,
            components: 10,
            pca_dim: 60,
            tau: pseudo::DEFAULT_TAU,
            alpha: pseudo::DEFAULT_ALPHA,
            phase1: EmConfig::default(),
            phase2: EmConfig::default(),
            seed: 0,
            reg_epsilon: sgmm::DEFAULT_REG_EPSILON,
        }
    }
}

impl TrainParams {
    pub fn pseudo(&self) -> PseudoConfig {
        PseudoConfig { tau: self.tau, alpha: self.alpha }
    }

    pub fn validate(&self) -> Result<()> {
        self.pseudo().validate()?;
        self.phase1.validate()?;
        self.phase2.validate()?;
        if self.components == 0 || self.pca_dim == 0 {
            return Err(Error::Config("components and pca_dim must be >= 1".into()));
        }
        if !(self.reg_epsilon >= 0.0) {
            return Err(Error::Config("reg_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Cifar10,
    Cifar100,
    Stl10,
}

impl Preset {
    pub fn apply(self, p: &mut TrainParams) {
        let (components, pca_dim) = match self {
            Preset::Cifar10 => (10, 60),
            Preset::Cifar100 => (100, 60),
            Preset::Stl10 => (15, 45),
        };
        p.components = components;
        p.pca_dim = pca_dim;
        if self == Preset::Stl10 {
            p.phase1.tol = 1.0;
            p.phase2.tol = 1.0;
        }
    }
}

/// Training and test data held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: FeatureMatrix,
    pub train_labels: LabelSet,
    pub test: FeatureMatrix,
    /// One class per test row.
    pub test_labels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub test_features: PathBuf,
    pub test_labels: PathBuf,
}

impl Dataset {
    pub fn load(paths: &DataPaths) -> Result<Self> {
        for p in [&paths.features, &paths.labels, &paths.test_features, &paths.test_labels] {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        let train = dataio::read_features(&paths.features)?;
        let train_labels = dataio::read_labels(&paths.labels, train.n())?;
        let test = dataio::read_features(&paths.test_features)?;
        let test_label_set = dataio::read_labels(&paths.test_labels, test.n())?;
        let test_labels = test_label_set.classes_of(&(0..test.n()).collect::<Vec<_>>())?;
        Ok(Dataset { train, train_labels, test, test_labels })
    }

    pub fn from_synth(d: crate::synth::SynthData) -> Result<Self> {
        let test_labels = d.test_labels.classes_of(&(0..d.test.n()).collect::<Vec<_>>())?;
        Ok(Dataset { train: d.train, train_labels: d.train_labels, test: d.test, test_labels })
    }

    pub fn n_classes(&self) -> usize {
        self.train_labels.num_classes() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoSummary {
    pub selected: usize,
    pub per_class_count: usize,
    pub status: SamplingStatus,
}

/// Contents of `metrics.json`. Shared by the mixture and softmax-head runs;
/// fields that do not apply to a method are omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub method: String,
    pub accuracy: f64,
    pub error_rate: f64,
    pub n_train: usize,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub pca_cumulative_variance: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub phase1_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub phase2_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_labels: Option<PseudoSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_label_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
    /// Every resolved setting, defaults included.
    pub config: serde_json::Value,
}

/// Wall-clock seconds per stage, kept out of `metrics.json` so that file
/// stays byte-identical across repeated runs.
pub type Timings = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub model: SgmmModel,
    pub pca: PcaModel,
    pub pseudo_labels: PseudoLabelSet,
    pub timings: Timings,
}

struct Stopwatch {
    timings: Timings,
    last: Instant,
}

impl Stopwatch {
    fn new() -> Self {
        Stopwatch { timings: Timings::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.insert(stage.to_string(), (now - self.last).as_secs_f64());
        self.last = now;
    }
}

/// Fraction of `predicted` equal to `truth`.
pub fn accuracy(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Argument(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::Argument("cannot score an empty test set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Accuracy of `model` on `test_features` after the training PCA.
pub fn evaluate(model: &SgmmModel, pca: &PcaModel, test_features: &FeatureMatrix, test_labels: &[u32]) -> Result<f64> {
    if test_features.n() != test_labels.len() {
        return Err(Error::Argument(format!(
            "{} test rows but {} test labels",
            test_features.n(),
            test_labels.len()
        )));
    }
    let z = pca::transform(pca, test_features)?;
    accuracy(&sgmm::predict(model, &z)?, test_labels)
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs every stage once on in-memory data.
pub fn run_on(data: &Dataset, params: &TrainParams) -> Result<RunOutcome> {
    stage("config", params.validate())?;
    let k = data.n_classes();
    if k == 0 {
        return Err(Error::Config("training labels are empty".into()).in_stage("config"));
    }
    if params.components < k {
        return Err(Error::Config(format!("{} components for {k} classes; need L >= K", params.components))
            .in_stage("config"));
    }
    let mut clock = Stopwatch::new();

    let split = stage("split", dataio::split_labeled(&data.train, &data.train_labels, params.per_class, params.seed))?;
    let labels_l = stage("split", data.train_labels.classes_of(&split.labeled))?;
    clock.lap("split");

    let pca_model = stage("pca", pca::fit_pca(&data.train, params.pca_dim))?;
    let z = stage("pca", pca::transform(&pca_model, &data.train))?;
    clock.lap("pca");

    let init = stage(
        "init",
        sgmm::kmeanspp_init_with(
            &z,
            &data.train_labels.restrict(&split.labeled),
            &InitOptions {
                n_components: params.components,
                n_classes: Some(k),
                seed: params.seed,
                reg_epsilon: params.reg_epsilon,
            },
        ),
    )?;
    clock.lap("init");

    let fl = z.select_rows(&split.labeled);
    let fu = z.select_rows(&split.unlabeled);
    let fit1 = stage("phase1", EmData::new(&fu, &fl, &labels_l).and_then(|d| sgmm::fit_em(init, &d, &params.phase1)))?;
    clock.lap("phase1");

    let mut pseudo_rounds = 0;
    let dp = stage("pseudo", {
        pseudo_rounds += 1;
        pseudo::score_unlabeled(&fit1.model, &fu)
            .and_then(|s| s.with_sample_ids(split.unlabeled.clone()))
            .map(|s| pseudo::proportional_sample(&pseudo::build_candidates(&s, &params.pseudo(), k), &params.pseudo()))
    })?;
    let set = TrainingSet {
        labeled: split.labeled.iter().copied().zip(labels_l.iter().copied()).collect(),
        unlabeled: split.unlabeled.clone(),
    };
    let augmented = stage("pseudo", pseudo::augment(&set, &dp))?;
    clock.lap("pseudo");

    let idx_l: Vec<usize> = augmented.labeled.iter().map(|&(i, _)| i).collect();
    let labels_l2: Vec<u32> = augmented.labeled.iter().map(|&(_, c)| c).collect();
    let fl2 = z.select_rows(&idx_l);
    let fu2 = z.select_rows(&augmented.unlabeled);
    let fit2 = stage(
        "phase2",
        EmData::new(&fu2, &fl2, &labels_l2).and_then(|d| sgmm::fit_em(fit1.model.clone(), &d, &params.phase2)),
    )?;
    clock.lap("phase2");

    let acc = stage("evaluate", evaluate(&fit2.model, &pca_model, &data.test, &data.test_labels))?;
    clock.lap("evaluate");

    let report = pca::explained_variance_report(&pca_model);
    let metrics = RunMetrics {
        method: "sgmm".into(),
        accuracy: acc,
        error_rate: 1.0 - acc,
        n_train: data.train.n(),
        n_labeled: split.labeled.len(),
        n_unlabeled: split.unlabeled.len(),
        n_test: data.test.n(),
        n_classes: k,
        pca_cumulative_variance: report.cumulative.last().copied().unwrap_or(0.0),
        phase1_trace: fit1.trace,
        phase2_trace: fit2.trace,
        pseudo_labels: Some(PseudoSummary {
            selected: dp.entries.len(),
            per_class_count: dp.per_class_count,
            status: dp.status,
        }),
        pseudo_label_rounds: Some(pseudo_rounds),
        loss_trace: Vec::new(),
        config: serde_json::json!({ "params": params }),
    };
    Ok(RunOutcome { metrics, model: fit2.model, pca: pca_model, pseudo_labels: dp, timings: clock.timings })
}

pub const METRICS_FILE: &str = "metrics.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const MODEL_FILE: &str = "model.sogm";
pub const PCA_FILE: &str = "pca.sopc";
pub const PSEUDO_FILE: &str = "pseudo_labels.csv";

/// A fully resolved `train` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataPaths,
    pub params: TrainParams,
    pub output_dir: Option<PathBuf>,
}

pub fn metrics_json(m: &RunMetrics) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("metrics serialize");
    s.push('\n');
    s
}

/// Loads the data, runs the pipeline and writes artifacts. On failure any
/// artifact already written is removed.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let data = stage("load", Dataset::load(&cfg.data))?;
    let mut outcome = run_on(&data, &cfg.params)?;
    outcome.metrics.config = serde_json::json!({ "data": cfg.data, "params": cfg.params });
    if let Some(dir) = &cfg.output_dir {
        stage("write", write_artifacts(&outcome, dir))?;
    }
    Ok(outcome)
}

fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let p = dir.join(MODEL_FILE);
        written.push(p.clone());
        sgmm::write_model(&outcome.model, &p)?;
        let p = dir.join(PCA_FILE);
        written.push(p.clone());
        pca::write_pca(&outcome.pca, &p)?;
        let p = dir.join(PSEUDO_FILE);
        written.push(p.clone());
        pseudo::write_pseudo_labels(&outcome.pseudo_labels, &p)?;
        let p = dir.join(TIMINGS_FILE);
        written.push(p.clone());
        let timings = serde_json::to_string_pretty(&outcome.timings).expect("timings serialize");
        std::fs::write(&p, timings).map_err(|e| Error::io(&p, e))?;
        let p = dir.join(METRICS_FILE);
        written.push(p.clone());
        std::fs::write(&p, metrics_json(&outcome.metrics)).map_err(|e| Error::io(&p, e))
    })();
    if result.is_err() {
        for p in written {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatedSummary {
    pub seeds: Vec<u64>,
    pub error_rates: Vec<f64>,
    pub mean_error: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std_error: f64,
}

/// Runs once per seed (overriding `params.seed`) and aggregates the error
/// rate.
pub fn run_repeated(data: &Dataset, params: &TrainParams, seeds: &[u64]) -> Result<RepeatedSummary> {
    if seeds.is_empty() {
        return Err(Error::Argument("need at least one seed".into()));
    }
    let mut error_rates = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let p = TrainParams { seed, ..params.clone() };
        let out = run_on(data, &p).map_err(|e| Error::Config(format!("seed {seed}: {e}")))?;
        error_rates.push(out.metrics.error_rate);
    }
    let (mean_error, std_error) = mean_std(&error_rates);
    Ok(RepeatedSummary { seeds: seeds.to_vec(), error_rates, mean_error, std_error })
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    PerClass,
    PcaDim,
    Components,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::PerClass => "per_class",
            SweepAxis::PcaDim => "pca_dim",
            SweepAxis::Components => "components",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_class" => Ok(SweepAxis::PerClass),
            "pca_dim" => Ok(SweepAxis::PcaDim),
            "components" | "L" => Ok(SweepAxis::Components),
            other => Err(Error::Argument(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: usize,
    pub mean_error: f64,
    pub std_error: f64,
}

pub fn sweep(data: &Dataset, params: &TrainParams, axis: SweepAxis, values: &[usize], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&value| {
            let mut p = params.clone();
            match axis {
                SweepAxis::PerClass => p.per_class = value,
                SweepAxis::PcaDim => p.pca_dim = value,
                SweepAxis::Components => p.components = value,
            }
            let s = run_repeated(data, &p, seeds).map_err(|e| Error::Config(format!("{axis}={value}: {e}")))?;
            Ok(SweepRow { value, mean_error: s.mean_error, std_error: s.std_error })
        })
        .collect()
}

/// Values at which the mean error rises above the previous cell by more
/// than `noise`.
pub fn trend_violations(rows: &[SweepRow], noise: f64) -> Vec<usize> {
    rows.windows(2)
        .filter(|w| w[1].mean_error > w[0].mean_error + noise)
        .map(|w| w[1].value)
        .collect()
}

pub fn write_sweep_csv(axis: SweepAxis, rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| dataio::csv_io(path, e))?;
    w.write_record([axis.to_string().as_str(), "mean_error", "std_error"])
        .map_err(|e| dataio::csv_io(path, e))?;
    for r in rows {
        w.write_record([r.value.to_string(), r.mean_error.to_string(), r.std_error.to_string()])
            .map_err(|e| dataio::csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The softmax-head ablation on the same split and PCA as the mixture run.
pub fn run_baseline_on(data: &Dataset, params: &TrainParams, cfg: &BaselineConfig) -> Result<RunMetrics> {
    let k = data.n_classes();
    let split = stage("split", dataio::split_labeled(&data.train, &data.train_labels, params.per_class, params.seed))?;
    let labels_l = stage("split", data.train_labels.classes_of(&split.labeled))?;
    let pca_model = stage("pca", pca::fit_pca(&data.train, params.pca_dim))?;
    let z = stage("pca", pca::transform(&pca_model, &data.train))?;
    let fl = z.select_rows(&split.labeled);
    let fu = z.select_rows(&split.unlabeled);
    let fit = stage("baseline", baseline::train_baseline(&fl, &labels_l, &fu, k, cfg))?;
    let zt = stage("evaluate", pca::transform(&pca_model, &data.test))?;
    let acc = stage("evaluate", baseline::predict(&fit.head, &zt).and_then(|p| accuracy(&p, &data.test_labels)))?;
    let report = pca::explained_variance_report(&pca_model);
    Ok(RunMetrics {
        method: "softmax".into(),
        accuracy: acc,
        error_rate: 1.0 - acc,
        n_train: data.train.n(),
        n_labeled: split.labeled.len(),
        n_unlabeled: split.unlabeled.len(),
        n_test: data.test.n(),
        n_classes: k,
        pca_cumulative_variance: report.cumulative.last().copied().unwrap_or(0.0),
        phase1_trace: Vec::new(),
        phase2_trace: Vec::new(),
        pseudo_labels: None,
        pseudo_label_rounds: None,
        loss_trace: fit.loss_trace,
        config: serde_json::json!({
            "params": { "per_class": params.per_class, "pca_dim": params.pca_dim, "seed": params.seed },
            "baseline": cfg,
            "resolved_t_ramp": fit.t_ramp,
        }),
    })
}

/// Flag/TOML-level `train` options. Every field is optional so a TOML file
/// and command-line flags can be layered: defaults, then the preset, then
/// the file, then flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    /// Training feature file (SOFB).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Training label CSV (`index,class`).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub test_features: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Output directory for metrics and model artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Number of mixture components.
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub pca_dim: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iter1: Option<usize>,
    #[arg(long)]
    pub tol1: Option<f64>,
    #[arg(long)]
    pub max_iter2: Option<usize>,
    #[arg(long)]
    pub tol2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reg_epsilon: Option<f64>,
    /// Center covariance updates on the updated or the previous mean.
    #[arg(long, value_parser = parse_centering)]
    pub covariance_centering: Option<CovarianceCentering>,
}

fn parse_centering(s: &str) -> std::result::Result<CovarianceCentering, String> {
    match s {
        "updated" => Ok(CovarianceCentering::Updated),
        "previous" => Ok(CovarianceCentering::Previous),
        other => Err(format!("expected `updated` or `previous`, got {other:?}")),
    }
}

impl TrainOptions {
    /// Reads a TOML file; relative paths inside it resolve against the
    /// file's directory.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut opts: TrainOptions =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut opts.features, &mut opts.labels, &mut opts.test_features, &mut opts.test_labels, &mut opts.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(opts)
    }

    /// Fields set in `self` win over `fallback`.
    pub fn or(self, fallback: TrainOptions) -> TrainOptions {
        TrainOptions {
            features: self.features.or(fallback.features),
            labels: self.labels.or(fallback.labels),
            test_features: self.test_features.or(fallback.test_features),
            test_labels: self.test_labels.or(fallback.test_labels),
            out: self.out.or(fallback.out),
            preset: self.preset.or(fallback.preset),
            per_class: self.per_class.or(fallback.per_class),
            components: self.components.or(fallback.components),
            pca_dim: self.pca_dim.or(fallback.pca_dim),
            tau: self.tau.or(fallback.tau),
            alpha: self.alpha.or(fallback.alpha),
            max_iter1: self.max_iter1.or(fallback.max_iter1),
            tol1: self.tol1.or(fallback.tol1),
            max_iter2: self.max_iter2.or(fallback.max_iter2),
            tol2: self.tol2.or(fallback.tol2),
            seed: self.seed.or(fallback.seed),
            reg_epsilon: self.reg_epsilon.or(fallback.reg_epsilon),
            covariance_centering: self.covariance_centering.or(fallback.covariance_centering),
        }
    }

    pub fn params(&self) -> TrainParams {
        let mut p = TrainParams::default();
        if let Some(preset) = self.preset {
            preset.apply(&mut p);
        }
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { p.$($dst).+ = v; })*
            };
        }
        set!(
            per_class => per_class,
            components => components,
            pca_dim => pca_dim,
            tau => tau,
            alpha => alpha,
            max_iter1 => phase1.max_iter,
            tol1 => phase1.tol,
            max_iter2 => phase2.max_iter,
            tol2 => phase2.tol,
            seed => seed,
            reg_epsilon => reg_epsilon,
        );
        if let Some(c) = self.covariance_centering {
            p.phase1.centering = c;
            p.phase2.centering = c;
        }
        p
    }

    pub fn data_paths(&self) -> Result<DataPaths> {
        let need = |v: &Option<PathBuf>, name: &str| {
            v.clone().ok_or_else(|| Error::Config(format!("missing required setting `{name}`")))
        };
        Ok(DataPaths {
            features: need(&self.features, "features")?,
            labels: need(&self.labels, "labels")?,
            test_features: need(&self.test_features, "test_features")?,
            test_labels: need(&self.test_labels, "test_labels")?,
        })
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let params = self.params();
        params.validate()?;
        Ok(RunConfig { data: self.data_paths()?, params, output_dir: self.out.clone() })
    }
}
