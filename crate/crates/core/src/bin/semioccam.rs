use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use semioccam::baseline::BaselineConfig;
use semioccam::dedup::{self, Manifest};
use semioccam::error::{Error, Result};
use semioccam::pipeline::{self, Dataset, SweepAxis, TrainOptions};
use semioccam::synth::{self, BlobSpec};
use semioccam::{dataio, pca, sgmm};

#[derive(Parser)]
#[command(name = "semioccam", version, about = "Semi-supervised Gaussian-mixture classification over feature vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full training pipeline once and write metrics and model artifacts.
    Train(TrainArgs),
    /// Repeat training over a grid of values for one hyperparameter.
    Sweep(SweepArgs),
    /// Score a saved model on a labeled feature file.
    Eval(EvalArgs),
    /// Train the softmax-head baseline on the same split and reduction.
    Baseline(BaselineArgs),
    /// Find training images that duplicate test images byte-for-byte.
    Dedup(DedupArgs),
    /// Write a synthetic Gaussian-blob dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    options: TrainOptions,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainOptions> {
        let file = match &self.config {
            Some(path) => TrainOptions::from_toml_file(path)?,
            None => TrainOptions::default(),
        };
        Ok(self.options.clone().or(file))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    axis: SweepAxis,
    /// Comma-separated grid, e.g. `1,2,4,8`.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    /// Comma-separated seeds for each cell.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    seeds: Vec<u64>,
    /// Trend table destination.
    #[arg(long)]
    csv: PathBuf,
    /// Error-rate increase tolerated between consecutive cells before a
    /// trend violation is reported.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pca: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    t_ramp: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct DedupArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Duplicate pairs as CSV; not created when there are none.
    #[arg(long)]
    report: PathBuf,
    /// Retained training indices, one per line.
    #[arg(long)]
    valid_out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = BlobSpec::default().n_classes)]
    classes: usize,
    #[arg(long, default_value_t = BlobSpec::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = BlobSpec::default().train_per_class)]
    train_per_class: usize,
    #[arg(long, default_value_t = BlobSpec::default().test_per_class)]
    test_per_class: usize,
    #[arg(long, default_value_t = BlobSpec::default().separation)]
    separation: f64,
    #[arg(long, default_value_t = BlobSpec::default().sigma)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn in_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => e.in_stage(stage),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("json serialize");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = in_stage("config", args.config.resolve().and_then(|o| o.resolve()))?;
    let out = pipeline::run(&cfg)?;
    info!("stage timings: {:?}", out.timings);
    println!("accuracy {:.6} error_rate {:.6}", out.metrics.accuracy, out.metrics.error_rate);
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let opts = in_stage("config", args.config.resolve())?;
    let params = opts.params();
    let data = in_stage("load", opts.data_paths().and_then(|p| Dataset::load(&p)))?;
    let rows = in_stage("sweep", pipeline::sweep(&data, &params, args.axis, &args.values, &args.seeds))?;
    in_stage("write", pipeline::write_sweep_csv(args.axis, &rows, &args.csv))?;
    for r in &rows {
        println!("{}={} mean_error {:.6} std {:.6}", args.axis, r.value, r.mean_error, r.std_error);
    }
    for v in pipeline::trend_violations(&rows, args.noise) {
        println!("trend violation: error rises at {}={v}", args.axis);
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let model = in_stage("load", sgmm::read_model(&args.model))?;
    let pca = in_stage("load", pca::read_pca(&args.pca))?;
    let x = in_stage("load", dataio::read_features(&args.features))?;
    let labels = in_stage(
        "load",
        dataio::read_labels(&args.labels, x.n()).and_then(|l| l.classes_of(&(0..x.n()).collect::<Vec<_>>())),
    )?;
    let acc = in_stage("evaluate", pipeline::evaluate(&model, &pca, &x, &labels))?;
    println!("{}", serde_json::json!({ "accuracy": acc, "error_rate": 1.0 - acc, "n_test": x.n() }));
    Ok(())
}

fn baseline(args: &BaselineArgs) -> Result<()> {
    let opts = in_stage("config", args.config.resolve())?;
    let params = opts.params();
    let defaults = BaselineConfig::default();
    let cfg = BaselineConfig {
        lambda_max: args.lambda_max.unwrap_or(defaults.lambda_max),
        t_ramp: args.t_ramp.or(defaults.t_ramp),
        tau: params.tau,
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        seed: params.seed,
    };
    in_stage("config", cfg.validate())?;
    let data = in_stage("load", opts.data_paths().and_then(|p| Dataset::load(&p)))?;
    let metrics = pipeline::run_baseline_on(&data, &params, &cfg)?;
    if let Some(dir) = &opts.out {
        in_stage(
            "write",
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Io { path: dir.clone(), source: e })
                .and_then(|_| write_json(&dir.join(pipeline::METRICS_FILE), &metrics)),
        )?;
    }
    println!("accuracy {:.6} error_rate {:.6}", metrics.accuracy, metrics.error_rate);
    Ok(())
}

fn dedup(args: &DedupArgs) -> Result<()> {
    let manifest = in_stage("manifest", Manifest::read(&args.manifest))?;
    let (index, report) = in_stage("scan", dedup::dedup_files(&args.train, &args.test, &manifest, args.batch_size))?;
    let wrote = in_stage("write", dedup::write_report(&report, &args.report))?;
    in_stage("write", dedup::write_valid_indices(&report, &args.valid_out))?;
    if !wrote {
        info!("no duplicates; {} not written", args.report.display());
    }
    println!(
        "{} duplicates, {} retained, {} duplicate images within test",
        report.duplicates.len(),
        report.valid_indices.len(),
        index.intra_test_duplicates.len()
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = BlobSpec {
        n_classes: args.classes,
        dim: args.dim,
        train_per_class: args.train_per_class,
        test_per_class: args.test_per_class,
        separation: args.separation,
        sigma: args.sigma,
        seed: args.seed,
    };
    let data = in_stage("generate", synth::generate(&spec))?;
    in_stage("write", synth::write_dataset(&data, &args.out))?;
    println!("wrote {} train and {} test rows to {}", data.train.n(), data.test.n(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Dedup(a) => dedup(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
