//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (no libtest harness) so the report is always
//! printed, including under `cargo test`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use semioccam::baseline::{self, SoftmaxHead};
use semioccam::dedup::{self, Layout, Manifest, PackedImages};
use semioccam::linalg::RowMatrix;
use semioccam::pipeline::{self, Dataset, TrainParams};
use semioccam::pseudo::{self, PseudoConfig, Scores};
use semioccam::sgmm::{self, EmConfig, EmData, MStepOptions, Responsibilities};
use semioccam::synth::{self, BlobSpec};
use semioccam::LabelSet;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

/// Mixture-shaped instance: `k` class blobs with random centers, 10% of
/// rows labeled.
fn em_instance(r: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> (semioccam::FeatureMatrix, LabelSet, Vec<usize>) {
    let centers = random_rows(r, k, d, 3.0);
    let (x, y) = blobs(r, &centers, n / k, 1.0);
    let labeled: Vec<usize> = (0..x.len()).filter(|i| i % 10 == 0).collect();
    let labels = LabelSet::from_pairs(labeled.iter().map(|&i| (i, y[i]))).unwrap();
    (fm(&x, d), labels, labeled)
}

fn em_monotonicity() -> Outcome {
    let start = Instant::now();
    let mut r = rng(100);
    let mut worst = f64::INFINITY;
    let mut iterations = 0;
    for inst in 0..20 {
        let l = if inst % 2 == 0 { 3 } else { 6 };
        let (x, labels, labeled) = em_instance(&mut r, 500, 8, 3);
        let unlabeled: Vec<usize> = (0..x.n()).filter(|i| !labeled.contains(i)).collect();
        let init = sgmm::kmeanspp_init(&x, &labels, l, inst).map_err(|e| e.to_string())?;
        let (fu, fl) = (x.select_rows(&unlabeled), x.select_rows(&labeled));
        let y = labels.classes_of(&labeled).unwrap();
        let data = EmData::new(&fu, &fl, &y).unwrap();
        let fit = sgmm::fit_em(init, &data, &EmConfig { max_iter: 100, tol: 0.0, ..EmConfig::default() })
            .map_err(|e| format!("instance {inst}: {e}"))?;
        iterations += fit.trace.len() - 1;
        for (t, w) in fit.trace.windows(2).enumerate() {
            worst = worst.min(w[1] - w[0]);
            ensure(w[1] >= w[0] - 1e-8, || format!("instance {inst} (L={l}) step {t}: {} -> {}", w[0], w[1]))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("20 instances, {iterations} EM steps, smallest step {worst:.2e}, {secs:.2} s"))
}

fn random_init(r: &mut ChaCha8Rng, l: usize, d: usize) -> Params {
    let covs = (0..l)
        .map(|_| {
            let a = random_rows(r, d, d, 0.4);
            (0..d)
                .map(|i| (0..d).map(|j| (0..d).map(|m| a[i][m] * a[j][m]).sum::<f64>() + if i == j { 1.0 } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    Params { weights: vec![1.0 / l as f64; l], means: random_rows(r, l, d, 2.0), covs, p: vec![vec![1.0]; l] }
}

fn classical_reduction() -> Outcome {
    let mut r = rng(200);
    let centers = random_rows(&mut r, 3, 4, 3.0);
    let (x, _) = blobs(&mut r, &centers, 67, 1.0);
    let x: Mat = x.into_iter().take(200).collect();
    let init = random_init(&mut r, 3, 4);
    let xu = fm(&x, 4);
    let none = fm(&vec![], 4);
    let data = EmData::new(&xu, &none, &[]).unwrap();
    let fit = sgmm::fit_em(init.to_model(1e-6), &data, &EmConfig { max_iter: 25, tol: 0.0, ..EmConfig::default() })
        .map_err(|e| e.to_string())?;
    ensure(fit.trace.len() == 26, || format!("ran {} iterations instead of 25", fit.trace.len() - 1))?;
    let want = classical_gmm_em(&init, &x, 25, 1e-6);
    let diff = max_abs_diff(&Params::from_model(&fit.model).flat_gaussian(), &want.flat_gaussian());
    ensure(diff <= 1e-6, || format!("max abs parameter difference {diff:.3e}"))?;
    Ok(format!("n=200 d=4 L=3, 25 iterations, max abs difference {diff:.2e}"))
}

fn m_step_oracle() -> Outcome {
    let mut r = rng(300);
    let mut worst: f64 = 0.0;
    for inst in 0..50 {
        let d = r.random_range(1..=3);
        let l = r.random_range(1..=4);
        let k = r.random_range(1..=3);
        let nl = if inst % 5 == 0 { 0 } else { r.random_range(1..=10) };
        let nu = r.random_range(1..=30 - nl);
        let xu = random_rows(&mut r, nu, d, 2.0);
        let xl = random_rows(&mut r, nl, d, 2.0);
        let labels: Vec<u32> = (0..nl).map(|_| r.random_range(1..=k as u32)).collect();
        let gu = random_resp(&mut r, nu, l);
        let gl = random_resp(&mut r, nl, l);
        let (fu, fl) = (fm(&xu, d), fm(&xl, d));
        let data = EmData::new(&fu, &fl, &labels).unwrap();
        let resp = Responsibilities {
            unlabeled: row_matrix(&gu, l),
            labeled: if nl == 0 { RowMatrix::zeros(0, l) } else { row_matrix(&gl, l) },
        };
        let got = sgmm::m_step(&resp, &data, k, &MStepOptions::default()).map_err(|e| format!("instance {inst}: {e}"))?;
        let want = m_step(&gu, &gl, &xu, &xl, &labels, k, 1e-6, 1e-6);
        let diff = max_abs_diff(&Params::from_model(&got).flat(), &want.flat());
        worst = worst.max(diff);
        ensure(diff <= 1e-10, || format!("instance {inst} (n={}, d={d}, L={l}): difference {diff:.3e}", nu + nl))?;
    }
    Ok(format!("50 micro-instances, max abs difference {worst:.2e}"))
}

fn planted_accuracy() -> Outcome {
    let start = Instant::now();
    let mut accs = vec![];
    for seed in 0..3 {
        // 504 rows per class: 4 labeled, 500 unlabeled
        let spec = BlobSpec { n_classes: 3, dim: 10, train_per_class: 504, separation: 8.0, seed, ..BlobSpec::default() };
        let data = Dataset::from_synth(synth::generate(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let params = TrainParams { per_class: 4, components: 3, pca_dim: 10, seed, ..TrainParams::default() };
        let out = pipeline::run_on(&data, &params).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(out.metrics.n_unlabeled == 1500, || format!("{} unlabeled rows", out.metrics.n_unlabeled))?;
        accs.push(out.metrics.accuracy);
    }
    let secs = start.elapsed().as_secs_f64();
    let min = accs.iter().copied().fold(1.0, f64::min);
    ensure(min >= 0.99, || format!("accuracies {accs:?}"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("accuracies {accs:?}, {secs:.2} s"))
}

fn pseudo_label_law() -> Outcome {
    let mut r = rng(400);
    let mut selected = 0;
    for trial in 0..200 {
        let k = r.random_range(2..=6);
        let n = r.random_range(0..=150);
        let proba: Mat = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..k)
                    .map(|_| if r.random_bool(0.2) { 0.0 } else { r.random_range(0.0f64..1.0).powi(6) })
                    .collect();
                let s: f64 = raw.iter().sum();
                if s == 0.0 { vec![1.0 / k as f64; k] } else { raw.iter().map(|v| v / s).collect() }
            })
            .collect();
        let ids: Vec<usize> = (0..n).rev().collect();
        let cfg = PseudoConfig { tau: r.random_range(0.3..0.99), alpha: r.random_range(0.01..=1.0) };
        let scores = Scores::from_proba(row_matrix(&proba, k)).with_sample_ids(ids.clone()).unwrap();
        let dp = pseudo::proportional_sample(&pseudo::build_candidates(&scores, &cfg, k), &cfg);
        let (n_final, want) = brute_force_pseudo_labels(&proba, &ids, k, cfg.tau, cfg.alpha);
        ensure(dp.per_class_count == n_final, || format!("trial {trial}: n_final {} vs {n_final}", dp.per_class_count))?;
        let got: Vec<(usize, u32, f64)> = dp.entries.iter().map(|e| (e.sample, e.class, e.confidence)).collect();
        ensure(got == want, || format!("trial {trial}: selection differs"))?;
        selected += got.len();
    }
    Ok(format!("200 trials, {selected} pseudo-labels, sets and order identical"))
}

/// Random head and data whose rows sit at least `margin` away from the
/// confidence threshold and from argmax ties, so the masked loss is smooth
/// in a neighbourhood of the parameters.
fn smooth_unsup_instance(r: &mut ChaCha8Rng, k: usize, d: usize, n: usize, tau: f64) -> (SoftmaxHead, semioccam::FeatureMatrix) {
    let margin = 1e-2;
    loop {
        let params: Vec<f64> = (0..k * d + k).map(|_| normal(r)).collect();
        let head = SoftmaxHead::from_params(k, d, &params);
        let x = fm(&random_rows(r, n, d, 1.5), d);
        let p = baseline::head_proba(&head, &x).unwrap();
        let ok = p.iter_rows().all(|row| {
            let mut s = row.to_vec();
            s.sort_by(|a, b| b.total_cmp(a));
            (s[0] - tau).abs() > margin && s[0] - s[1] > margin
        });
        let confident = p.iter_rows().filter(|row| row.iter().any(|&v| v > tau)).count();
        if ok && confident > 0 {
            return (head, x);
        }
    }
}

fn gradient_check() -> Outcome {
    let mut r = rng(500);
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let k = r.random_range(2..=5);
        let d = r.random_range(1..=5);
        let n = r.random_range(3..=12);
        let tau = r.random_range(0.4..0.8);
        let (head, x) = smooth_unsup_instance(&mut r, k, d, n, tau);
        let labels: Vec<u32> = (0..n).map(|_| r.random_range(1..=k as u32)).collect();
        let theta = head.params();

        let (_, g) = baseline::supervised_loss_and_grad(&head, &x, &labels, None).map_err(|e| e.to_string())?;
        let fd = fd_gradient(|p| baseline::supervised_loss(&SoftmaxHead::from_params(k, d, p), &x, &labels).unwrap(), &theta, 1e-4);
        let e_sup = relative_error(&g.flatten(), &fd, 1e-12);

        let (_, g) = baseline::unsupervised_loss_and_grad(&head, &x, tau, None).map_err(|e| e.to_string())?;
        let fd = fd_gradient(|p| baseline::unsupervised_loss(&SoftmaxHead::from_params(k, d, p), &x, tau).unwrap(), &theta, 1e-4);
        let e_unsup = relative_error(&g.flatten(), &fd, 1e-12);

        worst = worst.max(e_sup).max(e_unsup);
        ensure(e_sup <= 1e-5 && e_unsup <= 1e-5, || format!("instance {inst}: sup {e_sup:.2e}, unsup {e_unsup:.2e}"))?;
    }
    Ok(format!("20 instances, worst relative error {worst:.2e}"))
}

fn dedup_correctness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let m = Manifest { width: 8, height: 8, channels: 3, layout: Layout::ChwColumnMajor, train_count: Some(1000), test_count: Some(100) };
    let fx = dedup_fixture(dir.path(), &m, 1000, 100, 37, 600);
    let mut reports = vec![];
    for bs in [1, 64, 1000] {
        let (_, report) = dedup::dedup_files(&fx.train, &fx.test, &m, bs).map_err(|e| e.to_string())?;
        reports.push(report);
    }
    let pairs: Vec<(usize, usize)> = reports[0].duplicates.iter().map(|d| (d.train_index, d.test_index)).collect();
    ensure(pairs == fx.pairs, || format!("found {} pairs, expected the 37 planted", pairs.len()))?;
    ensure(reports.iter().all(|r| *r == reports[0]), || "reports differ across batch sizes".into())?;
    ensure(reports[0].train_count() == 1000, || "duplicates + valid != train size".into())?;

    let cleaned = dir.path().join("clean.bin");
    PackedImages::open(&fx.train, m, None)
        .and_then(|p| p.write_subset(&reports[0].valid_indices, &cleaned))
        .map_err(|e| e.to_string())?;
    let clean_manifest = Manifest { train_count: Some(963), ..m };
    let (_, again) = dedup::dedup_files(&cleaned, &fx.test, &clean_manifest, 64).map_err(|e| e.to_string())?;
    ensure(again.duplicates.is_empty(), || format!("{} duplicates after cleaning", again.duplicates.len()))?;
    Ok("37/37 planted pairs at batch sizes 1, 64, 1000; re-scan of cleaned split finds 0".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_semioccam");
    let run = |args: &[&str]| -> Result<(), String> {
        let o = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())
    };
    let p = |rel: &str| dir.path().join(rel).to_str().unwrap().to_owned();
    run(&["synth", "--out", &p("data"), "--seed", "9"])?;
    let toml = "features = \"data/train.sofb\"\nlabels = \"data/train_labels.csv\"\n\
                test_features = \"data/test.sofb\"\ntest_labels = \"data/test_labels.csv\"\n\
                components = 4\npca_dim = 8\nseed = 11\n";
    std::fs::write(p("run.toml"), toml).map_err(|e| e.to_string())?;
    run(&["train", "--config", &p("run.toml"), "--out", &p("first")])?;
    run(&["train", "--config", &p("run.toml"), "--out", &p("second")])?;
    let read = |d: &str| std::fs::read(Path::new(&p(d)).join("metrics.json")).map_err(|e| e.to_string());
    let (a, b) = (read("first")?, read("second")?);
    ensure(a == b, || "metrics.json differs between runs".into())?;
    Ok(format!("two `train` runs, metrics.json byte-identical ({} bytes)", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("EM monotonicity", em_monotonicity),
        ("classical GMM reduction", classical_reduction),
        ("M-step oracle equivalence", m_step_oracle),
        ("planted-model accuracy", planted_accuracy),
        ("pseudo-label law", pseudo_label_law),
        ("baseline gradient check", gradient_check),
        ("dedup correctness", dedup_correctness),
        ("train determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
