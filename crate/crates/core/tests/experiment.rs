mod common;

use std::fs;
use std::path::Path;

use genattr::data::{LabeledDataset, Mnist};
use genattr::eval::{rerun_from_manifest, run_experiment, ExperimentConfig, ExperimentContext, ExperimentKind, Preset};
use genattr::ImageShape;
use rand::Rng as _;

/// Stand-in digits: label `l` lights a vertical bar at column `2 + 2l`, plus
/// faint noise.
fn synthetic_split(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = genattr::seed::rng(seed);
    let mut pixels = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 10) as u8;
        for y in 0..28 {
            for x in 0..28usize {
                let on = x.abs_diff(2 + 2 * label as usize) <= 1 && (4..24).contains(&y);
                let v = if on { 230 } else { rng.random_range(0..20) };
                pixels.push(v);
            }
        }
        labels.push(label);
    }
    LabeledDataset::new(ImageShape::gray(28, 28), pixels, labels, format!("synthetic({seed})")).unwrap()
}

fn tiny_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(kind, Preset::Fast);
    cfg.trials = 1;
    cfg.probes_per_generator = 4;
    cfg.subset_size = 100;
    cfg.train.steps = 40;
    cfg.train.batch_size = 16;
    cfg.inversion.restarts = 2;
    cfg.inversion.steps = 20;
    cfg.qualities = vec![90, 50];
    cfg.histogram_bins = 5;
    cfg
}

fn files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push(entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned());
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn odd_even_writes_reports_and_reruns_identically() {
    let mnist = Mnist { train: synthetic_split(200, 1), test: synthetic_split(60, 2) };
    let ctx = ExperimentContext::new(&mnist);
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let outcome = run_experiment(&tiny_config(ExperimentKind::OddEven), &ctx, &first).unwrap();

    let names = files(&first);
    for expected in [
        "manifest.json",
        "summary.json",
        "trial0/gen0.mlpgen",
        "trial0/gen1.mlpgen",
        "trial0/reports.jsonl",
        "trial0/roc.tsv",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }
    assert_eq!(outcome.records[0][0].len(), 8);
    assert!(outcome.records[0][0].iter().all(|r| r.scores.len() == 2));

    let second = dir.path().join("b");
    rerun_from_manifest(&first.join("manifest.json"), &ctx, &second).unwrap();
    assert_eq!(files(&second), names);
    for n in &names {
        assert_eq!(fs::read(first.join(n)).unwrap(), fs::read(second.join(n)).unwrap(), "{n} differs");
    }
}

#[test]
fn compression_writes_one_curve_per_condition() {
    let mnist = Mnist { train: synthetic_split(200, 3), test: synthetic_split(60, 4) };
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let ctx = ExperimentContext::new(&mnist).with_cache(&cache);
    let out = dir.path().join("run");
    let outcome = run_experiment(&tiny_config(ExperimentKind::Compression), &ctx, &out).unwrap();
    let labels: Vec<&str> = outcome.summary.trials[0].conditions.iter().map(|c| c.condition.as_str()).collect();
    assert_eq!(labels, ["png", "q90", "q50"]);
    for l in labels {
        assert!(out.join(format!("trial0/roc_{l}.tsv")).is_file());
        assert!(out.join(format!("trial0/reports_{l}.jsonl")).is_file());
    }
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 4, "two cached autoencoders, two files each");
}

#[test]
fn bad_configs_are_rejected_before_work() {
    let mnist = Mnist { train: synthetic_split(20, 5), test: synthetic_split(20, 6) };
    let ctx = ExperimentContext::new(&mnist);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(ExperimentKind::Shuffle);
    cfg.trials = 0;
    assert!(run_experiment(&cfg, &ctx, dir.path()).is_err());
    let mut cfg = tiny_config(ExperimentKind::Shuffle);
    cfg.subset_size = 1000;
    assert!(run_experiment(&cfg, &ctx, dir.path()).is_err());
}
