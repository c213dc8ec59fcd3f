//! ROC/AUC, histograms and the MNIST experiment runner.

mod experiment;
mod histogram;
mod roc;

pub use experiment::{
    generator_manifest, plan, random_decoder, rerun_from_manifest, run_experiment, self_probes, train_or_load,
    ConditionSummary, DatasetDescription, ExperimentConfig, ExperimentContext, ExperimentKind, ExperimentManifest,
    ExperimentOutcome, ExperimentSummary, GeneratorRecord, Preset, SubsetSpec, TrialManifest, TrialSummary,
    HIGH_CONFIDENCE, MANIFEST_FILE, SUMMARY_FILE,
};
pub use histogram::{histogram, Histogram};
pub use roc::{auc, roc, RocCurve};

/// Linear-interpolated quantile, `p` in `[0, 1]`. Panics on an empty
/// sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
