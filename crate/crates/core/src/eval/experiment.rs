//! End-to-end MNIST experiments: train generator pairs, synthesize probes,
//! attribute them and summarize with ROC curves and histograms.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{histogram, median, roc, RocCurve};
use crate::attribution::{attribute_many, write_records, AttributionReport, InversionConfig, ReportRecord};
use crate::data::{LabeledDataset, Mnist, Parity};
use crate::mlp::MlpGenerator;
use crate::optim::standard_normal_sampler;
use crate::perturb::{write_png8, CompressionConfig};
use crate::seed;
use crate::tensor::{ImageTensor, LatentVector};
use crate::train::{
    load_generator_with_manifest, save_generator_with_manifest, train_autoencoder_with, weight_init, Autoencoder,
    TrainConfig, TrainingManifest,
};
use crate::{write_atomic, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
const MANIFEST_VERSION: u32 = 1;
/// Probes per trial saved as images next to their reconstructions.
const EXAMPLE_PROBES: usize = 4;
/// `|S|` above which an attribution counts as high confidence.
pub const HIGH_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Generators trained on even and on odd digits.
    OddEven,
    /// Same training subset, different order and initialization.
    Shuffle,
    /// Same subset in the same order; only the initialization differs.
    SameOrder,
    /// The first shuffle pair, probes saved through PNG and JPEG at several
    /// qualities.
    Compression,
    /// Probes from an untrained random decoder attributed between the first
    /// shuffle pair.
    RandomControl,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::OddEven,
        ExperimentKind::Shuffle,
        ExperimentKind::SameOrder,
        ExperimentKind::Compression,
        ExperimentKind::RandomControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::OddEven => "odd_even",
            ExperimentKind::Shuffle => "shuffle",
            ExperimentKind::SameOrder => "same_order",
            ExperimentKind::Compression => "compression",
            ExperimentKind::RandomControl => "random_control",
        }
    }

    /// Seed family: every same-data experiment derives its generators from
    /// the same trial seeds, so their trial-`t` generator 0 is one network.
    fn family(self) -> &'static str {
        match self {
            ExperimentKind::OddEven => "odd_even",
            _ => "same_data",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Usage(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// The published protocol: 20,000 training steps, 500 probes per
    /// generator, 10 restarts of 1000 steps.
    Paper,
    /// 5,000 training steps, 100 probes, 5 restarts of 300 steps.
    Fast,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Preset::Paper),
            "fast" => Ok(Preset::Fast),
            _ => Err(Error::Usage(format!("unknown preset '{s}' (expected paper or fast)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub probes_per_generator: usize,
    pub master_seed: u64,
    /// Size of the shared training subset of the same-data experiments.
    pub subset_size: usize,
    /// Training settings; the two seeds are replaced per generator.
    pub train: TrainConfig,
    /// Inversion settings; the master seed is replaced per trial.
    pub inversion: InversionConfig,
    /// JPEG qualities of the compression sweep.
    pub qualities: Vec<u8>,
    pub histogram_bins: usize,
}

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind, preset: Preset) -> Self {
        let (steps, probes, inversion) = match preset {
            Preset::Paper => (20_000, 500, InversionConfig::paper()),
            Preset::Fast => (5_000, 100, InversionConfig::fast()),
        };
        let trials = match kind {
            ExperimentKind::Compression | ExperimentKind::RandomControl => 1,
            _ => 5,
        };
        Self {
            kind,
            trials,
            probes_per_generator: probes,
            master_seed: 0,
            subset_size: 30_000,
            train: TrainConfig { steps, ..TrainConfig::default() },
            inversion,
            qualities: vec![90, 70, 50],
            histogram_bins: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Usage("at least one trial is required".into()));
        }
        if self.probes_per_generator == 0 {
            return Err(Error::Usage("at least one probe per generator is required".into()));
        }
        if self.subset_size == 0 {
            return Err(Error::Usage("training subset must not be empty".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Usage("histograms need at least one bin".into()));
        }
        self.train.validate()?;
        self.inversion.validate()?;
        for &q in &self.qualities {
            CompressionConfig::Jpeg { quality: q }.validate()?;
        }
        Ok(())
    }

    fn trial_seed(&self, trial: usize) -> u64 {
        seed::derive(self.master_seed, &[seed::tag(self.kind.family()), trial as u64])
    }

    /// Probe post-processing conditions, PNG first.
    fn conditions(&self) -> Vec<CompressionConfig> {
        let mut c = vec![CompressionConfig::Png8];
        if self.kind == ExperimentKind::Compression {
            c.extend(self.qualities.iter().map(|&quality| CompressionConfig::Jpeg { quality }));
        }
        c
    }
}

/// How a generator's training data is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSpec {
    Parity(Parity),
    Shuffled { seed: u64, count: usize },
}

impl SubsetSpec {
    fn select(&self, train: &LabeledDataset) -> Result<LabeledDataset> {
        match *self {
            SubsetSpec::Parity(p) => Ok(train.filter_parity(p)),
            SubsetSpec::Shuffled { seed, count } => train.shuffle_take(seed, count),
        }
    }

    /// Restrict held-out digits to the generator's training distribution.
    fn probe_pool(&self, test: &LabeledDataset) -> Vec<usize> {
        match *self {
            SubsetSpec::Parity(p) => (0..test.len()).filter(|&i| p.matches(test.labels()[i])).collect(),
            SubsetSpec::Shuffled { .. } => (0..test.len()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub subset: SubsetSpec,
    pub weight_init_seed: u64,
    pub data_order_seed: u64,
    /// Set after training.
    pub id: Option<String>,
    pub weight_hash: Option<String>,
    pub final_train_loss: Option<f64>,
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub trial: usize,
    pub trial_seed: u64,
    pub probe_seed: u64,
    pub inversion_seed: u64,
    pub generators: Vec<GeneratorRecord>,
    /// Seed of the untrained decoder of the random control.
    pub random_decoder_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescription {
    pub train: String,
    pub train_size: usize,
    pub test: String,
    pub test_size: usize,
    pub probe_latents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub rng: String,
    pub inversion_config_hash: String,
    pub dataset: DatasetDescription,
    pub trials: Vec<TrialManifest>,
}

/// Results of one trial under one probe condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    /// Fraction of probes attributed correctly with `|S| > 0.9`.
    pub confident_correct: Option<f64>,
    /// Median residual of each generator on its own probes.
    pub median_own_l_min: Vec<f64>,
    /// Median residual of the chosen generator over all probes.
    pub median_chosen_l_min: f64,
    pub low_confidence_fraction: f64,
    pub failed_inversions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub conditions: Vec<ConditionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub kind: ExperimentKind,
    pub trials: Vec<TrialSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub manifest: ExperimentManifest,
    pub summary: ExperimentSummary,
    /// Per trial, per condition (same order as the summary).
    pub records: Vec<Vec<Vec<ReportRecord>>>,
    pub curves: Vec<Vec<Option<RocCurve>>>,
}

/// Shared resources for running experiments.
pub struct ExperimentContext<'a> {
    pub mnist: &'a Mnist,
    /// Trained autoencoders are stored here keyed by their training inputs,
    /// so experiments sharing a generator train it once.
    pub cache_dir: Option<PathBuf>,
    pub log: Box<dyn Fn(&str) + 'a>,
}

impl<'a> ExperimentContext<'a> {
    pub fn new(mnist: &'a Mnist) -> Self {
        Self { mnist, cache_dir: None, log: Box::new(|_| {}) }
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn with_log(mut self, log: impl Fn(&str) + 'a) -> Self {
        self.log = Box::new(log);
        self
    }
}

/// Seeds and training subsets of every trial, before anything is trained.
pub fn plan(cfg: &ExperimentConfig, mnist: &Mnist) -> ExperimentManifest {
    let trials = (0..cfg.trials)
        .map(|t| {
            let ts = cfg.trial_seed(t);
            let init = |g: u64| seed::derive(ts, &[1, g]);
            let order = |g: u64| seed::derive(ts, &[2, g]);
            let shared = SubsetSpec::Shuffled { seed: seed::derive(ts, &[0]), count: cfg.subset_size };
            let gen = |subset: SubsetSpec, init_seed: u64, order_seed: u64| GeneratorRecord {
                subset,
                weight_init_seed: init_seed,
                data_order_seed: order_seed,
                id: None,
                weight_hash: None,
                final_train_loss: None,
                file: None,
            };
            let generators = match cfg.kind {
                ExperimentKind::OddEven => vec![
                    gen(SubsetSpec::Parity(Parity::Even), init(0), order(0)),
                    gen(SubsetSpec::Parity(Parity::Odd), init(1), order(1)),
                ],
                ExperimentKind::SameOrder => {
                    vec![gen(shared.clone(), init(0), order(0)), gen(shared, init(1), order(0))]
                }
                _ => vec![gen(shared.clone(), init(0), order(0)), gen(shared, init(1), order(1))],
            };
            TrialManifest {
                trial: t,
                trial_seed: ts,
                probe_seed: seed::derive(ts, &[3, seed::tag(cfg.kind.name())]),
                inversion_seed: seed::derive(ts, &[4, seed::tag(cfg.kind.name())]),
                generators,
                random_decoder_seed: (cfg.kind == ExperimentKind::RandomControl).then(|| seed::derive(ts, &[5])),
            }
        })
        .collect();
    let probe_latents = match cfg.kind {
        ExperimentKind::RandomControl => "standard normal latents through an untrained decoder",
        _ => "encoder codes of held-out test digits, disjoint per generator",
    };
    ExperimentManifest {
        version: MANIFEST_VERSION,
        kind: cfg.kind,
        config: cfg.clone(),
        rng: seed::RNG_ALGORITHM.to_string(),
        inversion_config_hash: cfg.inversion.hash(),
        dataset: DatasetDescription {
            train: mnist.train.provenance().to_string(),
            train_size: mnist.train.len(),
            test: mnist.test.provenance().to_string(),
            test_size: mnist.test.len(),
            probe_latents: probe_latents.to_string(),
        },
        trials,
    }
}

fn cache_key(subset: &LabeledDataset, cfg: &TrainConfig) -> String {
    let mut h = Sha256::new();
    h.update(subset.provenance().as_bytes());
    h.update((subset.len() as u64).to_le_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(seed::RNG_ALGORITHM.as_bytes());
    h.finalize()[..12].iter().map(|b| format!("{b:02x}")).collect()
}

/// Train the autoencoder described by `rec`, or load it from the context's
/// cache.
pub fn train_or_load(ctx: &ExperimentContext, rec: &GeneratorRecord, base: &TrainConfig) -> Result<Autoencoder> {
    let subset = rec.subset.select(&ctx.mnist.train)?;
    let cfg =
        TrainConfig { weight_init_seed: rec.weight_init_seed, data_order_seed: rec.data_order_seed, ..base.clone() };
    let key = cache_key(&subset, &cfg);
    if let Some(dir) = &ctx.cache_dir {
        let (enc, dec) = (dir.join(format!("{key}.enc.mlpgen")), dir.join(format!("{key}.dec.mlpgen")));
        if enc.exists() && dec.exists() {
            let (encoder, m1) = load_generator_with_manifest(&enc)?;
            let (decoder, m2) = load_generator_with_manifest(&dec)?;
            if let (Some(manifest), Some(m2)) = (m1, m2) {
                if manifest == m2 && manifest.config == cfg {
                    (ctx.log)(&format!("  reusing cached autoencoder {key}"));
                    return Ok(Autoencoder { encoder, decoder, manifest });
                }
            }
        }
    }
    (ctx.log)(&format!("  training on {} ({} digits, {} steps)", subset.provenance(), subset.len(), cfg.steps));
    let log_every = (cfg.steps / 10).max(1);
    let ae = train_autoencoder_with(&subset, &cfg, |step, loss| {
        if step % log_every == 0 {
            (ctx.log)(&format!("    step {step:>6}  loss {loss:.6}"));
        }
    })?;
    if let Some(dir) = &ctx.cache_dir {
        save_generator_with_manifest(&ae.encoder, &ae.manifest, dir.join(format!("{key}.enc.mlpgen")))?;
        save_generator_with_manifest(&ae.decoder, &ae.manifest, dir.join(format!("{key}.dec.mlpgen")))?;
    }
    Ok(ae)
}

/// Clean synthetic probes: held-out digits from `pool` passed through
/// the autoencoder.
fn synthesize_probes(ae: &Autoencoder, test: &LabeledDataset, indices: &[usize]) -> Result<Vec<ImageTensor>> {
    let codes = ae.encoder.forward_batch(&test.pixel_rows(indices), indices.len())?;
    let out = ae.decoder.forward_batch(&codes, indices.len())?;
    out.chunks_exact(ae.decoder.output_dim()).map(|c| ImageTensor::new(ae.decoder.output_shape(), c.to_vec())).collect()
}

/// Disjoint held-out indices per generator, drawn from each generator's
/// probe pool.
fn probe_indices(cfg: &ExperimentConfig, trial: &TrialManifest, test: &LabeledDataset) -> Result<Vec<Vec<usize>>> {
    let n = cfg.probes_per_generator;
    let order = test.epoch_order(trial.probe_seed, 0);
    let mut taken = vec![false; test.len()];
    let mut out = Vec::new();
    for (g, rec) in trial.generators.iter().enumerate() {
        let pool = rec.subset.probe_pool(test);
        let mut in_pool = vec![false; test.len()];
        for i in pool {
            in_pool[i] = true;
        }
        let picked: Vec<usize> = order.iter().copied().filter(|&i| in_pool[i] && !taken[i]).take(n).collect();
        if picked.len() < n {
            return Err(Error::Usage(format!(
                "only {} held-out digits available for generator {g}, {n} requested",
                picked.len()
            )));
        }
        for &i in &picked {
            taken[i] = true;
        }
        out.push(picked);
    }
    Ok(out)
}

fn summarize(
    condition: &str,
    records: &[ReportRecord],
    n_gens: usize,
    has_sources: bool,
) -> Result<(ConditionSummary, Option<RocCurve>)> {
    let chosen_l: Vec<f64> = records.iter().filter_map(|r| r.l_min[r.chosen]).collect();
    let mut own = Vec::new();
    for g in 0..n_gens {
        let l: Vec<f64> = records.iter().filter(|r| r.source == Some(g)).filter_map(|r| r.l_min[g]).collect();
        own.push(if l.is_empty() { f64::NAN } else { median(&l) });
    }
    let n = records.len() as f64;
    let mut curve = None;
    let (mut auc, mut accuracy, mut confident) = (None, None, None);
    if has_sources {
        let correct = records.iter().filter(|r| r.source == Some(r.chosen)).count();
        accuracy = Some(correct as f64 / n);
        if n_gens == 2 {
            let pairs: Vec<(f64, bool)> =
                records.iter().map(|r| (r.pair_score.expect("two generators"), r.source == Some(0))).collect();
            let c = roc(&pairs)?;
            auc = Some(c.auc);
            curve = Some(c);
            let hits = records
                .iter()
                .filter(|r| {
                    let s = r.pair_score.expect("two generators");
                    s.abs() > HIGH_CONFIDENCE && r.source == Some(if s > 0.0 { 0 } else { 1 })
                })
                .count();
            confident = Some(hits as f64 / n);
        }
    }
    Ok((
        ConditionSummary {
            condition: condition.to_string(),
            auc,
            accuracy,
            confident_correct: confident,
            median_own_l_min: own,
            median_chosen_l_min: if chosen_l.is_empty() { f64::NAN } else { median(&chosen_l) },
            low_confidence_fraction: records.iter().filter(|r| r.low_confidence).count() as f64 / n,
            failed_inversions: records.iter().map(|r| r.l_min.iter().filter(|l| l.is_none()).count()).sum(),
        },
        curve,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn save_examples(dir: &Path, probes: &[ImageTensor], reports: &[AttributionReport], per_gen: usize) -> Result<()> {
    for g in 0..reports.len() / per_gen.max(1) {
        for k in 0..EXAMPLE_PROBES.min(per_gen) {
            let p = g * per_gen + k;
            let stem = format!("g{g}_{k:02}");
            write_png8(&probes[p], dir.join(format!("{stem}_probe.png")))?;
            for (j, inv) in reports[p].inversions.iter().enumerate() {
                if let Some(inv) = inv {
                    write_png8(&inv.reconstruction, dir.join(format!("{stem}_rec{j}.png")))?;
                }
            }
        }
    }
    Ok(())
}

/// Run `cfg` and write manifest, generators, reports, curves and
/// histograms below `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, ctx: &ExperimentContext, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let manifest = plan(cfg, ctx.mnist);
    execute(manifest, ctx, out_dir)
}

/// Repeat the experiment recorded in a manifest file.
pub fn rerun_from_manifest(manifest_path: &Path, ctx: &ExperimentContext, out_dir: &Path) -> Result<ExperimentOutcome> {
    let text = std::fs::read_to_string(manifest_path)?;
    let recorded: ExperimentManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format { what: "experiment manifest", detail: e.to_string() })?;
    if recorded.version != MANIFEST_VERSION {
        return Err(Error::Format {
            what: "experiment manifest",
            detail: format!("version {} (expected {MANIFEST_VERSION})", recorded.version),
        });
    }
    recorded.config.validate()?;
    let planned = plan(&recorded.config, ctx.mnist);
    let seeds_match = planned.trials.len() == recorded.trials.len()
        && planned.trials.iter().zip(&recorded.trials).all(|(p, r)| {
            p.trial_seed == r.trial_seed
                && p.probe_seed == r.probe_seed
                && p.inversion_seed == r.inversion_seed
                && p.random_decoder_seed == r.random_decoder_seed
                && p.generators.iter().zip(&r.generators).all(|(a, b)| {
                    a.subset == b.subset
                        && a.weight_init_seed == b.weight_init_seed
                        && a.data_order_seed == b.data_order_seed
                })
        });
    if !seeds_match || planned.rng != recorded.rng {
        return Err(Error::Consistency("manifest seeds do not match this build's seed derivation".into()));
    }
    let outcome = execute(planned, ctx, out_dir)?;
    for (t, r) in outcome.manifest.trials.iter().zip(&recorded.trials) {
        for (a, b) in t.generators.iter().zip(&r.generators) {
            if b.weight_hash.is_some() && a.weight_hash != b.weight_hash {
                return Err(Error::Consistency(format!(
                    "trial {}: retrained generator {} differs from the recorded weights",
                    t.trial,
                    a.id.as_deref().unwrap_or("?")
                )));
            }
        }
    }
    Ok(outcome)
}

fn execute(mut manifest: ExperimentManifest, ctx: &ExperimentContext, out_dir: &Path) -> Result<ExperimentOutcome> {
    let cfg = manifest.config.clone();
    std::fs::create_dir_all(out_dir)?;
    let conditions = cfg.conditions();
    let mut summary = ExperimentSummary { kind: cfg.kind, trials: Vec::new() };
    let mut all_records = Vec::new();
    let mut all_curves = Vec::new();

    for trial in manifest.trials.iter_mut() {
        let t = trial.trial;
        (ctx.log)(&format!("{} trial {t}", cfg.kind));
        let tdir = out_dir.join(format!("trial{t}"));
        std::fs::create_dir_all(&tdir)?;

        let mut aes = Vec::new();
        for (g, rec) in trial.generators.iter_mut().enumerate() {
            let ae = train_or_load(ctx, rec, &cfg.train)?;
            let file = format!("trial{t}/gen{g}.mlpgen");
            save_generator_with_manifest(&ae.decoder, &ae.manifest, out_dir.join(&file))?;
            write_text(&tdir.join(format!("gen{g}.txt")), &ae.manifest.report_text())?;
            rec.id = Some(ae.decoder.id().to_string());
            rec.weight_hash = Some(ae.decoder.weight_hash());
            rec.final_train_loss = Some(ae.manifest.final_loss);
            rec.file = Some(file);
            aes.push(ae);
        }
        let gens: Vec<MlpGenerator> = aes.iter().map(|a| a.decoder.clone()).collect();

        let (clean, ids, sources) = if let Some(rs) = trial.random_decoder_seed {
            let random = random_decoder(&gens[0], rs)?;
            let mut rng = seed::rng(trial.probe_seed);
            let mut probes = Vec::new();
            for _ in 0..cfg.probes_per_generator {
                let z = LatentVector::new(standard_normal_sampler(&mut rng, random.input_dim()))?;
                probes.push(random.generate(&z)?);
            }
            let ids = (0..probes.len()).map(|k| format!("t{t}-random-{k:04}")).collect();
            (probes, ids, vec![None; cfg.probes_per_generator])
        } else {
            let picks = probe_indices(&cfg, trial, &ctx.mnist.test)?;
            let mut probes = Vec::new();
            let mut ids = Vec::new();
            let mut sources = Vec::new();
            for (g, (ae, idx)) in aes.iter().zip(&picks).enumerate() {
                probes.extend(synthesize_probes(ae, &ctx.mnist.test, idx)?);
                ids.extend(idx.iter().enumerate().map(|(k, i)| format!("t{t}-g{g}-{k:04}-test{i}")));
                sources.extend(std::iter::repeat_n(Some(g), idx.len()));
            }
            (probes, ids, sources)
        };

        let inv = InversionConfig { master_seed: trial.inversion_seed, ..cfg.inversion.clone() };
        let mut trial_summary = TrialSummary { trial: t, conditions: Vec::new() };
        let mut trial_records = Vec::new();
        let mut trial_curves = Vec::new();
        for cond in &conditions {
            let label = cond.label();
            (ctx.log)(&format!("  attributing {} probes ({label})", clean.len()));
            let probes = clean.iter().map(|p| cond.apply(p)).collect::<Result<Vec<_>>>()?;
            let reports = attribute_many(&probes, &ids, &gens, &inv)?;
            let records: Vec<ReportRecord> = reports.iter().zip(&sources).map(|(r, &s)| r.record(s, &inv)).collect();

            let suffix = if conditions.len() > 1 { format!("_{label}") } else { String::new() };
            write_text(&tdir.join(format!("reports{suffix}.jsonl")), &write_records(&records))?;
            let has_sources = sources.iter().all(Option::is_some);
            let (cs, curve) = summarize(&label, &records, gens.len(), has_sources)?;
            if let Some(c) = &curve {
                write_text(&tdir.join(format!("roc{suffix}.tsv")), &c.to_tsv())?;
            }
            let own: Vec<f64> = records.iter().filter_map(|r| r.source.and_then(|s| r.l_min[s])).collect();
            let chosen: Vec<f64> = records.iter().filter_map(|r| r.l_min[r.chosen]).collect();
            let lmins = if own.is_empty() { chosen } else { own };
            if !lmins.is_empty() {
                write_text(
                    &tdir.join(format!("hist_lmin{suffix}.tsv")),
                    &histogram(&lmins, cfg.histogram_bins)?.to_tsv(),
                )?;
            }
            for g in 0..gens.len() {
                let s: Vec<f64> = records.iter().map(|r| r.scores[g]).filter(|s| s.is_finite()).collect();
                if !s.is_empty() {
                    write_text(
                        &tdir.join(format!("hist_s{g}{suffix}.tsv")),
                        &histogram(&s, cfg.histogram_bins)?.to_tsv(),
                    )?;
                }
            }
            if cond == &conditions[0] {
                let exdir = tdir.join("examples");
                std::fs::create_dir_all(&exdir)?;
                let per = if trial.random_decoder_seed.is_some() { probes.len() } else { cfg.probes_per_generator };
                save_examples(&exdir, &probes, &reports, per)?;
            }
            if let Some(a) = cs.auc {
                (ctx.log)(&format!("  {label}: AUC {a:.4}"));
            }
            trial_summary.conditions.push(cs);
            trial_records.push(records);
            trial_curves.push(curve);
        }
        summary.trials.push(trial_summary);
        all_records.push(trial_records);
        all_curves.push(trial_curves);
    }

    write_text(&out_dir.join(MANIFEST_FILE), &json_pretty(&manifest))?;
    write_text(&out_dir.join(SUMMARY_FILE), &json_pretty(&summary))?;
    Ok(ExperimentOutcome { manifest, summary, records: all_records, curves: all_curves })
}

/// Untrained decoder with the architecture of `like`.
pub fn random_decoder(like: &MlpGenerator, seed: u64) -> Result<MlpGenerator> {
    Ok(weight_init(&like.dims(), seed)?.with_output_shape(like.output_shape())?.with_id(format!("random-{seed}")))
}

/// Convenience for the self-inversion check: clean probes of `ae` from the
/// first `count` held-out digits of a seeded order.
pub fn self_probes(ae: &Autoencoder, test: &LabeledDataset, count: usize, seed: u64) -> Result<Vec<ImageTensor>> {
    if count > test.len() {
        return Err(Error::Usage(format!("{count} probes requested from {} digits", test.len())));
    }
    let idx: Vec<usize> = test.epoch_order(seed, 0).into_iter().take(count).collect();
    synthesize_probes(ae, test, &idx)
}

/// The training manifest recorded in a generator file, if any.
pub fn generator_manifest(path: &Path) -> Result<Option<TrainingManifest>> {
    Ok(load_generator_with_manifest(path)?.1)
}
