//! Generator inversion and minimum-residual attribution.

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::loss::LossKind;
use crate::mlp::MlpGenerator;
use crate::optim::multistart::best_trace;
use crate::optim::{run_restarts, standard_normal_sampler, MultiStartConfig, PlateauConfig, RestartTrace};
use crate::seed;
use crate::tensor::{ImageTensor, LatentVector};
use crate::{Error, Result};

/// Probes inverted together in one lockstep batch.
const PROBES_PER_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    pub restarts: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub loss_kind: LossKind,
    pub scheduler: Option<PlateauConfig>,
    pub master_seed: u64,
    /// Keep every `record_stride`-th loss in the restart traces.
    pub record_stride: usize,
    /// Distribution of the random starting latents.
    pub init: LatentInit,
    /// Start restart 0 from the origin instead of a random draw.
    pub include_zero_start: bool,
    /// Reports whose best one-vs-rest score falls below this are flagged as
    /// low confidence.
    pub confidence_floor: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl InversionConfig {
    /// Ten restarts of 1000 Adam steps at learning rate 0.01.
    pub fn paper() -> Self {
        Self {
            restarts: 10,
            steps: 1000,
            learning_rate: 0.01,
            loss_kind: LossKind::L2,
            scheduler: None,
            master_seed: 0,
            record_stride: 10,
            init: LatentInit::default(),
            include_zero_start: false,
            confidence_floor: 0.5,
        }
    }

    /// Five restarts of 300 steps.
    pub fn fast() -> Self {
        Self { restarts: 5, steps: 300, ..Self::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        self.multistart(self.master_seed).validate()?;
        self.init.validate()?;
        if !(-1.0..=1.0).contains(&self.confidence_floor) {
            return Err(Error::Usage(format!("confidence floor {} outside [-1, 1]", self.confidence_floor)));
        }
        Ok(())
    }

    fn multistart(&self, seed: u64) -> MultiStartConfig {
        MultiStartConfig {
            restarts: self.restarts,
            steps: self.steps,
            learning_rate: self.learning_rate,
            scheduler: self.scheduler,
            record_stride: self.record_stride,
            seed,
        }
    }

    /// Short digest identifying every setting that affects results.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seed used for probe `index` by the batch entry points.
    pub fn probe_seed(&self, index: usize) -> u64 {
        seed::derive(self.master_seed, &[index as u64])
    }
}

/// Distribution of the starting latents of the inversion restarts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatentInit {
    /// Independent uniform coordinates in `[low, high)`. The default
    /// `[0, 1)` is the code range of an autoencoder with a sigmoid
    /// bottleneck.
    Uniform { low: f64, high: f64 },
    /// Independent normal coordinates.
    Normal { mean: f64, std_dev: f64 },
}

impl Default for LatentInit {
    fn default() -> Self {
        LatentInit::Uniform { low: 0.0, high: 1.0 }
    }
}

impl LatentInit {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LatentInit::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            LatentInit::Normal { mean, std_dev } => mean.is_finite() && std_dev.is_finite() && std_dev >= 0.0,
        };
        if !ok {
            return Err(Error::Usage(format!("invalid latent initialization {self:?}")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut seed::Rng, dim: usize) -> Vec<f64> {
        match *self {
            LatentInit::Uniform { low, high } => {
                let dist = Uniform::new(low, high).expect("validated range");
                (0..dim).map(|_| dist.sample(rng)).collect()
            }
            LatentInit::Normal { mean, std_dev } => {
                standard_normal_sampler(rng, dim).into_iter().map(|x| mean + std_dev * x).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub generator_id: String,
    pub z_hat: LatentVector,
    pub l_min: f64,
    pub reconstruction: ImageTensor,
    /// Index of the restart that produced `z_hat`.
    pub best_restart: usize,
    pub traces: Vec<RestartTrace>,
}

/// Mean per-value loss between `probe` and `G(z)`.
pub fn reconstruction_loss(probe: &ImageTensor, gen: &MlpGenerator, z: &LatentVector, kind: LossKind) -> Result<f64> {
    check_probe(gen, probe)?;
    Ok(kind.value(&gen.forward(z)?, probe.data()))
}

fn check_probe(gen: &MlpGenerator, probe: &ImageTensor) -> Result<()> {
    if probe.len() != gen.output_dim() {
        return Err(Error::Shape { context: "probe size", expected: gen.output_dim(), actual: probe.len() });
    }
    Ok(())
}

/// Invert `gen` against `probe` by multi-start Adam descent seeded from
/// `cfg.master_seed`.
pub fn invert(gen: &MlpGenerator, probe: &ImageTensor, cfg: &InversionConfig) -> Result<InversionResult> {
    let mut out = invert_many(gen, std::slice::from_ref(probe), &[cfg.master_seed], cfg)?;
    out.pop().expect("one probe in, one result out")
}

/// Invert `gen` against every probe, probe `p` seeded from `seeds[p]`.
///
/// Probes are optimized in lockstep batches; each result is identical to
/// what [`invert`] returns for that probe and seed alone. The outer error
/// covers configuration and shape problems, the inner one a probe whose
/// every restart diverged.
pub fn invert_many(
    gen: &MlpGenerator,
    probes: &[ImageTensor],
    seeds: &[u64],
    cfg: &InversionConfig,
) -> Result<Vec<Result<InversionResult>>> {
    cfg.validate()?;
    if probes.len() != seeds.len() {
        return Err(Error::Consistency(format!("{} probes but {} seeds", probes.len(), seeds.len())));
    }
    for p in probes {
        check_probe(gen, p)?;
    }
    let chunks: Vec<(&[ImageTensor], &[u64])> =
        probes.chunks(PROBES_PER_CHUNK).zip(seeds.chunks(PROBES_PER_CHUNK)).collect();

    #[cfg(feature = "parallel")]
    let per_chunk: Vec<Result<Vec<Result<InversionResult>>>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|(p, s)| invert_chunk(gen, p, s, cfg)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_chunk: Vec<Result<Vec<Result<InversionResult>>>> =
        chunks.iter().map(|(p, s)| invert_chunk(gen, p, s, cfg)).collect();

    let mut out = Vec::with_capacity(probes.len());
    for chunk in per_chunk {
        out.extend(chunk?);
    }
    Ok(out)
}

fn invert_chunk(
    gen: &MlpGenerator,
    probes: &[ImageTensor],
    seeds: &[u64],
    cfg: &InversionConfig,
) -> Result<Vec<Result<InversionResult>>> {
    let k = cfg.restarts;
    let dim = gen.input_dim();
    let mut starts = Vec::with_capacity(probes.len() * k);
    let mut targets = Vec::with_capacity(probes.len() * gen.output_dim());
    for (probe, &s) in probes.iter().zip(seeds) {
        let ms = cfg.multistart(s);
        for r in 0..k {
            let rs = ms.restart_seed(r);
            let z0 = if cfg.include_zero_start && r == 0 {
                vec![0.0; dim]
            } else {
                cfg.init.sample(&mut seed::rng(rs), dim)
            };
            starts.push((rs, z0));
        }
        targets.extend_from_slice(probe.data());
    }
    let traces = run_restarts(dim, starts, &cfg.multistart(0), |xs, grads, values| {
        gen.latent_loss_grad_rows(xs, &targets, k, cfg.loss_kind, grads, values)
    })?;

    let mut traces = traces.into_iter();
    let mut out = Vec::with_capacity(probes.len());
    for _ in probes {
        let group: Vec<RestartTrace> =
            traces.by_ref().take(k).enumerate().map(|(r, t)| RestartTrace { restart: r, ..t }).collect();
        out.push(match best_trace(&group) {
            None => Err(Error::OptimizationFailed { traces: group }),
            Some(b) => {
                let z_hat = LatentVector::new(group[b].params.clone())?;
                Ok(InversionResult {
                    generator_id: gen.id().to_string(),
                    reconstruction: gen.generate(&z_hat)?,
                    l_min: group[b].final_loss,
                    z_hat,
                    best_restart: b,
                    traces: group,
                })
            }
        });
    }
    Ok(out)
}

/// Pairwise confidence that generator `i` rather than `j` made the probe:
/// `(l_j - l_i) / (l_j + l_i)`.
///
/// Equal losses (including two zeros) give 0. An infinite loss stands for
/// a generator whose inversion failed: against it any finite loss scores 1.
pub fn pair_score(l_i: f64, l_j: f64) -> f64 {
    // Evaluated as (1 - r) / (1 + r) with r the smaller-to-larger ratio,
    // which cannot overflow and is antisymmetric by construction.
    if l_i == l_j {
        0.0
    } else if l_i < l_j {
        let r = l_i / l_j;
        (1.0 - r) / (1.0 + r)
    } else if l_j < l_i {
        let r = l_j / l_i;
        -(1.0 - r) / (1.0 + r)
    } else {
        f64::NAN
    }
}

/// Generator `i` against the best of the others.
pub fn one_vs_rest_score(losses: &[f64], i: usize) -> Result<f64> {
    if losses.len() < 2 {
        return Err(Error::Usage(format!("need at least two losses, got {}", losses.len())));
    }
    if i >= losses.len() {
        return Err(Error::Usage(format!("generator index {i} out of range for {} losses", losses.len())));
    }
    if let Some(bad) = losses.iter().find(|l| l.is_nan() || **l < 0.0) {
        return Err(Error::Usage(format!("losses must be non-negative, got {bad}")));
    }
    let rest = losses.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &l)| l).fold(f64::INFINITY, f64::min);
    Ok(pair_score(losses[i], rest))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub probe_id: String,
    pub probe_seed: u64,
    pub generator_ids: Vec<String>,
    /// `None` where every restart diverged.
    pub inversions: Vec<Option<InversionResult>>,
    pub chosen: usize,
    /// `S` of generator 0 against generator 1, for exactly two generators.
    pub pair_score: Option<f64>,
    pub scores: Vec<f64>,
    pub low_confidence: bool,
}

impl AttributionReport {
    fn assemble(
        probe_id: String,
        probe_seed: u64,
        gens: &[MlpGenerator],
        inversions: Vec<Option<InversionResult>>,
        cfg: &InversionConfig,
    ) -> Result<Self> {
        let losses: Vec<f64> = inversions.iter().map(|r| r.as_ref().map_or(f64::INFINITY, |r| r.l_min)).collect();
        let mut chosen = None;
        for (i, &l) in losses.iter().enumerate() {
            if l.is_finite() && chosen.is_none_or(|c: usize| l < losses[c]) {
                chosen = Some(i);
            }
        }
        let chosen = chosen.ok_or(Error::AttributionFailed)?;
        let scores = (0..losses.len()).map(|i| one_vs_rest_score(&losses, i)).collect::<Result<Vec<_>>>()?;
        let low_confidence = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) < cfg.confidence_floor;
        Ok(Self {
            probe_id,
            probe_seed,
            generator_ids: gens.iter().map(|g| g.id().to_string()).collect(),
            pair_score: (losses.len() == 2).then(|| pair_score(losses[0], losses[1])),
            inversions,
            chosen,
            scores,
            low_confidence,
        })
    }

    pub fn losses(&self) -> Vec<Option<f64>> {
        self.inversions.iter().map(|r| r.as_ref().map(|r| r.l_min)).collect()
    }

    /// Flat record for line-delimited report files. `source` is the index of
    /// the generator known to have produced the probe, if any.
    pub fn record(&self, source: Option<usize>, cfg: &InversionConfig) -> ReportRecord {
        ReportRecord {
            probe_id: self.probe_id.clone(),
            source,
            generator_ids: self.generator_ids.clone(),
            l_min: self.losses(),
            best_restart: self.inversions.iter().map(|r| r.as_ref().map(|r| r.best_restart)).collect(),
            chosen: self.chosen,
            pair_score: self.pair_score,
            scores: self.scores.clone(),
            low_confidence: self.low_confidence,
            probe_seed: self.probe_seed,
            config_hash: cfg.hash(),
        }
    }
}

/// One line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub probe_id: String,
    pub source: Option<usize>,
    pub generator_ids: Vec<String>,
    pub l_min: Vec<Option<f64>>,
    pub best_restart: Vec<Option<usize>>,
    pub chosen: usize,
    pub pair_score: Option<f64>,
    pub scores: Vec<f64>,
    pub low_confidence: bool,
    pub probe_seed: u64,
    pub config_hash: String,
}

/// Serialize records one JSON object per line.
pub fn write_records(records: &[ReportRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_records(text: &str) -> Result<Vec<ReportRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Format { what: "report record", detail: format!("line {}: {e}", n + 1) })
        })
        .collect()
}

fn check_generators(gens: &[MlpGenerator]) -> Result<()> {
    if gens.len() < 2 {
        return Err(Error::Usage(format!("attribution needs at least two generators, got {}", gens.len())));
    }
    Ok(())
}

/// Invert every generator against `probe` (all seeded from
/// `cfg.master_seed`) and pick the smallest residual.
pub fn attribute(probe: &ImageTensor, gens: &[MlpGenerator], cfg: &InversionConfig) -> Result<AttributionReport> {
    let mut reports =
        attribute_seeded(std::slice::from_ref(probe), &["probe".to_string()], &[cfg.master_seed], gens, cfg)?;
    Ok(reports.pop().expect("one report"))
}

/// [`attribute`] for many probes; probe `p` uses seed
/// [`InversionConfig::probe_seed`]`(p)`.
pub fn attribute_many(
    probes: &[ImageTensor],
    ids: &[String],
    gens: &[MlpGenerator],
    cfg: &InversionConfig,
) -> Result<Vec<AttributionReport>> {
    let seeds: Vec<u64> = (0..probes.len()).map(|p| cfg.probe_seed(p)).collect();
    attribute_seeded(probes, ids, &seeds, gens, cfg)
}

fn attribute_seeded(
    probes: &[ImageTensor],
    ids: &[String],
    seeds: &[u64],
    gens: &[MlpGenerator],
    cfg: &InversionConfig,
) -> Result<Vec<AttributionReport>> {
    check_generators(gens)?;
    if ids.len() != probes.len() {
        return Err(Error::Consistency(format!("{} probes but {} ids", probes.len(), ids.len())));
    }
    let mut per_gen = Vec::with_capacity(gens.len());
    for g in gens {
        let results = invert_many(g, probes, seeds, cfg)?;
        per_gen.push(results.into_iter().map(|r| match r {
            Ok(r) => Ok(Some(r)),
            Err(Error::OptimizationFailed { .. }) => Ok(None),
            Err(e) => Err(e),
        }));
    }
    let mut reports = Vec::with_capacity(probes.len());
    for (p, id) in ids.iter().enumerate() {
        let inversions =
            per_gen.iter_mut().map(|it| it.next().expect("one result per probe")).collect::<Result<Vec<_>>>()?;
        reports.push(AttributionReport::assemble(id.clone(), seeds[p], gens, inversions, cfg)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Activation, DenseLayer};
    use crate::tensor::ImageShape;
    use crate::train::weight_init;

    fn small_gen(seed: u64) -> MlpGenerator {
        weight_init(&[3, 8, 16], seed)
            .unwrap()
            .with_output_shape(ImageShape::gray(4, 4))
            .unwrap()
            .with_id(format!("g{seed}"))
    }

    fn small_cfg() -> InversionConfig {
        InversionConfig { restarts: 4, steps: 400, learning_rate: 0.05, ..InversionConfig::paper() }
    }

    #[test]
    fn loss_examples() {
        let layer = DenseLayer::zeros(2, 4, Activation::Sigmoid).unwrap();
        let gen = MlpGenerator::new("half", vec![layer]).unwrap();
        let black = ImageTensor::filled(ImageShape::gray(2, 2), 0.0).unwrap();
        let z = LatentVector::zeros(2);
        assert_eq!(reconstruction_loss(&black, &gen, &z, LossKind::L2).unwrap(), 0.25);
        assert_eq!(reconstruction_loss(&black, &gen, &z, LossKind::L1).unwrap(), 0.5);
        let wrong = ImageTensor::filled(ImageShape::gray(3, 3), 0.0).unwrap();
        assert!(matches!(reconstruction_loss(&wrong, &gen, &z, LossKind::L2), Err(Error::Shape { .. })));
    }

    #[test]
    fn self_inversion_and_reevaluation() {
        let gen = small_gen(1);
        let z_star = LatentVector::new(vec![0.4, -0.9, 1.3]).unwrap();
        let probe = gen.generate(&z_star).unwrap();
        let res = invert(&gen, &probe, &small_cfg()).unwrap();
        assert!(res.l_min < 1e-6, "{}", res.l_min);
        let again = reconstruction_loss(&probe, &gen, &res.z_hat, LossKind::L2).unwrap();
        assert!((again - res.l_min).abs() <= 1e-12);
        let min_final = res.traces.iter().map(|t| t.final_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(res.l_min, min_final);
        assert_eq!(res.reconstruction, gen.generate(&res.z_hat).unwrap());
    }

    #[test]
    fn batched_matches_single() {
        let gen = small_gen(2);
        let probes: Vec<ImageTensor> = (0..20)
            .map(|i| {
                let z = LatentVector::new(vec![i as f64 * 0.1 - 1.0, 0.5, -0.2]).unwrap();
                gen.generate(&z).unwrap()
            })
            .collect();
        let cfg = InversionConfig { steps: 50, ..small_cfg() };
        let seeds: Vec<u64> = (0..20).map(|i| cfg.probe_seed(i)).collect();
        let many = invert_many(&gen, &probes, &seeds, &cfg).unwrap();
        for (i, r) in many.into_iter().enumerate() {
            let single = invert(&gen, &probes[i], &InversionConfig { master_seed: seeds[i], ..cfg.clone() }).unwrap();
            assert_eq!(r.unwrap(), single);
        }
    }

    #[test]
    fn more_restarts_never_worse() {
        let gen = small_gen(3);
        let probe = small_gen(4).generate(&LatentVector::new(vec![1.0, 0.0, -1.0]).unwrap()).unwrap();
        let one = invert(&gen, &probe, &InversionConfig { restarts: 1, steps: 100, ..small_cfg() }).unwrap();
        let ten = invert(&gen, &probe, &InversionConfig { restarts: 10, steps: 100, ..small_cfg() }).unwrap();
        assert!(ten.l_min <= one.l_min);
        assert_eq!(ten.traces[0], one.traces[0]);
    }

    #[test]
    fn zero_start_never_ends_above_origin() {
        let gen = small_gen(5);
        let probe = ImageTensor::filled(ImageShape::gray(4, 4), 0.5).unwrap();
        let cfg = InversionConfig { include_zero_start: true, steps: 200, learning_rate: 0.01, ..small_cfg() };
        let res = invert(&gen, &probe, &cfg).unwrap();
        let at_origin = reconstruction_loss(&probe, &gen, &LatentVector::zeros(3), LossKind::L2).unwrap();
        assert!(res.l_min <= at_origin);
        assert_eq!(res.traces[0].losses[0], at_origin);
    }

    #[test]
    fn score_examples() {
        assert_eq!(pair_score(0.0, 0.3), 1.0);
        assert_eq!(pair_score(0.2, 0.2), 0.0);
        assert_eq!(pair_score(0.0, 0.0), 0.0);
        assert!((pair_score(0.001, 0.009) - 0.8).abs() < 1e-15);
        assert_eq!(pair_score(0.1, f64::INFINITY), 1.0);
        assert_eq!(pair_score(f64::INFINITY, 0.1), -1.0);
        let s = one_vs_rest_score(&[0.01, 0.02, 0.04], 0).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
        assert!(one_vs_rest_score(&[0.01, 0.02, 0.04], 2).unwrap() < 0.0);
        assert!(matches!(one_vs_rest_score(&[0.1], 0), Err(Error::Usage(_))));
        assert!(matches!(one_vs_rest_score(&[0.1, -0.2], 0), Err(Error::Usage(_))));
    }

    #[test]
    fn identical_generators_tie_to_first() {
        let g = small_gen(6);
        let probe = g.generate(&LatentVector::new(vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        let twin = g.clone().with_id("twin");
        let rep = attribute(&probe, &[g, twin], &InversionConfig { steps: 50, ..small_cfg() }).unwrap();
        assert_eq!(rep.chosen, 0);
        assert_eq!(rep.pair_score, Some(0.0));
        assert_eq!(rep.scores, vec![0.0, 0.0]);
        assert!(rep.low_confidence);
    }

    #[test]
    fn attributes_to_true_source() {
        let gens = [small_gen(7), small_gen(8)];
        let probe = gens[1].generate(&LatentVector::new(vec![0.7, -0.4, 0.2]).unwrap()).unwrap();
        let rep = attribute(&probe, &gens, &small_cfg()).unwrap();
        assert_eq!(rep.chosen, 1);
        assert!(rep.scores[1] > 0.0);
        assert!(rep.pair_score.unwrap() < 0.0);
        let rec = rep.record(Some(1), &small_cfg());
        let back = read_records(&write_records(std::slice::from_ref(&rec))).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn many_equals_single_with_probe_seed() {
        let gens = [small_gen(9), small_gen(10)];
        let probes: Vec<ImageTensor> = (0..3)
            .map(|i| gens[i % 2].generate(&LatentVector::new(vec![i as f64, 0.0, 0.5]).unwrap()).unwrap())
            .collect();
        let ids: Vec<String> = (0..3).map(|i| format!("p{i}")).collect();
        let cfg = InversionConfig { steps: 60, ..small_cfg() };
        let many = attribute_many(&probes, &ids, &gens, &cfg).unwrap();
        let single =
            attribute(&probes[2], &gens, &InversionConfig { master_seed: cfg.probe_seed(2), ..cfg.clone() }).unwrap();
        assert_eq!(many[2].inversions, single.inversions);
        assert_eq!(many[2].scores, single.scores);
    }

    #[test]
    fn needs_two_generators() {
        let g = small_gen(1);
        let probe = ImageTensor::filled(ImageShape::gray(4, 4), 0.5).unwrap();
        assert!(matches!(attribute(&probe, &[g], &small_cfg()), Err(Error::Usage(_))));
    }
}
