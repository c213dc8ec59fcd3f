use std::path::{Path, PathBuf};

use genattr::attribution::{write_records, AttributionReport};
use genattr::data::Mnist;
use genattr::eval::{
    plan, rerun_from_manifest, run_experiment, train_or_load, ExperimentContext, ExperimentKind, ExperimentManifest,
    ExperimentOutcome, SubsetSpec,
};
use genattr::perturb::{jpeg_roundtrip, quantize_png8, write_png8};
use genattr::train::{load_generator, save_generator_with_manifest};
use genattr::{attribute_many, seed, write_atomic, ImageShape, ImageTensor, LatentInit, LatentVector, MlpGenerator};
use genattr_render::{render_grid, GrayImage};
use serde::{Deserialize, Serialize};

use crate::config::{write_resolved, CliConfig};
use crate::{plot, CliError};

pub const SIDECAR_FILE: &str = "latents.json";
pub const ATTRIBUTION_FILE: &str = "attribution.jsonl";

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn load_mnist(cfg: &CliConfig) -> Result<Mnist, CliError> {
    Ok(Mnist::load(cfg.data_dir())?)
}

fn context<'a>(cfg: &CliConfig, mnist: &'a Mnist) -> ExperimentContext<'a> {
    let ctx = ExperimentContext::new(mnist).with_log(log);
    match &cfg.cache_dir {
        Some(dir) => ctx.with_cache(dir),
        None => ctx,
    }
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// File tag of a trained generator: its digit parity when it has one.
fn generator_tag(subset: &SubsetSpec, g: usize) -> String {
    match subset {
        SubsetSpec::Parity(p) => p.name().to_string(),
        SubsetSpec::Shuffled { .. } => format!("gen{g}"),
    }
}

pub fn train(cfg: &CliConfig, kind: ExperimentKind, trial: usize) -> Result<(), CliError> {
    let exp = cfg.experiment(kind)?;
    if trial >= exp.trials {
        return Err(CliError::Usage(format!("trial {trial} out of range: {kind} has {} trials", exp.trials)));
    }
    let mnist = load_mnist(cfg)?;
    let ctx = context(cfg, &mnist);
    let mut manifest = plan(&exp, &mnist);
    let record = &mut manifest.trials[trial];
    let kind_dir = cfg.out().join(kind.name());
    let dir = kind_dir.join(format!("trial{trial}"));
    std::fs::create_dir_all(&dir)?;
    write_resolved(&kind_dir, &cfg.resolved(&exp))?;

    for (g, rec) in record.generators.iter_mut().enumerate() {
        let ae = train_or_load(&ctx, rec, &exp.train)?;
        let tag = generator_tag(&rec.subset, g);
        let file = dir.join(format!("{tag}.mlpgen"));
        save_generator_with_manifest(&ae.decoder, &ae.manifest, &file)?;
        save_generator_with_manifest(&ae.encoder, &ae.manifest, dir.join(format!("{tag}.encoder.mlpgen")))?;
        write_atomic(dir.join(format!("{tag}.txt")), ae.manifest.report_text().as_bytes())?;
        rec.id = Some(ae.decoder.id().to_string());
        rec.weight_hash = Some(ae.decoder.weight_hash());
        rec.final_train_loss = Some(ae.manifest.final_loss);
        rec.file = Some(format!("{tag}.mlpgen"));
        println!("{}  {}  final loss {:.6}", file.display(), ae.decoder.weight_hash(), ae.manifest.final_loss);
    }
    write_atomic(dir.join("trial.json"), json_pretty(record).as_bytes())?;
    Ok(())
}

/// Latents of a probe set, written next to the images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSidecar {
    pub generator_id: String,
    pub weight_hash: String,
    pub seed: u64,
    pub init: LatentInit,
    pub qualities: Vec<u8>,
    pub probes: Vec<SidecarProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarProbe {
    pub file: String,
    pub latent: Vec<f64>,
}

pub fn generate(
    cfg: &CliConfig,
    gen_path: &Path,
    count: Option<usize>,
    sidecar: Option<&Path>,
) -> Result<(), CliError> {
    let gen = load_generator(gen_path)?;
    let out = cfg.out();
    let (seed_value, init, latents, qualities) = match sidecar {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let old: ProbeSidecar = serde_json::from_str(&text)
                .map_err(|e| CliError::Core(genattr::Error::Format { what: "probe sidecar", detail: e.to_string() }))?;
            if old.weight_hash != gen.weight_hash() {
                return Err(CliError::Core(genattr::Error::Consistency(format!(
                    "sidecar was written for generator {} ({}), not {}",
                    old.generator_id,
                    old.weight_hash,
                    gen.weight_hash()
                ))));
            }
            let latents: Vec<Vec<f64>> = old.probes.into_iter().map(|p| p.latent).collect();
            (old.seed, old.init, latents, cfg.qualities.clone().unwrap_or(old.qualities))
        }
        None => {
            let seed_value = cfg.seed.unwrap_or(0);
            let n = match count.or(cfg.probes) {
                Some(n) => n,
                None => cfg.experiment(ExperimentKind::OddEven)?.probes_per_generator,
            };
            let init = LatentInit::default();
            let mut rng = seed::rng(seed_value);
            let latents = (0..n).map(|_| init.sample(&mut rng, gen.input_dim())).collect();
            (seed_value, init, latents, cfg.qualities.clone().unwrap_or_default())
        }
    };

    std::fs::create_dir_all(&out)?;
    let mut probes = Vec::with_capacity(latents.len());
    for (k, z) in latents.into_iter().enumerate() {
        let img = quantize_png8(&gen.generate(&LatentVector::new(z.clone())?)?);
        let file = format!("probe_{k:04}.png");
        write_png8(&img, out.join(&file))?;
        for &q in &qualities {
            let distorted = quantize_png8(&jpeg_roundtrip(&img, q)?);
            write_png8(&distorted, out.join(format!("probe_{k:04}_q{q}.png")))?;
        }
        probes.push(SidecarProbe { file, latent: z });
    }
    let sidecar = ProbeSidecar {
        generator_id: gen.id().to_string(),
        weight_hash: gen.weight_hash(),
        seed: seed_value,
        init,
        qualities,
        probes,
    };
    write_atomic(out.join(SIDECAR_FILE), json_pretty(&sidecar).as_bytes())?;
    println!("{} probes from {} written to {}", sidecar.probes.len(), gen.id(), out.display());
    Ok(())
}

/// Read any PNG or JPEG as 8-bit grayscale.
pub fn read_probe(path: &Path) -> Result<ImageTensor, CliError> {
    let img = image::open(path).map_err(|source| CliError::Image { path: path.to_path_buf(), source })?.to_luma8();
    let shape = ImageShape::gray(img.width() as usize, img.height() as usize);
    Ok(ImageTensor::from_bytes(shape, img.as_raw())?)
}

fn to_gray(img: &ImageTensor) -> Result<GrayImage, CliError> {
    Ok(GrayImage::new(img.width(), img.height() * img.channels(), img.to_bytes())?)
}

fn probe_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "probe".into())
}

pub fn attribute(cfg: &CliConfig, probe_paths: &[PathBuf], gen_paths: &[PathBuf]) -> Result<(), CliError> {
    if gen_paths.len() < 2 {
        return Err(CliError::Usage("attribution needs at least two --generator files".into()));
    }
    let gens: Vec<MlpGenerator> = gen_paths.iter().map(load_generator).collect::<genattr::Result<_>>()?;
    let mut probes = Vec::with_capacity(probe_paths.len());
    for p in probe_paths {
        let img = read_probe(p)?;
        if img.shape() != gens[0].output_shape() {
            return Err(CliError::Core(genattr::Error::Shape {
                context: "probe image",
                expected: gens[0].output_dim(),
                actual: img.len(),
            }));
        }
        probes.push(img);
    }
    let ids: Vec<String> = probe_paths.iter().map(|p| probe_stem(p)).collect();
    let exp = cfg.experiment(ExperimentKind::OddEven)?;
    let inv = genattr::InversionConfig { master_seed: cfg.seed.unwrap_or(0), ..exp.inversion.clone() };
    let reports = attribute_many(&probes, &ids, &gens, &inv)?;

    let out = cfg.out();
    write_resolved(&out, &cfg.resolved(&exp))?;
    let records: Vec<_> = reports.iter().map(|r| r.record(None, &inv)).collect();
    write_atomic(out.join(ATTRIBUTION_FILE), write_records(&records).as_bytes())?;
    for (report, probe) in reports.iter().zip(&probes) {
        print_report(report, gen_paths);
        let mut row = vec![to_gray(probe)?];
        for inv in &report.inversions {
            row.push(match inv {
                Some(r) => to_gray(&r.reconstruction)?,
                None => GrayImage::new(probe.width(), probe.height(), vec![0; probe.len()])?,
            });
        }
        render_grid(&row, 1, &[])?.save_png(out.join(format!("{}_attribution.png", report.probe_id)))?;
    }
    Ok(())
}

fn print_report(report: &AttributionReport, gen_paths: &[PathBuf]) {
    println!(
        "{}: attributed to {} ({}){}",
        report.probe_id,
        report.chosen,
        gen_paths[report.chosen].display(),
        if report.low_confidence { ", low confidence" } else { "" }
    );
    for (i, (l, s)) in report.losses().iter().zip(&report.scores).enumerate() {
        let l = l.map_or("failed".to_string(), |l| format!("{l:.3e}"));
        println!("  generator {i}: L_min {l}  S_{i} {s:+.4}");
    }
    if let Some(s) = report.pair_score {
        println!("  S {s:+.4}");
    }
}

pub fn experiment(cfg: &CliConfig, kind: Option<ExperimentKind>, rerun: Option<&Path>) -> Result<(), CliError> {
    let mnist = load_mnist(cfg)?;
    let ctx = context(cfg, &mnist);
    let outcome = match rerun {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let recorded: ExperimentManifest = serde_json::from_str(&text).map_err(|e| {
                CliError::Core(genattr::Error::Format { what: "experiment manifest", detail: e.to_string() })
            })?;
            let dir = cfg.out().join(recorded.kind.name());
            write_resolved(&dir, &cfg.resolved(&recorded.config))?;
            finish(&dir, rerun_from_manifest(path, &ctx, &dir)?)?
        }
        None => {
            let kind = kind.ok_or_else(|| CliError::Usage("experiment kind required".into()))?;
            let exp = cfg.experiment(kind)?;
            let dir = cfg.out().join(kind.name());
            write_resolved(&dir, &cfg.resolved(&exp))?;
            finish(&dir, run_experiment(&exp, &ctx, &dir)?)?
        }
    };
    for t in &outcome.summary.trials {
        for c in &t.conditions {
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "trial {} {:>4}: AUC {}  accuracy {}  |S|>0.9 correct {}  median chosen L_min {:.3e}",
                t.trial,
                c.condition,
                fmt(c.auc),
                fmt(c.accuracy),
                fmt(c.confident_correct),
                c.median_chosen_l_min
            );
        }
    }
    Ok(())
}

fn finish(dir: &Path, outcome: ExperimentOutcome) -> Result<ExperimentOutcome, CliError> {
    for p in plot::experiment_plots(dir, outcome.manifest.kind)? {
        log(&format!("  plot {}", p.display()));
    }
    Ok(outcome)
}
