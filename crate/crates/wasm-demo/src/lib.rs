//! Browser bindings: sample a probe from one of two decoders, push it
//! through JPEG compression, and attribute it back.
//!
//! Images cross the boundary as RGBA bytes ready for `ImageData`.

use genattr::eval::roc;
use genattr::perturb::{decode_png8, jpeg_roundtrip, quantize_png8};
use genattr::train::{decode_generator, weight_init};
use genattr::{attribute, seed, ImageShape, ImageTensor, InversionConfig, LatentInit, LatentVector, MlpGenerator};
use wasm_bindgen::prelude::*;

/// Decoder widths used when no trained generator has been loaded.
const UNTRAINED_DIMS: [usize; 3] = [32, 64, 784];

fn js(e: genattr::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn rgba(img: &ImageTensor) -> Vec<u8> {
    img.to_bytes().iter().flat_map(|&v| [v, v, v, 255]).collect()
}

fn inversion(restarts: usize, steps: usize, seed: u64) -> InversionConfig {
    InversionConfig { restarts, steps, master_seed: seed, ..InversionConfig::paper() }
}

#[wasm_bindgen]
pub struct Demo {
    gens: Vec<MlpGenerator>,
    /// Clean probe, before compression.
    probe: Option<ImageTensor>,
    /// What the attribution sees: the probe after the chosen compression.
    shown: Option<ImageTensor>,
    source: Option<usize>,
}

#[wasm_bindgen]
impl Demo {
    /// Two untrained decoders seeded with `seed_a` and `seed_b`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed_a: u64, seed_b: u64) -> Result<Demo, JsError> {
        let gens = [(seed_a, "A"), (seed_b, "B")]
            .into_iter()
            .map(|(s, id)| {
                Ok(weight_init(&UNTRAINED_DIMS, s)
                    .and_then(|g| g.with_output_shape(ImageShape::MNIST))
                    .map_err(js)?
                    .with_id(format!("{id} (untrained, seed {s})")))
            })
            .collect::<Result<Vec<_>, JsError>>()?;
        Ok(Demo { gens, probe: None, shown: None, source: None })
    }

    /// Replace generator `slot` with the contents of a `.mlpgen` file.
    pub fn load_generator(&mut self, slot: usize, bytes: &[u8]) -> Result<String, JsError> {
        if slot > 1 {
            return Err(JsError::new("slot must be 0 or 1"));
        }
        let (gen, _) = decode_generator(bytes).map_err(js)?;
        let other = &self.gens[1 - slot];
        if gen.input_dim() != other.input_dim() || gen.output_shape() != other.output_shape() {
            // The other slot falls back to a matching untrained decoder.
            let fill = weight_init(&gen.dims(), 1 - slot as u64)
                .and_then(|g| g.with_output_shape(gen.output_shape()))
                .map_err(js)?;
            self.gens[1 - slot] = fill.with_id(format!("{} (untrained)", ["A", "B"][1 - slot]));
        }
        self.gens[slot] = gen;
        self.probe = None;
        self.shown = None;
        Ok(self.describe(slot))
    }

    pub fn describe(&self, slot: usize) -> String {
        let g = &self.gens[slot.min(1)];
        let dims: Vec<String> = g.dims().iter().map(|d| d.to_string()).collect();
        format!("{}: {} ({} params)", g.id(), dims.join(" -> "), g.param_count())
    }

    pub fn width(&self) -> usize {
        self.gens[0].output_shape().width
    }

    pub fn height(&self) -> usize {
        self.gens[0].output_shape().height
    }

    /// Draw `G_slot(z)` for a latent sampled from `seed` and make it the
    /// current probe. Returns the 8-bit image.
    pub fn sample(&mut self, slot: usize, seed: u64) -> Result<Vec<u8>, JsError> {
        let gen = self.gens.get(slot).ok_or_else(|| JsError::new("slot must be 0 or 1"))?;
        let z = LatentInit::default().sample(&mut seed::rng(seed), gen.input_dim());
        let img = gen.generate(&LatentVector::new(z).map_err(js)?).map_err(js)?;
        let img = quantize_png8(&img);
        self.source = Some(slot);
        self.probe = Some(img.clone());
        self.shown = Some(img.clone());
        Ok(rgba(&img))
    }

    /// Use an uploaded PNG as the probe. Its source is unknown.
    pub fn load_probe(&mut self, png: &[u8]) -> Result<Vec<u8>, JsError> {
        let img = decode_png8(png).map_err(js)?;
        if img.shape() != self.gens[0].output_shape() {
            return Err(JsError::new(&format!(
                "probe is {}x{}, generators draw {}x{}",
                img.width(),
                img.height(),
                self.width(),
                self.height()
            )));
        }
        self.source = None;
        self.probe = Some(img.clone());
        self.shown = Some(img.clone());
        Ok(rgba(&img))
    }

    /// JPEG round trip of the current probe at `quality`; 100 or more keeps
    /// the lossless 8-bit image.
    pub fn compress(&mut self, quality: u8) -> Result<Vec<u8>, JsError> {
        let probe = self.probe.as_ref().ok_or_else(|| JsError::new("no probe yet"))?;
        let img = if quality >= 100 { probe.clone() } else { jpeg_roundtrip(probe, quality).map_err(js)? };
        self.shown = Some(img.clone());
        Ok(rgba(&img))
    }

    /// Invert both generators against the shown probe.
    pub fn attribute(&self, restarts: usize, steps: usize, seed: u64) -> Result<Attribution, JsError> {
        let probe = self.shown.as_ref().ok_or_else(|| JsError::new("no probe yet"))?;
        let report = attribute(probe, &self.gens, &inversion(restarts, steps, seed)).map_err(js)?;
        let recon = |i: usize| report.inversions[i].as_ref().map(|r| rgba(&r.reconstruction)).unwrap_or_default();
        Ok(Attribution {
            losses: report.losses().iter().map(|l| l.unwrap_or(f64::INFINITY)).collect(),
            scores: report.scores.clone(),
            pair_score: report.pair_score.unwrap_or(f64::NAN),
            chosen: report.chosen,
            source: self.source.map_or(-1, |s| s as i32),
            recon_a: recon(0),
            recon_b: recon(1),
        })
    }

    /// Sample `per_generator` probes from each decoder, compress them at
    /// `quality`, and score them with `S_0`. Generator 0 is the target.
    pub fn roc(
        &self,
        per_generator: usize,
        quality: u8,
        restarts: usize,
        steps: usize,
        seed: u64,
    ) -> Result<RocResult, JsError> {
        let cfg = inversion(restarts, steps, seed);
        let mut scored = Vec::with_capacity(2 * per_generator);
        for (g, gen) in self.gens.iter().enumerate() {
            for k in 0..per_generator {
                let s = seed::derive(seed, &[g as u64, k as u64]);
                let z = LatentInit::default().sample(&mut seed::rng(s), gen.input_dim());
                let img = quantize_png8(&gen.generate(&LatentVector::new(z).map_err(js)?).map_err(js)?);
                let img = if quality >= 100 { img } else { jpeg_roundtrip(&img, quality).map_err(js)? };
                let cfg = InversionConfig { master_seed: s, ..cfg.clone() };
                let report = attribute(&img, &self.gens, &cfg).map_err(js)?;
                scored.push((report.scores[0], g == 0));
            }
        }
        let curve = roc(&scored).map_err(js)?;
        Ok(RocResult {
            fpr: curve.points.iter().map(|p| p.0).collect(),
            tpr: curve.points.iter().map(|p| p.1).collect(),
            auc: curve.auc,
        })
    }
}

#[wasm_bindgen]
pub struct Attribution {
    losses: Vec<f64>,
    scores: Vec<f64>,
    pair_score: f64,
    chosen: usize,
    source: i32,
    recon_a: Vec<u8>,
    recon_b: Vec<u8>,
}

#[wasm_bindgen]
impl Attribution {
    #[wasm_bindgen(getter)]
    pub fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn scores(&self) -> Vec<f64> {
        self.scores.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn pair_score(&self) -> f64 {
        self.pair_score
    }

    #[wasm_bindgen(getter)]
    pub fn chosen(&self) -> usize {
        self.chosen
    }

    /// Generator that drew the probe, or -1 for an uploaded image.
    #[wasm_bindgen(getter)]
    pub fn source(&self) -> i32 {
        self.source
    }

    pub fn reconstruction(&self, slot: usize) -> Vec<u8> {
        if slot == 0 {
            self.recon_a.clone()
        } else {
            self.recon_b.clone()
        }
    }
}

#[wasm_bindgen]
pub struct RocResult {
    fpr: Vec<f64>,
    tpr: Vec<f64>,
    auc: f64,
}

#[wasm_bindgen]
impl RocResult {
    #[wasm_bindgen(getter)]
    pub fn fpr(&self) -> Vec<f64> {
        self.fpr.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn tpr(&self) -> Vec<f64> {
        self.tpr.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn auc(&self) -> f64 {
        self.auc
    }
}
