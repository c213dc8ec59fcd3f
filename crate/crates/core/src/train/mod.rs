//! Autoencoder training and generator persistence.

mod format;

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::LabeledDataset;
use crate::loss::LossKind;
use crate::mlp::{Activation, DenseLayer, MlpGenerator};
use crate::optim::{AdamConfig, AdamState};
use crate::seed;
use crate::tensor::{ImageTensor, LatentVector};
use crate::{Error, Result};

pub use format::{
    decode_generator, encode_generator, load_generator, load_generator_with_manifest, save_generator,
    save_generator_with_manifest, FORMAT_VERSION, MAGIC,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of mini-batch Adam steps.
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_init_seed: u64,
    pub data_order_seed: u64,
    pub loss_kind: LossKind,
    /// Encoder widths from the input down to the code; the decoder mirrors
    /// them.
    pub layer_dims: Vec<usize>,
    /// Record the training loss every this many steps.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            batch_size: 256,
            learning_rate: 0.01,
            weight_init_seed: 0,
            data_order_seed: 0,
            loss_kind: LossKind::L2,
            layer_dims: vec![784, 64, 32],
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Usage("training needs at least one step".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Usage("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Usage(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(Error::Usage(format!("invalid layer widths {:?}", self.layer_dims)));
        }
        if self.log_every == 0 {
            return Err(Error::Usage("log interval must be at least 1".into()));
        }
        Ok(())
    }

    /// Full autoencoder chain, e.g. `784 -> 64 -> 32 -> 64 -> 784`.
    pub fn full_dims(&self) -> Vec<usize> {
        let mut dims = self.layer_dims.clone();
        dims.extend(self.layer_dims.iter().rev().skip(1));
        dims
    }
}

/// Everything needed to reproduce a trained autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub subset: String,
    pub subset_size: usize,
    pub config: TrainConfig,
    pub rng: String,
    pub final_loss: f64,
    /// `(step, batch loss)` sampled every `log_every` steps.
    pub loss_trace: Vec<(usize, f64)>,
}

impl TrainingManifest {
    /// Short stable digest of the manifest.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Plain-text summary written next to weight files.
    pub fn report_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        s.push_str(&format!("subset: {}\n", self.subset));
        s.push_str(&format!("subset_size: {}\n", self.subset_size));
        s.push_str(&format!("layer_dims: {:?}\n", c.full_dims()));
        s.push_str(&format!("steps: {}\n", c.steps));
        s.push_str(&format!("batch_size: {}\n", c.batch_size));
        s.push_str(&format!("learning_rate: {}\n", c.learning_rate));
        s.push_str(&format!("loss: {}\n", c.loss_kind.name()));
        s.push_str(&format!("weight_init_seed: {}\n", c.weight_init_seed));
        s.push_str(&format!("data_order_seed: {}\n", c.data_order_seed));
        s.push_str(&format!("rng: {}\n", self.rng));
        s.push_str(&format!("final_loss: {}\n", self.final_loss));
        s.push_str(&format!("manifest_hash: {}\n", self.hash()));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: MlpGenerator,
    pub decoder: MlpGenerator,
    pub manifest: TrainingManifest,
}

impl Autoencoder {
    pub fn encode(&self, image: &ImageTensor) -> Result<LatentVector> {
        LatentVector::new(self.encoder.forward_batch(image.data(), 1)?)
    }

    /// Decoder applied to the encoder's code of `image`.
    pub fn reconstruct(&self, image: &ImageTensor) -> Result<ImageTensor> {
        self.decoder.generate(&self.encode(image)?)
    }

    /// Encoder and decoder as one network.
    pub fn full_network(&self) -> Result<MlpGenerator> {
        self.encoder.compose(&self.decoder)
    }
}

/// Sigmoid network with Glorot-uniform weights in
/// `±sqrt(6 / (fan_in + fan_out))` and zero biases.
pub fn weight_init(dims: &[usize], seed: u64) -> Result<MlpGenerator> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Usage(format!("invalid dimension chain {dims:?}")));
    }
    let mut rng = seed::rng(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let weights = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            DenseLayer::new(fan_in, fan_out, weights, vec![0.0; fan_out], Activation::Sigmoid)
        })
        .collect::<Result<Vec<_>>>()?;
    MlpGenerator::new(format!("init-{seed}"), layers)
}

/// Train a symmetric sigmoid autoencoder on `ds` with Adam.
pub fn train_autoencoder(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Autoencoder> {
    train_autoencoder_with(ds, cfg, |_, _| {})
}

/// [`train_autoencoder`] with a callback receiving `(step, batch loss)` at
/// every logged step.
pub fn train_autoencoder_with(
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    mut on_log: impl FnMut(usize, f64),
) -> Result<Autoencoder> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Usage("cannot train on an empty dataset".into()));
    }
    if ds.shape().len() != cfg.layer_dims[0] {
        return Err(Error::Shape {
            context: "autoencoder input width",
            expected: cfg.layer_dims[0],
            actual: ds.shape().len(),
        });
    }
    let mut net = weight_init(&cfg.full_dims(), cfg.weight_init_seed)?;
    let mut params = net.params();
    let mut adam = AdamState::new(params.len(), AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut trace = Vec::new();
    let mut last_loss = f64::NAN;
    let mut step = 0;
    'epochs: for epoch in 0.. {
        for batch in ds.batches(cfg.batch_size, cfg.data_order_seed, epoch)? {
            let (loss, grads) = match net.batch_loss_grad(&batch.pixels, &batch.pixels, batch.len(), cfg.loss_kind) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { step, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            adam.step(&mut params, &grads.flatten())?;
            net.set_params(&params).map_err(|_| Error::Diverged { step, loss })?;
            last_loss = loss;
            if step % cfg.log_every == 0 || step + 1 == cfg.steps {
                trace.push((step, loss));
                on_log(step, loss);
            }
            step += 1;
            if step == cfg.steps {
                break 'epochs;
            }
        }
    }

    let manifest = TrainingManifest {
        subset: ds.provenance().to_string(),
        subset_size: ds.len(),
        config: cfg.clone(),
        rng: seed::RNG_ALGORITHM.to_string(),
        final_loss: last_loss,
        loss_trace: trace,
    };
    let hash = manifest.hash();
    let (encoder, decoder) = net.split_at(cfg.layer_dims.len() - 1)?;
    Ok(Autoencoder {
        encoder: encoder.with_id(format!("encoder-{hash}")),
        decoder: decoder.with_output_shape(ds.shape())?.with_id(format!("decoder-{hash}")),
        manifest,
    })
}

/// The frozen decoder of a trained autoencoder, identified by the training
/// manifest hash.
pub fn extract_decoder(ae: &Autoencoder) -> MlpGenerator {
    ae.decoder.clone().with_id(format!("decoder-{}", ae.manifest.hash()))
}
