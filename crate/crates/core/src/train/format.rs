//! Generator weight files.
//!
//! Layout: `MLPGEN`, format version (u16 LE), metadata length (u32 LE),
//! metadata as UTF-8 JSON (dimension chain, activation names, id, output
//! shape, optional training manifest), then every layer's weight rows and
//! bias as little-endian f64, then a u64 LE checksum (the first eight bytes
//! of SHA-256 over everything before it).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainingManifest;
use crate::mlp::{Activation, DenseLayer, MlpGenerator};
use crate::tensor::ImageShape;
use crate::{write_atomic, Error, Result};

pub const MAGIC: &[u8; 6] = b"MLPGEN";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: usize = 6 + 2 + 4;

#[derive(Serialize, Deserialize)]
struct Metadata {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    id: String,
    output_shape: ImageShape,
    manifest: Option<TrainingManifest>,
}

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn encode_generator(gen: &MlpGenerator, manifest: Option<&TrainingManifest>) -> Vec<u8> {
    let meta = Metadata {
        dims: gen.dims(),
        activations: gen.layers().iter().map(DenseLayer::activation).collect(),
        id: gen.id().to_string(),
        output_shape: gen.output_shape(),
        manifest: manifest.cloned(),
    };
    let meta = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + gen.param_count() * 8 + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for v in gen.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn decode_generator(bytes: &[u8]) -> Result<(MlpGenerator, Option<TrainingManifest>)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format { what: "generator file", detail: "missing MLPGEN magic".into() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated);
    }
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let checksum_ok = || {
        bytes.len() >= 8 && {
            let (body, tail) = bytes.split_at(bytes.len() - 8);
            checksum(body) == u64::from_le_bytes(tail.try_into().expect("8 bytes"))
        }
    };
    let meta_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let Some(meta_bytes) = bytes.get(HEADER_LEN..HEADER_LEN + meta_len) else {
        return Err(if checksum_ok() {
            Error::Format { what: "generator file", detail: "bad metadata length".into() }
        } else {
            Error::Truncated
        });
    };
    let meta: Metadata = match serde_json::from_slice(meta_bytes) {
        Ok(m) => m,
        Err(e) if checksum_ok() => return Err(Error::Format { what: "generator metadata", detail: e.to_string() }),
        Err(_) => return Err(Error::Checksum),
    };
    if meta.dims.len() != meta.activations.len() + 1 || meta.dims.contains(&0) {
        return Err(if checksum_ok() {
            Error::Format { what: "generator metadata", detail: "dimension chain does not match activations".into() }
        } else {
            Error::Checksum
        });
    }
    let param_count: usize = meta.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let expected_len = HEADER_LEN + meta_len + param_count * 8 + 8;
    if bytes.len() < expected_len {
        return Err(Error::Truncated);
    }
    if bytes.len() > expected_len {
        return Err(Error::Format { what: "generator file", detail: "trailing bytes".into() });
    }
    if !checksum_ok() {
        return Err(Error::Checksum);
    }

    let mut values = bytes[HEADER_LEN + meta_len..bytes.len() - 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut layers = Vec::with_capacity(meta.activations.len());
    for (w, &act) in meta.dims.windows(2).zip(&meta.activations) {
        let weights: Vec<f64> = values.by_ref().take(w[0] * w[1]).collect();
        let bias: Vec<f64> = values.by_ref().take(w[1]).collect();
        layers.push(DenseLayer::new(w[0], w[1], weights, bias, act)?);
    }
    let gen = MlpGenerator::new(meta.id, layers)?.with_output_shape(meta.output_shape)?;
    Ok((gen, meta.manifest))
}

pub fn save_generator(gen: &MlpGenerator, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_generator(gen, None))?;
    Ok(())
}

pub fn save_generator_with_manifest(
    gen: &MlpGenerator,
    manifest: &TrainingManifest,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_atomic(path, &encode_generator(gen, Some(manifest)))?;
    Ok(())
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<MlpGenerator> {
    Ok(load_generator_with_manifest(path)?.0)
}

pub fn load_generator_with_manifest(path: impl AsRef<Path>) -> Result<(MlpGenerator, Option<TrainingManifest>)> {
    decode_generator(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::weight_init;

    fn sample() -> MlpGenerator {
        weight_init(&[3, 5, 4], 42).unwrap().with_id("sample")
    }

    #[test]
    fn round_trip_is_bitwise() {
        let gen = sample();
        let (back, manifest) = decode_generator(&encode_generator(&gen, None)).unwrap();
        assert_eq!(back, gen);
        assert!(manifest.is_none());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.mlpgen");
        save_generator(&gen, &path).unwrap();
        assert_eq!(load_generator(&path).unwrap(), gen);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_generator(&sample(), None);
        let mut flipped = bytes.clone();
        let last_param = bytes.len() - 9;
        flipped[last_param] ^= 0x40;
        assert!(matches!(decode_generator(&flipped), Err(Error::Checksum)));

        let mut meta_flip = bytes.clone();
        meta_flip[HEADER_LEN + 3] ^= 0x01;
        assert!(matches!(decode_generator(&meta_flip), Err(Error::Checksum)));
    }

    #[test]
    fn version_and_truncation_errors() {
        let bytes = encode_generator(&sample(), None);
        let mut v2 = bytes.clone();
        v2[6] = 2;
        assert!(matches!(decode_generator(&v2), Err(Error::Version { found: 2, expected: 1 })));
        assert!(matches!(decode_generator(&bytes[..bytes.len() - 20]), Err(Error::Truncated)));
        assert!(matches!(decode_generator(&bytes[..10]), Err(Error::Truncated)));
        assert!(matches!(decode_generator(b"NOTGEN"), Err(Error::Format { .. })));
    }
}
