//! Probe post-processing: 8-bit quantization and a baseline JPEG model.
//!
//! The JPEG path reproduces only the lossy part of a baseline grayscale
//! encoder (blockwise DCT, IJG-scaled luminance quantization); entropy
//! coding is lossless and therefore skipped. All quantization rounds half
//! away from zero.

use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::tensor::{ImageShape, ImageTensor};
use crate::{Error, Result};

/// Standard luminance quantization table, row-major.
pub const BASE_LUMINANCE_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "codec", rename_all = "lowercase", deny_unknown_fields)]
pub enum CompressionConfig {
    /// Lossless 8-bit storage.
    Png8,
    /// 8-bit storage through a baseline JPEG at quality `quality` (1..=100).
    Jpeg { quality: u8 },
}

impl CompressionConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CompressionConfig::Png8 => Ok(()),
            CompressionConfig::Jpeg { quality } => check_quality(quality),
        }
    }

    /// Short label such as `png` or `q50`.
    pub fn label(&self) -> String {
        match self {
            CompressionConfig::Png8 => "png".into(),
            CompressionConfig::Jpeg { quality } => format!("q{quality}"),
        }
    }

    /// What saving and reloading `img` in this format yields: the image is
    /// quantized to bytes, JPEG-compressed if requested, and decoded back to
    /// bytes.
    pub fn apply(&self, img: &ImageTensor) -> Result<ImageTensor> {
        match *self {
            CompressionConfig::Png8 => Ok(quantize_png8(img)),
            CompressionConfig::Jpeg { quality } => Ok(quantize_png8(&jpeg_roundtrip(&quantize_png8(img), quality)?)),
        }
    }
}

impl std::str::FromStr for CompressionConfig {
    type Err = Error;

    /// Parses `png`, `jpeg:<q>` or `q<q>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "png" || s == "png8" {
            return Ok(CompressionConfig::Png8);
        }
        let q = s.strip_prefix("jpeg:").or_else(|| s.strip_prefix('q'));
        match q.and_then(|q| q.parse::<u8>().ok()) {
            Some(quality) => {
                check_quality(quality)?;
                Ok(CompressionConfig::Jpeg { quality })
            }
            None => Err(Error::Usage(format!("unknown compression '{s}' (expected png, jpeg:<q> or q<q>)"))),
        }
    }
}

fn check_quality(q: u8) -> Result<()> {
    if !(1..=100).contains(&q) {
        return Err(Error::Usage(format!("JPEG quality {q} outside 1..=100")));
    }
    Ok(())
}

/// Round every value to the nearest multiple of 1/255.
pub fn quantize_png8(img: &ImageTensor) -> ImageTensor {
    let data = img.data().iter().map(|&v| (v * 255.0).round() / 255.0).collect();
    ImageTensor::new(img.shape(), data).expect("quantized values stay in [0, 1]")
}

/// IJG-scaled luminance table for quality `q`.
pub fn jpeg_quant_table(q: u8) -> Result<[u16; 64]> {
    check_quality(q)?;
    let q = u32::from(q);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut table = [0u16; 64];
    for (t, &b) in table.iter_mut().zip(&BASE_LUMINANCE_TABLE) {
        *t = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(table)
}

/// Orthonormal 8-point DCT-II basis, `basis[u * 8 + x]`.
fn dct_basis() -> &'static [f64; 64] {
    static BASIS: OnceLock<[f64; 64]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [0.0; 64];
        for u in 0..8 {
            let norm = if u == 0 { (0.125f64).sqrt() } else { 0.5 };
            for x in 0..8 {
                c[u * 8 + x] = norm * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        c
    })
}

/// `out = a · b` for 8×8 row-major blocks, with optional transposes.
fn mul8(a: &[f64; 64], ta: bool, b: &[f64; 64], tb: bool) -> [f64; 64] {
    let mut out = [0.0; 64];
    for i in 0..8 {
        for j in 0..8 {
            let mut s = 0.0;
            for k in 0..8 {
                let av = if ta { a[k * 8 + i] } else { a[i * 8 + k] };
                let bv = if tb { b[j * 8 + k] } else { b[k * 8 + j] };
                s += av * bv;
            }
            out[i * 8 + j] = s;
        }
    }
    out
}

pub(crate) fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    mul8(&mul8(c, false, block, false), false, c, true)
}

pub(crate) fn idct8x8(coef: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    mul8(&mul8(c, true, coef, false), false, c, false)
}

/// Lossy part of a baseline grayscale JPEG encode/decode at quality `q`.
///
/// The image is padded to whole 8×8 blocks by edge replication, level
/// shifted to `v * 255 - 128`, transformed, quantized, dequantized and
/// inverted; the result is clamped to `[0, 1]` and cropped back. Output
/// values are not rounded to bytes (see [`CompressionConfig::apply`]).
pub fn jpeg_roundtrip(img: &ImageTensor, q: u8) -> Result<ImageTensor> {
    let table = jpeg_quant_table(q)?;
    let shape = img.shape();
    if shape.channels != 1 {
        return Err(Error::Usage(format!("JPEG model handles grayscale only, got {} channels", shape.channels)));
    }
    let (w, h) = (shape.width, shape.height);
    let (pw, ph) = (w.div_ceil(8) * 8, h.div_ceil(8) * 8);
    let src = img.data();
    let mut out = vec![0.0; w * h];
    for by in (0..ph).step_by(8) {
        for bx in (0..pw).step_by(8) {
            let mut block = [0.0; 64];
            for y in 0..8 {
                let sy = (by + y).min(h - 1);
                for x in 0..8 {
                    let sx = (bx + x).min(w - 1);
                    block[y * 8 + x] = src[sy * w + sx] * 255.0 - 128.0;
                }
            }
            let mut coef = dct8x8(&block);
            for (c, &t) in coef.iter_mut().zip(&table) {
                let t = f64::from(t);
                *c = (*c / t).round() * t;
            }
            let rec = idct8x8(&coef);
            for y in 0..8 {
                let oy = by + y;
                if oy >= h {
                    break;
                }
                for x in 0..8 {
                    let ox = bx + x;
                    if ox >= w {
                        break;
                    }
                    out[oy * w + ox] = ((rec[y * 8 + x] + 128.0) / 255.0).clamp(0.0, 1.0);
                }
            }
        }
    }
    ImageTensor::new(shape, out)
}

/// Encode a grayscale image as an 8-bit PNG.
pub fn encode_png8(img: &ImageTensor) -> Result<Vec<u8>> {
    let shape = img.shape();
    if shape.channels != 1 {
        return Err(Error::Usage(format!("PNG export handles grayscale only, got {} channels", shape.channels)));
    }
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(BufWriter::new(&mut buf), shape.width as u32, shape.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format { what: "PNG", detail: e.to_string() })?;
        writer.write_image_data(&img.to_bytes()).map_err(|e| Error::Format { what: "PNG", detail: e.to_string() })?;
    }
    Ok(buf)
}

/// Decode an 8-bit grayscale PNG.
pub fn decode_png8(bytes: &[u8]) -> Result<ImageTensor> {
    let fmt = |e: png::DecodingError| Error::Format { what: "PNG", detail: e.to_string() };
    let decoder = png::Decoder::new(BufReader::new(std::io::Cursor::new(bytes)));
    let mut reader = decoder.read_info().map_err(fmt)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(fmt)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format {
            what: "PNG",
            detail: format!("expected 8-bit grayscale, got {:?} {:?}", info.color_type, info.bit_depth),
        });
    }
    let shape = ImageShape::gray(info.width as usize, info.height as usize);
    let row = info.line_size;
    let pixels: Vec<u8> =
        buf[..info.buffer_size()].chunks_exact(row).flat_map(|r| &r[..shape.width]).copied().collect();
    ImageTensor::from_bytes(shape, &pixels)
}

pub fn write_png8(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    crate::write_atomic(path, &encode_png8(img)?)?;
    Ok(())
}

pub fn read_png8(path: impl AsRef<Path>) -> Result<ImageTensor> {
    decode_png8(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImageTensor {
        let data = (0..w * h).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        ImageTensor::new(ImageShape::gray(w, h), data).unwrap()
    }

    #[test]
    fn png8_values() {
        let img = ImageTensor::new(ImageShape::gray(3, 1), vec![0.0, 0.5, 1.0]).unwrap();
        let q = quantize_png8(&img);
        assert_eq!(q.data(), &[0.0, 128.0 / 255.0, 1.0]);
        let r = ramp(7, 5);
        let once = quantize_png8(&r);
        assert_eq!(quantize_png8(&once), once);
        for (a, b) in r.data().iter().zip(once.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-15);
        }
    }

    #[test]
    fn quant_tables() {
        assert_eq!(jpeg_quant_table(50).unwrap(), BASE_LUMINANCE_TABLE);
        assert!(jpeg_quant_table(100).unwrap().iter().all(|&v| v == 1));
        assert_eq!(jpeg_quant_table(75).unwrap()[0], 8);
        assert_eq!(jpeg_quant_table(1).unwrap()[0], 255);
        assert!(jpeg_quant_table(0).is_err());
        assert!(jpeg_quant_table(101).is_err());
    }

    #[test]
    fn dct_round_trip() {
        let block: [f64; 64] = std::array::from_fn(|i| ((i * 13) % 17) as f64 - 8.0);
        let back = idct8x8(&dct8x8(&block));
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = [10.0; 64];
        let coef = dct8x8(&flat);
        assert!((coef[0] - 80.0).abs() < 1e-12);
        assert!(coef[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn constant_image_stays_constant() {
        for q in [5u8, 30, 50, 90] {
            let img = ImageTensor::filled(ImageShape::MNIST, 0.37).unwrap();
            let out = jpeg_roundtrip(&img, q).unwrap();
            let first = out.data()[0];
            assert!(out.data().iter().all(|&v| (v - first).abs() < 1e-12));
            let bound = f64::from(jpeg_quant_table(q).unwrap()[0]) / 2.0 / 255.0;
            assert!((first - 0.37).abs() < bound);
        }
    }

    #[test]
    fn output_in_range_and_shape() {
        let img = ramp(28, 28);
        for q in [1u8, 10, 50, 100] {
            let out = jpeg_roundtrip(&img, q).unwrap();
            assert_eq!(out.shape(), img.shape());
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let hi = jpeg_roundtrip(&img, 100).unwrap().mean_squared_error(&img).unwrap();
        let lo = jpeg_roundtrip(&img, 10).unwrap().mean_squared_error(&img).unwrap();
        assert!(lo > hi);
    }

    #[test]
    fn png_file_round_trip() {
        let img = quantize_png8(&ramp(9, 4));
        let back = decode_png8(&encode_png8(&img).unwrap()).unwrap();
        assert_eq!(back, img);
        assert!(matches!(decode_png8(b"not a png"), Err(Error::Format { .. })));
    }

    #[test]
    fn parse_compression() {
        assert_eq!("png".parse::<CompressionConfig>().unwrap(), CompressionConfig::Png8);
        assert_eq!("jpeg:70".parse::<CompressionConfig>().unwrap(), CompressionConfig::Jpeg { quality: 70 });
        assert_eq!("q50".parse::<CompressionConfig>().unwrap().label(), "q50");
        assert!("jpeg:0".parse::<CompressionConfig>().is_err());
        assert!("gif".parse::<CompressionConfig>().is_err());
    }
}
