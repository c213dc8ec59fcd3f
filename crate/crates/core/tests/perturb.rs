mod common;

use genattr::perturb::{jpeg_quant_table, jpeg_roundtrip, quantize_png8, CompressionConfig};
use genattr::{ImageShape, ImageTensor};
use proptest::prelude::*;

const QUALITIES: [u8; 5] = [10, 30, 50, 70, 90];

fn image(data: Vec<f64>) -> ImageTensor {
    ImageTensor::new(ImageShape::gray(28, 28), data).unwrap()
}

fn mse(a: &ImageTensor, b: &ImageTensor) -> f64 {
    a.mean_squared_error(b).unwrap()
}

proptest! {
    #![proptest_config(common::proptest_config(64))]

    #[test]
    fn png8_is_idempotent_and_within_half_a_level(data in prop::collection::vec(0.0f64..=1.0, 784)) {
        let img = image(data);
        let q = quantize_png8(&img);
        let again = quantize_png8(&q);
        prop_assert_eq!(again.data(), q.data());
        for (a, b) in img.data().iter().zip(q.data()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-15);
        }
    }

    #[test]
    fn constant_images_stay_within_half_a_dc_step(level in 0u8..=255, q in 1u8..=100) {
        let img = image(vec![level as f64 / 255.0; 784]);
        let out = jpeg_roundtrip(&img, q).unwrap();
        let dc = jpeg_quant_table(q).unwrap()[0] as f64;
        for v in out.data() {
            prop_assert!((v - level as f64 / 255.0).abs() < dc / 2.0 / 255.0 + 1e-12);
        }
    }
}

#[test]
fn png8_endpoints_and_midpoint() {
    let q = quantize_png8(&ImageTensor::new(ImageShape::gray(3, 1), vec![0.0, 0.5, 1.0]).unwrap());
    assert_eq!(q.data(), &[0.0, 128.0 / 255.0, 1.0]);
}

#[test]
fn quality_tables() {
    assert_eq!(jpeg_quant_table(50).unwrap(), genattr::perturb::BASE_LUMINANCE_TABLE);
    assert!(jpeg_quant_table(100).unwrap().iter().all(|&e| e == 1));
    assert_eq!(jpeg_quant_table(75).unwrap()[0], 8);
    assert!(jpeg_quant_table(0).is_err());
    assert!(jpeg_quant_table(101).is_err());
}

fn pinned_digits() -> Option<Vec<ImageTensor>> {
    let mnist = common::try_mnist()?;
    Some((0..20).map(|i| mnist.test.image(i * 37)).collect())
}

#[test]
fn distortion_shrinks_as_quality_rises() {
    let Some(digits) = pinned_digits() else { return };
    let mean_err: Vec<f64> = QUALITIES
        .iter()
        .map(|&q| digits.iter().map(|d| mse(d, &jpeg_roundtrip(d, q).unwrap())).sum::<f64>() / digits.len() as f64)
        .collect();
    for w in mean_err.windows(2) {
        assert!(w[0] > w[1], "mean squared error not decreasing across {QUALITIES:?}: {mean_err:?}");
    }
    let d = &digits[0];
    assert!(mse(d, &jpeg_roundtrip(d, 10).unwrap()) > mse(d, &jpeg_roundtrip(d, 100).unwrap()));
}

/// Recompressing moves each DCT coefficient by at most one quantization
/// step, so by Parseval each 8x8 block moves by at most the norm of the
/// quantization table (in 8-bit units).
#[test]
fn recompression_is_nearly_a_fixed_point() {
    let Some(digits) = pinned_digits() else { return };
    for q in QUALITIES {
        let bound = jpeg_quant_table(q).unwrap().iter().map(|&e| (e as f64).powi(2)).sum::<f64>().sqrt();
        for d in &digits {
            let once = jpeg_roundtrip(d, q).unwrap();
            let twice = jpeg_roundtrip(&once, q).unwrap();
            for by in 0..4 {
                for bx in 0..4 {
                    let mut sq = 0.0;
                    for y in by * 8..(by * 8 + 8).min(28) {
                        for x in bx * 8..(bx * 8 + 8).min(28) {
                            let i = y * 28 + x;
                            sq += ((once.data()[i] - twice.data()[i]) * 255.0).powi(2);
                        }
                    }
                    assert!(sq.sqrt() <= bound, "q{q} block ({by},{bx}) moved {} > {bound}", sq.sqrt());
                }
            }
        }
    }
}

#[test]
fn compression_conditions_parse_and_apply() {
    let png: CompressionConfig = "png".parse().unwrap();
    let jpeg: CompressionConfig = "q70".parse().unwrap();
    assert_eq!(jpeg, "jpeg:70".parse().unwrap());
    assert_eq!(png.label(), "png");
    assert_eq!(jpeg.label(), "q70");
    assert!("q0".parse::<CompressionConfig>().is_err());
    let img = image((0..784).map(|i| (i % 29) as f64 / 28.0).collect());
    let out = jpeg.apply(&img).unwrap();
    assert_eq!(out.shape(), img.shape());
    assert_eq!(quantize_png8(&out).data(), out.data());
}
