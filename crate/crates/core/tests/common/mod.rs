//! Independent oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::path::PathBuf;

use genattr::mlp::{Activation, DenseLayer, MlpGenerator};
use genattr::{ImageShape, ImageTensor, LatentVector, LossKind};
use rand::Rng as _;

pub type Rng = genattr::seed::Rng;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| workspace_root().join("data/mnist"))
}

/// Random network with at most `max_dim` units per layer and 1 to 3 layers
/// of mixed activations.
pub fn random_network(rng: &mut Rng, max_dim: usize) -> MlpGenerator {
    let depth = rng.random_range(1..=3);
    let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=max_dim)).collect();
    let layers = dims
        .windows(2)
        .map(|w| {
            let act = match rng.random_range(0..3) {
                0 => Activation::Sigmoid,
                1 => Activation::Tanh,
                _ => Activation::Identity,
            };
            let weights = (0..w[0] * w[1]).map(|_| rng.random_range(-1.5..1.5)).collect();
            let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            DenseLayer::new(w[0], w[1], weights, bias, act).unwrap()
        })
        .collect();
    MlpGenerator::new("random", layers).unwrap()
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Relative error of the analytic latent and parameter gradients of the
/// mean squared reconstruction loss against central differences.
pub fn gradient_check(gen: &MlpGenerator, rng: &mut Rng) -> (f64, f64) {
    let h = 1e-6;
    let z: Vec<f64> = (0..gen.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target_data: Vec<f64> = (0..gen.output_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
    let target = ImageTensor::new(ImageShape::infer(target_data.len()), target_data.clone()).unwrap();
    let loss_at = |g: &MlpGenerator, z: &[f64]| {
        let out = g.forward(&LatentVector::new(z.to_vec()).unwrap()).unwrap();
        LossKind::L2.value(&out, &target_data)
    };

    let out = gen.forward(&LatentVector::new(z.clone()).unwrap()).unwrap();
    let mut out_grad = vec![0.0; out.len()];
    LossKind::L2.value_and_grad(&out, &target_data, 1.0, &mut out_grad);
    let analytic_z = gen.grad_latent(&LatentVector::new(z.clone()).unwrap(), &out_grad).unwrap();
    let numeric_z: Vec<f64> = (0..z.len())
        .map(|i| {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[i] += h;
            zm[i] -= h;
            (loss_at(gen, &zp) - loss_at(gen, &zm)) / (2.0 * h)
        })
        .collect();

    let (_, bundle) =
        gen.grad_params(&[LatentVector::new(z.clone()).unwrap()], std::slice::from_ref(&target), LossKind::L2).unwrap();
    let analytic_p = bundle.flatten();
    let params = gen.params();
    let mut probe = gen.clone();
    let numeric_p: Vec<f64> = (0..params.len())
        .map(|i| {
            let mut p = params.clone();
            p[i] += h;
            probe.set_params(&p).unwrap();
            let up = loss_at(&probe, &z);
            p[i] -= 2.0 * h;
            probe.set_params(&p).unwrap();
            let down = loss_at(&probe, &z);
            (up - down) / (2.0 * h)
        })
        .collect();
    (rel_error(analytic_z.as_slice(), &numeric_z), rel_error(&analytic_p, &numeric_p))
}

/// AUC by exhaustive comparison of every (target, non-target) pair, ties
/// counting one half.
pub fn pair_count_auc(scores: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Random labelled scores with both classes present; half of the sets draw
/// from a coarse grid so ties are common.
pub fn random_score_set(rng: &mut Rng, max_len: usize) -> Vec<(f64, bool)> {
    let len = rng.random_range(2..=max_len);
    let coarse = rng.random_bool(0.5);
    let mut out: Vec<(f64, bool)> = (0..len)
        .map(|_| {
            let s = if coarse { rng.random_range(-5..=5) as f64 / 5.0 } else { rng.random_range(-1.0..1.0) };
            (s, rng.random_bool(0.5))
        })
        .collect();
    out[0].1 = true;
    out[1].1 = false;
    out
}

/// Random non-negative losses, including exact zeros and repeated values.
pub fn random_losses(rng: &mut Rng) -> Vec<f64> {
    let n = rng.random_range(2..=6);
    let mut v: Vec<f64> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1e-3,
            _ => 10f64.powf(rng.random_range(-12.0..2.0)),
        })
        .collect();
    if rng.random_bool(0.1) {
        v[1] = v[0];
    }
    v
}

/// Check the algebraic properties of the pairwise and one-vs-rest scores on
/// one loss tuple.
pub fn check_score_algebra(losses: &[f64]) -> Result<(), String> {
    use genattr::{one_vs_rest_score, pair_score};
    let n = losses.len();
    let s: Vec<f64> = (0..n).map(|i| one_vs_rest_score(losses, i).unwrap()).collect();
    for (i, &si) in s.iter().enumerate() {
        if !(-1.0..=1.0).contains(&si) {
            return Err(format!("S_{i} = {si} out of bounds for {losses:?}"));
        }
        let rest_min = (0..n).filter(|&j| j != i).map(|j| losses[j]).fold(f64::INFINITY, f64::min);
        // S_i reaches 1 exactly at a zero loss, and otherwise only once the
        // loss ratio drops below rounding.
        let forced_one = losses[i] == 0.0 && rest_min > 0.0;
        let may_round_to_one = losses[i] <= rest_min * f64::EPSILON;
        if forced_one && si != 1.0 || si == 1.0 && !may_round_to_one {
            return Err(format!("S_{i} = {si} but loss {} vs rest {rest_min}", losses[i]));
        }
        if losses[i] < rest_min && si <= 0.0 || losses[i] > rest_min && si >= 0.0 {
            return Err(format!("sign of S_{i} = {si} wrong for {losses:?}"));
        }
        // Direct evaluation of the defining ratio.
        let direct = if losses[i] == rest_min { 0.0 } else { (rest_min - losses[i]) / (rest_min + losses[i]) };
        if (si - direct).abs() > 1e-12 {
            return Err(format!("S_{i} = {si} differs from direct value {direct}"));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (pair_score(losses[i], losses[j]), pair_score(losses[j], losses[i]));
            if a != -b {
                return Err(format!("pair score not antisymmetric: {a} vs {b}"));
            }
        }
    }
    if n == 2 && s[0] != pair_score(losses[0], losses[1]) {
        return Err("two-generator S_0 differs from pair score".into());
    }
    // Argmin and score signs survive a uniform positive rescaling.
    let argmin = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
    for scale in [1e-3, 7.0, 1e3] {
        let scaled: Vec<f64> = losses.iter().map(|l| l * scale).collect();
        if argmin(&scaled) != argmin(losses) {
            return Err(format!("argmin changed under scale {scale}"));
        }
        for (i, &si) in s.iter().enumerate() {
            let t = one_vs_rest_score(&scaled, i).unwrap();
            if t.signum() != si.signum() && !(t == 0.0 && si == 0.0) {
                return Err(format!("sign of S_{i} changed under scale {scale}"));
            }
        }
    }
    let chosen = argmin(losses);
    if s[chosen] < 0.0 {
        return Err("chosen generator has a negative score".into());
    }
    Ok(())
}

/// Limit and boundary cases of the score definitions.
pub fn check_score_boundaries() -> Result<usize, String> {
    use genattr::{one_vs_rest_score, pair_score};
    let tiny = f64::from_bits(1);
    let cases: Vec<(f64, f64, f64)> = vec![
        (0.0, 1.0, 1.0),
        (1.0, 0.0, -1.0),
        (0.0, 0.0, 0.0),
        (0.25, 0.25, 0.0),
        (0.0, tiny, 1.0),
        (tiny, 0.0, -1.0),
        (tiny, tiny, 0.0),
        (f64::MAX, f64::MAX, 0.0),
        (0.0, f64::MAX, 1.0),
        (f64::MAX / 3.0, f64::MAX, 0.5),
        (0.001, 0.009, 0.8),
        (1.0, 3.0, 0.5),
        (0.5, f64::INFINITY, 1.0),
        (f64::INFINITY, 0.5, -1.0),
        (f64::INFINITY, f64::INFINITY, 0.0),
    ];
    for &(a, b, want) in &cases {
        let got = pair_score(a, b);
        if (got - want).abs() > 1e-15 {
            return Err(format!("pair_score({a:e}, {b:e}) = {got}, expected {want}"));
        }
    }
    let vectors: Vec<(Vec<f64>, usize, f64)> = vec![
        (vec![0.01, 0.02, 0.04], 0, 1.0 / 3.0),
        (vec![0.0, 0.0, 0.0], 1, 0.0),
        (vec![0.0, 0.0, 1.0], 0, 0.0),
        (vec![0.0, 1.0, 2.0], 0, 1.0),
        (vec![2.0, 1.0, 0.0], 0, -1.0),
        (vec![3.0, 1.0], 1, 0.5),
    ];
    for (v, i, want) in &vectors {
        let got = one_vs_rest_score(v, *i).unwrap();
        if (got - want).abs() > 1e-15 {
            return Err(format!("S_{i}({v:?}) = {got}, expected {want}"));
        }
    }
    for bad in [vec![], vec![0.5], vec![-0.1, 0.2], vec![f64::NAN, 0.2]] {
        if one_vs_rest_score(&bad, 0).is_ok() {
            return Err(format!("one_vs_rest_score accepted {bad:?}"));
        }
    }
    Ok(cases.len() + vectors.len() + 4)
}

/// The MNIST splits, or `None` (with a note on stderr) when the files have
/// not been fetched.
pub fn try_mnist() -> Option<genattr::data::Mnist> {
    match genattr::data::Mnist::load(mnist_dir()) {
        Ok(m) => Some(m),
        Err(e) => {
            eprintln!("skipping: {e}");
            None
        }
    }
}

/// Proptest settings for integration tests, which have no source file to
/// persist regressions next to.
pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { failure_persistence: None, ..proptest::test_runner::Config::with_cases(cases) }
}
