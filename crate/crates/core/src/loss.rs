use serde::{Deserialize, Serialize};

/// Per-pixel reconstruction loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean squared difference over all `M * N` values.
    #[default]
    L2,
    /// Mean absolute difference.
    L1,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::L2 => "l2",
            LossKind::L1 => "l1",
        }
    }

    /// Loss of `output` against `target`, averaged over the values.
    pub fn value(self, output: &[f64], target: &[f64]) -> f64 {
        debug_assert_eq!(output.len(), target.len());
        let n = output.len() as f64;
        let sum: f64 = match self {
            LossKind::L2 => output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum(),
            LossKind::L1 => output.iter().zip(target).map(|(o, t)| (o - t).abs()).sum(),
        };
        sum / n
    }

    /// Loss value plus its gradient with respect to `output`, scaled by
    /// `weight` (the gradient is written, not accumulated).
    pub fn value_and_grad(self, output: &[f64], target: &[f64], weight: f64, grad: &mut [f64]) -> f64 {
        debug_assert_eq!(output.len(), grad.len());
        let n = output.len() as f64;
        let mut sum = 0.0;
        match self {
            LossKind::L2 => {
                let scale = 2.0 * weight / n;
                for ((g, o), t) in grad.iter_mut().zip(output).zip(target) {
                    let r = o - t;
                    sum += r * r;
                    *g = scale * r;
                }
            }
            LossKind::L1 => {
                let scale = weight / n;
                for ((g, o), t) in grad.iter_mut().zip(output).zip(target) {
                    let r = o - t;
                    sum += r.abs();
                    *g = if r > 0.0 {
                        scale
                    } else if r < 0.0 {
                        -scale
                    } else {
                        0.0
                    };
                }
            }
        }
        sum / n
    }
}

impl std::str::FromStr for LossKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "mse" => Ok(LossKind::L2),
            "l1" | "mae" => Ok(LossKind::L1),
            other => Err(crate::Error::Usage(format!("unknown loss kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_residual() {
        let out = vec![0.5; 10];
        let target = vec![0.0; 10];
        assert_eq!(LossKind::L2.value(&out, &target), 0.25);
        assert_eq!(LossKind::L1.value(&out, &target), 0.5);
        let mut g = vec![0.0; 10];
        assert_eq!(LossKind::L2.value_and_grad(&out, &target, 1.0, &mut g), 0.25);
        assert!(g.iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }
}
