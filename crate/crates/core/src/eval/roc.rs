use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(FPR, TPR)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Threshold that produces each point (scores `>=` it count as
    /// positive); the first point's threshold is `+inf`.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Threshold sweep over every distinct score. Each item is
/// `(score, is_target)`.
pub fn roc(scores: &[(f64, bool)]) -> Result<RocCurve> {
    if let Some((s, _)) = scores.iter().find(|(s, _)| s.is_nan()) {
        return Err(Error::Usage(format!("score {s} is not a number")));
    }
    let pos = scores.iter().filter(|(_, t)| *t).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Usage(format!("ROC needs both classes, got {pos} targets and {neg} non-targets")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        thresholds.push(s);
    }
    let mut curve = RocCurve { points, thresholds, auc: 0.0 };
    curve.auc = auc(&curve);
    Ok(curve)
}

/// Trapezoidal area under the stored points.
pub fn auc(curve: &RocCurve) -> f64 {
    curve.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

impl RocCurve {
    /// `fpr<TAB>tpr` lines with a header and an AUC footer.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# fpr\ttpr\n");
        for (x, y) in &self.points {
            s.push_str(&format!("{x}\t{y}\n"));
        }
        s.push_str(&format!("# auc\t{}\n", self.auc));
        s
    }

    /// Parse [`to_tsv`](Self::to_tsv) output. Thresholds are not stored in
    /// the file and come back as NaN.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format { what: "ROC file", detail };
        let mut points = Vec::new();
        let mut auc_value = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# auc") {
                auc_value = Some(rest.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", n + 1)))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next(), cols.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => points.push((x, y)),
                _ => return Err(bad(format!("line {}: expected two numbers", n + 1))),
            }
        }
        if points.len() < 2 {
            return Err(bad("fewer than two points".into()));
        }
        let thresholds = vec![f64::NAN; points.len()];
        let mut curve = RocCurve { points, thresholds, auc: 0.0 };
        curve.auc = auc_value.unwrap_or_else(|| auc(&curve));
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_chance() {
        let perfect: Vec<_> = (0..5).map(|_| (1.0, true)).chain((0..5).map(|_| (-1.0, false))).collect();
        assert_eq!(roc(&perfect).unwrap().auc, 1.0);
        let flat: Vec<_> = (0..6).map(|i| (0.3, i % 2 == 0)).collect();
        let c = roc(&flat).unwrap();
        assert_eq!(c.auc, 0.5);
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn pinned_example_with_tie() {
        let s = [(0.9, true), (0.4, false), (0.6, true), (0.1, false), (0.4, true)];
        let c = roc(&s).unwrap();
        assert!((c.auc - 5.5 / 6.0).abs() < 1e-15);
        assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(roc(&[(0.1, true), (0.2, true)]), Err(Error::Usage(_))));
        assert!(matches!(roc(&[(f64::NAN, true), (0.2, false)]), Err(Error::Usage(_))));
    }

    #[test]
    fn tsv_round_trip() {
        let c = roc(&[(0.9, true), (0.2, false), (0.5, true), (0.7, false)]).unwrap();
        let back = RocCurve::from_tsv(&c.to_tsv()).unwrap();
        assert_eq!(back.points, c.points);
        assert_eq!(back.auc, c.auc);
    }
}
