use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Equal-width bins; bin `i` covers `[edges[i], edges[i + 1])`, the last
/// bin also includes its upper edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Bin `values` into `bins` equal-width bins over `[min, max]`. When every
/// value is equal the range is widened to `value ± 0.5`.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Usage("histogram of an empty sample".into()));
    }
    if bins == 0 {
        return Err(Error::Usage("histogram needs at least one bin".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Usage(format!("cannot bin non-finite value {v}")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if min == max { (min - 0.5, max + 0.5) } else { (min, max) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * width }).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `lower<TAB>upper<TAB>count` lines with a header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# lower\tupper\tcount\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{}\t{}\t{}\n", self.edges[i], self.edges[i + 1], c));
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format { what: "histogram file", detail };
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let parsed = match cols.as_slice() {
                [a, b, c] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()).zip(c.parse::<usize>().ok()),
                _ => None,
            };
            let ((lo, hi), count) =
                parsed.ok_or_else(|| bad(format!("line {}: expected lower, upper, count", n + 1)))?;
            if edges.is_empty() {
                edges.push(lo);
            }
            edges.push(hi);
            counts.push(count);
        }
        if counts.is_empty() {
            return Err(bad("no bins".into()));
        }
        Ok(Histogram { edges, counts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_sample_fills_one_bin() {
        let h = histogram(&[2.0; 7], 5).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.total(), 7);
    }

    #[test]
    fn hand_binned_sample() {
        // [0, 1] in 4 bins of width 0.25; 1.0 lands in the last bin.
        let h = histogram(&[0.0, 0.1, 0.24, 0.25, 0.6, 0.74, 0.75, 1.0], 4).unwrap();
        assert_eq!(h.counts, vec![3, 1, 2, 2]);
        assert_eq!(h.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn errors_and_round_trip() {
        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&[1.0], 0).is_err());
        assert!(histogram(&[f64::NAN], 2).is_err());
        let h = histogram(&[0.3, 0.1, 0.9, 0.5], 3).unwrap();
        assert_eq!(Histogram::from_tsv(&h.to_tsv()).unwrap(), h);
    }
}
