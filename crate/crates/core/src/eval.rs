//! Classification metrics and learning-curve aggregation.

use crate::error::{Error, Result};

/// Counts indexed `[truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 {
            return Err(Error::Empty("confusion matrix"));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: row.len(),
            });
        }
        let total = counts.iter().flatten().sum();
        Ok(Self { counts, total })
    }

    pub fn from_predictions(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<Self> {
        check_pair(pred, truth)?;
        let mut counts = vec![vec![0u64; num_classes]; num_classes];
        for (&p, &t) in pred.iter().zip(truth) {
            if p >= num_classes || t >= num_classes {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    reason: format!("label {} out of range for {num_classes} classes", p.max(t)),
                });
            }
            counts[t][p] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| i == j || v == 0))
    }
}

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn overall_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Cohen's kappa `(p_o − p_e)/(1 − p_e)`, evaluated as
/// `(N·trace − Σ row·col) / (N² − Σ row·col)` in integers so that
/// rational cases come out exact.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let n = cm.total as u128;
    let k = cm.num_classes();
    let chance: u128 = (0..k)
        .map(|c| {
            let row: u64 = cm.counts[c].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[c]).sum();
            row as u128 * col as u128
        })
        .sum();
    let denom = n * n - chance;
    if denom == 0 {
        return Err(Error::UndefinedKappa);
    }
    let numer = n as i128 * cm.trace() as i128 - chance as i128;
    Ok(numer as f64 / denom as f64)
}

/// Per-iteration mean and sample standard deviation over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveStats {
    pub runs: usize,
    pub oa_mean: Vec<f64>,
    pub oa_sd: Vec<f64>,
    pub kappa_mean: Vec<f64>,
    pub kappa_sd: Vec<f64>,
}

/// One run's learning curve: `(oa, kappa)` per iteration.
pub type RunCurve = Vec<(f64, f64)>;

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn aggregate_curves(runs: &[RunCurve]) -> Result<CurveStats> {
    let first = runs.first().ok_or(Error::Empty("runs"))?;
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(Error::MismatchedGrids);
    }
    let t = first.len();
    let mut stats = CurveStats {
        runs: runs.len(),
        oa_mean: Vec::with_capacity(t),
        oa_sd: Vec::with_capacity(t),
        kappa_mean: Vec::with_capacity(t),
        kappa_sd: Vec::with_capacity(t),
    };
    for i in 0..t {
        let oa: Vec<f64> = runs.iter().map(|r| r[i].0).collect();
        let ka: Vec<f64> = runs.iter().map(|r| r[i].1).collect();
        let (m, s) = mean_sd(&oa);
        stats.oa_mean.push(m);
        stats.oa_sd.push(s);
        let (m, s) = mean_sd(&ka);
        stats.kappa_mean.push(m);
        stats.kappa_sd.push(s);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_by_hand() {
        assert_eq!(overall_accuracy(&[0, 1, 1, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(overall_accuracy(&[2, 2], &[2, 2]).unwrap(), 1.0);
        assert!(overall_accuracy(&[], &[]).is_err());
        assert!(overall_accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn kappa_hand_case() {
        let cm = ConfusionMatrix::from_counts(vec![vec![20, 5], vec![10, 15]]).unwrap();
        assert_eq!(kappa(&cm).unwrap(), 0.4);
    }

    #[test]
    fn kappa_diagonal_and_undefined() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0, 0], vec![0, 1, 0], vec![0, 0, 7]]).unwrap();
        assert_eq!(kappa(&cm).unwrap(), 1.0);
        let one = ConfusionMatrix::from_counts(vec![vec![0, 0], vec![0, 9]]).unwrap();
        assert!(matches!(kappa(&one), Err(Error::UndefinedKappa)));
    }

    #[test]
    fn aggregate_by_hand() {
        let s = aggregate_curves(&[vec![(0.9, 0.5)], vec![(0.7, 0.5)]]).unwrap();
        assert!((s.oa_mean[0] - 0.8).abs() < 1e-15);
        assert!((s.oa_sd[0] - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.kappa_sd[0], 0.0);
        let one = aggregate_curves(&[vec![(0.3, 0.1), (0.4, 0.2)]]).unwrap();
        assert_eq!(one.oa_mean, vec![0.3, 0.4]);
        assert_eq!(one.oa_sd, vec![0.0, 0.0]);
        assert!(matches!(
            aggregate_curves(&[vec![(0.1, 0.1)], vec![]]),
            Err(Error::MismatchedGrids)
        ));
    }
}
