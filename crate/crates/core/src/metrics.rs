//! Regression and classification scores used across the experiment harness.

use ndarray::{Array2, ArrayView2};

use crate::error::{EsnError, Result};

fn check_shapes(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(EsnError::DimensionMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    if pred.ncols() == 0 {
        return Err(EsnError::EmptyInput);
    }
    Ok(())
}

/// Root mean square error pooled over all dimensions and time steps.
pub fn rmse(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    let n = pred.len() as f64;
    let sse: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sse / n).sqrt())
}

/// Mean absolute error pooled over all dimensions and time steps.
pub fn mae(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(truth.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// Coefficient of determination, computed per output dimension against that
/// dimension's mean and averaged. A constant truth dimension is an error.
pub fn r2(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    let mut total = 0.0;
    for dim in 0..truth.nrows() {
        let t = truth.row(dim);
        let p = pred.row(dim);
        let mean = t.mean().expect("non-empty");
        let ss_tot: f64 = t.iter().map(|v| (v - mean) * (v - mean)).sum();
        if ss_tot == 0.0 {
            return Err(EsnError::ZeroVariance);
        }
        let ss_res: f64 = p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        total += 1.0 - ss_res / ss_tot;
    }
    Ok(total / truth.nrows() as f64)
}

/// Square confusion matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub counts: Array2<usize>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Tallies predictions against true labels over `n_classes` classes.
pub fn confusion(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(EsnError::DimensionMismatch(format!(
            "{} labels vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(EsnError::EmptyInput);
    }
    let mut counts = Array2::zeros((n_classes, n_classes));
    for (&t, &p) in truth.iter().zip(pred.iter()) {
        if t >= n_classes {
            return Err(EsnError::UnknownLabel(t as i64));
        }
        if p >= n_classes {
            return Err(EsnError::UnknownLabel(p as i64));
        }
        counts[[t, p]] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Fraction of correct predictions.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let correct: usize = (0..cm.n_classes()).map(|i| cm.counts[[i, i]]).sum();
    correct as f64 / cm.total() as f64
}

/// Macro-averaged F1. A class with no true and no predicted samples
/// contributes an F1 of 0; a class with zero precision+recall likewise.
pub fn f1_macro(cm: &ConfusionMatrix) -> f64 {
    let k = cm.n_classes();
    let mut total = 0.0;
    for c in 0..k {
        let tp = cm.counts[[c, c]] as f64;
        let fp: f64 = (0..k).filter(|&r| r != c).map(|r| cm.counts[[r, c]] as f64).sum();
        let fne: f64 = (0..k).filter(|&p| p != c).map(|p| cm.counts[[c, p]] as f64).sum();
        let denom = 2.0 * tp + fp + fne;
        if denom > 0.0 {
            total += 2.0 * tp / denom;
        }
    }
    total / k as f64
}

/// One-vs-rest macro-averaged AUC from per-class scores.
///
/// `scores` is n_classes x n_samples. Each class AUC is the Mann-Whitney
/// statistic on that class's score column with ties counting one half.
/// Fails with [`EsnError::SingleClassOnly`] if any class has no positive or
/// no negative samples.
pub fn auc_macro(truth: &[usize], scores: ArrayView2<f64>) -> Result<f64> {
    if truth.len() != scores.ncols() {
        return Err(EsnError::DimensionMismatch(format!(
            "{} labels vs {} score columns",
            truth.len(),
            scores.ncols()
        )));
    }
    if truth.is_empty() {
        return Err(EsnError::EmptyInput);
    }
    let n_classes = scores.nrows();
    let mut total = 0.0;
    for c in 0..n_classes {
        let row = scores.row(c);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, &label) in truth.iter().enumerate() {
            if label == c {
                pos.push(row[i]);
            } else {
                neg.push(row[i]);
            }
        }
        if pos.is_empty() || neg.is_empty() {
            return Err(EsnError::SingleClassOnly);
        }
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
        total += wins / (pos.len() * neg.len()) as f64;
    }
    Ok(total / n_classes as f64)
}
