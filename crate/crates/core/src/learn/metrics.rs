//! Binary classification metrics with spirals as the positive class.

use serde::Serialize;

use crate::error::{Error, Result};

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the rank-sum statistic; tied scores share
/// their average rank, which gives half credit to tied pairs.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum keeps every quantity an integer
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged, doubled: (i + j + 2)
        let doubled = (i + j + 2) as u128;
        let npos = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += doubled * npos;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn fnr(&self) -> f64 {
        self.fn_ as f64 / (self.tp + self.fn_) as f64
    }

    pub fn fpr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tn) as f64
    }

    pub fn tnr(&self) -> f64 {
        self.tn as f64 / (self.fp + self.tn) as f64
    }

    /// `2 TP / (2 TP + FP + FN)`.
    pub fn fscore(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 { 0.0 } else { 2.0 * self.tp as f64 / den as f64 }
    }
}

/// Confusion counts with `score > threshold` predicted positive.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    class_counts(labels)?;
    let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Rates for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub auc: f64,
    pub fscore: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub tnr: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = ["auc", "fscore", "tpr", "fpr", "fnr", "tnr"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.auc, self.fscore, self.tpr, self.fpr, self.fnr, self.tnr]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { auc: a[0], fscore: a[1], tpr: a[2], fpr: a[3], fnr: a[4], tnr: a[5] }
    }
}

/// AUC plus the confusion rates at `threshold`.
pub fn confusion_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    let c = confusion(scores, labels, threshold)?;
    Ok(Metrics {
        auc: auc(scores, labels)?,
        fscore: c.fscore(),
        tpr: c.tpr(),
        fpr: c.fpr(),
        fnr: c.fnr(),
        tnr: c.tnr(),
    })
}

/// Mean and sample standard deviation (`n - 1`); the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
        assert!(matches!(auc(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[1.0, -1.0, 0.5, -0.2, 0.0], &[true, true, false, false, true], 0.0).unwrap();
        assert_eq!(c, Confusion { tp: 1, fp: 1, tn: 1, fn_: 2 });
        assert!((c.tpr() + c.fnr() - 1.0).abs() < 1e-12);
        assert!((c.tnr() + c.fpr() - 1.0).abs() < 1e-12);
        assert_eq!(c.fscore(), 2.0 / 5.0);
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
