//! Stratified k-fold cross-validation and the confidence sweep.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::Gz2Row;
use crate::error::{Error, Result};
use crate::learn::metrics::{confusion_metrics, mean_std, Metrics};
use crate::learn::{predict_scores, train, ClassifierKind, ClassifierParams};

/// Fold index for every item. Each class is shuffled by `seed`, the classes
/// are laid end to end, and position `i` goes to fold `i mod k`, so fold
/// sizes differ by at most one overall and within each class.
pub fn kfold_split<L: Ord + Copy>(labels: &[L], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = labels.len();
    if k < 1 || k > n {
        return Err(Error::TooFewItems { needed: k.max(1), got: n });
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; n];
    let mut pos = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = pos % k;
            pos += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub classifier: ClassifierKind,
    pub folds: Vec<FoldResult>,
    pub mean: Metrics,
    /// Sample standard deviation across folds.
    pub std: Metrics,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Train on `k - 1` folds, score the held-out one, for every fold.
pub fn cv_classify(
    x: &DMatrix<f64>,
    y: &[bool],
    kind: ClassifierKind,
    params: &ClassifierParams,
    k: usize,
    seed: u64,
) -> Result<ClassificationReport> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: x.nrows() });
    }
    let assignment = kfold_split(y, k, seed)?;
    let folds = (0..k)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
            let tr: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
            let y_tr: Vec<bool> = tr.iter().map(|&i| y[i]).collect();
            let y_te: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            let model = train(kind, params, &rows(x, &tr), &y_tr)?;
            let scores = predict_scores(&model, &rows(x, &test))?;
            Ok(FoldResult { fold: f, n_train: tr.len(), n_test: test.len(), metrics: confusion_metrics(&scores, &y_te, 0.0)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_metric = |m: usize| folds.iter().map(|f| f.metrics.to_array()[m]).collect::<Vec<f64>>();
    let stats: Vec<(f64, f64)> = (0..Metrics::NAMES.len()).map(|m| mean_std(&per_metric(m))).collect();
    let pick = |sel: fn(&(f64, f64)) -> f64| {
        let mut a = [0.0; 6];
        for (slot, s) in a.iter_mut().zip(&stats) {
            *slot = sel(s);
        }
        Metrics::from_array(a)
    };
    Ok(ClassificationReport { classifier: kind, mean: pick(|s| s.0), std: pick(|s| s.1), folds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub n_examples: usize,
    pub n_elliptical: usize,
    pub n_spiral: usize,
    pub report: Option<ClassificationReport>,
    pub error: Option<String>,
}

/// For each threshold, keep the rows passing the confidence filter and
/// cross-validate on them. `x` holds one feature row per label row.
/// Failures such as an empty selection are reported per row.
pub fn confidence_sweep(
    labels: &[Gz2Row],
    x: &DMatrix<f64>,
    taus: &[f64],
    kind: ClassifierKind,
    params: &ClassifierParams,
    k: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: x.nrows() });
    }
    Ok(taus
        .iter()
        .map(|&tau| {
            let kept: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].retained(tau)).collect();
            let y: Vec<bool> = kept.iter().map(|&i| labels[i].is_spiral()).collect();
            let n_spiral = y.iter().filter(|&&s| s).count();
            let outcome = if kept.is_empty() {
                Err(Error::ZeroSelected(tau))
            } else {
                cv_classify(&rows(x, &kept), &y, kind, params, k, seed)
            };
            let (report, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow { tau, n_examples: kept.len(), n_elliptical: kept.len() - n_spiral, n_spiral, report, error }
        })
        .collect())
}
