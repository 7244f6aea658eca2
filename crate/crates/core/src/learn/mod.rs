//! Retrieval evaluation, binary classifiers, cross-validation and metrics.

pub mod blda;
pub mod cv;
pub mod elm;
pub mod metrics;
pub mod retrieval;
pub mod steplda;
pub mod svm;
pub mod zscore;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use zscore::ZScore;

pub use cv::{confidence_sweep, cv_classify, kfold_split, ClassificationReport, FoldResult, SweepRow};
pub use metrics::{auc, confusion_metrics, Metrics};
pub use retrieval::{average_precision, euclidean_rank, precision_at_k, retrieval_eval, RankedList, RetrievalReport};

/// `score(x) = w^T x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: DVector<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.w.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Blda,
    StepLda,
    Elm,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Svm => "svm",
            Self::Blda => "blda",
            Self::StepLda => "steplda",
            Self::Elm => "elm",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(Self::Svm),
            "blda" => Ok(Self::Blda),
            "steplda" => Ok(Self::StepLda),
            "elm" => Ok(Self::Elm),
            _ => Err(Error::InvalidParameter(format!("unknown classifier {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub c_reg: f64,
    pub p_enter: f64,
    pub p_remove: f64,
    pub hidden: usize,
    pub elm_lambda: f64,
    /// Standardize features with training statistics before fitting.
    pub zscore: bool,
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            c_reg: svm::DEFAULT_C,
            p_enter: steplda::DEFAULT_P_ENTER,
            p_remove: steplda::DEFAULT_P_REMOVE,
            hidden: elm::DEFAULT_HIDDEN,
            elm_lambda: elm::DEFAULT_LAMBDA,
            zscore: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelWeights {
    Linear(LinearModel),
    StepLda(steplda::StepLdaModel),
    Elm(elm::ElmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub dim: usize,
    pub zscore: Option<ZScore>,
    pub weights: ModelWeights,
}

fn check_training(x: &DMatrix<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if !y.iter().any(|&l| l) || y.iter().all(|&l| l) {
        return Err(Error::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Fit one classifier; `true` labels are the positive (spiral) class.
pub fn train(kind: ClassifierKind, params: &ClassifierParams, x: &DMatrix<f64>, y: &[bool]) -> Result<ClassifierModel> {
    check_training(x, y)?;
    let zscore = params.zscore.then(|| ZScore::fit(x));
    let xs = match &zscore {
        Some(z) => z.apply(x),
        None => x.clone(),
    };
    let weights = match kind {
        ClassifierKind::Svm => ModelWeights::Linear(svm::fit_svm(&xs, y, params.c_reg, params.seed)),
        ClassifierKind::Blda => ModelWeights::Linear(blda::fit_blda(&xs, y)?.model),
        ClassifierKind::StepLda => {
            ModelWeights::StepLda(steplda::fit_steplda(&xs, y, params.p_enter, params.p_remove)?)
        }
        ClassifierKind::Elm => {
            ModelWeights::Elm(elm::fit_elm(&xs, y, params.hidden, params.elm_lambda, params.seed))
        }
    };
    Ok(ClassifierModel { kind, dim: x.ncols(), zscore, weights })
}

/// Continuous decision scores, higher meaning more likely spiral.
pub fn predict_scores(model: &ClassifierModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: x.ncols() });
    }
    let xs = match &model.zscore {
        Some(z) => z.apply(x),
        None => x.clone(),
    };
    let rows = || xs.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>());
    let scores: Vec<f64> = match &model.weights {
        ModelWeights::Linear(m) => rows().map(|r| m.score_row(&r)).collect(),
        ModelWeights::StepLda(m) => rows().map(|r| m.score_row(&r)).collect(),
        ModelWeights::Elm(m) => m.scores(&xs).iter().copied().collect(),
    };
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(scores)
}
