//! Bayesian linear discriminant: Bayesian ridge regression on `+-1` targets
//! with the prior precision `alpha` and noise precision `beta` set by evidence
//! maximization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::learn::LinearModel;

pub const MAX_ITER: usize = 100;
pub const REL_TOL: f64 = 1e-6;
const PRECISION_RANGE: (f64, f64) = (1e-10, 1e10);

#[derive(Debug, Clone, PartialEq)]
pub struct BldaFit {
    pub model: LinearModel,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
}

/// Column means and the centered design.
fn center(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows() as f64;
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (mean, xc)
}

fn targets(y: &[bool]) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|&l| if l { 1.0 } else { -1.0 }))
}

/// Spectral form of the ridge problem on whichever Gram matrix is smaller.
struct Spectrum {
    /// Eigenvalues of `X^T X` (equal to the nonzero ones of `X X^T`).
    s: DVector<f64>,
    /// Target projected on the eigenvectors.
    c: DVector<f64>,
    v: DMatrix<f64>,
    dual: bool,
}

impl Spectrum {
    fn new(xc: &DMatrix<f64>, t: &DVector<f64>) -> Self {
        let dual = xc.ncols() > xc.nrows();
        let gram = if dual { xc * xc.transpose() } else { xc.transpose() * xc };
        let eig = SymmetricEigen::new(gram);
        let s = eig.eigenvalues.map(|v| v.max(0.0));
        let v = eig.eigenvectors;
        let c = if dual { v.transpose() * t } else { v.transpose() * (xc.transpose() * t) };
        Self { s, c, v, dual }
    }

    /// `(gamma, |w|^2, |t - X w|^2)` at `lambda = alpha / beta`.
    fn stats(&self, lambda: f64, t: &DVector<f64>) -> (f64, f64, f64) {
        let gamma = self.s.iter().map(|&s| s / (s + lambda)).sum();
        if self.dual {
            // w = X^T (G + l)^-1 t, residual = l (G + l)^-1 t
            let w2 = self.s.iter().zip(self.c.iter()).map(|(&s, &c)| s * c * c / (s + lambda).powi(2)).sum();
            let r2 = self.s.iter().zip(self.c.iter()).map(|(&s, &c)| (lambda * c / (s + lambda)).powi(2)).sum();
            (gamma, w2, r2)
        } else {
            // w = V (S + l)^-1 V^T X^T t; |t - Xw|^2 = |t|^2 - 2 w^T X^T t + w^T X^T X w
            let (mut w2, mut cross, mut quad) = (0.0, 0.0, 0.0);
            for (&s, &c) in self.s.iter().zip(self.c.iter()) {
                let coef = c / (s + lambda);
                w2 += coef * coef;
                cross += coef * c;
                quad += s * coef * coef;
            }
            (gamma, w2, (t.norm_squared() - 2.0 * cross + quad).max(0.0))
        }
    }

    fn weights(&self, xc: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
        let scaled = DVector::from_iterator(self.s.len(), self.s.iter().zip(self.c.iter()).map(|(&s, &c)| c / (s + lambda)));
        let inner = &self.v * scaled;
        if self.dual { xc.transpose() * inner } else { inner }
    }
}

pub fn fit_blda(x: &DMatrix<f64>, y: &[bool]) -> Result<BldaFit> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooFewItems { needed: 2, got: n });
    }
    let (mean, xc) = center(x);
    let t = targets(y);
    let t_mean = t.mean();
    let tc = t.add_scalar(-t_mean);
    let spec = Spectrum::new(&xc, &tc);

    let (lo, hi) = PRECISION_RANGE;
    let mut alpha = 1.0;
    let mut beta = 1.0 / tc.norm_squared().max(1e-12) * n as f64;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let (gamma, w2, r2) = spec.stats(alpha / beta, &tc);
        let new_alpha = (gamma / w2.max(1e-300)).clamp(lo, hi);
        let new_beta = ((n as f64 - gamma).max(1e-12) / r2.max(1e-300)).clamp(lo, hi);
        let change = ((new_alpha - alpha) / alpha).abs().max(((new_beta - beta) / beta).abs());
        alpha = new_alpha;
        beta = new_beta;
        if change < REL_TOL {
            break;
        }
    }
    let w = spec.weights(&xc, alpha / beta);
    let b = t_mean - w.dot(&mean);
    Ok(BldaFit { model: LinearModel { w, b }, alpha, beta, iterations })
}

/// Posterior mean of the weights on centered data at fixed hyperparameters,
/// `(X^T X + alpha / beta I)^-1 X^T t`, computed spectrally.
pub fn blda_posterior_mean(x: &DMatrix<f64>, y: &[bool], alpha: f64, beta: f64) -> DVector<f64> {
    let (_, xc) = center(x);
    let t = targets(y);
    let tc = t.add_scalar(-t.mean());
    let spec = Spectrum::new(&xc, &tc);
    spec.weights(&xc, alpha / beta)
}
