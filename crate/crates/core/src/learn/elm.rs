//! Extreme learning machine: a fixed random sigmoid layer with orthonormalized
//! weights and a ridge least-squares readout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DEFAULT_HIDDEN: usize = 1000;
pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// Input-to-hidden weights, `d x h`.
    pub hidden_w: DMatrix<f64>,
    pub hidden_b: DVector<f64>,
    pub out: DVector<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Gaussian `d x h` matrix with orthonormal columns when `h <= d`, orthonormal rows otherwise.
pub fn orthonormal_weights(d: usize, h: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    if h <= d {
        let g = DMatrix::from_fn(d, h, |_, _| draw());
        g.qr().q()
    } else {
        let g = DMatrix::from_fn(h, d, |_, _| draw());
        g.qr().q().transpose()
    }
}

impl ElmModel {
    pub fn hidden(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x * &self.hidden_w;
        for mut row in h.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(self.hidden_b.iter()) {
                *v = sigmoid(*v + b);
            }
        }
        h
    }

    pub fn scores(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.hidden(x) * &self.out
    }
}

/// `(A + lambda I)^-1 b` for symmetric positive semidefinite `A`, by eigendecomposition.
fn psd_solve(a: DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let eig = SymmetricEigen::new(a);
    let proj = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter().zip(eig.eigenvalues.iter()).map(|(&p, &s)| p / (s.max(0.0) + lambda)),
    );
    eig.eigenvectors * scaled
}

pub fn fit_elm(x: &DMatrix<f64>, y: &[bool], hidden: usize, lambda: f64, seed: u64) -> ElmModel {
    let d = x.ncols();
    let hidden_w = orthonormal_weights(d, hidden, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    let hidden_b = DVector::from_fn(hidden, |_, _| StandardNormal.sample(&mut rng));
    let mut model = ElmModel { hidden_w, hidden_b, out: DVector::zeros(hidden) };
    let h = model.hidden(x);
    let t = DVector::from_iterator(y.len(), y.iter().map(|&l| if l { 1.0 } else { -1.0 }));
    model.out = if hidden <= x.nrows() {
        psd_solve(h.transpose() * &h, &(h.transpose() * &t), lambda)
    } else {
        h.transpose() * psd_solve(&h * h.transpose(), &t, lambda)
    };
    model
}
