//! Linear soft-margin SVM trained by dual coordinate descent on the hinge loss.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::learn::LinearModel;

pub const DEFAULT_C: f64 = 1.0;
const MAX_EPOCHS: usize = 1000;
const TOLERANCE: f64 = 1e-3;

/// Solve `min_w 1/2 |w|^2 + C sum max(0, 1 - y_i w^T [x_i; 1])` with the bias
/// folded in as a constant feature. Visit order is a seeded permutation per epoch.
pub fn fit_svm(x: &DMatrix<f64>, y: &[bool], c: f64, seed: u64) -> LinearModel {
    let (n, d) = x.shape();
    let sign: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| x.row(i).transpose()).collect();
    let qii: Vec<f64> = rows.iter().map(|r| r.norm_squared() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = DVector::<f64>::zeros(d);
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..MAX_EPOCHS {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = sign[i] * (w.dot(&rows[i]) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * sign[i];
                w.axpy(step, &rows[i], 1.0);
                b += step;
            }
        }
        if pg_max - pg_min < TOLERANCE {
            break;
        }
    }
    LinearModel { w, b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_points() {
        let x = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let m = fit_svm(&x, &[false, true], 10.0, 0);
        assert!(m.score_row(&[-1.0]) < 0.0 && m.score_row(&[1.0]) > 0.0);
    }

    #[test]
    fn score_is_affine() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.5, 3.0, 3.0, 4.0, 2.5]);
        let m = fit_svm(&x, &[false, false, true, true], 1.0, 3);
        for a in [0.5, 2.0, -3.0] {
            let p = [a * 1.5, a * -0.7];
            let manual = m.w[0] * p[0] + m.w[1] * p[1] + m.b;
            assert!((m.score_row(&p) - manual).abs() < 1e-10);
        }
    }
}
