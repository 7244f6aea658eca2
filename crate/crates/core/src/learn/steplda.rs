//! Stepwise feature selection on Wilks' lambda followed by Fisher's LDA on
//! the selected subset.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

pub const DEFAULT_P_ENTER: f64 = 0.05;
pub const DEFAULT_P_REMOVE: f64 = 0.10;
/// Conditional variance, relative to the raw one, below which a feature counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepAction {
    Enter,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub action: StepAction,
    pub feature: usize,
    pub f_stat: f64,
    pub p_value: f64,
    /// Selection before this step.
    pub before: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLdaModel {
    pub selected: Vec<usize>,
    /// LDA weights over `selected`, in the same order.
    pub w: DVector<f64>,
    pub b: f64,
    pub trace: Vec<Step>,
}

impl StepLdaModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.selected.iter().zip(self.w.iter()).map(|(&j, &w)| w * row[j]).sum::<f64>() + self.b
    }
}

/// Within-class and total scatter matrices of a two-class problem.
pub fn scatter_matrices(x: &DMatrix<f64>, y: &[bool]) -> (DMatrix<f64>, DMatrix<f64>, [DVector<f64>; 2]) {
    let p = x.ncols();
    let mut means = [DVector::zeros(p), DVector::zeros(p)];
    let mut counts = [0usize; 2];
    for (i, &l) in y.iter().enumerate() {
        means[l as usize] += x.row(i).transpose();
        counts[l as usize] += 1;
    }
    for k in 0..2 {
        means[k] /= counts[k].max(1) as f64;
    }
    let total_mean = (&means[0] * counts[0] as f64 + &means[1] * counts[1] as f64) / y.len() as f64;
    let mut within = DMatrix::zeros(x.nrows(), p);
    let mut total = DMatrix::zeros(x.nrows(), p);
    for (i, &l) in y.iter().enumerate() {
        let r = x.row(i);
        within.row_mut(i).copy_from(&(r - means[l as usize].transpose()));
        total.row_mut(i).copy_from(&(r - total_mean.transpose()));
    }
    (within.transpose() * &within, total.transpose() * &total, means)
}

fn sub(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// `m_jj - m_jS m_SS^-1 m_Sj`, the variance of feature `j` left after regressing on `S`.
fn conditional_var(m: &DMatrix<f64>, s: &[usize], j: usize, chol: Option<&nalgebra::Cholesky<f64, nalgebra::Dyn>>) -> f64 {
    match chol {
        None => m[(j, j)],
        Some(c) => {
            let v = DVector::from_iterator(s.len(), s.iter().map(|&k| m[(k, j)]));
            let z = c.l().solve_lower_triangular(&v).expect("triangular solve");
            m[(j, j)] - z.norm_squared()
        }
    }
}

fn f_test(lambda: f64, df2: f64) -> (f64, f64) {
    if df2 < 1.0 {
        return (0.0, 1.0);
    }
    let f = ((1.0 - lambda) / lambda).max(0.0) * df2;
    let dist = FisherSnedecor::new(1.0, df2).expect("positive degrees of freedom");
    (f, dist.sf(f))
}

/// Forward entry / backward removal with partial F tests, then LDA on the result.
pub fn fit_steplda(x: &DMatrix<f64>, y: &[bool], p_enter: f64, p_remove: f64) -> Result<StepLdaModel> {
    if !(0.0 < p_enter && p_enter <= p_remove && p_remove < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < p_enter <= p_remove < 1, got {p_enter} / {p_remove}"
        )));
    }
    let n = x.nrows() as f64;
    let p = x.ncols();
    let (w_mat, t_mat, means) = scatter_matrices(x, y);
    let mut selected: Vec<usize> = Vec::new();
    let mut trace = Vec::new();

    for _ in 0..(4 * p + 4) {
        let q = selected.len() as f64;
        let df_enter = n - 2.0 - q;
        let (wc, tc) = if selected.is_empty() {
            (None, None)
        } else {
            (sub(&w_mat, &selected).cholesky(), sub(&t_mat, &selected).cholesky())
        };
        if !selected.is_empty() && (wc.is_none() || tc.is_none()) {
            break;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for j in (0..p).filter(|j| !selected.contains(j)) {
            let wv = conditional_var(&w_mat, &selected, j, wc.as_ref());
            let tv = conditional_var(&t_mat, &selected, j, tc.as_ref());
            if !(wv > COLLINEAR_TOL * w_mat[(j, j)]) || !(tv > 0.0) {
                continue;
            }
            let (f, pv) = f_test(wv / tv, df_enter);
            if best.is_none_or(|(_, bf, _)| f > bf) {
                best = Some((j, f, pv));
            }
        }
        let Some((j, f, pv)) = best.filter(|b| b.2 < p_enter) else { break };
        trace.push(Step { action: StepAction::Enter, feature: j, f_stat: f, p_value: pv, before: selected.clone() });
        selected.push(j);

        // backward pass: drop the weakest member if it no longer earns its place
        if selected.len() > 1 {
            let wi = sub(&w_mat, &selected).try_inverse();
            let ti = sub(&t_mat, &selected).try_inverse();
            if let (Some(wi), Some(ti)) = (wi, ti) {
                let df_remove = n - 2.0 - (selected.len() as f64 - 1.0);
                let worst = (0..selected.len())
                    .map(|k| {
                        let (f, pv) = f_test(ti[(k, k)] / wi[(k, k)], df_remove);
                        (k, f, pv)
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((k, f, pv)) = worst.filter(|w| w.2 > p_remove) {
                    trace.push(Step {
                        action: StepAction::Remove,
                        feature: selected[k],
                        f_stat: f,
                        p_value: pv,
                        before: selected.clone(),
                    });
                    selected.remove(k);
                }
            }
        }
    }

    let diff = &means[1] - &means[0];
    let mid = (&means[0] + &means[1]) * 0.5;
    let (w, b) = if selected.is_empty() {
        (DVector::zeros(0), 0.0)
    } else {
        let pooled = sub(&w_mat, &selected) / (n - 2.0).max(1.0);
        let d = DVector::from_iterator(selected.len(), selected.iter().map(|&j| diff[j]));
        let m = DVector::from_iterator(selected.len(), selected.iter().map(|&j| mid[j]));
        let w = pooled.cholesky().map(|c| c.solve(&d)).ok_or(Error::NonFinite)?;
        let b = -w.dot(&m);
        (w, b)
    };
    Ok(StepLdaModel { selected, w, b, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(seed: u64) -> (DMatrix<f64>, Vec<bool>) {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let y: Vec<bool> = (0..120).map(|i| i % 2 == 0).collect();
        // features 0 and 3 informative, 5 a near copy of 0, the rest noise
        let x = DMatrix::from_fn(120, 8, |i, j| {
            let v = next();
            match j {
                0 => v + if y[i] { 0.6 } else { 0.0 },
                3 => v - if y[i] { 0.3 } else { 0.0 },
                _ => v,
            }
        });
        let mut x = x;
        for i in 0..120 {
            x[(i, 5)] = x[(i, 0)] + 0.05 * x[(i, 5)];
        }
        (x, y)
    }

    /// Partial F from determinants of the scatter submatrices.
    fn oracle_f(x: &DMatrix<f64>, y: &[bool], before: &[usize], j: usize, entering: bool) -> f64 {
        let (w, t, _) = scatter_matrices(x, y);
        let wilks = |s: &[usize]| if s.is_empty() { 1.0 } else { sub(&w, s).determinant() / sub(&t, s).determinant() };
        let (small, large): (Vec<usize>, Vec<usize>) = if entering {
            (before.to_vec(), before.iter().copied().chain([j]).collect())
        } else {
            (before.iter().copied().filter(|&k| k != j).collect(), before.to_vec())
        };
        let partial = wilks(&large) / wilks(&small);
        let df2 = x.nrows() as f64 - 2.0 - small.len() as f64;
        (1.0 - partial) / partial * df2
    }

    #[test]
    fn trace_matches_determinant_oracle() {
        for seed in 0..5 {
            let (x, y) = problem(seed);
            let m = fit_steplda(&x, &y, DEFAULT_P_ENTER, DEFAULT_P_REMOVE).unwrap();
            assert!(m.selected.contains(&0) || m.selected.contains(&5));
            for step in &m.trace {
                let f = oracle_f(&x, &y, &step.before, step.feature, step.action == StepAction::Enter);
                assert!((f - step.f_stat).abs() < 1e-6 * f.max(1.0), "{step:?} vs {f}");
                match step.action {
                    StepAction::Enter => assert!(step.p_value < DEFAULT_P_ENTER),
                    StepAction::Remove => assert!(step.p_value > DEFAULT_P_REMOVE),
                }
            }
        }
    }

    #[test]
    fn pure_noise_selects_little_and_scores_constant_when_empty() {
        let y: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let x = DMatrix::from_fn(40, 2, |i, j| if j == 0 { 1.0 } else { (i / 2) as f64 });
        let m = fit_steplda(&x, &y, 0.05, 0.1).unwrap();
        assert!(m.selected.is_empty());
        assert_eq!(m.score_row(&[1.0, 3.0]), m.score_row(&[1.0, 9.0]));
    }
}
