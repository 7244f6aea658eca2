//! Zernike radial polynomials and magnitude-of-moment invariants on the polar grid.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::descriptor::{Descriptor, FeatureVector};
use crate::error::{Error, Result};
use crate::imgcore::{angle_table, PolarImage};

const MAX_FACTORIAL: usize = 170;

fn factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![1.0; MAX_FACTORIAL + 1];
        for i in 1..=MAX_FACTORIAL {
            t[i] = t[i - 1] * i as f64;
        }
        t
    });
    table[k]
}

/// Orders `N_z` and repetitions `M_z`, paired by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZernikeIndex {
    pub n_list: Vec<u32>,
    pub m_list: Vec<i32>,
}

impl ZernikeIndex {
    pub fn len(&self) -> usize {
        self.n_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_list.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, i32)> + '_ {
        self.n_list.iter().copied().zip(self.m_list.iter().copied())
    }
}

fn check_index(n: u32, m: i32) -> Result<()> {
    let am = m.unsigned_abs();
    if am > n || !(n - am).is_multiple_of(2) || n as usize > MAX_FACTORIAL {
        return Err(Error::InvalidIndex { n: n as i64, m: m as i64 });
    }
    Ok(())
}

/// `R_{n,m}(r)`, with `R_{n,m} = R_{n,-m}`.
pub fn zernike_radial(n: u32, m: i32, r: f64) -> Result<f64> {
    check_index(n, m)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!("radius {r} outside the unit disk")));
    }
    Ok(radial_unchecked(n as usize, m.unsigned_abs() as usize, r))
}

fn radial_unchecked(n: usize, m: usize, r: f64) -> f64 {
    let half_diff = (n - m) / 2;
    let half_sum = (n + m) / 2;
    (0..=half_diff)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = factorial(n - k)
                / (factorial(k) * factorial(half_sum - k) * factorial(half_diff - k));
            sign * coeff * r.powi((n - 2 * k) as i32)
        })
        .sum()
}

/// All parity-valid `(n, m)` with `0 <= n <= n_max`, `m >= 0`, sorted by `(n, m)`.
pub fn zernike_index_vectors(n_max: u32) -> ZernikeIndex {
    let mut n_list = Vec::new();
    let mut m_list = Vec::new();
    for n in 0..=n_max {
        for m in (n % 2..=n).step_by(2) {
            n_list.push(n);
            m_list.push(m as i32);
        }
    }
    ZernikeIndex { n_list, m_list }
}

/// Same as [`zernike_index_vectors`] but with negative repetitions included.
pub fn zernike_full_index(n_max: u32) -> ZernikeIndex {
    let mut n_list = Vec::new();
    let mut m_list = Vec::new();
    for n in 0..=n_max as i32 {
        for m in (-n..=n).step_by(2) {
            n_list.push(n as u32);
            m_list.push(m);
        }
    }
    ZernikeIndex { n_list, m_list }
}

/// Complex moments `A_j = sum_r sum_t f(r, t) conj(V_j(r / N_rho, t dtheta))`.
///
/// Ring `r` (0-based) maps to the unit-disk radius `(r + 1) / N_rho`.
pub fn zernike_moments(p: &PolarImage, index: &ZernikeIndex) -> Result<Vec<Complex64>> {
    for (n, m) in index.pairs() {
        check_index(n, m)?;
    }
    let n_rho = p.n_rho();
    let table = angle_table(p.n_theta());
    index
        .pairs()
        .map(|(n, m)| {
            let radial: Vec<f64> = (0..n_rho)
                .map(|r| radial_unchecked(n as usize, m.unsigned_abs() as usize, (r + 1) as f64 / n_rho as f64))
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, ring) in p.rings().enumerate() {
                // angular projection of this ring onto e^{-i m theta}
                let mut ring_acc = Complex64::new(0.0, 0.0);
                for (t, &v) in ring.iter().enumerate() {
                    let (c, s) = rotated_unit(&table, t, m);
                    ring_acc += Complex64::new(c, -s) * v;
                }
                acc += ring_acc * radial[r];
            }
            Ok(acc)
        })
        .collect()
}

/// `e^{i m theta_t}` read from the angle table, so equal angles give bitwise-equal values.
#[inline]
fn rotated_unit(table: &[(f64, f64)], t: usize, m: i32) -> (f64, f64) {
    let n = table.len() as i64;
    let idx = (t as i64 * m as i64).rem_euclid(n) as usize;
    table[idx]
}

/// `|A_j|` for every `(n, m)` with `m >= 0` up to order `n_max`.
pub fn zernike_features(p: &PolarImage, n_max: u32) -> Result<FeatureVector> {
    let index = zernike_index_vectors(n_max);
    let values = zernike_moments(p, &index)?.iter().map(|a| a.norm()).collect();
    Ok(FeatureVector::new(
        Descriptor::Zernike { n_max, n_rho: p.n_rho(), n_theta: p.n_theta() },
        values,
    ))
}
