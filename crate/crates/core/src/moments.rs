//! Geometric and complex moments with the Hu and Flusser invariant sets.
//!
//! Moments are taken about the gravity center in raw pixel units.

use num_complex::Complex64;

use crate::descriptor::{Descriptor, FeatureVector};
use crate::error::Result;
use crate::imgcore::{gravity_center, Centroid, GrayImage};

/// `c_pq` of order `p + q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMoment {
    pub p: usize,
    pub q: usize,
    pub value: Complex64,
}

/// `sum (x - cx)^p (y - cy)^q f(x, y)`.
pub fn geometric_moment(img: &GrayImage, p: u32, q: u32, center: Centroid) -> f64 {
    let mut total = 0.0;
    for y in 0..img.height() {
        let dy = (y as f64 - center.cy).powi(q as i32);
        let mut row = 0.0;
        for x in 0..img.width() {
            let v = img.get(x, y);
            if v != 0.0 {
                row += (x as f64 - center.cx).powi(p as i32) * v;
            }
        }
        total += row * dy;
    }
    total
}

/// `sum (x + iy)^p (x - iy)^q f(x, y)` with coordinates relative to `center`.
pub fn complex_moment_about(img: &GrayImage, p: usize, q: usize, center: Centroid) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.get(x, y);
            if v == 0.0 {
                continue;
            }
            let z = Complex64::new(x as f64 - center.cx, y as f64 - center.cy);
            acc += z.powu(p as u32) * z.conj().powu(q as u32) * v;
        }
    }
    acc
}

/// Central complex moment `c_pq` about the gravity center.
pub fn complex_moment(img: &GrayImage, p: usize, q: usize) -> Result<ComplexMoment> {
    let c = gravity_center(img)?;
    Ok(ComplexMoment { p, q, value: complex_moment_about(img, p, q, c) })
}

/// All `c_pq` with `p + q <= max_order`, accumulated in one pass over the image.
#[derive(Debug, Clone)]
pub struct MomentTable {
    max_order: usize,
    values: Vec<Complex64>,
}

impl MomentTable {
    pub fn compute(img: &GrayImage, center: Centroid, max_order: usize) -> Self {
        let n = max_order + 1;
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        let mut zp = vec![Complex64::new(0.0, 0.0); n];
        let mut zq = vec![Complex64::new(0.0, 0.0); n];
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = img.get(x, y);
                if v == 0.0 {
                    continue;
                }
                let z = Complex64::new(x as f64 - center.cx, y as f64 - center.cy);
                let zc = z.conj();
                zp[0] = Complex64::new(v, 0.0);
                zq[0] = Complex64::new(1.0, 0.0);
                for k in 1..n {
                    zp[k] = zp[k - 1] * z;
                    zq[k] = zq[k - 1] * zc;
                }
                for p in 0..n {
                    for q in 0..n - p {
                        values[p * n + q] += zp[p] * zq[q];
                    }
                }
            }
        }
        Self { max_order, values }
    }

    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        assert!(p + q <= self.max_order, "moment c{p}{q} not in table");
        self.values[p * (self.max_order + 1) + q]
    }
}

/// The seven Hu invariants written over complex moments.
pub fn hu_from_table(t: &MomentTable) -> [f64; 7] {
    let c = |p, q| t.get(p, q);
    let c12 = c(1, 2);
    let c30_c12_3 = c(3, 0) * c12 * c12 * c12;
    [
        c(1, 1).re,
        (c(2, 0) * c(0, 2)).re,
        (c(3, 0) * c(0, 3)).re,
        (c(2, 1) * c12).re,
        c30_c12_3.re,
        (c(2, 0) * c12 * c12).re,
        c30_c12_3.im,
    ]
}

/// The eleven Flusser invariants of orders two to four.
pub fn flusser_from_table(t: &MomentTable) -> [f64; 11] {
    let c = |p, q| t.get(p, q);
    let c12 = c(1, 2);
    let c12_2 = c12 * c12;
    let a = c(2, 0) * c12_2;
    let b = c(3, 0) * c12_2 * c12;
    let d = c(3, 1) * c12_2;
    let e = c(4, 0) * c12_2 * c12_2;
    [
        c(1, 1).re,
        (c(2, 1) * c12).re,
        a.re,
        a.im,
        b.re,
        b.im,
        c(2, 2).re,
        d.re,
        d.im,
        e.re,
        e.im,
    ]
}

pub fn hu_about(img: &GrayImage, center: Centroid) -> FeatureVector {
    let t = MomentTable::compute(img, center, 3);
    FeatureVector::new(Descriptor::Hu, hu_from_table(&t).to_vec())
}

pub fn flusser_about(img: &GrayImage, center: Centroid) -> FeatureVector {
    let t = MomentTable::compute(img, center, 4);
    FeatureVector::new(Descriptor::Flusser, flusser_from_table(&t).to_vec())
}

/// `[phi_1 .. phi_7]` about the gravity center.
pub fn hu_features(img: &GrayImage) -> Result<FeatureVector> {
    Ok(hu_about(img, gravity_center(img)?))
}

/// `[psi_1 .. psi_11]` about the gravity center.
pub fn flusser_features(img: &GrayImage) -> Result<FeatureVector> {
    Ok(flusser_about(img, gravity_center(img)?))
}
