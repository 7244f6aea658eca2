//! Discrete Fourier-Mellin transform evaluated directly in Cartesian coordinates.
//!
//! The image is resampled about its gravity center and summed as
//!
//! `M(k, v) = 1/(2 pi) * sum f(p, q) dA (p + iq)^-k (p^2 + q^2)^((k - 2 + sigma - iv) / 2)`
//!
//! over quadrature nodes `(p, q)` relative to the center: the integer lattice
//! away from it, a polar grid close to it (see [`quadrature_nodes`]).
//! Each node contributes `f dA r^(sigma - 2) e^{-i (k theta + v ln r)}`.
//! Only the half-plane `{(0, v): v >= 0} U {(k, v): k >= 1}` is stored; the rest
//! follows from `M(-k, -v) = conj(M(k, v))`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::descriptor::{Descriptor, FeatureVector};
use crate::error::{Error, Result};
use crate::imgcore::{angle_table, gravity_center, Centroid, GrayImage};

pub const DEFAULT_SIGMA: f64 = 0.5;

const NORMALIZER_EPS: f64 = 1e-12;

/// `(1 + V) + K (2V + 1)`.
pub fn fmt_count(k_max: usize, v_max: usize) -> usize {
    (1 + v_max) + k_max * (2 * v_max + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmtGrid {
    k_max: usize,
    v_max: usize,
    sigma: f64,
    coeffs: Vec<Complex64>,
}

impl FmtGrid {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn v_max(&self) -> usize {
        self.v_max
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-plane coefficients in feature order: `(0, 0..=V)`, then `k = 1..=K` with `v = -V..=V`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `(k, v)` labels matching [`Self::coeffs`].
    pub fn indices(&self) -> Vec<(i64, i64)> {
        half_plane_indices(self.k_max, self.v_max)
    }

    /// Any coefficient with `|k| <= K`, `|v| <= V`, using conjugate symmetry outside the half-plane.
    pub fn get(&self, k: i64, v: i64) -> Complex64 {
        let (kk, vv) = (self.k_max as i64, self.v_max as i64);
        assert!(k.abs() <= kk && v.abs() <= vv, "({k}, {v}) outside the grid");
        if k < 0 || (k == 0 && v < 0) {
            return self.get(-k, -v).conj();
        }
        let idx = if k == 0 { v as usize } else { (vv + 1 + (k - 1) * (2 * vv + 1) + v + vv) as usize };
        self.coeffs[idx]
    }
}

fn half_plane_indices(k_max: usize, v_max: usize) -> Vec<(i64, i64)> {
    let v = v_max as i64;
    let mut out: Vec<(i64, i64)> = (0..=v).map(|vv| (0, vv)).collect();
    for k in 1..=k_max as i64 {
        out.extend((-v..=v).map(|vv| (k, vv)));
    }
    out
}

/// Radii between which the lattice sum hands over to the polar core.
const CORE_INNER: f64 = 2.0;
const CORE_OUTER: f64 = 6.0;
const CORE_RADIAL_NODES: usize = 96;
const CORE_ANGLES: usize = 64;

/// Partition of unity: 1 inside the core, 0 outside, cosine ramp between.
fn core_weight(r: f64) -> f64 {
    if r <= CORE_INNER {
        1.0
    } else if r >= CORE_OUTER {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - CORE_INNER) / (CORE_OUTER - CORE_INNER)).cos())
    }
}

/// Quadrature nodes `(dx, dy, f dA)` relative to `c`.
///
/// Away from the center the integrand is sampled on the unit lattice anchored
/// at `c`. Near the center the kernel `r^(sigma - 2)` is singular and a square
/// lattice aliases it into the orders `k = 0 mod 4`, so that part of the
/// integral is taken on a polar grid in `u = r^sigma`, where the measure
/// `r^(sigma - 2) r dr` is flat. The two parts are blended by [`core_weight`].
fn quadrature_nodes(img: &GrayImage, c: Centroid, sigma: f64) -> Vec<(f64, f64, f64)> {
    let reach = [c.cx, img.width() as f64 - 1.0 - c.cx, c.cy, img.height() as f64 - 1.0 - c.cy]
        .into_iter()
        .fold(0.0, f64::max)
        .ceil() as i64
        + 1;
    let mut out = Vec::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            let (dx, dy) = (i as f64, j as f64);
            let w = 1.0 - core_weight(dx.hypot(dy));
            if w == 0.0 {
                continue;
            }
            let v = img.sample_bilinear(c.cx + dx, c.cy + dy);
            if v != 0.0 {
                out.push((dx, dy, w * v));
            }
        }
    }
    let u_max = CORE_OUTER.powf(sigma);
    let du = u_max / CORE_RADIAL_NODES as f64;
    let dtheta = 2.0 * PI / CORE_ANGLES as f64;
    let table = angle_table(CORE_ANGLES);
    for n in 0..CORE_RADIAL_NODES {
        let u = (n as f64 + 0.5) * du;
        let r = u.powf(1.0 / sigma);
        // dA = r dr dtheta with dr = r / (sigma u) du
        let area = r * r / (sigma * u) * du * dtheta * core_weight(r);
        for &(cos, sin) in &table {
            let (dx, dy) = (r * cos, r * sin);
            let v = img.sample_bilinear(c.cx + dx, c.cy + dy);
            if v != 0.0 {
                out.push((dx, dy, area * v));
            }
        }
    }
    out
}

/// Half-plane FMT grid about the gravity center.
pub fn fmt_cartesian(img: &GrayImage, k_max: usize, v_max: usize, sigma: f64) -> Result<FmtGrid> {
    let c = gravity_center(img)?;
    fmt_cartesian_about(img, c, k_max, v_max, sigma)
}

pub fn fmt_cartesian_about(
    img: &GrayImage,
    center: Centroid,
    k_max: usize,
    v_max: usize,
    sigma: f64,
) -> Result<FmtGrid> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("FMT sigma must be positive, got {sigma}")));
    }
    let samples = quadrature_nodes(img, center, sigma);
    let stride = 2 * v_max + 1;
    // full rectangle k = 0..=K, v = -V..=V; the k = 0, v < 0 half is dropped at the end
    let mut acc = vec![Complex64::new(0.0, 0.0); (k_max + 1) * stride];
    let mut ang = vec![Complex64::new(0.0, 0.0); k_max + 1];
    let mut rad = vec![Complex64::new(0.0, 0.0); v_max + 1];
    for &(dx, dy, f) in &samples {
        let r2 = dx * dx + dy * dy;
        let r = r2.sqrt();
        let weight = f * r.powf(sigma - 2.0) / (2.0 * PI);
        let unit_angle = Complex64::new(dx / r, -dy / r);
        let unit_log = Complex64::from_polar(1.0, -r.ln());
        ang[0] = Complex64::new(weight, 0.0);
        for k in 1..=k_max {
            ang[k] = ang[k - 1] * unit_angle;
        }
        rad[0] = Complex64::new(1.0, 0.0);
        for v in 1..=v_max {
            rad[v] = rad[v - 1] * unit_log;
        }
        for (k, a) in ang.iter().enumerate() {
            let row = &mut acc[k * stride..(k + 1) * stride];
            row[v_max] += a;
            for v in 1..=v_max {
                row[v_max + v] += a * rad[v];
                row[v_max - v] += a * rad[v].conj();
            }
        }
    }
    let mut coeffs = Vec::with_capacity(fmt_count(k_max, v_max));
    coeffs.extend_from_slice(&acc[v_max..stride]);
    coeffs.extend_from_slice(&acc[stride..]);
    Ok(FmtGrid { k_max, v_max, sigma, coeffs })
}

/// `|M(k, v)|` over the half-plane.
pub fn fmt1_features(g: &FmtGrid) -> FeatureVector {
    FeatureVector::new(
        Descriptor::Fmt1 { k_max: g.k_max, v_max: g.v_max, sigma: g.sigma },
        g.coeffs.iter().map(|c| c.norm()).collect(),
    )
}

/// Phase-normalized invariants `I(k, v) = M(0,0)^{(-sigma + iv)/sigma} e^{ik arg M(1,0)} M(k, v)`.
pub fn fmt2_invariants(g: &FmtGrid) -> Result<Vec<Complex64>> {
    let m00 = g.get(0, 0);
    if m00.norm() <= NORMALIZER_EPS {
        return Err(Error::DegenerateNormalizer("M(0,0)"));
    }
    let orientation = if g.k_max >= 1 {
        let m10 = g.get(1, 0);
        if m10.norm() <= NORMALIZER_EPS * m00.norm() {
            return Err(Error::DegenerateNormalizer("M(1,0)"));
        }
        m10.arg()
    } else {
        0.0
    };
    let ln_m00 = m00.ln();
    Ok(g.indices()
        .into_iter()
        .zip(&g.coeffs)
        .map(|((k, v), &m)| {
            let exponent = Complex64::new(-g.sigma, v as f64) / g.sigma;
            (exponent * ln_m00).exp() * Complex64::from_polar(1.0, k as f64 * orientation) * m
        })
        .collect())
}

/// `|I(k, v)|`. The orientation factor has unit modulus, so only `M(0,0)` must be nonzero here.
pub fn fmt2_features(g: &FmtGrid) -> Result<FeatureVector> {
    let m00 = g.get(0, 0);
    if m00.norm() <= NORMALIZER_EPS {
        return Err(Error::DegenerateNormalizer("M(0,0)"));
    }
    let ln_m00 = m00.ln();
    let values = g
        .indices()
        .into_iter()
        .zip(&g.coeffs)
        .map(|((_, v), &m)| {
            let exponent = Complex64::new(-g.sigma, v as f64) / g.sigma;
            ((exponent * ln_m00).exp() * m).norm()
        })
        .collect();
    Ok(FeatureVector::new(Descriptor::Fmt2 { k_max: g.k_max, v_max: g.v_max, sigma: g.sigma }, values))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::imgcore::{rotate, to_polar};

    fn shape(side: usize) -> GrayImage {
        let c = (side as f64 - 1.0) / 2.0;
        GrayImage::from_fn(side, side, |x, y| {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let r = (dx * dx + dy * dy).sqrt();
            let th = dy.atan2(dx);
            let v = (-(r - 9.0).powi(2) / 8.0).exp() * (1.0 + 0.4 * (2.0 * th + 0.3).cos() + 0.2 * th.sin());
            if r < 20.0 { v } else { 0.0 }
        })
    }

    /// The defining sum over the same nodes with explicit complex powers.
    fn direct(img: &GrayImage, k: i64, v: i64, sigma: f64) -> Complex64 {
        let c = gravity_center(img).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for (dx, dy, f) in quadrature_nodes(img, c, sigma) {
            let z = Complex64::new(dx, dy);
            let e = Complex64::new(k as f64 - 2.0 + sigma, -(v as f64)) / 2.0;
            acc += z.powi(-(k as i32)) * Complex64::new(dx * dx + dy * dy, 0.0).powc(e) * f;
        }
        acc / (2.0 * PI)
    }

    #[test]
    fn counts() {
        assert_eq!(fmt_count(5, 5), 61);
        assert_eq!(fmt_count(7, 7), 113);
        assert_eq!(fmt_count(9, 9), 181);
        assert_eq!(fmt_count(0, 0), 1);
        assert_eq!(fmt_count(1, 0), 2);
        let g = fmt_cartesian(&shape(41), 7, 7, 0.5).unwrap();
        assert_eq!(fmt1_features(&g).values.len(), 113);
        assert_eq!(fmt2_features(&g).unwrap().values.len(), 113);
        assert_eq!(g.indices()[..3], [(0, 0), (0, 1), (0, 2)]);
        assert_eq!(g.indices()[8], (1, -7));
    }

    #[test]
    fn grid_matches_direct_power_formula() {
        let img = shape(41);
        let g = fmt_cartesian(&img, 3, 3, 0.5).unwrap();
        for k in -3..=3 {
            for v in -3..=3 {
                let d = direct(&img, k, v, 0.5);
                assert!((g.get(k, v) - d).norm() < 1e-10 * d.norm().max(1e-3), "({k},{v})");
            }
        }
    }

    #[test]
    fn conjugate_symmetry_of_full_plane() {
        let img = shape(33);
        for (k, v) in [(1, 2), (2, -1), (0, 3), (3, 3)] {
            let a = direct(&img, k, v, 0.5);
            let b = direct(&img, -k, -v, 0.5);
            assert!((a - b.conj()).norm() < 1e-10 * a.norm().max(1e-3));
        }
    }

    #[test]
    fn m00_real_positive() {
        let g = fmt_cartesian(&shape(41), 2, 2, 0.5).unwrap();
        let m = g.get(0, 0);
        assert!(m.re > 0.0 && m.im.abs() < 1e-12 * m.re);
    }

    #[test]
    fn quarter_turn_changes_only_phase() {
        let img = shape(40);
        let rot = rotate(&img, FRAC_PI_2, img.frame_center());
        let a = fmt1_features(&fmt_cartesian(&img, 5, 5, 0.5).unwrap());
        let b = fmt1_features(&fmt_cartesian(&rot, 5, 5, 0.5).unwrap());
        let scale = a.values.iter().cloned().fold(0.0, f64::max);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-6 * scale));
        }
    }

    #[test]
    fn fmt2_identities() {
        let img = shape(41);
        let g = fmt_cartesian(&img, 4, 4, 0.5).unwrap();
        let m00 = g.get(0, 0).re;
        let f2 = fmt2_features(&g).unwrap();
        let inv = fmt2_invariants(&g).unwrap();
        for ((c, &mag), i) in g.coeffs().iter().zip(&f2.values).zip(&inv) {
            assert!((mag - c.norm() / m00).abs() < 1e-10 * mag.max(1e-12));
            assert!((i.norm() - mag).abs() < 1e-10 * mag.max(1e-12));
        }
        assert!((inv[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        let scaled = fmt_cartesian(&img.map(|v| 2.5 * v), 4, 4, 0.5).unwrap();
        for (a, b) in f2.values.iter().zip(&fmt2_features(&scaled).unwrap().values) {
            assert!((a - b).abs() < 1e-10 * a.max(1e-12));
        }
    }

    #[test]
    fn degenerate_normalizers() {
        let zero_grid = FmtGrid { k_max: 1, v_max: 0, sigma: 0.5, coeffs: vec![Complex64::new(0.0, 0.0); 2] };
        assert!(matches!(fmt2_features(&zero_grid), Err(Error::DegenerateNormalizer("M(0,0)"))));
        let no_orientation =
            FmtGrid { k_max: 1, v_max: 0, sigma: 0.5, coeffs: vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)] };
        assert!(matches!(fmt2_invariants(&no_orientation), Err(Error::DegenerateNormalizer("M(1,0)"))));
        assert!(fmt2_features(&no_orientation).is_ok());
    }

    /// Polar-form approximation `drho dtheta sum_r F_k(rho) rho^{sigma - iv - 1}`.
    fn polar_fmt(img: &GrayImage, k: i64, v: i64, sigma: f64) -> Complex64 {
        let c = gravity_center(img).unwrap();
        let p = to_polar(img, c, 400, 512, 20.0).unwrap();
        let (dr, dt) = (p.delta_rho(), p.delta_theta());
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, ring) in p.rings().enumerate() {
            let rho = (r + 1) as f64 * dr;
            let fk: Complex64 = ring
                .iter()
                .enumerate()
                .map(|(t, &f)| Complex64::from_polar(f, -(k as f64) * t as f64 * dt))
                .sum();
            acc += fk * Complex64::new(rho, 0.0).powc(Complex64::new(sigma - 1.0, -(v as f64)));
        }
        acc * dr * dt
    }

    #[test]
    fn cartesian_agrees_with_polar_form() {
        // annular object: both quadratures converge away from the singular center
        let img = shape(61);
        let g = fmt_cartesian(&img, 2, 2, 0.5).unwrap();
        for (k, v) in [(0, 0), (0, 1), (1, 0), (2, 0), (2, -1), (2, 2)] {
            let polar = polar_fmt(&img, k, v, 0.5) / (2.0 * PI);
            let cart = g.get(k, v);
            let scale = g.get(0, 0).norm();
            assert!((polar - cart).norm() < 0.03 * scale, "({k},{v}): {polar} vs {cart}");
        }
    }
}
