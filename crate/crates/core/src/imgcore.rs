//! Image containers, geometric normalization, interpolation and polar
//! resampling shared by every descriptor family.
//!
//! Coordinates follow the pixel-center convention: pixel `(i, j)` sits at the
//! real point `(i, j)` and a `W x H` frame spans `[-0.5, W - 0.5] x [-0.5, H - 0.5]`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense row-major grid of real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel value, or 0 outside the frame.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Bilinear sample at a real position; reads outside the frame are 0.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let top = (1.0 - fx) * self.get_or_zero(xi, yi) + fx * self.get_or_zero(xi + 1, yi);
        let bottom =
            (1.0 - fx) * self.get_or_zero(xi, yi + 1) + fx * self.get_or_zero(xi + 1, yi + 1);
        (1.0 - fy) * top + fy * bottom
    }

    /// Bilinear sample with positions clamped into the frame (replicate border).
    #[inline]
    fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = (1.0 - fx) * self.get(x0, y0) + fx * self.get(x1, y0);
        let bottom = (1.0 - fx) * self.get(x0, y1) + fx * self.get(x1, y1);
        (1.0 - fy) * top + fy * bottom
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn frame_center(&self) -> Centroid {
        Centroid { cx: (self.width as f64 - 1.0) / 2.0, cy: (self.height as f64 - 1.0) / 2.0 }
    }

    /// Copy of the rectangle `[x0, x0 + w) x [y0, y0 + h)`; pixels outside the source read 0.
    pub fn crop(&self, x0: isize, y0: isize, w: usize, h: usize) -> Self {
        Self::from_fn(w, h, |x, y| self.get_or_zero(x0 + x as isize, y0 + y as isize))
    }

    /// Surround the image with `border` pixels of zeros.
    pub fn pad_zero(&self, border: usize) -> Self {
        let b = border as isize;
        self.crop(-b, -b, self.width + 2 * border, self.height + 2 * border)
    }

    /// Read an 8-bit PNG/JPEG and convert to luminance in `[0, 1]`.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path)?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self {
                    width: w as usize,
                    height: h as usize,
                    data: g.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
                }
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                let data = rgb
                    .pixels()
                    .map(|p| {
                        let [r, g, b] = p.0;
                        (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
                    })
                    .collect();
                Self { width: w as usize, height: h as usize, data }
            }
        }
    }

    /// 8-bit quantization used for PNG output: clamp to `[0, 1]`, round to 1/255.
    pub fn to_luma8(&self) -> image::GrayImage {
        let raw = self.data.iter().map(|&v| quantize_u8(v)).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Intensity-weighted centroid in sub-pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub cx: f64,
    pub cy: f64,
}

impl Centroid {
    pub fn new(cx: f64, cy: f64) -> Self {
        Self { cx, cy }
    }
}

/// `N_rho x N_theta` resampling around a center; ring `r` (0-based) lies at
/// radius `(r + 1) * r_max / n_rho`, sample `t` at angle `t * 2pi / n_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarImage {
    n_rho: usize,
    n_theta: usize,
    r_max: f64,
    data: Vec<f64>,
}

impl PolarImage {
    pub fn from_vec(n_rho: usize, n_theta: usize, r_max: f64, data: Vec<f64>) -> Result<Self> {
        if n_rho < 1 || n_theta < 4 || !(r_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "polar grid needs n_rho >= 1, n_theta >= 4, r_max > 0 (got {n_rho}, {n_theta}, {r_max})"
            )));
        }
        if data.len() != n_rho * n_theta {
            return Err(Error::DimensionMismatch { expected: n_rho * n_theta, got: data.len() });
        }
        Ok(Self { n_rho, n_theta, r_max, data })
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ring(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_theta..(r + 1) * self.n_theta]
    }

    pub fn rings(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_theta)
    }

    #[inline]
    pub fn get(&self, r: usize, t: usize) -> f64 {
        self.data[r * self.n_theta + t]
    }

    pub fn delta_rho(&self) -> f64 {
        self.r_max / self.n_rho as f64
    }

    pub fn delta_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    /// Circular shift of every ring by `k` samples: `out(r, t) = in(r, t - k)`.
    pub fn shifted(&self, k: isize) -> Self {
        let n = self.n_theta as isize;
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.n_rho {
            for t in 0..self.n_theta {
                let src = (t as isize - k).rem_euclid(n) as usize;
                data[r * self.n_theta + t] = self.get(r, src);
            }
        }
        Self { data, ..self.clone() }
    }
}

/// `(m10 / m00, m01 / m00)`.
pub fn gravity_center(img: &GrayImage) -> Result<Centroid> {
    let mut m00 = 0.0;
    let mut m10 = 0.0;
    let mut m01 = 0.0;
    for y in 0..img.height {
        let row = &img.data[y * img.width..(y + 1) * img.width];
        let mut row_sum = 0.0;
        for (x, &v) in row.iter().enumerate() {
            row_sum += v;
            m10 += x as f64 * v;
        }
        m00 += row_sum;
        m01 += y as f64 * row_sum;
    }
    if m00 == 0.0 || !m00.is_finite() {
        return Err(Error::ZeroMass);
    }
    Ok(Centroid { cx: m10 / m00, cy: m01 / m00 })
}

/// Largest distance from `center` to a pixel brighter than `eps`.
pub fn max_radius(img: &GrayImage, center: Centroid, eps: f64) -> Result<f64> {
    let mut best: Option<f64> = None;
    for y in 0..img.height {
        for x in 0..img.width {
            if img.get(x, y) > eps {
                let dx = x as f64 - center.cx;
                let dy = y as f64 - center.cy;
                let d2 = dx * dx + dy * dy;
                best = Some(best.map_or(d2, |b: f64| b.max(d2)));
            }
        }
    }
    best.map(f64::sqrt).ok_or(Error::EmptyImage(eps))
}

/// Intensity level above which a pixel counts as object when measuring `R_max`.
pub const FOREGROUND_EPS: f64 = 1e-3;

/// Recenter on the gravity center, crop a `2 R_max` square around it, resize
/// bilinearly to `out_side` and surround with `border` zero pixels.
pub fn center_square_normalize(img: &GrayImage, out_side: usize, border: usize) -> Result<GrayImage> {
    let c = gravity_center(img)?;
    let r_max = match max_radius(img, c, FOREGROUND_EPS) {
        Ok(r) => r,
        // Only sub-threshold intensities: fall back to any positive pixel.
        Err(_) => max_radius(img, c, 0.0)?,
    };
    let half = r_max.max(0.5);
    let step = 2.0 * half / out_side as f64;
    let inner = GrayImage::from_fn(out_side, out_side, |ox, oy| {
        let sx = c.cx - half + (ox as f64 + 0.5) * step;
        let sy = c.cy - half + (oy as f64 + 0.5) * step;
        img.sample_bilinear(sx, sy)
    });
    Ok(inner.pad_zero(border))
}

/// Bilinear resize with pixel-center alignment and replicated edges.
pub fn resize_bilinear(img: &GrayImage, w: usize, h: usize) -> GrayImage {
    assert!(w >= 1 && h >= 1, "target size must be positive");
    if w == img.width && h == img.height {
        return img.clone();
    }
    let sx = img.width as f64 / w as f64;
    let sy = img.height as f64 / h as f64;
    GrayImage::from_fn(w, h, |x, y| {
        img.sample_clamped((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
    })
}

/// Unit-circle table for `n` equally spaced angles. When `n` is a multiple of
/// four the quadrants are filled by exact symmetry, so a quarter-turn maps the
/// table onto itself bit for bit.
pub(crate) fn angle_table(n: usize) -> Vec<(f64, f64)> {
    let dt = 2.0 * PI / n as f64;
    if !n.is_multiple_of(4) {
        return (0..n).map(|t| ((t as f64 * dt).cos(), (t as f64 * dt).sin())).collect();
    }
    let q = n / 4;
    let mut table = vec![(0.0, 0.0); n];
    for t in 0..q {
        let (s, c) = (t as f64 * dt).sin_cos();
        let (c, s) = if t == 0 { (1.0, 0.0) } else { (c, s) };
        table[t] = (c, s);
        table[t + q] = (-s, c);
        table[t + 2 * q] = (-c, -s);
        table[t + 3 * q] = (s, -c);
    }
    table
}

/// Polar resampling around `center`.
pub fn to_polar(img: &GrayImage, center: Centroid, n_rho: usize, n_theta: usize, r_max: f64) -> Result<PolarImage> {
    if n_rho < 1 || n_theta < 4 || !(r_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "polar grid needs n_rho >= 1, n_theta >= 4, r_max > 0 (got {n_rho}, {n_theta}, {r_max})"
        )));
    }
    let table = angle_table(n_theta);
    let d_rho = r_max / n_rho as f64;
    let mut data = Vec::with_capacity(n_rho * n_theta);
    for r in 0..n_rho {
        let rho = (r + 1) as f64 * d_rho;
        for &(c, s) in &table {
            data.push(img.sample_bilinear(center.cx + rho * c, center.cy + rho * s));
        }
    }
    Ok(PolarImage { n_rho, n_theta, r_max, data })
}

/// Normalized sampled Gaussian truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian convolution with replicated borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    assert!(sigma > 0.0, "sigma must be positive");
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);

    let mut tmp = vec![0.0; img.data.len()];
    for y in 0..h {
        let row = &img.data[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let sx = (x + i as isize - radius).clamp(0, w - 1);
                acc += kv * row[sx as usize];
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let sy = (y + i as isize - radius).clamp(0, h - 1);
                acc += kv * tmp[(sy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    GrayImage { width: img.width, height: img.height, data: out }
}

/// `(cos, sin)` of `angle`, snapped to exact values on multiples of a quarter turn.
fn snapped_cos_sin(angle: f64) -> (f64, f64) {
    let quarters = angle / FRAC_PI_2;
    let nearest = quarters.round();
    if (quarters - nearest).abs() < 1e-12 {
        match (nearest as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        (angle.cos(), angle.sin())
    }
}

/// Rotate content by `angle` about `center` (inverse-mapped bilinear, zero outside).
/// A point at polar angle `phi` around `center` moves to `phi + angle`.
pub fn rotate(img: &GrayImage, angle: f64, center: Centroid) -> GrayImage {
    if angle == 0.0 {
        return img.clone();
    }
    let (c, s) = snapped_cos_sin(angle);
    GrayImage::from_fn(img.width, img.height, |x, y| {
        let dx = x as f64 - center.cx;
        let dy = y as f64 - center.cy;
        let sx = center.cx + c * dx + s * dy;
        let sy = center.cy - s * dx + c * dy;
        img.sample_bilinear(sx, sy)
    })
}
