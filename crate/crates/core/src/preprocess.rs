//! Real-image front end: Otsu binarization, binary morphology, foreground
//! selection, gravity-center normalization and the Laplacian pyramid.

use crate::descriptor::{Descriptor, FeatureVector, NORMALIZED_BORDER};
use crate::error::{Error, Result};
use crate::imgcore::{gaussian_blur, gravity_center, quantize_u8, resize_bilinear, GrayImage};

/// Side of the central crop taken from a raw survey image.
pub const GZ2_CROP: usize = 250;
/// Working resolution for binarization.
pub const GZ2_WORK: usize = 64;
/// Side of the normalized object before the zero border is added.
pub const GZ2_INNER: usize = 60;
pub const PYRAMID_LEVELS: usize = 4;
pub const PYRAMID_SIGMA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    #[inline]
    fn get_or(&self, x: isize, y: isize, outside: bool) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            outside
        } else {
            self.bits[y as usize * self.width + x as usize]
        }
    }

    pub fn complement(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| !b).collect(), ..self.clone() }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Multiply intensities by the mask; background becomes exactly 0.
    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        assert_eq!((img.width(), img.height()), (self.width, self.height), "mask size mismatch");
        GrayImage::from_fn(self.width, self.height, |x, y| if self.get(x, y) { img.get(x, y) } else { 0.0 })
    }
}

/// Boolean stencil centered on its middle cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl StructuringElement {
    pub fn from_cells(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) || cells.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "structuring element must be odd-sized with {width}x{height} cells"
            )));
        }
        if !cells.iter().any(|&c| c) {
            return Err(Error::EmptyStructuringElement);
        }
        Ok(Self { width, height, cells })
    }

    pub fn square(side: usize) -> Self {
        Self::from_cells(side, side, vec![true; side * side]).expect("odd square side")
    }

    /// Euclidean ball `di^2 + dj^2 <= radius^2` in a `(2 radius + 1)` box.
    pub fn disk(radius: usize) -> Self {
        let side = 2 * radius + 1;
        let r = radius as isize;
        let cells = (0..side * side)
            .map(|i| {
                let di = (i % side) as isize - r;
                let dj = (i / side) as isize - r;
                di * di + dj * dj <= r * r
            })
            .collect();
        Self::from_cells(side, side, cells).expect("disk is never empty")
    }

    fn offsets(&self) -> Vec<(isize, isize)> {
        let (hw, hh) = ((self.width / 2) as isize, (self.height / 2) as isize);
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| ((i % self.width) as isize - hw, (i / self.width) as isize - hh))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphOp {
    Dilate,
    Erode,
    Close,
}

pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offs = se.offsets();
    BinaryMask::from_fn(mask.width, mask.height, |x, y| {
        offs.iter().any(|&(dx, dy)| mask.get_or(x as isize - dx, y as isize - dy, false))
    })
}

/// Erosion reading `outside` beyond the frame.
pub fn erode_with_border(mask: &BinaryMask, se: &StructuringElement, outside: bool) -> BinaryMask {
    let offs = se.offsets();
    BinaryMask::from_fn(mask.width, mask.height, |x, y| {
        offs.iter().all(|&(dx, dy)| mask.get_or(x as isize + dx, y as isize + dy, outside))
    })
}

/// Erosion with out-of-frame treated as background, so objects shrink at the border.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_with_border(mask, se, false)
}

pub fn morph(mask: &BinaryMask, se: &StructuringElement, op: MorphOp) -> BinaryMask {
    match op {
        MorphOp::Dilate => dilate(mask, se),
        MorphOp::Erode => erode(mask, se),
        MorphOp::Close => erode(&dilate(mask, se), se),
    }
}

/// 256-bin histogram of 8-bit quantized intensities.
pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in img.data() {
        h[quantize_u8(v) as usize] += 1;
    }
    h
}

/// `a / b > c / d` for nonnegative rationals, exact while the products fit in 128 bits.
fn ratio_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(l), Some(r)) => l > r,
        _ => (a as f64 / b as f64) > (c as f64 / d as f64),
    }
}

/// Bin `t` maximizing the between-class variance of `{<= t}` vs `{> t}`; the
/// lowest bin wins ties.
///
/// The criterion `w0 w1 (mu0 - mu1)^2` is compared as the integer ratio
/// `(N s0 - S n0)^2 / (n0 n1)`, so ties are detected exactly.
pub fn otsu_bin(hist: &[u64; 256]) -> Result<u8> {
    let n: u128 = hist.iter().map(|&c| c as u128).sum();
    let s: u128 = hist.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let (mut n0, mut s0) = (0u128, 0u128);
    let mut best: Option<(usize, u128, u128)> = None;
    for (t, &c) in hist.iter().enumerate().take(255) {
        n0 += c as u128;
        s0 += t as u128 * c as u128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (n * s0).abs_diff(s * n0);
        let num = diff * diff;
        let den = n0 * n1;
        match best {
            Some((_, bn, bd)) if !ratio_gt(num, den, bn, bd) => {}
            _ => best = Some((t, num, den)),
        }
    }
    best.map(|(t, _, _)| t as u8).ok_or(Error::DegenerateHistogram)
}

/// Otsu threshold as an intensity; foreground is `quantize(v) > 255 * threshold`.
pub fn otsu_threshold(img: &GrayImage) -> Result<f64> {
    Ok(otsu_bin(&histogram(img))? as f64 / 255.0)
}

pub fn binarize(img: &GrayImage, threshold: f64) -> BinaryMask {
    let t = quantize_u8(threshold);
    BinaryMask::from_fn(img.width(), img.height(), |x, y| quantize_u8(img.get(x, y)) > t)
}

/// Largest square centered on the gravity center that fits in the frame,
/// resampled to `inner x inner` and framed by `border` zeros.
pub fn recenter_trim(img: &GrayImage, inner: usize, border: usize) -> Result<GrayImage> {
    let c = gravity_center(img)?;
    let half = [c.cx + 0.5, c.cy + 0.5, img.width() as f64 - 0.5 - c.cx, img.height() as f64 - 0.5 - c.cy]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .max(0.5);
    let step = 2.0 * half / inner as f64;
    let out = GrayImage::from_fn(inner, inner, |ox, oy| {
        img.sample_bilinear(c.cx - half + (ox as f64 + 0.5) * step, c.cy - half + (oy as f64 + 0.5) * step)
    });
    Ok(out.pad_zero(border))
}

/// Intermediate products of [`gz2_normalize`].
#[derive(Debug, Clone)]
pub struct Gz2Stages {
    pub downsampled: GrayImage,
    pub threshold: Option<f64>,
    pub raw_mask: BinaryMask,
    pub mask: BinaryMask,
    pub selected: GrayImage,
    pub normalized: GrayImage,
}

pub fn gz2_stages(raw: &GrayImage) -> Result<Gz2Stages> {
    if raw.width() < GZ2_CROP || raw.height() < GZ2_CROP {
        return Err(Error::InvalidParameter(format!(
            "survey image must be at least {GZ2_CROP}x{GZ2_CROP}, got {}x{}",
            raw.width(),
            raw.height()
        )));
    }
    let x0 = ((raw.width() - GZ2_CROP) / 2) as isize;
    let y0 = ((raw.height() - GZ2_CROP) / 2) as isize;
    let crop = raw.crop(x0, y0, GZ2_CROP, GZ2_CROP);
    let downsampled = resize_bilinear(&crop, GZ2_WORK, GZ2_WORK);
    let threshold = match otsu_threshold(&downsampled) {
        Ok(t) => Some(t),
        // a flat frame has no foreground to select
        Err(Error::DegenerateHistogram) => None,
        Err(e) => return Err(e),
    };
    let raw_mask = match threshold {
        Some(t) => binarize(&downsampled, t),
        None => BinaryMask::new(GZ2_WORK, GZ2_WORK),
    };
    let closed = morph(&raw_mask, &StructuringElement::square(5), MorphOp::Close);
    let mask = morph(&closed, &StructuringElement::disk(6), MorphOp::Dilate);
    let selected = mask.apply(&downsampled);
    let normalized = recenter_trim(&selected, GZ2_INNER, NORMALIZED_BORDER)?;
    Ok(Gz2Stages { downsampled, threshold, raw_mask, mask, selected, normalized })
}

/// Survey image (e.g. 424x424) to a 64x64 foreground-only frame centered on its gravity center.
pub fn gz2_normalize(raw: &GrayImage) -> Result<GrayImage> {
    Ok(gz2_stages(raw)?.normalized)
}

/// Band-pass levels `L_j = I_j - blur(I_j)` without decimation, plus the final low-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<GrayImage>,
    pub residual: GrayImage,
}

impl Pyramid {
    /// `sum levels + residual`.
    pub fn reconstruct(&self) -> GrayImage {
        let mut out = self.residual.clone();
        for level in &self.levels {
            for (o, &v) in out.data_mut().iter_mut().zip(level.data()) {
                *o += v;
            }
        }
        out
    }
}

pub fn laplacian_pyramid(img: &GrayImage, levels: usize, sigma: f64) -> Result<Pyramid> {
    if levels < 1 || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("pyramid needs levels >= 1 and sigma > 0 (got {levels}, {sigma})")));
    }
    let mut current = img.clone();
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let low = gaussian_blur(&current, sigma);
        let band: Vec<f64> = current.data().iter().zip(low.data()).map(|(a, b)| a - b).collect();
        out.push(GrayImage::from_vec(img.width(), img.height(), band)?);
        current = low;
    }
    Ok(Pyramid { levels: out, residual: current })
}

/// Concatenate `descriptor` over every level, all taken about the gravity
/// center of the reconstructed input (band-pass levels have near-zero mass).
pub fn pyramid_features(pyr: &Pyramid, descriptor: &Descriptor) -> Result<FeatureVector> {
    let center = gravity_center(&pyr.reconstruct())?;
    let mut values = Vec::with_capacity(pyr.levels.len() * descriptor.len());
    for level in &pyr.levels {
        values.extend(descriptor.extract_about(level, center)?.values);
    }
    Ok(FeatureVector::new(*descriptor, values))
}

/// Normalize, decompose and describe one survey image.
pub fn gz2_features(raw: &GrayImage, descriptor: &Descriptor) -> Result<FeatureVector> {
    let normalized = gz2_normalize(raw)?;
    let pyr = laplacian_pyramid(&normalized, PYRAMID_LEVELS, PYRAMID_SIGMA)?;
    pyramid_features(&pyr, descriptor)
}
