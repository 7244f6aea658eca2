//! Descriptor families, their parameterization, and dispatch from a normalized image.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{fmt1_features, fmt2_features, fmt_cartesian_about, fmt_count, DEFAULT_SIGMA};
use crate::imgcore::{gravity_center, to_polar, Centroid, GrayImage};
use crate::moments::{flusser_about, hu_about};
use crate::ringfeat::{fft_band_ranges, fft_ring_features, ring_stats, ring_stats_literal};
use crate::zernike::{zernike_features, zernike_index_vectors};

/// Zero border that both normalization pipelines leave around the object.
pub const NORMALIZED_BORDER: usize = 2;

/// A descriptor family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Descriptor {
    Hu,
    Flusser,
    Zernike { n_max: u32, n_rho: usize, n_theta: usize },
    Ring { n_rho: usize, n_theta: usize, literal: bool },
    Fft { n_rho: usize, n_theta: usize },
    Fmt1 { k_max: usize, v_max: usize, sigma: f64 },
    Fmt2 { k_max: usize, v_max: usize, sigma: f64 },
}

impl Descriptor {
    pub fn zernike() -> Self {
        Self::Zernike { n_max: 5, n_rho: 10, n_theta: 16 }
    }

    pub fn ring() -> Self {
        Self::Ring { n_rho: 10, n_theta: 16, literal: false }
    }

    pub fn fft() -> Self {
        Self::Fft { n_rho: 8, n_theta: 32 }
    }

    pub fn fmt1(kv: usize) -> Self {
        Self::Fmt1 { k_max: kv, v_max: kv, sigma: DEFAULT_SIGMA }
    }

    pub fn fmt2(kv: usize) -> Self {
        Self::Fmt2 { k_max: kv, v_max: kv, sigma: DEFAULT_SIGMA }
    }

    /// The families with their default parameters (FMT at K = V = 5).
    pub fn defaults() -> Vec<Self> {
        vec![Self::Hu, Self::Flusser, Self::zernike(), Self::ring(), Self::fft(), Self::fmt1(5), Self::fmt2(5)]
    }

    /// Family tag used in feature-file headers and configs.
    pub fn family(&self) -> &'static str {
        match self {
            Self::Hu => "hu",
            Self::Flusser => "flusser",
            Self::Zernike { .. } => "zernike",
            Self::Ring { .. } => "ring",
            Self::Fft { .. } => "fft",
            Self::Fmt1 { .. } => "fmt1",
            Self::Fmt2 { .. } => "fmt2",
        }
    }

    /// Number of values produced for one image.
    pub fn len(&self) -> usize {
        match *self {
            Self::Hu => 7,
            Self::Flusser => 11,
            Self::Zernike { n_max, .. } => zernike_index_vectors(n_max).len(),
            Self::Ring { n_rho, .. } => 4 * n_rho,
            Self::Fft { n_rho, n_theta } => {
                n_rho * fft_band_ranges(n_theta).map(|r| r.len()).unwrap_or(0)
            }
            Self::Fmt1 { k_max, v_max, .. } | Self::Fmt2 { k_max, v_max, .. } => fmt_count(k_max, v_max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Self::Zernike { n_rho, n_theta, .. } | Self::Ring { n_rho, n_theta, .. } => {
                if n_rho < 1 || n_theta < 4 {
                    return bad(format!("polar grid {n_rho}x{n_theta} too small"));
                }
            }
            Self::Fft { n_rho, n_theta } => {
                if n_rho < 1 {
                    return bad("fft needs at least one ring".into());
                }
                fft_band_ranges(n_theta)?;
            }
            Self::Fmt1 { sigma, .. } | Self::Fmt2 { sigma, .. } => {
                if !(sigma > 0.0) {
                    return bad(format!("FMT sigma must be positive, got {sigma}"));
                }
            }
            Self::Hu | Self::Flusser => {}
        }
        Ok(())
    }

    /// Extract from a normalized image, centered on its gravity center.
    pub fn extract(&self, img: &GrayImage) -> Result<FeatureVector> {
        let c = gravity_center(img)?;
        self.extract_about(img, c)
    }

    /// Extract about an explicit center. Polar families sample out to the
    /// radius of the normalized frame (half the side, minus the zero border).
    pub fn extract_about(&self, img: &GrayImage, center: Centroid) -> Result<FeatureVector> {
        let r_max = polar_radius(img);
        match *self {
            Self::Hu => Ok(hu_about(img, center)),
            Self::Flusser => Ok(flusser_about(img, center)),
            Self::Zernike { n_max, n_rho, n_theta } => {
                zernike_features(&to_polar(img, center, n_rho, n_theta, r_max)?, n_max)
            }
            Self::Ring { n_rho, n_theta, literal } => {
                let p = to_polar(img, center, n_rho, n_theta, r_max)?;
                Ok(if literal { ring_stats_literal(&p) } else { ring_stats(&p) })
            }
            Self::Fft { n_rho, n_theta } => fft_ring_features(&to_polar(img, center, n_rho, n_theta, r_max)?),
            Self::Fmt1 { k_max, v_max, sigma } => {
                Ok(fmt1_features(&fmt_cartesian_about(img, center, k_max, v_max, sigma)?))
            }
            Self::Fmt2 { k_max, v_max, sigma } => fmt2_features(&fmt_cartesian_about(img, center, k_max, v_max, sigma)?),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Hu | Self::Flusser => write!(f, "{}", self.family()),
            Self::Zernike { n_max, n_rho, n_theta } => write!(f, "zernike(n={n_max}, {n_rho}x{n_theta})"),
            Self::Ring { n_rho, n_theta, literal } => {
                write!(f, "ring({n_rho}x{n_theta}{})", if literal { ", literal" } else { "" })
            }
            Self::Fft { n_rho, n_theta } => write!(f, "fft({n_rho}x{n_theta})"),
            Self::Fmt1 { k_max, v_max, .. } | Self::Fmt2 { k_max, v_max, .. } => {
                write!(f, "{}(K={k_max}, V={v_max})", self.family())
            }
        }
    }
}

/// Radius of the polar grid for a normalized frame.
pub fn polar_radius(img: &GrayImage) -> f64 {
    let half = img.width().min(img.height()) as f64 / 2.0;
    let r = half - NORMALIZED_BORDER as f64;
    if r >= 1.0 { r } else { half.max(0.5) }
}

/// Ordered descriptor values tagged with the family that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub descriptor: Descriptor,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(descriptor: Descriptor, values: Vec<f64>) -> Self {
        Self { descriptor, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_lengths() {
        assert_eq!(Descriptor::Hu.len(), 7);
        assert_eq!(Descriptor::Flusser.len(), 11);
        assert_eq!(Descriptor::zernike().len(), 12);
        assert_eq!(Descriptor::ring().len(), 40);
        assert_eq!(Descriptor::fft().len(), 48);
        assert_eq!(Descriptor::fmt1(5).len(), 61);
        assert_eq!(Descriptor::fmt2(7).len(), 113);
        assert_eq!(Descriptor::fmt1(9).len(), 181);
    }

    #[test]
    fn extraction_matches_declared_length() {
        let img = GrayImage::from_fn(66, 66, |x, y| {
            let dx = x as f64 - 30.0;
            let dy = y as f64 - 34.0;
            (-(dx * dx + 0.5 * dy * dy) / 80.0).exp() * (1.0 + 0.2 * (dx / 5.0).sin())
        });
        for d in Descriptor::defaults() {
            let f = d.extract(&img).unwrap();
            assert_eq!(f.len(), d.len(), "{d}");
            assert!(f.is_finite(), "{d}");
            assert_eq!(f.descriptor.family(), d.family());
        }
    }

    #[test]
    fn validation() {
        assert!(Descriptor::Fft { n_rho: 8, n_theta: 24 }.validate().is_err());
        assert!(Descriptor::Fmt1 { k_max: 2, v_max: 2, sigma: 0.0 }.validate().is_err());
        assert!(Descriptor::ring().validate().is_ok());
    }
}
