//! Ring-projection statistics and per-ring FFT magnitude invariants.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;

use crate::descriptor::{Descriptor, FeatureVector};
use crate::error::{Error, Result};
use crate::imgcore::PolarImage;

/// Per-ring mean, standard deviation, skewness and kurtosis.
#[derive(Debug, Clone, PartialEq)]
pub struct RingStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl RingStats {
    /// Standard central-moment statistics; zero-variance rings give `gamma = kappa = 0`.
    pub fn central(p: &PolarImage) -> Self {
        let mut out = Self::with_capacity(p.n_rho());
        for ring in p.rings() {
            let n = ring.len() as f64;
            let mu = ring.iter().sum::<f64>() / n;
            let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
            for &v in ring {
                let d = v - mu;
                let d2 = d * d;
                m2 += d2;
                m3 += d2 * d;
                m4 += d2 * d2;
            }
            let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
            let sigma = m2.sqrt();
            // spread at rounding level counts as a flat ring
            if sigma <= 1e-12 * mu.abs() || m2 == 0.0 {
                out.push(mu, 0.0, 0.0, 0.0);
            } else {
                out.push(mu, sigma, m3 / (m2 * sigma), m4 / (m2 * m2));
            }
        }
        out
    }

    /// The formulas as printed: `sigma` is the variance, `gamma = mu^3 / sigma^3`,
    /// `kappa = mu^4 / sigma^4`. Kept for fidelity comparisons.
    pub fn literal(p: &PolarImage) -> Self {
        let mut out = Self::with_capacity(p.n_rho());
        for ring in p.rings() {
            let n = ring.len() as f64;
            let mu = ring.iter().sum::<f64>() / n;
            let var = ring.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let (gamma, kappa) =
                if var > 0.0 { (mu.powi(3) / var.powi(3), mu.powi(4) / var.powi(4)) } else { (0.0, 0.0) };
            out.push(mu, var, gamma, kappa);
        }
        out
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            mu: Vec::with_capacity(n),
            sigma: Vec::with_capacity(n),
            gamma: Vec::with_capacity(n),
            kappa: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, mu: f64, sigma: f64, gamma: f64, kappa: f64) {
        self.mu.push(mu);
        self.sigma.push(sigma);
        self.gamma.push(gamma);
        self.kappa.push(kappa);
    }

    /// Row-major flattening `[mu.., sigma.., gamma.., kappa..]`.
    pub fn flatten(&self) -> Vec<f64> {
        [&self.mu, &self.sigma, &self.gamma, &self.kappa].into_iter().flatten().copied().collect()
    }
}

/// `4 * N_rho` ring statistics.
pub fn ring_stats(p: &PolarImage) -> FeatureVector {
    FeatureVector::new(
        Descriptor::Ring { n_rho: p.n_rho(), n_theta: p.n_theta(), literal: false },
        RingStats::central(p).flatten(),
    )
}

pub fn ring_stats_literal(p: &PolarImage) -> FeatureVector {
    FeatureVector::new(
        Descriptor::Ring { n_rho: p.n_rho(), n_theta: p.n_theta(), literal: true },
        RingStats::literal(p).flatten(),
    )
}

/// Unnormalized forward DFT `Y(k) = sum_n x(n) e^{-i 2 pi k n / N}` by iterative radix-2.
pub fn dft_radix2(signal: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = signal.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &x) in signal.iter().enumerate() {
        let j = if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) };
        buf[j] = x;
    }
    let twiddles: Vec<Complex64> =
        (0..n / 2).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
    Ok(buf)
}

/// 0-based spectrum bins pooled into each per-ring feature: the first three bins
/// singly, then logarithmic bands up to bin `N_theta / 2`.
pub fn fft_band_ranges(n_theta: usize) -> Result<Vec<RangeInclusive<usize>>> {
    if n_theta < 4 || !n_theta.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n_theta));
    }
    let top = (n_theta / 2).trailing_zeros() as usize;
    let mut ranges = vec![0..=0, 1..=1, 2..=2];
    for p in 2..=top {
        ranges.push((1 + (1 << (p - 1)))..=(1 << p));
    }
    Ok(ranges)
}

/// `N_rho * (log2(N_theta / 2) + 2)` pooled magnitude-spectrum features.
pub fn fft_ring_features(p: &PolarImage) -> Result<FeatureVector> {
    let ranges = fft_band_ranges(p.n_theta())?;
    let mut values = Vec::with_capacity(p.n_rho() * ranges.len());
    let mut signal = vec![Complex64::new(0.0, 0.0); p.n_theta()];
    for ring in p.rings() {
        for (s, &v) in signal.iter_mut().zip(ring) {
            *s = Complex64::new(v, 0.0);
        }
        let mags: Vec<f64> = dft_radix2(&signal)?.iter().map(|y| y.norm()).collect();
        for range in &ranges {
            let width = (range.end() - range.start() + 1) as f64;
            values.push(mags[range.clone()].iter().sum::<f64>() / width);
        }
    }
    Ok(FeatureVector::new(Descriptor::Fft { n_rho: p.n_rho(), n_theta: p.n_theta() }, values))
}
