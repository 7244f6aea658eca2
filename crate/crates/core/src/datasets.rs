//! Artificial galaxy templates, the six evaluation conditions, and ingestion
//! of survey-style labeled corpora.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{center_square_normalize, gaussian_blur, rotate, GrayImage};
use crate::preprocess::gz2_normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GalaxyClass {
    E0,
    E3,
    E7,
    S0,
    Sa,
    Sb,
    Sc,
    SBa,
    SBb,
    SBc,
    I,
}

impl GalaxyClass {
    pub const ALL: [GalaxyClass; 11] = [
        Self::E0,
        Self::E3,
        Self::E7,
        Self::S0,
        Self::Sa,
        Self::Sb,
        Self::Sc,
        Self::SBa,
        Self::SBb,
        Self::SBc,
        Self::I,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::E0 => "E0",
            Self::E3 => "E3",
            Self::E7 => "E7",
            Self::S0 => "S0",
            Self::Sa => "Sa",
            Self::Sb => "Sb",
            Self::Sc => "Sc",
            Self::SBa => "SBa",
            Self::SBb => "SBb",
            Self::SBc => "SBc",
            Self::I => "I",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn cluster5(self) -> &'static str {
        match self {
            Self::E0 | Self::E3 | Self::E7 => "E",
            Self::S0 => "S0",
            Self::Sa | Self::Sb | Self::Sc => "S",
            Self::SBa | Self::SBb | Self::SBc => "SB",
            Self::I => "I",
        }
    }

    /// `None` for the lenticular and irregular classes.
    pub fn cluster3(self) -> Option<&'static str> {
        match self.cluster5() {
            "S0" | "I" => None,
            c => Some(c),
        }
    }
}

impl fmt::Display for GalaxyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GalaxyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown galaxy class {s:?}")))
    }
}

/// Class granularity used when scoring retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Eleven,
    Five,
    Three,
}

impl Grouping {
    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            11 => Ok(Self::Eleven),
            5 => Ok(Self::Five),
            3 => Ok(Self::Three),
            _ => Err(Error::InvalidParameter(format!("grouping must be 11, 5 or 3, got {n}"))),
        }
    }

    pub fn count(self) -> usize {
        match self {
            Self::Eleven => 11,
            Self::Five => 5,
            Self::Three => 3,
        }
    }

    /// Group name of `class`, or `None` if the class is left out of this grouping.
    pub fn group(self, class: GalaxyClass) -> Option<&'static str> {
        match self {
            Self::Eleven => Some(class.label()),
            Self::Five => Some(class.cluster5()),
            Self::Three => class.cluster3(),
        }
    }
}

/// Shape constants of the template renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateParams {
    /// Gaussian scale of the ellipticals along the major axis, in pixels at side 64.
    pub elliptical_scale: f64,
    /// Pitch angles of the a/b/c spirals, degrees.
    pub pitch_deg: [f64; 3],
    /// Bulge amplitude relative to the disk for a/b/c.
    pub bulge_amplitude: [f64; 3],
    /// Bulge Gaussian scale for a/b/c, pixels.
    pub bulge_scale: [f64; 3],
    pub disk_scale: f64,
    /// Brightness of the weaker arm relative to the stronger one.
    pub arm_balance: f64,
    pub bar_length: f64,
    /// Minor-to-major axis ratio of the bar.
    pub bar_axis_ratio: f64,
    pub irregular_blobs: usize,
    /// Radius at which every template has faded to zero.
    pub support_radius: f64,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            elliptical_scale: 8.0,
            pitch_deg: [10.0, 20.0, 30.0],
            bulge_amplitude: [1.6, 0.9, 0.4],
            bulge_scale: [4.5, 3.5, 2.5],
            disk_scale: 7.0,
            arm_balance: 0.8,
            bar_length: 9.0,
            bar_axis_ratio: 0.25,
            irregular_blobs: 7,
            support_radius: 28.0,
        }
    }
}

/// Generation parameters for the artificial conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub side: usize,
    pub speckle_variance: f64,
    pub gaussian_variance: f64,
    pub templates: TemplateParams,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { side: 64, speckle_variance: 0.05, gaussian_variance: 0.01, templates: TemplateParams::default() }
    }
}

/// Mix a tuple of integers into an RNG seed (splitmix64 finalizer per part).
pub fn stream_seed(parts: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(parts))
}

/// Cosine taper from 1 at `0.8 r0` down to 0 at `r0`.
fn taper(r: f64, r0: f64) -> f64 {
    let inner = 0.8 * r0;
    if r <= inner {
        1.0
    } else if r >= r0 {
        0.0
    } else {
        let t = (r - inner) / (r0 - inner);
        0.5 * (1.0 + (PI * t).cos())
    }
}

/// Two-armed logarithmic spiral pattern in `[0, 1]`, arms leaving `r0` along the x axis.
fn spiral_arms(r: f64, theta: f64, r0: f64, pitch_deg: f64, balance: f64) -> f64 {
    let wind = (r.max(1e-9) / r0).ln() / pitch_deg.to_radians().tan();
    let phase = theta - wind;
    let crest = |p: f64| (0.5 * (1.0 + p.cos())).powi(6);
    crest(phase) + balance * crest(phase - PI)
}

fn render(side: usize, f: impl Fn(f64, f64) -> f64) -> GrayImage {
    let c = (side as f64 - 1.0) / 2.0;
    let s = side as f64 / 64.0;
    let img = GrayImage::from_fn(side, side, |x, y| f((x as f64 - c) / s, (y as f64 - c) / s));
    let (_, max) = img.min_max();
    if max > 0.0 {
        img.map(|v| (v / max).clamp(0.0, 1.0))
    } else {
        img
    }
}

/// Render one template. Coordinates are in pixels of a 64-pixel frame and
/// scaled to `side`.
pub fn render_template(class: GalaxyClass, params: &TemplateParams, seed: u64, side: usize) -> GrayImage {
    let p = params;
    let support = p.support_radius;
    let disk = |r: f64| (-r / p.disk_scale).exp();
    let spiral = |tier: usize, barred: bool| {
        let (amp, scale, pitch) = (p.bulge_amplitude[tier], p.bulge_scale[tier], p.pitch_deg[tier]);
        move |x: f64, y: f64| {
            let r = x.hypot(y);
            let theta = y.atan2(x);
            let bulge = amp * (-(r * r) / (2.0 * scale * scale)).exp();
            let (r0, bar) = if barred {
                let w = p.bar_length * p.bar_axis_ratio;
                let bar = 0.8 * (-(x * x / (2.0 * p.bar_length.powi(2)) + y * y / (2.0 * w * w))).exp();
                (p.bar_length, bar)
            } else {
                (2.0 * scale, 0.0)
            };
            // arms switch on outside r0 so barred arms start at the bar ends
            let onset = 1.0 / (1.0 + (-(r - r0) / 1.5).exp());
            let arms = spiral_arms(r, theta, r0, pitch, p.arm_balance) * onset;
            (bulge + bar + disk(r) * (0.25 + 0.9 * arms)) * taper(r, support)
        }
    };
    match class {
        GalaxyClass::E0 | GalaxyClass::E3 | GalaxyClass::E7 => {
            let x = match class {
                GalaxyClass::E0 => 0.0,
                GalaxyClass::E3 => 3.0,
                _ => 7.0,
            };
            let q = 1.0 - x / 10.0;
            let a = p.elliptical_scale;
            render(side, |px, py| {
                let rr = (px * px + (py / q).powi(2)) / (a * a);
                (-0.5 * rr).exp() * taper(px.hypot(py), support)
            })
        }
        GalaxyClass::S0 => render(side, |x, y| {
            let r = x.hypot(y);
            let bulge = 1.2 * (-(r * r) / (2.0 * 3.0 * 3.0)).exp();
            (bulge + 0.6 * disk(r)) * taper(r, support)
        }),
        GalaxyClass::Sa => render(side, spiral(0, false)),
        GalaxyClass::Sb => render(side, spiral(1, false)),
        GalaxyClass::Sc => render(side, spiral(2, false)),
        GalaxyClass::SBa => render(side, spiral(0, true)),
        GalaxyClass::SBb => render(side, spiral(1, true)),
        GalaxyClass::SBc => render(side, spiral(2, true)),
        GalaxyClass::I => {
            let mut rng = rng_for(&[seed, class.index() as u64, u64::MAX]);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..p.irregular_blobs.max(1))
                .map(|_| {
                    let r = 14.0 * rng.random::<f64>().sqrt();
                    let t = 2.0 * PI * rng.random::<f64>();
                    (r * t.cos(), r * t.sin(), rng.random_range(2.0..5.0), rng.random_range(0.3..1.0))
                })
                .collect();
            render(side, |x, y| {
                let v: f64 = blobs
                    .iter()
                    .map(|&(bx, by, s, a)| a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * s * s)).exp())
                    .sum();
                v * taper(x.hypot(y), support)
            })
        }
    }
}

/// The eleven templates in [`GalaxyClass::ALL`] order.
pub fn generate_templates(seed: u64, side: usize) -> Vec<GrayImage> {
    generate_templates_with(&TemplateParams::default(), seed, side)
}

pub fn generate_templates_with(params: &TemplateParams, seed: u64, side: usize) -> Vec<GrayImage> {
    GalaxyClass::ALL.par_iter().map(|&c| render_template(c, params, seed, side)).collect()
}

/// Multiplicative noise `J = I + n I`, `n` uniform with zero mean and the given variance.
pub fn add_speckle(img: &GrayImage, variance: f64, seed: u64) -> GrayImage {
    assert!(variance >= 0.0, "variance must be nonnegative");
    if variance == 0.0 {
        return img.clone();
    }
    let half_width = (3.0 * variance).sqrt();
    let mut rng = rng_for(&[seed, 1]);
    let mut out = img.clone();
    for v in out.data_mut() {
        let n = rng.random_range(-half_width..half_width);
        *v = (*v + n * *v).clamp(0.0, 1.0);
    }
    out
}

/// Additive white Gaussian noise, clamped to `[0, 1]`.
pub fn add_gaussian_noise(img: &GrayImage, variance: f64, seed: u64) -> GrayImage {
    assert!(variance >= 0.0, "variance must be nonnegative");
    if variance == 0.0 {
        return img.clone();
    }
    let sd = variance.sqrt();
    let mut rng = rng_for(&[seed, 2]);
    let mut out = img.clone();
    for v in out.data_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v = (*v + sd * n).clamp(0.0, 1.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Speckle,
    Gaussian,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Speckle => "speckle",
            Self::Gaussian => "gaussian",
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "speckle" => Ok(Self::Speckle),
            "gaussian" => Ok(Self::Gaussian),
            _ => Err(Error::InvalidParameter(format!("unknown noise kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Dba(u8),
    Gz2,
}

impl Condition {
    pub fn name(self) -> String {
        match self {
            Self::Dba(i) => format!("dba{i}"),
            Self::Gz2 => "gz2".into(),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gz2" {
            return Ok(Self::Gz2);
        }
        s.strip_prefix("dba")
            .and_then(|i| i.parse::<u8>().ok())
            .filter(|i| (1..=6).contains(i))
            .map(Self::Dba)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown condition {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Class(GalaxyClass),
    /// Binary morphology; `true` is spiral, the positive class.
    Spiral(bool),
}

/// How an artificial item was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub rotation_index: usize,
    pub noise: NoiseKind,
    /// 0 when no blur was applied.
    pub blur_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub name: String,
    pub label: Label,
    pub confidence: Option<f64>,
    pub provenance: Option<Provenance>,
    pub image: GrayImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub condition: Condition,
    pub items: Vec<LabeledItem>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Galaxy classes, for artificial datasets.
    pub fn classes(&self) -> Option<Vec<GalaxyClass>> {
        self.items
            .iter()
            .map(|it| match it.label {
                Label::Class(c) => Some(c),
                Label::Spiral(_) => None,
            })
            .collect()
    }

    /// Binary labels; artificial classes map spirals (barred or not) to `true`.
    pub fn spiral_labels(&self) -> Vec<bool> {
        self.items
            .iter()
            .map(|it| match it.label {
                Label::Spiral(s) => s,
                Label::Class(c) => matches!(c.cluster5(), "S" | "SB"),
            })
            .collect()
    }
}

pub const ROTATIONS: usize = 12;
pub const DBA6_BLURS: [f64; 4] = [0.125, 1.0, 2.0, 4.0];
pub const NORMALIZED_INNER: usize = 62;

fn condition_recipe(idx: u8) -> Result<Vec<(usize, f64, NoiseKind)>> {
    let rot = |blur: f64, noise: NoiseKind| (0..ROTATIONS).map(move |k| (k, blur, noise));
    Ok(match idx {
        1 => rot(0.0, NoiseKind::None).collect(),
        2 => rot(0.0, NoiseKind::Speckle).collect(),
        3 => rot(0.0, NoiseKind::Gaussian).collect(),
        4 => rot(2.0, NoiseKind::None).collect(),
        5 => rot(4.0, NoiseKind::None).collect(),
        6 => {
            let mut v = Vec::with_capacity(ROTATIONS * 12);
            for k in 0..ROTATIONS {
                for &blur in &DBA6_BLURS {
                    for noise in [NoiseKind::None, NoiseKind::Speckle, NoiseKind::Gaussian] {
                        v.push((k, blur, noise));
                    }
                }
            }
            v
        }
        _ => return Err(Error::InvalidCondition(idx as usize)),
    })
}

/// Rotate, blur, add noise, then normalize one template.
pub fn degrade(template: &GrayImage, p: &Provenance, params: &GenParams) -> Result<GrayImage> {
    let angle = p.rotation_index as f64 * 2.0 * PI / ROTATIONS as f64;
    let mut img = rotate(template, angle, template.frame_center());
    if p.blur_sigma > 0.0 {
        img = gaussian_blur(&img, p.blur_sigma);
    }
    img = match p.noise {
        NoiseKind::None => img,
        NoiseKind::Speckle => add_speckle(&img, params.speckle_variance, p.seed),
        NoiseKind::Gaussian => add_gaussian_noise(&img, params.gaussian_variance, p.seed),
    };
    center_square_normalize(&img, NORMALIZED_INNER, crate::descriptor::NORMALIZED_BORDER)
}

pub fn build_condition(idx: u8, seed: u64) -> Result<LabeledDataset> {
    let params = GenParams::default();
    let templates = generate_templates_with(&params.templates, seed, params.side);
    build_condition_with(&templates, &params, idx, seed)
}

/// One of the six conditions from precomputed templates (in [`GalaxyClass::ALL`] order).
pub fn build_condition_with(
    templates: &[GrayImage],
    params: &GenParams,
    idx: u8,
    seed: u64,
) -> Result<LabeledDataset> {
    let recipe = condition_recipe(idx)?;
    if templates.len() != GalaxyClass::ALL.len() {
        return Err(Error::DimensionMismatch { expected: GalaxyClass::ALL.len(), got: templates.len() });
    }
    let jobs: Vec<(GalaxyClass, usize)> =
        GalaxyClass::ALL.iter().flat_map(|&c| (0..recipe.len()).map(move |i| (c, i))).collect();
    let items = jobs
        .par_iter()
        .map(|&(class, i)| {
            let (rotation_index, blur_sigma, noise) = recipe[i];
            let prov = Provenance {
                rotation_index,
                noise,
                blur_sigma,
                seed: stream_seed(&[seed, idx as u64, class.index() as u64, i as u64]),
            };
            let image = degrade(&templates[class.index()], &prov, params)?;
            Ok(LabeledItem {
                name: format!("{}_{:03}.png", class.label(), i),
                label: Label::Class(class),
                confidence: None,
                provenance: Some(prov),
                image,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset { condition: Condition::Dba(idx), items })
}

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub filename: String,
    pub class: String,
    pub condition: String,
    pub rotation_index: usize,
    pub noise_kind: NoiseKind,
    pub blur_sigma: f64,
    pub seed: u64,
}

/// Write every item as an 8-bit PNG plus `manifest.csv` into `dir`.
pub fn write_dataset(ds: &LabeledDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    ds.items.par_iter().try_for_each(|it| it.image.save_png(&dir.join(&it.name)))?;
    let mut w = csv::Writer::from_path(dir.join(MANIFEST))?;
    for it in &ds.items {
        let class = match it.label {
            Label::Class(c) => c.label().to_string(),
            Label::Spiral(s) => if s { "spiral" } else { "elliptical" }.to_string(),
        };
        let p = it.provenance.unwrap_or(Provenance { rotation_index: 0, noise: NoiseKind::None, blur_sigma: 0.0, seed: 0 });
        w.serialize(ManifestRow {
            filename: it.name.clone(),
            class,
            condition: ds.condition.name(),
            rotation_index: p.rotation_index,
            noise_kind: p.noise,
            blur_sigma: p.blur_sigma,
            seed: p.seed,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let mut r = csv::Reader::from_path(&path)?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::MalformedRow { row: i + 2, reason: e.to_string() }))
        .collect()
}

/// Reload a directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<LabeledDataset> {
    let rows = read_manifest(dir)?;
    let condition = match rows.first() {
        Some(r) => r.condition.parse()?,
        None => return Err(Error::TooFewItems { needed: 1, got: 0 }),
    };
    let items = rows
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let label = match r.class.as_str() {
                "spiral" => Label::Spiral(true),
                "elliptical" => Label::Spiral(false),
                c => Label::Class(c.parse().map_err(|_| Error::MalformedRow {
                    row: i + 2,
                    reason: format!("unknown class {c:?}"),
                })?),
            };
            Ok(LabeledItem {
                name: r.filename.clone(),
                label,
                confidence: None,
                provenance: Some(Provenance {
                    rotation_index: r.rotation_index,
                    noise: r.noise_kind,
                    blur_sigma: r.blur_sigma,
                    seed: r.seed,
                }),
                image: GrayImage::load(&dir.join(&r.filename))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset { condition, items })
}

/// One line of a survey label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gz2Row {
    pub filename: String,
    pub p_elliptical: f64,
    pub p_spiral: f64,
    pub p_not_odd: f64,
}

impl Gz2Row {
    pub fn is_spiral(&self) -> bool {
        self.p_spiral > self.p_elliptical
    }

    /// Confidence of the winning class.
    pub fn confidence(&self) -> f64 {
        self.p_spiral.max(self.p_elliptical)
    }

    pub fn retained(&self, tau: f64) -> bool {
        self.p_not_odd >= tau && self.confidence() >= tau
    }
}

pub fn read_gz2_labels(path: &Path) -> Result<Vec<Gz2Row>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<Gz2Row>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| Error::MalformedRow { row: line, reason: e.to_string() })?;
        for (name, v) in [("p_elliptical", row.p_elliptical), ("p_spiral", row.p_spiral), ("p_not_odd", row.p_not_odd)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::MalformedRow { row: line, reason: format!("{name}={v} outside [0, 1]") });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rows passing the confidence filter; `ZeroSelected` when none do.
pub fn filter_gz2(rows: &[Gz2Row], tau: f64) -> Result<Vec<&Gz2Row>> {
    let kept: Vec<&Gz2Row> = rows.iter().filter(|r| r.retained(tau)).collect();
    if kept.is_empty() {
        return Err(Error::ZeroSelected(tau));
    }
    Ok(kept)
}

/// Load and normalize the images of `rows` from `image_dir`.
pub fn load_gz2_items(image_dir: &Path, rows: &[&Gz2Row]) -> Result<Vec<LabeledItem>> {
    rows.par_iter()
        .map(|r| {
            let raw = GrayImage::load(&image_dir.join(&r.filename))?;
            Ok(LabeledItem {
                name: r.filename.clone(),
                label: Label::Spiral(r.is_spiral()),
                confidence: Some(r.confidence()),
                provenance: None,
                image: gz2_normalize(&raw)?,
            })
        })
        .collect()
}

pub fn ingest_gz2(image_dir: &Path, labels: &Path, tau: f64) -> Result<LabeledDataset> {
    let rows = read_gz2_labels(labels)?;
    let kept = filter_gz2(&rows, tau)?;
    Ok(LabeledDataset { condition: Condition::Gz2, items: load_gz2_items(image_dir, &kept)? })
}

/// Side of the synthetic survey cutouts.
pub const SURVEY_SIDE: usize = 424;

/// A survey-like cutout: sky background with noise, a few field stars and one
/// centered galaxy, either a Sersic-like elliptical or a disk with two
/// logarithmic arms, at a random orientation.
pub fn synth_survey_image(spiral: bool, seed: u64) -> GrayImage {
    let mut rng = rng_for(&[seed, 0x5eed]);
    let side = SURVEY_SIDE;
    let c = (side as f64 - 1.0) / 2.0;
    let jitter = Normal::new(0.0, 4.0).expect("valid normal");
    let (gx, gy) = (c + jitter.sample(&mut rng), c + jitter.sample(&mut rng));
    let orient = rng.random_range(0.0..PI);
    let q = rng.random_range(if spiral { 0.6..1.0 } else { 0.5..1.0 });
    let peak = rng.random_range(0.6..0.95);
    let (co, so) = (orient.cos(), orient.sin());

    let galaxy: Box<dyn Fn(f64, f64) -> f64> = if spiral {
        let h = rng.random_range(20.0..32.0);
        let pitch = rng.random_range(12.0f64..30.0);
        let hand = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let contrast = rng.random_range(0.55..0.85);
        let bulge = rng.random_range(0.2..0.6);
        let rb = rng.random_range(5.0..10.0);
        let phase0 = rng.random_range(0.0..2.0 * PI);
        Box::new(move |u: f64, v: f64| {
            let r = u.hypot(v);
            let theta = hand * v.atan2(u) + phase0;
            let arms = spiral_arms(r, theta, 1.5 * rb, pitch, 0.85) * (1.0 - (-(r / (1.5 * rb)).powi(2)).exp());
            let disk = (-r / h).exp() * (1.0 - contrast + contrast * 1.6 * arms);
            bulge * (-(r * r) / (2.0 * rb * rb)).exp() + 0.6 * disk
        })
    } else {
        let re = rng.random_range(22.0..40.0);
        let n = rng.random_range(2.5..4.5);
        Box::new(move |u: f64, v: f64| {
            // seeing softens the Sersic cusp
            let r = (u * u + v * v + 16.0).sqrt();
            (-3.0 * ((r / re).powf(1.0 / n) - (4.0 / re).powf(1.0 / n))).exp()
        })
    };

    let stars: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(0..5))
        .map(|_| {
            (
                rng.random_range(0.0..side as f64),
                rng.random_range(0.0..side as f64),
                rng.random_range(1.0..2.0),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let sky = rng.random_range(0.02..0.06);
    let noise_sd = 0.02;

    let mut img = GrayImage::from_fn(side, side, |x, y| {
        let (dx, dy) = (x as f64 - gx, y as f64 - gy);
        // rotate into the galaxy frame, then stretch the minor axis
        let u = co * dx + so * dy;
        let v = (-so * dx + co * dy) / q;
        let mut val = sky + peak * galaxy(u, v);
        for &(sx, sy, s, a) in &stars {
            let d2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
            if d2 < 100.0 * s * s {
                val += a * (-d2 / (2.0 * s * s)).exp();
            }
        }
        val
    });
    for v in img.data_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v = (*v + noise_sd * n).clamp(0.0, 1.0);
    }
    img
}

/// Survey-style labels for a synthetic item. The true class wins with a
/// vote fraction in `[0.55, 1]` and `p_not_odd` lies in `[0.6, 1]`, both
/// skewed toward 1 (`1 - a u^3`) the way volunteer votes pile up on clear cases.
pub fn synth_survey_row(name: String, spiral: bool, seed: u64) -> Gz2Row {
    let mut rng = rng_for(&[seed, 0x1abe1]);
    let win = 1.0 - 0.45 * rng.random::<f64>().powi(3);
    let lose = (1.0 - win) * rng.random::<f64>();
    let (p_spiral, p_elliptical) = if spiral { (win, lose) } else { (lose, win) };
    let p_not_odd = 1.0 - 0.4 * rng.random::<f64>().powi(3);
    Gz2Row { filename: name, p_elliptical, p_spiral, p_not_odd }
}

/// `n_elliptical + n_spiral` synthetic cutouts with their label rows, ellipticals first.
pub fn synth_survey_corpus(n_elliptical: usize, n_spiral: usize, seed: u64) -> Vec<(Gz2Row, GrayImage)> {
    (0..n_elliptical + n_spiral)
        .into_par_iter()
        .map(|i| {
            let spiral = i >= n_elliptical;
            let item_seed = stream_seed(&[seed, i as u64]);
            let name = format!("{}_{i:05}.png", if spiral { "spiral" } else { "elliptical" });
            (synth_survey_row(name, spiral, item_seed), synth_survey_image(spiral, item_seed))
        })
        .collect()
}

/// Write a synthetic corpus as `images/*.png` plus `labels.csv`; returns the labels path.
pub fn write_survey_corpus(dir: &Path, n_elliptical: usize, n_spiral: usize, seed: u64) -> Result<PathBuf> {
    let images = dir.join("images");
    fs::create_dir_all(&images)?;
    let corpus = synth_survey_corpus(n_elliptical, n_spiral, seed);
    corpus.par_iter().try_for_each(|(row, img)| img.save_png(&images.join(&row.filename)))?;
    let labels = dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&labels)?;
    for (row, _) in &corpus {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::gravity_center;

    fn rms_rel(a: &GrayImage, b: &GrayImage) -> f64 {
        let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = a.data().iter().map(|x| x * x).sum();
        (num / den).sqrt()
    }

    #[test]
    fn templates_are_deterministic_and_bounded() {
        let a = generate_templates(7, 64);
        let b = generate_templates(7, 64);
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        for t in &a {
            let (lo, hi) = t.min_max();
            assert!(lo >= 0.0 && hi <= 1.0 && hi > 0.99);
            // compact support well inside the frame
            assert_eq!(t.get(0, 0), 0.0);
            assert_eq!(t.get(2, 31), 0.0);
        }
        let other = generate_templates(8, 64);
        assert_ne!(a[GalaxyClass::I.index()], other[GalaxyClass::I.index()]);
        assert_eq!(a[GalaxyClass::Sb.index()], other[GalaxyClass::Sb.index()]);
    }

    #[test]
    fn e0_is_circular() {
        let t = &generate_templates(1, 64)[GalaxyClass::E0.index()];
        for angle in [0.3, 1.0, 2.2] {
            let r = rotate(t, angle, t.frame_center());
            assert!(rms_rel(t, &r) < 0.01);
        }
    }

    #[test]
    fn e7_axis_ratio() {
        let t = &generate_templates(1, 64)[GalaxyClass::E7.index()];
        let c = gravity_center(t).unwrap();
        let (mut sxx, mut syy, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0);
        for y in 0..64 {
            for x in 0..64 {
                let v = t.get(x, y);
                let (dx, dy) = (x as f64 - c.cx, y as f64 - c.cy);
                sxx += v * dx * dx;
                syy += v * dy * dy;
                sxy += v * dx * dy;
                m += v;
            }
        }
        let (a, b, d) = (sxx / m, syy / m, sxy / m);
        let tr = a + b;
        let disc = ((a - b).powi(2) + 4.0 * d * d).sqrt();
        let ratio = ((tr - disc) / (tr + disc)).sqrt();
        assert!((ratio - 0.3).abs() < 0.05, "axis ratio {ratio}");
    }

    #[test]
    fn speckle_examples() {
        let img = GrayImage::from_fn(16, 16, |x, y| 0.05 * ((x + y) % 14) as f64);
        assert_eq!(add_speckle(&img, 0.0, 3), img);
        let black = GrayImage::new(8, 8);
        assert_eq!(add_speckle(&black, 0.05, 3), black);

        // unclamped region: I (1 + n) <= 1 for every draw; compare the frame
        // mean across seeds, one statistic so 3 stderr is a fair bound
        let seeds = 1000;
        let target = img.sum() / img.data().len() as f64;
        let means: Vec<f64> =
            (0..seeds).map(|s| add_speckle(&img, 0.05, s).sum() / img.data().len() as f64).collect();
        let m = means.iter().sum::<f64>() / seeds as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (seeds as f64 - 1.0);
        let stderr = (var / seeds as f64).sqrt();
        assert!((m - target).abs() <= 3.0 * stderr, "{m} vs {target} (stderr {stderr})");
    }

    #[test]
    fn gaussian_noise_examples() {
        let gray = GrayImage::from_fn(128, 128, |_, _| 0.5);
        assert_eq!(add_gaussian_noise(&gray, 0.0, 1), gray);
        let j = add_gaussian_noise(&gray, 0.01, 1);
        let n = j.data().len() as f64;
        let mean = j.data().iter().map(|v| v - 0.5).sum::<f64>() / n;
        let var = j.data().iter().map(|v| (v - 0.5 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.01).abs() < 0.05 * 0.01, "variance {var}");
        assert_ne!(j, add_gaussian_noise(&gray, 0.01, 2));
    }

    #[test]
    fn condition_cardinalities() {
        let params = GenParams::default();
        let templates = generate_templates(5, 64);
        for idx in 1..=5 {
            let ds = build_condition_with(&templates, &params, idx, 5).unwrap();
            assert_eq!(ds.len(), 132);
            assert!(ds.items.iter().all(|it| it.image.width() == 66 && it.image.height() == 66));
        }
        assert!(matches!(build_condition_with(&templates, &params, 7, 5), Err(Error::InvalidCondition(7))));
        assert_eq!(condition_recipe(6).unwrap().len(), 144);
    }

    #[test]
    fn dba4_is_blurred_rotation() {
        let params = GenParams::default();
        let templates = generate_templates(2, 64);
        let ds = build_condition_with(&templates, &params, 4, 2).unwrap();
        for it in ds.items.iter().step_by(17) {
            let Label::Class(c) = it.label else { panic!() };
            let p = it.provenance.unwrap();
            let t = &templates[c.index()];
            let angle = p.rotation_index as f64 * PI / 6.0;
            let expected = center_square_normalize(&gaussian_blur(&rotate(t, angle, t.frame_center()), 2.0), 62, 2).unwrap();
            assert_eq!(it.image, expected);
        }
    }

    #[test]
    fn cluster_maps() {
        let five: std::collections::BTreeSet<_> = GalaxyClass::ALL.iter().map(|c| c.cluster5()).collect();
        assert_eq!(five.len(), 5);
        let three: Vec<_> = GalaxyClass::ALL.iter().filter(|c| c.cluster3().is_some()).copied().collect();
        use GalaxyClass::*;
        assert_eq!(three, vec![E0, E3, E7, Sa, Sb, Sc, SBa, SBb, SBc]);
        for c in GalaxyClass::ALL {
            assert_eq!(c.label().parse::<GalaxyClass>().unwrap(), c);
        }
    }

    #[test]
    fn gz2_rows() {
        let row = Gz2Row { filename: "a.png".into(), p_elliptical: 0.95, p_spiral: 0.02, p_not_odd: 0.97 };
        assert!(row.retained(0.9) && !row.is_spiral());
        let rows = vec![Gz2Row { filename: "b.png".into(), p_elliptical: 0.95, p_spiral: 0.0, p_not_odd: 0.95 }];
        assert!(matches!(filter_gz2(&rows, 1.0), Err(Error::ZeroSelected(_))));
    }

    #[test]
    fn synthetic_survey_is_deterministic() {
        let a = synth_survey_image(true, 9);
        assert_eq!(a, synth_survey_image(true, 9));
        assert_eq!((a.width(), a.height()), (SURVEY_SIDE, SURVEY_SIDE));
        assert!(gz2_normalize(&a).is_ok());
        assert!(gz2_normalize(&synth_survey_image(false, 9)).is_ok());
    }
}
