//! Experiment configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rotinv_core::datasets::{GenParams, Grouping, TemplateParams};
use rotinv_core::fmt::DEFAULT_SIGMA;
use rotinv_core::learn::{ClassifierKind, ClassifierParams};
use rotinv_core::Descriptor;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: Paths,
    pub generate: Generate,
    pub descriptor: DescriptorConfig,
    pub retrieval: Retrieval,
    pub classify: Classify,
    /// Directory the config was read from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Input locations. Unset inputs default to the output of the previous
/// command inside the output directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: Option<PathBuf>,
    /// Condition folder read by `extract`.
    pub dataset: Option<PathBuf>,
    /// Feature file read by `retrieve`.
    pub features: Option<PathBuf>,
    /// Survey corpus read by `classify`: a label CSV plus an image folder.
    pub survey: Option<PathBuf>,
    pub survey_labels: Option<PathBuf>,
    pub survey_images: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Generate {
    pub side: usize,
    pub speckle_variance: f64,
    pub gaussian_variance: f64,
    pub conditions: Vec<u8>,
    pub survey_elliptical: usize,
    pub survey_spiral: usize,
    pub templates: TemplateParams,
}

impl Default for Generate {
    fn default() -> Self {
        let g = GenParams::default();
        Self {
            side: g.side,
            speckle_variance: g.speckle_variance,
            gaussian_variance: g.gaussian_variance,
            conditions: (1..=6).collect(),
            survey_elliptical: 0,
            survey_spiral: 0,
            templates: g.templates,
        }
    }
}

impl Generate {
    pub fn gen_params(&self) -> GenParams {
        GenParams {
            side: self.side,
            speckle_variance: self.speckle_variance,
            gaussian_variance: self.gaussian_variance,
            templates: self.templates.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorConfig {
    pub family: String,
    pub n_max: u32,
    pub n_rho: Option<usize>,
    pub n_theta: Option<usize>,
    pub k: usize,
    pub v: usize,
    pub sigma: f64,
    /// Ring statistics exactly as printed (no mean subtraction in the higher moments).
    pub literal_ring: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self { family: "fft".into(), n_max: 5, n_rho: None, n_theta: None, k: 5, v: 5, sigma: DEFAULT_SIGMA, literal_ring: false }
    }
}

impl DescriptorConfig {
    pub fn descriptor(&self) -> Result<Descriptor> {
        let grid = |d: Descriptor| match d {
            Descriptor::Zernike { n_rho, n_theta, .. }
            | Descriptor::Ring { n_rho, n_theta, .. }
            | Descriptor::Fft { n_rho, n_theta } => (self.n_rho.unwrap_or(n_rho), self.n_theta.unwrap_or(n_theta)),
            _ => unreachable!(),
        };
        let d = match self.family.as_str() {
            "hu" => Descriptor::Hu,
            "flusser" => Descriptor::Flusser,
            "zernike" => {
                let (n_rho, n_theta) = grid(Descriptor::zernike());
                Descriptor::Zernike { n_max: self.n_max, n_rho, n_theta }
            }
            "ring" => {
                let (n_rho, n_theta) = grid(Descriptor::ring());
                Descriptor::Ring { n_rho, n_theta, literal: self.literal_ring }
            }
            "fft" => {
                let (n_rho, n_theta) = grid(Descriptor::fft());
                Descriptor::Fft { n_rho, n_theta }
            }
            "fmt1" => Descriptor::Fmt1 { k_max: self.k, v_max: self.v, sigma: self.sigma },
            "fmt2" => Descriptor::Fmt2 { k_max: self.k, v_max: self.v, sigma: self.sigma },
            other => bail!("unknown descriptor family {other:?}"),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Retrieval {
    pub grouping: usize,
    /// Standardize each feature over the gallery before ranking.
    pub zscore: bool,
}

impl Default for Retrieval {
    fn default() -> Self {
        Self { grouping: 11, zscore: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Classify {
    pub kind: String,
    pub folds: usize,
    /// Confidence threshold for the single run.
    pub tau: f64,
    /// Thresholds of the confidence sweep.
    pub sweep: Vec<f64>,
    pub params: ClassifierParams,
}

impl Default for Classify {
    fn default() -> Self {
        Self {
            kind: "steplda".into(),
            folds: 10,
            tau: 0.9,
            sweep: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            params: ClassifierParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Check parameter ranges before any work starts.
    pub fn validate(&self) -> Result<()> {
        let g = &self.generate;
        if g.side < 8 {
            bail!("generate.side must be at least 8, got {}", g.side);
        }
        if !(g.speckle_variance >= 0.0 && g.gaussian_variance >= 0.0) {
            bail!("noise variances must be non-negative");
        }
        if let Some(c) = g.conditions.iter().find(|c| !(1..=6).contains(*c)) {
            bail!("unknown condition {c}, expected 1..=6");
        }
        self.descriptor.descriptor()?;
        Grouping::from_count(self.retrieval.grouping)?;
        let c = &self.classify;
        self.classifier_kind()?;
        if c.folds < 2 {
            bail!("classify.folds must be at least 2, got {}", c.folds);
        }
        if let Some(t) = std::iter::once(&c.tau).chain(&c.sweep).find(|t| !(0.0..=1.0).contains(*t)) {
            bail!("confidence threshold {t} outside [0, 1]");
        }
        if !(c.params.c_reg > 0.0) || !(c.params.elm_lambda > 0.0) || c.params.hidden == 0 {
            bail!("classifier hyperparameters must be positive");
        }
        if !(0.0 < c.params.p_enter && c.params.p_enter <= c.params.p_remove && c.params.p_remove < 1.0) {
            bail!("stepwise thresholds need 0 < p_enter <= p_remove < 1");
        }
        Ok(())
    }

    pub fn classifier_kind(&self) -> Result<ClassifierKind> {
        Ok(self.classify.kind.parse()?)
    }

    /// Classifier parameters with the experiment seed.
    pub fn classifier_params(&self) -> ClassifierParams {
        ClassifierParams { seed: self.seed, ..self.classify.params.clone() }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) }
    }

    pub fn out_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        match cli_out {
            Some(p) => p.to_path_buf(),
            None => self.resolve(self.paths.out.as_deref().unwrap_or(Path::new("out"))),
        }
    }

    pub fn dataset_dir(&self, out: &Path) -> PathBuf {
        self.paths.dataset.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| out.join("dba1"))
    }

    pub fn features_file(&self, out: &Path) -> PathBuf {
        self.paths.features.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| out.join("features.csv"))
    }

    /// Label file and image folder of the survey corpus.
    pub fn survey(&self, out: &Path) -> (PathBuf, PathBuf) {
        let root = self.paths.survey.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| out.join("survey"));
        let labels = self.paths.survey_labels.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| root.join("labels.csv"));
        let images = self.paths.survey_images.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| root.join("images"));
        (labels, images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid_with_defaults() {
        let cfg: ExperimentConfig = toml::from_str("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.descriptor.descriptor().unwrap(), Descriptor::fft());
        assert_eq!(cfg.generate.conditions, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(cfg.classify.folds, 10);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            seed = 7
            [descriptor]
            family = "fmt1"
            k = 9
            v = 9
            [classify]
            kind = "svm"
            params = { c_reg = 2.0 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.descriptor.descriptor().unwrap().len(), 181);
        assert_eq!(cfg.classifier_params().seed, 7);
        assert_eq!(cfg.classifier_params().c_reg, 2.0);
        assert_eq!(cfg.classifier_kind().unwrap(), ClassifierKind::Svm);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[descriptor]\nfamily = \"sift\"",
            "[descriptor]\nfamily = \"fft\"\nn_theta = 24",
            "[retrieval]\ngrouping = 4",
            "[classify]\ntau = 1.5",
            "[classify]\nfolds = 1",
            "[generate]\nconditions = [7]",
            "[classify]\nkind = \"knn\"",
        ] {
            let cfg: ExperimentConfig = toml::from_str(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
        assert!(toml::from_str::<ExperimentConfig>("[paths]\nbogus = 1").is_err());
    }
}
