//! The four experiment commands. Each one reads its inputs, writes every
//! output under a staging name and moves them into place only on success.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use rotinv_core::datasets::{
    build_condition_with, generate_templates_with, read_dataset, read_gz2_labels, write_dataset, write_survey_corpus,
    GalaxyClass, Grouping, Gz2Row, Label,
};
use rotinv_core::learn::metrics::Metrics;
use rotinv_core::learn::zscore::ZScore;
use rotinv_core::learn::{confidence_sweep, cv_classify, retrieval_eval, ClassificationReport, RetrievalReport, SweepRow};
use rotinv_core::preprocess::{gz2_features, PYRAMID_LEVELS};
use rotinv_core::{Error, GrayImage};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::features::{read_features, write_features, FeatureRow, FeatureTable};
use crate::output::Outputs;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Templates, the configured conditions and, when requested, a synthetic survey corpus.
pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let params = cfg.generate.gen_params();
    let templates = generate_templates_with(&params.templates, cfg.seed, params.side);
    let mut outputs = Outputs::new();

    let dir = outputs.stage(&out.join("templates"))?;
    fs::create_dir_all(&dir)?;
    for (class, t) in GalaxyClass::ALL.iter().zip(&templates) {
        t.save_png(&dir.join(format!("{class}.png")))?;
    }
    for &idx in &cfg.generate.conditions {
        let ds = build_condition_with(&templates, &params, idx, cfg.seed)?;
        let dir = outputs.stage(&out.join(ds.condition.name()))?;
        write_dataset(&ds, &dir).with_context(|| format!("writing condition {}", ds.condition.name()))?;
    }
    let (ne, ns) = (cfg.generate.survey_elliptical, cfg.generate.survey_spiral);
    if ne + ns > 0 {
        let dir = outputs.stage(&out.join("survey"))?;
        write_survey_corpus(&dir, ne, ns, cfg.seed)?;
    }
    outputs.commit()
}

fn label_name(label: Label) -> String {
    match label {
        Label::Class(c) => c.label().to_string(),
        Label::Spiral(true) => "spiral".into(),
        Label::Spiral(false) => "elliptical".into(),
    }
}

/// One feature row per image of a condition folder.
pub fn cmd_extract(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let descriptor = cfg.descriptor.descriptor()?;
    let dataset = cfg.dataset_dir(out);
    let ds = read_dataset(&dataset).with_context(|| format!("reading dataset {}", dataset.display()))?;
    let condition = ds.condition.name();
    let rows = ds
        .items
        .par_iter()
        .map(|it| {
            let f = descriptor.extract(&it.image).with_context(|| format!("extracting {}", it.name))?;
            Ok(FeatureRow { id: it.name.clone(), class: label_name(it.label), condition: condition.clone(), values: f.values })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = FeatureTable { family: descriptor.family().into(), per_level: descriptor.len(), levels: 1, rows };

    let target = cfg.features_file(out);
    let mut outputs = Outputs::new();
    write_features(&outputs.stage(&target)?, &table)?;
    outputs.commit()?;
    Ok(target)
}

#[derive(Debug, Serialize)]
struct RetrievalOutput<'a> {
    family: &'a str,
    zscore: bool,
    #[serde(flatten)]
    report: &'a RetrievalReport,
}

/// Column holding the precision of each group.
pub fn precision_column(report: &RetrievalReport) -> String {
    match report.fixed_rank {
        Some(k) => format!("p_at_{k}"),
        None => "p_at_group_size_minus_1".into(),
    }
}

fn write_retrieval_csv(path: &Path, r: &RetrievalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group", "n_items", "rank", &precision_column(r), "map"])?;
    for g in &r.groups {
        w.write_record([g.group.clone(), g.n_items.to_string(), g.rank.to_string(), g.precision.to_string(), g.mean_average_precision.to_string()])?;
    }
    let rank = r.fixed_rank.map(|k| k.to_string()).unwrap_or_default();
    for (name, p, m) in [("mean", r.precision_mean, r.map_mean), ("std", r.precision_std, r.map_std)] {
        w.write_record([name.to_string(), r.n_queries.to_string(), rank.clone(), p.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Leave-one-out retrieval over a feature file.
pub fn cmd_retrieve(cfg: &ExperimentConfig, out: &Path) -> Result<RetrievalReport> {
    cfg.validate()?;
    let path = cfg.features_file(out);
    let table = read_features(&path).with_context(|| format!("reading features {}", path.display()))?;
    let classes = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.class.parse::<GalaxyClass>().map_err(|_| Error::MalformedRow { row: i + 2, reason: format!("unknown class {:?}", r.class) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut gallery = table.matrix();
    if cfg.retrieval.zscore && !gallery.is_empty() {
        let x = DMatrix::from_fn(gallery.len(), gallery[0].len(), |i, j| gallery[i][j]);
        let z = ZScore::fit(&x).apply(&x);
        gallery = z.row_iter().map(|r| r.iter().copied().collect()).collect();
    }
    let grouping = Grouping::from_count(cfg.retrieval.grouping)?;
    let report = retrieval_eval(&gallery, &classes, grouping)?;

    let mut outputs = Outputs::new();
    write_retrieval_csv(&outputs.stage(&out.join("retrieval.csv"))?, &report)?;
    let doc = RetrievalOutput { family: &table.family, zscore: cfg.retrieval.zscore, report: &report };
    write_json(&outputs.stage(&out.join("retrieval.json"))?, &doc)?;
    outputs.commit()?;
    Ok(report)
}

/// Survey rows passing `tau` with their pyramid features.
pub fn survey_features(cfg: &ExperimentConfig, out: &Path, tau: f64) -> Result<(Vec<Gz2Row>, DMatrix<f64>)> {
    let descriptor = cfg.descriptor.descriptor()?;
    let (labels, images) = cfg.survey(out);
    let rows: Vec<Gz2Row> = read_gz2_labels(&labels)?.into_iter().filter(|r| r.retained(tau)).collect();
    if rows.is_empty() {
        return Err(Error::ZeroSelected(tau).into());
    }
    let feats = rows
        .par_iter()
        .map(|r| {
            let raw = GrayImage::load(&images.join(&r.filename))?;
            Ok(gz2_features(&raw, &descriptor).with_context(|| format!("describing {}", r.filename))?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let d = descriptor.len() * PYRAMID_LEVELS;
    Ok((rows, DMatrix::from_fn(feats.len(), d, |i, j| feats[i][j])))
}

fn metric_fields(m: &Metrics) -> Vec<String> {
    m.to_array().iter().map(|v| v.to_string()).collect()
}

fn write_classification_csv(path: &Path, r: &ClassificationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["fold"];
    header.extend(Metrics::NAMES);
    w.write_record(&header)?;
    for f in &r.folds {
        let mut rec = vec![(f.fold + 1).to_string()];
        rec.extend(metric_fields(&f.metrics));
        w.write_record(&rec)?;
    }
    for (name, m) in [("mean", &r.mean), ("std", &r.std)] {
        let mut rec = vec![name.to_string()];
        rec.extend(metric_fields(m));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["tau", "n_examples", "n_elliptical", "n_spiral"].map(String::from).to_vec();
    for n in Metrics::NAMES {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    header.push("error".into());
    w.write_record(&header)?;
    for s in rows {
        let mut rec = vec![s.tau.to_string(), s.n_examples.to_string(), s.n_elliptical.to_string(), s.n_spiral.to_string()];
        match &s.report {
            Some(r) => {
                for (m, sd) in r.mean.to_array().iter().zip(r.std.to_array()) {
                    rec.push(m.to_string());
                    rec.push(sd.to_string());
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 2 * Metrics::NAMES.len())),
        }
        rec.push(s.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClassifyOutput<'a, T: Serialize> {
    family: &'a str,
    folds: usize,
    seed: u64,
    #[serde(flatten)]
    result: T,
}

#[derive(Debug)]
pub enum ClassifyResult {
    Single { tau: f64, n_examples: usize, report: ClassificationReport },
    Sweep(Vec<SweepRow>),
}

/// Survey corpus through normalization, pyramid features and k-fold
/// cross-validation; with `sweep`, once per confidence threshold.
pub fn cmd_classify(cfg: &ExperimentConfig, out: &Path, sweep: bool) -> Result<ClassifyResult> {
    cfg.validate()?;
    let kind = cfg.classifier_kind()?;
    let params = cfg.classifier_params();
    let c = &cfg.classify;
    let family = cfg.descriptor.descriptor()?.family();
    let mut outputs = Outputs::new();
    let result = if sweep {
        let lowest = c.sweep.iter().copied().fold(f64::INFINITY, f64::min);
        let tau = if lowest.is_finite() { lowest } else { c.tau };
        let (rows, x) = survey_features(cfg, out, tau)?;
        let taus = if c.sweep.is_empty() { vec![c.tau] } else { c.sweep.clone() };
        let table = confidence_sweep(&rows, &x, &taus, kind, &params, c.folds, cfg.seed)?;
        write_sweep_csv(&outputs.stage(&out.join("sweep.csv"))?, &table)?;
        #[derive(Serialize)]
        struct Rows<'a> {
            classifier: &'a str,
            sweep: &'a [SweepRow],
        }
        let doc = ClassifyOutput { family, folds: c.folds, seed: cfg.seed, result: Rows { classifier: kind.name(), sweep: &table } };
        write_json(&outputs.stage(&out.join("sweep.json"))?, &doc)?;
        ClassifyResult::Sweep(table)
    } else {
        let (rows, x) = survey_features(cfg, out, c.tau)?;
        let y: Vec<bool> = rows.iter().map(Gz2Row::is_spiral).collect();
        let report = cv_classify(&x, &y, kind, &params, c.folds, cfg.seed)?;
        write_classification_csv(&outputs.stage(&out.join("classification.csv"))?, &report)?;
        #[derive(Serialize)]
        struct Single<'a> {
            tau: f64,
            n_examples: usize,
            n_spiral: usize,
            report: &'a ClassificationReport,
        }
        let n_spiral = y.iter().filter(|&&s| s).count();
        let doc = ClassifyOutput { family, folds: c.folds, seed: cfg.seed, result: Single { tau: c.tau, n_examples: y.len(), n_spiral, report: &report } };
        write_json(&outputs.stage(&out.join("classification.json"))?, &doc)?;
        ClassifyResult::Single { tau: c.tau, n_examples: y.len(), report }
    };
    outputs.commit()?;
    Ok(result)
}
