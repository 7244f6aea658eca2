//! Feature files: CSV with `id,class,condition` followed by one column per
//! value, named `<family>_<level>_<index>`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rotinv_core::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub class: String,
    pub condition: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub family: String,
    /// Values per row in each level.
    pub per_level: usize,
    pub levels: usize,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn columns(&self) -> Vec<String> {
        (0..self.levels)
            .flat_map(|l| (0..self.per_level).map(move |i| (l, i)))
            .map(|(l, i)| format!("{}_{l}_{i}", self.family))
            .collect()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["id".to_string(), "class".into(), "condition".into()];
    header.extend(table.columns());
    w.write_record(&header)?;
    for r in &table.rows {
        if r.values.len() != table.per_level * table.levels {
            bail!(Error::DimensionMismatch { expected: table.per_level * table.levels, got: r.values.len() });
        }
        let mut rec = vec![r.id.clone(), r.class.clone(), r.condition.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn malformed(row: u64, reason: impl Into<String>) -> Error {
    Error::MalformedRow { row: row as usize, reason: reason.into() }
}

/// Parse `<family>_<level>_<index>`.
fn split_column(name: &str) -> Option<(&str, usize, usize)> {
    let mut parts = name.rsplitn(3, '_');
    let index = parts.next()?.parse().ok()?;
    let level = parts.next()?.parse().ok()?;
    Some((parts.next()?, level, index))
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    if !path.exists() {
        bail!(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 4 || header.iter().take(3).ne(["id", "class", "condition"]) {
        bail!(malformed(1, "header must start with id,class,condition and name at least one feature"));
    }
    let cols: Vec<(&str, usize, usize)> = header
        .iter()
        .skip(3)
        .map(|c| split_column(c).ok_or_else(|| malformed(1, format!("bad feature column {c:?}"))))
        .collect::<Result<_, _>>()?;
    let family = cols[0].0.to_string();
    let levels = cols.iter().map(|c| c.1).max().unwrap_or(0) + 1;
    let per_level = cols.len() / levels;
    let expected = (0..levels).flat_map(|l| (0..per_level).map(move |i| (l, i)));
    if per_level * levels != cols.len() || cols.iter().zip(expected).any(|(c, (l, i))| c.0 != family || (c.1, c.2) != (l, i)) {
        bail!(malformed(1, "feature columns are not a complete <family>_<level>_<index> grid"));
    }

    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            bail!(malformed(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let values = rec
            .iter()
            .skip(3)
            .map(|s| s.trim().parse::<f64>().map_err(|_| malformed(line, format!("not a number: {s:?}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(FeatureRow { id: rec[0].to_string(), class: rec[1].to_string(), condition: rec[2].to_string(), values });
    }
    Ok(FeatureTable { family, per_level, levels, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> FeatureTable {
        FeatureTable {
            family: "fmt1".into(),
            per_level: 2,
            levels: 2,
            rows: vec![
                FeatureRow { id: "E0_000.png".into(), class: "E0".into(), condition: "dba1".into(), values: vec![0.1, -2.5e-17, 3.0, 1e300] },
                FeatureRow { id: "Sa_001.png".into(), class: "Sa".into(), condition: "dba1".into(), values: vec![1.0 / 3.0, 0.0, -0.0, 7.0] },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_features(&p, &table()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,class,condition,fmt1_0_0,fmt1_0_1,fmt1_1_0,fmt1_1_1\n"));
        assert_eq!(read_features(&p).unwrap(), table());
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "id,class,condition,hu_0_0,hu_0_1\na,E0,dba1,1,2\nb,E0,dba1,1,oops\n").unwrap();
        let err = read_features(&p).unwrap_err();
        assert!(matches!(err.downcast_ref::<Error>(), Some(Error::MalformedRow { row: 3, .. })), "{err}");

        std::fs::write(&p, "id,class,condition,hu_0_0,hu_0_1\na,E0,dba1,1,2\nb,E0,dba1\nc,E0,dba1,1,2\n").unwrap();
        let err = read_features(&p).unwrap_err();
        assert!(matches!(err.downcast_ref::<Error>(), Some(Error::MalformedRow { row: 3, .. })), "{err}");

        std::fs::write(&p, "id,class,condition,hu_0_0,hu_0_2\n").unwrap();
        assert!(matches!(read_features(&p).unwrap_err().downcast_ref::<Error>(), Some(Error::MalformedRow { row: 1, .. })));
        assert!(matches!(
            read_features(&dir.path().join("none.csv")).unwrap_err().downcast_ref::<Error>(),
            Some(Error::MissingFile(_))
        ));
    }

    #[test]
    fn column_names_split_from_the_right() {
        assert_eq!(split_column("fmt2_3_112"), Some(("fmt2", 3, 112)));
        assert_eq!(split_column("hu_0"), None);
    }
}
