//! Study feature vectors and their CSV file format.
//!
//! A feature file is UTF-8 CSV whose first line is `# ` followed by a JSON
//! header object (configuration and provenance). The next line is the column
//! header `study_id,label,time_point,<feature...>` and every further line is
//! one study. Floats are written in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 3] = ["study_id", "label", "time_point"];

/// Named, ordered scalar features for one ROI at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFeatureVector {
    pub study_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub label: Option<String>,
    pub time_point: Option<i64>,
}

impl StudyFeatureVector {
    pub fn new(study_id: impl Into<String>, names: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(
            names.len(),
            values.len(),
            "feature names and values differ in length"
        );
        Self {
            study_id: study_id.into(),
            names,
            values,
            label: None,
            time_point: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_time_point(mut self, t: i64) -> Self {
        self.time_point = Some(t);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Rows of one feature file together with its JSON header.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub header: Value,
    pub rows: Vec<StudyFeatureVector>,
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

pub fn write_feature_file(path: &Path, header: &Value, rows: &[StudyFeatureVector]) -> Result<()> {
    let names = rows.first().map(|r| r.names.clone()).unwrap_or_default();
    if let Some(bad) = rows.iter().find(|r| r.names != names) {
        return Err(Error::FeatureMismatch(format!(
            "study '{}' has a different feature list",
            bad.study_id
        )));
    }
    let mut out = String::new();
    out.push_str("# ");
    out.push_str(&serde_json::to_string(header).expect("header serializes"));
    out.push('\n');

    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut head: Vec<&str> = FIXED_COLUMNS.to_vec();
    head.extend(names.iter().map(String::as_str));
    w.write_record(&head).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.study_id.clone(),
            r.label.clone().unwrap_or_default(),
            r.time_point.map(|t| t.to_string()).unwrap_or_default(),
        ];
        rec.extend(r.values.iter().map(|&v| format_float(v)));
        w.write_record(&rec).expect("in-memory write");
    }
    let body = w.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: &Path) -> Result<FeatureFile> {
    let bad = |message: String| Error::FeatureFile {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| bad("first line must start with '#'".into()))?;
    let header: Value = serde_json::from_str(json.trim()).map_err(|e| bad(e.to_string()))?;

    let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.len() < 3 || columns[..3] != FIXED_COLUMNS {
        return Err(bad(format!("columns must start with {FIXED_COLUMNS:?}")));
    }
    let names: Vec<String> = columns[3..].to_vec();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let values = rec
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| bad(format!("value '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = Some(rec[1].to_string()).filter(|s| !s.is_empty());
        let time_point = match &rec[2] {
            "" => None,
            s => Some(
                s.parse::<i64>()
                    .map_err(|e| bad(format!("time point '{s}': {e}")))?,
            ),
        };
        rows.push(StudyFeatureVector {
            study_id: rec[0].to_string(),
            names: names.clone(),
            values,
            label,
            time_point,
        });
    }
    Ok(FeatureFile { header, rows })
}

/// Feature files (`*.csv`) in `dir`, sorted by file name.
pub fn list_feature_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Every study row from every feature file in `dir`, in file-name order.
pub fn load_cohort(dir: &Path) -> Result<Vec<StudyFeatureVector>> {
    let mut rows = Vec::new();
    for path in list_feature_files(dir)? {
        rows.extend(read_feature_file(&path)?.rows);
    }
    Ok(rows)
}
