//! End-to-end commands: phantom generation, feature extraction, cohort
//! classification, two-group comparison and time-point progression.
//!
//! Every command is a pure function of its configuration and inputs; output
//! files are byte-identical across runs and thread counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::{loocv_isosvm, FeatureScaling};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{load_cohort, write_feature_file, StudyFeatureVector};
use crate::phantom::{generate, PhantomSpec};
use crate::stats::{
    confusion_metrics, delta_features, group_compare, roc_auc, GroupComparison, Orientation,
    RocCurve,
};
use crate::tscm::directional_summary;
use crate::tsfos::{build_tsh, tsfos_features, TSFOS_EXTENSIONS};
use crate::tspm::{subset_descriptor, subset_features};
use crate::volume::{
    extract_signatures, load_mask, load_stack, quantize, save_mask, save_stack, RoiMask,
    VolumeStack,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MASK_FILE: &str = "mask.u8";
pub const PHANTOM_FILE: &str = "phantom.json";

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Paths written by [`cmd_phantom`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomOutput {
    pub manifest: PathBuf,
    pub mask: PathBuf,
}

/// Generates a phantom and writes `manifest.json`, one `.f32` file per
/// channel, `mask.u8` and `phantom.json` (the spec) into `out_dir`.
pub fn cmd_phantom(spec: &PhantomSpec, out_dir: &Path) -> Result<PhantomOutput> {
    let (stack, roi) = generate(spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest = save_stack(&stack, out_dir, MANIFEST_FILE)?;
    let mask = out_dir.join(MASK_FILE);
    save_mask(&roi, &mask)?;
    write_text(&out_dir.join(PHANTOM_FILE), &to_json(spec))?;
    Ok(PhantomOutput { manifest, mask })
}

/// Identity of the study a feature row describes.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StudyInfo {
    pub study_id: String,
    pub label: Option<String>,
    pub time_point: Option<i64>,
}

/// The full feature row plus provenance for the file header.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub row: StudyFeatureVector,
    pub header: Value,
}

/// Computes every feature for one ROI. Columns, in order:
/// `TSPM_{entropy,uniformity,mi}_<subset>` for each channel subset
/// (lexicographic by channel index; `mi` only for two or more channels),
/// `TSFOS_<name>`, then `TSCM_<feature>_<mean|angle|range>`.
pub fn extract_features(
    config: &PipelineConfig,
    stack: &VolumeStack,
    roi: &RoiMask,
    study: &StudyInfo,
) -> Result<Extraction> {
    config.validate()?;
    let n = stack.n_channels();
    let mut notes = Vec::new();
    let max_subset = match config.max_subset_size {
        None => n,
        Some(m) if m > n => {
            notes.push(format!(
                "max_subset_size {m} exceeds {n} channels; using {n}"
            ));
            n
        }
        Some(m) => m,
    };
    let q = quantize(stack, roi, config.g)?;
    let signatures = extract_signatures(&q, roi)?;
    let table = subset_features(&signatures, q.g(), max_subset)?;
    let tsh = build_tsh(stack, roi, config.b, config.normalization)?;
    let tsfos = tsfos_features(&tsh)?;
    let tscm = directional_summary(&q, roi, config.d, &config.angles)?;

    let channel_names = stack.channel_names();
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (subset, f) in &table.entries {
        let desc = subset_descriptor(subset, &channel_names);
        names.push(format!("TSPM_entropy_{desc}"));
        values.push(f.entropy);
        names.push(format!("TSPM_uniformity_{desc}"));
        values.push(f.uniformity);
        if let Some(mi) = f.mutual_information {
            names.push(format!("TSPM_mi_{desc}"));
            values.push(mi);
        }
    }
    for (name, v) in tsfos.named() {
        names.push(format!("TSFOS_{name}"));
        values.push(v);
    }
    for (name, v) in tscm.named() {
        names.push(format!("TSCM_{name}"));
        values.push(v);
    }

    let mut row = StudyFeatureVector::new(study.study_id.clone(), names, values);
    row.label = study.label.clone();
    row.time_point = study.time_point;
    let header = json!({
        "tool": TOOL,
        "version": VERSION,
        "config": config,
        "study": study,
        "dims": stack.dims(),
        "spacing": stack.spacing(),
        "channels": channel_names,
        "roi_voxels": roi.count(),
        "quantization_ranges": q.ranges(),
        "tsfos_extensions": TSFOS_EXTENSIONS,
        "tscm_suffixes": tscm.suffixes(),
        "notes": notes,
    });
    Ok(Extraction { row, header })
}

/// Loads a stack and mask, extracts features and writes a one-row feature
/// file to `out_file`.
pub fn cmd_extract(
    config: &PipelineConfig,
    manifest: &Path,
    mask: &Path,
    study: &StudyInfo,
    out_file: &Path,
) -> Result<StudyFeatureVector> {
    let stack = load_stack(manifest)?;
    let roi = load_mask(mask, stack.dims())?;
    let ex = extract_features(config, &stack, &roi, study)?;
    if let Some(parent) = out_file.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_feature_file(out_file, &ex.header, std::slice::from_ref(&ex.row))?;
    Ok(ex.row)
}

/// Splits labels into (negative, positive). The positive class is
/// `preferred` when given, otherwise the lexicographically last label.
fn binary_classes(labels: &BTreeSet<String>, preferred: Option<&str>) -> Result<(String, String)> {
    match labels.len() {
        0 | 1 => Err(Error::SingleClass(format!(
            "labels found: {:?}",
            labels.iter().collect::<Vec<_>>()
        ))),
        2 => {
            let mut it = labels.iter().cloned();
            let (first, last) = (it.next().expect("two"), it.next().expect("two"));
            match preferred {
                None => Ok((first, last)),
                Some(p) if p == last => Ok((first, last)),
                Some(p) if p == first => Ok((last, first)),
                Some(p) => Err(Error::InvalidParameter(format!(
                    "positive label '{p}' is not one of '{first}', '{last}'"
                ))),
            }
        }
        _ => Err(Error::InvalidParameter(format!(
            "exactly two classes required, found {:?}",
            labels.iter().collect::<Vec<_>>()
        ))),
    }
}

fn require_label(row: &StudyFeatureVector) -> Result<&str> {
    row.label
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter(format!("study '{}' has no label", row.study_id)))
}

fn check_unique_ids(rows: &[StudyFeatureVector], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert(r.study_id.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "duplicate study id '{}' in {what}",
                r.study_id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyScore {
    pub study_id: String,
    pub label: String,
    pub score: f64,
    pub predicted: String,
    pub correct: bool,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsomapSummary {
    pub k_requested: usize,
    pub k: usize,
    pub embedding_dim: usize,
    pub eigenvalues: Vec<f64>,
    pub adjustments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub positive_label: String,
    pub negative_label: String,
    pub n_studies: usize,
    pub evaluation: String,
    pub embedding_fit: String,
    pub features_used: usize,
    pub standardization: Vec<FeatureScaling>,
    pub dropped_features: Vec<String>,
    pub warnings: Vec<String>,
    pub isomap: IsomapSummary,
    pub studies: Vec<StudyScore>,
    pub roc: RocCurve,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Standardize, embed with Isomap, then leave-one-out linear SVM over every
/// labeled row of the feature files in `cohort_dir`.
pub fn classify_rows(
    config: &PipelineConfig,
    rows: &[StudyFeatureVector],
) -> Result<ClassificationReport> {
    config.validate()?;
    check_unique_ids(rows, "cohort")?;
    let labels: BTreeSet<String> = rows
        .iter()
        .map(|r| require_label(r).map(str::to_string))
        .collect::<Result<_>>()?;
    let (negative, positive) = binary_classes(&labels, config.positive_label.as_deref())?;
    let truth: Vec<bool> = rows
        .iter()
        .map(|r| r.label.as_deref() == Some(positive.as_str()))
        .collect();

    let cv = loocv_isosvm(
        rows,
        &truth,
        config.isomap.k,
        config.isomap.dim,
        config.svm.c,
    )?;
    let scores: Vec<f64> = cv.folds.iter().map(|f| f.score).collect();
    let predicted: Vec<bool> = cv.folds.iter().map(|f| f.predicted).collect();
    let roc = roc_auc(&scores, &truth)?;
    let cm = confusion_metrics(&predicted, &truth)?;
    let studies = cv
        .folds
        .iter()
        .zip(rows)
        .zip(&cv.isomap.embedding)
        .map(|((f, r), e)| StudyScore {
            study_id: f.study_id.clone(),
            label: r.label.clone().unwrap_or_default(),
            score: f.score,
            predicted: if f.predicted {
                positive.clone()
            } else {
                negative.clone()
            },
            correct: f.predicted == f.truth,
            embedding: e.clone(),
        })
        .collect();
    Ok(ClassificationReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: config.clone(),
        positive_label: positive,
        negative_label: negative,
        n_studies: rows.len(),
        evaluation: "leave-one-out cross-validation of a linear soft-margin SVM".into(),
        embedding_fit:
            "transductive: Isomap is fit once on all studies (label-blind) before the folds".into(),
        features_used: cv.standardization.params.len(),
        standardization: cv.standardization.params.clone(),
        dropped_features: cv.standardization.dropped.clone(),
        warnings: cv.standardization.warnings.clone(),
        isomap: IsomapSummary {
            k_requested: cv.isomap.k_requested,
            k: cv.isomap.k,
            embedding_dim: cv.isomap.embedding_dim,
            eigenvalues: cv.isomap.eigenvalues.clone(),
            adjustments: cv.isomap.adjustments.clone(),
        },
        studies,
        auc: roc.auc,
        roc,
        sensitivity: cm.sensitivity,
        specificity: cm.specificity,
        accuracy: cm.accuracy,
    })
}

pub fn cmd_classify(
    config: &PipelineConfig,
    cohort_dir: &Path,
    out_report: &Path,
) -> Result<ClassificationReport> {
    let rows = load_cohort(cohort_dir)?;
    let report = classify_rows(config, &rows)?;
    write_text(out_report, &to_json(&report))?;
    Ok(report)
}

/// Compares the feature files in `group_a_dir` against `group_b_dir` and
/// writes the comparison CSV. Group b is the positive class for AUC.
pub fn cmd_compare(
    config: &PipelineConfig,
    group_a_dir: &Path,
    group_b_dir: &Path,
    out_csv: &Path,
) -> Result<GroupComparison> {
    config.validate()?;
    let a = load_cohort(group_a_dir)?;
    let b = load_cohort(group_b_dir)?;
    let cmp = group_compare(&a, &b)?;
    if let Some(parent) = out_csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    cmp.save_csv(out_csv)?;
    Ok(cmp)
}

/// Reads a `study_id,label` CSV.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let bad = |message: String| Error::FeatureFile {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let head = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if head.len() != 2 || &head[0] != "study_id" || &head[1] != "label" {
        return Err(bad("expected columns study_id,label".into()));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if out.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
            return Err(bad(format!("duplicate study id '{}'", &rec[0])));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressionFeature {
    pub feature: String,
    pub mean_a: f64,
    pub sem_a: f64,
    pub mean_b: f64,
    pub sem_b: f64,
    pub t: f64,
    pub p: f64,
    pub auc: f64,
    pub orientation: Orientation,
    /// Curve of the oriented delta (negated for `lower_in_b`).
    pub roc: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressionReport {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub delta: String,
    pub t_test: String,
    pub features: Vec<ProgressionFeature>,
}

impl ProgressionReport {
    pub fn get(&self, feature: &str) -> Option<&ProgressionFeature> {
        self.features.iter().find(|f| f.feature == feature)
    }
}

/// Pairs rows by study id, computes `t2 - t1` deltas and compares the two
/// outcome groups. Labels come from `labels` when given, otherwise from the
/// time-2 rows.
pub fn progression_rows(
    config: &PipelineConfig,
    t1: &[StudyFeatureVector],
    t2: &[StudyFeatureVector],
    labels: Option<&BTreeMap<String, String>>,
) -> Result<(ProgressionReport, GroupComparison)> {
    config.validate()?;
    check_unique_ids(t1, "time point 1")?;
    check_unique_ids(t2, "time point 2")?;
    let by_id: BTreeMap<&str, &StudyFeatureVector> =
        t2.iter().map(|r| (r.study_id.as_str(), r)).collect();
    if let Some(extra) = t2
        .iter()
        .find(|r| !t1.iter().any(|a| a.study_id == r.study_id))
    {
        return Err(Error::UnmatchedStudy(extra.study_id.clone()));
    }
    let mut deltas = Vec::with_capacity(t1.len());
    for r1 in t1 {
        let r2 = by_id
            .get(r1.study_id.as_str())
            .ok_or_else(|| Error::UnmatchedStudy(r1.study_id.clone()))?;
        let mut d = delta_features(r1, r2)?;
        if let Some(map) = labels {
            let l = map
                .get(&d.study_id)
                .ok_or_else(|| Error::UnmatchedStudy(d.study_id.clone()))?;
            d.label = Some(l.clone());
        }
        require_label(&d)?;
        deltas.push(d);
    }
    let classes: BTreeSet<String> = deltas.iter().filter_map(|d| d.label.clone()).collect();
    let (label_a, label_b) = binary_classes(&classes, config.positive_label.as_deref())?;
    let (b, a): (Vec<StudyFeatureVector>, Vec<StudyFeatureVector>) = deltas
        .into_iter()
        .partition(|d| d.label.as_deref() == Some(label_b.as_str()));
    let cmp = group_compare(&a, &b)?;

    let mut truth = vec![false; a.len()];
    truth.extend(std::iter::repeat_n(true, b.len()));
    let features = cmp
        .rows
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let sign = match c.orientation {
                Orientation::HigherInB => 1.0,
                Orientation::LowerInB => -1.0,
            };
            let scores: Vec<f64> = a.iter().chain(&b).map(|r| sign * r.values[k]).collect();
            Ok(ProgressionFeature {
                feature: c.feature.clone(),
                mean_a: c.a.mean,
                sem_a: c.a.sem,
                mean_b: c.b.mean,
                sem_b: c.b.sem,
                t: c.t,
                p: c.p,
                auc: c.auc,
                orientation: c.orientation,
                roc: roc_auc(&scores, &truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ProgressionReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: config.clone(),
        group_a: label_a,
        group_b: label_b,
        n_a: a.len(),
        n_b: b.len(),
        delta: "time point 2 minus time point 1, per study".into(),
        t_test: "Welch unequal-variance, two-sided".into(),
        features,
    };
    Ok((report, cmp))
}

/// Writes `<out>` (JSON report), `<out stem>_comparison.csv` and
/// `<out stem>_roc.csv` (long format: feature, fpr, tpr, threshold).
pub fn cmd_progression(
    config: &PipelineConfig,
    timepoint1_dir: &Path,
    timepoint2_dir: &Path,
    labels: Option<&Path>,
    out_report: &Path,
) -> Result<ProgressionReport> {
    let t1 = load_cohort(timepoint1_dir)?;
    let t2 = load_cohort(timepoint2_dir)?;
    let labels = labels.map(read_labels).transpose()?;
    let (report, cmp) = progression_rows(config, &t1, &t2, labels.as_ref())?;

    write_text(out_report, &to_json(&report))?;
    let stem = out_report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "progression".into());
    let sibling = |suffix: &str| out_report.with_file_name(format!("{stem}_{suffix}"));
    cmp.save_csv(&sibling("comparison.csv"))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "fpr", "tpr", "threshold"])
        .expect("in-memory write");
    for f in &report.features {
        for p in &f.roc.points {
            let th = p.threshold.map(|t| format!("{t}")).unwrap_or_default();
            w.write_record([
                f.feature.clone(),
                format!("{}", p.fpr),
                format!("{}", p.tpr),
                th,
            ])
            .expect("in-memory write");
        }
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    write_text(&sibling("roc.csv"), &body)?;
    Ok(report)
}
