//! IsoSVM: z-scored features, one Isomap embedding of the whole cohort, and a
//! linear SVM retrained for every leave-one-out fold.
//!
//! Isomap is fit once on all studies without labels. Each fold only holds
//! out the study's embedded point from SVM training, so the embedding itself
//! is transductive.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::StudyFeatureVector;
use crate::isomap::{fit_isomap, IsomapModel};
use crate::svm::train_linear_svm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScaling {
    pub name: String,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardized {
    /// One row per study over the retained features.
    pub rows: Vec<Vec<f64>>,
    pub params: Vec<FeatureScaling>,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Z-scores every feature with the population standard deviation. Features
/// with zero spread are dropped and reported.
pub fn standardize(rows: &[StudyFeatureVector]) -> Result<Standardized> {
    if rows.len() < 2 {
        return Err(Error::GroupTooSmall(format!(
            "standardization needs at least 2 studies, got {}",
            rows.len()
        )));
    }
    let names = &rows[0].names;
    if let Some(bad) = rows.iter().find(|r| &r.names != names) {
        return Err(Error::FeatureMismatch(format!(
            "study '{}' has a different feature list",
            bad.study_id
        )));
    }
    for r in rows {
        if let Some(k) = r.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "study '{}' feature '{}' is not finite",
                r.study_id, names[k]
            )));
        }
    }
    let n = rows.len() as f64;
    let mut params = Vec::new();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let mean = rows.iter().map(|r| r.values[k]).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r.values[k] - mean).powi(2))
            .sum::<f64>()
            / n;
        let stddev = var.sqrt();
        if stddev == 0.0 || stddev <= 1e-12 * mean.abs() {
            dropped.push(name.clone());
            warnings.push(format!(
                "feature '{name}' has zero variance and was dropped"
            ));
            continue;
        }
        keep.push(k);
        params.push(FeatureScaling {
            name: name.clone(),
            mean,
            stddev,
        });
    }
    let standardized = rows
        .iter()
        .map(|r| {
            keep.iter()
                .zip(&params)
                .map(|(&k, p)| (r.values[k] - p.mean) / p.stddev)
                .collect()
        })
        .collect();
    Ok(Standardized {
        rows: standardized,
        params,
        dropped,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub study_id: String,
    pub score: f64,
    pub predicted: bool,
    pub truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoocvResult {
    pub standardization: Standardized,
    pub isomap: IsomapModel,
    pub folds: Vec<FoldResult>,
}

/// Leave-one-out IsoSVM. `truth[i]` is true for the positive class.
pub fn loocv_isosvm(
    rows: &[StudyFeatureVector],
    truth: &[bool],
    k: usize,
    embedding_dim: usize,
    c: f64,
) -> Result<LoocvResult> {
    if rows.len() != truth.len() {
        return Err(Error::InvalidParameter(
            "one label per study required".into(),
        ));
    }
    if rows.len() < 4 {
        return Err(Error::GroupTooSmall(format!(
            "leave-one-out needs at least 4 studies, got {}",
            rows.len()
        )));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    if pos == 0 || pos == truth.len() {
        return Err(Error::SingleClass(format!(
            "{pos} positive of {}",
            truth.len()
        )));
    }
    let standardization = standardize(rows)?;
    if standardization.params.is_empty() {
        return Err(Error::InvalidParameter(
            "every feature has zero variance".into(),
        ));
    }
    let isomap = fit_isomap(&standardization.rows, k, embedding_dim)?;
    let points = &isomap.embedding;

    let folds = (0..rows.len())
        .into_par_iter()
        .map(|held| {
            let (train_x, train_y): (Vec<Vec<f64>>, Vec<bool>) = points
                .iter()
                .zip(truth)
                .enumerate()
                .filter(|&(i, _)| i != held)
                .map(|(_, (p, &t))| (p.clone(), t))
                .unzip();
            let model = train_linear_svm(&train_x, &train_y, c)?;
            let score = model.decision(&points[held]);
            Ok(FoldResult {
                study_id: rows[held].study_id.clone(),
                score,
                predicted: score > 0.0,
                truth: truth[held],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoocvResult {
        standardization,
        isomap,
        folds,
    })
}
