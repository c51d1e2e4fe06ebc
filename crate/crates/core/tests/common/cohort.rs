//! Phantom cohorts run through the real extraction pipeline.

use mpradiomics::config::PipelineConfig;
use mpradiomics::features::StudyFeatureVector;
use mpradiomics::phantom::{generate, PhantomSpec};
use mpradiomics::pipeline::{extract_features, StudyInfo};
use rayon::prelude::*;

pub fn extract_phantom(
    config: &PipelineConfig,
    spec: &PhantomSpec,
    study_id: &str,
    time_point: Option<i64>,
) -> StudyFeatureVector {
    let (stack, roi) = generate(spec).unwrap();
    let study = StudyInfo {
        study_id: study_id.to_string(),
        label: Some(spec.label.clone()),
        time_point,
    };
    extract_features(config, &stack, &roi, &study).unwrap().row
}

/// Extracts every `(study_id, spec)` pair; rows come back in input order.
pub fn extract_all(
    config: &PipelineConfig,
    specs: &[(String, PhantomSpec)],
    time_point: Option<i64>,
) -> Vec<StudyFeatureVector> {
    specs
        .par_iter()
        .map(|(id, spec)| extract_phantom(config, spec, id, time_point))
        .collect()
}
