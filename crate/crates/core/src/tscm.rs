//! Tissue signature co-occurrence matrices.
//!
//! For a spatial offset, every pair of ROI voxels `(i, j)` separated by that
//! offset contributes, for each channel `r`, one count at
//! `(level_i(r), level_j(r))`. The multichannel matrix is therefore the sum
//! of the per-channel gray-level co-occurrence matrices. Offsets are in-plane
//! (z fixed) and accumulated over all slices; the matrix is symmetrized by
//! adding its transpose before normalization.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haralick::{haralick_from_probabilities, HaralickFeatureSet, HARALICK_FEATURES};
use crate::tsfos::{tsfos_features, TissueSignatureHistogram, TSFOS_FEATURES};
use crate::tspm::build_tspm;
use crate::volume::{
    raster_index, write_f32_volume, Dims, QuantizedStack, RoiMask, TissueSignature,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Angle {
    #[serde(rename = "0")]
    Deg0,
    #[serde(rename = "45")]
    Deg45,
    #[serde(rename = "90")]
    Deg90,
    #[serde(rename = "135")]
    Deg135,
}

impl Angle {
    pub const ALL: [Angle; 4] = [Angle::Deg0, Angle::Deg45, Angle::Deg90, Angle::Deg135];

    /// In-plane `(dx, dy)` offset for distance `d`.
    pub fn offset(self, d: usize) -> (isize, isize) {
        let d = d as isize;
        match self {
            Angle::Deg0 => (d, 0),
            Angle::Deg45 => (d, -d),
            Angle::Deg90 => (0, -d),
            Angle::Deg135 => (-d, -d),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Angle::Deg0 => 0,
            Angle::Deg45 => 45,
            Angle::Deg90 => 90,
            Angle::Deg135 => 135,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.degrees())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tscm {
    /// Directed pair counts before symmetrization, row-major `G x G`.
    pub raw: Vec<u64>,
    /// `raw + raw^T`.
    pub counts: Vec<u64>,
    pub normalized: Vec<f64>,
    pub g: usize,
    pub d: usize,
    pub angle: Angle,
}

impl Tscm {
    pub fn from_raw(raw: Vec<u64>, g: usize, d: usize, angle: Angle) -> Result<Self> {
        let mut counts = vec![0u64; g * g];
        for m in 0..g {
            for n in 0..g {
                counts[m * g + n] = raw[m * g + n] + raw[n * g + m];
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyCooccurrence {
                d,
                angle: angle.to_string(),
            });
        }
        let normalized = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            raw,
            counts,
            normalized,
            g,
            d,
            angle,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Inclusive voxel box `[lo, hi]` per axis.
#[derive(Debug, Clone, Copy)]
struct Region {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Region {
    fn whole(dims: Dims) -> Self {
        Self {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    fn around(dims: Dims, center: [usize; 3], radius: usize) -> Self {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = center[a].saturating_sub(radius);
            hi[a] = (center[a] + radius).min(dims[a] - 1);
        }
        Self { lo, hi }
    }
}

/// Directed co-occurrence counts over pairs with both voxels inside `region`
/// and the ROI.
fn accumulate(
    q: &QuantizedStack,
    roi: &RoiMask,
    region: Region,
    d: usize,
    angle: Angle,
) -> Vec<u64> {
    let g = q.g() as usize;
    let dims = q.dims();
    let (dx, dy) = angle.offset(d);
    let slice = |z: usize| -> Vec<u64> {
        let mut m = vec![0u64; g * g];
        for y in region.lo[1]..=region.hi[1] {
            let ny = y as isize + dy;
            if ny < region.lo[1] as isize || ny > region.hi[1] as isize {
                continue;
            }
            for x in region.lo[0]..=region.hi[0] {
                let nx = x as isize + dx;
                if nx < region.lo[0] as isize || nx > region.hi[0] as isize {
                    continue;
                }
                let i = raster_index(dims, x, y, z);
                let j = raster_index(dims, nx as usize, ny as usize, z);
                if !roi.contains(i) || !roi.contains(j) {
                    continue;
                }
                for c in 0..q.n_channels() {
                    let ch = q.channel(c);
                    let a = ch[i] as usize - 1;
                    let b = ch[j] as usize - 1;
                    m[a * g + b] += 1;
                }
            }
        }
        m
    };
    let slices = region.hi[2] - region.lo[2] + 1;
    let merge = |mut a: Vec<u64>, b: Vec<u64>| {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        a
    };
    if slices > 1 && region.lo == [0; 3] {
        // whole-volume accumulation; integer merge is order independent
        (region.lo[2]..=region.hi[2])
            .into_par_iter()
            .map(slice)
            .reduce(|| vec![0u64; g * g], merge)
    } else {
        (region.lo[2]..=region.hi[2])
            .map(slice)
            .fold(vec![0u64; g * g], merge)
    }
}

fn check_inputs(q: &QuantizedStack, roi: &RoiMask, d: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::InvalidParameter(
            "offset distance d must be >= 1".into(),
        ));
    }
    if q.dims() != roi.dims() {
        return Err(Error::DimsMismatch {
            expected: q.dims(),
            found: roi.dims(),
        });
    }
    Ok(())
}

pub fn build_tscm(q: &QuantizedStack, roi: &RoiMask, d: usize, angle: Angle) -> Result<Tscm> {
    check_inputs(q, roi, d)?;
    let raw = accumulate(q, roi, Region::whole(q.dims()), d, angle);
    Tscm::from_raw(raw, q.g() as usize, d, angle)
}

pub fn haralick_features(t: &Tscm) -> Result<HaralickFeatureSet> {
    haralick_from_probabilities(&t.normalized, t.g)
}

/// Haralick features at each requested angle.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalSummary {
    pub per_angle: Vec<(Angle, HaralickFeatureSet)>,
}

impl DirectionalSummary {
    pub fn mean(&self, feature: &str) -> Option<f64> {
        let vals = self.angle_values(feature)?;
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn angle_values(&self, feature: &str) -> Option<Vec<f64>> {
        let idx = HARALICK_FEATURES.iter().position(|&n| n == feature)?;
        Some(
            self.per_angle
                .iter()
                .map(|(_, f)| f.values()[idx])
                .collect(),
        )
    }

    /// Column suffixes in export order: `mean`, one per angle in degrees,
    /// then `range` (max minus min over angles).
    pub fn suffixes(&self) -> Vec<String> {
        let mut out = vec!["mean".to_string()];
        out.extend(self.per_angle.iter().map(|(a, _)| a.degrees().to_string()));
        out.push("range".to_string());
        out
    }

    /// `(feature_suffix, value)` pairs: for each feature in roster order, one
    /// entry per element of [`DirectionalSummary::suffixes`].
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(HARALICK_FEATURES.len() * (self.per_angle.len() + 2));
        for (idx, name) in HARALICK_FEATURES.iter().enumerate() {
            let vals: Vec<f64> = self
                .per_angle
                .iter()
                .map(|(_, f)| f.values()[idx])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            out.push((format!("{name}_mean"), mean));
            for ((a, _), v) in self.per_angle.iter().zip(&vals) {
                out.push((format!("{name}_{}", a.degrees()), *v));
            }
            out.push((format!("{name}_range"), max - min));
        }
        out
    }
}

/// Per-angle Haralick features for the given angles (duplicates are
/// ignored; output follows the order of first appearance).
pub fn directional_summary(
    q: &QuantizedStack,
    roi: &RoiMask,
    d: usize,
    angles: &[Angle],
) -> Result<DirectionalSummary> {
    check_inputs(q, roi, d)?;
    let mut unique: Vec<Angle> = Vec::new();
    for &a in angles {
        if !unique.contains(&a) {
            unique.push(a);
        }
    }
    if unique.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one angle is required".into(),
        ));
    }
    let sets: Vec<HaralickFeatureSet> = unique
        .par_iter()
        .map(|&a| haralick_features(&build_tscm(q, roi, d, a)?))
        .collect::<Result<_>>()?;
    Ok(DirectionalSummary {
        per_angle: unique.into_iter().zip(sets).collect(),
    })
}

/// A single feature evaluated over a sliding cubic window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapVolume {
    pub dims: Dims,
    /// `NaN` where the feature is undefined.
    pub values: Vec<f64>,
    pub window_radius: usize,
    pub d: usize,
    pub feature_name: String,
}

#[derive(Debug, Clone, Copy)]
enum MapFeature {
    Haralick(usize),
    TspmEntropy,
    TspmUniformity,
    TspmMutualInformation,
    Tsfos(&'static str),
}

fn parse_map_feature(name: &str) -> Result<MapFeature> {
    let unknown = || Error::UnknownFeature(name.to_string());
    if let Some(rest) = name.strip_prefix("TSPM_") {
        return match rest {
            "entropy" => Ok(MapFeature::TspmEntropy),
            "uniformity" => Ok(MapFeature::TspmUniformity),
            "mutual_information" | "mi" => Ok(MapFeature::TspmMutualInformation),
            _ => Err(unknown()),
        };
    }
    if let Some(rest) = name.strip_prefix("TSFOS_") {
        return TSFOS_FEATURES
            .iter()
            .find(|&&n| n == rest)
            .map(|&n| MapFeature::Tsfos(n))
            .ok_or_else(unknown);
    }
    let bare = name.strip_prefix("TSCM_").unwrap_or(name);
    let bare = bare.strip_suffix("_mean").unwrap_or(bare);
    HARALICK_FEATURES
        .iter()
        .position(|&n| n == bare)
        .map(MapFeature::Haralick)
        .ok_or_else(unknown)
}

fn window_value(
    q: &QuantizedStack,
    roi: &RoiMask,
    region: Region,
    d: usize,
    feature: MapFeature,
) -> Result<f64> {
    let dims = q.dims();
    let mut inside = Vec::new();
    for z in region.lo[2]..=region.hi[2] {
        for y in region.lo[1]..=region.hi[1] {
            for x in region.lo[0]..=region.hi[0] {
                let i = raster_index(dims, x, y, z);
                if roi.contains(i) {
                    inside.push(i);
                }
            }
        }
    }
    if inside.len() < 2 {
        return Ok(f64::NAN);
    }
    let signatures = || -> Vec<TissueSignature> {
        inside
            .iter()
            .map(|&i| TissueSignature {
                position: i,
                levels: (0..q.n_channels()).map(|c| q.channel(c)[i]).collect(),
            })
            .collect()
    };
    let all: Vec<usize> = (0..q.n_channels()).collect();
    match feature {
        MapFeature::Haralick(idx) => {
            let mut sum = 0.0;
            let mut used = 0;
            for angle in Angle::ALL {
                let raw = accumulate(q, roi, region, d, angle);
                if let Ok(t) = Tscm::from_raw(raw, q.g() as usize, d, angle) {
                    sum += haralick_features(&t)?.values()[idx];
                    used += 1;
                }
            }
            Ok(if used == 0 {
                f64::NAN
            } else {
                sum / used as f64
            })
        }
        MapFeature::TspmEntropy => Ok(build_tspm(&signatures(), q.g(), &all)?.entropy()),
        MapFeature::TspmUniformity => Ok(build_tspm(&signatures(), q.g(), &all)?.uniformity()),
        MapFeature::TspmMutualInformation => {
            build_tspm(&signatures(), q.g(), &all)?.mutual_information()
        }
        MapFeature::Tsfos(name) => {
            let values: Vec<f64> = inside
                .iter()
                .flat_map(|&i| (0..q.n_channels()).map(move |c| q.channel(c)[i] as f64))
                .collect();
            let tsh = TissueSignatureHistogram::from_values(&values, q.g() as usize)?;
            Ok(tsfos_features(&tsh)?.get(name).expect("roster name"))
        }
    }
}

/// Evaluates `feature_name` over the `(2w+1)^3` window around every ROI
/// voxel, clipped to the ROI. Co-occurrence features use the mean over the
/// angles that have at least one pair in the window.
pub fn feature_map(
    q: &QuantizedStack,
    roi: &RoiMask,
    feature_name: &str,
    window_radius: usize,
    d: usize,
) -> Result<FeatureMapVolume> {
    check_inputs(q, roi, d)?;
    if window_radius < 1 {
        return Err(Error::InvalidParameter("window radius must be >= 1".into()));
    }
    let feature = parse_map_feature(feature_name)?;
    if matches!(feature, MapFeature::TspmMutualInformation) && q.n_channels() < 2 {
        return Err(Error::InvalidParameter(
            "mutual information maps need at least 2 channels".into(),
        ));
    }
    let dims = q.dims();
    let values = (0..roi.inside().len())
        .into_par_iter()
        .map(|i| {
            if !roi.contains(i) {
                return Ok(f64::NAN);
            }
            let center = [
                i % dims[0],
                (i / dims[0]) % dims[1],
                i / (dims[0] * dims[1]),
            ];
            window_value(
                q,
                roi,
                Region::around(dims, center, window_radius),
                d,
                feature,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FeatureMapVolume {
        dims,
        values,
        window_radius,
        d,
        feature_name: feature_name.to_string(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureMapSidecar {
    pub feature: String,
    pub window_radius: usize,
    pub d: usize,
    pub dims: Dims,
    pub data: String,
    pub sentinel: String,
}

/// Writes `<stem>.f32` (raw little-endian, NaN outside the defined region) and
/// `<stem>.json` into `dir`.
pub fn save_feature_map(map: &FeatureMapVolume, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = format!("{stem}.f32");
    let voxels: Vec<f32> = map.values.iter().map(|&v| v as f32).collect();
    write_f32_volume(&dir.join(&data), &voxels)?;
    let sidecar = FeatureMapSidecar {
        feature: map.feature_name.clone(),
        window_radius: map.window_radius,
        d: map.d,
        dims: map.dims,
        data,
        sentinel: "NaN".into(),
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}
