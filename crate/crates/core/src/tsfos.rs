//! First-order statistics of the tissue signature histogram, the pooled
//! intensity histogram of every channel inside the ROI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{RoiMask, VolumeStack};

/// How channel intensities are brought onto a common axis before pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Each channel is min-max scaled to [0, 1] over its ROI voxels.
    #[default]
    PerChannel,
    /// Raw intensities are pooled as they are.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TissueSignatureHistogram {
    pub bins: Vec<u64>,
    pub range: (f64, f64),
    pub total: u64,
}

impl TissueSignatureHistogram {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Bins `values` into `b` equal-width bins over their own min/max.
    pub fn from_values(values: &[f64], b: usize) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidParameter(format!("B must be >= 2, got {b}")));
        }
        if values.is_empty() {
            return Err(Error::EmptyInput("no intensities to bin".into()));
        }
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let width = hi - lo;
        let mut bins = vec![0u64; b];
        for &v in values {
            let idx = if width > 0.0 {
                ((b as f64 * (v - lo) / width).floor() as i64).clamp(0, b as i64 - 1) as usize
            } else {
                0
            };
            bins[idx] += 1;
        }
        Ok(Self {
            bins,
            range: (lo, hi),
            total: values.len() as u64,
        })
    }
}

pub fn build_tsh(
    stack: &VolumeStack,
    roi: &RoiMask,
    b: usize,
    normalization: Normalization,
) -> Result<TissueSignatureHistogram> {
    if stack.dims() != roi.dims() {
        return Err(Error::DimsMismatch {
            expected: stack.dims(),
            found: roi.dims(),
        });
    }
    let indices: Vec<usize> = roi.indices().collect();
    if indices.is_empty() {
        return Err(Error::EmptyMask(roi.label().to_string()));
    }
    let mut pooled = Vec::with_capacity(indices.len() * stack.n_channels());
    for ch in stack.channels() {
        let values = indices.iter().map(|&i| ch.voxels[i] as f64);
        match normalization {
            Normalization::Pooled => pooled.extend(values),
            Normalization::PerChannel => {
                let (lo, hi) = values
                    .clone()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                let width = hi - lo;
                pooled.extend(values.map(|v| if width > 0.0 { (v - lo) / width } else { 0.0 }));
            }
        }
    }
    TissueSignatureHistogram::from_values(&pooled, b)
}

/// Feature names in export order.
pub const TSFOS_FEATURES: [&str; 9] = [
    "entropy",
    "uniformity",
    "energy",
    "mean",
    "variance",
    "skewness",
    "kurtosis",
    "min_bin_fraction",
    "max_bin_fraction",
];

/// Features beyond entropy, uniformity and energy.
pub const TSFOS_EXTENSIONS: [&str; 6] = [
    "mean",
    "variance",
    "skewness",
    "kurtosis",
    "min_bin_fraction",
    "max_bin_fraction",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsfosFeatures {
    pub entropy: f64,
    pub uniformity: f64,
    pub energy: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub min_bin_fraction: f64,
    pub max_bin_fraction: f64,
}

impl TsfosFeatures {
    /// `(name, value)` pairs in [`TSFOS_FEATURES`] order.
    pub fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("entropy", self.entropy),
            ("uniformity", self.uniformity),
            ("energy", self.energy),
            ("mean", self.mean),
            ("variance", self.variance),
            ("skewness", self.skewness),
            ("kurtosis", self.kurtosis),
            ("min_bin_fraction", self.min_bin_fraction),
            ("max_bin_fraction", self.max_bin_fraction),
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.named()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }
}

/// Moments use bin centers `(i + 0.5) / B` on the normalized axis. Skewness
/// and kurtosis (non-excess) are 0 when the variance is 0.
pub fn tsfos_features(tsh: &TissueSignatureHistogram) -> Result<TsfosFeatures> {
    if tsh.total == 0 {
        return Err(Error::EmptyInput("histogram is empty".into()));
    }
    let b = tsh.n_bins() as f64;
    let total = tsh.total as f64;
    let probs: Vec<f64> = tsh.bins.iter().map(|&c| c as f64 / total).collect();
    let center = |i: usize| (i as f64 + 0.5) / b;

    let entropy = 0.0
        - probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>();
    let uniformity: f64 = probs.iter().map(|p| p * p).sum();
    let mean: f64 = probs.iter().enumerate().map(|(i, p)| p * center(i)).sum();
    let central = |k: i32| -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * (center(i) - mean).powi(k))
            .sum()
    };
    let variance = central(2);
    let (skewness, kurtosis) = if variance > 0.0 {
        (
            central(3) / variance.powf(1.5),
            central(4) / (variance * variance),
        )
    } else {
        (0.0, 0.0)
    };
    let occupied = probs.iter().copied().filter(|&p| p > 0.0);
    let min_bin_fraction = occupied.clone().fold(f64::INFINITY, f64::min);
    let max_bin_fraction = occupied.fold(0.0, f64::max);

    Ok(TsfosFeatures {
        entropy,
        uniformity,
        energy: uniformity,
        mean,
        variance,
        skewness,
        kurtosis,
        min_bin_fraction,
        max_bin_fraction,
    })
}
