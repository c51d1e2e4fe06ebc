//! Co-registered multi-channel volumes, ROI masks and G-level quantization.
//!
//! On disk a stack is a JSON manifest plus one raw little-endian `f32` file
//! per channel; a mask is one byte per voxel (nonzero = inside). Both use
//! raster order with x fastest, then y, then z. Channel and mask paths in a
//! manifest are relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel counts along x, y and z.
pub type Dims = [usize; 3];

/// Level stored for voxels outside the ROI.
pub const OUTSIDE: u16 = 0;

pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

/// Linear raster index of `(x, y, z)`.
#[inline]
pub fn raster_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub voxels: Vec<f32>,
}

/// N co-registered scalar volumes sharing one voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeStack {
    channels: Vec<Channel>,
    dims: Dims,
    spacing: [f64; 3],
}

impl VolumeStack {
    pub fn new(channels: Vec<Channel>, dims: Dims, spacing: [f64; 3]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyInput("stack has no channels".into()));
        }
        if voxel_count(dims) == 0 {
            return Err(Error::InvalidParameter(format!("zero-sized dims {dims:?}")));
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if ch.name.trim().is_empty() {
                return Err(Error::InvalidChannel("empty channel name".into()));
            }
            if !seen.insert(ch.name.as_str()) {
                return Err(Error::DuplicateChannel(ch.name.clone()));
            }
            if ch.voxels.len() != voxel_count(dims) {
                return Err(Error::InvalidParameter(format!(
                    "channel '{}' has {} voxels, dims {:?} need {}",
                    ch.name,
                    ch.voxels.len(),
                    dims,
                    voxel_count(dims)
                )));
            }
            if let Some(index) = ch.voxels.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    channel: ch.name.clone(),
                    index,
                });
            }
        }
        Ok(Self {
            channels,
            dims,
            spacing,
        })
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }
}

/// Binary region of interest over a voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask {
    dims: Dims,
    inside: Vec<bool>,
    label: String,
}

impl RoiMask {
    pub fn new(dims: Dims, inside: Vec<bool>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if inside.len() != voxel_count(dims) {
            return Err(Error::InvalidParameter(format!(
                "mask has {} voxels, dims {:?} need {}",
                inside.len(),
                dims,
                voxel_count(dims)
            )));
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyMask(label));
        }
        Ok(Self {
            dims,
            inside,
            label,
        })
    }

    /// Mask covering every voxel of the grid.
    pub fn full(dims: Dims, label: impl Into<String>) -> Result<Self> {
        Self::new(dims, vec![true; voxel_count(dims)], label)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Raster indices of inside voxels, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

fn check_dims(expected: Dims, found: Dims) -> Result<()> {
    if expected != found {
        return Err(Error::DimsMismatch { expected, found });
    }
    Ok(())
}

/// Per-voxel quantized levels in `1..=G` for ROI voxels, [`OUTSIDE`] elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedStack {
    dims: Dims,
    levels: Vec<Vec<u16>>,
    g: u16,
    ranges: Vec<(f64, f64)>,
}

impl QuantizedStack {
    /// Builds a stack from precomputed levels. Every in-ROI level must lie in
    /// `1..=G`; voxels outside the ROI are reset to [`OUTSIDE`].
    pub fn from_levels(
        dims: Dims,
        g: u16,
        mut levels: Vec<Vec<u16>>,
        roi: &RoiMask,
    ) -> Result<Self> {
        check_dims(dims, roi.dims())?;
        if g < 2 {
            return Err(Error::InvalidParameter(format!("G must be >= 2, got {g}")));
        }
        if levels.is_empty() {
            return Err(Error::EmptyInput("no channels".into()));
        }
        for ch in levels.iter_mut() {
            if ch.len() != voxel_count(dims) {
                return Err(Error::InvalidParameter("level array size mismatch".into()));
            }
            for (i, l) in ch.iter_mut().enumerate() {
                if roi.contains(i) {
                    if *l < 1 || *l > g {
                        return Err(Error::InvalidParameter(format!(
                            "level {l} at voxel {i} outside 1..={g}"
                        )));
                    }
                } else {
                    *l = OUTSIDE;
                }
            }
        }
        let ranges = vec![(1.0, g as f64); levels.len()];
        Ok(Self {
            dims,
            levels,
            g,
            ranges,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn g(&self) -> u16 {
        self.g
    }

    pub fn n_channels(&self) -> usize {
        self.levels.len()
    }

    pub fn channel(&self, c: usize) -> &[u16] {
        &self.levels[c]
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }
}

/// Quantized level vector at one voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TissueSignature {
    pub position: usize,
    pub levels: Vec<u16>,
}

/// Uniform G-level binning of every channel over its in-ROI range.
///
/// `level = floor(G * (v - min) / (max - min)) + 1`, clamped to `1..=G`; a
/// channel that is constant inside the ROI maps to level 1.
pub fn quantize(stack: &VolumeStack, roi: &RoiMask, g: usize) -> Result<QuantizedStack> {
    if g < 2 {
        return Err(Error::InvalidParameter(format!("G must be >= 2, got {g}")));
    }
    if g > u16::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "G must be <= {}, got {g}",
            u16::MAX
        )));
    }
    check_dims(stack.dims(), roi.dims())?;

    let mut levels = Vec::with_capacity(stack.n_channels());
    let mut ranges = Vec::with_capacity(stack.n_channels());
    for ch in stack.channels() {
        let (lo, hi) = roi
            .indices()
            .map(|i| ch.voxels[i] as f64)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let width = hi - lo;
        let gf = g as f64;
        let mut out = vec![OUTSIDE; ch.voxels.len()];
        for i in roi.indices() {
            out[i] = if width > 0.0 {
                let v = ch.voxels[i] as f64;
                let bin = (gf * (v - lo) / width).floor() as i64 + 1;
                bin.clamp(1, g as i64) as u16
            } else {
                1
            };
        }
        levels.push(out);
        ranges.push((lo, hi));
    }
    Ok(QuantizedStack {
        dims: stack.dims(),
        levels,
        g: g as u16,
        ranges,
    })
}

/// One signature per in-ROI voxel in raster order.
pub fn extract_signatures(q: &QuantizedStack, roi: &RoiMask) -> Result<Vec<TissueSignature>> {
    check_dims(q.dims(), roi.dims())?;
    Ok(roi
        .indices()
        .map(|position| TissueSignature {
            position,
            levels: q.levels.iter().map(|ch| ch[position]).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestChannel {
    pub name: String,
    pub path: String,
}

/// JSON manifest describing a stack on disk.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub dims: Dims,
    pub spacing: [f64; 3],
    pub channels: Vec<ManifestChannel>,
}

fn read_raw(path: &Path, dims: Dims, elem_size: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (voxel_count(dims) * elem_size) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            dims,
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

/// Reads little-endian `f32` voxels, allowing non-finite values.
pub fn read_f32_volume(path: &Path, dims: Dims) -> Result<Vec<f32>> {
    let bytes = read_raw(path, dims, 4)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_f32_volume(path: &Path, voxels: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(voxels.len() * 4);
    for v in voxels {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_stack(manifest_path: &Path) -> Result<VolumeStack> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut channels = Vec::with_capacity(manifest.channels.len());
    for entry in &manifest.channels {
        if !seen.insert(entry.name.as_str()) {
            return Err(Error::DuplicateChannel(entry.name.clone()));
        }
        let voxels = read_f32_volume(&base.join(&entry.path), manifest.dims)?;
        channels.push(Channel {
            name: entry.name.clone(),
            voxels,
        });
    }
    VolumeStack::new(channels, manifest.dims, manifest.spacing)
}

fn channel_file_name(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("ch{index}_{clean}.f32")
}

/// Writes `manifest_name` plus one raw file per channel into `dir`.
pub fn save_stack(stack: &VolumeStack, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(stack.n_channels());
    for (i, ch) in stack.channels().iter().enumerate() {
        let file = channel_file_name(i, &ch.name);
        write_f32_volume(&dir.join(&file), &ch.voxels)?;
        entries.push(ManifestChannel {
            name: ch.name.clone(),
            path: file,
        });
    }
    let manifest = Manifest {
        dims: stack.dims(),
        spacing: stack.spacing(),
        channels: entries,
    };
    let path = dir.join(manifest_name);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_mask(path: &Path, expected_dims: Dims) -> Result<RoiMask> {
    let bytes = read_raw(path, expected_dims, 1)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RoiMask::new(
        expected_dims,
        bytes.iter().map(|&b| b != 0).collect(),
        label,
    )
}

pub fn save_mask(mask: &RoiMask, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = mask.inside().iter().map(|&b| b as u8).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
