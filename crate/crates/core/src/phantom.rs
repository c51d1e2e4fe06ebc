//! Synthetic multichannel texture phantoms.
//!
//! Every channel is a linear response to one shared low-frequency field plus
//! a weaker channel-specific field, so channels are correlated as co-registered
//! MRI contrasts are. The smooth class adds mild Gaussian noise. The
//! heterogeneous class adds multi-scale block speckle and a low-intensity
//! core sphere on top of the same base.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with the spec seed,
//! one stream per component, so the smooth and heterogeneous phantoms with
//! the same seed share their base field and Gaussian noise exactly. The
//! smooth field is built from lattice values with polynomial interpolation
//! (no transcendental functions), which keeps volumes bit-identical across
//! platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{raster_index, voxel_count, Channel, Dims, RoiMask, VolumeStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Texture {
    Smooth,
    Heterogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub label: String,
    pub dims: Dims,
    pub channels: usize,
    pub texture: Texture,
    /// Dimensionless noise level; 1.0 is the reference amount.
    pub noise: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn new(
        label: impl Into<String>,
        dims: Dims,
        channels: usize,
        texture: Texture,
        seed: u64,
    ) -> Self {
        Self {
            label: label.into(),
            dims,
            channels,
            texture,
            noise: 1.0,
            seed,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        if self.channels == 0 {
            return Err(Error::InvalidParameter(
                "at least one channel is required".into(),
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

const BASE_LEVEL: f64 = 100.0;
const CHANNEL_STEP: f64 = 30.0;
const SHARED_AMPLITUDE: f64 = 20.0;
const OWN_AMPLITUDE: f64 = 3.0;
const GAUSSIAN_SIGMA: f64 = 2.0;
const SPECKLE_AMPLITUDE: f64 = 24.0;
const SPECKLE_SCALES: [usize; 3] = [1, 2, 4];
const CORE_OFFSET: f64 = -60.0;
const GAINS: [f64; 5] = [1.0, -0.8, 1.2, 0.6, -1.0];

// stream ids
const SHARED_FIELD: u64 = 0;
const GAUSSIAN: u64 = 1;
const CORE: u64 = 2;
const OWN_FIELD: u64 = 16;
const SPECKLE: u64 = 1024;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Smooth field in `[-1, 1]`: uniform values on a coarse lattice, blended
/// with the smoothstep polynomial.
fn smooth_field(dims: Dims, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cell: Vec<usize> = dims.iter().map(|&d| (d / 3).max(2)).collect();
    let nodes: Vec<usize> = dims
        .iter()
        .zip(&cell)
        .map(|(&d, &c)| (d - 1) / c + 2)
        .collect();
    let lattice: Vec<f64> = (0..nodes[0] * nodes[1] * nodes[2])
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let at = |x: usize, y: usize, z: usize| lattice[x + nodes[0] * (y + nodes[1] * z)];
    let split = |v: usize, axis: usize| {
        let c = cell[axis];
        let t = (v % c) as f64 / c as f64;
        (v / c, t * t * (3.0 - 2.0 * t))
    };
    let mut out = vec![0.0; voxel_count(dims)];
    for z in 0..dims[2] {
        let (z0, tz) = split(z, 2);
        for y in 0..dims[1] {
            let (y0, ty) = split(y, 1);
            for x in 0..dims[0] {
                let (x0, tx) = split(x, 0);
                let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
                let plane = |z: usize| {
                    lerp(
                        lerp(at(x0, y0, z), at(x0 + 1, y0, z), tx),
                        lerp(at(x0, y0 + 1, z), at(x0 + 1, y0 + 1, z), tx),
                        ty,
                    )
                };
                out[raster_index(dims, x, y, z)] = lerp(plane(z0), plane(z0 + 1), tz);
            }
        }
    }
    out
}

/// Piecewise-constant noise on cubes of side `scale`, values in `[-1, 1]`.
fn block_noise(dims: Dims, scale: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let blocks: Vec<usize> = dims.iter().map(|&d| d.div_ceil(scale)).collect();
    let values: Vec<f64> = (0..blocks[0] * blocks[1] * blocks[2])
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let mut out = vec![0.0; voxel_count(dims)];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let b = x / scale + blocks[0] * (y / scale + blocks[1] * (z / scale));
                out[raster_index(dims, x, y, z)] = values[b];
            }
        }
    }
    out
}

fn center(dims: Dims) -> [f64; 3] {
    dims.map(|d| (d as f64 - 1.0) / 2.0)
}

/// Centered ellipsoid with semi-axes `0.4 * dim` (at least half a voxel).
fn ellipsoid_roi(dims: Dims, label: &str) -> Result<RoiMask> {
    let c = center(dims);
    let r = dims.map(|d| (0.4 * d as f64).max(0.5));
    let mut inside = vec![false; voxel_count(dims)];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x as f64, y as f64, z as f64];
                let q: f64 = (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum();
                inside[raster_index(dims, x, y, z)] = q <= 1.0;
            }
        }
    }
    RoiMask::new(dims, inside, label)
}

fn core_mask(dims: Dims, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let c = center(dims);
    let shift: Vec<f64> = dims
        .iter()
        .map(|&d| rng.random_range(-0.1..=0.1) * d as f64)
        .collect();
    let radius = 0.15 * *dims.iter().max().expect("3 dims") as f64;
    let mut out = vec![false; voxel_count(dims)];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x as f64, y as f64, z as f64];
                let q: f64 = (0..3).map(|a| (p[a] - c[a] - shift[a]).powi(2)).sum();
                out[raster_index(dims, x, y, z)] = q <= radius * radius;
            }
        }
    }
    out
}

/// Builds the phantom volume stack and its ellipsoidal ROI.
pub fn generate(spec: &PhantomSpec) -> Result<(VolumeStack, RoiMask)> {
    spec.validate()?;
    let dims = spec.dims;
    let n = voxel_count(dims);
    let shared = smooth_field(dims, &mut rng(spec.seed, SHARED_FIELD));
    let mut gauss_rng = rng(spec.seed, GAUSSIAN);
    let normal = Normal::new(0.0, GAUSSIAN_SIGMA * spec.noise)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let core = match spec.texture {
        Texture::Heterogeneous => Some(core_mask(dims, &mut rng(spec.seed, CORE))),
        Texture::Smooth => None,
    };

    let mut channels = Vec::with_capacity(spec.channels);
    for c in 0..spec.channels {
        let own = smooth_field(dims, &mut rng(spec.seed, OWN_FIELD + c as u64));
        let gain = GAINS[c % GAINS.len()];
        let offset = BASE_LEVEL + CHANNEL_STEP * c as f64;
        let mut v: Vec<f64> = (0..n)
            .map(|i| offset + gain * SHARED_AMPLITUDE * shared[i] + OWN_AMPLITUDE * own[i])
            .collect();
        for x in v.iter_mut() {
            *x += normal.sample(&mut gauss_rng);
        }
        if let Some(core) = &core {
            for (k, &s) in SPECKLE_SCALES.iter().enumerate() {
                let stream = SPECKLE + (c * SPECKLE_SCALES.len() + k) as u64;
                let amp = SPECKLE_AMPLITUDE * spec.noise / (s as f64).sqrt();
                let blocks = block_noise(dims, s, &mut rng(spec.seed, stream));
                for (x, b) in v.iter_mut().zip(blocks) {
                    *x += amp * b;
                }
            }
            for (x, &inside) in v.iter_mut().zip(core) {
                if inside {
                    *x += CORE_OFFSET;
                }
            }
        }
        channels.push(Channel {
            name: format!("ch{}", c + 1),
            voxels: v.into_iter().map(|x| x as f32).collect(),
        });
    }
    let stack = VolumeStack::new(channels, dims, [1.0; 3])?;
    let roi = ellipsoid_roi(dims, &spec.label)?;
    Ok((stack, roi))
}
