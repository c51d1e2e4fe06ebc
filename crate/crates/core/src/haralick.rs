//! The 22 Haralick-style statistics of a normalized co-occurrence matrix.
//!
//! Gray levels are 1-based. Entropies are in bits except inside IMC2, whose
//! exponential form assumes natural logarithms.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Feature roster in export order.
pub const HARALICK_FEATURES: [&str; 22] = [
    "energy",
    "contrast",
    "correlation",
    "sum_of_squares_variance",
    "homogeneity1",
    "homogeneity2",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "imc1",
    "imc2",
    "max_correlation_coefficient",
    "autocorrelation",
    "dissimilarity",
    "cluster_shade",
    "cluster_prominence",
    "max_probability",
    "inverse_difference_normalized",
    "inverse_difference_moment_normalized",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaralickFeatureSet {
    /// Angular second moment.
    pub energy: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub sum_of_squares_variance: f64,
    /// Inverse difference, `p / (1 + |i - j|)`.
    pub homogeneity1: f64,
    /// Inverse difference moment, `p / (1 + (i - j)^2)`.
    pub homogeneity2: f64,
    pub sum_average: f64,
    pub sum_variance: f64,
    pub sum_entropy: f64,
    pub entropy: f64,
    pub difference_variance: f64,
    pub difference_entropy: f64,
    pub imc1: f64,
    pub imc2: f64,
    pub max_correlation_coefficient: f64,
    pub autocorrelation: f64,
    pub dissimilarity: f64,
    pub cluster_shade: f64,
    pub cluster_prominence: f64,
    pub max_probability: f64,
    pub inverse_difference_normalized: f64,
    pub inverse_difference_moment_normalized: f64,
}

impl HaralickFeatureSet {
    /// Values in [`HARALICK_FEATURES`] order.
    pub fn values(&self) -> [f64; 22] {
        [
            self.energy,
            self.contrast,
            self.correlation,
            self.sum_of_squares_variance,
            self.homogeneity1,
            self.homogeneity2,
            self.sum_average,
            self.sum_variance,
            self.sum_entropy,
            self.entropy,
            self.difference_variance,
            self.difference_entropy,
            self.imc1,
            self.imc2,
            self.max_correlation_coefficient,
            self.autocorrelation,
            self.dissimilarity,
            self.cluster_shade,
            self.cluster_prominence,
            self.max_probability,
            self.inverse_difference_normalized,
            self.inverse_difference_moment_normalized,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        HARALICK_FEATURES.into_iter().zip(self.values())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.named().find(|(n, _)| *n == name).map(|(_, v)| v)
    }
}

fn entropy_bits(ps: impl IntoIterator<Item = f64>) -> f64 {
    0.0 - ps
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Square root of the second-largest eigenvalue of
/// `Q(i, j) = sum_k p(i,k) p(j,k) / (px(i) py(k))`.
///
/// `Q` is similar to the symmetric matrix `B B^T` with
/// `B(i,k) = p(i,k) / sqrt(px(i) py(k))`, so the symmetric eigensolver is used
/// on rows and columns with non-zero marginals.
fn max_correlation_coefficient(p: &[f64], g: usize, px: &[f64], py: &[f64]) -> f64 {
    let rows: Vec<usize> = (0..g).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..g).filter(|&k| py[k] > 0.0).collect();
    if rows.len() < 2 || cols.is_empty() {
        return 0.0;
    }
    let b = DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (i, k) = (rows[r], cols[c]);
        p[i * g + k] / (px[i] * py[k]).sqrt()
    });
    let bbt = &b * b.transpose();
    let mut eig: Vec<f64> = SymmetricEigen::new(bbt)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[1].clamp(0.0, 1.0).sqrt()
}

/// Computes all 22 features from a row-major `g x g` probability matrix.
pub fn haralick_from_probabilities(p: &[f64], g: usize) -> Result<HaralickFeatureSet> {
    if g == 0 || p.len() != g * g {
        return Err(Error::InvalidParameter(format!(
            "probability matrix has {} cells, expected {}",
            p.len(),
            g * g
        )));
    }
    let mass: f64 = p.iter().sum();
    if mass.is_nan() || mass <= 0.0 {
        return Err(Error::EmptyInput("co-occurrence matrix is empty".into()));
    }
    let gf = g as f64;
    let level = |i: usize| (i + 1) as f64;

    let mut px = vec![0.0; g];
    let mut py = vec![0.0; g];
    let mut p_sum = vec![0.0; 2 * g - 1]; // index k  <->  i + j = k + 2
    let mut p_diff = vec![0.0; g]; // index k  <->  |i - j| = k
    for i in 0..g {
        for j in 0..g {
            let v = p[i * g + j];
            px[i] += v;
            py[j] += v;
            p_sum[i + j] += v;
            p_diff[i.abs_diff(j)] += v;
        }
    }

    let mu_x: f64 = px.iter().enumerate().map(|(i, &v)| level(i) * v).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, &v)| level(j) * v).sum();
    let var_x: f64 = px
        .iter()
        .enumerate()
        .map(|(i, &v)| (level(i) - mu_x).powi(2) * v)
        .sum();
    let var_y: f64 = py
        .iter()
        .enumerate()
        .map(|(j, &v)| (level(j) - mu_y).powi(2) * v)
        .sum();

    let mut f = HaralickFeatureSet::default();
    let mut cross = 0.0;
    let mut max_p: f64 = 0.0;
    for i in 0..g {
        for j in 0..g {
            let v = p[i * g + j];
            let (li, lj) = (level(i), level(j));
            let diff = li - lj;
            let adiff = diff.abs();
            let cluster = li + lj - mu_x - mu_y;
            f.energy += v * v;
            f.contrast += diff * diff * v;
            f.homogeneity1 += v / (1.0 + adiff);
            f.homogeneity2 += v / (1.0 + diff * diff);
            f.autocorrelation += li * lj * v;
            f.dissimilarity += adiff * v;
            f.cluster_shade += cluster.powi(3) * v;
            f.cluster_prominence += cluster.powi(4) * v;
            f.inverse_difference_normalized += v / (1.0 + adiff / gf);
            f.inverse_difference_moment_normalized += v / (1.0 + diff * diff / (gf * gf));
            cross += (li - mu_x) * (lj - mu_y) * v;
            max_p = max_p.max(v);
        }
    }
    f.max_probability = max_p;
    f.sum_of_squares_variance = var_x;
    f.correlation = if var_x > 0.0 && var_y > 0.0 {
        (cross / (var_x * var_y).sqrt()).clamp(-1.0, 1.0)
    } else {
        1.0
    };

    f.sum_average = p_sum
        .iter()
        .enumerate()
        .map(|(k, &v)| (k + 2) as f64 * v)
        .sum();
    f.sum_variance = p_sum
        .iter()
        .enumerate()
        .map(|(k, &v)| ((k + 2) as f64 - f.sum_average).powi(2) * v)
        .sum();
    f.sum_entropy = entropy_bits(p_sum.iter().copied());
    f.entropy = entropy_bits(p.iter().copied());
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    f.difference_variance = p_diff
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - diff_mean).powi(2) * v)
        .sum();
    f.difference_entropy = entropy_bits(p_diff.iter().copied());

    // information measures of correlation, in nats
    let ln_entropy = |ps: &[f64]| -> f64 {
        0.0 - ps
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    };
    let hx = ln_entropy(&px);
    let hy = ln_entropy(&py);
    let hxy = ln_entropy(p);
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..g {
        for j in 0..g {
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= p[i * g + j] * q.ln();
                hxy2 -= q * q.ln();
            }
        }
    }
    let hmax = hx.max(hy);
    f.imc1 = if hmax > 0.0 { (hxy - hxy1) / hmax } else { 0.0 };
    f.imc2 = (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt();
    f.max_correlation_coefficient = max_correlation_coefficient(p, g, &px, &py);
    Ok(f)
}
