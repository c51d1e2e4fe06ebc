//! Tissue signature probability matrix: a sparse N-dimensional joint
//! histogram over quantized signatures, with entropy, uniformity and
//! multivariate mutual information over any subset of channels.
//!
//! Only occupied cells are stored. With G = 64 and five channels a dense
//! matrix would have 64^5 cells, while the number of occupied cells never
//! exceeds the number of ROI voxels.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::TissueSignature;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tspm {
    counts: BTreeMap<Vec<u16>, u64>,
    total: u64,
    g: u16,
    channel_subset: Vec<usize>,
}

/// Entropy, uniformity and (for two or more channels) mutual information of
/// one channel subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetFeatures {
    pub entropy: f64,
    pub uniformity: f64,
    pub mutual_information: Option<f64>,
}

/// Per-subset features keyed by channel indices, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubsetFeatureTable {
    pub entries: BTreeMap<Vec<usize>, SubsetFeatures>,
}

/// Channel-subset descriptor such as `"FLAIR+ADC"`.
pub fn subset_descriptor(subset: &[usize], names: &[String]) -> String {
    subset
        .iter()
        .map(|&i| names[i].as_str())
        .collect::<Vec<_>>()
        .join("+")
}

fn check_subset(subset: &[usize], n_channels: usize) -> Result<()> {
    let increasing = subset.windows(2).all(|w| w[0] < w[1]);
    if subset.is_empty() || !increasing || subset.iter().any(|&i| i >= n_channels) {
        return Err(Error::InvalidSubset {
            subset: subset.to_vec(),
            available: n_channels,
        });
    }
    Ok(())
}

/// Sorts projected keys and run-length counts them into a map.
fn count_keys(mut keyed: Vec<(Vec<u16>, u64)>) -> BTreeMap<Vec<u16>, u64> {
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Vec<u16>, u64)> = Vec::new();
    for (key, c) in keyed {
        match merged.last_mut() {
            Some((last, n)) if *last == key => *n += c,
            _ => merged.push((key, c)),
        }
    }
    merged.into_iter().collect()
}

impl Tspm {
    pub fn counts(&self) -> &BTreeMap<Vec<u16>, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn g(&self) -> u16 {
        self.g
    }

    pub fn channel_subset(&self) -> &[usize] {
        &self.channel_subset
    }

    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    /// Cell probabilities in key order.
    fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        let total = self.total as f64;
        self.counts.values().map(move |&c| c as f64 / total)
    }

    /// Joint entropy in bits; empty cells contribute nothing.
    pub fn entropy(&self) -> f64 {
        // 0 - x keeps a deterministic distribution at +0.0
        0.0 - self
            .probabilities()
            .map(|p| if p > 0.0 { p * p.log2() } else { 0.0 })
            .sum::<f64>()
    }

    /// Sum of squared cell probabilities.
    pub fn uniformity(&self) -> f64 {
        self.probabilities().map(|p| p * p).sum()
    }

    /// Interaction information over this matrix's channels:
    /// `MI = sum over non-empty T of (-1)^(|T|+1) H(X_T)`.
    ///
    /// For two channels this is `H(X1) + H(X2) - H(X1, X2)`. For three or more
    /// the value can be negative.
    pub fn mutual_information(&self) -> Result<f64> {
        let m = self.channel_subset.len();
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "mutual information needs at least 2 channels, got {m}"
            )));
        }
        let mut mi = 0.0;
        for mask in 1u64..(1u64 << m) {
            let sub: Vec<usize> = (0..m)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| self.channel_subset[b])
                .collect();
            let h = self.marginalize(&sub)?.entropy();
            if sub.len() % 2 == 1 {
                mi += h;
            } else {
                mi -= h;
            }
        }
        Ok(mi)
    }

    /// Sums counts over the channels not in `subset`. `subset` uses the same
    /// global channel indices as [`Tspm::channel_subset`].
    pub fn marginalize(&self, subset: &[usize]) -> Result<Tspm> {
        let positions: Option<Vec<usize>> = subset
            .iter()
            .map(|c| self.channel_subset.iter().position(|x| x == c))
            .collect();
        let positions = match positions {
            Some(p) if !p.is_empty() && subset.windows(2).all(|w| w[0] < w[1]) => p,
            _ => {
                return Err(Error::InvalidSubset {
                    subset: subset.to_vec(),
                    available: self.channel_subset.len(),
                })
            }
        };
        if positions.len() == self.channel_subset.len() {
            return Ok(self.clone());
        }
        let keyed = self
            .counts
            .iter()
            .map(|(k, &c)| (positions.iter().map(|&p| k[p]).collect(), c))
            .collect();
        Ok(Tspm {
            counts: count_keys(keyed),
            total: self.total,
            g: self.g,
            channel_subset: subset.to_vec(),
        })
    }
}

/// Counts how often each signature (restricted to `subset`) occurs.
pub fn build_tspm(signatures: &[TissueSignature], g: u16, subset: &[usize]) -> Result<Tspm> {
    let first = signatures
        .first()
        .ok_or_else(|| Error::EmptyInput("no tissue signatures".into()))?;
    let n = first.levels.len();
    check_subset(subset, n)?;
    let mut keyed = Vec::with_capacity(signatures.len());
    for s in signatures {
        if s.levels.len() != n {
            return Err(Error::InvalidParameter(
                "signatures differ in length".into(),
            ));
        }
        let key: Vec<u16> = subset.iter().map(|&c| s.levels[c]).collect();
        if key.iter().any(|&l| l < 1 || l > g) {
            return Err(Error::InvalidParameter(format!(
                "signature at voxel {} has a level outside 1..={g}",
                s.position
            )));
        }
        keyed.push((key, 1));
    }
    Ok(Tspm {
        counts: count_keys(keyed),
        total: signatures.len() as u64,
        g,
        channel_subset: subset.to_vec(),
    })
}

/// All non-empty subsets of `0..n` with at most `max_size` members, in
/// lexicographic order.
pub fn enumerate_subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            if cur.len() < max {
                extend(i + 1, n, max, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, n, max_size, &mut Vec::new(), &mut out);
    out
}

/// Entropy and uniformity for every channel subset up to `max_subset_size`,
/// plus mutual information for subsets of two or more channels. All subsets
/// are derived by marginalizing one full joint histogram.
pub fn subset_features(
    signatures: &[TissueSignature],
    g: u16,
    max_subset_size: usize,
) -> Result<SubsetFeatureTable> {
    let first = signatures
        .first()
        .ok_or_else(|| Error::EmptyInput("no tissue signatures".into()))?;
    let n = first.levels.len();
    if max_subset_size < 1 || max_subset_size > n {
        return Err(Error::InvalidParameter(format!(
            "max_subset_size must be in 1..={n}, got {max_subset_size}"
        )));
    }
    let full_subset: Vec<usize> = (0..n).collect();
    let full = build_tspm(signatures, g, &full_subset)?;
    let subsets = enumerate_subsets(n, max_subset_size);

    let basic: BTreeMap<Vec<usize>, (f64, f64)> = subsets
        .par_iter()
        .map(|s| {
            let t = full.marginalize(s)?;
            Ok((s.clone(), (t.entropy(), t.uniformity())))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let mut table = SubsetFeatureTable::default();
    for s in &subsets {
        let (entropy, uniformity) = basic[s];
        let mutual_information = (s.len() >= 2).then(|| {
            let m = s.len();
            let mut mi = 0.0;
            for mask in 1u64..(1u64 << m) {
                let sub: Vec<usize> = (0..m)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| s[b])
                    .collect();
                let h = basic[&sub].0;
                if sub.len() % 2 == 1 {
                    mi += h;
                } else {
                    mi -= h;
                }
            }
            mi
        });
        table.entries.insert(
            s.clone(),
            SubsetFeatures {
                entropy,
                uniformity,
                mutual_information,
            },
        );
    }
    Ok(table)
}
