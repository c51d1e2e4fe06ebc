//! Group statistics: mean/SEM summaries, Welch's t-test, ROC curves with
//! Mann–Whitney AUC, confusion metrics and time-point feature deltas.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::StudyFeatureVector;
use crate::special::student_t_two_sided;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1) over sqrt(n).
    pub sem: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n < 2 {
        return Err(Error::GroupTooSmall(format!(
            "need at least 2 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(Summary {
        mean,
        sem: (var / nf).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Welch's unequal-variance t-test, two-sided.
///
/// Two constant groups with equal means give `t = 0, p = 1`; constant groups
/// with different means give an infinite `t` and `p = 0`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::GroupTooSmall(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TTest {
                t: 0.0,
                p: 1.0,
                df: na + nb - 2.0,
            }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                p: 0.0,
                df: na + nb - 2.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df),
        df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>=` this value are called positive; `None` for the origin.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!(
            "score {s} is not a number"
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!(
            "{pos} positive, {neg} negative"
        )));
    }
    Ok((pos, neg))
}

/// ROC curve swept over unique thresholds in descending order, with AUC by
/// the trapezoid rule. Tied scores move both rates at once, which gives them
/// half credit.
///
/// The trapezoid area is accumulated in integer units of `1 / (2 n+ n-)`, so
/// the AUC is bit-identical to [`mann_whitney_auc`].
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area2 = 0u64;
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]].total_cmp(&threshold) == Ordering::Equal {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: Some(threshold),
        });
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2 * pos * neg) as f64,
    })
}

/// `U / (n+ n-)`, counting each tied positive/negative pair as one half.
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut u2 = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            u2 += match si.total_cmp(&sj) {
                Ordering::Greater => 2,
                Ordering::Equal => 1,
                Ordering::Less => 0,
            };
        }
    }
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

pub fn confusion_metrics(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidParameter(
            "predictions and labels differ in length".into(),
        ));
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    if tp + fneg == 0 || tn + fp == 0 {
        return Err(Error::SingleClass(format!(
            "{} positive and {} negative labels",
            tp + fneg,
            tn + fp
        )));
    }
    Ok(ConfusionMetrics {
        sensitivity: tp as f64 / (tp + fneg) as f64,
        specificity: tn as f64 / (tn + fp) as f64,
        accuracy: (tp + tn) as f64 / labels.len() as f64,
    })
}

/// Per-feature change `t2 - t1` for one study. The label comes from `t2`.
pub fn delta_features(
    t1: &StudyFeatureVector,
    t2: &StudyFeatureVector,
) -> Result<StudyFeatureVector> {
    if t1.study_id != t2.study_id {
        return Err(Error::StudyMismatch(
            t1.study_id.clone(),
            t2.study_id.clone(),
        ));
    }
    if t1.names != t2.names {
        return Err(Error::FeatureMismatch(format!(
            "study '{}' has different features at the two time points",
            t1.study_id
        )));
    }
    Ok(StudyFeatureVector {
        study_id: t2.study_id.clone(),
        names: t2.names.clone(),
        values: t1
            .values
            .iter()
            .zip(&t2.values)
            .map(|(a, b)| b - a)
            .collect(),
        label: t2.label.clone(),
        time_point: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Larger values indicate group b.
    HigherInB,
    /// Smaller values indicate group b; the AUC was computed on negated values.
    LowerInB,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::HigherInB => "higher_in_b",
            Orientation::LowerInB => "lower_in_b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureComparison {
    pub feature: String,
    pub a: Summary,
    pub b: Summary,
    pub t: f64,
    pub p: f64,
    pub auc: f64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub rows: Vec<FeatureComparison>,
}

/// Column order of the comparison CSV.
pub const COMPARISON_COLUMNS: [&str; 9] = [
    "feature",
    "mean_a",
    "sem_a",
    "mean_b",
    "sem_b",
    "t",
    "p",
    "auc",
    "orientation",
];

/// Per-feature summaries, Welch t-test (a minus b) and single-feature AUC with
/// group b as the positive class, flipped so that AUC >= 0.5.
pub fn group_compare(
    a: &[StudyFeatureVector],
    b: &[StudyFeatureVector],
) -> Result<GroupComparison> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::GroupTooSmall(format!(
            "groups have {} and {} studies; need at least 2 each",
            a.len(),
            b.len()
        )));
    }
    let names = &a[0].names;
    if let Some(bad) = a.iter().chain(b).find(|r| &r.names != names) {
        return Err(Error::FeatureMismatch(format!(
            "study '{}' has a different feature list",
            bad.study_id
        )));
    }
    let mut labels = vec![false; a.len()];
    labels.extend(std::iter::repeat_n(true, b.len()));
    let rows = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let va: Vec<f64> = a.iter().map(|r| r.values[k]).collect();
            let vb: Vec<f64> = b.iter().map(|r| r.values[k]).collect();
            let test = welch_t_test(&va, &vb)?;
            let scores: Vec<f64> = va.iter().chain(&vb).copied().collect();
            let auc = roc_auc(&scores, &labels)?.auc;
            let (auc, orientation) = if auc >= 0.5 {
                (auc, Orientation::HigherInB)
            } else {
                let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
                (roc_auc(&flipped, &labels)?.auc, Orientation::LowerInB)
            };
            Ok(FeatureComparison {
                feature: name.clone(),
                a: summarize(&va)?,
                b: summarize(&vb)?,
                t: test.t,
                p: test.p,
                auc,
                orientation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupComparison { rows })
}

impl GroupComparison {
    pub fn get(&self, feature: &str) -> Option<&FeatureComparison> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
        w.write_record(COMPARISON_COLUMNS).map_err(to_err)?;
        for r in &self.rows {
            w.write_record([
                r.feature.clone(),
                format!("{}", r.a.mean),
                format!("{}", r.a.sem),
                format!("{}", r.b.mean),
                format!("{}", r.b.sem),
                format!("{}", r.t),
                format!("{}", r.p),
                format!("{}", r.auc),
                r.orientation.as_str().to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::Numerical(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
