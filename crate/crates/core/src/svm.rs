//! Soft-margin linear SVM trained on the dual by sequential minimal
//! optimization.
//!
//! Minimizes `0.5 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b))`. The dual is
//! `max sum a - 0.5 a^T Q a` with `Q_ij = y_i y_j x_i.x_j`, `0 <= a <= C`
//! and `y^T a = 0`. Pairs are chosen as the maximal KKT violators and the
//! loop stops when the violation drops below [`KKT_TOLERANCE`].

use serde::Serialize;

use crate::error::{Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-8;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn duality_gap(&self) -> f64 {
        self.primal_objective - self.dual_objective
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hinge_sum(margins: &[f64], ys: &[f64], b: f64) -> f64 {
    margins
        .iter()
        .zip(ys)
        .map(|(m, y)| (1.0 - y * (m + b)).max(0.0))
        .sum()
}

/// Bias minimizing the hinge sum for fixed `w`. The sum is convex and
/// piecewise linear in `b`, so its minimum is attained on the breakpoints
/// `y_i - w.x_i`; when several minimize it, the midpoint of the flat
/// segment is returned.
fn optimal_bias(margins: &[f64], ys: &[f64]) -> f64 {
    let mut cands: Vec<f64> = margins.iter().zip(ys).map(|(m, y)| y - m).collect();
    cands.sort_by(f64::total_cmp);
    let vals: Vec<f64> = cands.iter().map(|&b| hinge_sum(margins, ys, b)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * (1.0 + best.abs());
    let lo = cands[vals
        .iter()
        .position(|&v| v <= best + slack)
        .expect("non-empty")];
    let hi = cands[vals
        .iter()
        .rposition(|&v| v <= best + slack)
        .expect("non-empty")];
    0.5 * (lo + hi)
}

pub fn train_linear_svm(points: &[Vec<f64>], labels: &[bool], c: f64) -> Result<LinearSvmModel> {
    let n = points.len();
    if labels.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{n} points but {} labels",
            labels.len()
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "C must be positive, got {c}"
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass(format!("{pos} positive of {n}")));
    }
    let dim = points[0].len();
    if points
        .iter()
        .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::InvalidParameter(
            "points must be finite and equal-dimensional".into(),
        ));
    }

    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let q: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            y[i] * y[j] * dot(&points[i], &points[j])
        })
        .collect();
    let mut alpha = vec![0.0; n];
    // gradient of 0.5 a^T Q a - e^T a
    let mut grad = vec![-1.0; n];

    let max_iter = 1_000_000usize.max(1000 * n);
    let mut iterations = 0;
    loop {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if gmax - gmin < KKT_TOLERANCE || i == usize::MAX || j == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Numerical(format!(
                "SMO did not converge in {max_iter} iterations (violation {})",
                gmax - gmin
            )));
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qii = q[i * n + i];
        let qjj = q[j * n + j];
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += q[t * n + i] * di + q[t * n + j] * dj;
        }
    }

    let mut weights = vec![0.0; dim];
    for (t, p) in points.iter().enumerate() {
        let coef = alpha[t] * y[t];
        for (w, v) in weights.iter_mut().zip(p) {
            *w += coef * v;
        }
    }
    let margins: Vec<f64> = points.iter().map(|p| dot(&weights, p)).collect();
    let bias = optimal_bias(&margins, &y);
    let w2 = dot(&weights, &weights);
    let primal_objective = 0.5 * w2 + c * hinge_sum(&margins, &y, bias);
    let dual_objective = alpha.iter().sum::<f64>() - 0.5 * w2;
    Ok(LinearSvmModel {
        weights,
        bias,
        c,
        alphas: alpha,
        iterations,
        primal_objective,
        dual_objective,
    })
}
