//! Independent oracles and generators shared by the integration tests.
//!
//! Apart from `cohort`, nothing here calls into the library's computational code: the oracles
//! are written from the textbook definitions with plain loops so they can
//! catch mistakes in the optimized implementations.

#![allow(dead_code)]

pub mod cohort;

use mpradiomics::tscm::Angle;
use mpradiomics::volume::{raster_index, QuantizedStack, RoiMask};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random quantized stack with a random non-empty ROI.
pub fn random_quantized(
    rng: &mut ChaCha8Rng,
    max_xy: usize,
    max_z: usize,
    max_channels: usize,
    max_g: u16,
) -> (QuantizedStack, RoiMask) {
    let dims = [
        rng.random_range(1..=max_xy),
        rng.random_range(1..=max_xy),
        rng.random_range(1..=max_z),
    ];
    let n = dims[0] * dims[1] * dims[2];
    let density = rng.random_range(0.3..=1.0);
    let mut inside: Vec<bool> = (0..n).map(|_| rng.random_bool(density)).collect();
    let k = rng.random_range(0..n);
    inside[k] = true;
    let roi = RoiMask::new(dims, inside, "random").unwrap();
    let g = rng.random_range(2..=max_g);
    let channels = rng.random_range(1..=max_channels);
    let levels = (0..channels)
        .map(|_| (0..n).map(|_| rng.random_range(1..=g)).collect())
        .collect();
    (
        QuantizedStack::from_levels(dims, g, levels, &roi).unwrap(),
        roi,
    )
}

fn coords(dims: [usize; 3], i: usize) -> [isize; 3] {
    [
        (i % dims[0]) as isize,
        ((i / dims[0]) % dims[1]) as isize,
        (i / (dims[0] * dims[1])) as isize,
    ]
}

/// Directed co-occurrence counts by enumerating every ordered voxel pair.
pub fn brute_force_tscm(q: &QuantizedStack, roi: &RoiMask, d: usize, angle: Angle) -> Vec<u64> {
    let dims = q.dims();
    let g = q.g() as usize;
    let d = d as isize;
    let (dx, dy) = match angle {
        Angle::Deg0 => (d, 0),
        Angle::Deg45 => (d, -d),
        Angle::Deg90 => (0, -d),
        Angle::Deg135 => (-d, -d),
    };
    let n = dims[0] * dims[1] * dims[2];
    let mut raw = vec![0u64; g * g];
    for i in 0..n {
        for j in 0..n {
            if !roi.contains(i) || !roi.contains(j) {
                continue;
            }
            let (a, b) = (coords(dims, i), coords(dims, j));
            if b[0] - a[0] != dx || b[1] - a[1] != dy || b[2] != a[2] {
                continue;
            }
            for c in 0..q.n_channels() {
                let li = q.channel(c)[i] as usize;
                let lj = q.channel(c)[j] as usize;
                raw[(li - 1) * g + (lj - 1)] += 1;
            }
        }
    }
    raw
}

/// Random probability matrix; `zero_fraction` of cells are forced to zero.
pub fn random_probability_matrix(
    rng: &mut ChaCha8Rng,
    g: usize,
    zero_fraction: f64,
    symmetric: bool,
) -> Vec<f64> {
    let mut m: Vec<f64> = (0..g * g)
        .map(|_| {
            if rng.random_bool(zero_fraction) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    if symmetric {
        for i in 0..g {
            for j in 0..i {
                m[j * g + i] = m[i * g + j];
            }
        }
    }
    if m.iter().all(|&v| v == 0.0) {
        m[0] = 1.0;
    }
    let s: f64 = m.iter().sum();
    m.iter().map(|v| v / s).collect()
}

/// The 22 Haralick features in roster order, from plain double loops.
pub fn naive_haralick(p: &[f64], g: usize) -> [f64; 22] {
    let at = |i: usize, j: usize| p[(i - 1) * g + (j - 1)];
    let lv = 1..=g;
    let gf = g as f64;

    let px = |i: usize| (1..=g).map(|j| at(i, j)).sum::<f64>();
    let py = |j: usize| (1..=g).map(|i| at(i, j)).sum::<f64>();
    let mu_x: f64 = lv.clone().map(|i| i as f64 * px(i)).sum();
    let mu_y: f64 = lv.clone().map(|j| j as f64 * py(j)).sum();
    let sd_x = lv
        .clone()
        .map(|i| (i as f64 - mu_x).powi(2) * px(i))
        .sum::<f64>()
        .sqrt();
    let sd_y = lv
        .clone()
        .map(|j| (j as f64 - mu_y).powi(2) * py(j))
        .sum::<f64>()
        .sqrt();

    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut cov = 0.0;
    let mut ssv = 0.0;
    let mut h1 = 0.0;
    let mut h2 = 0.0;
    let mut sa = 0.0;
    let mut ent = 0.0;
    let mut auto = 0.0;
    let mut dis = 0.0;
    let mut shade = 0.0;
    let mut prom = 0.0;
    let mut maxp: f64 = 0.0;
    let mut idn = 0.0;
    let mut idmn = 0.0;
    let mut dmean = 0.0;
    for i in 1..=g {
        for j in 1..=g {
            let v = at(i, j);
            let (fi, fj) = (i as f64, j as f64);
            energy += v * v;
            contrast += (fi - fj).powi(2) * v;
            cov += (fi - mu_x) * (fj - mu_y) * v;
            ssv += (fi - mu_x).powi(2) * v;
            h1 += v / (1.0 + (fi - fj).abs());
            h2 += v / (1.0 + (fi - fj).powi(2));
            sa += (fi + fj) * v;
            if v > 0.0 {
                ent -= v * v.log2();
            }
            auto += fi * fj * v;
            dis += (fi - fj).abs() * v;
            shade += (fi + fj - mu_x - mu_y).powi(3) * v;
            prom += (fi + fj - mu_x - mu_y).powi(4) * v;
            maxp = maxp.max(v);
            idn += v / (1.0 + (fi - fj).abs() / gf);
            idmn += v / (1.0 + (fi - fj).powi(2) / (gf * gf));
            dmean += (fi - fj).abs() * v;
        }
    }
    let correlation = if sd_x > 0.0 && sd_y > 0.0 {
        cov / (sd_x * sd_y)
    } else {
        1.0
    };

    let mut sv = 0.0;
    let mut dv = 0.0;
    for i in 1..=g {
        for j in 1..=g {
            sv += ((i + j) as f64 - sa).powi(2) * at(i, j);
            dv += ((i as f64 - j as f64).abs() - dmean).powi(2) * at(i, j);
        }
    }
    let mut sum_ent = 0.0;
    for k in 2..=2 * g {
        let mut s = 0.0;
        for i in 1..=g {
            for j in 1..=g {
                if i + j == k {
                    s += at(i, j);
                }
            }
        }
        if s > 0.0 {
            sum_ent -= s * s.log2();
        }
    }
    let mut diff_ent = 0.0;
    for k in 0..g {
        let mut s = 0.0;
        for i in 1..=g {
            for j in 1..=g {
                if i.abs_diff(j) == k {
                    s += at(i, j);
                }
            }
        }
        if s > 0.0 {
            diff_ent -= s * s.log2();
        }
    }

    // information measures of correlation, natural logarithms
    let mut hx = 0.0;
    let mut hy = 0.0;
    for i in 1..=g {
        if px(i) > 0.0 {
            hx -= px(i) * px(i).ln();
        }
        if py(i) > 0.0 {
            hy -= py(i) * py(i).ln();
        }
    }
    let mut hxy = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 1..=g {
        for j in 1..=g {
            let v = at(i, j);
            let q = px(i) * py(j);
            if v > 0.0 {
                hxy -= v * v.ln();
            }
            if q > 0.0 {
                hxy1 -= v * q.ln();
                hxy2 -= q * q.ln();
            }
        }
    }
    let imc1 = if hx.max(hy) > 0.0 {
        (hxy - hxy1) / hx.max(hy)
    } else {
        0.0
    };
    let imc2 = (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt();

    // maximal correlation coefficient: Q is similar to D^1/2 Q D^-1/2 with
    // D = diag(px), which is symmetric, so Jacobi rotations apply
    let rows: Vec<usize> = (1..=g).filter(|&i| px(i) > 0.0).collect();
    let mcc = if rows.len() < 2 {
        0.0
    } else {
        let q = |i: usize, j: usize| {
            (1..=g)
                .filter(|&k| py(k) > 0.0)
                .map(|k| at(i, k) * at(j, k) / (px(i) * py(k)))
                .sum::<f64>()
        };
        let n = rows.len();
        let mut s = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let (i, j) = (rows[a], rows[b]);
                s[a][b] = q(i, j) * (px(i) / px(j)).sqrt();
            }
        }
        let mut eig = jacobi_eigenvalues(s);
        eig.sort_by(|a, b| b.total_cmp(a));
        eig[1].clamp(0.0, 1.0).sqrt()
    };

    [
        energy,
        contrast,
        correlation,
        ssv,
        h1,
        h2,
        sa,
        sv,
        sum_ent,
        ent,
        dv,
        diff_ent,
        imc1,
        imc2,
        mcc,
        auto,
        dis,
        shade,
        prom,
        maxp,
        idn,
        idmn,
    ]
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Maximum of the SVM dual `sum(a) - 0.5 a^T Q a` over `0 <= a <= C`,
/// `y^T a = 0`, by accelerated projected gradient with adaptive restart.
pub fn svm_dual_oracle(points: &[Vec<f64>], labels: &[bool], c: f64) -> f64 {
    let n = points.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let q = DMatrix::from_fn(n, n, |i, j| {
        y[i] * y[j]
            * points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
    });
    let lipschitz = SymmetricEigen::new(q.clone()).eigenvalues.max().max(1e-12);
    let step = 1.0 / lipschitz;
    let objective = |a: &[f64]| {
        let av = nalgebra::DVector::from_column_slice(a);
        a.iter().sum::<f64>() - 0.5 * (av.transpose() * &q * &av)[(0, 0)]
    };
    let project = |v: &[f64]| -> Vec<f64> {
        // find lambda with sum_i y_i clip(v_i - lambda y_i, 0, C) = 0
        let at = |lam: f64| -> (f64, Vec<f64>) {
            let a: Vec<f64> = v
                .iter()
                .zip(&y)
                .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c))
                .collect();
            (a.iter().zip(&y).map(|(ai, yi)| ai * yi).sum(), a)
        };
        let (mut lo, mut hi) = (-1.0, 1.0);
        while at(lo).0 < 0.0 {
            lo *= 2.0;
        }
        while at(hi).0 > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid).0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi)).1
    };
    let grad = |a: &[f64]| -> Vec<f64> {
        let av = nalgebra::DVector::from_column_slice(a);
        let qa = &q * av;
        (0..n).map(|i| 1.0 - qa[i]).collect()
    };

    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut best = objective(&x);
    for _ in 0..200_000 {
        let g = grad(&z);
        let ascent: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi + step * gi).collect();
        let next = project(&ascent);
        let f = objective(&next);
        if f < best - 1e-15 {
            // restart momentum
            z = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        z = next
            .iter()
            .zip(&x)
            .map(|(nx, ox)| nx + (t - 1.0) / t_next * (nx - ox))
            .collect();
        x = next;
        t = t_next;
        best = best.max(f);
        if moved < 1e-15 {
            break;
        }
    }
    best
}

/// Random linearly separable set: a random unit normal, points pushed at
/// least `margin` away from the hyperplane on their class side.
pub fn separable_set(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
    margin: f64,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let normal: Vec<f64> = {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        v.iter().map(|x| x / len).collect()
    };
    let offset = rng.random_range(-0.5..0.5);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2 == 0;
        let mut p: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s: f64 = p.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>() + offset;
        let want = if label {
            margin + rng.random_range(0.0..2.0)
        } else {
            -margin - rng.random_range(0.0..2.0)
        };
        for (x, nv) in p.iter_mut().zip(&normal) {
            *x += (want - s) * nv;
        }
        points.push(p);
        labels.push(label);
    }
    (points, labels)
}

/// `n` points along a planar S-shaped curve (two unit half-circles joined
/// end to end) lifted into 3-D, with their arc-length parameters.
pub fn s_curve(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let span = 1.5 * std::f64::consts::PI * 0.9;
    let ts: Vec<f64> = (0..n)
        .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
        .collect();
    let pts = ts
        .iter()
        .map(|&t| vec![t.sin(), t.signum() * (t.cos() - 1.0), 0.1 * t])
        .collect();
    (pts, ts)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0;
        for k in i..=j {
            r[idx[k]] = mid;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of mid-ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Voxel index helper for hand-built fixtures.
pub fn idx(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    raster_index(dims, x, y, z)
}
