//! Acceptance gate. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line in a plain `cargo test` run.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::cohort::extract_all;
use common::{
    brute_force_tscm, naive_haralick, random_probability_matrix, random_quantized, rng, s_curve,
    separable_set, spearman, svm_dual_oracle,
};
use mpradiomics::config::{PipelineConfig, Preset};
use mpradiomics::haralick::haralick_from_probabilities;
use mpradiomics::isomap::fit_isomap;
use mpradiomics::phantom::{generate, PhantomSpec, Texture};
use mpradiomics::pipeline::{classify_rows, extract_features, progression_rows, StudyInfo};
use mpradiomics::stats::{group_compare, mann_whitney_auc, roc_auc, welch_t_test, Orientation};
use mpradiomics::tscm::{build_tscm, haralick_features, Angle};
use mpradiomics::tspm::{build_tspm, subset_features};
use mpradiomics::volume::{extract_signatures, QuantizedStack, RoiMask};
use rand::Rng;
use serde_json::Value;

const TSCM_CASES: usize = 200;
const TSCM_TIME_LIMIT: Duration = Duration::from_secs(30);
const HARALICK_CASES: usize = 100;
const HARALICK_TOL: f64 = 1e-9;
const INFO_CASES: usize = 200;
const INFO_TOL: f64 = 1e-12;
const BOUNDS_CASES: usize = 1000;
const AUC_CASES: usize = 500;
const WELCH_P_TOL: f64 = 1e-8;
const TRIANGLE_TOL: f64 = 1e-9;
const SVM_CASES: usize = 20;
const SVM_DUAL_TOL: f64 = 1e-6;
const SVM_GAP_TOL: f64 = 1e-6;
const GRADING_MIN_AUC: f64 = 0.9;
const GRADING_MAX_P: f64 = 0.05;
const WORKFLOW_TIME_LIMIT: Duration = Duration::from_secs(120);
const PROGRESSION_MIN_AUC: f64 = 0.8;
const PERF_TIME_LIMIT: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tscm_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut matrices = 0;
    for case in 0..TSCM_CASES {
        let (q, roi) = random_quantized(&mut r, 6, 2, 3, 4);
        for d in 1..=2 {
            for angle in Angle::ALL {
                let want = brute_force_tscm(&q, &roi, d, angle);
                let got = match build_tscm(&q, &roi, d, angle) {
                    Ok(t) => t.raw,
                    Err(_) => vec![0; want.len()],
                };
                check(got == want, || {
                    format!("case {case}, d={d}, {angle:?}: counts differ")
                })?;
                matrices += 1;
            }
        }
    }
    let took = start.elapsed();
    check(took < TSCM_TIME_LIMIT, || format!("took {took:.2?}"))?;
    Ok(format!(
        "{TSCM_CASES} stacks, {matrices} matrices exact in {took:.2?}"
    ))
}

fn haralick_oracle() -> Outcome {
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for case in 0..HARALICK_CASES {
        let p = random_probability_matrix(&mut r, 8, [0.0, 0.3, 0.7][case % 3], case % 2 == 0);
        let got = haralick_from_probabilities(&p, 8)
            .map_err(|e| e.to_string())?
            .values();
        let want = naive_haralick(&p, 8);
        for k in 0..22 {
            worst = worst.max((got[k] - want[k]).abs());
        }
    }
    check(worst <= HARALICK_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "{HARALICK_CASES} matrices x 22 features, max deviation {worst:.1e}"
    ))
}

fn information_identities() -> Outcome {
    let mut r = rng(103);
    let mut worst = 0.0f64;
    for case in 0..INFO_CASES {
        let dims = [
            r.random_range(1..=8),
            r.random_range(1..=8),
            r.random_range(1..=3),
        ];
        let n = dims.iter().product::<usize>();
        let g: u16 = r.random_range(2..=8);
        let mut inside: Vec<bool> = (0..n).map(|_| r.random_bool(0.7)).collect();
        inside[0] = true;
        let roi = RoiMask::new(dims, inside, "r").map_err(|e| e.to_string())?;
        let levels: Vec<Vec<u16>> = (0..2)
            .map(|_| (0..n).map(|_| r.random_range(1..=g)).collect())
            .collect();
        let q = QuantizedStack::from_levels(dims, g, levels, &roi).map_err(|e| e.to_string())?;
        let sigs = extract_signatures(&q, &roi).map_err(|e| e.to_string())?;
        let joint = build_tspm(&sigs, g, &[0, 1]).map_err(|e| e.to_string())?;
        let h1 = build_tspm(&sigs, g, &[0]).map_err(|e| e.to_string())?;
        let h2 = build_tspm(&sigs, g, &[1]).map_err(|e| e.to_string())?;
        let mi = joint.mutual_information().map_err(|e| e.to_string())?;
        let (e1, e2, e12) = (h1.entropy(), h2.entropy(), joint.entropy());
        let dev = (mi - (e1 + e2 - e12)).abs();
        worst = worst.max(dev);
        check(dev <= INFO_TOL, || {
            format!("case {case}: MI identity off by {dev:e}")
        })?;
        check(mi >= -INFO_TOL, || format!("case {case}: MI = {mi}"))?;
        check(e12 <= e1 + e2 + INFO_TOL, || {
            format!("case {case}: subadditivity")
        })?;
        check(
            joint.marginalize(&[0]).map_err(|e| e.to_string())? == h1,
            || format!("case {case}: marginalize([0]) != build([0])"),
        )?;
        check(
            joint.marginalize(&[1]).map_err(|e| e.to_string())? == h2,
            || format!("case {case}: marginalize([1]) != build([1])"),
        )?;
    }
    Ok(format!(
        "{INFO_CASES} stacks, max identity deviation {worst:.1e}, commutation exact"
    ))
}

fn bounds_suite() -> Outcome {
    let mut r = rng(104);
    let mut checked = 0usize;
    for case in 0..BOUNDS_CASES {
        let (q, roi) = random_quantized(&mut r, 6, 3, 3, 8);
        let g = q.g();
        let sigs = extract_signatures(&q, &roi).map_err(|e| e.to_string())?;
        let table = subset_features(&sigs, g, q.n_channels()).map_err(|e| e.to_string())?;
        for (s, f) in &table.entries {
            let cap = s.len() as f64 * (g as f64).log2();
            check(f.entropy >= 0.0 && f.entropy <= cap + INFO_TOL, || {
                format!(
                    "case {case} {s:?}: entropy {} outside [0, {cap}]",
                    f.entropy
                )
            })?;
            check(f.uniformity > 0.0 && f.uniformity <= 1.0, || {
                format!("case {case} {s:?}: uniformity {}", f.uniformity)
            })?;
            checked += 2;
        }
        for angle in Angle::ALL {
            let Ok(t) = build_tscm(&q, &roi, 1, angle) else {
                continue;
            };
            let h = haralick_features(&t).map_err(|e| e.to_string())?;
            for (name, v) in [
                ("homogeneity1", h.homogeneity1),
                ("homogeneity2", h.homogeneity2),
                ("energy", h.energy),
                ("max_probability", h.max_probability),
            ] {
                check(v > 0.0 && v <= 1.0, || {
                    format!("case {case} {angle:?}: {name} = {v}")
                })?;
            }
            check(h.contrast >= 0.0, || {
                format!("case {case} {angle:?}: contrast {}", h.contrast)
            })?;
            checked += 5;
        }
    }
    Ok(format!(
        "{BOUNDS_CASES} cases, {checked} bounded values, no violations"
    ))
}

fn auc_correctness() -> Outcome {
    let mut r = rng(105);
    let mut ties = 0;
    for case in 0..AUC_CASES {
        let n = r.random_range(2..=60);
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let grid = r.random_range(2..=12);
        let scores: Vec<f64> = (0..n)
            .map(|_| r.random_range(0..grid) as f64 * 0.37 - 1.0)
            .collect();
        if scores.len() > (grid as usize) {
            ties += 1;
        }
        let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc;
        let mw = mann_whitney_auc(&scores, &labels).map_err(|e| e.to_string())?;
        check(auc == mw, || {
            format!("case {case}: trapezoid {auc} != Mann-Whitney {mw}")
        })?;
        let neg: Vec<f64> = scores.iter().map(|v| -v).collect();
        let flipped = roc_auc(&neg, &labels).map_err(|e| e.to_string())?.auc;
        check(auc + flipped == 1.0, || {
            format!("case {case}: AUC(s) + AUC(-s) = {}", auc + flipped)
        })?;
        for (what, t) in [
            ("cubic", (|v: f64| v * v * v + 3.0 * v) as fn(f64) -> f64),
            ("exp", f64::exp),
        ] {
            let moved: Vec<f64> = scores.iter().map(|&v| t(v)).collect();
            let a = roc_auc(&moved, &labels).map_err(|e| e.to_string())?.auc;
            check(a == auc, || {
                format!("case {case}: {what} transform changed AUC {auc} -> {a}")
            })?;
        }
    }
    Ok(format!(
        "{AUC_CASES} score sets ({ties} with forced ties), all equalities exact"
    ))
}

fn welch_reference() -> Outcome {
    let data: Value = serde_json::from_str(include_str!("data/welch_reference.json"))
        .map_err(|e| e.to_string())?;
    let floats = |v: &Value| -> Vec<f64> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().parse().unwrap())
            .collect()
    };
    let cases = data["cases"].as_array().ok_or("no cases")?;
    let mut worst = 0.0f64;
    for c in cases {
        let want: f64 = c["p"].as_str().unwrap().parse().unwrap();
        let got = welch_t_test(&floats(&c["a"]), &floats(&c["b"]))
            .map_err(|e| e.to_string())?
            .p;
        worst = worst.max((got - want).abs());
    }
    check(cases.len() == 100, || {
        format!("{} reference cases", cases.len())
    })?;
    check(worst <= WELCH_P_TOL, || {
        format!("max p deviation {worst:e}")
    })?;
    Ok(format!(
        "{} group pairs, max p deviation {worst:.1e}",
        cases.len()
    ))
}

fn isomap_sanity() -> Outcome {
    let (pts, arc) = s_curve(12);
    let m = fit_isomap(&pts, 2, 1).map_err(|e| e.to_string())?;
    let coord: Vec<f64> = m.embedding.iter().map(|e| e[0]).collect();
    let rho = spearman(&coord, &arc);
    check(m.k == 2, || format!("k was raised to {}", m.k))?;
    check(rho.abs() == 1.0, || format!("Spearman rho = {rho}"))?;

    let mut r = rng(107);
    let mut fits = vec![m];
    for _ in 0..10 {
        let cloud: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        fits.push(fit_isomap(&cloud, 3, 2).map_err(|e| e.to_string())?);
    }
    let mut worst = f64::NEG_INFINITY;
    for fit in &fits {
        for i in 0..fit.n {
            for j in 0..fit.n {
                for k in 0..fit.n {
                    worst = worst.max(fit.geodesic(i, j) - fit.geodesic(i, k) - fit.geodesic(k, j));
                }
            }
        }
    }
    check(worst <= TRIANGLE_TOL, || {
        format!("triangle excess {worst:e}")
    })?;
    Ok(format!(
        "S-curve rho = {rho}, max triangle excess {worst:.1e}"
    ))
}

fn svm_correctness() -> Outcome {
    let mut r = rng(108);
    let (mut worst_dual, mut worst_gap) = (0.0f64, 0.0f64);
    for case in 0..SVM_CASES {
        let (pts, labels) = separable_set(&mut r, 20, 2 + case % 3, 0.3);
        let c = [0.1, 1.0, 10.0][case % 3];
        let m = mpradiomics::svm::train_linear_svm(&pts, &labels, c).map_err(|e| e.to_string())?;
        let oracle = svm_dual_oracle(&pts, &labels, c);
        worst_dual = worst_dual.max((m.dual_objective - oracle).abs());
        worst_gap = worst_gap.max(m.duality_gap().abs());
    }
    check(worst_dual <= SVM_DUAL_TOL, || {
        format!("dual deviation {worst_dual:e}")
    })?;
    check(worst_gap < SVM_GAP_TOL, || {
        format!("duality gap {worst_gap:e}")
    })?;
    Ok(format!(
        "{SVM_CASES} sets, max dual deviation {worst_dual:.1e}, max gap {worst_gap:.1e}"
    ))
}

fn phantoms(
    label: &str,
    texture: Texture,
    n: u64,
    seed0: u64,
    noise: f64,
) -> Vec<(String, PhantomSpec)> {
    (0..n)
        .map(|i| {
            let spec =
                PhantomSpec::new(label, [32, 32, 32], 3, texture, seed0 + i).with_noise(noise);
            (format!("{label}{i:02}"), spec)
        })
        .collect()
}

fn grading_echo() -> Outcome {
    let start = Instant::now();
    let config = PipelineConfig::preset(Preset::Grading);
    let smooth = extract_all(
        &config,
        &phantoms("smooth", Texture::Smooth, 8, 11, 1.0),
        None,
    );
    let het = extract_all(
        &config,
        &phantoms("heterogeneous", Texture::Heterogeneous, 8, 51, 1.0),
        None,
    );
    let cmp = group_compare(&smooth, &het).map_err(|e| e.to_string())?;
    let contrast = cmp.get("TSCM_contrast_mean").ok_or("no contrast column")?;
    let mut rows = smooth;
    rows.extend(het);
    let report = classify_rows(&config, &rows).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(report.auc >= GRADING_MIN_AUC, || {
        format!("LOOCV AUC {}", report.auc)
    })?;
    check(
        contrast.orientation == Orientation::HigherInB && contrast.p < GRADING_MAX_P,
        || format!("contrast {:?} p = {}", contrast.orientation, contrast.p),
    )?;
    check(took < WORKFLOW_TIME_LIMIT, || format!("took {took:.2?}"))?;
    Ok(format!(
        "LOOCV AUC {:.3}; contrast {:.2} vs {:.2}, p = {:.1e}; {took:.2?}",
        report.auc, contrast.a.mean, contrast.b.mean, contrast.p
    ))
}

fn progression_echo() -> Outcome {
    let start = Instant::now();
    let config = PipelineConfig::preset(Preset::Progression);
    // progressing studies coarsen between time points, the others do not
    let mut t1 = phantoms("progression", Texture::Heterogeneous, 8, 201, 0.3);
    t1.extend(phantoms("pseudo", Texture::Heterogeneous, 8, 301, 0.6));
    let mut t2 = phantoms("progression", Texture::Heterogeneous, 8, 201, 1.0);
    t2.extend(phantoms("pseudo", Texture::Heterogeneous, 8, 301, 0.6));
    for (_, spec) in t2.iter_mut() {
        spec.seed += 1000;
    }
    let rows1 = extract_all(&config, &t1, Some(1));
    let rows2 = extract_all(&config, &t2, Some(2));
    let (report, _) = progression_rows(&config, &rows1, &rows2, None).map_err(|e| e.to_string())?;
    let feature = "TSPM_entropy_ch1+ch2+ch3";
    let f = report.get(feature).ok_or_else(|| format!("no {feature}"))?;
    let took = start.elapsed();
    check(f.auc >= PROGRESSION_MIN_AUC, || {
        format!("{feature} delta AUC {}", f.auc)
    })?;
    check(took < WORKFLOW_TIME_LIMIT, || format!("took {took:.2?}"))?;
    Ok(format!(
        "delta {feature} AUC {:.3} ({} vs {}, p = {:.1e}); {took:.2?}",
        f.auc, report.group_a, report.group_b, f.p
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mpradiomics"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let p = |path: &Path| path.to_str().unwrap().to_string();
    let cohort = root.join("cohort");
    let mut extracts = 0;
    for i in 0..8u64 {
        let texture = if i % 2 == 0 {
            "smooth"
        } else {
            "heterogeneous"
        };
        let dir = root.join(format!("s{i}"));
        cli(&[
            "phantom",
            "--texture",
            texture,
            "--dims",
            "16,16,12",
            "--seed",
            &(700 + i).to_string(),
            "--out",
            &p(&dir),
        ])?;
        let (manifest, mask) = (p(&dir.join("manifest.json")), p(&dir.join("mask.u8")));
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "8", "1"].iter().enumerate() {
            let out = root.join(format!("s{i}_{run}.csv"));
            cli(&[
                "extract",
                "--manifest",
                &manifest,
                "--mask",
                &mask,
                "--label",
                texture,
                "--threads",
                threads,
                "--out",
                &p(&out),
            ])?;
            outputs.push(fs::read(&out).map_err(|e| e.to_string())?);
            extracts += 1;
        }
        check(outputs.iter().all(|o| o == &outputs[0]), || {
            format!("extract output of s{i} differs")
        })?;
        fs::create_dir_all(&cohort).map_err(|e| e.to_string())?;
        fs::write(cohort.join(format!("s{i}.csv")), &outputs[0]).map_err(|e| e.to_string())?;
    }
    let mut reports = Vec::new();
    for (run, threads) in ["1", "8", "1"].iter().enumerate() {
        let out = root.join(format!("report{run}.json"));
        cli(&[
            "classify",
            &p(&cohort),
            "--threads",
            threads,
            "--out",
            &p(&out),
        ])?;
        reports.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(reports.iter().all(|o| o == &reports[0]), || {
        "classify report differs".into()
    })?;
    Ok(format!(
        "{extracts} extract runs and 3 classify runs byte-identical (threads 1/8/1)"
    ))
}

fn performance() -> Outcome {
    let config = PipelineConfig::preset(Preset::Grading);
    let dims = [64, 64, 64];
    let (stack, _) = generate(&PhantomSpec::new(
        "perf",
        dims,
        5,
        Texture::Heterogeneous,
        9,
    ))
    .map_err(|e| e.to_string())?;
    let roi = RoiMask::full(dims, "box").map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let study = StudyInfo {
        study_id: "perf".into(),
        ..Default::default()
    };
    let start = Instant::now();
    let ex = pool
        .install(|| extract_features(&config, &stack, &roi, &study))
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(took < PERF_TIME_LIMIT, || format!("took {took:.2?}"))?;
    Ok(format!(
        "{} features from {} voxels x 5 channels, G = {}, 1 thread: {took:.2?}",
        ex.row.values.len(),
        roi.count(),
        config.g
    ))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 12] = [
        ("TSCM oracle equivalence", tscm_oracle),
        ("Haralick oracle equivalence", haralick_oracle),
        ("information identities", information_identities),
        ("bounds suite", bounds_suite),
        ("AUC correctness", auc_correctness),
        ("Welch t-test reference", welch_reference),
        ("Isomap sanity", isomap_sanity),
        ("SVM correctness", svm_correctness),
        ("grading workflow echo", grading_echo),
        ("progression workflow echo", progression_echo),
        ("determinism", determinism),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("acceptance {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
