//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::Loss;
use fwelnet::group::{penalty_gap, GroupWeights};
use fwelnet::sim::{generate, run_experiment, Setting, SimConfig};
use fwelnet::solver::lambda_path;
use fwelnet::{
    fit_elastic_net, fit_path, fwelnet_fit, penalty_equivalence_check, standardize, theta_gradient, Aggregate,
    Dataset, Family, FeatureInfo, FwelnetConfig, GroupStructure, PathOptions, PenaltyFactors, SolverConfig,
    ThetaVector,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

/// Solver KKT certificate and proximal-gradient agreement.
fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_kkt = 0.0f64;
    let mut worst_rel = 0.0f64;
    let mut compared = 0;
    for case in 0..100 {
        let n = rng.random_range(20..=100);
        let p = if case % 4 == 0 { rng.random_range(2..=10) } else { rng.random_range(2..=50) };
        let alpha = [0.0, 0.5, 1.0][case % 3];
        let x = common::normal_matrix(&mut rng, n, p);
        let y = common::gaussian_response(&mut rng, &x, 1.0);
        let mut w: Vec<f64> = (0..p)
            .map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random_range(0.1..3.0) })
            .collect();
        if w.iter().all(|v| *v == 0.0) {
            w[0] = 1.0;
        }
        let (data, _) = standardize(&Dataset::new(x, y, Family::Gaussian).unwrap());
        let factors = PenaltyFactors::new(w.clone()).unwrap();
        let opts = PathOptions::with_alpha(alpha);
        let seq = lambda_path(&data, &factors, &opts).unwrap();
        let fit = fit_path(&data, &factors, &SolverConfig::with_alpha(alpha), &seq, None).unwrap();
        let xs = data.x().to_owned();
        let ys = data.y().to_vec();
        let mut warm: Option<(f64, Vec<f64>)> = None;
        for (i, &lam) in seq.values.iter().enumerate() {
            let beta = fit.path.beta(i);
            let b0 = fit.path.intercepts[i];
            worst_kkt = worst_kkt.max(common::kkt(Loss::Squared, xs.view(), &ys, &w, alpha, lam, b0, &beta));
            if p <= 10 {
                let sol = common::proximal_gradient(Loss::Squared, xs.view(), &ys, &w, alpha, lam, warm.take(), 200_000);
                let reference = common::objective(Loss::Squared, xs.view(), &ys, &w, alpha, lam, sol.0, &sol.1);
                let ours = common::objective(Loss::Squared, xs.view(), &ys, &w, alpha, lam, b0, &beta);
                worst_rel = worst_rel.max((ours - reference).abs() / reference.abs());
                compared += 1;
                warm = Some(sol);
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst_kkt <= 1e-5 && worst_rel <= 1e-8 && within(t, Duration::from_secs(60)),
        format!(
            "max KKT/n {worst_kkt:.2e} (<= 1e-5), max relative objective gap {worst_rel:.2e} over {compared} oracle solves (<= 1e-8), {:.1}s (< 60s)",
            t.as_secs_f64()
        ),
    )
}

/// Constant-only Z reproduces the plain elastic-net path exactly.
fn reduction_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    let mut checks = 0;
    for case in 0..20 {
        let n = rng.random_range(30..=80);
        let p = rng.random_range(3..=40);
        let x = common::normal_matrix(&mut rng, n, p);
        let y = common::gaussian_response(&mut rng, &x, 1.0);
        let data = Dataset::new(x, y, Family::Gaussian).unwrap();
        let alpha = [1.0, 0.5, 0.0][case % 3];
        let k = 1 + case % 3;
        let z = FeatureInfo::new(Array2::from_shape_fn((p, k), |(_, c)| 1.0 + c as f64)).unwrap();
        let plain = fit_elastic_net(&data, None, &PathOptions::with_alpha(alpha)).unwrap();
        for n_iter in [0, 1, 3] {
            let cfg = FwelnetConfig {
                n_iter,
                ..FwelnetConfig::with_alpha(alpha)
            };
            let m = fwelnet_fit(&data, &z, &cfg).unwrap();
            checks += 1;
            if m.path.betas != plain.path.betas || m.path.intercepts != plain.path.intercepts {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of {checks} fits differ from the plain path"))
}

/// Theta gradient against central finite differences.
fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = rng.random_range(2..=30);
        let k = rng.random_range(1..=6);
        let z = common::normal_matrix(&mut rng, p, k);
        let theta: Vec<f64> = (0..k).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let beta: Vec<f64> = (0..p)
            .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.sample(StandardNormal) })
            .collect();
        let lambda = rng.random_range(0.1..10.0);
        let alpha = match rng.random_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        };
        let g = theta_gradient(
            &FeatureInfo::new(z.clone()).unwrap(),
            &ThetaVector::new(theta.clone()).unwrap(),
            &beta,
            lambda,
            alpha,
        )
        .unwrap();
        let fd = common::finite_difference_gradient(z.view(), &theta, &beta, lambda, alpha, 1e-5);
        let floor = 1e-3 * common::theta_objective(z.view(), &theta, &beta, lambda, alpha);
        let scale = fd.iter().fold(floor, |a, v| a.max(v.abs()));
        let err = g.iter().zip(&fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if scale > 0.0 {
            worst = worst.max(err / scale);
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} over 200 draws (<= 1e-5)"))
}

/// Aggregate objective history strictly decreases.
fn descent_contract() -> Outcome {
    let mut sim = SimConfig::new(Setting::Setting1);
    sim.n_test = 10;
    let mut bad = 0;
    let mut accepted = 0;
    for run in 0..50 {
        let inst = generate(&sim, run).unwrap();
        let z = inst.z.as_ref().unwrap();
        for aggregate in [Aggregate::Mean, Aggregate::Median] {
            let cfg = FwelnetConfig {
                n_iter: 5,
                aggregate,
                ..FwelnetConfig::default()
            };
            let m = fwelnet_fit(&inst.train, z, &cfg).unwrap();
            accepted += m.iterations;
            if m.history.len() != m.iterations + 1 || m.history.windows(2).any(|h| h[1] >= h[0]) {
                bad += 1;
            }
        }
    }
    outcome(
        bad == 0,
        format!("{bad} of 100 fits with a non-decreasing step; {accepted} accepted updates in total"),
    )
}

/// Group-weight certificate: equality at the optimum, lower bound elsewhere.
fn group_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_opt = 0.0f64;
    let mut worst_random = f64::INFINITY;
    for alpha in [0.0, 0.5, 1.0] {
        for _ in 0..100 {
            let k = rng.random_range(1..=6);
            let labels: Vec<usize> = (0..k).flat_map(|g| std::iter::repeat_n(g, rng.random_range(1..=8))).collect();
            let groups = GroupStructure::new(labels).unwrap();
            let zero_group = rng.random_range(0..k + 2);
            let beta: Vec<f64> = groups
                .group_of()
                .iter()
                .map(|g| if *g == zero_group { 0.0 } else { rng.sample(StandardNormal) })
                .collect();
            let lambda = rng.random_range(0.1..2.0);
            let c = penalty_equivalence_check(&beta, &groups, alpha, lambda).unwrap();
            worst_opt = worst_opt.max(c.gap.abs());
            for _ in 0..10 {
                let u: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                let norm: f64 = u.iter().zip(groups.sizes()).map(|(a, s)| a * *s as f64).sum();
                let v = GroupWeights {
                    v: u.iter().map(|a| a / norm).collect(),
                };
                let c = penalty_gap(&beta, &groups, alpha, lambda, &v).unwrap();
                worst_random = worst_random.min(c.gap);
            }
        }
    }
    outcome(
        worst_opt <= 1e-12 && worst_random >= -1e-12,
        format!("max |gap| at optimal weights {worst_opt:.2e} (<= 1e-12), min gap over 3000 feasible weights {worst_random:.3e} (>= -1e-12)"),
    )
}

fn group_means(w: &[f64]) -> (f64, f64, f64) {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&w[..10]), mean(&w[10..20]), mean(&w[20..]))
}

/// Grouped example: learned weights rank true groups below null groups.
fn grouped_ordering() -> Outcome {
    let start = Instant::now();
    let sim = SimConfig {
        n_test: 10,
        ..SimConfig::new(Setting::Fig1)
    };
    let mut ordered = 0;
    let mut totals = (0.0, 0.0, 0.0);
    for run in 0..30 {
        let inst = generate(&sim, run).unwrap();
        let m = fwelnet_fit(&inst.train, inst.z.as_ref().unwrap(), &FwelnetConfig::default()).unwrap();
        let (a, b, c) = group_means(m.weights.as_slice());
        totals = (totals.0 + a / 30.0, totals.1 + b / 30.0, totals.2 + c / 30.0);
        if a < b && b < c {
            ordered += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        ordered >= 28 && within(t, Duration::from_secs(120)),
        format!(
            "ordered in {ordered}/30 runs (>= 28); mean weights {:.3} < {:.3} < {:.3}; {:.1}s (< 120s)",
            totals.0,
            totals.1,
            totals.2,
            t.as_secs_f64()
        ),
    )
}

fn median(summary: &fwelnet::sim::Summary, method: &str, what: &str) -> f64 {
    let m = summary.method(method).unwrap_or_else(|| panic!("no {method} rows"));
    match what {
        "mse" => m.test_mse[1],
        "fpr" => m.fpr[1],
        _ => unreachable!(),
    }
}

/// Setting 1: fwelnet beats the lasso on test MSE and false positives.
fn setting1() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::new(Setting::Setting1);
    let res = run_experiment(&cfg).unwrap();
    let s = &res.summary;
    let (fm, lm) = (median(s, "fwelnet", "mse"), median(s, "lasso", "mse"));
    let (ff, lf) = (median(s, "fwelnet", "fpr"), median(s, "lasso", "fpr"));
    let t = start.elapsed();
    outcome(
        s.completed_runs == 30 && fm < lm && ff <= lf && within(t, Duration::from_secs(300)),
        format!(
            "median test MSE fwelnet {fm:.3} vs lasso {lm:.3}; median FPR {ff:.4} vs {lf:.4}; {} runs; {:.1}s (< 300s)",
            s.completed_runs,
            t.as_secs_f64()
        ),
    )
}

/// Setting 3 (uninformative Z): fwelnet within 30% of the lasso.
fn setting3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let start = Instant::now();
    for snr in [0.5, 1.0, 2.0] {
        let cfg = SimConfig {
            snr_y: snr,
            ..SimConfig::new(Setting::Setting3)
        };
        let res = run_experiment(&cfg).unwrap();
        let s = &res.summary;
        let ratio = median(s, "fwelnet", "mse") / median(s, "lasso", "mse");
        pass &= s.completed_runs == 30 && ratio <= 1.3;
        parts.push(format!("SNR {snr}: ratio {ratio:.3}"));
    }
    outcome(pass, format!("{} (<= 1.3); {:.1}s", parts.join(", "), start.elapsed().as_secs_f64()))
}

/// Multi-task: borrowing strength helps the noisier response.
fn multitask() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig {
        n_runs: 50,
        ..SimConfig::new(Setting::Multitask)
    };
    let res = run_experiment(&cfg).unwrap();
    let s = &res.summary;
    let (f1, l1) = (median(s, "fwelnet_y1", "mse"), median(s, "ind_lasso_y1", "mse"));
    let (f2, l2) = (median(s, "fwelnet_y2", "mse"), median(s, "ind_lasso_y2", "mse"));
    let t = start.elapsed();
    outcome(
        s.completed_runs == 50 && f1 < l1 && f2 <= 1.1 * l2 && within(t, Duration::from_secs(600)),
        format!(
            "low-SNR response {f1:.3} vs {l1:.3}; high-SNR response {f2:.3} vs 1.1 x {l2:.3}; {} runs; {:.1}s (< 600s)",
            s.completed_runs,
            t.as_secs_f64()
        ),
    )
}

fn write_csv(path: &Path, rows: &[Vec<f64>]) {
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(path, text).unwrap();
}

/// Every file below `dir`, with its bytes, in path order.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Every command, run twice with the same flags, writes identical bytes.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let (n, p) = (60, 12);
    let x = common::normal_matrix(&mut rng, n, p);
    let y = common::gaussian_response(&mut rng, &x, 1.0);
    let y2 = common::gaussian_response(&mut rng, &x, 2.0);
    let yb = common::binomial_response(&mut rng, &x);
    let rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    write_csv(&root.join("x.csv"), &rows(&x));
    write_csv(&root.join("y.csv"), &y.iter().map(|v| vec![*v]).collect::<Vec<_>>());
    write_csv(&root.join("y2.csv"), &y2.iter().map(|v| vec![*v]).collect::<Vec<_>>());
    write_csv(&root.join("yb.csv"), &yb.iter().map(|v| vec![*v]).collect::<Vec<_>>());
    let z = Array2::from_shape_fn((p, 2), |(j, c)| if c == 0 { f64::from(j < 3) } else { j as f64 });
    write_csv(&root.join("z.csv"), &rows(&z));
    write_csv(&root.join("groups.csv"), &(0..n).map(|i| vec![(i / 3) as f64]).collect::<Vec<_>>());
    std::fs::write(root.join("theta.json"), "[0.7, -0.1]\n").unwrap();
    let s = |name: &str| root.join(name).display().to_string();

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("fit", vec!["fit", "--x", &s("x.csv"), "--y", &s("y.csv"), "--z", &s("z.csv"), "--niter", "2", "--out", "{out}/model.json"]),
        ("fit-binomial", vec!["fit", "--x", &s("x.csv"), "--y", &s("yb.csv"), "--z", &s("z.csv"), "--family", "binomial", "--out", "{out}/model.json"]),
        ("cv", vec!["cv", "--x", &s("x.csv"), "--y", &s("y.csv"), "--z", &s("z.csv"), "--nfolds", "5", "--fold-groups", &s("groups.csv"), "--seed", "3", "--out", "{out}"]),
        ("predict", vec!["predict", "--model", &s("cvmodel/model.json"), "--x", &s("x.csv"), "--out", "{out}/pred.csv"]),
        ("simulate", vec!["simulate", "--setting", "1", "--runs", "2", "--seed", "7", "--n-test", "500", "--out", "{out}"]),
        ("multitask", vec!["multitask", "--x", &s("x.csv"), "--y1", &s("y.csv"), "--y2", &s("y2.csv"), "--outer", "2", "--nfolds", "5", "--out", "{out}/mt.json"]),
        ("weights", vec!["weights", "--z", &s("z.csv"), "--theta", &s("theta.json"), "--out", "{out}/weights.csv"]),
    ]
    .into_iter()
    .map(|(name, args)| (name, args.into_iter().map(String::from).collect()))
    .collect();

    // model consumed by `predict`
    let prep = Command::new(env!("CARGO_BIN_EXE_fwelnet"))
        .args(["cv", "--x", &s("x.csv"), "--y", &s("y.csv"), "--z", &s("z.csv"), "--nfolds", "5", "--out", &s("cvmodel")])
        .output()
        .unwrap();
    if !prep.status.success() {
        return outcome(false, format!("setup cv failed: {}", String::from_utf8_lossy(&prep.stderr)));
    }

    let mut failures = Vec::new();
    for (name, args) in &commands {
        let mut snaps = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("{name}-{rep}"));
            std::fs::create_dir_all(&out).unwrap();
            let out_s = out.display().to_string();
            let args: Vec<String> = args.iter().map(|a| a.replace("{out}", &out_s)).collect();
            let o = Command::new(env!("CARGO_BIN_EXE_fwelnet")).args(&args).output().unwrap();
            if !o.status.success() {
                failures.push(format!("{name} exited with {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
                break;
            }
            let mut snap = snapshot(&out);
            snap.push(("stdout".into(), o.stdout));
            snaps.push(snap);
        }
        if snaps.len() == 2 && (snaps[0] != snaps[1] || snaps[0].len() < 2) {
            failures.push(format!("{name} outputs differ or are missing"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} commands produced byte-identical outputs on repeat", commands.len())
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

type Check = fn() -> Outcome;

fn main() {
    // numeric arguments pick a subset of criteria; libtest flags are ignored
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let checks: [(&str, Check); 10] = [
        ("solver correctness", solver_correctness),
        ("reduction identity", reduction_identity),
        ("gradient check", gradient_check),
        ("descent contract", descent_contract),
        ("group-weight certificate", group_certificate),
        ("grouped weight ordering", grouped_ordering),
        ("setting 1 comparison", setting1),
        ("setting 3 robustness", setting3),
        ("multi-task comparison", multitask),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {ran} acceptance criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
