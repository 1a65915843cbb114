//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use autorate::analysis::{
    check_weight_scale_bound, compute_bound_constants, fit_rate, lgg_formula, probe_smoothness,
    sequence_bound_check,
};
use autorate::dataset::{Dataset, DatasetSpec};
use autorate::harness::{self, ExperimentConfig, Setting, SuiteOptions, SweepAxis, SweepConfig};
use autorate::invariance::{check_g_norm_bound, check_gradient_vs_fd, CheckReport, NetObjective};
use autorate::netmodel::{Activation, NetworkSpec};
use autorate::numcore::{norm2_sq, Rng};
use autorate::optim::{eta_g_default, run_training, OptimizerKind, Trainer, Trajectory, TrainerConfig};

const LAMBDA: f64 = 0.01;
const C_G: f64 = 0.1;
const ETA_GRID: [f64; 5] = [1e-2, 1e-1, 1.0, 1e1, 1e2];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn desk_network() -> NetworkSpec {
    NetworkSpec::new(vec![10, 8, 2], Activation::Sigmoid).with_lambda(LAMBDA)
}

fn desk_dataset_spec() -> DatasetSpec {
    DatasetSpec::GaussianBlobs {
        d: 10,
        classes: 2,
        n_points: 256,
        separation: 6.0,
        scale: 1.0,
        seed: 1,
    }
}

fn desk_dataset() -> Dataset {
    desk_dataset_spec().load().expect("blob dataset")
}

fn gd_config(eta_w: f64) -> TrainerConfig {
    let eta_g = eta_g_default(2, LAMBDA, C_G).expect("eta_g");
    TrainerConfig::gd(eta_w, eta_g, 4096, 7)
}

fn sgd_config(alpha: f64, seed: u64) -> TrainerConfig {
    TrainerConfig::sgd(1.0, alpha, 0.1, 16, 8192, seed)
}

fn random_spec(rng: &mut Rng, max: [usize; 3], act: Activation) -> NetworkSpec {
    let widths = vec![1 + rng.index(max[0]), 1 + rng.index(max[1]), 2 + rng.index(max[2] - 1)];
    NetworkSpec::new(widths, act)
}

fn merge_all(reports: Vec<Vec<CheckReport>>) -> Vec<CheckReport> {
    reports
        .into_iter()
        .reduce(|a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect())
        .unwrap_or_default()
}

fn lemma_suite() -> Outcome {
    let reports: Vec<Vec<CheckReport>> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(1000 + i);
            let act = Activation::ALL[rng.index(3)];
            let spec = random_spec(&mut rng, [6, 5, 4], act);
            let opts = SuiteOptions {
                instances: 1,
                batch_size: 2 + rng.index(7),
                seed: i,
                scales: vec![1e-3, 7.0, 1e3],
                gd_steps: 200,
                fd_step: 1e-5,
            };
            harness::check_suite(&spec, &opts).expect("suite")
        })
        .collect();
    let merged = merge_all(reports);
    let passed = merged.iter().all(|r| r.passed);
    let detail = merged
        .iter()
        .map(|r| format!("{}={:.2e}", r.name, r.violation))
        .collect::<Vec<_>>()
        .join(" ");
    Outcome::new(passed, detail)
}

fn intrinsic_equivalence() -> Outcome {
    let spec = NetworkSpec::new(vec![4, 4, 2], Activation::Tanh);
    let data = DatasetSpec::GaussianBlobs {
        d: 4,
        classes: 2,
        n_points: 32,
        separation: 4.0,
        scale: 1.0,
        seed: 5,
    }
    .load()
    .expect("data");
    let gd = TrainerConfig::gd(0.5, 0.5, 1000, 3);
    let int = gd.clone().with_optimizer(OptimizerKind::Intrinsic);
    let mut a = Trainer::new(&spec, &gd, &data).expect("gd trainer");
    let mut b = Trainer::new(&spec, &int, &data).expect("intrinsic trainer");
    let (mut dv, mut dg) = (0.0f64, 0.0f64);
    for _ in 0..=1000 {
        for (x, y) in a.directions().iter().zip(b.directions()) {
            let diff: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
            dv = dv.max(norm2_sq(&diff).sqrt());
        }
        for (w, g) in a.w_norm_sq().iter().zip(b.w_norm_sq()) {
            dg = dg.max((g - w).abs() / g);
        }
        if a.step_index() == 1000 {
            break;
        }
        if a.step().is_err() || b.step().is_err() {
            return Outcome::new(false, "diverged");
        }
    }
    Outcome::new(
        dv <= 1e-10 && dg <= 1e-10,
        format!("max |v_gd - v_int|={dv:.2e} max |G - |w|^2|/G={dg:.2e}"),
    )
}

fn gradient_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for act in Activation::ALL {
        let w = (0..30u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = Rng::new(500 + i).split(&format!("{act:?}"));
                let spec = random_spec(&mut rng, [5, 5, 3], act);
                let (params, data) = harness::random_instance(&spec, 2 + rng.index(7), &mut rng).expect("instance");
                let batch = data.full_batch().expect("batch");
                let obj = NetObjective { spec: &spec, batch: &batch };
                check_gradient_vs_fd(&obj, &params, 1e-5).expect("fd").violation
            })
            .reduce(|| 0.0, f64::max);
        detail.push(format!("{act:?}={w:.3}"));
        worst = worst.max(w);
    }
    Outcome::new(worst <= 1.0, format!("worst ratio to tolerance: {}", detail.join(" ")))
}

fn gd_auto_tuning(runs: &[(f64, Trajectory)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (eta_w, traj) in runs {
        let rm = traj.running_min_grad_sq();
        let diverged = traj.diverged.is_some() || rm.len() < 4096;
        let ratio = if diverged { f64::INFINITY } else { rm[4095] / rm[255] };
        ok &= !diverged && ratio <= 0.25;
        parts.push(format!("{eta_w:e}:{ratio:.3}"));
    }
    Outcome::new(ok, format!("min grad^2 ratio T=4096/T=256 {}", parts.join(" ")))
}

fn sgd_rates(runs: &[(f64, u64, Trajectory)]) -> Outcome {
    let mut ok = true;
    let mut lr_range = [f64::INFINITY, f64::NEG_INFINITY];
    let mut grad_max = f64::NEG_INFINITY;
    for (alpha, _, traj) in runs {
        if traj.diverged.is_some() {
            ok = false;
            continue;
        }
        let window = harness::tail_window(8192);
        let lr: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t as f64, r.mean_eff_lr())).collect();
        let gs: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t as f64, r.grad_sq_total())).collect();
        let grad_slope = fit_rate(&gs, window, true).map_or(f64::INFINITY, |f| f.slope);
        grad_max = grad_max.max(grad_slope);
        ok &= grad_slope <= -0.25;
        if *alpha < 0.5 {
            let s = fit_rate(&lr, window, false).map_or(f64::NAN, |f| f.slope);
            lr_range = [lr_range[0].min(s), lr_range[1].max(s)];
            ok &= (-0.65..=-0.05).contains(&s);
        }
    }
    Outcome::new(
        ok,
        format!(
            "eff-lr slopes (alpha<1/2) in [{:.3}, {:.3}], worst grad^2 slope {grad_max:.3}",
            lr_range[0], lr_range[1]
        ),
    )
}

fn smoothness_formula() -> Outcome {
    let spec = desk_network();
    let data = desk_dataset();
    let mut rng = Rng::new(11);
    let bound = lgg_formula(2, LAMBDA);
    let max = (0..50)
        .map(|_| probe_smoothness(&spec, &data, 1, 16, &mut rng).expect("probe").lgg)
        .fold(0.0, f64::max);
    Outcome::new(max <= bound, format!("max probed L^gg={max:.4} bound={bound}"))
}

fn g_norm_bound(runs: &[&Trajectory]) -> Outcome {
    let report = runs
        .iter()
        .map(|t| check_g_norm_bound(&t.records, 2, LAMBDA))
        .reduce(CheckReport::merge)
        .expect("runs");
    Outcome::new(report.passed, format!("{} runs, {report}", runs.len()))
}

fn settings_sweep(dir: &Path) -> Outcome {
    let cfg = settings_sweep_config(dir);
    let rows = match harness::sweep(&cfg, 8) {
        Ok(rows) => rows,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let cell = |k: usize, s: usize| &rows[3 * k + s];
    let mut ok = rows.iter().all(|r| !r.failed);
    let s1_stable = (0..5).all(|k| !cell(k, 0).diverged);
    let mut psgd = Vec::new();
    for k in 3..5 {
        let (s1, s2) = (cell(k, 0), cell(k, 1));
        let ratio = s2.last_epoch_mean_loss / s1.last_epoch_mean_loss;
        ok &= s2.diverged || ratio >= 2.0;
        psgd.push(if s2.diverged { format!("{:e}:diverged", s2.axis_value) } else { format!("{:e}:{ratio:.3}", s2.axis_value) });
    }
    let s3_div = cell(4, 2).diverged;
    ok &= s1_stable && s3_div;
    Outcome::new(
        ok,
        format!(
            "setting1 stable={s1_stable} psgd/sgd epoch loss {} bn-removed diverges at 1e2={s3_div}",
            psgd.join(" ")
        ),
    )
}

fn settings_sweep_config(dir: &Path) -> SweepConfig {
    SweepConfig {
        base: ExperimentConfig {
            network: desk_network(),
            trainer: TrainerConfig::sgd(1.0, 0.0, 0.1, 4, 2048, 0),
            dataset: desk_dataset_spec(),
            output_dir: dir.to_path_buf(),
            record_every: 1,
        },
        axis: SweepAxis::EtaW,
        values: ETA_GRID.to_vec(),
        settings: Some(vec![Setting::SgdBn, Setting::Psgd, Setting::BnRemoved]),
    }
}

fn sequence_lemma() -> Outcome {
    let results: Vec<(bool, f64)> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(i).split("sequence");
            let len = 2 + rng.index(999);
            let bound = rng.uniform(1e-3, 1e3);
            let a0 = bound * rng.uniform(1e-4, 1.0);
            let sparse = rng.index(2) == 0;
            let mut a = vec![a0];
            for _ in 1..len {
                let v = if sparse && rng.index(10) != 0 { 0.0 } else { rng.uniform(0.0, bound) };
                a.push(v);
            }
            let r = sequence_bound_check(&a, bound).expect("in domain");
            (r.passed, r.lhs / r.rhs)
        })
        .collect();
    let fails = results.iter().filter(|r| !r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Outcome::new(fails == 0, format!("10000 sequences, failures={fails}, max lhs/rhs={worst:.3}"))
}

fn weight_scale_monitor(runs: &[(f64, Trajectory)]) -> Outcome {
    let spec = desk_network();
    let data = desk_dataset();
    let est = probe_smoothness(&spec, &data, 50, data.len(), &mut Rng::new(11)).expect("probe");
    let eta_g = eta_g_default(2, LAMBDA, C_G).expect("eta_g");
    let mut ok = true;
    let mut parts = Vec::new();
    for (eta_w, traj) in runs {
        let w0: Vec<f64> = (0..traj.num_groups()).map(|i| traj.norm_sq_series(i)[0]).collect();
        let k = compute_bound_constants(&est, C_G, *eta_w, &w0, traj.min_loss()).expect("constants");
        let check = check_weight_scale_bound(traj, &k, *eta_w, eta_g, C_G);
        ok &= check.report.passed;
        parts.push(format!("{eta_w:e}:{:.2e}", check.report.violation));
    }
    Outcome::new(ok, format!("lhs/rhs {}", parts.join(" ")))
}

fn same_files(a: &Path, b: &Path) -> bool {
    matches!((fs::read(a), fs::read(b)), (Ok(x), Ok(y)) if x == y)
}

fn determinism(root: &Path) -> Outcome {
    let mut compared = 0;
    let mut ok = true;
    let configs = [gd_config(1.0), sgd_config(0.25, 0)];
    for (i, trainer) in configs.into_iter().enumerate() {
        let mut cfg = ExperimentConfig {
            network: desk_network(),
            trainer,
            dataset: desk_dataset_spec(),
            output_dir: root.join(format!("run{i}a")),
            record_every: 1,
        };
        let first = harness::run(&cfg);
        cfg.output_dir = root.join(format!("run{i}b"));
        let second = harness::run(&cfg);
        ok &= first.is_ok() && second.is_ok();
        ok &= same_files(&root.join(format!("run{i}a/trajectory.csv")), &cfg.output_dir.join("trajectory.csv"));
        compared += 1;
    }
    let serial = root.join("sweep_serial");
    let parallel = root.join("sweep_parallel");
    let run_serial = harness::sweep(&settings_sweep_config(&serial), 1);
    let run_parallel = harness::sweep(&settings_sweep_config(&parallel), 8);
    ok &= run_serial.is_ok() && run_parallel.is_ok();
    ok &= same_files(&serial.join("comparison.csv"), &parallel.join("comparison.csv"));
    for (index, _, _, cell) in settings_sweep_config(&serial).cells() {
        let other = settings_sweep_config(&parallel).cells()[index].3.output_dir.clone();
        ok &= same_files(&cell.output_dir.join("trajectory.csv"), &other.join("trajectory.csv"));
        compared += 1;
    }
    Outcome::new(ok, format!("{compared} trajectory CSVs compared byte-for-byte"))
}

fn timed(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            out.passed = false;
            out.detail.push_str(&format!(" (over budget {b:?})"));
        }
    }
    println!(
        "{} [{id:>2}] {name}: {} ({:.1}s)",
        if out.passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    out.passed
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("tempdir");
    let data = desk_dataset();
    let spec = desk_network();
    let secs = Duration::from_secs;
    let mut results = Vec::new();

    results.push(timed(1, "lemma suite", Some(secs(30)), lemma_suite));
    results.push(timed(2, "intrinsic adaptive equivalence", Some(secs(10)), intrinsic_equivalence));
    results.push(timed(3, "gradient oracle", Some(secs(60)), gradient_oracle));

    let mut gd_runs = Vec::new();
    results.push(timed(4, "gd auto-tuning", Some(secs(600)), || {
        gd_runs = ETA_GRID
            .par_iter()
            .map(|&eta| (eta, run_training(&spec, &gd_config(eta), &data).expect("gd run")))
            .collect();
        gd_auto_tuning(&gd_runs)
    }));

    let mut sgd_runs = Vec::new();
    results.push(timed(5, "sgd rates", Some(secs(1200)), || {
        let grid: Vec<(f64, u64)> = [0.0, 0.25, 0.5]
            .iter()
            .flat_map(|&a| (0..5u64).map(move |s| (a, s)))
            .collect();
        sgd_runs = grid
            .par_iter()
            .map(|&(a, s)| (a, s, run_training(&spec, &sgd_config(a, s), &data).expect("sgd run")))
            .collect();
        sgd_rates(&sgd_runs)
    }));

    results.push(timed(6, "smoothness formula", None, smoothness_formula));
    results.push(timed(7, "g-norm bound", None, || {
        let all: Vec<&Trajectory> = gd_runs.iter().map(|r| &r.1).chain(sgd_runs.iter().map(|r| &r.2)).collect();
        g_norm_bound(&all)
    }));
    results.push(timed(8, "settings sweep", Some(secs(900)), || settings_sweep(&tmp.path().join("sweep"))));
    results.push(timed(9, "sequence lemma", Some(secs(5)), sequence_lemma));
    results.push(timed(10, "weight-scale bound monitor", None, || weight_scale_monitor(&gd_runs)));
    results.push(timed(11, "determinism", None, || determinism(&tmp.path().join("determinism"))));

    let failed = results.iter().filter(|p| !**p).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
