//! Experiment configuration, single runs, sweeps and the invariance suite.
//!
//! A run writes three files into its output directory:
//!
//! - `trajectory.csv`: `t, loss, grad_v_sq_total, grad_g_sq, w_norm_0.., eff_lr_0..`
//! - `summary.json`: see [`Summary`]
//! - `config.json`: the resolved [`ExperimentConfig`]
//!
//! Every file is a pure function of the config, including under concurrent sweeps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_rate, RateFit};
use crate::dataset::{Dataset, DatasetSpec};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::invariance::{
    check_g_norm_bound, check_gradient_vs_fd, check_grad_scaling, check_norm_recursion,
    check_perpendicularity, check_scale_invariance, CheckReport, NetObjective, NormTrace,
};
use crate::netmodel::{BnMode, NetworkSpec, ParamState};
use crate::numcore::{Mat, Rng};
use crate::optim::{run_training, run_training_from, Divergence, OptimizerKind, Trajectory, TrainerConfig};

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    pub trainer: TrainerConfig,
    pub dataset: DatasetSpec,
    pub output_dir: PathBuf,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.trainer.validate()?;
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        if let Some(n) = self.dataset.n_points() {
            if self.trainer.optimizer.is_stochastic() && n < 2 * self.trainer.batch_size {
                return Err(Error::Config(format!(
                    "n_points = {n} must be at least twice batch_size = {}",
                    self.trainer.batch_size
                )));
            }
        }
        Ok(())
    }
}

/// Reads a JSON config; unknown keys are rejected.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFits {
    /// Running min of `|grad L(V_t; g_t)|^2` over `[T/8, T)`.
    pub grad_sq_running_min: Option<RateFit>,
    /// Mean effective learning rate over groups, same window.
    pub eff_lr: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps_completed: usize,
    pub final_loss: f64,
    pub min_loss: f64,
    /// Min over recorded rows of `grad_v_sq_total + grad_g_sq`.
    pub min_grad_sq: f64,
    /// Steps per epoch: `ceil(n / B)` for SGD/PSGD, 1 for full batch.
    pub epoch_steps: usize,
    pub epoch_mean_losses: Vec<f64>,
    pub last_epoch_mean_loss: f64,
    pub diverged: bool,
    pub divergence: Option<Divergence>,
    pub rate_fits: RateFits,
    pub checks: Vec<CheckReport>,
    pub final_w_norms: Vec<f64>,
    pub final_g_norm: f64,
}

pub struct RunOutput {
    pub trajectory: Trajectory,
    pub summary: Summary,
}

/// Tail window `[T/8, T)` of `0..T` for rate fits, as `(lo, hi)` in `t` units.
pub fn tail_window(steps: usize) -> (f64, f64) {
    ((steps as f64 / 8.0).max(1.0), (steps.max(2) - 1) as f64)
}

fn summarize(config: &ExperimentConfig, data: &Dataset, traj: &Trajectory) -> Summary {
    let records = &traj.records;
    let epoch_steps = if config.trainer.optimizer.is_stochastic() {
        data.len().div_ceil(config.trainer.batch_size)
    } else {
        1
    };
    let epoch_mean_losses: Vec<f64> = records
        .chunks(epoch_steps)
        .map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64)
        .collect();
    let recorded = records.iter().filter(|r| r.t % config.record_every == 0);
    let min_grad_sq = recorded.map(|r| r.grad_sq_total()).fold(f64::INFINITY, f64::min);

    let window = tail_window(records.len());
    let grad_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t as f64, r.grad_sq_total())).collect();
    let lr_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t as f64, r.mean_eff_lr())).collect();
    let rate_fits = RateFits {
        grad_sq_running_min: fit_rate(&grad_series, window, true).ok(),
        eff_lr: fit_rate(&lr_series, window, false).ok(),
    };

    let mut checks = Vec::new();
    match config.trainer.optimizer {
        OptimizerKind::Psgd => {
            let worst = (0..traj.num_groups())
                .flat_map(|i| {
                    let s = traj.norm_sq_series(i);
                    let s0 = s[0];
                    s.into_iter().map(move |x| (x - s0).abs() / s0)
                })
                .fold(0.0, f64::max);
            checks.push(CheckReport::new("norm_constant", worst, 1e-10, records.len()));
        }
        _ => checks.push(check_norm_recursion(&NormTrace::from_trajectory(traj))),
    }
    if config.network.bn_mode == BnMode::Smoothed {
        checks.push(check_g_norm_bound(records, config.network.num_classes(), config.network.lambda));
    }

    Summary {
        steps_completed: records.len(),
        final_loss: records.last().map_or(f64::NAN, |r| r.loss),
        min_loss: traj.min_loss(),
        min_grad_sq,
        epoch_steps,
        last_epoch_mean_loss: epoch_mean_losses.last().copied().unwrap_or(f64::NAN),
        epoch_mean_losses,
        diverged: traj.diverged.is_some(),
        divergence: traj.diverged.clone(),
        rate_fits,
        checks,
        final_w_norms: traj.final_w_norm_sq.iter().map(|x| x.sqrt()).collect(),
        final_g_norm: crate::numcore::norm2(&traj.final_params.g),
    }
}

/// Trains without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let data = config.dataset.load()?;
    let trajectory = run_training(&config.network, &config.trainer, &data)?;
    let summary = summarize(config, &data, &trajectory);
    Ok(RunOutput { trajectory, summary })
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, record_every: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let m = traj.num_groups();
    let mut header = vec![
        "t".to_string(),
        "loss".into(),
        "grad_v_sq_total".into(),
        "grad_g_sq".into(),
    ];
    header.extend((0..m).map(|i| format!("w_norm_{i}")));
    header.extend((0..m).map(|i| format!("eff_lr_{i}")));
    w.write_record(&header)?;
    for r in traj.records.iter().filter(|r| r.t % record_every == 0) {
        let mut row = vec![
            r.t.to_string(),
            fmt_f64(r.loss),
            fmt_f64(r.grad_v_sq_total()),
            fmt_f64(r.grad_g_sq),
        ];
        row.extend(r.w_norms().into_iter().map(fmt_f64));
        row.extend(r.eff_lr.iter().copied().map(fmt_f64));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Trains and writes `trajectory.csv`, `summary.json` and `config.json`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let out = execute(config)?;
    fs::create_dir_all(&config.output_dir)?;
    write_trajectory_csv(
        &config.output_dir.join("trajectory.csv"),
        &out.trajectory,
        config.record_every,
    )?;
    write_json(&config.output_dir.join("summary.json"), &out.summary)?;
    write_json(&config.output_dir.join("config.json"), config)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    EtaW,
    EtaG,
    /// Same initial rate for `W` and `g`.
    Eta,
    Alpha,
}

/// The three training setups compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// SGD on the smoothed-BN network.
    SgdBn,
    /// Projected SGD on the smoothed-BN network.
    Psgd,
    /// SGD with every BN replaced by the identity. Nothing is
    /// scale-invariant, so an `eta-w` axis value drives `W` and `g` alike.
    BnRemoved,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::SgdBn => "sgd-bn",
            Setting::Psgd => "psgd",
            Setting::BnRemoved => "bn-removed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// When absent, the base config runs unchanged along the axis.
    #[serde(default)]
    pub settings: Option<Vec<Setting>>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if matches!(&self.settings, Some(s) if s.is_empty()) {
            return Err(Error::Config("settings list is empty".into()));
        }
        Ok(())
    }

    fn settings(&self) -> Vec<Option<Setting>> {
        match &self.settings {
            Some(s) => s.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }

    /// Cell configs in table order: value-major, then setting.
    pub fn cells(&self) -> Vec<(usize, f64, Option<Setting>, ExperimentConfig)> {
        let mut out = Vec::new();
        for &value in &self.values {
            for setting in self.settings() {
                let index = out.len();
                let cfg = self.cell_config(index, value, setting);
                out.push((index, value, setting, cfg));
            }
        }
        out
    }

    fn cell_config(&self, index: usize, value: f64, setting: Option<Setting>) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        if let Some(s) = setting {
            cfg.trainer.optimizer = match s {
                Setting::Psgd => OptimizerKind::Psgd,
                Setting::SgdBn | Setting::BnRemoved => OptimizerKind::Sgd,
            };
            cfg.network.bn_mode = match s {
                Setting::BnRemoved => BnMode::Removed,
                _ => BnMode::Smoothed,
            };
        }
        let unified = setting == Some(Setting::BnRemoved);
        match self.axis {
            SweepAxis::EtaW => {
                cfg.trainer.eta_w.eta0 = value;
                if unified {
                    cfg.trainer.eta_g.eta0 = value;
                }
            }
            SweepAxis::EtaG => cfg.trainer.eta_g.eta0 = value,
            SweepAxis::Eta => {
                cfg.trainer.eta_w.eta0 = value;
                cfg.trainer.eta_g.eta0 = value;
            }
            SweepAxis::Alpha => {
                cfg.trainer.eta_w.kind = crate::optim::ScheduleKind::Power;
                cfg.trainer.eta_w.alpha = value;
            }
        }
        let tag = setting.map_or("base", Setting::name);
        cfg.output_dir = self.base.output_dir.join(format!("cell_{index:03}_{tag}"));
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub setting: String,
    pub axis_value: f64,
    pub final_loss: f64,
    pub last_epoch_mean_loss: f64,
    pub min_grad_sq: f64,
    pub diverged: bool,
    pub failed: bool,
    pub error: String,
}

impl SweepRow {
    pub fn completed(&self) -> bool {
        !self.failed
    }
}

/// One run per grid cell (at most `jobs` at a time), then `comparison.csv`
/// in `base.output_dir`, ordered by cell index.
pub fn sweep(config: &SweepConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let cells = config.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|(index, value, setting, cfg)| {
                let setting = setting.map_or("base", Setting::name).to_string();
                match run(cfg) {
                    Ok(out) => SweepRow {
                        index: *index,
                        setting,
                        axis_value: *value,
                        final_loss: out.summary.final_loss,
                        last_epoch_mean_loss: out.summary.last_epoch_mean_loss,
                        min_grad_sq: out.summary.min_grad_sq,
                        diverged: out.summary.diverged,
                        failed: false,
                        error: String::new(),
                    },
                    Err(e) => SweepRow {
                        index: *index,
                        setting,
                        axis_value: *value,
                        final_loss: f64::NAN,
                        last_epoch_mean_loss: f64::NAN,
                        min_grad_sq: f64::NAN,
                        diverged: false,
                        failed: true,
                        error: e.to_string(),
                    },
                }
            })
            .collect()
    });
    fs::create_dir_all(&config.base.output_dir)?;
    write_comparison_csv(&config.base.output_dir.join("comparison.csv"), config.axis, &rows)?;
    Ok(rows)
}

pub fn write_comparison_csv(path: &Path, axis: SweepAxis, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let axis_name = serde_json::to_value(axis)?.as_str().unwrap_or("value").to_string();
    w.write_record([
        "index",
        "setting",
        axis_name.as_str(),
        "final_loss",
        "last_epoch_mean_loss",
        "min_grad_sq",
        "diverged",
        "status",
        "error",
    ])?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.setting.clone(),
            fmt_f64(r.axis_value),
            fmt_f64(r.final_loss),
            fmt_f64(r.last_epoch_mean_loss),
            fmt_f64(r.min_grad_sq),
            r.diverged.to_string(),
            if r.failed { "failed" } else { "ok" }.to_string(),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub instances: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub scales: Vec<f64>,
    pub gd_steps: usize,
    pub fd_step: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            instances: 10,
            batch_size: 8,
            seed: 0,
            scales: vec![1e-3, 7.0, 1e3],
            gd_steps: 200,
            fd_step: 1e-5,
        }
    }
}

/// Random Gaussian parameters and a random labeled batch for `spec`.
pub fn random_instance(spec: &NetworkSpec, batch_size: usize, rng: &mut Rng) -> Result<(ParamState, Dataset)> {
    let params = ParamState::gaussian(spec, rng);
    let d = spec.input_dim();
    let c = spec.num_classes();
    let inputs = Mat::from_vec(batch_size, d, (0..batch_size * d).map(|_| rng.normal()).collect())?;
    let labels = (0..batch_size).map(|_| rng.index(c)).collect();
    Ok((params, Dataset::new(inputs, labels, c)?))
}

/// The exact lemma checks on `opts.instances` random instances of `spec`,
/// merged per check: scale invariance, 1/c gradient scaling, perpendicularity,
/// finite differences and the GD norm recursion.
pub fn check_suite(spec: &NetworkSpec, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    spec.validate()?;
    let mut rng = Rng::new(opts.seed).split("check-suite");
    let mut merged: Vec<CheckReport> = Vec::new();
    for _ in 0..opts.instances {
        let (params, data) = random_instance(spec, opts.batch_size, &mut rng)?;
        let batch = data.full_batch()?;
        let obj = NetObjective { spec, batch: &batch };
        let mut reports = vec![check_scale_invariance(&obj, &params, &opts.scales)?];
        let mut scaling: Option<CheckReport> = None;
        for &c in &opts.scales {
            let r = check_grad_scaling(&obj, &params, c)?;
            scaling = Some(match scaling {
                Some(s) => s.merge(r),
                None => r,
            });
        }
        reports.extend(scaling);
        reports.push(check_perpendicularity(&obj, &params)?);
        reports.push(check_gradient_vs_fd(&obj, &params, opts.fd_step)?);
        if opts.gd_steps > 0 {
            let cfg = TrainerConfig::gd(1.0, 0.1, opts.gd_steps, rng.next_u64());
            let traj = run_training_from(spec, &cfg, &data, params.clone())?;
            reports.push(check_norm_recursion(&NormTrace::from_trajectory(&traj)));
        }
        merged = if merged.is_empty() {
            reports
        } else {
            merged.into_iter().zip(reports).map(|(a, b)| a.merge(b)).collect()
        };
    }
    Ok(merged)
}

/// Reads one column of a trajectory CSV as `(t, value)` pairs. The virtual
/// column `grad_sq_total` is `grad_v_sq_total + grad_g_sq`.
pub fn read_trajectory_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column {name:?} not found in {}", path.display())))
    };
    let t_idx = find("t")?;
    let cols: Vec<usize> = if column == "grad_sq_total" {
        vec![find("grad_v_sq_total")?, find("grad_g_sq")?]
    } else {
        vec![find(column)?]
    };
    let mut out = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    row: r + 1,
                    column: j + 1,
                    message: "not a number".into(),
                })
        };
        let t = parse(t_idx)?;
        let mut v = 0.0;
        for &j in &cols {
            v += parse(j)?;
        }
        out.push((t, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::Activation;
    use crate::optim::LrSchedule;

    fn base(dir: &Path, steps: usize) -> ExperimentConfig {
        ExperimentConfig {
            network: NetworkSpec::new(vec![3, 4, 2], Activation::Sigmoid),
            trainer: TrainerConfig::gd(0.5, 0.5, steps, 1),
            dataset: DatasetSpec::GaussianBlobs {
                d: 3,
                classes: 2,
                n_points: 40,
                separation: 2.0,
                scale: 1.0,
                seed: 3,
            },
            output_dir: dir.to_path_buf(),
            record_every: 1,
        }
    }

    #[test]
    fn trajectory_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base(dir.path(), 10);
        let out = run(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert!(lines[0].starts_with("t,loss,grad_v_sq_total,grad_g_sq,w_norm_0,"));
        assert!(lines[0].ends_with("eff_lr_5"));
        let col = read_trajectory_column(&dir.path().join("trajectory.csv"), "grad_sq_total").unwrap();
        let min = col.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(min, out.summary.min_grad_sq);
        assert!(dir.path().join("summary.json").exists());
        let back: ExperimentConfig = load_config(&dir.path().join("config.json")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn record_every_thins_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base(dir.path(), 10);
        cfg.record_every = 3;
        run(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut cfg = base(a.path(), 30);
        cfg.trainer = TrainerConfig::sgd(1.0, 0.25, 0.5, 8, 30, 9);
        run(&cfg).unwrap();
        cfg.output_dir = b.path().to_path_buf();
        run(&cfg).unwrap();
        for f in ["trajectory.csv", "summary.json"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base(dir.path(), 5);
        let mut v = serde_json::to_value(&cfg).unwrap();
        v["trainer"]["eta_ww"] = serde_json::json!(0.1);
        let path = dir.path().join("bad.json");
        fs::write(&path, v.to_string()).unwrap();
        let err = load_config::<ExperimentConfig>(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn degenerate_sweep_matches_run() {
        let dir = tempfile::tempdir().unwrap();
        let sweep_cfg = SweepConfig {
            base: base(dir.path(), 12),
            axis: SweepAxis::EtaW,
            values: vec![0.5],
            settings: None,
        };
        let rows = sweep(&sweep_cfg, 2).unwrap();
        assert_eq!(rows.len(), 1);
        let single = execute(&base(dir.path(), 12)).unwrap();
        assert_eq!(rows[0].final_loss, single.summary.final_loss);
        assert!(dir.path().join("comparison.csv").exists());
    }

    #[test]
    fn sweep_table_is_complete_and_ordered() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = base(dir.path(), 20);
        b.trainer = TrainerConfig::sgd(1.0, 0.0, 0.1, 8, 20, 4);
        b.trainer.eta_g = LrSchedule::power(0.1, 0.5);
        let cfg = SweepConfig {
            base: b,
            axis: SweepAxis::EtaW,
            values: vec![0.1, 1.0, -1.0],
            settings: Some(vec![Setting::SgdBn, Setting::Psgd, Setting::BnRemoved]),
        };
        let serial = sweep(&cfg, 1).unwrap();
        let table1 = fs::read(dir.path().join("comparison.csv")).unwrap();
        let parallel = sweep(&cfg, 4).unwrap();
        let table2 = fs::read(dir.path().join("comparison.csv")).unwrap();
        assert_eq!(table1, table2);
        assert_eq!(serial.len(), parallel.len());
        assert_eq!(parallel.len(), 9);
        assert!(parallel.iter().enumerate().all(|(i, r)| r.index == i));
        // negative eta fails validation in-table, the rest complete
        assert!(parallel[6..].iter().all(|r| r.failed));
        assert!(parallel[..6].iter().all(SweepRow::completed));
    }

    #[test]
    fn suite_passes_on_smoothed_network() {
        let spec = NetworkSpec::new(vec![3, 3, 2], Activation::Softplus);
        let opts = SuiteOptions {
            instances: 3,
            gd_steps: 50,
            ..SuiteOptions::default()
        };
        let reports = check_suite(&spec, &opts).unwrap();
        assert_eq!(reports.len(), 5);
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
    }
}
