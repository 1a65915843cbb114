//! Executable checks for the scale-invariance lemmas, with a central
//! finite-difference gradient oracle that is independent of the analytic
//! backward pass.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{forward_loss, loss_and_grad, Batch, Gradients, NetworkSpec, ParamState};
use crate::numcore::{dot_unchecked, norm2, norm2_sq};
use crate::optim::TrajectoryRecord;

/// Relative tolerance for the exact lemma checks.
pub const LEMMA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub samples: usize,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, violation: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            violation,
            tolerance,
            passed: violation <= tolerance,
            samples,
        }
    }

    /// Combines reports of the same check; keeps the worst violation.
    pub fn merge(self, other: CheckReport) -> CheckReport {
        let samples = self.samples + other.samples;
        let worst = if other.violation > self.violation || other.violation.is_nan() {
            other
        } else {
            self
        };
        CheckReport::new(worst.name, worst.violation, worst.tolerance, samples)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} violation={:.3e} tolerance={:.3e} samples={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.violation,
            self.tolerance,
            self.samples
        )
    }
}

/// Something with a value and gradient over the `(W; g)` partition.
pub trait Objective {
    fn loss(&self, params: &ParamState) -> Result<f64>;
    fn loss_and_grad(&self, params: &ParamState) -> Result<(f64, Gradients)>;
}

/// The network loss on a fixed batch.
pub struct NetObjective<'a> {
    pub spec: &'a NetworkSpec,
    pub batch: &'a Batch,
}

impl Objective for NetObjective<'_> {
    fn loss(&self, params: &ParamState) -> Result<f64> {
        forward_loss(self.spec, params, self.batch)
    }

    fn loss_and_grad(&self, params: &ParamState) -> Result<(f64, Gradients)> {
        loss_and_grad(self.spec, params, self.batch)
    }
}

/// Central differences `(f(x + h e_j) - f(x - h e_j)) / 2h` on every coordinate.
pub fn finite_diff_grad<F>(loss: F, params: &ParamState, h: f64) -> Result<Gradients>
where
    F: Fn(&ParamState) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::invalid("step h must be positive"));
    }
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for j in 0..base.len() {
        flat[j] = base[j] + h;
        probe.set_flat(&flat);
        let up = loss(&probe)?;
        flat[j] = base[j] - h;
        probe.set_flat(&flat);
        let down = loss(&probe)?;
        flat[j] = base[j];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss near coordinate {j}")));
        }
        out.push((up - down) / (2.0 * h));
    }
    let mut grads = params.zeros_like();
    grads.set_flat(&out);
    Ok(grads)
}

/// Worst `|analytic - fd| / max(1e-6, 1e-4 |fd|)` over all coordinates; passes at `<= 1`.
pub fn check_gradient_vs_fd(obj: &dyn Objective, params: &ParamState, h: f64) -> Result<CheckReport> {
    let (_, analytic) = obj.loss_and_grad(params)?;
    let fd = finite_diff_grad(|p| obj.loss(p), params, h)?;
    let a = analytic.to_flat();
    let f = fd.to_flat();
    let worst = a
        .iter()
        .zip(&f)
        .map(|(x, y)| (x - y).abs() / (1e-4 * y.abs()).max(1e-6))
        .fold(0.0, f64::max);
    Ok(CheckReport::new("gradient_vs_finite_differences", worst, 1.0, a.len()))
}

/// `max_{i,c} |F(w^(i) -> c w^(i)) - F|`, plus every group scaled at once.
pub fn check_scale_invariance(obj: &dyn Objective, params: &ParamState, scales: &[f64]) -> Result<CheckReport> {
    if scales.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::invalid("scales must be positive"));
    }
    let base = obj.loss(params)?;
    let mut worst = 0.0f64;
    let mut samples = 0;
    for &c in scales {
        for i in 0..params.num_groups() {
            let mut p = params.clone();
            p.scale_group(i, c);
            worst = worst.max((obj.loss(&p)? - base).abs());
            samples += 1;
        }
        let mut p = params.clone();
        p.scale_all_groups(c);
        worst = worst.max((obj.loss(&p)? - base).abs());
        samples += 1;
    }
    Ok(CheckReport::new(
        "scale_invariance",
        worst,
        LEMMA_TOL * (1.0 + base.abs()),
        samples,
    ))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn relative_dev(scaled: &[f64], reference: &[f64]) -> f64 {
    let scale = max_abs(reference).max(max_abs(scaled));
    if scale == 0.0 {
        return 0.0;
    }
    scaled
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Deviation of `c * grad(c w^(i))` from `grad(w^(i))` and of `grad_g` from
/// invariance, relative to each block's largest entry.
pub fn check_grad_scaling(obj: &dyn Objective, params: &ParamState, c: f64) -> Result<CheckReport> {
    if !(c > 0.0) {
        return Err(Error::invalid("scale must be positive"));
    }
    let (_, base) = obj.loss_and_grad(params)?;
    let mut worst = 0.0f64;
    for i in 0..params.num_groups() {
        let mut p = params.clone();
        p.scale_group(i, c);
        let (_, scaled) = obj.loss_and_grad(&p)?;
        let corrected: Vec<f64> = scaled.group(i).iter().map(|x| c * x).collect();
        worst = worst.max(relative_dev(&corrected, base.group(i)));
        for j in (0..params.num_groups()).filter(|&j| j != i) {
            worst = worst.max(relative_dev(scaled.group(j), base.group(j)));
        }
        worst = worst.max(relative_dev(&scaled.g, &base.g));
    }
    Ok(CheckReport::new("gradient_scaling", worst, LEMMA_TOL, params.num_groups()))
}

/// `max_i |<w^(i), grad_w^(i)>| / (|w^(i)| |grad_w^(i)|)`.
pub fn check_perpendicularity(obj: &dyn Objective, params: &ParamState) -> Result<CheckReport> {
    let (_, grads) = obj.loss_and_grad(params)?;
    let worst = params
        .groups()
        .zip(grads.groups())
        .map(|(w, gw)| {
            let denom = norm2(w) * norm2(gw);
            if denom == 0.0 {
                0.0
            } else {
                dot_unchecked(w, gw).abs() / denom
            }
        })
        .fold(0.0, f64::max);
    Ok(CheckReport::new("perpendicularity", worst, LEMMA_TOL, params.num_groups()))
}

/// One group's squared norms `|w_0|^2..|w_T|^2` with the applied squared
/// gradient norms and rates for `t < T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTrace {
    pub norm_sq: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub eta: Vec<f64>,
}

impl NormTrace {
    /// Builds a trace from explicit `(w_t, grad_t, eta_t)` steps plus the end point.
    pub fn from_steps(steps: &[(Vec<f64>, Vec<f64>, f64)], final_w: &[f64]) -> Self {
        let mut norm_sq: Vec<f64> = steps.iter().map(|(w, _, _)| norm2_sq(w)).collect();
        norm_sq.push(norm2_sq(final_w));
        Self {
            norm_sq,
            grad_sq: steps.iter().map(|(_, g, _)| norm2_sq(g)).collect(),
            eta: steps.iter().map(|s| s.2).collect(),
        }
    }

    /// One trace per group from a recorded trajectory.
    pub fn from_trajectory(traj: &crate::optim::Trajectory) -> Vec<NormTrace> {
        (0..traj.num_groups())
            .map(|i| NormTrace {
                norm_sq: traj.norm_sq_series(i),
                grad_sq: traj.records.iter().map(|r| r.step_grad_w_sq[i]).collect(),
                eta: traj.records.iter().map(|r| r.eta_w).collect(),
            })
            .collect()
    }
}

/// `max_t |‖w_{t+1}‖² − ‖w_t‖² − η_t²‖∇_t‖²| / ‖w_t‖²`.
pub fn check_norm_recursion(traces: &[NormTrace]) -> CheckReport {
    let mut worst = 0.0f64;
    let mut samples = 0;
    for tr in traces {
        for t in 0..tr.grad_sq.len() {
            let predicted = tr.norm_sq[t] + tr.eta[t] * tr.eta[t] * tr.grad_sq[t];
            let residual = (tr.norm_sq[t + 1] - predicted).abs() / tr.norm_sq[t];
            worst = worst.max(if residual.is_nan() { f64::INFINITY } else { residual });
            samples += 1;
        }
    }
    CheckReport::new("norm_recursion", worst, LEMMA_TOL, samples)
}

/// Worst ratio `|grad_w^(i) L| |w^(i)| / (pi L^vv_ii)` along a trajectory; passes at `<= 1`.
pub fn check_grad_norm_bound(records: &[TrajectoryRecord], lvv_diag: &[f64]) -> CheckReport {
    let mut worst = 0.0f64;
    let mut samples = 0;
    for r in records {
        for (gv, &l) in r.grad_v_sq.iter().zip(lvv_diag) {
            // |grad_w| |w| = |grad_v|
            let ratio = gv.sqrt() / (std::f64::consts::PI * l);
            worst = worst.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
            samples += 1;
        }
    }
    CheckReport::new("grad_norm_bound", worst, 1.0, samples)
}

/// `|g_t| <= max(|g_0|, sqrt(2C)/lambda)` at every recorded step.
pub fn check_g_norm_bound(records: &[TrajectoryRecord], classes: usize, lambda: f64) -> CheckReport {
    let Some(first) = records.first() else {
        return CheckReport::new("g_norm_bound", 0.0, 1e-9, 0);
    };
    let bound = first.g_norm.max((2.0 * classes as f64).sqrt() / lambda);
    let worst = records.iter().map(|r| r.g_norm - bound).fold(f64::NEG_INFINITY, f64::max);
    CheckReport::new("g_norm_bound", worst.max(0.0), 1e-9, records.len())
}
