//! Two-rate gradient descent, scheduled SGD, projected SGD and the
//! intrinsic adaptive method, plus the trainer that records trajectories.
//!
//! For a scale-invariant group `w`, the intrinsic gradient at `v = w/|w|`
//! is `|w| * grad_w`, so `|grad_v|^2 = |w|^2 |grad_w|^2`. The effective
//! learning rate of the group is `eta_w(t) / |w_t|^2`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::netmodel::{loss_and_grad, Batch, Gradients, NetworkSpec, ParamState};
use crate::numcore::{axpy, norm2, norm2_sq, Rng};

/// Loss above this value counts as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    Power,
}

/// `eta(t) = eta0 * (t + 1)^(-alpha)`; `alpha` is ignored for `Constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub eta0: f64,
    #[serde(default)]
    pub alpha: f64,
}

impl LrSchedule {
    pub fn constant(eta0: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            eta0,
            alpha: 0.0,
        }
    }

    pub fn power(eta0: f64, alpha: f64) -> Self {
        Self {
            kind: ScheduleKind::Power,
            eta0,
            alpha,
        }
    }

    pub fn exponent(&self) -> f64 {
        match self.kind {
            ScheduleKind::Constant => 0.0,
            ScheduleKind::Power => self.alpha,
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.eta0,
            ScheduleKind::Power => self.eta0 * ((t + 1) as f64).powf(-self.alpha),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.eta0 >= 0.0) || !self.eta0.is_finite() {
            return Err(Error::Config(format!("{what}: eta0 must be finite and >= 0")));
        }
        if !(0.0..=0.5).contains(&self.exponent()) {
            return Err(Error::Config(format!("{what}: alpha must lie in [0, 1/2]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Full-batch two-rate gradient descent.
    Gd,
    Sgd,
    /// SGD followed by rescaling every group to its initial norm.
    Psgd,
    /// Projected updates on `(v, G)`; equivalent to `Gd` on `w`.
    Intrinsic,
}

impl OptimizerKind {
    pub fn is_stochastic(self) -> bool {
        matches!(self, OptimizerKind::Sgd | OptimizerKind::Psgd)
    }
}

fn default_c_g() -> f64 {
    0.1
}
fn default_batch_size() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub optimizer: OptimizerKind,
    pub eta_w: LrSchedule,
    pub eta_g: LrSchedule,
    pub steps: usize,
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_c_g")]
    pub c_g: f64,
}

impl TrainerConfig {
    pub fn gd(eta_w: f64, eta_g: f64, steps: usize, seed: u64) -> Self {
        Self {
            optimizer: OptimizerKind::Gd,
            eta_w: LrSchedule::constant(eta_w),
            eta_g: LrSchedule::constant(eta_g),
            steps,
            seed,
            batch_size: default_batch_size(),
            c_g: default_c_g(),
        }
    }

    /// SGD with `eta_w * (t+1)^-alpha` and `eta_g * (t+1)^-1/2`.
    pub fn sgd(eta_w: f64, alpha: f64, eta_g: f64, batch_size: usize, steps: usize, seed: u64) -> Self {
        Self {
            optimizer: OptimizerKind::Sgd,
            eta_w: LrSchedule::power(eta_w, alpha),
            eta_g: LrSchedule::power(eta_g, 0.5),
            steps,
            seed,
            batch_size,
            c_g: default_c_g(),
        }
    }

    pub fn with_optimizer(mut self, kind: OptimizerKind) -> Self {
        self.optimizer = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.c_g > 0.0 && self.c_g < 1.0) {
            return Err(Error::Config("c_g must lie in (0, 1)".into()));
        }
        self.eta_w.validate("eta_w")?;
        self.eta_g.validate("eta_g")?;
        if self.optimizer.is_stochastic() {
            if self.batch_size < 2 {
                return Err(Error::Config("batch_size must be >= 2".into()));
            }
            if self.eta_g.kind != ScheduleKind::Power || self.eta_g.alpha != 0.5 {
                return Err(Error::Config(
                    "stochastic optimizers use eta_g * (t+1)^(-1/2): set eta_g kind=power, alpha=0.5"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// `w <- w - eta_w grad_w`, `g <- g - eta_g grad_g`.
pub fn gd_step(params: &ParamState, grads: &Gradients, eta_w: f64, eta_g: f64) -> ParamState {
    let mut out = params.clone();
    for (w, gw) in out.weights.iter_mut().zip(&grads.weights) {
        axpy(-eta_w, gw.as_slice(), w.as_mut_slice());
    }
    axpy(-eta_g, &grads.g, &mut out.g);
    out
}

/// [`gd_step`] followed by rescaling each group to `target_norms[i]`.
pub fn psgd_step(
    params: &ParamState,
    grads: &Gradients,
    eta_w: f64,
    eta_g: f64,
    target_norms: &[f64],
) -> Result<ParamState> {
    if target_norms.len() != params.num_groups() {
        return Err(Error::DimensionMismatch {
            expected: params.num_groups(),
            actual: target_norms.len(),
        });
    }
    if target_norms.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::invalid("target norms must be positive"));
    }
    let mut out = gd_step(params, grads, eta_w, eta_g);
    for (i, &target) in target_norms.iter().enumerate() {
        let n = norm2(out.group(i));
        if !(n > 0.0) {
            return Err(Error::ZeroNorm(i));
        }
        out.scale_group(i, target / n);
    }
    Ok(out)
}

/// Directions `v^(i)` on the unit sphere and accumulators `G^(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicState {
    pub directions: Vec<Vec<f64>>,
    pub accumulators: Vec<f64>,
}

impl IntrinsicState {
    /// `v = w / |w|`, `G = |w|^2` for every group.
    pub fn from_params(params: &ParamState) -> Result<Self> {
        let mut directions = Vec::with_capacity(params.num_groups());
        let mut accumulators = Vec::with_capacity(params.num_groups());
        for (i, w) in params.groups().enumerate() {
            let sq = norm2_sq(w);
            if !(sq > 0.0) {
                return Err(Error::ZeroNorm(i));
            }
            let n = sq.sqrt();
            directions.push(w.iter().map(|x| x / n).collect());
            accumulators.push(sq);
        }
        Ok(Self {
            directions,
            accumulators,
        })
    }
}

/// `v <- Pi(v - (eta/G) grad_v)`, `G <- G + (eta^2/G) |grad_v|^2`.
pub fn intrinsic_step(state: &IntrinsicState, grad_v: &[Vec<f64>], eta: f64) -> Result<IntrinsicState> {
    if grad_v.len() != state.directions.len() {
        return Err(Error::DimensionMismatch {
            expected: state.directions.len(),
            actual: grad_v.len(),
        });
    }
    let mut next = state.clone();
    for (i, ((v, acc), gv)) in next
        .directions
        .iter_mut()
        .zip(next.accumulators.iter_mut())
        .zip(grad_v)
        .enumerate()
    {
        if gv.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                actual: gv.len(),
            });
        }
        if !(*acc > 0.0) {
            return Err(Error::invalid(format!("accumulator {i} must be positive")));
        }
        let g_prev = *acc;
        axpy(-eta / g_prev, gv, v);
        let n = norm2(v);
        if !(n > 0.0) {
            return Err(Error::ZeroNorm(i));
        }
        v.iter_mut().for_each(|x| *x /= n);
        *acc = g_prev + eta * eta / g_prev * norm2_sq(gv);
    }
    Ok(next)
}

/// `eta_w(t) / |w|^2`.
pub fn effective_lr(eta_w_t: f64, w_norm_sq: f64) -> Result<f64> {
    if !(w_norm_sq > 0.0) {
        return Err(Error::invalid("weight norm must be positive"));
    }
    Ok(eta_w_t / w_norm_sq)
}

/// `eta_g = 2(1 - c_g) / L^gg` with `L^gg = C/2 + lambda`, i.e. `4(1 - c_g)/(C + 2 lambda)`.
pub fn eta_g_default(classes: usize, lambda: f64, c_g: f64) -> Result<f64> {
    if classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive"));
    }
    if !(c_g > 0.0 && c_g < 1.0) {
        return Err(Error::invalid("c_g must lie in (0, 1)"));
    }
    Ok(4.0 * (1.0 - c_g) / (classes as f64 + 2.0 * lambda))
}

/// Metrics at step `t`, measured at `theta_t` before the update.
///
/// `loss`, `grad_v_sq` and `grad_g_sq` are evaluated on the full dataset;
/// `step_grad_w_sq` is the squared norm of the gradient actually applied
/// (the minibatch gradient for SGD/PSGD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub loss: f64,
    pub grad_v_sq: Vec<f64>,
    pub grad_g_sq: f64,
    pub w_norm_sq: Vec<f64>,
    pub eff_lr: Vec<f64>,
    pub eta_w: f64,
    pub eta_g: f64,
    pub g_norm: f64,
    pub step_grad_w_sq: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn grad_v_sq_total(&self) -> f64 {
        self.grad_v_sq.iter().sum()
    }

    /// `|grad L(V_t; g_t)|^2`.
    pub fn grad_sq_total(&self) -> f64 {
        self.grad_v_sq_total() + self.grad_g_sq
    }

    pub fn w_norms(&self) -> Vec<f64> {
        self.w_norm_sq.iter().map(|x| x.sqrt()).collect()
    }

    pub fn mean_eff_lr(&self) -> f64 {
        self.eff_lr.iter().sum::<f64>() / self.eff_lr.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub initial_params: ParamState,
    /// Parameters after the last completed step. For the intrinsic method
    /// the weights hold the unit directions.
    pub final_params: ParamState,
    pub final_w_norm_sq: Vec<f64>,
    pub diverged: Option<Divergence>,
}

impl Trajectory {
    pub fn num_groups(&self) -> usize {
        self.final_w_norm_sq.len()
    }

    /// `|w^(i)_t|^2` for `t = 0..=records.len()`.
    pub fn norm_sq_series(&self, group: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.records.iter().map(|r| r.w_norm_sq[group]).collect();
        out.push(self.final_w_norm_sq[group]);
        out
    }

    /// `min_{tau <= t} |grad L(V_tau; g_tau)|^2` for every recorded `t`.
    pub fn running_min_grad_sq(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.grad_sq_total());
                best
            })
            .collect()
    }

    pub fn min_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min)
    }
}

/// Single-run stepping state; [`run_training`] drives one to completion.
pub struct Trainer<'a> {
    spec: &'a NetworkSpec,
    config: &'a TrainerConfig,
    data: &'a Dataset,
    full: Batch,
    params: ParamState,
    accumulators: Option<Vec<f64>>,
    target_norms: Vec<f64>,
    batch_rng: Rng,
    t: usize,
}

impl<'a> Trainer<'a> {
    /// Glorot initialization from the config seed.
    pub fn new(spec: &'a NetworkSpec, config: &'a TrainerConfig, data: &'a Dataset) -> Result<Self> {
        let init = ParamState::glorot(spec, &mut Rng::new(config.seed).split("init"));
        Self::with_params(spec, config, data, init)
    }

    pub fn with_params(
        spec: &'a NetworkSpec,
        config: &'a TrainerConfig,
        data: &'a Dataset,
        init: ParamState,
    ) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        if data.dim() != spec.input_dim() {
            return Err(Error::Config(format!(
                "dataset has {} features, network expects {}",
                data.dim(),
                spec.input_dim()
            )));
        }
        if data.num_classes > spec.num_classes() {
            return Err(Error::Config(format!(
                "dataset has {} classes, network outputs {}",
                data.num_classes,
                spec.num_classes()
            )));
        }
        let full = data.full_batch()?;
        let target_norms = init.group_norms();
        let (params, accumulators) = if config.optimizer == OptimizerKind::Intrinsic {
            let state = IntrinsicState::from_params(&init)?;
            let mut p = init.clone();
            for (i, v) in state.directions.iter().enumerate() {
                p.group_mut(i).copy_from_slice(v);
            }
            (p, Some(state.accumulators))
        } else {
            (init, None)
        };
        if target_norms.iter().any(|&n| !(n > 0.0)) {
            return Err(Error::invalid("initial weights contain a zero-norm group"));
        }
        Ok(Self {
            spec,
            config,
            data,
            full,
            params,
            accumulators,
            target_norms,
            batch_rng: Rng::new(config.seed).split("batches"),
            t: 0,
        })
    }

    pub fn step_index(&self) -> usize {
        self.t
    }

    pub fn params(&self) -> &ParamState {
        &self.params
    }

    /// `|w^(i)|^2`, or `G^(i)` for the intrinsic method.
    pub fn w_norm_sq(&self) -> Vec<f64> {
        match &self.accumulators {
            Some(acc) => acc.clone(),
            None => self.params.group_norms_sq(),
        }
    }

    /// Unit directions `v^(i) = w^(i) / |w^(i)|`.
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.params
            .groups()
            .map(|w| {
                let n = norm2(w);
                w.iter().map(|x| x / n).collect()
            })
            .collect()
    }

    /// Performs one update; returns the record measured before it, or the
    /// divergence that stopped it.
    pub fn step(&mut self) -> std::result::Result<TrajectoryRecord, Divergence> {
        let t = self.t;
        let diverge = |reason: String| Divergence { step: t, reason };
        let eta_w = self.config.eta_w.at(t);
        let eta_g = self.config.eta_g.at(t);

        let (loss, full_grads) =
            loss_and_grad(self.spec, &self.params, &self.full).map_err(|e| diverge(e.to_string()))?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(diverge(format!("loss {loss}")));
        }
        if !full_grads.is_finite() {
            return Err(diverge("non-finite gradient".into()));
        }
        let w_norm_sq = self.w_norm_sq();
        // Intrinsic params are stored at unit norm, so this is |grad_v|^2 either way.
        let grad_v_sq: Vec<f64> = full_grads
            .groups()
            .zip(self.params.groups())
            .map(|(gw, w)| norm2_sq(gw) * norm2_sq(w))
            .collect();

        let step_grads = if self.config.optimizer.is_stochastic() {
            let batch = self
                .data
                .sample_batch(&mut self.batch_rng, self.config.batch_size)
                .map_err(|e| diverge(e.to_string()))?;
            let (_, g) = loss_and_grad(self.spec, &self.params, &batch).map_err(|e| diverge(e.to_string()))?;
            if !g.is_finite() {
                return Err(diverge("non-finite minibatch gradient".into()));
            }
            g
        } else {
            full_grads.clone()
        };

        let step_grad_w_sq: Vec<f64> = match &self.accumulators {
            // grad_w = grad_v / |w| at the unit point.
            Some(acc) => step_grads.groups().zip(acc).map(|(g, a)| norm2_sq(g) / a).collect(),
            None => step_grads.groups().map(norm2_sq).collect(),
        };
        let record = TrajectoryRecord {
            t,
            loss,
            grad_v_sq,
            grad_g_sq: norm2_sq(&full_grads.g),
            eff_lr: w_norm_sq.iter().map(|n| eta_w / n).collect(),
            w_norm_sq,
            eta_w,
            eta_g,
            g_norm: norm2(&self.params.g),
            step_grad_w_sq,
        };

        let next = match self.config.optimizer {
            OptimizerKind::Gd | OptimizerKind::Sgd => gd_step(&self.params, &step_grads, eta_w, eta_g),
            OptimizerKind::Psgd => psgd_step(&self.params, &step_grads, eta_w, eta_g, &self.target_norms)
                .map_err(|e| diverge(e.to_string()))?,
            OptimizerKind::Intrinsic => {
                let acc = self.accumulators.as_ref().expect("intrinsic accumulators");
                let state = IntrinsicState {
                    directions: self.params.groups().map(<[f64]>::to_vec).collect(),
                    accumulators: acc.clone(),
                };
                let grad_v: Vec<Vec<f64>> = step_grads.groups().map(<[f64]>::to_vec).collect();
                let next_state = intrinsic_step(&state, &grad_v, eta_w).map_err(|e| diverge(e.to_string()))?;
                let mut p = self.params.clone();
                for (i, v) in next_state.directions.iter().enumerate() {
                    p.group_mut(i).copy_from_slice(v);
                }
                axpy(-eta_g, &step_grads.g, &mut p.g);
                self.accumulators = Some(next_state.accumulators);
                p
            }
        };
        if !next.is_finite() {
            return Err(diverge("non-finite parameters".into()));
        }
        self.params = next;
        self.t += 1;
        Ok(record)
    }
}

/// Runs `config.steps` updates from a Glorot initialization seeded by `config.seed`.
pub fn run_training(spec: &NetworkSpec, config: &TrainerConfig, data: &Dataset) -> Result<Trajectory> {
    let init = ParamState::glorot(spec, &mut Rng::new(config.seed).split("init"));
    run_training_from(spec, config, data, init)
}

pub fn run_training_from(
    spec: &NetworkSpec,
    config: &TrainerConfig,
    data: &Dataset,
    init: ParamState,
) -> Result<Trajectory> {
    let mut trainer = Trainer::with_params(spec, config, data, init.clone())?;
    let mut records = Vec::with_capacity(config.steps);
    let mut diverged = None;
    for _ in 0..config.steps {
        match trainer.step() {
            Ok(r) => records.push(r),
            Err(d) => {
                diverged = Some(d);
                break;
            }
        }
    }
    Ok(Trajectory {
        records,
        initial_params: init,
        final_w_norm_sq: trainer.w_norm_sq(),
        final_params: trainer.params,
        diverged,
    })
}
