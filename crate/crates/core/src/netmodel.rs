//! Feedforward classifier with smoothed batch normalization.
//!
//! Every layer `l` maps its input through `W^(l)` and a batch-norm unit per
//! row. Rows of every weight matrix are scale-invariant parameter groups;
//! the only scale-variant parameters are the last layer's BN scale and
//! shift, packed into `g = (gamma_1..gamma_C, beta_1..beta_C)`. Internal BN
//! scale/shift are frozen constants of the [`NetworkSpec`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{axpy, dot_unchecked, glorot_init, norm2, norm2_sq, Mat, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softplus,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Sigmoid, Activation::Tanh, Activation::Softplus];

    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Softplus => (-z.abs()).exp().ln_1p() + z.max(0.0),
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Softplus => sigmoid(z),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// How the pre-activation `w^T x_b` is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BnMode {
    /// `gamma * w^T(x_b - u) / sqrt(Var + eps * |w|^2) + beta`; scale-invariant in `w`.
    #[default]
    Smoothed,
    /// `gamma * w^T(x_b - u) / sqrt(Var + eps) + beta`; breaks scale invariance.
    Classic,
    /// No normalization: `gamma * w^T x_b + beta`.
    Removed,
}

/// Frozen per-unit constants for the internal BN layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitValues {
    Uniform(f64),
    /// One vector per internal layer, one entry per unit.
    PerUnit(Vec<Vec<f64>>),
}

impl UnitValues {
    fn get(&self, layer: usize, unit: usize) -> f64 {
        match self {
            UnitValues::Uniform(v) => *v,
            UnitValues::PerUnit(v) => v[layer][unit],
        }
    }

    fn check(&self, widths: &[usize], name: &str) -> Result<()> {
        if let UnitValues::PerUnit(v) = self {
            let internal = &widths[1..widths.len() - 1];
            if v.len() != internal.len() || v.iter().zip(internal).any(|(a, &m)| a.len() != m) {
                return Err(Error::Config(format!(
                    "{name} must have one entry per internal unit"
                )));
            }
        }
        Ok(())
    }
}

fn default_activation() -> Activation {
    Activation::Sigmoid
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_lambda() -> f64 {
    0.01
}
fn default_gamma() -> UnitValues {
    UnitValues::Uniform(1.0)
}
fn default_beta() -> UnitValues {
    UnitValues::Uniform(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// `m_0 = d, m_1, ..., m_L = C`.
    pub widths: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_gamma")]
    pub internal_gamma: UnitValues,
    #[serde(default = "default_beta")]
    pub internal_beta: UnitValues,
    #[serde(default)]
    pub bn_mode: BnMode,
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Self {
        Self {
            widths,
            activation,
            epsilon: default_epsilon(),
            lambda: default_lambda(),
            internal_gamma: default_gamma(),
            internal_beta: default_beta(),
            bn_mode: BnMode::Smoothed,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_bn_mode(mut self, mode: BnMode) -> Self {
        self.bn_mode = mode;
        self
    }

    /// Draws internal BN constants `gamma ~ N(1, std^2)`, `beta ~ N(0, std^2)`.
    pub fn with_gaussian_internal(mut self, rng: &mut Rng, std: f64) -> Self {
        let internal = &self.widths[1..self.widths.len() - 1];
        let gammas = internal
            .iter()
            .map(|&m| (0..m).map(|_| 1.0 + std * rng.normal()).collect())
            .collect();
        let betas = internal
            .iter()
            .map(|&m| (0..m).map(|_| std * rng.normal()).collect())
            .collect();
        self.internal_gamma = UnitValues::PerUnit(gammas);
        self.internal_beta = UnitValues::PerUnit(betas);
        self
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().expect("non-empty widths")
    }

    /// Number of scale-invariant groups `m`.
    pub fn num_groups(&self) -> usize {
        self.widths[1..].iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config("need at least one weight layer".into()));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("all layer widths must be >= 1".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config("epsilon must be nonnegative".into()));
        }
        self.internal_gamma.check(&self.widths, "internal_gamma")?;
        self.internal_beta.check(&self.widths, "internal_beta")?;
        Ok(())
    }
}

/// The partition `theta = (W; g)`.
///
/// Group `i` is row `r` of layer `l`, enumerated layer-major; see
/// [`ParamState::group_location`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub weights: Vec<Mat>,
    pub g: Vec<f64>,
}

/// Same layout as [`ParamState`].
pub type Gradients = ParamState;

impl ParamState {
    /// Glorot-uniform weights, last-layer `gamma = 1`, `beta = 0`.
    pub fn glorot(spec: &NetworkSpec, rng: &mut Rng) -> Self {
        let weights = spec
            .widths
            .windows(2)
            .map(|w| loop {
                let m = glorot_init(rng, w[1], w[0]);
                if m.row_iter().all(|r| norm2(r) > 0.0) {
                    break m;
                }
            })
            .collect();
        let c = spec.num_classes();
        let mut g = vec![1.0; c];
        g.extend(std::iter::repeat_n(0.0, c));
        Self { weights, g }
    }

    /// Standard normal weights and `g`; used for randomized testing.
    pub fn gaussian(spec: &NetworkSpec, rng: &mut Rng) -> Self {
        let weights = spec
            .widths
            .windows(2)
            .map(|w| {
                let data = (0..w[0] * w[1]).map(|_| rng.normal()).collect();
                Mat::from_vec(w[1], w[0], data).expect("shape")
            })
            .collect();
        let g = (0..2 * spec.num_classes()).map(|_| rng.normal()).collect();
        Self { weights, g }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|m| Mat::zeros(m.rows(), m.cols()))
                .collect(),
            g: vec![0.0; self.g.len()],
        }
    }

    pub fn num_groups(&self) -> usize {
        self.weights.iter().map(Mat::rows).sum()
    }

    /// `(layer, row)` of group `i`.
    pub fn group_location(&self, mut i: usize) -> (usize, usize) {
        for (l, m) in self.weights.iter().enumerate() {
            if i < m.rows() {
                return (l, i);
            }
            i -= m.rows();
        }
        panic!("group index out of range");
    }

    pub fn group(&self, i: usize) -> &[f64] {
        let (l, r) = self.group_location(i);
        self.weights[l].row(r)
    }

    pub fn group_mut(&mut self, i: usize) -> &mut [f64] {
        let (l, r) = self.group_location(i);
        self.weights[l].row_mut(r)
    }

    pub fn groups(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.iter().flat_map(Mat::row_iter)
    }

    pub fn group_norms(&self) -> Vec<f64> {
        self.groups().map(norm2).collect()
    }

    pub fn group_norms_sq(&self) -> Vec<f64> {
        self.groups().map(norm2_sq).collect()
    }

    pub fn scale_group(&mut self, i: usize, c: f64) {
        self.group_mut(i).iter_mut().for_each(|x| *x *= c);
    }

    pub fn scale_all_groups(&mut self, c: f64) {
        for m in &mut self.weights {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= c);
        }
    }

    /// All coordinates: weights layer by layer, then `g`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for m in &self.weights {
            out.extend_from_slice(m.as_slice());
        }
        out.extend_from_slice(&self.g);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for m in &mut self.weights {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        let n = self.g.len();
        self.g.copy_from_slice(&flat[off..off + n]);
    }

    pub fn len(&self) -> usize {
        self.weights.iter().map(|m| m.as_slice().len()).sum::<usize>() + self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Mat::is_finite) && self.g.iter().all(|x| x.is_finite())
    }

    fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        if self.weights.len() != spec.depth() {
            return Err(Error::DimensionMismatch {
                expected: spec.depth(),
                actual: self.weights.len(),
            });
        }
        for (m, w) in self.weights.iter().zip(spec.widths.windows(2)) {
            if m.rows() != w[1] || m.cols() != w[0] {
                return Err(Error::DimensionMismatch {
                    expected: w[0] * w[1],
                    actual: m.rows() * m.cols(),
                });
            }
        }
        if self.g.len() != 2 * spec.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: 2 * spec.num_classes(),
                actual: self.g.len(),
            });
        }
        Ok(())
    }
}

/// `v^(i) = w^(i) / |w^(i)|`; `g` untouched.
pub fn normalize_params(params: &ParamState) -> Result<ParamState> {
    let mut out = params.clone();
    for i in 0..out.num_groups() {
        let n = norm2(out.group(i));
        if !(n > 0.0) {
            return Err(Error::ZeroNorm(i));
        }
        out.scale_group(i, 1.0 / n);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `B x d`, one sample per row.
    pub inputs: Mat,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Mat, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        if labels.len() < 2 {
            return Err(Error::invalid("a batch needs at least two samples"));
        }
        Ok(Self { inputs, labels })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// Output of one BN unit over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BnOutput {
    pub outputs: Vec<f64>,
    /// Batch mean of `w^T x_b`.
    pub mean: f64,
    /// Denominator `sqrt(Var_b(w^T x_b) + eps |w|^2)` (mode-dependent).
    pub denom: f64,
}

/// Smoothed BN of a single unit: `gamma * w^T(x_b - u) / |w|_{S + eps I} + beta`.
pub fn smoothed_bn_forward(w: &[f64], inputs: &Mat, gamma: f64, beta: f64, eps: f64) -> Result<BnOutput> {
    if w.len() != inputs.cols() {
        return Err(Error::DimensionMismatch {
            expected: inputs.cols(),
            actual: w.len(),
        });
    }
    let unit = bn_unit(BnMode::Smoothed, w, inputs, eps, 0, 0)?;
    Ok(BnOutput {
        outputs: unit.normalized.iter().map(|n| gamma * n + beta).collect(),
        mean: unit.mean,
        denom: unit.denom,
    })
}

struct UnitForward {
    normalized: Vec<f64>,
    centered: Vec<f64>,
    mean: f64,
    denom: f64,
}

fn bn_unit(mode: BnMode, w: &[f64], inputs: &Mat, eps: f64, layer: usize, unit: usize) -> Result<UnitForward> {
    let b = inputs.rows();
    let z: Vec<f64> = inputs.row_iter().map(|x| dot_unchecked(w, x)).collect();
    if mode == BnMode::Removed {
        return Ok(UnitForward {
            normalized: z.clone(),
            centered: z,
            mean: 0.0,
            denom: 1.0,
        });
    }
    let mean = z.iter().sum::<f64>() / b as f64;
    let centered: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let var = norm2_sq(&centered) / b as f64;
    let denom_sq = match mode {
        BnMode::Smoothed => var + eps * norm2_sq(w),
        BnMode::Classic => var + eps,
        BnMode::Removed => unreachable!(),
    };
    if !(denom_sq > 0.0) || !denom_sq.is_finite() {
        return Err(Error::DegenerateBatchNorm { layer, unit });
    }
    let denom = denom_sq.sqrt();
    Ok(UnitForward {
        normalized: centered.iter().map(|c| c / denom).collect(),
        centered,
        mean,
        denom,
    })
}

struct LayerCache {
    input: Mat,
    /// `m_out x B`.
    normalized: Mat,
    centered: Mat,
    denom: Vec<f64>,
}

fn gamma_beta(spec: &NetworkSpec, params: &ParamState, layer: usize, unit: usize) -> (f64, f64) {
    let c = spec.num_classes();
    if layer + 1 == spec.depth() {
        (params.g[unit], params.g[c + unit])
    } else {
        (
            spec.internal_gamma.get(layer, unit),
            spec.internal_beta.get(layer, unit),
        )
    }
}

fn forward_cached(spec: &NetworkSpec, params: &ParamState, inputs: &Mat) -> Result<(Vec<LayerCache>, Mat)> {
    let depth = spec.depth();
    let b = inputs.rows();
    let mut caches = Vec::with_capacity(depth);
    let mut x = inputs.clone();
    for (l, wm) in params.weights.iter().enumerate() {
        let m_out = wm.rows();
        let mut normalized = Mat::zeros(m_out, b);
        let mut centered = Mat::zeros(m_out, b);
        let mut denom = Vec::with_capacity(m_out);
        let mut out = Mat::zeros(b, m_out);
        let last = l + 1 == depth;
        for k in 0..m_out {
            let u = bn_unit(spec.bn_mode, wm.row(k), &x, spec.epsilon, l, k)?;
            let (gamma, beta) = gamma_beta(spec, params, l, k);
            for (bi, &n) in u.normalized.iter().enumerate() {
                let pre = gamma * n + beta;
                out.set(bi, k, if last { pre } else { spec.activation.apply(pre) });
            }
            normalized.row_mut(k).copy_from_slice(&u.normalized);
            centered.row_mut(k).copy_from_slice(&u.centered);
            denom.push(u.denom);
        }
        caches.push(LayerCache {
            input: x,
            normalized,
            centered,
            denom,
        });
        x = out;
    }
    Ok((caches, x))
}

/// Mean softmax cross-entropy of `logits` (B x C) and its gradient w.r.t. the logits.
fn cross_entropy(logits: &Mat, labels: &[usize], want_grad: bool) -> (f64, Option<Mat>) {
    let b = logits.rows();
    let inv_b = 1.0 / b as f64;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Mat::zeros(b, logits.cols()));
    for (bi, row) in logits.row_iter().enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[labels[bi]];
        if let Some(gm) = grad.as_mut() {
            let gr = gm.row_mut(bi);
            for (k, z) in row.iter().enumerate() {
                gr[k] = (z - lse).exp() * inv_b;
            }
            gr[labels[bi]] -= inv_b;
        }
    }
    (total * inv_b, grad)
}

fn check_batch(spec: &NetworkSpec, params: &ParamState, batch: &Batch) -> Result<()> {
    params.check_shapes(spec)?;
    if batch.inputs.cols() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            actual: batch.inputs.cols(),
        });
    }
    let c = spec.num_classes();
    if let Some(&y) = batch.labels.iter().find(|&&y| y >= c) {
        return Err(Error::invalid(format!("label {y} out of range for {c} classes")));
    }
    Ok(())
}

/// `-(1/B) sum_b log softmax(x_b^(L))[y_b] + (lambda/2) |g|^2`.
pub fn forward_loss(spec: &NetworkSpec, params: &ParamState, batch: &Batch) -> Result<f64> {
    check_batch(spec, params, batch)?;
    let (_, logits) = forward_cached(spec, params, &batch.inputs)?;
    let (ce, _) = cross_entropy(&logits, &batch.labels, false);
    Ok(ce + 0.5 * spec.lambda * norm2_sq(&params.g))
}

/// Exact gradient of [`forward_loss`].
pub fn backward(spec: &NetworkSpec, params: &ParamState, batch: &Batch) -> Result<Gradients> {
    loss_and_grad(spec, params, batch).map(|(_, g)| g)
}

/// Loss and its gradient in one forward/backward sweep.
pub fn loss_and_grad(spec: &NetworkSpec, params: &ParamState, batch: &Batch) -> Result<(f64, Gradients)> {
    check_batch(spec, params, batch)?;
    let (caches, logits) = forward_cached(spec, params, &batch.inputs)?;
    let (ce, dlogits) = cross_entropy(&logits, &batch.labels, true);
    let loss = ce + 0.5 * spec.lambda * norm2_sq(&params.g);

    let depth = spec.depth();
    let c = spec.num_classes();
    let b = batch.size();
    let inv_b = 1.0 / b as f64;
    let mut grads = params.zeros_like();
    // dL / d(pre-activation output of the current layer), B x m_out.
    let mut upstream = dlogits.expect("gradient requested");
    let mut dz = vec![0.0; b];

    for l in (0..depth).rev() {
        let cache = &caches[l];
        let wm = &params.weights[l];
        let last = l + 1 == depth;
        let mut dinput = (l > 0).then(|| Mat::zeros(b, wm.cols()));
        for k in 0..wm.rows() {
            let (gamma, _) = gamma_beta(spec, params, l, k);
            let n = cache.normalized.row(k);
            if last {
                let mut gg = 0.0;
                let mut gb = 0.0;
                for bi in 0..b {
                    let a = upstream.get(bi, k);
                    gg += a * n[bi];
                    gb += a;
                }
                grads.g[k] = gg;
                grads.g[c + k] = gb;
            }
            let w = wm.row(k);
            let gw = grads.weights[l].row_mut(k);
            match spec.bn_mode {
                BnMode::Removed => {
                    for (bi, d) in dz.iter_mut().enumerate() {
                        *d = gamma * upstream.get(bi, k);
                    }
                }
                mode => {
                    let s = cache.denom[k];
                    let cen = cache.centered.row(k);
                    let mut mean_gn = 0.0;
                    let mut dot_gc = 0.0;
                    for bi in 0..b {
                        let gn = gamma * upstream.get(bi, k);
                        mean_gn += gn;
                        dot_gc += gn * cen[bi];
                    }
                    mean_gn *= inv_b;
                    let s3 = s * s * s;
                    for (bi, d) in dz.iter_mut().enumerate() {
                        let gn = gamma * upstream.get(bi, k);
                        *d = (gn - mean_gn) / s - cen[bi] * dot_gc * inv_b / s3;
                    }
                    if mode == BnMode::Smoothed {
                        axpy(-dot_gc * spec.epsilon / s3, w, gw);
                    }
                }
            }
            for (bi, &d) in dz.iter().enumerate() {
                axpy(d, cache.input.row(bi), gw);
            }
            if spec.bn_mode == BnMode::Smoothed && gw.len() == 1 {
                // locally constant: only the sign of a scalar weight matters
                gw[0] = 0.0;
            }
            if let Some(di) = dinput.as_mut() {
                for (bi, &d) in dz.iter().enumerate() {
                    axpy(d, w, di.row_mut(bi));
                }
            }
        }
        if let Some(mut di) = dinput {
            // Back through the previous layer's activation.
            let prev = &caches[l - 1];
            for bi in 0..b {
                let row = di.row_mut(bi);
                for (j, v) in row.iter_mut().enumerate() {
                    let (gamma, beta) = gamma_beta(spec, params, l - 1, j);
                    let pre = gamma * prev.normalized.get(j, bi) + beta;
                    *v *= spec.activation.derivative(pre);
                }
            }
            upstream = di;
        }
    }
    axpy(spec.lambda, &params.g, &mut grads.g);
    Ok((loss, grads))
}

/// Logits for a batch (no loss), B x C.
pub fn logits(spec: &NetworkSpec, params: &ParamState, inputs: &Mat) -> Result<Mat> {
    forward_cached(spec, params, inputs).map(|(_, x)| x)
}
