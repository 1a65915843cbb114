//! Post-processing: empirical smoothness constants, the composite bound
//! constants built from them, the weight-scale bound monitor, log-log rate
//! fits and the harmonic-sum sequence bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::invariance::{CheckReport, NetObjective, Objective};
use crate::netmodel::{loss_and_grad, NetworkSpec, ParamState};
use crate::numcore::{norm2, Rng};
use crate::optim::Trajectory;

/// Safety factor applied by [`probe_smoothness`] to the observed maxima.
pub const PROBE_INFLATION: f64 = 1.5;

/// Step for finite-difference Hessian-vector products.
pub const PROBE_STEP: f64 = 1e-5;

/// Block smoothness constants on the intrinsic domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessEstimate {
    /// `L^vv_ij`, `m x m`, symmetric.
    pub lvv: Vec<Vec<f64>>,
    pub lvg: Vec<f64>,
    pub lgg: f64,
    /// `G_g`: largest observed `|grad_g F_z - grad_g L|`.
    pub g_noise: f64,
    pub samples: usize,
    /// Factor already applied to every value (1 for raw maxima).
    pub inflation: f64,
}

impl SmoothnessEstimate {
    pub fn zeros(m: usize) -> Self {
        Self {
            lvv: vec![vec![0.0; m]; m],
            lvg: vec![0.0; m],
            lgg: 0.0,
            g_noise: 0.0,
            samples: 0,
            inflation: 1.0,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.lvg.len()
    }

    pub fn lvv_diag(&self) -> Vec<f64> {
        (0..self.num_groups()).map(|i| self.lvv[i][i]).collect()
    }

    /// Entrywise max; sample counts add.
    pub fn merge_max(&mut self, other: &SmoothnessEstimate) {
        for (row, orow) in self.lvv.iter_mut().zip(&other.lvv) {
            for (a, b) in row.iter_mut().zip(orow) {
                *a = a.max(*b);
            }
        }
        for (a, b) in self.lvg.iter_mut().zip(&other.lvg) {
            *a = a.max(*b);
        }
        self.lgg = self.lgg.max(other.lgg);
        self.g_noise = self.g_noise.max(other.g_noise);
        self.samples += other.samples;
    }

    pub fn inflated(&self, factor: f64) -> SmoothnessEstimate {
        let s = |x: &f64| x * factor;
        SmoothnessEstimate {
            lvv: self.lvv.iter().map(|r| r.iter().map(s).collect()).collect(),
            lvg: self.lvg.iter().map(s).collect(),
            lgg: self.lgg * factor,
            g_noise: self.g_noise * factor,
            samples: self.samples,
            inflation: self.inflation * factor,
        }
    }
}

fn grad_flat(obj: &dyn Objective, p: &ParamState) -> Result<ParamState> {
    let (l, g) = obj.loss_and_grad(p)?;
    if !l.is_finite() || !g.is_finite() {
        return Err(Error::NonFinite("probe evaluation".into()));
    }
    Ok(g)
}

/// `(grad(p + h d) - grad(p - h d)) / 2h`.
fn hvp(obj: &dyn Objective, p: &ParamState, dir: &ParamState, h: f64) -> Result<ParamState> {
    let base = p.to_flat();
    let d = dir.to_flat();
    let mut q = p.clone();
    q.set_flat(&base.iter().zip(&d).map(|(x, y)| x + h * y).collect::<Vec<_>>());
    let up = grad_flat(obj, &q)?;
    q.set_flat(&base.iter().zip(&d).map(|(x, y)| x - h * y).collect::<Vec<_>>());
    let down = grad_flat(obj, &q)?;
    let mut out = p.zeros_like();
    out.set_flat(
        &up.to_flat()
            .iter()
            .zip(down.to_flat())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect::<Vec<_>>(),
    );
    Ok(out)
}

/// Raw block estimates at one point, projected onto the unit sphere first.
///
/// Each group `j` and `g` gets one random unit direction; the block norm
/// `|d^2 F / dv_i dv_j|` is read off as `|(H d_j)_i|`, and symmetrized.
pub fn probe_at(obj: &dyn Objective, point: &ParamState, rng: &mut Rng, h: f64) -> Result<SmoothnessEstimate> {
    let p = crate::netmodel::normalize_params(point)?;
    let m = p.num_groups();
    let mut est = SmoothnessEstimate::zeros(m);
    for j in 0..m {
        let mut dir = p.zeros_like();
        let d = rng.unit_vector(p.group(j).len());
        dir.group_mut(j).copy_from_slice(&d);
        let hv = hvp(obj, &p, &dir, h)?;
        for i in 0..m {
            est.lvv[i][j] = norm2(hv.group(i));
        }
        est.lvg[j] = est.lvg[j].max(norm2(&hv.g));
    }
    if !p.g.is_empty() {
        let mut dir = p.zeros_like();
        dir.g.copy_from_slice(&rng.unit_vector(p.g.len()));
        let hv = hvp(obj, &p, &dir, h)?;
        for i in 0..m {
            est.lvg[i] = est.lvg[i].max(norm2(hv.group(i)));
        }
        est.lgg = norm2(&hv.g);
    }
    for i in 0..m {
        for j in 0..i {
            let s = est.lvv[i][j].max(est.lvv[j][i]);
            est.lvv[i][j] = s;
            est.lvv[j][i] = s;
        }
    }
    est.samples = 1;
    Ok(est)
}

/// Max over `n_samples` random sphere points `(V; g)`, `g ~ N(0, I)`, each
/// with its own minibatch of `batch_size`, inflated by [`PROBE_INFLATION`].
pub fn probe_smoothness(
    spec: &NetworkSpec,
    data: &Dataset,
    n_samples: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<SmoothnessEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    spec.validate()?;
    let full = data.full_batch()?;
    let mut est = SmoothnessEstimate::zeros(spec.num_groups());
    for _ in 0..n_samples {
        let point = ParamState::gaussian(spec, rng);
        let batch = data.sample_batch(rng, batch_size)?;
        let obj = NetObjective { spec, batch: &batch };
        let mut sample = probe_at(&obj, &point, rng, PROBE_STEP)?;
        let point = crate::netmodel::normalize_params(&point)?;
        let (_, gz) = loss_and_grad(spec, &point, &batch)?;
        let (_, gl) = loss_and_grad(spec, &point, &full)?;
        let diff: Vec<f64> = gz.g.iter().zip(&gl.g).map(|(a, b)| a - b).collect();
        sample.g_noise = norm2(&diff);
        est.merge_max(&sample);
    }
    Ok(est.inflated(PROBE_INFLATION))
}

/// `L^gg <= C/2 + lambda` for softmax cross-entropy with decay `lambda` on `g`.
pub fn lgg_formula(classes: usize, lambda: f64) -> f64 {
    classes as f64 / 2.0 + lambda
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c: Vec<f64>,
    pub k: Vec<f64>,
    /// Best loss observed; stands in for the unknown infimum.
    pub l_min: f64,
}

/// `C_i = (1/2) sum_j L^vv_ij + (L^vg_i)^2 m / (c_g L^gg)`,
/// `K_i = (C_i eta_w / |w0|^2 + 1/2)(2 C_i + (pi L^vv_ii)^2 eta_w / |w0|^2)`.
pub fn compute_bound_constants(
    est: &SmoothnessEstimate,
    c_g: f64,
    eta_w: f64,
    w0_norm_sq: &[f64],
    l_min: f64,
) -> Result<BoundConstants> {
    if !(est.lgg > 0.0) {
        return Err(Error::invalid("L^gg must be positive"));
    }
    if !(c_g > 0.0 && c_g < 1.0) {
        return Err(Error::invalid("c_g must lie in (0, 1)"));
    }
    let m = est.num_groups();
    if w0_norm_sq.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: w0_norm_sq.len(),
        });
    }
    let finite = est.lvv.iter().flatten().chain(&est.lvg).all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite("smoothness estimate".into()));
    }
    let mut c = Vec::with_capacity(m);
    let mut k = Vec::with_capacity(m);
    for i in 0..m {
        let ci = 0.5 * est.lvv[i].iter().sum::<f64>() + est.lvg[i] * est.lvg[i] * m as f64 / (c_g * est.lgg);
        let r = eta_w / w0_norm_sq[i];
        let pl = PI * est.lvv[i][i];
        c.push(ci);
        k.push((ci * r + 0.5) * (2.0 * ci + pl * pl * r));
    }
    Ok(BoundConstants { c, k, l_min })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScaleCheck {
    /// Passes when `lhs / rhs <= 1`.
    pub report: CheckReport,
    pub lhs: f64,
    pub rhs: f64,
    pub l_min: f64,
}

/// Evaluates both sides of
/// `sum_i (|w_T|^2 - |w_0|^2)/(2 eta_w) + (c_g eta_g / 2) sum_t |grad_g L_t|^2
///   <= L(theta_0) - L_min + sum_i K_i`
/// on a full-batch GD trajectory.
pub fn check_weight_scale_bound(
    traj: &Trajectory,
    constants: &BoundConstants,
    eta_w: f64,
    eta_g: f64,
    c_g: f64,
) -> WeightScaleCheck {
    let growth: f64 = (0..traj.num_groups())
        .map(|i| {
            let s = traj.norm_sq_series(i);
            s[s.len() - 1] - s[0]
        })
        .sum();
    let g_sum: f64 = traj.records.iter().map(|r| r.grad_g_sq).sum();
    let lhs = growth / (2.0 * eta_w) + 0.5 * c_g * eta_g * g_sum;
    let l0 = traj.records.first().map_or(constants.l_min, |r| r.loss);
    let rhs = l0 - constants.l_min + constants.k.iter().sum::<f64>();
    let ratio = if lhs <= 0.0 { 0.0 } else { lhs / rhs };
    WeightScaleCheck {
        report: CheckReport::new(
            "weight_scale_bound",
            if ratio.is_nan() { f64::INFINITY } else { ratio },
            1.0,
            traj.records.len(),
        ),
        lhs,
        rhs,
        l_min: constants.l_min,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
}

/// Least-squares line through `(ln t, ln value)` for `t` in `[t_lo, t_hi]`.
///
/// With `running_min`, values are first replaced by their prefix minimum
/// over the whole series.
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64), running_min: bool) -> Result<RateFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) {
        return Err(Error::invalid("window must satisfy t_lo < t_hi"));
    }
    let mut best = f64::INFINITY;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, v) in series {
        let v = if running_min {
            best = best.min(v);
            best
        } else {
            v
        };
        if t < t_lo || t > t_hi {
            continue;
        }
        if !(t > 0.0) {
            return Err(Error::invalid(format!("time {t} must be positive for a log fit")));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("value {v} at t={t} must be positive")));
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 8 {
        return Err(Error::invalid(format!("need at least 8 points in window, found {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("window holds a single distinct time"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        t_lo,
        t_hi,
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceBound {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// For `a_0..a_T` in `[0, B]` with `a_0 > 0`:
/// `sum_{t=1}^T a_t / sum_{tau<t} a_tau <= log2(sum_{t<T} a_t / a_0) + 1 + 2B/a_0`.
pub fn sequence_bound_check(a: &[f64], bound: f64) -> Result<SequenceBound> {
    if a.len() < 2 {
        return Err(Error::invalid("need a_0 and at least one more term"));
    }
    if !(a[0] > 0.0) {
        return Err(Error::invalid("a_0 must be positive"));
    }
    if let Some(x) = a.iter().find(|&&x| !(0.0..=bound).contains(&x)) {
        return Err(Error::invalid(format!("term {x} outside [0, {bound}]")));
    }
    let mut prefix = a[0];
    let mut lhs = 0.0;
    for &at in &a[1..] {
        lhs += at / prefix;
        prefix += at;
    }
    // prefix now holds sum_{t<=T}; the bound uses sum_{t<T}.
    let head = prefix - a[a.len() - 1];
    let rhs = (head / a[0]).log2() + 1.0 + 2.0 * bound / a[0];
    Ok(SequenceBound {
        lhs,
        rhs,
        passed: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Activation, Gradients};
    use crate::numcore::Mat;
    use proptest::prelude::*;
    use crate::numcore::Rng;

    /// `F(v, g) = a |g|^2 / 2`, independent of `v`.
    struct Quadratic(f64);

    impl Objective for Quadratic {
        fn loss(&self, p: &ParamState) -> Result<f64> {
            Ok(0.5 * self.0 * crate::numcore::norm2_sq(&p.g))
        }
        fn loss_and_grad(&self, p: &ParamState) -> Result<(f64, Gradients)> {
            let mut g = p.zeros_like();
            g.g = p.g.iter().map(|x| self.0 * x).collect();
            Ok((self.loss(p)?, g))
        }
    }

    fn point() -> ParamState {
        ParamState {
            weights: vec![Mat::from_rows(&[vec![0.3, 1.1], vec![-2.0, 0.5]]).unwrap()],
            g: vec![0.2, -0.7, 1.3, 0.1],
        }
    }

    #[test]
    fn quadratic_probe_recovers_curvature() {
        let a = 3.7;
        let est = probe_at(&Quadratic(a), &point(), &mut Rng::new(1), PROBE_STEP).unwrap();
        assert!((est.lgg - a).abs() <= 1e-6 * a);
        assert!(est.lvg.iter().all(|&x| x == 0.0));
        assert!(est.lvv.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn probe_is_scale_invariant() {
        let spec = NetworkSpec::new(vec![3, 3, 2], Activation::Sigmoid);
        let mut rng = Rng::new(4);
        let data = crate::dataset::synth_blobs(&crate::dataset::DatasetSpec::GaussianBlobs {
            d: 3,
            classes: 2,
            n_points: 16,
            separation: 1.0,
            scale: 1.0,
            seed: 2,
        })
        .unwrap();
        let batch = data.full_batch().unwrap();
        let obj = NetObjective { spec: &spec, batch: &batch };
        let p = ParamState::gaussian(&spec, &mut rng);
        let mut scaled = p.clone();
        scaled.scale_all_groups(13.0);
        let a = probe_at(&obj, &p, &mut Rng::new(9), PROBE_STEP).unwrap();
        let b = probe_at(&obj, &scaled, &mut Rng::new(9), PROBE_STEP).unwrap();
        for (x, y) in a.lvv.iter().flatten().zip(b.lvv.iter().flatten()) {
            assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()));
        }
        assert!((a.lgg - b.lgg).abs() <= 1e-6 * (1.0 + a.lgg));
    }

    #[test]
    fn lgg_formula_values() {
        assert!((lgg_formula(2, 0.01) - 1.01).abs() < 1e-15);
        assert_eq!(lgg_formula(10, 0.0), 5.0);
    }

    fn estimate(lvv: Vec<Vec<f64>>, lvg: Vec<f64>, lgg: f64) -> SmoothnessEstimate {
        SmoothnessEstimate {
            lvv,
            lvg,
            lgg,
            g_noise: 0.0,
            samples: 1,
            inflation: 1.0,
        }
    }

    #[test]
    fn bound_constant_examples() {
        let e = estimate(vec![vec![2.0]], vec![0.0], 0.7);
        let b = compute_bound_constants(&e, 0.3, 0.5, &[1.0], 0.0).unwrap();
        assert_eq!(b.c, vec![1.0]);

        let tiny = compute_bound_constants(&e, 0.3, 1e-12, &[1.0], 0.0).unwrap();
        assert!((tiny.k[0] - b.c[0]).abs() < 1e-9);

        let e2 = estimate(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0], 4.0);
        let b2 = compute_bound_constants(&e2, 0.5, 0.1, &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(b2.c, vec![2.0, 2.0]);

        assert!(compute_bound_constants(&estimate(vec![vec![1.0]], vec![1.0], 0.0), 0.5, 0.1, &[1.0], 0.0).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let exact: Vec<(f64, f64)> = (1..=64).map(|t| (t as f64, (t as f64).powf(-0.5))).collect();
        let f = fit_rate(&exact, (1.0, 64.0), false).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let flat: Vec<(f64, f64)> = (1..=20).map(|t| (t as f64, 2.5)).collect();
        assert!(fit_rate(&flat, (1.0, 20.0), false).unwrap().slope.abs() < 1e-12);

        let mut rng = Rng::new(77);
        let noisy: Vec<(f64, f64)> = (1..=1000)
            .map(|t| {
                let t = t as f64;
                (t, 3.0 / t * (1.0 + 0.01 * rng.normal()))
            })
            .collect();
        let f = fit_rate(&noisy, (10.0, 1000.0), false).unwrap();
        assert!((f.slope + 1.0).abs() <= 0.02, "slope {}", f.slope);

        let few: Vec<(f64, f64)> = (1..=5).map(|t| (t as f64, 1.0)).collect();
        assert!(fit_rate(&few, (1.0, 5.0), false).is_err());
        let neg = vec![(1.0, -1.0); 10];
        assert!(fit_rate(&neg, (0.5, 2.0), false).is_err());
    }

    #[test]
    fn running_min_fit() {
        // Oscillating series whose running min is exactly 1/t on even t.
        let s: Vec<(f64, f64)> = (1..=200)
            .map(|t| {
                let t = t as f64;
                (t, if t as usize % 2 == 0 { 1.0 / t } else { 10.0 })
            })
            .collect();
        let f = fit_rate(&s, (20.0, 200.0), true).unwrap();
        assert!(f.slope < -0.95);
    }

    #[test]
    fn sequence_bound_examples() {
        let ones = vec![1.0; 9];
        let r = sequence_bound_check(&ones, 1.0).unwrap();
        let h8: f64 = (1..=8).map(|k| 1.0 / k as f64).sum();
        assert!((r.lhs - h8).abs() < 1e-15);
        assert!((r.lhs - 2.7179).abs() < 1e-4);
        assert!((r.rhs - 6.0).abs() < 1e-15);
        assert!(r.passed);

        let r = sequence_bound_check(&[0.5, 0.0], 1.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.passed);

        assert!(sequence_bound_check(&[0.0, 1.0], 1.0).is_err());
        assert!(sequence_bound_check(&[1.0, 2.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn sequence_bound_holds(
            b in 0.01f64..100.0,
            fracs in prop::collection::vec(0.0f64..=1.0, 2..200),
            a0 in 1e-3f64..=1.0,
        ) {
            let mut a: Vec<f64> = fracs.iter().map(|f| f * b).collect();
            a[0] = a0 * b;
            let r = sequence_bound_check(&a, b).unwrap();
            prop_assert!(r.passed, "lhs {} rhs {}", r.lhs, r.rhs);
        }

        #[test]
        fn constants_monotone_in_lvv(
            base in prop::collection::vec(0.0f64..5.0, 9),
            bump in 0.0f64..3.0,
            idx in 0usize..9,
        ) {
            let lvv: Vec<Vec<f64>> = base.chunks(3).map(<[f64]>::to_vec).collect();
            let e = estimate(lvv.clone(), vec![0.5, 1.0, 0.2], 1.0);
            let mut bumped = lvv;
            bumped[idx / 3][idx % 3] += bump;
            let e2 = estimate(bumped, vec![0.5, 1.0, 0.2], 1.0);
            let a = compute_bound_constants(&e, 0.5, 1.0, &[1.0; 3], 0.0).unwrap();
            let b = compute_bound_constants(&e2, 0.5, 1.0, &[1.0; 3], 0.0).unwrap();
            for (x, y) in a.c.iter().zip(&b.c) {
                prop_assert!(y >= x);
            }
        }

        #[test]
        fn planted_exponent_recovered(p in -2.0f64..0.5, t0 in 1.0f64..100.0) {
            let series: Vec<(f64, f64)> = (0..40)
                .map(|k| {
                    let t = t0 * 10f64.powf(k as f64 / 39.0);
                    (t, 5.0 * t.powf(p))
                })
                .collect();
            let f = fit_rate(&series, (t0, t0 * 10.0), false).unwrap();
            prop_assert!((f.slope - p).abs() <= 0.02);
        }
    }
}
