//! Probes block smoothness constants with finite-difference Hessian-vector
//! products, derives the per-row constants `C_i` and `K_i`, and monitors the
//! weight-scale inequality along a GD run.
//!
//!     cargo run --release --example smoothness_probe

use autorate::analysis::{
    check_weight_scale_bound, compute_bound_constants, lgg_formula, probe_smoothness,
};
use autorate::dataset::DatasetSpec;
use autorate::netmodel::{Activation, NetworkSpec};
use autorate::numcore::Rng;
use autorate::optim::{eta_g_default, run_training, TrainerConfig};

fn main() -> autorate::Result<()> {
    let spec = NetworkSpec::new(vec![10, 8, 2], Activation::Sigmoid).with_lambda(0.01);
    let data = DatasetSpec::GaussianBlobs {
        d: 10,
        classes: 2,
        n_points: 256,
        separation: 6.0,
        scale: 1.0,
        seed: 1,
    }
    .load()?;
    let est = probe_smoothness(&spec, &data, 50, data.len(), &mut Rng::new(11))?;
    println!("samples {} inflation {}", est.samples, est.inflation);
    println!("L^gg {:.4} (formula {:.4})", est.lgg, lgg_formula(2, 0.01));
    println!("L^vv diagonal {:.3?}", est.lvv_diag());
    println!("L^vg {:.3?}", est.lvg);

    let eta_w = 1.0;
    let eta_g = eta_g_default(2, 0.01, 0.1)?;
    let traj = run_training(&spec, &TrainerConfig::gd(eta_w, eta_g, 2000, 7), &data)?;
    let w0: Vec<f64> = (0..traj.num_groups()).map(|i| traj.norm_sq_series(i)[0]).collect();
    let constants = compute_bound_constants(&est, 0.1, eta_w, &w0, traj.min_loss())?;
    println!("C_i {:.3?}", constants.c);
    let k: Vec<String> = constants.k.iter().map(|k| format!("{k:.3e}")).collect();
    println!("K_i [{}]", k.join(", "));
    let check = check_weight_scale_bound(&traj, &constants, eta_w, eta_g, 0.1);
    println!("lhs {:.4e} rhs {:.4e}", check.lhs, check.rhs);
    println!("{}", check.report);
    Ok(())
}
