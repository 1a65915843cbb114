//! Full-batch GD across four decades of weight learning rate. The weight norms
//! grow until the effective rate `eta_w / |w|^2` is small enough, so every run
//! converges and the best gradient norm keeps shrinking.
//!
//!     cargo run --release --example gd_auto_tuning

use autorate::dataset::DatasetSpec;
use autorate::netmodel::{Activation, NetworkSpec};
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
    let eta_g = eta_g_default(2, 0.01, 0.1)?;
    println!("eta_g = {eta_g}");
    println!(
        "{:>8} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "eta_w", "final loss", "min g^2@256", "min g^2@4096", "eff lr t=0", "eff lr end"
    );
    for eta_w in [1e-2, 1e-1, 1.0, 1e1, 1e2] {
        let traj = run_training(&spec, &TrainerConfig::gd(eta_w, eta_g, 4096, 7), &data)?;
        let best = traj.running_min_grad_sq();
        let first = &traj.records[0];
        let last = traj.records.last().expect("records");
        println!(
            "{eta_w:>8.0e} {:>10.5} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            last.loss,
            best[255],
            best[best.len() - 1],
            first.mean_eff_lr(),
            last.mean_eff_lr()
        );
    }
    Ok(())
}
