//! SGD with `eta_w(t) = (t + 1)^(-alpha)`. Fits log-log slopes of the mean
//! effective learning rate and of the best full-data gradient norm.
//!
//!     cargo run --release --example sgd_rates

use autorate::analysis::fit_rate;
use autorate::dataset::DatasetSpec;
use autorate::harness::tail_window;
use autorate::netmodel::{Activation, NetworkSpec};
use autorate::optim::{run_training, TrainerConfig};

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
    let steps = 8192;
    let window = tail_window(steps);
    println!("slopes fitted over t in [{}, {}]", window.0, window.1);
    for alpha in [0.0, 0.25, 0.5] {
        let traj = run_training(&spec, &TrainerConfig::sgd(1.0, alpha, 0.1, 16, steps, 0), &data)?;
        let lr: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t as f64, r.mean_eff_lr())).collect();
        let grad: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t as f64, r.grad_sq_total())).collect();
        let lr_fit = fit_rate(&lr, window, false)?;
        let grad_fit = fit_rate(&grad, window, true)?;
        println!(
            "alpha={alpha:<4} eff lr slope {:>7.3} (r^2 {:.3})  best grad^2 slope {:>7.3}  final loss {:.5}",
            lr_fit.slope,
            lr_fit.r_squared,
            grad_fit.slope,
            traj.records.last().expect("records").loss
        );
    }
    Ok(())
}
