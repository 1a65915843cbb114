//! Learning-rate sweep comparing SGD with batch norm, projected SGD and SGD
//! without batch norm. Writes one run directory per cell and `comparison.csv`.
//!
//!     cargo run --release --example settings_sweep -- [output_dir]

use autorate::dataset::DatasetSpec;
use autorate::harness::{sweep, ExperimentConfig, Setting, SweepAxis, SweepConfig};
use autorate::netmodel::{Activation, NetworkSpec};
use autorate::optim::TrainerConfig;

fn main() -> autorate::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/settings_sweep".into());
    let config = SweepConfig {
        base: ExperimentConfig {
            network: NetworkSpec::new(vec![10, 8, 2], Activation::Sigmoid).with_lambda(0.01),
            trainer: TrainerConfig::sgd(1.0, 0.0, 0.1, 4, 2048, 0),
            dataset: DatasetSpec::GaussianBlobs {
                d: 10,
                classes: 2,
                n_points: 256,
                separation: 6.0,
                scale: 1.0,
                seed: 1,
            },
            output_dir: out.clone().into(),
            record_every: 8,
        },
        axis: SweepAxis::EtaW,
        values: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
        settings: Some(vec![Setting::SgdBn, Setting::Psgd, Setting::BnRemoved]),
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = sweep(&config, jobs)?;
    println!("{:>8} {:<11} {:>14} {:>9}", "eta", "setting", "epoch loss", "diverged");
    for r in rows {
        println!(
            "{:>8.0e} {:<11} {:>14.6e} {:>9}",
            r.axis_value, r.setting, r.last_epoch_mean_loss, r.diverged
        );
    }
    println!("table written to {out}/comparison.csv");
    Ok(())
}
