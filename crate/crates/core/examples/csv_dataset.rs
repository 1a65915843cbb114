//! Round-trips a synthetic dataset through CSV and trains on the file.
//!
//!     cargo run --release --example csv_dataset

use autorate::dataset::{load_csv, synth_blobs, DatasetSpec};
use autorate::netmodel::{Activation, NetworkSpec};
use autorate::optim::{run_training, TrainerConfig};

fn main() -> autorate::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("blobs.csv");
    let blobs = synth_blobs(&DatasetSpec::GaussianBlobs {
        d: 3,
        classes: 3,
        n_points: 300,
        separation: 3.0,
        scale: 1.0,
        seed: 9,
    })?;
    blobs.write_csv(&path)?;
    let data = load_csv(&path, "label", None)?;
    println!("loaded {} rows, {} features, {} classes", data.len(), data.dim(), data.num_classes);

    let spec = NetworkSpec::new(vec![3, 6, 3], Activation::Softplus);
    let traj = run_training(&spec, &TrainerConfig::sgd(1.0, 0.25, 0.1, 16, 2000, 4), &data)?;
    for r in traj.records.iter().step_by(250) {
        println!("t {:>5} loss {:.5} |grad|^2 {:.3e}", r.t, r.loss, r.grad_sq_total());
    }
    Ok(())
}
