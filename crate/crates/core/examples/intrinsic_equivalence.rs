//! Full-batch GD on the raw weights and the adaptive method on the unit sphere
//! (`v <- proj(v - (eta/G) grad_v)`, `G <- G + (eta^2/G) |grad_v|^2`) trace the
//! same directions, with `G_t` equal to `|w_t|^2`.
//!
//!     cargo run --example intrinsic_equivalence

use autorate::dataset::DatasetSpec;
use autorate::netmodel::{Activation, NetworkSpec};
use autorate::numcore::norm2;
use autorate::optim::{OptimizerKind, Trainer, TrainerConfig};

fn main() -> autorate::Result<()> {
    let spec = NetworkSpec::new(vec![4, 4, 2], Activation::Tanh);
    let data = DatasetSpec::GaussianBlobs {
        d: 4,
        classes: 2,
        n_points: 32,
        separation: 4.0,
        scale: 1.0,
        seed: 5,
    }
    .load()?;
    let gd = TrainerConfig::gd(0.5, 0.5, 1000, 3);
    let intrinsic = gd.clone().with_optimizer(OptimizerKind::Intrinsic);
    let mut a = Trainer::new(&spec, &gd, &data)?;
    let mut b = Trainer::new(&spec, &intrinsic, &data)?;

    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "t", "loss", "|v_a - v_b|", "|w_0|^2", "G_0");
    for t in 0..=1000 {
        if t % 100 == 0 {
            let dv = a
                .directions()
                .iter()
                .zip(b.directions())
                .map(|(x, y)| norm2(&x.iter().zip(&y).map(|(p, q)| p - q).collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            let loss = autorate::netmodel::forward_loss(&spec, a.params(), &data.full_batch()?)?;
            println!(
                "{t:>5} {loss:>12.6} {dv:>12.3e} {:>12.6} {:>12.6}",
                a.w_norm_sq()[0],
                b.w_norm_sq()[0]
            );
        }
        if t < 1000 {
            a.step().expect("gd step");
            b.step().expect("intrinsic step");
        }
    }
    Ok(())
}
