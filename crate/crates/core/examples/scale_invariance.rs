//! Rescaling any weight row leaves the loss unchanged, divides that row's
//! gradient by the scale, and keeps every row gradient orthogonal to its row.
//! The classic `sqrt(var + eps)` denominator breaks all three.
//!
//!     cargo run --example scale_invariance

use autorate::harness::random_instance;
use autorate::invariance::{
    check_grad_scaling, check_gradient_vs_fd, check_perpendicularity, check_scale_invariance, NetObjective,
};
use autorate::netmodel::{forward_loss, Activation, BnMode, NetworkSpec};
use autorate::numcore::Rng;

fn main() -> autorate::Result<()> {
    let mut rng = Rng::new(2024);
    for mode in [BnMode::Smoothed, BnMode::Classic] {
        let spec = NetworkSpec::new(vec![5, 4, 3], Activation::Tanh)
            .with_epsilon(0.1)
            .with_bn_mode(mode);
        let (params, data) = random_instance(&spec, 8, &mut rng)?;
        let batch = data.full_batch()?;
        let obj = NetObjective { spec: &spec, batch: &batch };

        println!("{mode:?} batch norm");
        let base = forward_loss(&spec, &params, &batch)?;
        for c in [1e-3, 0.5, 7.0, 1e3] {
            let mut scaled = params.clone();
            scaled.scale_group(0, c);
            let loss = forward_loss(&spec, &scaled, &batch)?;
            println!("  row 0 scaled by {c:>6}: loss {loss:.15} (unscaled {base:.15})");
        }
        println!("  {}", check_scale_invariance(&obj, &params, &[1e-3, 7.0, 1e3])?);
        println!("  {}", check_grad_scaling(&obj, &params, 7.0)?);
        println!("  {}", check_perpendicularity(&obj, &params)?);
        println!("  {}", check_gradient_vs_fd(&obj, &params, 1e-5)?);
    }
    Ok(())
}
