//! For `a_0 > 0` and `a_t` in `[0, B]`,
//! `sum_{t>=1} a_t / sum_{tau<t} a_tau <= log2(sum_{t<T} a_t / a_0) + 1 + 2B/a_0`.
//!
//!     cargo run --example sequence_lemma

use autorate::analysis::sequence_bound_check;
use autorate::numcore::Rng;

fn main() -> autorate::Result<()> {
    let cases: Vec<(&str, Vec<f64>, f64)> = vec![
        ("constant ones", vec![1.0; 1000], 1.0),
        ("tiny start", std::iter::once(1e-3).chain(std::iter::repeat_n(1.0, 999)).collect(), 1.0),
        ("geometric", (0..60).map(|t| 0.9f64.powi(t)).collect(), 1.0),
        ("single spike", vec![1.0, 0.0, 0.0, 50.0, 0.0], 50.0),
    ];
    let mut rng = Rng::new(3);
    let random: Vec<f64> = std::iter::once(0.5).chain((0..500).map(|_| rng.uniform(0.0, 2.0))).collect();
    for (name, a, b) in cases.into_iter().chain(std::iter::once(("uniform [0, 2]", random, 2.0))) {
        let r = sequence_bound_check(&a, b)?;
        println!("{name:<15} lhs {:>9.4} rhs {:>9.4} passed {}", r.lhs, r.rhs, r.passed);
    }
    Ok(())
}
