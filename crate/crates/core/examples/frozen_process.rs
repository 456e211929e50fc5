//! Ensemble of the frozen fast process on the quadratic bowl; the variance
//! should approach `s²/2`.
//!
//! `cargo run --release --example frozen_process`

use slowfast::potential::make_quadratic_bowl;
use slowfast::sde::{simulate_frozen, FrozenConfig};

fn main() -> slowfast::Result<()> {
    let p = make_quadratic_bowl(1)?;
    let s = 0.5;
    let cfg = FrozenConfig {
        x: vec![0.0],
        s_val: s,
        z0: vec![1.0],
        t_end: 10.0,
        dt: 1e-3,
        n_paths: 2000,
        seed: 1,
        record_every: 1000,
    };
    let ens = simulate_frozen(&p, &cfg)?;
    let means = ens.mean_of(|z| z[0]);
    let second = ens.mean_of(|z| z[0] * z[0]);
    for (k, t) in ens.times.iter().enumerate() {
        println!("t={t:5.1}  mean={:+.4}  var={:.4}", means[k], second[k] - means[k] * means[k]);
    }
    println!("stationary variance s²/2 = {}", s * s / 2.0);
    Ok(())
}
