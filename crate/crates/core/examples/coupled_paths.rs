//! A few coupled slow-fast paths on the symmetric double well with `b = cos y`.
//!
//! `cargo run --release --example coupled_paths`

use slowfast::potential::{build_drift, make_example_u1, Params};
use slowfast::sde::simulate_coupled_ensemble;
use slowfast::{NoiseSchedule, SimConfig};

fn main() -> slowfast::Result<()> {
    let p = make_example_u1()?;
    let b = build_drift("cos_y", &Params::new())?;
    let sch = NoiseSchedule::new(0.25, 1.0)?;
    for eps in [0.05, 0.01] {
        let mut cfg = SimConfig::new(eps, 1.0, vec![0.0], vec![0.0], sch);
        cfg.seed = 7;
        let paths = simulate_coupled_ensemble(&p, &b, &cfg, 4)?;
        for (i, tr) in paths.iter().enumerate() {
            let last = tr.len() - 1;
            println!("eps={eps} path {i}: {} steps, X_T={:.4}, Y_T={:.4}", last, tr.x(last)[0], tr.y(last)[0]);
        }
    }
    Ok(())
}
