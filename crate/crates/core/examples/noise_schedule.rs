//! Fast noise schedule `s(eps) = sqrt(C / ln(1/eps))` and its admissibility
//! against the estimated quasipotential and Lipschitz constants.
//!
//! `cargo run --release --example noise_schedule`

use slowfast::diagnostics::validate_schedule;
use slowfast::potential::{build_drift, make_example_u1, Params};
use slowfast::NoiseSchedule;

fn main() -> slowfast::Result<()> {
    let p = make_example_u1()?;
    let b = build_drift("cos_y", &Params::new())?;
    let grid: Vec<Vec<f64>> = (0..=20).map(|k| vec![-1.0 + 0.1 * k as f64]).collect();
    for c in [1.0, 40.0] {
        let sch = NoiseSchedule::new(0.25, c)?;
        for eps in [1e-2, 1e-4, 1e-8] {
            println!("C={c} eps={eps:e}: s={:.4} slow noise={:.4}", sch.s_of_epsilon(eps)?, sch.slow_noise(eps));
        }
        let out = validate_schedule(&p, &b, &sch, &grid, 5)?;
        println!("{}", out.report.to_json()?);
    }
    Ok(())
}
