//! Filippov enlargement of the discontinuous averaged drift and a membership
//! check of the limit trajectory.
//!
//! `cargo run --release --example filippov_check`

use slowfast::limit::{check_filippov, filippov_enlargement, solve_limit_ode, AveragedField, FieldMode, FilippovProbe};
use slowfast::potential::{build_drift, build_potential, Params, ParamValue};

fn main() -> slowfast::Result<()> {
    let mut params = Params::new();
    params.insert("phi".into(), ParamValue::Text("tanh_half".into()));
    let p = build_potential("example_2_3", &params)?;
    let b = build_drift("sin_y", &Params::new())?;
    let f = AveragedField::new(p, b, FieldMode::Laplace)?;
    let probe = FilippovProbe::default();
    for x in [-0.5, 0.0, 0.5] {
        let set = filippov_enlargement(&f, &[x], &probe)?;
        println!("x={x:+.1}: {:?} (diameter {:.4})", set.hull, set.diameter());
    }
    let traj = solve_limit_ode(&f, &[0.5], 1.5, 1e-3)?;
    let rep = check_filippov(&traj.times, &traj.xs, &f, 0.05, &probe)?;
    println!("{rep:?}");
    Ok(())
}
