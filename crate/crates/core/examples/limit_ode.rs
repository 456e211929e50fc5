//! Averaged drift and the limit ODE for the three worked examples.
//!
//! `cargo run --release --example limit_ode`

use slowfast::limit::{solve_limit_ode, AveragedField, FieldMode};
use slowfast::potential::{build_drift, build_potential, Params, ParamValue};

fn main() -> slowfast::Result<()> {
    let mut u3 = Params::new();
    u3.insert("phi".into(), ParamValue::Text("tanh_half".into()));
    let cases = [
        ("example_2_1", Params::new(), "cos_y", 0.0, 1.0),
        ("example_2_2", Params::new(), "cos_y_damped", -0.5, 1.0),
        ("example_2_3", u3, "sin_y", 0.5, 1.5),
    ];
    for (model, params, drift, x0, horizon) in cases {
        let p = build_potential(model, &params)?;
        let b = build_drift(drift, &Params::new())?;
        let mut f = AveragedField::new(p, b, FieldMode::Laplace)?;
        f.patch_unique_minimum = model == "example_2_2";
        let traj = solve_limit_ode(&f, &[x0], horizon, 1e-3)?;
        let n = traj.times.len();
        println!("{model}: x(0)={x0} x(T/2)={:+.5} x(T)={:+.5}", traj.x(n / 2)[0], traj.x(n - 1)[0]);
        for x in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            println!("  h({x:+.1}) = {:+.5}", f.eval(&[x])?[0]);
        }
    }
    Ok(())
}
