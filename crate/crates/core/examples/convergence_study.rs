//! Mean sup distance between the slow component and the limit ODE as
//! `eps -> 0`, on the symmetric double well.
//!
//! `cargo run --release --example convergence_study`

use slowfast::limit::{convergence_study, convergence_table, AveragedField, ConvergenceSetup, FieldMode};
use slowfast::potential::{build_drift, make_example_u1, Params};
use slowfast::NoiseSchedule;

fn main() -> slowfast::Result<()> {
    let p = make_example_u1()?;
    let b = build_drift("cos_y", &Params::new())?;
    let f = AveragedField::new(p, b, FieldMode::Laplace)?;
    let sch = NoiseSchedule::new(0.25, 1.0)?;
    let setup = ConvergenceSetup::new(vec![0.0], vec![0.0], 1.0, 50, 2);
    let rows = convergence_study(&f, &sch, &[0.05, 0.02, 0.01, 0.005], &setup)?;
    print!("{}", convergence_table(&rows).render(None));
    for r in &rows {
        println!("eps={}: slow noise floor eps^alpha E sup|B| = {:.4}", r.epsilon, sch.slow_noise(r.epsilon) * 1.2533141373155);
    }
    Ok(())
}
