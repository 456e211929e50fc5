//! Sampled audit of the structural assumptions on a potential and drift.
//!
//! `cargo run --release --example assumption_audit`

use slowfast::potential::{build_drift, check_assumptions, make_example_u2, Params, SamplingPlan};

fn main() -> slowfast::Result<()> {
    let p = make_example_u2()?;
    let b = build_drift("cos_y_damped", &Params::new())?;
    let rep = check_assumptions(&p, &b, &SamplingPlan::new(vec![-2.0], vec![2.0]), 11)?;
    println!("drift sup {:.4} (bound exceeded: {})", rep.drift_sup.value, rep.drift_bound_exceeded);
    println!("drift Lipschitz in x {:.4}", rep.drift_lipschitz);
    println!("grad_y U Lipschitz in x {:.4}", rep.grad_lipschitz);
    println!("convexity violation {:?}", rep.convexity_violation.as_ref().map(|o| o.value));
    println!("coercivity probe ok {}", rep.coercivity_probe_ok);
    println!("Γ̂ = {:.4}", rep.gamma_hat);
    for row in &rep.ultracontractivity {
        println!("s={} sup={:.4e} holds={:?}", row.s, row.lhs_sup, row.holds);
    }
    Ok(())
}
