//! Bootstrap particle filter for the fast variable given the observed slow
//! path, and its windowed discrepancy from the Gibbs expectation.
//!
//! `cargo run --release --example particle_filter`

use slowfast::diagnostics::smoothed_sign;
use slowfast::filter::{filter_vs_invariant, run_fkk_particle_filter, FilterConfig, InitialCloud};
use slowfast::potential::{build_drift, make_example_u1, Params};
use slowfast::sde::simulate_coupled;
use slowfast::{NoiseSchedule, SimConfig};

fn main() -> slowfast::Result<()> {
    let p = make_example_u1()?;
    let b = build_drift("cos_y", &Params::new())?;
    let sch = NoiseSchedule::new(0.25, 1.0)?;
    let eps = 0.01;
    let mut sim = SimConfig::new(eps, 1.0, vec![0.0], vec![0.0], sch);
    sim.seed = 3;
    let observed = simulate_coupled(&p, &b, &sim)?;
    let mut cfg = FilterConfig::new(eps, sch, InitialCloud::Point { y: vec![0.0] });
    cfg.seed = 4;
    let run = run_fkk_particle_filter(&p, &b, &observed, &cfg)?;
    println!("{} steps, {} resampling events", run.summaries.len(), run.n_resamples);
    let disc = filter_vs_invariant(&run, &p, &observed, eps, &sch, smoothed_sign)?;
    for k in 0..disc.times.len() {
        println!(
            "t={:.2}  filter={:+.4}  gibbs={:+.4}  |diff|={:.4}",
            disc.times[k], disc.filter_average[k], disc.invariant[k], disc.discrepancy[k]
        );
    }
    println!("kappa={} max discrepancy={:.4}", disc.kappa, disc.max);
    Ok(())
}
