//! Arrhenius study of the relaxation time of the frozen fast process on the
//! symmetric double well, compared with the barrier prediction.
//!
//! `cargo run --release --example spectral_slowdown`

use slowfast::diagnostics::{spectral_slowdown_study, SlowdownConfig};
use slowfast::potential::make_example_u1;

fn main() -> slowfast::Result<()> {
    let p = make_example_u1()?;
    let cfg = SlowdownConfig { seed: 1, ..SlowdownConfig::default() };
    let out = spectral_slowdown_study(&p, &[0.0], &[0.40, 0.32, 0.27, 0.24], &cfg)?;
    print!("{}", out.tables[0].1.render(None));
    for (k, v) in &out.report.metrics {
        println!("{k} = {v}");
    }
    for (k, v) in &out.report.flags {
        println!("{k}: {v}");
    }
    println!("runtime {:.1}s", out.report.runtime_secs);
    Ok(())
}
