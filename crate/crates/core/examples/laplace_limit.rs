//! Small-noise limit of the Gibbs measure: atoms at the global minima with
//! weights `det(D²U)^{-1/2}`, and the quadrature error as `s` shrinks.
//!
//! `cargo run --release --example laplace_limit`

use slowfast::fastproc::{laplace_limit_measure, laplace_vs_quadrature};
use slowfast::potential::{find_global_minima, make_asymmetric_two_well};
use slowfast::MinimaOptions;

fn main() -> slowfast::Result<()> {
    let p = make_asymmetric_two_well()?;
    let opts = MinimaOptions::default();
    let ms = find_global_minima(&p, &[0.0], &opts)?;
    let atoms = laplace_limit_measure(&ms)?;
    for a in &atoms.atoms {
        println!("atom at y={:+.6} weight {:.6}", a.location[0], a.weight);
    }
    for row in laplace_vs_quadrature(&p, &[0.0], &[0.4, 0.2, 0.1, 0.05], 0.5, &opts)? {
        println!("{row:?}");
    }
    Ok(())
}
