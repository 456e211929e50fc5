//! Gibbs density of the fast process on an automatic quadrature grid, for a
//! one- and a two-dimensional fast variable.
//!
//! `cargo run --release --example invariant_density`

use slowfast::fastproc::{invariant_density_grid, GridSpec};
use slowfast::potential::{make_example_u1, make_quadratic_bowl};

fn main() -> slowfast::Result<()> {
    let p = make_example_u1()?;
    for s in [1.0, 0.5, 0.2] {
        let grid = GridSpec::auto(&p, &[0.0], s)?;
        let g = invariant_density_grid(&p, &[0.0], s, &grid)?;
        println!(
            "double well s={s}: {} nodes, half width {:.2}, P(|y-1|<0.5)={:.4}, E y²={:.4}, tail<{:.1e}",
            g.n_nodes(),
            grid.half_width,
            g.mass_in_ball(&[1.0], 0.5),
            g.expectation(|y| y[0] * y[0]),
            g.tail_bound
        );
    }
    let bowl = make_quadratic_bowl(2)?;
    let g = invariant_density_grid(&bowl, &[0.0], 0.5, &GridSpec::auto(&bowl, &[0.0], 0.5)?)?;
    println!("bowl m=2 s=0.5: E |y|² = {:.4} (exact 0.25)", g.expectation(|y| y[0] * y[0] + y[1] * y[1]));
    Ok(())
}
