//! Pairwise quasipotentials, W-graph constants and `Λ̂` over a slow grid.
//!
//! `cargo run --release --example quasipotential`

use slowfast::fastproc::{estimate_lambda, quasipotential_1d, w_graph_constants};
use slowfast::potential::{find_global_minima, make_example_u1, make_triple_well};
use slowfast::MinimaOptions;

fn main() -> slowfast::Result<()> {
    let opts = MinimaOptions::default();
    let tw = make_triple_well()?;
    let ms = find_global_minima(&tw, &[0.0], &opts)?;
    let v = quasipotential_1d(&tw, &[0.0], &ms)?;
    println!("triple well minima {:?}", ms.minima.iter().map(|m| m.y[0]).collect::<Vec<_>>());
    println!("Ṽ = {v}");
    println!("V^l = {:?}", w_graph_constants(&v)?);

    let u1 = make_example_u1()?;
    let grid: Vec<Vec<f64>> = (0..=20).map(|k| vec![-1.0 + 0.1 * k as f64]).collect();
    let rep = estimate_lambda(&u1, &grid, &opts)?;
    print!("{}", rep.to_table().render(None));
    println!("Λ̂ = {} at x = {:?}", rep.lambda_hat, rep.argmax);
    Ok(())
}
