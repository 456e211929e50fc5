//! Runs the full pipeline for one of the built-in examples and prints the report.
//!
//! `cargo run --release --example reproduce_example -- example_2_3`

use slowfast::diagnostics::{reproduce_example, ReproduceOverrides};

fn main() -> slowfast::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "example_2_1".into());
    let out = reproduce_example(&name, &ReproduceOverrides::default())?;
    println!("{}", out.report.to_json()?);
    for (stem, table) in &out.tables {
        println!("{stem}: {} rows", table.rows.len());
    }
    if let Some((_, conv)) = out.tables.iter().find(|(s, _)| s == "convergence") {
        print!("{}", conv.render(None));
    }
    Ok(())
}
