//! Sweep the shipped grid and compare it with the expectations file.

use std::path::Path;

use fiveg_sim::simcore::{enumerate_outcomes, Expectations, Grid};

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let grid = Grid::load(&data.join("grids/defenses.toml")).unwrap();
    let matrix = enumerate_outcomes(&grid, 0).unwrap();
    print!("{}", matrix.to_csv());

    let expected = Expectations::load(&data.join("expectations/defenses.csv")).unwrap();
    let mismatches = matrix.diff(&expected);
    println!("{} rows, {} mismatched cell(s)", matrix.rows.len(), mismatches.len());
    for m in mismatches {
        println!("mismatch: {m}");
    }
}
