//! Seeded random instances solved in both modes; round counts against their bounds.

use fairdiv::cli::bench_rows;
use fairdiv::generate::WeightMode;
use fairdiv::rational::{int, ratio};

fn main() {
    let ks = [int(2), int(3), int(5), ratio(7, 2)];
    let rows = bench_rows(200, (1, 6), (1, 12), &ks, WeightMode::Random, 2024).unwrap();
    let max_init = rows
        .iter()
        .map(|r| r.init_rounds as f64 / r.bound_init.max(1) as f64)
        .fold(0.0, f64::max);
    let max_realloc = rows
        .iter()
        .map(|r| r.realloc_rounds as f64 / r.bound_realloc.max(1) as f64)
        .fold(0.0, f64::max);
    let secs: f64 = rows.iter().map(|r| r.wallclock).sum();
    println!("{} solves in {secs:.3}s", rows.len());
    println!("largest init rounds / bound: {max_init:.3}");
    println!("largest realloc rounds / bound: {max_realloc:.3}");
}
