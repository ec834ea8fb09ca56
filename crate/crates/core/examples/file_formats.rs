//! Writing an instance file, solving it and re-verifying the result offline.

use std::sync::Arc;

use fairdiv::cli::{solve_to_result, verify_result};
use fairdiv::generate::{seeded_instance, WeightMode};
use fairdiv::io::{InstanceFile, Mode, ResultFile};
use fairdiv::rational::int;
use fairdiv::realloc::SolveOptions;
use fairdiv::verify::Criterion;

fn main() {
    let inst = seeded_instance(7, 3, 5, &int(2), WeightMode::Random);
    let text = InstanceFile::from_instance(&inst).to_json();
    println!("{text}");

    let inst = Arc::new(InstanceFile::from_json(&text).unwrap().to_instance().unwrap());
    let result = solve_to_result(inst.clone(), Mode::Weqx, &SolveOptions::checked(), false).unwrap();
    let saved = result.to_json();
    let reloaded = ResultFile::from_json(&saved).unwrap();
    let reports = verify_result(inst, &reloaded, &[Criterion::Weqx, Criterion::Equilibrium]).unwrap();
    for r in reports {
        println!("{}: passed={}", r.criterion, r.passed());
    }
}
