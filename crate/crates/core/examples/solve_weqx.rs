//! WEQX with unequal weights, plus the round counts against their bounds.

use std::sync::Arc;

use fairdiv::init::transfer_round_bound;
use fairdiv::instance::{Instance, Metric};
use fairdiv::rational::{format, int};
use fairdiv::realloc::{solve, SolveOptions};
use fairdiv::verify::check_weqx;

fn main() {
    let high = vec![
        vec![true, true, false, true, false, false],
        vec![true, false, true, true, true, false],
        vec![false, false, false, true, true, true],
    ];
    let inst = Arc::new(Instance::from_pattern(high, int(3), vec![int(1), int(2), int(5)]).unwrap());
    let res = solve(inst.clone(), Metric::Value, &SolveOptions::checked()).unwrap();
    for i in inst.agents() {
        println!(
            "agent {i} (w={}): goods {:?}, weighted value {}",
            format(inst.weight(i)),
            res.state.bundle(i),
            format(&res.state.weighted_utility(i))
        );
    }
    println!("weqx: {:?}", check_weqx(&inst, &res.state.allocation()).verdict);
    println!(
        "init rounds {} <= {}, realloc rounds {} <= {}",
        res.init_transfer_rounds,
        transfer_round_bound(&inst),
        res.realloc_transfer_rounds,
        inst.n() * inst.m()
    );
}
