//! The reference price-rise algorithm never stops on the cycling instance: after two
//! rounds the allocation repeats with every price multiplied by 5.

use std::sync::Arc;

use fairdiv::gmref::{cycling_instance, run_gm, state_at, GmOutcome, CYCLING_OWNER};
use fairdiv::rational::format;

fn main() {
    let inst = Arc::new(cycling_instance());
    let run = run_gm(inst.clone(), Some(&CYCLING_OWNER), 10).unwrap();
    for row in &run.trace {
        let p: Vec<String> = row.prices.iter().map(format).collect();
        println!(
            "round {}: least spender {}, prices ({})",
            row.round,
            row.least_spender,
            p.join(",")
        );
    }
    match &run.outcome {
        GmOutcome::CycleDetected(proof) => {
            println!("cycle: t1={} t2={} scale={}", proof.t1, proof.t2, format(&proof.scale));
            let start = state_at(inst, &run.trace[proof.t1]);
            println!("replay check: {:?}", proof.check(&start));
        }
        other => println!("no cycle: {other:?}"),
    }
}
