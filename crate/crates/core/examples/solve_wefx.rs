//! WEFX + equilibrium prices on the two-agent cycling instance.

use std::sync::Arc;

use fairdiv::gmref::cycling_instance;
use fairdiv::instance::Metric;
use fairdiv::rational::format;
use fairdiv::realloc::{solve, SolveOptions};
use fairdiv::verify::{certify_fpo, check_wefx};

fn main() {
    let inst = Arc::new(cycling_instance());
    let res = solve(inst.clone(), Metric::Spending, &SolveOptions::checked()).expect("solver guarantees hold");
    for i in inst.agents() {
        let goods: Vec<&str> = res
            .state
            .bundle(i)
            .iter()
            .map(|&e| inst.good_labels()[e].as_str())
            .collect();
        println!("{}: {:?}", inst.agent_labels()[i], goods);
    }
    let prices: Vec<String> = res.state.prices().iter().map(format).collect();
    println!("prices: {}", prices.join(" "));
    println!("termination: {:?}", res.termination);
    println!("wefx: {:?}", check_wefx(&inst, &res.state.allocation()).verdict);
    println!("fpo certificate: {:?}", certify_fpo(&res.state).verdict);
}
