//! Exhaustive ground truth: the WEFX set, Pareto checks, and an allocation that is
//! Pareto optimal without being fractionally Pareto optimal.

use fairdiv::instance::{Allocation, Instance};
use fairdiv::oracle::{is_fpo_lp, is_fpo_values, is_po_bruteforce, is_po_values, wefx_set, OracleBudget};
use fairdiv::rational::int;

fn main() {
    let budget = OracleBudget::default();
    let inst = Instance::from_pattern_equal(vec![vec![true, false, true], vec![false, true, true]], int(3)).unwrap();
    let set = wefx_set(&inst, &budget).unwrap();
    println!("{} of 8 allocations are WEFX", set.len());
    for a in &set {
        let po = is_po_bruteforce(&inst, a, &budget).unwrap().passed();
        let fpo = is_fpo_lp(&inst, a, &budget).unwrap().passed();
        println!("  owners {:?}: po={po} fpo={fpo}", a.owners());
    }

    let swapped = Allocation::new(2, vec![1, 0, 0]).unwrap();
    println!("swapped: {:?}", is_po_bruteforce(&inst, &swapped, &budget).unwrap());

    let values = vec![vec![int(3), int(1), int(1)], vec![int(2), int(1), int(1)]];
    let owner = [1, 0, 1];
    println!("general values, owners {owner:?}:");
    println!(
        "  po:  {}",
        serde_json::to_string(&is_po_values(&values, &owner, &budget).unwrap()).unwrap()
    );
    println!(
        "  fpo: {}",
        serde_json::to_string(&is_fpo_values(&values, &owner, &budget).unwrap()).unwrap()
    );
}
