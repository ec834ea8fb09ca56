//! Checking a hand-made allocation and revalidating the witness of a failure.

use fairdiv::instance::{Allocation, Instance};
use fairdiv::rational::int;
use fairdiv::verify::{check_ef1, check_efx, check_wefx, check_weqx};

fn main() {
    let inst = Instance::from_pattern_equal(
        vec![vec![true, true, false, false], vec![true, false, true, false]],
        int(2),
    )
    .unwrap();
    let alloc = Allocation::new(2, vec![0, 0, 0, 1]).unwrap();
    for report in [
        check_wefx(&inst, &alloc),
        check_weqx(&inst, &alloc),
        check_efx(&inst, &alloc),
        check_ef1(&inst, &alloc),
    ] {
        println!("{}: {}", report.criterion, serde_json::to_string(&report).unwrap());
        if report.failed() {
            println!(
                "  witness holds on re-check: {}",
                report.revalidate(&inst, &alloc, None)
            );
        }
    }
}
