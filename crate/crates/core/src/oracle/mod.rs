//! Brute-force ground truth for small instances: allocation enumeration, Pareto
//! dominance, and an exact LP test for fractional Pareto optimality.

pub mod simplex;

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::instance::{AgentId, Allocation, Instance};
use crate::rational::{self, Rational};
use crate::verify;
use simplex::{Constraint, LpOutcome, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    /// Cap on `n^m`, the number of integral allocations enumerated.
    pub max_allocations: u64,
    /// Cap on `n * m`, the number of LP variables.
    pub max_lp_variables: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_allocations: 10_000_000,
            max_lp_variables: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{n}^{m} allocations exceed the enumeration budget of {budget}")]
    BudgetExceeded { n: usize, m: usize, budget: u64 },
    #[error("{variables} LP variables exceed the limit of {limit}")]
    LpSizeExceeded { variables: usize, limit: usize },
}

/// `n^m`, or `None` on overflow.
pub fn allocation_count(n: usize, m: usize) -> Option<u64> {
    (n as u64).checked_pow(u32::try_from(m).ok()?)
}

fn check_budget(inst: &Instance, budget: &OracleBudget) -> Result<(), OracleError> {
    match allocation_count(inst.n(), inst.m()) {
        Some(c) if c <= budget.max_allocations => Ok(()),
        _ => Err(OracleError::BudgetExceeded {
            n: inst.n(),
            m: inst.m(),
            budget: budget.max_allocations,
        }),
    }
}

/// Visits every owner vector in lexicographic order (good 0 most significant).
/// Stops early when `visit` returns false.
pub fn for_each_owner_vector(n: usize, m: usize, mut visit: impl FnMut(&[AgentId]) -> bool) {
    if n == 0 {
        return;
    }
    let mut owner = vec![0usize; m];
    loop {
        if !visit(&owner) {
            return;
        }
        let mut pos = m;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            owner[pos] += 1;
            if owner[pos] < n {
                break;
            }
            owner[pos] = 0;
        }
    }
}

/// All allocations satisfying `pred`, in lexicographic owner-vector order.
pub fn enumerate_allocations(
    inst: &Instance,
    budget: &OracleBudget,
    mut pred: impl FnMut(&Allocation) -> bool,
) -> Result<Vec<Allocation>, OracleError> {
    check_budget(inst, budget)?;
    let mut out = Vec::new();
    for_each_owner_vector(inst.n(), inst.m(), |owner| {
        let alloc = Allocation::new(inst.n(), owner.to_vec()).expect("owners in range");
        if pred(&alloc) {
            out.push(alloc);
        }
        true
    });
    Ok(out)
}

pub fn wefx_set(inst: &Instance, budget: &OracleBudget) -> Result<Vec<Allocation>, OracleError> {
    enumerate_allocations(inst, budget, |a| verify::check_wefx(inst, a).passed())
}

pub fn weqx_set(inst: &Instance, budget: &OracleBudget) -> Result<Vec<Allocation>, OracleError> {
    enumerate_allocations(inst, budget, |a| verify::check_weqx(inst, a).passed())
}

fn value_matrix(inst: &Instance) -> Vec<Vec<Rational>> {
    inst.agents()
        .map(|i| inst.goods().map(|e| inst.value(i, e).clone()).collect())
        .collect()
}

/// Values multiplied by the common denominator so dominance checks run on integers.
struct IntValues(Vec<Vec<i128>>);

impl IntValues {
    fn new(values: &[Vec<Rational>]) -> Self {
        let one = num_bigint::BigInt::from(1);
        let lcm = values.iter().flatten().fold(one, |acc, v| acc.lcm(v.denom()));
        let to_i = |v: &Rational| {
            (v.numer() * (&lcm / v.denom()))
                .to_i128()
                .expect("scaled values fit in i128")
        };
        IntValues(values.iter().map(|row| row.iter().map(to_i).collect()).collect())
    }

    fn utilities(&self, owner: &[AgentId]) -> Vec<i128> {
        let mut u = vec![0i128; self.0.len()];
        for (e, &i) in owner.iter().enumerate() {
            u[i] += self.0[i][e];
        }
        u
    }
}

fn check_matrix(values: &[Vec<Rational>], owner: &[AgentId]) {
    let m = owner.len();
    assert!(
        values.iter().all(|row| row.len() == m),
        "value rows must cover every good"
    );
    assert!(owner.iter().all(|&i| i < values.len()), "owner out of range");
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PoVerdict {
    Pass,
    /// `by` gives every agent at least as much and someone strictly more.
    Dominated {
        by: Vec<AgentId>,
    },
}

impl PoVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, PoVerdict::Pass)
    }
}

/// Pareto optimality against every integral allocation.
pub fn is_po_bruteforce(inst: &Instance, alloc: &Allocation, budget: &OracleBudget) -> Result<PoVerdict, OracleError> {
    is_po_values(&value_matrix(inst), alloc.owners(), budget)
}

/// [`is_po_bruteforce`] for an arbitrary non-negative valuation matrix (`values[i][e]`).
pub fn is_po_values(
    values: &[Vec<Rational>],
    owner: &[AgentId],
    budget: &OracleBudget,
) -> Result<PoVerdict, OracleError> {
    check_matrix(values, owner);
    let (n, m) = (values.len(), owner.len());
    match allocation_count(n, m) {
        Some(c) if c <= budget.max_allocations => {}
        _ => {
            return Err(OracleError::BudgetExceeded {
                n,
                m,
                budget: budget.max_allocations,
            })
        }
    }
    let vals = IntValues::new(values);
    let base = vals.utilities(owner);
    let mut witness = None;
    for_each_owner_vector(n, m, |cand| {
        let u = vals.utilities(cand);
        let weakly = u.iter().zip(&base).all(|(a, b)| a >= b);
        if weakly && u != base {
            witness = Some(cand.to_vec());
            return false;
        }
        true
    });
    Ok(match witness {
        Some(by) => PoVerdict::Dominated { by },
        None => PoVerdict::Pass,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FpoVerdict {
    Pass,
    /// A fractional allocation (`x[i][e]`, agent-major) with more total welfare and
    /// no agent worse off.
    Dominated {
        #[serde(serialize_with = "serialize_matrix")]
        fractional: Vec<Vec<Rational>>,
        #[serde(with = "crate::rational::serde_str")]
        welfare: Rational,
    },
}

fn serialize_matrix<S: serde::Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
    use serde::Serialize;
    m.iter()
        .map(|row| row.iter().map(rational::format).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .serialize(s)
}

impl FpoVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, FpoVerdict::Pass)
    }
}

/// Fractional Pareto optimality: maximize total value over fractional allocations
/// that keep every agent at least at its current value; `alloc` is fPO iff the
/// maximum equals its own total value.
pub fn is_fpo_lp(inst: &Instance, alloc: &Allocation, budget: &OracleBudget) -> Result<FpoVerdict, OracleError> {
    is_fpo_values(&value_matrix(inst), alloc.owners(), budget)
}

/// [`is_fpo_lp`] for an arbitrary non-negative valuation matrix (`values[i][e]`).
pub fn is_fpo_values(
    values: &[Vec<Rational>],
    owner: &[AgentId],
    budget: &OracleBudget,
) -> Result<FpoVerdict, OracleError> {
    check_matrix(values, owner);
    let (n, m) = (values.len(), owner.len());
    let vars = n * m;
    if vars > budget.max_lp_variables {
        return Err(OracleError::LpSizeExceeded {
            variables: vars,
            limit: budget.max_lp_variables,
        });
    }
    if n <= 1 || m == 0 {
        return Ok(FpoVerdict::Pass);
    }
    let var = |i: AgentId, e: usize| i * m + e;
    let mut c = vec![rational::zero(); vars];
    for i in 0..n {
        for e in 0..m {
            c[var(i, e)] = values[i][e].clone();
        }
    }
    let mut constraints = Vec::with_capacity(n + m);
    for e in 0..m {
        let mut coeffs = vec![rational::zero(); vars];
        for i in 0..n {
            coeffs[var(i, e)] = rational::one();
        }
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Eq,
            rhs: rational::one(),
        });
    }
    let mut current = rational::zero();
    for i in 0..n {
        let mut coeffs = vec![rational::zero(); vars];
        let mut u = rational::zero();
        for e in 0..m {
            coeffs[var(i, e)] = values[i][e].clone();
            if owner[e] == i {
                u += &values[i][e];
            }
        }
        current += &u;
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Ge,
            rhs: u,
        });
    }
    match simplex::maximize(&c, &constraints) {
        LpOutcome::Optimal { value, x } => {
            if value > current {
                Ok(FpoVerdict::Dominated {
                    fractional: (0..n).map(|i| x[i * m..(i + 1) * m].to_vec()).collect(),
                    welfare: value,
                })
            } else {
                Ok(FpoVerdict::Pass)
            }
        }
        other => unreachable!("the current allocation is feasible and welfare is bounded: {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn inst(pattern: Vec<Vec<bool>>, k: i64) -> Instance {
        Instance::from_pattern_equal(pattern, int(k)).unwrap()
    }

    fn alloc(n: usize, owner: Vec<usize>) -> Allocation {
        Allocation::new(n, owner).unwrap()
    }

    #[test]
    fn enumeration_order_and_count() {
        let i = inst(vec![vec![true, true], vec![true, true]], 2);
        let all = enumerate_allocations(&i, &OracleBudget::default(), |_| true).unwrap();
        let owners: Vec<Vec<usize>> = all.iter().map(|a| a.owners().to_vec()).collect();
        assert_eq!(owners, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert!(enumerate_allocations(&i, &OracleBudget::default(), |_| false)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let i = inst(vec![vec![true; 5]; 2], 2);
        let tiny = OracleBudget {
            max_allocations: 31,
            ..Default::default()
        };
        assert!(matches!(wefx_set(&i, &tiny), Err(OracleError::BudgetExceeded { .. })));
        let ok = OracleBudget {
            max_allocations: 32,
            ..Default::default()
        };
        assert!(wefx_set(&i, &ok).is_ok());
        let lp = OracleBudget {
            max_lp_variables: 9,
            ..Default::default()
        };
        assert!(matches!(
            is_fpo_lp(&i, &alloc(2, vec![0; 5]), &lp),
            Err(OracleError::LpSizeExceeded { .. })
        ));
    }

    #[test]
    fn welfare_maximizer_is_po_and_fpo() {
        let i = inst(vec![vec![true, false, true], vec![false, true, true]], 3);
        let a = alloc(2, vec![0, 1, 0]);
        assert!(is_po_bruteforce(&i, &a, &OracleBudget::default()).unwrap().passed());
        assert!(is_fpo_lp(&i, &a, &OracleBudget::default()).unwrap().passed());
    }

    #[test]
    fn swapped_goods_are_dominated() {
        // each agent holds the good the other values high
        let i = inst(vec![vec![true, false], vec![false, true]], 2);
        let a = alloc(2, vec![1, 0]);
        assert_eq!(
            is_po_bruteforce(&i, &a, &OracleBudget::default()).unwrap(),
            PoVerdict::Dominated { by: vec![0, 1] }
        );
        match is_fpo_lp(&i, &a, &OracleBudget::default()).unwrap() {
            FpoVerdict::Dominated { welfare, .. } => assert_eq!(welfare, int(4)),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn po_but_not_fpo_with_general_values() {
        // agent 1 holds goods 0 and 2 for 3; agent 0 holds good 1 for 1. No integral
        // reallocation helps, but agent 0 trading good 1 for half of good 0 does.
        let v = vec![vec![int(3), int(1), int(1)], vec![int(2), int(1), int(1)]];
        let owner = [1, 0, 1];
        let b = OracleBudget::default();
        assert!(is_po_values(&v, &owner, &b).unwrap().passed());
        match is_fpo_values(&v, &owner, &b).unwrap() {
            FpoVerdict::Dominated { welfare, .. } => assert!(welfare > int(4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_agent_always_passes() {
        let i = inst(vec![vec![true, false]], 2);
        let a = alloc(1, vec![0, 0]);
        assert!(is_po_bruteforce(&i, &a, &OracleBudget::default()).unwrap().passed());
        assert!(is_fpo_lp(&i, &a, &OracleBudget::default()).unwrap().passed());
        assert_eq!(wefx_set(&i, &OracleBudget::default()).unwrap().len(), 1);
        assert_eq!(weqx_set(&i, &OracleBudget::default()).unwrap().len(), 1);
    }

    mod props {
        use super::*;
        use crate::init;
        use crate::rational::ratio;
        use proptest::prelude::*;
        use std::sync::Arc;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn fpo_implies_po(
                high in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 4), 3),
                owner in proptest::collection::vec(0usize..3, 4),
                k in prop_oneof![Just(int(2)), Just(ratio(3, 2))],
            ) {
                let i = Instance::from_pattern_equal(high, k).unwrap();
                let a = alloc(3, owner);
                let b = OracleBudget::default();
                if is_fpo_lp(&i, &a, &b).unwrap().passed() {
                    prop_assert!(is_po_bruteforce(&i, &a, &b).unwrap().passed());
                }
            }

            #[test]
            fn equilibria_pass_the_lp(
                high in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 4), 3),
            ) {
                let i = Arc::new(Instance::from_pattern_equal(high, int(3)).unwrap());
                let s = init::welfare_max_init(i.clone(), None).unwrap();
                prop_assert!(verify::certify_fpo(&s).passed());
                prop_assert!(is_fpo_lp(&i, &s.allocation(), &OracleBudget::default()).unwrap().passed());
            }
        }
    }
}
