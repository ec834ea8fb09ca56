//! Reference implementation of the earlier unweighted EFX price-rise algorithm, with
//! a bounded runner that detects scaling cycles.
//!
//! Each outer step runs the MBB-path transfer loop from the least spender, then
//! either returns or raises the prices of every good held by agents reachable from
//! the least spender. Its return test looks at all unreachable agents at once, which
//! can fail forever on instances such as [`cycling_instance`].

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::Zero;
use serde::Serialize;

use crate::error::SolveError;
use crate::init::{self, Move};
use crate::instance::{AgentId, GoodId, Instance};
use crate::market::MarketState;
use crate::rational::{self, Rational};

/// Two agents, five goods, `k = 5`: `v1 = (5,5,5,1,1)`, `v2 = (1,1,1,1,5)`.
pub fn cycling_instance() -> Instance {
    let h = true;
    let l = false;
    Instance::from_pattern_equal(vec![vec![h, h, h, l, l], vec![l, l, l, l, h]], rational::int(5))
        .expect("valid instance")
}

/// Start on [`cycling_instance`] that gives the all-low good to the second agent.
pub const CYCLING_OWNER: [AgentId; 5] = [0, 0, 0, 1, 1];

/// Lowest-index agent of minimum (unweighted) spending.
pub fn least_spender(state: &MarketState) -> AgentId {
    let inst = state.instance();
    inst.agents()
        .min_by(|&a, &b| state.spending(a).cmp(&state.spending(b)).then(a.cmp(&b)))
        .expect("n >= 1")
}

/// Spending after dropping the cheapest good; `None` for an empty bundle.
fn spending_minus_cheapest(state: &MarketState, h: AgentId) -> Option<Rational> {
    let cheapest = state.bundle(h).iter().map(|&e| state.price(e)).min()?;
    Some(state.spending(h) - cheapest)
}

/// The next single-hop transfer of the inner loop: BFS from the least spender `i`;
/// the first visited agent `j` holding a good `e` that is MBB for `j`'s BFS parent
/// with `p(X_j \ e) > p(X_i)`. Among such goods the cheapest, then lowest index.
pub fn find_transfer(state: &MarketState) -> Option<Move> {
    let i = least_spender(state);
    let floor = state.spending(i);
    let (order, parent) = state.mbb_graph().bfs(i);
    for &j in &order[1..] {
        let q = parent[j].expect("visited agents have a parent");
        let total = state.spending(j);
        let good = state
            .bundle(j)
            .iter()
            .copied()
            .filter(|&e| state.is_mbb(q, e))
            .min_by(|&a, &b| state.price(a).cmp(state.price(b)).then(a.cmp(&b)));
        if let Some(e) = good {
            if &total - state.price(e) > floor {
                return Some(Move {
                    good: e,
                    from: j,
                    to: q,
                });
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepKind {
    /// Every agent outside the reachable set passes the spending test.
    Returned,
    /// Prices of the goods held by `raised` agents were multiplied by `k`.
    Raised { raised: Vec<AgentId>, goods: Vec<GoodId> },
    /// The transfer loop hit its cap without reaching a fixpoint.
    TransferLimit,
}

/// One outer step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GmStep {
    pub transfers: Vec<Move>,
    /// Least spender after the transfer loop.
    pub least: AgentId,
    pub kind: StepKind,
}

/// Cap on inner transfers per step.
pub fn inner_transfer_limit(inst: &Instance) -> usize {
    (inst.n() * inst.m() * inst.m()).max(1) * 4
}

/// Runs one outer step on `state` in place.
pub fn gm_step(state: &mut MarketState) -> GmStep {
    let limit = inner_transfer_limit(state.instance());
    let mut transfers = Vec::new();
    while let Some(mv) = find_transfer(state) {
        if transfers.len() == limit {
            return GmStep {
                transfers,
                least: least_spender(state),
                kind: StepKind::TransferLimit,
            };
        }
        state.transfer(mv.good, mv.to);
        transfers.push(mv);
    }
    let i = least_spender(state);
    let floor = state.spending(i);
    let reach = state.mbb_graph().reachable_from(i);
    let mut in_c = vec![false; state.instance().n()];
    for &a in &reach {
        in_c[a] = true;
    }
    let done = state
        .instance()
        .agents()
        .filter(|&h| !in_c[h])
        .all(|h| spending_minus_cheapest(state, h).is_none_or(|s| s <= floor));
    if done {
        return GmStep {
            transfers,
            least: i,
            kind: StepKind::Returned,
        };
    }
    let mut raised = reach;
    raised.sort_unstable();
    let mut goods: Vec<GoodId> = raised.iter().flat_map(|&a| state.bundle(a).iter().copied()).collect();
    goods.sort_unstable();
    let k = state.instance().k().clone();
    state.scale_prices(&goods, &k);
    GmStep {
        transfers,
        least: i,
        kind: StepKind::Raised { raised, goods },
    }
}

/// State `t` of a run: the allocation and prices before step `t + 1`, plus that step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    pub owner: Vec<AgentId>,
    #[serde(with = "crate::rational::serde_vec")]
    pub prices: Vec<Rational>,
    pub least_spender: AgentId,
    /// `None` for the last recorded state.
    pub step: Option<GmStep>,
}

/// States `t1 < t2` with equal allocations and `p_t2 = scale * p_t1`, `scale > 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleProof {
    pub t1: usize,
    pub t2: usize,
    #[serde(with = "crate::rational::serde_str")]
    pub scale: Rational,
}

impl CycleProof {
    /// Replays `t2 - t1` steps from `start` (the state at `t1`) and checks that the
    /// result is `start` with all prices multiplied by `scale`.
    pub fn check(&self, start: &MarketState) -> Result<(), String> {
        if self.t2 <= self.t1 {
            return Err(format!("t2 = {} is not after t1 = {}", self.t2, self.t1));
        }
        if self.scale <= rational::one() {
            return Err(format!("scale {} is not above 1", rational::format(&self.scale)));
        }
        let mut s = start.clone();
        for step in 0..self.t2 - self.t1 {
            if let k @ (StepKind::Returned | StepKind::TransferLimit) = gm_step(&mut s).kind {
                return Err(format!("step {step} of the replay ended with {k:?}"));
            }
        }
        let mut expected = start.clone();
        expected.scale_all_prices(&self.scale);
        if s.owners() != expected.owners() {
            return Err("allocation differs after replay".into());
        }
        if s.prices() != expected.prices() {
            return Err("prices are not the scaled start prices".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum GmOutcome {
    Terminated {
        steps: usize,
    },
    CycleDetected(CycleProof),
    BudgetExhausted {
        steps: usize,
    },
    /// A step's transfer loop hit [`inner_transfer_limit`].
    TransferLimit {
        step: usize,
    },
}

#[derive(Debug, Clone)]
pub struct GmRun {
    pub outcome: GmOutcome,
    pub trace: Vec<TraceRow>,
    /// The state when the run stopped.
    pub state: MarketState,
}

fn normalized(state: &MarketState) -> (Vec<AgentId>, Vec<Rational>) {
    let min = state.prices().iter().min().cloned().unwrap_or_else(rational::one);
    (
        state.owners().to_vec(),
        state.prices().iter().map(|p| p / &min).collect(),
    )
}

fn min_price(state: &MarketState) -> Rational {
    state.prices().iter().min().cloned().unwrap_or_else(Rational::zero)
}

/// Runs at most `max_steps` outer steps from the welfare-maximizing start (optionally
/// with an explicit owner vector). After each raise the new state is compared with
/// every earlier state up to a uniform price factor.
pub fn run_gm(inst: Arc<Instance>, owner: Option<&[AgentId]>, max_steps: usize) -> Result<GmRun, SolveError> {
    let mut state = init::welfare_max_init(inst, owner)?;
    let mut trace = Vec::new();
    let mut seen: HashMap<(Vec<AgentId>, Vec<Rational>), usize> = HashMap::new();
    let mut mins = vec![min_price(&state)];
    seen.insert(normalized(&state), 0);
    let row = |state: &MarketState, round: usize| TraceRow {
        round,
        owner: state.owners().to_vec(),
        prices: state.prices().to_vec(),
        least_spender: least_spender(state),
        step: None,
    };
    for t in 1..=max_steps {
        let mut current = row(&state, t - 1);
        let step = gm_step(&mut state);
        let kind = step.kind.clone();
        current.step = Some(step);
        trace.push(current);
        match kind {
            StepKind::Returned => {
                trace.push(row(&state, t));
                return Ok(GmRun {
                    outcome: GmOutcome::Terminated { steps: t },
                    trace,
                    state,
                });
            }
            StepKind::TransferLimit => {
                trace.push(row(&state, t));
                return Ok(GmRun {
                    outcome: GmOutcome::TransferLimit { step: t },
                    trace,
                    state,
                });
            }
            StepKind::Raised { .. } => {}
        }
        mins.push(min_price(&state));
        let key = normalized(&state);
        if let Some(&t1) = seen.get(&key) {
            trace.push(row(&state, t));
            return Ok(GmRun {
                outcome: GmOutcome::CycleDetected(CycleProof {
                    t1,
                    t2: t,
                    scale: &mins[t] / &mins[t1],
                }),
                trace,
                state,
            });
        }
        seen.insert(key, t);
    }
    trace.push(row(&state, max_steps));
    Ok(GmRun {
        outcome: GmOutcome::BudgetExhausted { steps: max_steps },
        trace,
        state,
    })
}

/// Rebuilds the state recorded in a trace row.
pub fn state_at(inst: Arc<Instance>, row: &TraceRow) -> MarketState {
    let alloc = crate::instance::Allocation::new(inst.n(), row.owner.clone()).expect("trace owners are valid");
    MarketState::new(inst, &alloc, row.prices.clone()).expect("trace prices are positive")
}

/// Whether two states agree exactly.
pub fn same_state(a: &MarketState, b: &MarketState) -> bool {
    a.owners() == b.owners() && a.prices() == b.prices()
}

/// Checks `gm_step(c * S) = c * gm_step(S)` on one state.
pub fn scale_equivariant_at(state: &MarketState, c: &Rational) -> bool {
    let mut plain = state.clone();
    let a = gm_step(&mut plain);
    plain.scale_all_prices(c);
    let mut scaled = state.clone();
    scaled.scale_all_prices(c);
    let b = gm_step(&mut scaled);
    a == b && same_state(&plain, &scaled)
}
