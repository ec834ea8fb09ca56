//! Reallocation: raise the prices of one group at a time and move goods from the
//! big agent to the group's least agent until the group is satisfied.
//!
//! With [`Metric::Spending`] the result is WEFX, with [`Metric::Value`] it is WEQX;
//! both come with equilibrium prices and are therefore fPO.

pub mod audit;
pub mod monitor;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Phase, SolveError};
use crate::init::{self, AgentGroups, InitOptions, PathRound};
use crate::instance::{AgentId, GoodId, Instance, Metric};
use crate::market::MarketState;
use crate::rational::Rational;

pub use audit::{AuditCheck, AuditFailure};
pub use monitor::{Invariant, Monitor};

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Explicit owners for the welfare-maximizing start.
    pub initial_owner: Option<Vec<AgentId>>,
    /// Evaluate the invariants after every round and fail on the first violation.
    pub check_invariants: bool,
    /// Collect the auxiliary checks of [`audit`].
    pub audit: bool,
}

impl SolveOptions {
    pub fn checked() -> Self {
        SolveOptions {
            check_invariants: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    PriceRise {
        group: usize,
        goods: Vec<GoodId>,
    },
    Transfer {
        from: AgentId,
        to: AgentId,
        good: GoodId,
        from_unraised: bool,
    },
}

/// One round of the reallocation phase with the least and big agents identified at
/// its start and the agents satisfied toward the big agent at that point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub event: Event,
    pub least: AgentId,
    pub big: AgentId,
    pub satisfied: Vec<AgentId>,
    pub unraised: Vec<AgentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    /// The least agent of `group` was already satisfied (up to the slack of the mode).
    EarlyReturn { group: usize },
    /// Every group but the last was processed.
    LoopExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveTrace {
    pub initial_owner: Vec<AgentId>,
    pub init_rounds: Vec<PathRound>,
    /// Owners and prices after initialization.
    pub owner0: Vec<AgentId>,
    #[serde(with = "crate::rational::serde_vec")]
    pub prices0: Vec<Rational>,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: MarketState,
    pub groups: AgentGroups,
    pub termination: Termination,
    pub init_transfer_rounds: usize,
    pub price_rises: usize,
    pub realloc_transfer_rounds: usize,
    pub trace: SolveTrace,
    pub audit: Vec<AuditFailure>,
}

/// Agent of `group` with least metric, lowest index on ties.
pub fn least_agent(state: &MarketState, group: &[AgentId], metric: Metric) -> AgentId {
    let measures: Vec<(Rational, AgentId)> = group.iter().map(|&i| (state.measure(metric, i), i)).collect();
    measures.into_iter().min().expect("non-empty group").1
}

/// Agent with the largest hat metric, lowest index on ties.
pub fn big_agent(state: &MarketState, metric: Metric) -> AgentId {
    let inst = state.instance();
    let hats: Vec<Rational> = inst.agents().map(|i| state.hat(metric, i)).collect();
    inst.agents()
        .max_by(|&a, &b| hats[a].cmp(&hats[b]).then(b.cmp(&a)))
        .expect("at least one agent")
}

/// Good moved from `b`: its lowest-index good when `b` is unraised, otherwise its
/// lowest-index good not held initially.
pub fn pick_transfer_good(state: &MarketState, b: AgentId, b_unraised: bool, owner0: &[AgentId]) -> Option<GoodId> {
    state.bundle(b).iter().copied().find(|&e| b_unraised || owner0[e] != b)
}

fn violation(round: usize, detail: String) -> SolveError {
    SolveError::InvariantViolation {
        phase: Phase::Realloc,
        round,
        detail,
    }
}

/// Facts about every transferred good that the algorithm's validity rests on.
fn check_transferred_good(
    state: &MarketState,
    metric: Metric,
    e: GoodId,
    b: AgentId,
    l: AgentId,
) -> Result<(), String> {
    let inst = state.instance();
    if state.price(e) != inst.k() {
        return Err(format!("transferred good {e} has price {}", state.price(e)));
    }
    if !state.is_mbb(l, e) {
        return Err(format!("transferred good {e} is not MBB for the least agent {l}"));
    }
    if metric == Metric::Value {
        if inst.is_high(l, e) {
            return Err(format!("least agent {l} values transferred good {e} high"));
        }
        if inst.is_high(b, e) && state.bundle(b).iter().any(|&g| !inst.is_high(b, g)) {
            return Err(format!(
                "big agent {b} gives away high good {e} while holding a low one"
            ));
        }
    }
    Ok(())
}

/// Computes a WEFX (spending) or WEQX (value) equilibrium.
pub fn solve(inst: Arc<Instance>, metric: Metric, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    let init_opts = InitOptions {
        initial_owner: opts.initial_owner.clone(),
        check_invariants: opts.check_invariants,
    };
    let initial_owner = match &opts.initial_owner {
        Some(o) => o.clone(),
        None => init::default_owner(&inst),
    };
    let init = init::initial_equilibrium(inst.clone(), metric, &init_opts)?;
    let mut state = init.state;
    let groups = init.groups;
    let n = inst.n();
    let m = inst.m();
    let k = inst.k().clone();
    let owner0 = state.owners().to_vec();
    let prices0 = state.prices().to_vec();

    let mut monitor = opts.check_invariants.then(|| Monitor::new(&state, &groups, metric));
    let mut auditor = opts.audit.then(|| audit::Auditor::new(&state, &groups, metric));
    if let Some(mon) = monitor.as_mut() {
        mon.observe(&state)
            .map_err(|v| violation(0, format!("{}: {:?}", v.invariant, v.detail)))?;
    }

    let mut unraised = vec![true; n];
    let mut raised_groups = 0usize;
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut termination = Termination::LoopExhausted;
    let mut transfers = 0usize;
    let mut final_least = None;

    let satisfied = |state: &MarketState| -> Vec<AgentId> {
        let q = monitor::q_set(state, metric);
        (0..n).filter(|&i| q[i]).collect()
    };
    let unraised_list = |u: &[bool]| -> Vec<AgentId> { (0..n).filter(|&i| u[i]).collect() };

    for r in 0..groups.len().saturating_sub(1) {
        let members = groups.members(r);
        let mut l = least_agent(&state, members, metric);
        let mut b = big_agent(&state, metric);
        final_least = Some(l);
        if let Some(mon) = monitor.as_mut() {
            mon.note_big(b);
        }
        if let Some(a) = auditor.as_mut() {
            a.processed_groups(&state, rounds.len(), raised_groups);
        }
        let own = state.measure(metric, l);
        let slack = match metric {
            Metric::Spending => &own * &k,
            Metric::Value => own,
        };
        if slack >= state.hat(metric, b) {
            termination = Termination::EarlyReturn { group: r };
            break;
        }

        // price-rise round
        let t = rounds.len();
        if let Some(a) = auditor.as_mut() {
            a.live_round(&state, t, l, b, false, unraised[b]);
        }
        if members.iter().any(|&i| !unraised[i]) {
            return Err(SolveError::DoubleRaise { group: r });
        }
        if let Some(mon) = monitor.as_ref() {
            let v = mon.check_raise(r);
            if !v.holds {
                return Err(violation(t, format!("{}: {:?}", v.invariant, v.detail)));
            }
        }
        let mut goods: Vec<GoodId> = members.iter().flat_map(|&i| state.bundle(i).iter().copied()).collect();
        goods.sort_unstable();
        let record = RoundRecord {
            event: Event::PriceRise {
                group: r,
                goods: goods.clone(),
            },
            least: l,
            big: b,
            satisfied: satisfied(&state),
            unraised: unraised_list(&unraised),
        };
        state.scale_prices(&goods, &k);
        for &i in members {
            unraised[i] = false;
        }
        raised_groups += 1;
        rounds.push(record);
        if let Some(mon) = monitor.as_mut() {
            mon.commit_raise(r);
            mon.observe(&state)
                .map_err(|v| violation(t, format!("{}: {:?}", v.invariant, v.detail)))?;
            if big_agent(&state, metric) != b {
                return Err(violation(t, "price rise changed the big agent".into()));
            }
        }

        let mut group_transfers = 0usize;
        while state.measure(metric, l) < state.hat(metric, b) {
            let t = rounds.len();
            if group_transfers >= m || transfers >= n * m {
                return Err(SolveError::RoundBudgetExceeded {
                    phase: Phase::Realloc,
                    bound: (n * m) as u64,
                });
            }
            if let Some(a) = auditor.as_mut() {
                a.live_round(&state, t, l, b, true, unraised[b]);
            }
            let e = pick_transfer_good(&state, b, unraised[b], &owner0)
                .ok_or(SolveError::EmptyTransferSet { agent: b, round: t })?;
            check_transferred_good(&state, metric, e, b, l).map_err(|d| violation(t, d))?;
            rounds.push(RoundRecord {
                event: Event::Transfer {
                    from: b,
                    to: l,
                    good: e,
                    from_unraised: unraised[b],
                },
                least: l,
                big: b,
                satisfied: satisfied(&state),
                unraised: unraised_list(&unraised),
            });
            let (from, to) = (b, l);
            state.transfer(e, l);
            group_transfers += 1;
            transfers += 1;
            l = least_agent(&state, members, metric);
            b = big_agent(&state, metric);
            if let Some(mon) = monitor.as_mut() {
                mon.note_transfer(from, to);
                mon.note_big(b);
                mon.observe(&state)
                    .map_err(|v| violation(t, format!("{}: {:?}", v.invariant, v.detail)))?;
            }
        }
    }
    if matches!(termination, Termination::LoopExhausted) && !groups.is_empty() {
        final_least = Some(least_agent(&state, groups.members(groups.len() - 1), metric));
    }
    let audit = match auditor {
        Some(mut a) => {
            a.finish(&state, rounds.len(), raised_groups, final_least);
            a.failures
        }
        None => Vec::new(),
    };

    Ok(SolveResult {
        state,
        groups,
        termination,
        init_transfer_rounds: init.transfer_rounds,
        price_rises: raised_groups,
        realloc_transfer_rounds: transfers,
        trace: SolveTrace {
            initial_owner,
            init_rounds: init.log,
            owner0,
            prices0,
            rounds,
        },
        audit,
    })
}

/// Re-applies a trace from the welfare-maximizing start and returns the final state.
pub fn replay(inst: Arc<Instance>, trace: &SolveTrace) -> Result<MarketState, String> {
    let mut state = init::welfare_max_init(inst.clone(), Some(&trace.initial_owner)).map_err(|e| e.to_string())?;
    for (t, round) in trace.init_rounds.iter().enumerate() {
        for mv in &round.moves {
            if state.owner(mv.good) != mv.from {
                return Err(format!(
                    "initialization round {t}: good {} not held by {}",
                    mv.good, mv.from
                ));
            }
            state.transfer(mv.good, mv.to);
        }
    }
    if state.owners() != trace.owner0.as_slice() || state.prices() != trace.prices0.as_slice() {
        return Err("initial equilibrium does not match the trace".into());
    }
    let k = inst.k().clone();
    for (t, round) in trace.rounds.iter().enumerate() {
        match &round.event {
            Event::PriceRise { goods, .. } => state.scale_prices(goods, &k),
            Event::Transfer { from, to, good, .. } => {
                if state.owner(*good) != *from {
                    return Err(format!("round {t}: good {good} not held by {from}"));
                }
                state.transfer(*good, *to);
            }
        }
    }
    Ok(state)
}
