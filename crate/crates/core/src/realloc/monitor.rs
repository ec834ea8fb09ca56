//! Runtime checks of the reallocation invariants.

use std::fmt;

use serde::Serialize;

use crate::init::AgentGroups;
use crate::instance::{AgentId, GoodId, Metric};
use crate::market::MarketState;
use crate::rational::{self, Rational};
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Invariant {
    /// `(X, p)` is an equilibrium.
    Equilibrium,
    /// Every group is pWEFX (spending) or WEQX (value) internally.
    GroupFairness,
    /// Raised groups form a prefix, their goods were raised once, MBB ratios and
    /// bundle containment match the raised/unraised split.
    RaisedGroups,
    /// The largest hat metric never increases.
    BigMetricMonotone,
    /// A group being raised never contained a big agent and still holds its
    /// initial bundles.
    PristineRaise,
    /// The set of agents satisfied toward the big agent only grows.
    QMonotone,
}

impl Invariant {
    pub const ALL: [Invariant; 6] = [
        Invariant::Equilibrium,
        Invariant::GroupFairness,
        Invariant::RaisedGroups,
        Invariant::BigMetricMonotone,
        Invariant::PristineRaise,
        Invariant::QMonotone,
    ];
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::Equilibrium => "equilibrium",
            Invariant::GroupFairness => "group fairness",
            Invariant::RaisedGroups => "raised groups",
            Invariant::BigMetricMonotone => "big metric monotone",
            Invariant::PristineRaise => "pristine raise",
            Invariant::QMonotone => "Q monotone",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub invariant: Invariant,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Agents whose own metric reaches the largest hat metric.
pub fn q_set(state: &MarketState, metric: Metric) -> Vec<bool> {
    let inst = state.instance();
    let top = max_hat(state, metric);
    inst.agents().map(|i| state.measure(metric, i) >= top).collect()
}

pub fn max_hat(state: &MarketState, metric: Metric) -> Rational {
    let inst = state.instance();
    inst.agents()
        .map(|i| state.hat(metric, i))
        .max()
        .unwrap_or_else(rational::zero)
}

/// Tracks the history the invariants talk about and evaluates them on snapshots.
#[derive(Debug, Clone)]
pub struct Monitor {
    metric: Metric,
    groups: AgentGroups,
    owner0: Vec<AgentId>,
    prices0: Vec<Rational>,
    alpha0: Vec<Rational>,
    raised: usize,
    was_big: Vec<bool>,
    touched: Vec<bool>,
    last_max_hat: Option<Rational>,
    last_q: Option<Vec<bool>>,
}

impl Monitor {
    pub fn new(initial: &MarketState, groups: &AgentGroups, metric: Metric) -> Self {
        let n = initial.instance().n();
        Monitor {
            metric,
            groups: groups.clone(),
            owner0: initial.owners().to_vec(),
            prices0: initial.prices().to_vec(),
            alpha0: initial.alphas().to_vec(),
            raised: 0,
            was_big: vec![false; n],
            touched: vec![false; n],
            last_max_hat: None,
            last_q: None,
        }
    }

    pub fn raised_groups(&self) -> usize {
        self.raised
    }

    pub fn note_big(&mut self, b: AgentId) {
        self.was_big[b] = true;
    }

    pub fn note_transfer(&mut self, from: AgentId, to: AgentId) {
        self.touched[from] = true;
        self.touched[to] = true;
    }

    /// Pristine-raise check for group `r` about to be raised.
    pub fn check_raise(&self, r: usize) -> Verdict {
        let mut detail = None;
        if r != self.raised {
            detail = Some(format!("group {r} raised while {} groups are raised", self.raised));
        } else if let Some(&i) = self.groups.members(r).iter().find(|&&i| self.was_big[i]) {
            detail = Some(format!("agent {i} of group {r} was a big agent before its raise"));
        } else if let Some(&i) = self.groups.members(r).iter().find(|&&i| self.touched[i]) {
            detail = Some(format!("agent {i} of group {r} lost or gained goods before its raise"));
        }
        verdict(Invariant::PristineRaise, detail)
    }

    /// Records that group `r` was raised.
    pub fn commit_raise(&mut self, r: usize) {
        debug_assert_eq!(r, self.raised);
        self.raised += 1;
    }

    /// Evaluates every state invariant except the pristine-raise check, without recording.
    pub fn verdicts(&self, state: &MarketState) -> Vec<Verdict> {
        let top = max_hat(state, self.metric);
        let q = q_set(state, self.metric);
        let big_detail = match &self.last_max_hat {
            Some(prev) if top > *prev => Some(format!("largest hat metric rose from {prev} to {top}")),
            _ => None,
        };
        let q_detail = self.last_q.as_ref().and_then(|prev| {
            prev.iter()
                .zip(&q)
                .position(|(&a, &b)| a && !b)
                .map(|i| format!("agent {i} left Q"))
        });
        vec![
            verdict(
                Invariant::Equilibrium,
                state.is_equilibrium().err().map(|w| format!("{w:?}")),
            ),
            verdict(Invariant::GroupFairness, self.group_fairness(state)),
            verdict(Invariant::RaisedGroups, self.raised_structure(state)),
            verdict(Invariant::BigMetricMonotone, big_detail),
            verdict(Invariant::QMonotone, q_detail),
        ]
    }

    /// Evaluates the state invariants and records the snapshot for the monotone ones.
    /// Returns the first failure.
    pub fn observe(&mut self, state: &MarketState) -> Result<(), Verdict> {
        let verdicts = self.verdicts(state);
        self.last_max_hat = Some(max_hat(state, self.metric));
        self.last_q = Some(q_set(state, self.metric));
        match verdicts.into_iter().find(|v| !v.holds) {
            Some(v) => Err(v),
            None => Ok(()),
        }
    }

    fn group_fairness(&self, state: &MarketState) -> Option<String> {
        let inst = state.instance();
        let alloc = state.allocation();
        for (r, members) in self.groups.all().iter().enumerate() {
            let report = match self.metric {
                Metric::Spending => verify::check_pwefx_within(inst, &alloc, state.prices(), members),
                Metric::Value => verify::check_weqx_within(inst, &alloc, members),
            };
            if let Some(w) = report.witness() {
                return Some(format!("group {r}: {w:?}"));
            }
        }
        None
    }

    fn raised_structure(&self, state: &MarketState) -> Option<String> {
        let inst = state.instance();
        let k = inst.k();
        let inv_k = rational::one() / k;
        let raised_agent = |i: AgentId| self.groups.group_of(i) < self.raised;
        let raised_good = |e: GoodId| raised_agent(self.owner0[e]);
        for e in inst.goods() {
            let want = if raised_good(e) {
                &self.prices0[e] * k
            } else {
                self.prices0[e].clone()
            };
            if state.price(e) != &want {
                return Some(format!("good {e} has price {} instead of {want}", state.price(e)));
            }
        }
        for i in inst.agents() {
            for e in inst.goods() {
                let bpb = state.bang_per_buck(i, e);
                if raised_good(e) && bpb > &self.alpha0[i] / k {
                    return Some(format!("agent {i} has ratio {bpb} on raised good {e}"));
                }
                if raised_agent(i) && !raised_good(e) && bpb != inv_k {
                    return Some(format!("raised agent {i} has ratio {bpb} on unraised good {e}"));
                }
            }
        }
        for i in inst.agents() {
            let initial: Vec<GoodId> = inst.goods().filter(|&e| self.owner0[e] == i).collect();
            let current = state.bundle(i);
            let alpha = state.alpha(i);
            if inst.m() == 0 {
                continue;
            }
            if raised_agent(i) {
                let ok = if self.alpha0[i] == rational::one() {
                    *alpha == inv_k
                } else {
                    *alpha <= inv_k
                };
                if !ok {
                    return Some(format!("raised agent {i} has MBB ratio {alpha}"));
                }
                if let Some(e) = initial.iter().find(|e| !current.contains(e)) {
                    return Some(format!("raised agent {i} lost initial good {e}"));
                }
            } else {
                // Raising lower groups can cost an agent that holds nothing its MBB
                // tier, so only an empty-handed agent may drop, and by one factor of k.
                let keeps = *alpha == self.alpha0[i];
                let drops = current.is_empty() && *alpha == &self.alpha0[i] / k;
                if !keeps && !drops {
                    return Some(format!("unraised agent {i} has MBB ratio {alpha}"));
                }
                if let Some(e) = current.iter().find(|e| !initial.contains(e)) {
                    return Some(format!("unraised agent {i} received good {e}"));
                }
            }
        }
        None
    }
}

fn verdict(invariant: Invariant, detail: Option<String>) -> Verdict {
    Verdict {
        invariant,
        holds: detail.is_none(),
        detail,
    }
}
