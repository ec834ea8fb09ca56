//! Optional checks of intermediate facts the correctness argument relies on.
//!
//! Unlike the invariants these are not escalated; failures are collected and
//! returned with the solve result.

use serde::Serialize;

use super::monitor::q_set;
use crate::init::AgentGroups;
use crate::instance::{AgentId, Metric};
use crate::market::MarketState;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditCheck {
    /// At a live round the least and the big agent sit in different groups.
    LeastAndBigApart,
    /// An unraised big agent in group `s` at a transfer round means every group from
    /// `s` upward is satisfied toward it.
    UnraisedBigSatisfiesHigherGroups,
    /// Fully processed raised groups are satisfied toward the big agent.
    RaisedGroupsSatisfied,
    /// At the end, unsatisfied agents hold their initial bundles at initial prices,
    /// and the last least agent is least among them.
    UnsatisfiedAgentsUntouched,
    /// At the end, an unsatisfied agent's MBB ratio is at least `k` times its ratio
    /// on any good of a satisfied agent that is raised or sits in a higher group.
    MbbGapTowardSatisfied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFailure {
    pub check: AuditCheck,
    pub round: usize,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Auditor {
    metric: Metric,
    groups: AgentGroups,
    owner0: Vec<AgentId>,
    prices0: Vec<Rational>,
    pub failures: Vec<AuditFailure>,
}

impl Auditor {
    pub fn new(initial: &MarketState, groups: &AgentGroups, metric: Metric) -> Self {
        Auditor {
            metric,
            groups: groups.clone(),
            owner0: initial.owners().to_vec(),
            prices0: initial.prices().to_vec(),
            failures: Vec::new(),
        }
    }

    fn fail(&mut self, check: AuditCheck, round: usize, detail: String) {
        self.failures.push(AuditFailure { check, round, detail });
    }

    /// A price-rise or transfer round is about to run with least agent `l` and big `b`.
    pub fn live_round(
        &mut self,
        state: &MarketState,
        round: usize,
        l: AgentId,
        b: AgentId,
        transfer: bool,
        b_unraised: bool,
    ) {
        let (gl, gb) = (self.groups.group_of(l), self.groups.group_of(b));
        if gl == gb {
            self.fail(
                AuditCheck::LeastAndBigApart,
                round,
                format!("least {l} and big {b} both in group {gl}"),
            );
        }
        if transfer && b_unraised {
            let q = q_set(state, self.metric);
            let missing = (gb..self.groups.len())
                .flat_map(|r| self.groups.members(r).iter().copied())
                .find(|&i| !q[i]);
            if let Some(i) = missing {
                self.fail(
                    AuditCheck::UnraisedBigSatisfiesHigherGroups,
                    round,
                    format!("big {b} in group {gb} but agent {i} is not satisfied"),
                );
            }
        }
    }

    /// Checks that the first `raised` groups are satisfied (at a for-loop head or at
    /// the end, when no raised group is mid-processing).
    pub fn processed_groups(&mut self, state: &MarketState, round: usize, raised: usize) {
        let q = q_set(state, self.metric);
        let missing = (0..raised)
            .flat_map(|r| self.groups.members(r).iter().copied())
            .find(|&i| !q[i]);
        if let Some(i) = missing {
            self.fail(
                AuditCheck::RaisedGroupsSatisfied,
                round,
                format!("agent {i} of a raised group is not satisfied"),
            );
        }
    }

    /// End-of-run checks; `l` is the least agent of the first unraised group, if any.
    ///
    /// The MBB-gap check skips satisfied agents of the same or a lower unraised group:
    /// there an unsatisfied agent may value the satisfied agent's goods high.
    pub fn finish(&mut self, state: &MarketState, round: usize, raised: usize, l: Option<AgentId>) {
        self.processed_groups(state, round, raised);
        let inst = state.instance();
        let q = q_set(state, self.metric);
        let outside: Vec<AgentId> = inst.agents().filter(|&i| !q[i]).collect();
        for &i in &outside {
            let initial: Vec<usize> = inst.goods().filter(|&e| self.owner0[e] == i).collect();
            if state.bundle(i) != initial.as_slice() {
                self.fail(
                    AuditCheck::UnsatisfiedAgentsUntouched,
                    round,
                    format!("unsatisfied agent {i} does not hold its initial bundle"),
                );
            } else if let Some(&e) = initial.iter().find(|&&e| state.price(e) != &self.prices0[e]) {
                self.fail(
                    AuditCheck::UnsatisfiedAgentsUntouched,
                    round,
                    format!("unsatisfied agent {i} holds re-priced good {e}"),
                );
            }
            if let Some(l) = l {
                if state.measure(self.metric, i) < state.measure(self.metric, l) {
                    self.fail(
                        AuditCheck::UnsatisfiedAgentsUntouched,
                        round,
                        format!("unsatisfied agent {i} is below the least agent {l}"),
                    );
                }
            }
        }
        let k = inst.k();
        for &i in &outside {
            let gi = self.groups.group_of(i);
            let relevant = |j: AgentId| {
                let gj = self.groups.group_of(j);
                gj < raised || gj > gi
            };
            for j in inst.agents().filter(|&j| q[j] && relevant(j)) {
                if let Some(&e) = state
                    .bundle(j)
                    .iter()
                    .find(|&&e| state.alpha(i) < &(state.bang_per_buck(i, e) * k))
                {
                    self.fail(
                        AuditCheck::MbbGapTowardSatisfied,
                        round,
                        format!(
                            "agent {i} (group {gi}) ratio {} vs good {e} of agent {j} (group {}), {raised} raised",
                            state.alpha(i),
                            self.groups.group_of(j)
                        ),
                    );
                    return;
                }
            }
        }
    }
}
