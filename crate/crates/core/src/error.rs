use std::fmt;

use serde::Serialize;

use crate::instance::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Realloc,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "initialization",
            Phase::Realloc => "reallocation",
        })
    }
}

/// Failures of the solvers. Apart from `InvalidOverride`, every variant means a
/// proven guarantee did not hold on this run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid initial owner override: {0}")]
    InvalidOverride(String),
    #[error("{phase} exceeded its round bound of {bound}")]
    RoundBudgetExceeded { phase: Phase, bound: u64 },
    #[error("invariant violated during {phase} at round {round}: {detail}")]
    InvariantViolation { phase: Phase, round: usize, detail: String },
    #[error("group {group} selected for a second price rise")]
    DoubleRaise { group: usize },
    #[error("agent {agent} has no transferable good at round {round}")]
    EmptyTransferSet { agent: AgentId, round: usize },
}

impl SolveError {
    pub fn is_invariant_failure(&self) -> bool {
        !matches!(
            self,
            SolveError::InvalidOverride(_) | SolveError::RoundBudgetExceeded { .. }
        )
    }
}
