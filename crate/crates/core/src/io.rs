//! JSON file formats for instances and solver results.
//!
//! Every rational travels as a string (`"5"`, `"7/2"`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::instance::{Allocation, GoodId, Instance, InstanceError, Metric, RawInstance};
use crate::market::{MarketError, MarketState};
use crate::rational::Rational;
use crate::verify::{Criterion, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("result does not match the instance: {0}")]
    Mismatch(String),
    #[error("invalid prices: {0}")]
    Prices(#[from] MarketError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Wefx,
    Weqx,
}

impl Mode {
    pub fn metric(self) -> Metric {
        match self {
            Mode::Wefx => Metric::Spending,
            Mode::Weqx => Metric::Value,
        }
    }

    /// The fairness criterion this mode guarantees.
    pub fn criterion(self) -> Criterion {
        match self {
            Mode::Wefx => Criterion::Wefx,
            Mode::Weqx => Criterion::Weqx,
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wefx" => Ok(Mode::Wefx),
            "weqx" => Ok(Mode::Weqx),
            _ => Err(format!("unknown mode {s:?} (expected wefx or weqx)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Wefx => "wefx",
            Mode::Weqx => "weqx",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub id: String,
    #[serde(with = "crate::rational::serde_str")]
    pub weight: Rational,
    #[serde(with = "crate::rational::serde_vec")]
    pub values: Vec<Rational>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(
        default,
        with = "crate::rational::serde_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub k: Option<Rational>,
}

/// `{"agents": [{"id", "weight", "values"}], "goods": [...], "meta": {"k"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub agents: Vec<AgentEntry>,
    pub goods: Vec<String>,
    #[serde(default)]
    pub meta: Meta,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let raw = inst.to_raw();
        InstanceFile {
            agents: raw
                .agent_labels
                .into_iter()
                .zip(raw.weights)
                .zip(raw.values)
                .map(|((id, weight), values)| AgentEntry { id, weight, values })
                .collect(),
            goods: raw.good_labels,
            meta: Meta { k: raw.k },
        }
    }

    pub fn to_instance(&self) -> Result<Instance, IoError> {
        check_unique("agent", self.agents.iter().map(|a| a.id.as_str()))?;
        check_unique("good", self.goods.iter().map(String::as_str))?;
        Ok(Instance::validate(RawInstance {
            agent_labels: self.agents.iter().map(|a| a.id.clone()).collect(),
            good_labels: self.goods.clone(),
            values: self.agents.iter().map(|a| a.values.clone()).collect(),
            weights: self.agents.iter().map(|a| a.weight.clone()).collect(),
            k: self.meta.k.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

fn check_unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<(), IoError> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(IoError::Mismatch(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    InstanceFile::from_json(&read_text(path)?)?.to_instance()
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleEntry {
    pub agent: String,
    pub goods: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCounts {
    pub init_transfer_rounds: usize,
    pub price_rises: usize,
    pub realloc_transfer_rounds: usize,
    /// `min(ceil(k) n m, n m^2)`.
    pub init_bound: u64,
    /// `n m`.
    pub realloc_bound: u64,
}

/// Deterministic choices the solver made, echoed for reproduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Owner ids of the welfare-maximizing start, one per good.
    pub initial_owner: Vec<String>,
    pub tie_break: String,
    pub check_invariants: bool,
}

/// Solver output. Prices are in canonical units, where the low value is 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub mode: Mode,
    pub allocation: Vec<BundleEntry>,
    #[serde(default, with = "crate::rational::serde_vec")]
    pub prices: Vec<Rational>,
    #[serde(default, skip_deserializing)]
    pub certificates: Vec<VerifyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<serde_json::Value>,
    #[serde(default)]
    pub rounds: RoundCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SolverConfig>,
}

pub fn bundles_by_label(inst: &Instance, alloc: &Allocation) -> Vec<BundleEntry> {
    alloc
        .bundles()
        .into_iter()
        .enumerate()
        .map(|(i, b)| BundleEntry {
            agent: inst.agent_labels()[i].clone(),
            goods: b.iter().map(|&e| inst.good_labels()[e].clone()).collect(),
        })
        .collect()
}

impl ResultFile {
    pub fn from_json(s: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// The allocation, checked against the instance: every agent listed once and
    /// every good given to exactly one agent.
    pub fn allocation_for(&self, inst: &Instance) -> Result<Allocation, IoError> {
        let mut owner: Vec<Option<usize>> = vec![None; inst.m()];
        let mut seen = vec![false; inst.n()];
        for entry in &self.allocation {
            let i = inst
                .agent_labels()
                .iter()
                .position(|a| *a == entry.agent)
                .ok_or_else(|| IoError::Mismatch(format!("unknown agent {:?}", entry.agent)))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(IoError::Mismatch(format!("agent {:?} listed twice", entry.agent)));
            }
            for g in &entry.goods {
                let e: GoodId = inst
                    .good_labels()
                    .iter()
                    .position(|x| x == g)
                    .ok_or_else(|| IoError::Mismatch(format!("unknown good {g:?}")))?;
                if owner[e].replace(i).is_some() {
                    return Err(IoError::Mismatch(format!("good {g:?} allocated twice")));
                }
            }
        }
        let owner: Vec<usize> = owner
            .into_iter()
            .enumerate()
            .map(|(e, o)| {
                o.ok_or_else(|| IoError::Mismatch(format!("good {:?} is unallocated", inst.good_labels()[e])))
            })
            .collect::<Result<_, _>>()?;
        Ok(Allocation::new(inst.n(), owner).expect("owners in range"))
    }

    /// The market state, if the file carries prices.
    pub fn state_for(&self, inst: std::sync::Arc<Instance>) -> Result<Option<MarketState>, IoError> {
        let alloc = self.allocation_for(&inst)?;
        if self.prices.is_empty() && inst.m() > 0 {
            return Ok(None);
        }
        Ok(Some(MarketState::new(inst, &alloc, self.prices.clone())?))
    }
}
