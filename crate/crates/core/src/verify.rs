//! Definition-level checkers for the fairness and efficiency notions.
//!
//! Every failing report carries a witness that re-evaluates to a violated inequality
//! (see [`VerifyReport::revalidate`]). "For every removed good" conditions are
//! evaluated at the single good whose removal leaves the most behind: the cheapest
//! good for price conditions, the least valued good otherwise.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::instance::{self, AgentId, Allocation, GoodId, Instance};
use crate::market::{MarketState, NotMbbWitness};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Wefx,
    Weqx,
    Pwefx,
    Efx,
    Eqx,
    Ef1,
    Equilibrium,
    FpoCert,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::Wefx,
        Criterion::Weqx,
        Criterion::Pwefx,
        Criterion::Efx,
        Criterion::Eqx,
        Criterion::Ef1,
        Criterion::Equilibrium,
        Criterion::FpoCert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Wefx => "wefx",
            Criterion::Weqx => "weqx",
            Criterion::Pwefx => "pwefx",
            Criterion::Efx => "efx",
            Criterion::Eqx => "eqx",
            Criterion::Ef1 => "ef1",
            Criterion::Equilibrium => "equilibrium",
            Criterion::FpoCert => "fpo-cert",
        }
    }

    /// Whether evaluating the criterion needs a price vector.
    pub fn needs_prices(self) -> bool {
        matches!(self, Criterion::Pwefx | Criterion::Equilibrium | Criterion::FpoCert)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| format!("unknown criterion {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// `lhs < rhs` for agent `i` looking at agent `j` with `good` removed from `X_j`.
    Pairwise {
        i: AgentId,
        j: AgentId,
        good: GoodId,
        #[serde(with = "crate::rational::serde_str")]
        lhs: Rational,
        #[serde(with = "crate::rational::serde_str")]
        rhs: Rational,
    },
    NotMbb(NotMbbWitness),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail { witness: Witness },
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub criterion: Criterion,
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerifyReport {
    fn new(criterion: Criterion, verdict: Verdict) -> Self {
        VerifyReport {
            criterion,
            verdict,
            note: None,
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Pass)
    }

    pub fn failed(&self) -> bool {
        matches!(self.verdict, Verdict::Fail { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.verdict {
            Verdict::Fail { witness } => Some(witness),
            _ => None,
        }
    }

    /// Re-evaluates the witness of a failing report from the definition. Returns true
    /// for non-failing reports.
    pub fn revalidate(&self, inst: &Instance, alloc: &Allocation, prices: Option<&[Rational]>) -> bool {
        let Some(witness) = self.witness() else {
            return true;
        };
        let bundles = alloc.bundles();
        match witness {
            Witness::Pairwise { i, j, good, lhs, rhs } => {
                let (i, j, e) = (*i, *j, *good);
                if alloc.owner(e) != j {
                    return false;
                }
                let rest: Vec<GoodId> = bundles[j].iter().copied().filter(|&g| g != e).collect();
                let (l, r) = match self.criterion {
                    Criterion::Wefx => (
                        instance::weighted_utility(inst, i, &bundles[i]),
                        instance::utility(inst, i, &rest) / inst.weight(j),
                    ),
                    Criterion::Weqx => (
                        instance::weighted_utility(inst, i, &bundles[i]),
                        instance::weighted_utility(inst, j, &rest),
                    ),
                    Criterion::Efx | Criterion::Ef1 => (
                        instance::utility(inst, i, &bundles[i]),
                        instance::utility(inst, i, &rest),
                    ),
                    Criterion::Eqx => (
                        instance::utility(inst, i, &bundles[i]),
                        instance::utility(inst, j, &rest),
                    ),
                    Criterion::Pwefx => {
                        let Some(p) = prices else { return false };
                        (
                            instance::weighted_spending(inst, i, &bundles[i], p),
                            instance::price_sum(p, &rest) / inst.weight(j),
                        )
                    }
                    Criterion::Equilibrium | Criterion::FpoCert => return false,
                };
                l == *lhs && r == *rhs && l < r
            }
            Witness::NotMbb(w) => {
                let Some(p) = prices else { return false };
                if alloc.owner(w.good) != w.agent
                    || !matches!(self.criterion, Criterion::Equilibrium | Criterion::FpoCert)
                {
                    return false;
                }
                let alpha = inst
                    .goods()
                    .map(|e| inst.value(w.agent, e) / &p[e])
                    .max()
                    .expect("a held good exists");
                let ratio = inst.value(w.agent, w.good) / &p[w.good];
                alpha == w.alpha && ratio == w.ratio && ratio < alpha
            }
        }
    }
}

/// Pairwise "for every removed good" scan over `agents x agents`.
///
/// `lhs(i)` is agent `i`'s own side; `removal(i, j)` returns the good of `X_j` whose
/// removal maximizes the right-hand side together with that side, or `None` when
/// there is nothing to compare (empty bundle).
fn scan_pairs(
    criterion: Criterion,
    agents: &[AgentId],
    lhs: impl Fn(AgentId) -> Rational,
    removal: impl Fn(AgentId, AgentId) -> Option<(GoodId, Rational)>,
) -> VerifyReport {
    for &i in agents {
        let own = lhs(i);
        for &j in agents {
            if i == j {
                continue;
            }
            if let Some((good, rhs)) = removal(i, j) {
                if own < rhs {
                    return VerifyReport::new(
                        criterion,
                        Verdict::Fail {
                            witness: Witness::Pairwise {
                                i,
                                j,
                                good,
                                lhs: own,
                                rhs,
                            },
                        },
                    );
                }
            }
        }
    }
    VerifyReport::new(criterion, Verdict::Pass)
}

/// Good of `bundle` minimizing `key`, lowest index on ties.
fn argmin_good<K: Ord>(bundle: &[GoodId], key: impl Fn(GoodId) -> K) -> Option<GoodId> {
    bundle.iter().copied().min_by_key(|&e| (key(e), e))
}

/// Good of `bundle` maximizing `key`, lowest index on ties.
fn argmax_good<K: Ord>(bundle: &[GoodId], key: impl Fn(GoodId) -> K) -> Option<GoodId> {
    bundle.iter().copied().min_by_key(|&e| (std::cmp::Reverse(key(e)), e))
}

fn without(bundle: &[GoodId], e: GoodId) -> Vec<GoodId> {
    bundle.iter().copied().filter(|&g| g != e).collect()
}

fn all_agents(inst: &Instance) -> Vec<AgentId> {
    inst.agents().collect()
}

pub fn check_wefx(inst: &Instance, alloc: &Allocation) -> VerifyReport {
    let b = alloc.bundles();
    scan_pairs(
        Criterion::Wefx,
        &all_agents(inst),
        |i| instance::weighted_utility(inst, i, &b[i]),
        |i, j| {
            let e = argmin_good(&b[j], |e| inst.is_high(i, e))?;
            Some((e, instance::utility(inst, i, &without(&b[j], e)) / inst.weight(j)))
        },
    )
}

/// Whether `i` is WEFX toward `j`.
pub fn wefx_toward(inst: &Instance, bundles: &[Vec<GoodId>], i: AgentId, j: AgentId) -> bool {
    let Some(e) = argmin_good(&bundles[j], |e| inst.is_high(i, e)) else {
        return true;
    };
    instance::weighted_utility(inst, i, &bundles[i])
        >= instance::utility(inst, i, &without(&bundles[j], e)) / inst.weight(j)
}

/// Whether `i` is pWEFX toward `j`.
pub fn pwefx_toward(inst: &Instance, bundles: &[Vec<GoodId>], prices: &[Rational], i: AgentId, j: AgentId) -> bool {
    let Some(e) = argmin_good(&bundles[j], |e| &prices[e]) else {
        return true;
    };
    instance::weighted_spending(inst, i, &bundles[i], prices)
        >= instance::price_sum(prices, &without(&bundles[j], e)) / inst.weight(j)
}

/// WEQX restricted to pairs inside `agents`.
pub fn check_weqx_within(inst: &Instance, alloc: &Allocation, agents: &[AgentId]) -> VerifyReport {
    let b = alloc.bundles();
    scan_pairs(
        Criterion::Weqx,
        agents,
        |i| instance::weighted_utility(inst, i, &b[i]),
        |_, j| {
            let e = argmin_good(&b[j], |e| inst.is_high(j, e))?;
            Some((e, instance::weighted_utility(inst, j, &without(&b[j], e))))
        },
    )
}

pub fn check_weqx(inst: &Instance, alloc: &Allocation) -> VerifyReport {
    check_weqx_within(inst, alloc, &all_agents(inst))
}

/// pWEFX restricted to pairs inside `agents`.
pub fn check_pwefx_within(
    inst: &Instance,
    alloc: &Allocation,
    prices: &[Rational],
    agents: &[AgentId],
) -> VerifyReport {
    let b = alloc.bundles();
    scan_pairs(
        Criterion::Pwefx,
        agents,
        |i| instance::weighted_spending(inst, i, &b[i], prices),
        |_, j| {
            let e = argmin_good(&b[j], |e| &prices[e])?;
            Some((e, instance::price_sum(prices, &without(&b[j], e)) / inst.weight(j)))
        },
    )
}

pub fn check_pwefx(inst: &Instance, alloc: &Allocation, prices: &[Rational]) -> VerifyReport {
    check_pwefx_within(inst, alloc, prices, &all_agents(inst))
}

fn unequal_weights(criterion: Criterion) -> VerifyReport {
    VerifyReport::new(
        criterion,
        Verdict::NotApplicable {
            reason: "weights are not all equal".into(),
        },
    )
}

/// Unweighted EFX; applicable only when all weights are equal.
pub fn check_efx(inst: &Instance, alloc: &Allocation) -> VerifyReport {
    if !inst.has_equal_weights() {
        return unequal_weights(Criterion::Efx);
    }
    let b = alloc.bundles();
    scan_pairs(
        Criterion::Efx,
        &all_agents(inst),
        |i| instance::utility(inst, i, &b[i]),
        |i, j| {
            let e = argmin_good(&b[j], |e| inst.is_high(i, e))?;
            Some((e, instance::utility(inst, i, &without(&b[j], e))))
        },
    )
}

/// Unweighted EQX; applicable only when all weights are equal.
pub fn check_eqx(inst: &Instance, alloc: &Allocation) -> VerifyReport {
    if !inst.has_equal_weights() {
        return unequal_weights(Criterion::Eqx);
    }
    let b = alloc.bundles();
    scan_pairs(
        Criterion::Eqx,
        &all_agents(inst),
        |i| instance::utility(inst, i, &b[i]),
        |_, j| {
            let e = argmin_good(&b[j], |e| inst.is_high(j, e))?;
            Some((e, instance::utility(inst, j, &without(&b[j], e))))
        },
    )
}

/// Unweighted EF1 (some single removal suffices); applicable only with equal weights.
pub fn check_ef1(inst: &Instance, alloc: &Allocation) -> VerifyReport {
    if !inst.has_equal_weights() {
        return unequal_weights(Criterion::Ef1);
    }
    let b = alloc.bundles();
    scan_pairs(
        Criterion::Ef1,
        &all_agents(inst),
        |i| instance::utility(inst, i, &b[i]),
        |i, j| {
            let e = argmax_good(&b[j], |e| inst.is_high(i, e))?;
            Some((e, instance::utility(inst, i, &without(&b[j], e))))
        },
    )
}

/// EFX, EQX and EF1 at once (the unweighted reductions).
pub fn check_ef_reductions(inst: &Instance, alloc: &Allocation) -> Vec<VerifyReport> {
    vec![check_efx(inst, alloc), check_eqx(inst, alloc), check_ef1(inst, alloc)]
}

pub fn check_equilibrium(state: &MarketState) -> VerifyReport {
    let verdict = match state.is_equilibrium() {
        Ok(()) => Verdict::Pass,
        Err(w) => Verdict::Fail {
            witness: Witness::NotMbb(w),
        },
    };
    VerifyReport::new(Criterion::Equilibrium, verdict)
}

/// One-sided fPO certificate: an equilibrium allocation is fPO. A failure says
/// nothing about fPO itself; use the LP oracle for a complete answer.
pub fn certify_fpo(state: &MarketState) -> VerifyReport {
    let mut report = check_equilibrium(state);
    report.criterion = Criterion::FpoCert;
    report.note = Some(if report.passed() {
        "certificate: (X, p) is a market equilibrium, hence X is fPO".into()
    } else {
        "no certificate: (X, p) is not an equilibrium; fPO status unknown".into()
    });
    report
}

/// Evaluates one criterion. Price-based criteria need `state`; without it they are
/// reported as not applicable.
pub fn evaluate(
    criterion: Criterion,
    inst: &Instance,
    alloc: &Allocation,
    state: Option<&MarketState>,
) -> VerifyReport {
    let no_prices = || {
        VerifyReport::new(
            criterion,
            Verdict::NotApplicable {
                reason: "no price vector supplied".into(),
            },
        )
    };
    match criterion {
        Criterion::Wefx => check_wefx(inst, alloc),
        Criterion::Weqx => check_weqx(inst, alloc),
        Criterion::Efx => check_efx(inst, alloc),
        Criterion::Eqx => check_eqx(inst, alloc),
        Criterion::Ef1 => check_ef1(inst, alloc),
        Criterion::Pwefx => state.map_or_else(no_prices, |s| check_pwefx(inst, alloc, s.prices())),
        Criterion::Equilibrium => state.map_or_else(no_prices, check_equilibrium),
        Criterion::FpoCert => state.map_or_else(no_prices, certify_fpo),
    }
}
