//! Initial equilibrium and agent groups.
//!
//! Starts from a welfare-maximizing allocation priced at the owners' values, moves
//! goods backwards along MBB paths while some agent on a path could lose a good and
//! still exceed the path's start, then splits the agents into groups by reachability
//! in the MBB graph.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Phase, SolveError};
use crate::instance::{AgentId, Allocation, GoodId, Instance, Metric};
use crate::market::{self, MarketState};
use crate::rational::{self, Rational};
use crate::verify;

/// Ordered partition of the agents into groups `N_1, ..., N_R`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentGroups {
    members: Vec<Vec<AgentId>>,
    least: Vec<AgentId>,
    group_of: Vec<usize>,
}

impl AgentGroups {
    /// `groups` lists members (sorted) and the agent each group was grown from.
    pub fn new(n: usize, groups: Vec<(AgentId, Vec<AgentId>)>) -> Self {
        let mut group_of = vec![usize::MAX; n];
        let mut least = Vec::with_capacity(groups.len());
        let mut members = Vec::with_capacity(groups.len());
        for (r, (l, mut g)) in groups.into_iter().enumerate() {
            g.sort_unstable();
            for &i in &g {
                assert_eq!(group_of[i], usize::MAX, "agent {i} in two groups");
                group_of[i] = r;
            }
            least.push(l);
            members.push(g);
        }
        assert!(
            group_of.iter().all(|&r| r != usize::MAX),
            "groups must cover all agents"
        );
        AgentGroups {
            members,
            least,
            group_of,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self, r: usize) -> &[AgentId] {
        &self.members[r]
    }

    pub fn all(&self) -> &[Vec<AgentId>] {
        &self.members
    }

    /// The agent group `r` was grown from.
    pub fn seed(&self, r: usize) -> AgentId {
        self.least[r]
    }

    pub fn group_of(&self, i: AgentId) -> usize {
        self.group_of[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Move {
    pub good: GoodId,
    pub from: AgentId,
    pub to: AgentId,
}

/// One round of the transfer loop: the MBB path used and the goods moved along it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathRound {
    pub path: Vec<AgentId>,
    pub moves: Vec<Move>,
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub state: MarketState,
    pub groups: AgentGroups,
    pub transfer_rounds: usize,
    pub log: Vec<PathRound>,
}

/// Options shared by the solvers.
#[derive(Debug, Clone, Default)]
pub struct InitOptions {
    /// Explicit owner of every good for the welfare-maximizing start; must give each
    /// good to an agent valuing it highest.
    pub initial_owner: Option<Vec<AgentId>>,
    /// Run the per-round and final assertions.
    pub check_invariants: bool,
}

/// `min(ceil(k) * n * m, n * m^2)`.
pub fn transfer_round_bound(inst: &Instance) -> u64 {
    let (n, m) = (inst.n() as u64, inst.m() as u64);
    (rational::ceil_u64(inst.k()).saturating_mul(n).saturating_mul(m)).min(n * m * m)
}

/// Default owner: lowest-index agent valuing the good high, agent 0 for goods nobody
/// values high.
pub fn default_owner(inst: &Instance) -> Vec<AgentId> {
    inst.goods()
        .map(|e| inst.agents().find(|&i| inst.is_high(i, e)).unwrap_or(0))
        .collect()
}

/// Welfare-maximizing allocation with `p(e)` equal to the owner's value.
pub fn welfare_max_init(inst: Arc<Instance>, owner: Option<&[AgentId]>) -> Result<MarketState, SolveError> {
    let owner = match owner {
        None => default_owner(&inst),
        Some(o) => {
            if o.len() != inst.m() {
                return Err(SolveError::InvalidOverride(format!(
                    "expected {} owners, got {}",
                    inst.m(),
                    o.len()
                )));
            }
            for (e, &i) in o.iter().enumerate() {
                if i >= inst.n() {
                    return Err(SolveError::InvalidOverride(format!("good {e}: no agent {i}")));
                }
                if !inst.is_high(i, e) && inst.agents().any(|j| inst.is_high(j, e)) {
                    return Err(SolveError::InvalidOverride(format!(
                        "good {e} goes to agent {i} who values it low while another agent values it high"
                    )));
                }
            }
            o.to_vec()
        }
    };
    let prices: Vec<Rational> = owner
        .iter()
        .enumerate()
        .map(|(e, &i)| inst.value(i, e).clone())
        .collect();
    let alloc = Allocation::new(inst.n(), owner).expect("owners validated");
    Ok(MarketState::new(inst, &alloc, prices).expect("prices are positive"))
}

/// The MBB path and the last-hop agent for the next transfer round, if any.
///
/// Starts are tried by increasing metric (then index); for each start the first agent
/// in BFS order whose metric after losing one good still exceeds the start's wins.
pub fn find_transfer_path(state: &MarketState, metric: Metric) -> Option<Vec<AgentId>> {
    let inst = state.instance();
    let measures: Vec<Rational> = inst.agents().map(|i| state.measure(metric, i)).collect();
    let hats: Vec<Rational> = inst.agents().map(|i| state.hat(metric, i)).collect();
    let graph = state.mbb_graph();
    let mut starts: Vec<AgentId> = inst.agents().collect();
    starts.sort_by(|&a, &b| measures[a].cmp(&measures[b]).then(a.cmp(&b)));
    for start in starts {
        let (order, parent) = graph.bfs(start);
        if let Some(&end) = order[1..].iter().find(|&&j| hats[j] > measures[start]) {
            return Some(market::path_to(&parent, start, end));
        }
    }
    None
}

/// Cheapest good of `MBB_to ∩ X_from`, lowest index on ties.
fn cheapest_mbb_good(state: &MarketState, to: AgentId, from: AgentId) -> Option<GoodId> {
    state
        .bundle(from)
        .iter()
        .copied()
        .filter(|&e| state.is_mbb(to, e))
        .min_by(|&a, &b| state.price(a).cmp(state.price(b)).then(a.cmp(&b)))
}

/// Moves one good along each hop of `path`, from the end towards the start.
pub fn transfer_along(state: &mut MarketState, path: &[AgentId]) -> Vec<Move> {
    let mut moves = Vec::with_capacity(path.len().saturating_sub(1));
    for r in (1..path.len()).rev() {
        let (to, from) = (path[r - 1], path[r]);
        let good = cheapest_mbb_good(state, to, from).expect("path follows MBB edges");
        state.transfer(good, to);
        moves.push(Move { good, from, to });
    }
    moves
}

fn violation(round: usize, detail: String) -> SolveError {
    SolveError::InvariantViolation {
        phase: Phase::Init,
        round,
        detail,
    }
}

/// Runs transfer rounds until no MBB path qualifies. Returns the number of rounds.
pub fn transfer_phase(
    state: &mut MarketState,
    metric: Metric,
    check: bool,
    log: &mut Vec<PathRound>,
) -> Result<usize, SolveError> {
    let bound = transfer_round_bound(state.instance());
    let mut rounds = 0usize;
    let mut last_start: Option<Rational> = None;
    while let Some(path) = find_transfer_path(state, metric) {
        if rounds as u64 >= bound {
            return Err(SolveError::RoundBudgetExceeded {
                phase: Phase::Init,
                bound,
            });
        }
        rounds += 1;
        let before: Vec<Rational> = path.iter().map(|&i| state.measure(metric, i)).collect();
        if check {
            if let Some(prev) = &last_start {
                if before[0] < *prev {
                    return Err(violation(
                        rounds,
                        format!("start metric dropped from {prev} to {}", before[0]),
                    ));
                }
            }
        }
        let moves = transfer_along(state, &path);
        if check {
            for (idx, &i) in path.iter().enumerate().take(path.len() - 1) {
                let after = state.measure(metric, i);
                if after < before[idx] {
                    return Err(violation(rounds, format!("path agent {i} lost metric")));
                }
            }
            let end = *path.last().expect("non-empty path");
            if state.measure(metric, end) <= before[0] {
                return Err(violation(rounds, format!("end agent {end} fell to the start's level")));
            }
            if let Err(w) = state.is_equilibrium() {
                return Err(violation(rounds, format!("not an equilibrium: {w:?}")));
            }
            last_start = Some(before[0].clone());
        }
        log.push(PathRound { path, moves });
    }
    Ok(rounds)
}

/// Repeatedly takes the remaining agent of least metric and groups it with the
/// remaining agents it reaches in the MBB graph.
pub fn build_groups(state: &MarketState, metric: Metric) -> AgentGroups {
    let inst = state.instance();
    let measures: Vec<Rational> = inst.agents().map(|i| state.measure(metric, i)).collect();
    let graph = state.mbb_graph();
    let mut remaining = vec![true; inst.n()];
    let mut groups = Vec::new();
    while let Some(least) = inst
        .agents()
        .filter(|&i| remaining[i])
        .min_by(|&a, &b| measures[a].cmp(&measures[b]).then(a.cmp(&b)))
    {
        let group: Vec<AgentId> = graph
            .reachable_from(least)
            .into_iter()
            .filter(|&i| remaining[i])
            .collect();
        for &i in &group {
            remaining[i] = false;
        }
        groups.push((least, group));
    }
    AgentGroups::new(inst.n(), groups)
}

/// Initial MBB ratio of agent `i`: 1, except `1/k` for an agent valuing every good
/// low when every good is valued high by someone.
pub fn expected_initial_alpha(inst: &Instance, i: AgentId) -> Rational {
    let no_low_goods = inst.goods().all(|e| inst.agents().any(|j| inst.is_high(j, e)));
    let all_low = inst.goods().all(|e| !inst.is_high(i, e));
    if inst.m() > 0 && no_low_goods && all_low {
        rational::one() / inst.k()
    } else {
        rational::one()
    }
}

/// Structural guarantees of the initial equilibrium. Returns a description of the
/// first one that fails.
pub fn check_initial_properties(state: &MarketState, groups: &AgentGroups, metric: Metric) -> Result<(), String> {
    let inst = state.instance();
    if let Err(w) = state.is_equilibrium() {
        return Err(format!("not an equilibrium: {w:?}"));
    }
    if inst.m() > 0 {
        for i in inst.agents() {
            let want = expected_initial_alpha(inst, i);
            if state.alpha(i) != &want {
                return Err(format!("agent {i}: MBB ratio {} instead of {want}", state.alpha(i)));
            }
        }
    }
    for i in inst.agents() {
        for j in inst.agents() {
            if groups.group_of(i) >= groups.group_of(j) {
                continue;
            }
            if let Some(&e) = state.bundle(j).iter().find(|&&e| inst.is_high(i, e)) {
                return Err(format!("agent {i} values good {e} of higher-group agent {j} high"));
            }
        }
    }
    let (low_goods, _) = market::classify_items(inst);
    if let Some(&e) = low_goods.iter().find(|&&e| groups.group_of(state.owner(e)) != 0) {
        return Err(format!("good {e} valued low by all is outside the first group"));
    }
    let alloc = state.allocation();
    for (r, members) in groups.all().iter().enumerate() {
        let report = match metric {
            Metric::Spending => verify::check_pwefx_within(inst, &alloc, state.prices(), members),
            Metric::Value => verify::check_weqx_within(inst, &alloc, members),
        };
        if !report.passed() {
            return Err(format!("group {r} fails {}: {:?}", report.criterion, report.verdict));
        }
    }
    Ok(())
}

/// Welfare-maximizing start, transfer loop and group construction.
pub fn initial_equilibrium(inst: Arc<Instance>, metric: Metric, opts: &InitOptions) -> Result<InitResult, SolveError> {
    let mut state = welfare_max_init(inst, opts.initial_owner.as_deref())?;
    let mut log = Vec::new();
    let transfer_rounds = transfer_phase(&mut state, metric, opts.check_invariants, &mut log)?;
    let groups = build_groups(&state, metric);
    if opts.check_invariants {
        check_initial_properties(&state, &groups, metric).map_err(|d| violation(transfer_rounds, d))?;
    }
    Ok(InitResult {
        state,
        groups,
        transfer_rounds,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn cycling() -> Arc<Instance> {
        Arc::new(
            Instance::from_pattern_equal(
                vec![
                    vec![true, true, true, false, false],
                    vec![false, false, false, false, true],
                ],
                int(5),
            )
            .unwrap(),
        )
    }

    const CYCLING_OWNER: [AgentId; 5] = [0, 0, 0, 1, 1];

    fn checked() -> InitOptions {
        InitOptions {
            initial_owner: None,
            check_invariants: true,
        }
    }

    #[test]
    fn cycling_owner_start_prices() {
        let s = welfare_max_init(cycling(), Some(&CYCLING_OWNER)).unwrap();
        let want: Vec<Rational> = [5, 5, 5, 1, 5].iter().map(|&v| int(v)).collect();
        assert_eq!(s.prices(), &want[..]);
        assert_eq!(s.alphas(), &[int(1), int(1)]);
    }

    #[test]
    fn default_owner_sends_unliked_goods_to_first_agent() {
        assert_eq!(default_owner(&cycling()), vec![0, 0, 0, 0, 1]);
    }

    #[test]
    fn contested_good_goes_to_lowest_index() {
        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![true], vec![true]], int(3)).unwrap());
        let s = welfare_max_init(inst, None).unwrap();
        assert_eq!(s.owner(0), 0);
        let swapped = Arc::new(Instance::from_pattern_equal(vec![vec![true], vec![true]], int(3)).unwrap());
        let s2 = welfare_max_init(swapped, Some(&[1])).unwrap();
        assert_eq!(s2.owner(0), 1);
    }

    #[test]
    fn override_must_be_welfare_maximizing() {
        let err = welfare_max_init(cycling(), Some(&[1, 0, 0, 1, 1])).unwrap_err();
        assert!(matches!(err, SolveError::InvalidOverride(_)));
        assert!(welfare_max_init(cycling(), Some(&[0, 0])).is_err());
        assert!(welfare_max_init(cycling(), Some(&[0, 0, 0, 2, 1])).is_err());
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![true, false, true]], int(2)).unwrap());
        let r = initial_equilibrium(inst, Metric::Spending, &checked()).unwrap();
        assert_eq!(r.transfer_rounds, 0);
        assert_eq!(r.state.bundle(0), &[0, 1, 2]);
        assert_eq!(r.state.prices(), &[int(2), int(1), int(2)]);
        assert_eq!(r.groups.len(), 1);
    }

    #[test]
    fn cycling_instance_has_no_transfer_rounds_and_two_groups() {
        for metric in [Metric::Spending, Metric::Value] {
            let opts = InitOptions {
                initial_owner: Some(CYCLING_OWNER.to_vec()),
                check_invariants: true,
            };
            let r = initial_equilibrium(cycling(), metric, &opts).unwrap();
            assert_eq!(r.transfer_rounds, 0);
            assert_eq!(r.groups.all(), &[vec![1], vec![0]]);
            assert_eq!(r.groups.seed(0), 1);
        }
    }

    #[test]
    fn goods_flow_to_an_empty_agent() {
        // both agents value all three goods high; agent 1 starts with everything
        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![true; 3], vec![true; 3]], int(2)).unwrap());
        let r = initial_equilibrium(inst, Metric::Spending, &checked()).unwrap();
        assert_eq!(r.transfer_rounds, 1);
        assert_eq!(r.log[0].path, vec![1, 0]);
        assert_eq!(
            r.log[0].moves,
            vec![Move {
                good: 0,
                from: 0,
                to: 1
            }]
        );
        assert_eq!(r.state.bundle(0), &[1, 2]);
        assert_eq!(r.state.bundle(1), &[0]);
        assert!(find_transfer_path(&r.state, Metric::Spending).is_none());
        assert_eq!(r.groups.len(), 1);
    }

    #[test]
    fn isolated_agents_form_singletons_in_index_order() {
        let inst = Arc::new(
            Instance::from_pattern_equal(
                vec![
                    vec![true, false, false],
                    vec![false, true, false],
                    vec![false, false, true],
                ],
                int(3),
            )
            .unwrap(),
        );
        let r = initial_equilibrium(inst, Metric::Spending, &checked()).unwrap();
        assert_eq!(r.groups.all(), &[vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn agent_valuing_everything_low_has_small_ratio() {
        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![false, false], vec![true, true]], int(3)).unwrap());
        assert_eq!(expected_initial_alpha(&inst, 0), rational::ratio(1, 3));
        assert_eq!(expected_initial_alpha(&inst, 1), int(1));
        let r = initial_equilibrium(inst, Metric::Spending, &checked()).unwrap();
        assert_eq!(r.state.alpha(0), &rational::ratio(1, 3));
    }

    #[test]
    fn round_bound() {
        let inst = Instance::from_pattern_equal(vec![vec![true; 4]; 3], rational::ratio(7, 2)).unwrap();
        assert_eq!(transfer_round_bound(&inst), 4 * 3 * 4);
        let inst = Instance::from_pattern_equal(vec![vec![true; 2]; 3], int(9)).unwrap();
        assert_eq!(transfer_round_bound(&inst), 3 * 4);
    }
}
