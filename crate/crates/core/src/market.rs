//! Fisher-market view of an allocation: prices, bang-per-buck ratios, MBB sets and
//! the MBB graph over agents.

use std::collections::VecDeque;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::instance::{self, AgentId, Allocation, GoodId, Instance, Metric};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarketError {
    #[error("market has no goods; MBB ratios are undefined")]
    EmptyMarket,
    #[error("price of good {good} is {price}; prices must be positive")]
    NonPositivePrice { good: GoodId, price: Rational },
    #[error("expected {expected} prices/owners, got {got}")]
    Length { expected: usize, got: usize },
    #[error("allocation is for {got} agents, instance has {expected}")]
    AgentCount { expected: usize, got: usize },
}

/// `v_i(e) / p(e)`.
pub fn bang_per_buck(inst: &Instance, prices: &[Rational], i: AgentId, e: GoodId) -> Rational {
    inst.value(i, e) / &prices[e]
}

/// MBB ratio of every agent and the indicator matrix of MBB sets.
pub fn mbb_structure(inst: &Instance, prices: &[Rational]) -> Result<(Vec<Rational>, Vec<Vec<bool>>), MarketError> {
    if inst.m() == 0 {
        return Err(MarketError::EmptyMarket);
    }
    let mut alphas = Vec::with_capacity(inst.n());
    let mut sets = Vec::with_capacity(inst.n());
    for i in inst.agents() {
        let ratios: Vec<Rational> = inst.goods().map(|e| bang_per_buck(inst, prices, i, e)).collect();
        let alpha = ratios.iter().max().cloned().expect("m > 0");
        sets.push(ratios.iter().map(|r| *r == alpha).collect());
        alphas.push(alpha);
    }
    Ok((alphas, sets))
}

/// Consistently small goods (`M-`, valued low by everyone) and the rest (`M+`).
pub fn classify_items(inst: &Instance) -> (Vec<GoodId>, Vec<GoodId>) {
    inst.goods().partition(|&e| inst.agents().all(|i| !inst.is_high(i, e)))
}

/// Evidence that `good` is held by `agent` without being MBB for it.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct NotMbbWitness {
    pub agent: AgentId,
    pub good: GoodId,
    #[serde(with = "crate::rational::serde_str")]
    pub alpha: Rational,
    #[serde(with = "crate::rational::serde_str")]
    pub ratio: Rational,
}

/// Allocation plus prices with cached MBB structure.
///
/// Transfers never touch the MBB cache (it depends on prices only); price changes
/// refresh it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketState {
    inst: Arc<Instance>,
    owner: Vec<AgentId>,
    bundles: Vec<Vec<GoodId>>,
    prices: Vec<Rational>,
    alpha: Vec<Rational>,
    mbb: Vec<Vec<bool>>,
}

impl MarketState {
    pub fn new(inst: Arc<Instance>, allocation: &Allocation, prices: Vec<Rational>) -> Result<Self, MarketError> {
        if allocation.n() != inst.n() {
            return Err(MarketError::AgentCount {
                expected: inst.n(),
                got: allocation.n(),
            });
        }
        for len in [allocation.m(), prices.len()] {
            if len != inst.m() {
                return Err(MarketError::Length {
                    expected: inst.m(),
                    got: len,
                });
            }
        }
        if let Some((good, price)) = prices.iter().enumerate().find(|(_, p)| !p.is_positive()) {
            return Err(MarketError::NonPositivePrice {
                good,
                price: price.clone(),
            });
        }
        let mut state = MarketState {
            owner: allocation.owners().to_vec(),
            bundles: allocation.bundles(),
            prices,
            alpha: Vec::new(),
            mbb: Vec::new(),
            inst,
        };
        state.refresh_mbb();
        Ok(state)
    }

    fn refresh_mbb(&mut self) {
        match mbb_structure(&self.inst, &self.prices) {
            Ok((alpha, mbb)) => {
                self.alpha = alpha;
                self.mbb = mbb;
            }
            Err(MarketError::EmptyMarket) => {
                self.alpha = vec![Rational::zero(); self.inst.n()];
                self.mbb = vec![Vec::new(); self.inst.n()];
            }
            Err(e) => unreachable!("{e}"),
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn shared_instance(&self) -> &Arc<Instance> {
        &self.inst
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::new(self.inst.n(), self.owner.clone()).expect("owners are in range")
    }

    pub fn owners(&self) -> &[AgentId] {
        &self.owner
    }

    pub fn owner(&self, e: GoodId) -> AgentId {
        self.owner[e]
    }

    /// Goods of agent `i` in increasing index order.
    pub fn bundle(&self, i: AgentId) -> &[GoodId] {
        &self.bundles[i]
    }

    pub fn bundles(&self) -> &[Vec<GoodId>] {
        &self.bundles
    }

    pub fn prices(&self) -> &[Rational] {
        &self.prices
    }

    pub fn price(&self, e: GoodId) -> &Rational {
        &self.prices[e]
    }

    /// MBB ratio `alpha_i`. Zero when there are no goods.
    pub fn alpha(&self, i: AgentId) -> &Rational {
        &self.alpha[i]
    }

    pub fn alphas(&self) -> &[Rational] {
        &self.alpha
    }

    pub fn is_mbb(&self, i: AgentId, e: GoodId) -> bool {
        self.mbb[i][e]
    }

    pub fn mbb_set(&self, i: AgentId) -> Vec<GoodId> {
        self.inst.goods().filter(|&e| self.mbb[i][e]).collect()
    }

    pub fn bang_per_buck(&self, i: AgentId, e: GoodId) -> Rational {
        bang_per_buck(&self.inst, &self.prices, i, e)
    }

    pub fn spending(&self, i: AgentId) -> Rational {
        instance::price_sum(&self.prices, &self.bundles[i])
    }

    pub fn weighted_spending(&self, i: AgentId) -> Rational {
        instance::weighted_spending(&self.inst, i, &self.bundles[i], &self.prices)
    }

    pub fn hat_p(&self, i: AgentId) -> Rational {
        instance::hat_p(&self.inst, i, &self.bundles[i], &self.prices)
    }

    pub fn weighted_utility(&self, i: AgentId) -> Rational {
        instance::weighted_utility(&self.inst, i, &self.bundles[i])
    }

    pub fn hat_v(&self, i: AgentId) -> Rational {
        instance::hat_v(&self.inst, i, &self.bundles[i])
    }

    pub fn measure(&self, metric: Metric, i: AgentId) -> Rational {
        metric.measure(&self.inst, i, &self.bundles[i], &self.prices)
    }

    pub fn hat(&self, metric: Metric, i: AgentId) -> Rational {
        metric.hat(&self.inst, i, &self.bundles[i], &self.prices)
    }

    /// Moves good `e` to agent `to`. MBB sets are unaffected.
    pub fn transfer(&mut self, e: GoodId, to: AgentId) {
        let from = self.owner[e];
        if from == to {
            return;
        }
        let pos = self.bundles[from].binary_search(&e).expect("owner/bundle in sync");
        self.bundles[from].remove(pos);
        let pos = self.bundles[to].binary_search(&e).unwrap_err();
        self.bundles[to].insert(pos, e);
        self.owner[e] = to;
    }

    /// Multiplies the prices of `goods` by a positive `factor` and refreshes MBB data.
    pub fn scale_prices(&mut self, goods: &[GoodId], factor: &Rational) {
        assert!(factor.is_positive(), "price factor must be positive");
        for &e in goods {
            self.prices[e] = &self.prices[e] * factor;
        }
        self.refresh_mbb();
    }

    /// Multiplies every price by `factor`.
    pub fn scale_all_prices(&mut self, factor: &Rational) {
        let all: Vec<GoodId> = self.inst.goods().collect();
        self.scale_prices(&all, factor);
    }

    /// Edge `i -> j` iff `MBB_i` meets `X_j` (self-loops included).
    pub fn mbb_graph(&self) -> MbbGraph {
        let n = self.inst.n();
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adj.iter_mut().enumerate() {
            for (e, &j) in self.owner.iter().enumerate() {
                if self.mbb[i][e] {
                    row[j] = true;
                }
            }
        }
        MbbGraph { adj }
    }

    /// Every allocated good is MBB for its owner; otherwise the first offender.
    pub fn is_equilibrium(&self) -> Result<(), NotMbbWitness> {
        for (e, &i) in self.owner.iter().enumerate() {
            if !self.mbb[i][e] {
                return Err(NotMbbWitness {
                    agent: i,
                    good: e,
                    alpha: self.alpha[i].clone(),
                    ratio: self.bang_per_buck(i, e),
                });
            }
        }
        Ok(())
    }

    /// Whether the cached MBB data equals a from-scratch recomputation.
    pub fn caches_consistent(&self) -> bool {
        let mut fresh = self.clone();
        fresh.refresh_mbb();
        fresh.alpha == self.alpha && fresh.mbb == self.mbb && fresh.bundles == self.allocation().bundles()
    }

    /// If `p(e) = k * p(e')` and `e` is MBB for some agent, `e'` must be MBB for it too.
    /// Returns the first `(agent, e, e')` breaking that rule.
    pub fn price_ladder_violation(&self) -> Option<(AgentId, GoodId, GoodId)> {
        let k = self.inst.k();
        for e in self.inst.goods() {
            for e2 in self.inst.goods() {
                if self.prices[e] != &self.prices[e2] * k {
                    continue;
                }
                for i in self.inst.agents() {
                    if self.mbb[i][e] && !self.mbb[i][e2] {
                        return Some((i, e, e2));
                    }
                }
            }
        }
        None
    }
}

/// Directed graph on agents induced by MBB sets and bundles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MbbGraph {
    adj: Vec<Vec<bool>>,
}

impl MbbGraph {
    pub fn from_adjacency(adj: Vec<Vec<bool>>) -> Self {
        MbbGraph { adj }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, i: AgentId, j: AgentId) -> bool {
        self.adj[i][j]
    }

    /// Out-neighbours in ascending index order.
    pub fn successors(&self, i: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.adj[i].iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    /// Breadth-first search from `root`, expanding neighbours in ascending index order.
    /// Returns the visit order (starting with `root`) and BFS parents.
    pub fn bfs(&self, root: AgentId) -> (Vec<AgentId>, Vec<Option<AgentId>>) {
        let n = self.n();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![root];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for v in self.successors(u) {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    order.push(v);
                    queue.push_back(v);
                }
            }
        }
        (order, parent)
    }

    /// Agents reachable from `root`, including `root`, sorted by index.
    pub fn reachable_from(&self, root: AgentId) -> Vec<AgentId> {
        let mut out = self.bfs(root).0;
        out.sort_unstable();
        out
    }
}

/// Path `root -> ... -> target` following BFS parents.
pub fn path_to(parent: &[Option<AgentId>], root: AgentId, target: AgentId) -> Vec<AgentId> {
    let mut path = vec![target];
    let mut cur = target;
    while cur != root {
        cur = parent[cur].expect("target reached by BFS");
        path.push(cur);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn cycling() -> Arc<Instance> {
        let k = int(5);
        Arc::new(
            Instance::from_pattern_equal(
                vec![
                    vec![true, true, true, false, false],
                    vec![false, false, false, false, true],
                ],
                k,
            )
            .unwrap(),
        )
    }

    fn cycling_initial() -> MarketState {
        let p = [5, 5, 5, 1, 5].iter().map(|&v| int(v)).collect();
        MarketState::new(cycling(), &Allocation::new(2, vec![0, 0, 0, 1, 1]).unwrap(), p).unwrap()
    }

    #[test]
    fn bang_per_buck_examples() {
        let s = cycling_initial();
        assert_eq!(s.bang_per_buck(1, 0), ratio(1, 5));
        assert_eq!(s.bang_per_buck(0, 0), int(1));
        let mut raised = s.clone();
        raised.scale_prices(&[3, 4], &int(5));
        assert_eq!(raised.price(4), &int(25));
        assert_eq!(raised.bang_per_buck(0, 4), ratio(1, 25));
    }

    #[test]
    fn mbb_structure_on_cycling() {
        let s = cycling_initial();
        assert_eq!(s.alphas(), &[int(1), int(1)]);
        assert_eq!(s.mbb_set(0), vec![0, 1, 2, 3]);
        assert_eq!(s.mbb_set(1), vec![3, 4]);
        // no MBB good of agent 2 is held by agent 1
        assert!(!s.mbb_graph().has_edge(1, 0));

        let mut raised = s.clone();
        raised.scale_prices(&[3, 4], &int(5));
        assert_eq!(raised.alpha(0), &int(1));
        assert_eq!(raised.mbb_set(0), vec![0, 1, 2]);
        assert!(raised.caches_consistent());
    }

    #[test]
    fn mbb_structure_rejects_empty_market() {
        let inst = Instance::from_pattern_equal(vec![vec![]], int(2)).unwrap();
        assert_eq!(mbb_structure(&inst, &[]), Err(MarketError::EmptyMarket));
    }

    #[test]
    fn uniform_unit_prices_make_everything_mbb() {
        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![false; 4]], int(2)).unwrap());
        let s = MarketState::new(inst, &Allocation::new(1, vec![0; 4]).unwrap(), vec![int(1); 4]).unwrap();
        assert_eq!(s.mbb_set(0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn graph_on_cycling_instance_has_no_edge_back_to_agent_one() {
        let g = cycling_initial().mbb_graph();
        assert!(g.has_edge(0, 0) && g.has_edge(1, 1));
        assert!(g.has_edge(0, 1), "e4 is MBB for agent 1 and held by agent 2");
        assert!(!g.has_edge(1, 0));
        assert_eq!(g.reachable_from(1), vec![1]);
    }

    #[test]
    fn all_high_instance_gives_complete_graph() {
        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![true; 3]; 3], int(2)).unwrap());
        let s = MarketState::new(inst, &Allocation::new(3, vec![0, 1, 2]).unwrap(), vec![int(2); 3]).unwrap();
        let g = s.mbb_graph();
        for i in 0..3 {
            for j in 0..3 {
                assert!(g.has_edge(i, j));
            }
        }
    }

    #[test]
    fn chain_reachability() {
        // agent 1 likes e2 (held by 2), agent 2 likes e3 (held by 3)
        let inst = Arc::new(
            Instance::from_pattern_equal(
                vec![
                    vec![true, true, false],
                    vec![false, true, true],
                    vec![false, false, true],
                ],
                int(3),
            )
            .unwrap(),
        );
        let s = MarketState::new(inst, &Allocation::new(3, vec![0, 1, 2]).unwrap(), vec![int(3); 3]).unwrap();
        let g = s.mbb_graph();
        assert_eq!(g.reachable_from(0), vec![0, 1, 2]);
        assert_eq!(g.reachable_from(2), vec![2]);
        let (_, parent) = g.bfs(0);
        assert_eq!(path_to(&parent, 0, 2), vec![0, 1, 2]);
    }

    #[test]
    fn item_classes() {
        let (minus, plus) = classify_items(&cycling());
        assert_eq!(minus, vec![3]);
        assert_eq!(plus, vec![0, 1, 2, 4]);
        let all_k = Instance::from_pattern_equal(vec![vec![true; 2]; 2], int(2)).unwrap();
        assert!(classify_items(&all_k).0.is_empty());
        let single = Instance::from_pattern_equal(vec![vec![false, true]], int(2)).unwrap();
        assert_eq!(classify_items(&single).0, vec![0]);
    }

    #[test]
    fn equilibrium_predicate() {
        let s = cycling_initial();
        assert!(s.is_equilibrium().is_ok());
        let mut bad = s.clone();
        bad.transfer(0, 1);
        let w = bad.is_equilibrium().unwrap_err();
        assert_eq!((w.agent, w.good), (1, 0));
        assert_eq!((w.alpha, w.ratio), (int(1), ratio(1, 5)));

        let inst = Arc::new(Instance::from_pattern_equal(vec![vec![]], int(2)).unwrap());
        let empty = MarketState::new(inst, &Allocation::new(1, vec![]).unwrap(), vec![]).unwrap();
        assert!(empty.is_equilibrium().is_ok());
    }

    #[test]
    fn transfers_keep_bundles_sorted() {
        let mut s = cycling_initial();
        s.transfer(4, 0);
        s.transfer(1, 1);
        assert_eq!(s.bundle(0), &[0, 2, 4]);
        assert_eq!(s.bundle(1), &[1, 3]);
        assert!(s.caches_consistent());
    }

    #[test]
    fn rejects_bad_prices() {
        let r = MarketState::new(cycling(), &Allocation::new(2, vec![0; 5]).unwrap(), vec![int(0); 5]);
        assert!(matches!(r, Err(MarketError::NonPositivePrice { good: 0, .. })));
        let r = MarketState::new(cycling(), &Allocation::new(2, vec![0; 5]).unwrap(), vec![int(1); 4]);
        assert!(matches!(r, Err(MarketError::Length { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        prop_compose! {
            /// Random instance with random owners and prices `k^j`, `j in 0..3`.
            fn random_state()(n in 1usize..5, m in 1usize..8)
                (high in proptest::collection::vec(proptest::collection::vec(any::<bool>(), m), n),
                 owner in proptest::collection::vec(0..n, m),
                 exps in proptest::collection::vec(0u32..3, m),
                 k in prop_oneof![Just(int(2)), Just(ratio(7, 2))])
                -> MarketState
            {
                let n = high.len();
                let prices = exps.iter().map(|&x| num_traits::pow(k.clone(), x as usize)).collect();
                let inst = Arc::new(Instance::from_pattern_equal(high, k).unwrap());
                MarketState::new(inst, &Allocation::new(n, owner).unwrap(), prices).unwrap()
            }
        }

        fn dfs_reach(state: &MarketState, root: AgentId) -> Vec<AgentId> {
            let inst = state.instance();
            let edge = |i: AgentId, j: AgentId| inst.goods().any(|e| state.owner(e) == j && state.is_mbb(i, e));
            let mut seen = vec![false; inst.n()];
            let mut stack = vec![root];
            seen[root] = true;
            while let Some(i) = stack.pop() {
                for j in inst.agents() {
                    if !seen[j] && edge(i, j) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            inst.agents().filter(|&j| seen[j]).collect()
        }

        proptest! {
            #[test]
            fn reachability_matches_dfs(state in random_state()) {
                let g = state.mbb_graph();
                for root in state.instance().agents() {
                    prop_assert_eq!(g.reachable_from(root), dfs_reach(&state, root));
                }
            }

            #[test]
            fn bfs_paths_follow_edges(state in random_state()) {
                let g = state.mbb_graph();
                let (order, parent) = g.bfs(0);
                for &t in &order {
                    let path = path_to(&parent, 0, t);
                    prop_assert_eq!(path[0], 0);
                    prop_assert_eq!(*path.last().unwrap(), t);
                    prop_assert!(path.windows(2).all(|w| g.has_edge(w[0], w[1])));
                }
            }

            #[test]
            fn caches_survive_transfers_and_raises(state in random_state(), moves in proptest::collection::vec((0usize..8, 0usize..5, any::<bool>()), 0..12)) {
                let mut state = state;
                let (n, m) = (state.instance().n(), state.instance().m());
                let k = state.instance().k().clone();
                for (e, i, raise) in moves {
                    if raise {
                        state.scale_prices(&[e % m], &k);
                    } else {
                        state.transfer(e % m, i % n);
                    }
                    prop_assert!(state.caches_consistent());
                }
            }

            #[test]
            fn mbb_goods_priced_k_times_higher_pull_in_the_cheaper_ones(state in random_state()) {
                prop_assert_eq!(state.price_ladder_violation(), None);
            }
        }
    }
}
