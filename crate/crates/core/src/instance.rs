//! Bivalued instances, allocations and the per-agent measures every algorithm shares.
//!
//! Values are stored canonically: every entry is either `1` (low) or `k` (high) with
//! `k = high / low > 1`. Weights are normalized to sum to exactly one.

use num_traits::{One, Signed, Zero};

use crate::rational::{self, Rational};

pub type AgentId = usize;
pub type GoodId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("instance has no agents")]
    NoAgents,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("agent {agent} has non-positive weight {weight}")]
    NonPositiveWeight { agent: usize, weight: Rational },
    #[error("non-positive valuation {value} (low value must be > 0)")]
    NonPositiveValue { value: Rational },
    #[error("valuation matrix is not bivalued: agent {agent}, good {good} has value {value}")]
    NonBivalued { agent: usize, good: usize, value: Rational },
    #[error("high value equals low value (k = 1); identical valuations are out of model, allocate uniformly instead")]
    DegenerateK,
    #[error("declared k = {declared} but the valuation matrix implies k = {implied}")]
    KMismatch { declared: Rational, implied: Rational },
}

/// Instance data as read from a file, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInstance {
    pub agent_labels: Vec<String>,
    pub good_labels: Vec<String>,
    /// `values[i][e]`, in any positive unit.
    pub values: Vec<Vec<Rational>>,
    /// Positive, not necessarily normalized.
    pub weights: Vec<Rational>,
    /// Optional declared ratio high/low. Needed only when the matrix holds a single
    /// distinct value.
    pub k: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    agent_labels: Vec<String>,
    good_labels: Vec<String>,
    /// `high[i][e]` is true iff agent `i` values good `e` at `k`.
    high: Vec<Vec<bool>>,
    low_raw: Rational,
    high_raw: Rational,
    k: Rational,
    unit: Rational,
    weights: Vec<Rational>,
}

impl Instance {
    /// Validates raw data into a canonical instance.
    ///
    /// The low value is the smallest entry. When the matrix holds a single distinct
    /// value `v`, `k` must be declared; `v` is read as the high value iff `v == k`
    /// (i.e. the file is already in canonical units), otherwise as the low value.
    pub fn validate(raw: RawInstance) -> Result<Self, InstanceError> {
        let n = raw.weights.len();
        if n == 0 {
            return Err(InstanceError::NoAgents);
        }
        if raw.values.len() != n {
            return Err(InstanceError::Shape(format!(
                "{} weight(s) but {} valuation row(s)",
                n,
                raw.values.len()
            )));
        }
        if raw.agent_labels.len() != n {
            return Err(InstanceError::Shape(format!(
                "{} agent label(s) for {} agent(s)",
                raw.agent_labels.len(),
                n
            )));
        }
        let m = raw.good_labels.len();
        if let Some(i) = raw.values.iter().position(|row| row.len() != m) {
            return Err(InstanceError::Shape(format!(
                "agent {} has {} value(s) for {} good(s)",
                i,
                raw.values[i].len(),
                m
            )));
        }
        for (i, w) in raw.weights.iter().enumerate() {
            if !w.is_positive() {
                return Err(InstanceError::NonPositiveWeight {
                    agent: i,
                    weight: w.clone(),
                });
            }
        }
        if let Some(k) = &raw.k {
            if k <= &Rational::one() {
                return Err(InstanceError::DegenerateK);
            }
        }

        let mut distinct: Vec<&Rational> = raw.values.iter().flatten().collect();
        distinct.sort();
        distinct.dedup();
        if let Some(v) = distinct.first() {
            if !v.is_positive() {
                return Err(InstanceError::NonPositiveValue { value: (*v).clone() });
            }
        }
        let (low_raw, high_raw) = match (distinct.as_slice(), &raw.k) {
            ([], Some(k)) => (Rational::one(), k.clone()),
            // Nothing to rescale; k is irrelevant without goods.
            ([], None) => (Rational::one(), rational::int(2)),
            ([v], Some(k)) if *v == k => (Rational::one(), k.clone()),
            ([v], Some(k)) => ((*v).clone(), *v * k),
            ([_], None) => return Err(InstanceError::DegenerateK),
            ([lo, hi], declared) => {
                let implied = *hi / *lo;
                if let Some(k) = declared {
                    if *k != implied {
                        return Err(InstanceError::KMismatch {
                            declared: k.clone(),
                            implied,
                        });
                    }
                }
                ((*lo).clone(), (*hi).clone())
            }
            (_, _) => {
                let (agent, good, value) = first_offender(&raw.values, distinct[0], distinct[1]);
                return Err(InstanceError::NonBivalued { agent, good, value });
            }
        };
        if high_raw <= low_raw {
            return Err(InstanceError::DegenerateK);
        }
        let k = &high_raw / &low_raw;
        let high = raw
            .values
            .iter()
            .map(|row| row.iter().map(|v| *v == high_raw).collect())
            .collect();
        let total: Rational = raw.weights.iter().sum();
        let weights = raw.weights.iter().map(|w| w / &total).collect();
        Ok(Instance {
            agent_labels: raw.agent_labels,
            good_labels: raw.good_labels,
            high,
            low_raw,
            high_raw,
            k,
            unit: Rational::one(),
            weights,
        })
    }

    /// Builds an instance from a high/low pattern in canonical units, with default
    /// labels `a1..`, `e1..`. Weights are normalized.
    pub fn from_pattern(high: Vec<Vec<bool>>, k: Rational, weights: Vec<Rational>) -> Result<Self, InstanceError> {
        let n = high.len();
        let m = high.first().map_or(0, Vec::len);
        let values = high
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&h| if h { k.clone() } else { Rational::one() })
                    .collect()
            })
            .collect();
        Self::validate(RawInstance {
            agent_labels: (1..=n).map(|i| format!("a{i}")).collect(),
            good_labels: (1..=m).map(|e| format!("e{e}")).collect(),
            values,
            weights,
            k: Some(k),
        })
    }

    /// Same as [`Instance::from_pattern`] with equal weights.
    pub fn from_pattern_equal(high: Vec<Vec<bool>>, k: Rational) -> Result<Self, InstanceError> {
        let n = high.len();
        Self::from_pattern(high, k, vec![Rational::one(); n])
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn m(&self) -> usize {
        self.good_labels.len()
    }

    pub fn k(&self) -> &Rational {
        &self.k
    }

    /// The low value `b` in the file's units.
    pub fn low(&self) -> &Rational {
        &self.low_raw
    }

    /// The high value `a` in the file's units.
    pub fn high(&self) -> &Rational {
        &self.high_raw
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, i: AgentId) -> &Rational {
        &self.weights[i]
    }

    pub fn agent_labels(&self) -> &[String] {
        &self.agent_labels
    }

    pub fn good_labels(&self) -> &[String] {
        &self.good_labels
    }

    pub fn is_high(&self, i: AgentId, e: GoodId) -> bool {
        self.high[i][e]
    }

    pub fn pattern(&self) -> &[Vec<bool>] {
        &self.high
    }

    /// Canonical value `v_i(e)`, either `1` or `k`.
    pub fn value(&self, i: AgentId, e: GoodId) -> &Rational {
        if self.high[i][e] {
            &self.k
        } else {
            &self.unit
        }
    }

    /// Value in the file's original units.
    pub fn raw_value(&self, i: AgentId, e: GoodId) -> &Rational {
        if self.high[i][e] {
            &self.high_raw
        } else {
            &self.low_raw
        }
    }

    pub fn has_equal_weights(&self) -> bool {
        self.weights.windows(2).all(|w| w[0] == w[1])
    }

    pub fn agents(&self) -> std::ops::Range<AgentId> {
        0..self.n()
    }

    pub fn goods(&self) -> std::ops::Range<GoodId> {
        0..self.m()
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            agent_labels: self.agent_labels.clone(),
            good_labels: self.good_labels.clone(),
            values: self
                .agents()
                .map(|i| self.goods().map(|e| self.raw_value(i, e).clone()).collect())
                .collect(),
            weights: self.weights.clone(),
            k: Some(self.k.clone()),
        }
    }
}

fn first_offender(values: &[Vec<Rational>], lo: &Rational, hi: &Rational) -> (usize, usize, Rational) {
    for (i, row) in values.iter().enumerate() {
        for (e, v) in row.iter().enumerate() {
            if v != lo && v != hi {
                return (i, e, v.clone());
            }
        }
    }
    unreachable!("more than two distinct values implies an offender")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("good {good} assigned to agent {agent}, but there are only {n} agents")]
pub struct AllocationError {
    pub good: GoodId,
    pub agent: AgentId,
    pub n: usize,
}

/// A partition of the goods: `owner[e]` holds good `e`. Bundles may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    n: usize,
    owner: Vec<AgentId>,
}

impl Allocation {
    pub fn new(n: usize, owner: Vec<AgentId>) -> Result<Self, AllocationError> {
        if let Some((good, &agent)) = owner.iter().enumerate().find(|(_, &a)| a >= n) {
            return Err(AllocationError { good, agent, n });
        }
        Ok(Allocation { n, owner })
    }

    pub fn from_bundles(n: usize, m: usize, bundles: &[Vec<GoodId>]) -> Option<Self> {
        let mut owner = vec![usize::MAX; m];
        for (i, bundle) in bundles.iter().enumerate() {
            for &e in bundle {
                if e >= m || owner[e] != usize::MAX {
                    return None;
                }
                owner[e] = i;
            }
        }
        if bundles.len() > n || owner.contains(&usize::MAX) {
            return None;
        }
        Some(Allocation { n, owner })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, e: GoodId) -> AgentId {
        self.owner[e]
    }

    pub fn owners(&self) -> &[AgentId] {
        &self.owner
    }

    pub fn bundle(&self, i: AgentId) -> Vec<GoodId> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == i)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn bundles(&self) -> Vec<Vec<GoodId>> {
        let mut out = vec![Vec::new(); self.n];
        for (e, &i) in self.owner.iter().enumerate() {
            out[i].push(e);
        }
        out
    }

    pub fn transfer(&mut self, e: GoodId, to: AgentId) {
        assert!(to < self.n);
        self.owner[e] = to;
    }
}

/// `v_i(S)`, computed as `#low + k * #high`.
pub fn utility(inst: &Instance, i: AgentId, goods: &[GoodId]) -> Rational {
    let high = goods.iter().filter(|&&e| inst.is_high(i, e)).count();
    let low = goods.len() - high;
    Rational::from_integer(low.into()) + inst.k() * Rational::from_integer(high.into())
}

/// `v_i(S) / w_i`.
pub fn weighted_utility(inst: &Instance, i: AgentId, goods: &[GoodId]) -> Rational {
    utility(inst, i, goods) / inst.weight(i)
}

pub fn price_sum(prices: &[Rational], goods: &[GoodId]) -> Rational {
    goods.iter().map(|&e| &prices[e]).sum()
}

/// Weighted spending `p(X_i) / w_i`.
pub fn weighted_spending(inst: &Instance, i: AgentId, goods: &[GoodId], prices: &[Rational]) -> Rational {
    price_sum(prices, goods) / inst.weight(i)
}

/// Weighted spending after dropping one cheapest good; `0` for an empty bundle.
pub fn hat_p(inst: &Instance, i: AgentId, goods: &[GoodId], prices: &[Rational]) -> Rational {
    match goods.iter().map(|&e| &prices[e]).min() {
        None => Rational::zero(),
        Some(cheapest) => (price_sum(prices, goods) - cheapest) / inst.weight(i),
    }
}

/// Weighted own utility after dropping one least-valued good; `0` for an empty bundle.
pub fn hat_v(inst: &Instance, i: AgentId, goods: &[GoodId]) -> Rational {
    if goods.is_empty() {
        return Rational::zero();
    }
    let all_high = goods.iter().all(|&e| inst.is_high(i, e));
    let least = if all_high { inst.k().clone() } else { Rational::one() };
    (utility(inst, i, goods) - least) / inst.weight(i)
}

/// Which per-agent quantity an algorithm compares: spending (prices) or own utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Spending,
    Value,
}

impl Metric {
    /// `p(X_i)/w_i` or `v_i(X_i)/w_i`.
    pub fn measure(self, inst: &Instance, i: AgentId, goods: &[GoodId], prices: &[Rational]) -> Rational {
        match self {
            Metric::Spending => weighted_spending(inst, i, goods, prices),
            Metric::Value => weighted_utility(inst, i, goods),
        }
    }

    /// `hat_p_i` or `hat_v_i`.
    pub fn hat(self, inst: &Instance, i: AgentId, goods: &[GoodId], prices: &[Rational]) -> Rational {
        match self {
            Metric::Spending => hat_p(inst, i, goods, prices),
            Metric::Value => hat_v(inst, i, goods),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn cycling_raw() -> RawInstance {
        RawInstance {
            agent_labels: vec!["1".into(), "2".into()],
            good_labels: (1..=5).map(|e| format!("e{e}")).collect(),
            values: vec![
                [5, 5, 5, 1, 1].iter().map(|&v| int(v)).collect(),
                [1, 1, 1, 1, 5].iter().map(|&v| int(v)).collect(),
            ],
            weights: vec![int(1), int(1)],
            k: None,
        }
    }

    #[test]
    fn cycling_instance_validates_with_k5() {
        let inst = Instance::validate(cycling_raw()).unwrap();
        assert_eq!(inst.k(), &int(5));
        assert_eq!(inst.weights(), &[ratio(1, 2), ratio(1, 2)]);
        assert!(inst.has_equal_weights());
        for i in inst.agents() {
            for e in inst.goods() {
                let v = inst.value(i, e);
                assert!(*v == int(1) || *v == int(5));
            }
        }
    }

    #[test]
    fn single_agent_no_goods_is_valid() {
        let raw = RawInstance {
            agent_labels: vec!["solo".into()],
            good_labels: vec![],
            values: vec![vec![]],
            weights: vec![int(3)],
            k: None,
        };
        let inst = Instance::validate(raw).unwrap();
        assert_eq!((inst.n(), inst.m()), (1, 0));
        assert_eq!(inst.weight(0), &int(1));
    }

    #[test]
    fn rescales_and_normalizes() {
        let raw = RawInstance {
            agent_labels: vec!["x".into(), "y".into()],
            good_labels: vec!["g".into(), "h".into()],
            values: vec![vec![int(2), int(6)], vec![int(6), int(2)]],
            weights: vec![int(1), int(3)],
            k: None,
        };
        let inst = Instance::validate(raw).unwrap();
        assert_eq!(inst.k(), &int(3));
        assert_eq!(inst.weights(), &[ratio(1, 4), ratio(3, 4)]);
        assert_eq!(inst.value(0, 1), &int(3));
        assert_eq!(inst.raw_value(0, 1), &int(6));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut raw = cycling_raw();
        raw.values[0][0] = int(3);
        assert!(matches!(
            Instance::validate(raw),
            Err(InstanceError::NonBivalued { .. })
        ));

        let mut raw = cycling_raw();
        raw.weights[1] = int(0);
        assert!(matches!(
            Instance::validate(raw),
            Err(InstanceError::NonPositiveWeight { agent: 1, .. })
        ));

        let mut raw = cycling_raw();
        raw.values[0][0] = int(0);
        assert!(matches!(
            Instance::validate(raw),
            Err(InstanceError::NonPositiveValue { .. })
        ));

        let mut raw = cycling_raw();
        raw.values = vec![vec![int(2); 5], vec![int(2); 5]];
        assert_eq!(Instance::validate(raw), Err(InstanceError::DegenerateK));

        let mut raw = cycling_raw();
        raw.k = Some(int(1));
        assert_eq!(Instance::validate(raw), Err(InstanceError::DegenerateK));

        let mut raw = cycling_raw();
        raw.k = Some(int(4));
        assert!(matches!(Instance::validate(raw), Err(InstanceError::KMismatch { .. })));

        let mut raw = cycling_raw();
        raw.values[1].pop();
        assert!(matches!(Instance::validate(raw), Err(InstanceError::Shape(_))));
    }

    #[test]
    fn single_valued_matrix_uses_declared_k() {
        let all_k = Instance::from_pattern_equal(vec![vec![true, true]], int(3)).unwrap();
        assert!(all_k.is_high(0, 0));
        let all_low = Instance::from_pattern_equal(vec![vec![false, false]], int(3)).unwrap();
        assert!(!all_low.is_high(0, 0));
        assert_eq!(all_low.k(), &int(3));
    }

    #[test]
    fn utilities_on_cycling() {
        let inst = Instance::validate(cycling_raw()).unwrap();
        assert_eq!(utility(&inst, 0, &[0, 1, 2]), int(15));
        assert_eq!(utility(&inst, 1, &[0, 1, 2, 3, 4]), int(9));
        assert_eq!(utility(&inst, 0, &[]), int(0));
    }

    #[test]
    fn spendings_on_cycling_initial_prices() {
        let inst = Instance::validate(cycling_raw()).unwrap();
        let p = vec![int(5), int(5), int(5), int(1), int(5)];
        assert_eq!(weighted_spending(&inst, 1, &[3, 4], &p), int(12));
        assert_eq!(weighted_spending(&inst, 1, &[], &p), int(0));
        assert_eq!(hat_p(&inst, 0, &[0, 1, 2], &p), int(20));
        assert_eq!(hat_p(&inst, 0, &[0], &p), int(0));
        let raised = vec![int(5), int(5), int(5), int(1), int(25)];
        assert_eq!(weighted_spending(&inst, 1, &[4], &raised), int(50));
        assert_eq!(hat_p(&inst, 1, &[3, 4], &raised), int(50));
    }

    #[test]
    fn hat_v_drops_a_least_valued_good() {
        let inst = Instance::validate(cycling_raw()).unwrap();
        // agent 1 values e1..e3 at 5 and e4 at 1
        assert_eq!(hat_v(&inst, 0, &[0, 1, 3]), int(20));
        assert_eq!(hat_v(&inst, 0, &[0, 1]), int(10));
        assert_eq!(hat_v(&inst, 0, &[3]), int(0));
        assert_eq!(hat_v(&inst, 0, &[]), int(0));
    }

    #[test]
    fn allocation_round_trips_through_bundles() {
        let a = Allocation::new(3, vec![2, 0, 2, 1]).unwrap();
        let b = a.bundles();
        assert_eq!(b, vec![vec![1], vec![3], vec![0, 2]]);
        assert_eq!(Allocation::from_bundles(3, 4, &b).unwrap(), a);
        assert!(Allocation::new(2, vec![2]).is_err());
        assert!(Allocation::from_bundles(2, 2, &[vec![0], vec![0]]).is_none());
        assert!(Allocation::from_bundles(2, 2, &[vec![0], vec![]]).is_none());
    }
}
