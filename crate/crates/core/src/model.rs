//! Core MDP model: states, actions, exact-rational transition distributions,
//! parity conditions, restrictions and end components.

use num::BigRational;
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Dense state index.
pub type StateId = usize;
/// Dense action index.
pub type ActionId = usize;
/// Exact probability.
pub type Prob = BigRational;

/// A probability distribution over states, stored as a support list.
pub type Dist = Vec<(StateId, Prob)>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("state {0} has no enabled action")]
    NoEnabledAction(String),
    #[error("distribution for ({state}, {action}) sums to {sum}, expected 1")]
    BadDistribution { state: String, action: String, sum: String },
    #[error("probability for ({state}, {action}) is not in (0, 1]")]
    BadProbability { state: String, action: String },
    #[error("duplicate successor {succ} in distribution for ({state}, {action})")]
    DuplicateSuccessor { state: String, action: String, succ: String },
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("action index {0} out of range")]
    ActionOutOfRange(usize),
    #[error("parity condition {name} has no priority for state {state}")]
    MissingPriority { name: String, state: String },
    #[error("state {0} is deadlocked in the restriction")]
    DeadlockedState(String),
    #[error("carrier is empty")]
    EmptyCarrier,
}

/// A finite MDP with exact rational transition probabilities.
///
/// States and actions are interned; `enabled(s)` is non-empty for every state
/// of a validated MDP. Distributions are kept sorted by successor index.
#[derive(Debug, Clone)]
pub struct Mdp {
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
    /// Transition function; key present exactly when the action is enabled.
    trans: BTreeMap<(StateId, ActionId), Dist>,
    /// Enabled actions per state, sorted.
    enabled: Vec<Vec<ActionId>>,
}

impl Mdp {
    /// Build and validate an MDP from parts.
    pub fn new(
        state_names: Vec<String>,
        action_names: Vec<String>,
        trans: BTreeMap<(StateId, ActionId), Dist>,
    ) -> Result<Self, ModelError> {
        let n = state_names.len();
        let na = action_names.len();
        let mut enabled = vec![Vec::new(); n];
        for (&(s, a), dist) in &trans {
            if s >= n {
                return Err(ModelError::StateOutOfRange(s));
            }
            if a >= na {
                return Err(ModelError::ActionOutOfRange(a));
            }
            let mut sum = Prob::zero();
            let mut seen = BTreeSet::new();
            for (succ, p) in dist {
                if *succ >= n {
                    return Err(ModelError::StateOutOfRange(*succ));
                }
                if !seen.insert(*succ) {
                    return Err(ModelError::DuplicateSuccessor {
                        state: state_names[s].clone(),
                        action: action_names[a].clone(),
                        succ: state_names[*succ].clone(),
                    });
                }
                if *p <= Prob::zero() || *p > Prob::one() {
                    return Err(ModelError::BadProbability {
                        state: state_names[s].clone(),
                        action: action_names[a].clone(),
                    });
                }
                sum += p;
            }
            if !sum.is_one() {
                return Err(ModelError::BadDistribution {
                    state: state_names[s].clone(),
                    action: action_names[a].clone(),
                    sum: sum.to_string(),
                });
            }
            enabled[s].push(a);
        }
        for (s, acts) in enabled.iter().enumerate() {
            if acts.is_empty() {
                return Err(ModelError::NoEnabledAction(state_names[s].clone()));
            }
        }
        let mut trans = trans;
        for dist in trans.values_mut() {
            dist.sort_by_key(|(succ, _)| *succ);
        }
        Ok(Mdp { state_names, action_names, trans, enabled })
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    /// Enabled actions of `s`, sorted.
    pub fn enabled(&self, s: StateId) -> &[ActionId] {
        &self.enabled[s]
    }

    /// Transition distribution of an enabled (state, action) pair.
    pub fn dist(&self, s: StateId, a: ActionId) -> &Dist {
        &self.trans[&(s, a)]
    }

    pub fn try_dist(&self, s: StateId, a: ActionId) -> Option<&Dist> {
        self.trans.get(&(s, a))
    }

    /// Support of the distribution of `(s, a)`.
    pub fn post(&self, s: StateId, a: ActionId) -> impl Iterator<Item = StateId> + '_ {
        self.trans[&(s, a)].iter().map(|(succ, _)| *succ)
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action_index(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name)
    }

    /// The trivial sub-MDP covering the whole model.
    pub fn full_sub(&self) -> SubMdp {
        let states: BTreeSet<_> = (0..self.n_states()).collect();
        let acts = states
            .iter()
            .map(|&s| (s, self.enabled(s).iter().copied().collect()))
            .collect();
        SubMdp { states, acts }
    }
}

/// A parity condition: a priority per state; a path satisfies the condition
/// iff the greatest priority seen infinitely often is even.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityMap {
    pub name: String,
    pub prio: Vec<u32>,
}

impl ParityMap {
    pub fn new(name: impl Into<String>, prio: Vec<u32>) -> Self {
        ParityMap { name: name.into(), prio }
    }

    /// The dual condition `p + 1`: satisfied by exactly the paths violating
    /// `self`. The dual's name carries a `~` suffix.
    pub fn dual(&self) -> ParityMap {
        ParityMap {
            name: format!("{}~", self.name),
            prio: self.prio.iter().map(|p| p + 1).collect(),
        }
    }

    pub fn max_priority(&self) -> u32 {
        self.prio.iter().copied().max().unwrap_or(0)
    }
}

/// Resolves condition names, including dualized names with trailing `~`s,
/// against a set of named base conditions.
#[derive(Debug, Clone, Default)]
pub struct ConditionTable {
    maps: BTreeMap<String, ParityMap>,
}

impl ConditionTable {
    pub fn new(maps: Vec<ParityMap>) -> Self {
        ConditionTable { maps: maps.into_iter().map(|m| (m.name.clone(), m)).collect() }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(|s| s.as_str())
    }

    pub fn base(&self, name: &str) -> Option<&ParityMap> {
        self.maps.get(name)
    }

    /// Resolve a (possibly dualized) name: each trailing `~` applies one
    /// dualization to the base condition.
    pub fn resolve(&self, name: &str) -> Option<ParityMap> {
        let stripped = name.trim_end_matches('~');
        let duals = name.len() - stripped.len();
        let mut map = self.maps.get(stripped)?.clone();
        for _ in 0..duals {
            map = map.dual();
        }
        Some(map)
    }
}

/// A restriction of a base MDP: a carrier set of states together with, for
/// each carrier state, the non-empty set of actions that stay inside the
/// carrier with probability one. All indices refer to the base MDP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubMdp {
    pub states: BTreeSet<StateId>,
    pub acts: BTreeMap<StateId, BTreeSet<ActionId>>,
}

impl SubMdp {
    pub fn contains(&self, s: StateId) -> bool {
        self.states.contains(&s)
    }

    pub fn acts_of(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.acts.get(&s).into_iter().flatten().copied()
    }
}

/// An end component: a carrier plus an action map under which the carrier is
/// closed and strongly connected.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct EndComponent {
    pub states: BTreeSet<StateId>,
    pub acts: BTreeMap<StateId, BTreeSet<ActionId>>,
}

impl EndComponent {
    pub fn as_sub(&self) -> SubMdp {
        SubMdp { states: self.states.clone(), acts: self.acts.clone() }
    }

    /// Check the defining invariants against the base MDP: every carrier
    /// state has at least one action, all listed actions are enabled and
    /// closed in the carrier, and the carrier is strongly connected under the
    /// listed actions.
    pub fn validate(&self, m: &Mdp) -> Result<(), ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::EmptyCarrier);
        }
        for &s in &self.states {
            let acts = self.acts.get(&s).filter(|a| !a.is_empty()).ok_or_else(|| {
                ModelError::NoEnabledAction(m.state_names[s].clone())
            })?;
            for &a in acts {
                if !m.enabled(s).contains(&a) {
                    return Err(ModelError::ActionOutOfRange(a));
                }
                if m.post(s, a).any(|succ| !self.states.contains(&succ)) {
                    return Err(ModelError::DeadlockedState(m.state_names[s].clone()));
                }
            }
        }
        // Strong connectivity under the action map.
        let ok = |from: StateId| {
            let mut seen = BTreeSet::from([from]);
            let mut stack = vec![from];
            while let Some(s) = stack.pop() {
                for a in self.acts[&s].iter() {
                    for succ in m.post(s, *a) {
                        if self.states.contains(&succ) && seen.insert(succ) {
                            stack.push(succ);
                        }
                    }
                }
            }
            seen.len() == self.states.len()
        };
        let first = *self.states.iter().next().unwrap();
        if !ok(first) {
            return Err(ModelError::EmptyCarrier);
        }
        // Reverse reachability: every state reaches `first` iff graph is
        // strongly connected given forward reachability from `first`.
        for &s in &self.states {
            let mut seen = BTreeSet::from([s]);
            let mut stack = vec![s];
            let mut hit = s == first;
            while let Some(v) = stack.pop() {
                if hit {
                    break;
                }
                for a in self.acts[&v].iter() {
                    for succ in m.post(v, *a) {
                        if succ == first {
                            hit = true;
                        }
                        if self.states.contains(&succ) && seen.insert(succ) {
                            stack.push(succ);
                        }
                    }
                }
            }
            if !hit {
                return Err(ModelError::EmptyCarrier);
            }
        }
        Ok(())
    }
}

/// Restrict `m` to the carrier `c`: keep exactly the actions whose whole
/// support stays in `c`. Errors if some carrier state keeps no action.
pub fn restrict(m: &Mdp, c: &BTreeSet<StateId>) -> Result<SubMdp, ModelError> {
    if c.is_empty() {
        return Err(ModelError::EmptyCarrier);
    }
    let mut acts = BTreeMap::new();
    for &s in c {
        if s >= m.n_states() {
            return Err(ModelError::StateOutOfRange(s));
        }
        let closed: BTreeSet<ActionId> = m
            .enabled(s)
            .iter()
            .copied()
            .filter(|&a| m.post(s, a).all(|succ| c.contains(&succ)))
            .collect();
        if closed.is_empty() {
            return Err(ModelError::DeadlockedState(m.state_names[s].clone()));
        }
        acts.insert(s, closed);
    }
    Ok(SubMdp { states: c.clone(), acts })
}

/// Restrict a sub-MDP further to `c ∩ sub.states`, keeping only actions of
/// `sub` closed in the smaller carrier. Deadlocked states are dropped rather
/// than reported: the result is the largest well-formed sub-structure inside
/// `c`; it may be empty.
pub fn restrict_within(m: &Mdp, sub: &SubMdp, c: &BTreeSet<StateId>) -> SubMdp {
    let mut states: BTreeSet<StateId> = sub.states.intersection(c).copied().collect();
    loop {
        let mut acts = BTreeMap::new();
        let mut drop = Vec::new();
        for &s in &states {
            let closed: BTreeSet<ActionId> = sub
                .acts_of(s)
                .filter(|&a| m.post(s, a).all(|succ| states.contains(&succ)))
                .collect();
            if closed.is_empty() {
                drop.push(s);
            } else {
                acts.insert(s, closed);
            }
        }
        if drop.is_empty() {
            return SubMdp { states, acts };
        }
        for s in drop {
            states.remove(&s);
        }
    }
}

/// Product of `m` with a two-valued reach monitor for `r`: states are pairs
/// `(s, i)` with `i ∈ {1, 2}`; copy 2 is entered exactly when a transition
/// moves into `r` and is never left. The extra condition `p_reach` assigns
/// priority `i` to `(s, i)`, so a path of the product satisfies `p_reach` iff
/// the projected path visits `r` infinitely often or gets absorbed in copy 2
/// — for paths that eventually stay in copy 2, exactly the reach objective.
///
/// Returns the product, the reach condition, the given conditions lifted to
/// the product, and the map sending a base state `s` to the product state
/// `(s, 1)`.
/// Materialize a sub-MDP as a standalone MDP over fresh contiguous state
/// ids (action ids and names are kept). Returns the new MDP, the original
/// id of each new state, and the given conditions restricted to the new
/// state space. Panics if the sub-MDP has a deadlocked state; `restrict`
/// and `restrict_within` never produce one.
pub fn extract_sub(
    m: &Mdp,
    sub: &SubMdp,
    conds: &[ParityMap],
) -> (Mdp, Vec<StateId>, Vec<ParityMap>) {
    let orig: Vec<StateId> = sub.states.iter().copied().collect();
    let new_of: BTreeMap<StateId, StateId> =
        orig.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut trans = BTreeMap::new();
    for (i, &s) in orig.iter().enumerate() {
        for a in sub.acts_of(s) {
            let d: Dist = m
                .dist(s, a)
                .iter()
                .map(|(succ, p)| (new_of[succ], p.clone()))
                .collect();
            trans.insert((i, a), d);
        }
    }
    let names = orig.iter().map(|&s| m.state_names[s].clone()).collect();
    let mdp = Mdp::new(names, m.action_names.clone(), trans)
        .expect("a closed, deadlock-free sub-MDP extracts to a valid MDP");
    let lifted = conds
        .iter()
        .map(|c| {
            ParityMap::new(c.name.clone(), orig.iter().map(|&s| c.prio[s]).collect())
        })
        .collect();
    (mdp, orig, lifted)
}

pub fn reach_to_parity_product(
    m: &Mdp,
    r: &BTreeSet<StateId>,
    conds: &[ParityMap],
) -> (Mdp, ParityMap, Vec<ParityMap>, Vec<StateId>) {
    let n = m.n_states();
    // (s, 1) -> s, (s, 2) -> n + s.
    let mut names = Vec::with_capacity(2 * n);
    for copy in [1u32, 2] {
        for s in 0..n {
            names.push(format!("{}@{}", m.state_names[s], copy));
        }
    }
    let mut trans = BTreeMap::new();
    for s in 0..n {
        for &a in m.enabled(s) {
            let dist = m.dist(s, a);
            let from_c1: Dist = dist
                .iter()
                .map(|(succ, p)| {
                    let tgt = if r.contains(succ) { n + succ } else { *succ };
                    (tgt, p.clone())
                })
                .collect();
            let from_c2: Dist = dist.iter().map(|(succ, p)| (n + succ, p.clone())).collect();
            trans.insert((s, a), merge_dist(from_c1));
            trans.insert((n + s, a), merge_dist(from_c2));
        }
    }
    let product = Mdp::new(names, m.action_names.clone(), trans)
        .expect("product of a valid MDP is valid");
    let mut reach_prio = vec![1u32; 2 * n];
    for v in reach_prio.iter_mut().skip(n) {
        *v = 2;
    }
    let p_reach = ParityMap::new("reach".to_string(), reach_prio);
    let lifted = conds
        .iter()
        .map(|c| {
            let mut prio = c.prio.clone();
            prio.extend_from_slice(&c.prio);
            ParityMap::new(c.name.clone(), prio)
        })
        .collect();
    let lift = (0..n).collect();
    (product, p_reach, lifted, lift)
}

fn merge_dist(mut d: Dist) -> Dist {
    d.sort_by_key(|(s, _)| *s);
    let mut out: Dist = Vec::with_capacity(d.len());
    for (s, p) in d {
        match out.last_mut() {
            Some((ls, lp)) if *ls == s => *lp += p,
            _ => out.push((s, p)),
        }
    }
    out
}

/// Convenience constructor used by tests and fixtures: transitions given as
/// `(state, action, [(succ, num, den)])` over named states/actions.
pub fn build_mdp(
    states: &[&str],
    actions: &[&str],
    transitions: &[(&str, &str, &[(&str, i64, i64)])],
) -> Mdp {
    use num::BigInt;
    let state_names: Vec<String> = states.iter().map(|s| s.to_string()).collect();
    let action_names: Vec<String> = actions.iter().map(|s| s.to_string()).collect();
    let idx = |n: &str| state_names.iter().position(|x| x == n).expect("unknown state");
    let aidx = |n: &str| action_names.iter().position(|x| x == n).expect("unknown action");
    let mut trans = BTreeMap::new();
    for (s, a, dist) in transitions {
        let d: Dist = dist
            .iter()
            .map(|(succ, num, den)| {
                (idx(succ), Prob::new(BigInt::from(*num), BigInt::from(*den)))
            })
            .collect();
        trans.insert((idx(s), aidx(a)), d);
    }
    Mdp::new(state_names, action_names, trans).expect("fixture MDP must validate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn half() -> Prob {
        Prob::new(BigInt::from(1), BigInt::from(2))
    }

    #[test]
    fn validates_distribution_sum() {
        let trans = BTreeMap::from([((0, 0), vec![(0, half())])]);
        let err = Mdp::new(vec!["s".into()], vec!["a".into()], trans).unwrap_err();
        assert!(matches!(err, ModelError::BadDistribution { .. }));
    }

    #[test]
    fn rejects_deadlocked_state() {
        let trans = BTreeMap::from([((0, 0), vec![(1, Prob::one())])]);
        let err = Mdp::new(vec!["s".into(), "t".into()], vec!["a".into()], trans).unwrap_err();
        assert_eq!(err, ModelError::NoEnabledAction("t".into()));
    }

    #[test]
    fn rejects_duplicate_successor() {
        let trans = BTreeMap::from([((0, 0), vec![(0, half()), (0, half())])]);
        let err = Mdp::new(vec!["s".into()], vec!["a".into()], trans).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateSuccessor { .. }));
    }

    #[test]
    fn dual_of_dual_priorities_shift_by_two() {
        let p = ParityMap::new("p", vec![0, 1, 4]);
        let dd = p.dual().dual();
        assert_eq!(dd.prio, vec![2, 3, 6]);
        assert_eq!(dd.name, "p~~");
    }

    #[test]
    fn condition_table_resolves_dualized_names() {
        let t = ConditionTable::new(vec![ParityMap::new("p", vec![1, 2])]);
        assert_eq!(t.resolve("p~").unwrap().prio, vec![2, 3]);
        assert!(t.resolve("q").is_none());
    }

    #[test]
    fn restrict_keeps_only_closed_actions() {
        // s0 -a-> s0, s0 -b-> s1, s1 -a-> s1.
        let m = build_mdp(
            &["s0", "s1"],
            &["a", "b"],
            &[
                ("s0", "a", &[("s0", 1, 1)]),
                ("s0", "b", &[("s1", 1, 1)]),
                ("s1", "a", &[("s1", 1, 1)]),
            ],
        );
        let sub = restrict(&m, &BTreeSet::from([0])).unwrap();
        assert_eq!(sub.acts[&0], BTreeSet::from([0]));
        // {s1} keeps only a; restricting to a carrier where s0 must leave fails.
        let m2 = build_mdp(
            &["s0", "s1"],
            &["a"],
            &[("s0", "a", &[("s1", 1, 1)]), ("s1", "a", &[("s1", 1, 1)])],
        );
        assert_eq!(
            restrict(&m2, &BTreeSet::from([0])).unwrap_err(),
            ModelError::DeadlockedState("s0".into())
        );
    }

    #[test]
    fn restriction_is_idempotent() {
        let m = build_mdp(
            &["s0", "s1", "s2"],
            &["a", "b"],
            &[
                ("s0", "a", &[("s0", 1, 2), ("s1", 1, 2)]),
                ("s0", "b", &[("s2", 1, 1)]),
                ("s1", "a", &[("s0", 1, 1)]),
                ("s2", "a", &[("s2", 1, 1)]),
            ],
        );
        let c = BTreeSet::from([0, 1]);
        let once = restrict(&m, &c).unwrap();
        let twice = restrict_within(&m, &once, &c);
        assert_eq!(once, twice);
    }

    #[test]
    fn product_enters_copy_two_on_reach() {
        let m = build_mdp(
            &["s0", "s1"],
            &["a", "b"],
            &[
                ("s0", "a", &[("s1", 1, 1)]),
                ("s0", "b", &[("s0", 1, 1)]),
                ("s1", "a", &[("s1", 1, 1)]),
            ],
        );
        let r = BTreeSet::from([1]);
        let (prod, p_reach, lifted, lift) =
            reach_to_parity_product(&m, &r, &[ParityMap::new("p", vec![0, 2])]);
        assert_eq!(prod.n_states(), 4);
        assert_eq!(lift[0], 0);
        // From (s0, 1), action a moves straight into copy 2.
        let d = prod.dist(lift[0], 0);
        assert_eq!(d, &vec![(3, Prob::one())]);
        assert_eq!(p_reach.prio, vec![1, 1, 2, 2]);
        assert_eq!(lifted[0].prio, vec![0, 2, 0, 2]);
        // Copy 2 is absorbing.
        assert!(prod.post(3, 0).all(|s| s >= 2));
    }
}
