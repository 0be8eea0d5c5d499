//! Fixpoint and decomposition primitives over MDPs and their restrictions:
//! attractors, SCCs, maximal end components, qualitative reachability and
//! exact maximal reachability probabilities.

use crate::model::{ActionId, EndComponent, Mdp, Prob, StateId, SubMdp};
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Two-player attractor: least fixpoint of Attr⁰ = T,
/// Attrⁿ⁺¹ = Attrⁿ ∪ {s | ∃a: Post(s,a) ⊆ Attrⁿ} within `sub`.
/// States from which the controller forces reaching T with certainty.
pub fn attractor_two_player(m: &Mdp, sub: &SubMdp, t: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let mut attr: BTreeSet<StateId> = t.intersection(&sub.states).copied().collect();
    loop {
        let mut grew = false;
        for &s in &sub.states {
            if attr.contains(&s) {
                continue;
            }
            let pulls = sub
                .acts_of(s)
                .any(|a| m.post(s, a).all(|succ| attr.contains(&succ)));
            if pulls {
                attr.insert(s);
                grew = true;
            }
        }
        if !grew {
            return attr;
        }
    }
}

/// One-player attractor: plain graph reachability toward T over the edge
/// relation of `sub` (existential successor step).
pub fn attractor_one_player(m: &Mdp, sub: &SubMdp, t: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    // Backward BFS over the edge relation.
    let mut rev: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for &s in &sub.states {
        for a in sub.acts_of(s) {
            for succ in m.post(s, a) {
                rev.entry(succ).or_default().push(s);
            }
        }
    }
    let mut attr: BTreeSet<StateId> = t.intersection(&sub.states).copied().collect();
    let mut queue: VecDeque<StateId> = attr.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &pred in rev.get(&v).into_iter().flatten() {
            if attr.insert(pred) {
                queue.push_back(pred);
            }
        }
    }
    attr
}

/// States from which some path reaches T (alias of the one-player attractor,
/// named for NZ(◇T)/E(◇T) call sites).
pub fn exists_reach(m: &Mdp, sub: &SubMdp, t: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    attractor_one_player(m, sub, t)
}

/// Strongly connected components of the edge relation of `sub`, restricted to
/// `sub.states`. Iterative Tarjan; components in reverse topological order.
pub fn sccs(m: &Mdp, sub: &SubMdp) -> Vec<Vec<StateId>> {
    let nodes: Vec<StateId> = sub.states.iter().copied().collect();
    let index_of: BTreeMap<StateId, usize> =
        nodes.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = nodes.len();
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&s| {
            let mut out: BTreeSet<usize> = BTreeSet::new();
            for a in sub.acts_of(s) {
                for succ in m.post(s, a) {
                    if let Some(&j) = index_of.get(&succ) {
                        out.insert(j);
                    }
                }
            }
            out.into_iter().collect()
        })
        .collect();

    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut out: Vec<Vec<StateId>> = Vec::new();

    // Explicit DFS stack: (node, next child position).
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut dfs: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = dfs.last_mut() {
            if *child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    dfs.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(nodes[w]);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
                dfs.pop();
                if let Some(&mut (parent, _)) = dfs.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    out
}

/// Maximal end components of `sub`: standard SCC-prune-iterate. Actions whose
/// support leaves the candidate component are deleted; states left without
/// actions are dropped; repeat to fixpoint.
pub fn mec_decomposition(m: &Mdp, sub: &SubMdp) -> Vec<EndComponent> {
    let mut out = Vec::new();
    let mut worklist: Vec<SubMdp> = vec![sub.clone()];
    while let Some(part) = worklist.pop() {
        if part.states.is_empty() {
            continue;
        }
        for comp in sccs(m, &part) {
            let comp_set: BTreeSet<StateId> = comp.iter().copied().collect();
            // Keep actions of `part` that stay inside this component; drop
            // deadlocked states and re-close.
            let mut states = comp_set.clone();
            let acts = loop {
                let mut acts: BTreeMap<StateId, BTreeSet<ActionId>> = BTreeMap::new();
                let mut drop = Vec::new();
                for &s in &states {
                    let closed: BTreeSet<ActionId> = part
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
                    break acts;
                }
                for s in drop {
                    states.remove(&s);
                }
            };
            if states.is_empty() {
                continue;
            }
            let candidate = SubMdp { states: states.clone(), acts };
            if states == comp_set {
                // Closed SCC; an EC unless it is a trivial single state
                // without a self-loop (impossible here: the state kept a
                // closed action, so it has a self-loop).
                if states.len() == 1 || is_strongly_connected(m, &candidate) {
                    out.push(EndComponent { states: candidate.states, acts: candidate.acts });
                    continue;
                }
            }
            // Shrunk: redecompose.
            worklist.push(candidate);
        }
    }
    out.sort_by(|a, b| a.states.iter().next().cmp(&b.states.iter().next()));
    out
}

fn is_strongly_connected(m: &Mdp, sub: &SubMdp) -> bool {
    sccs(m, sub).len() == 1
}

/// States from which some strategy reaches T with probability one
/// (qualitative; greatest set in which the controller can stay while keeping
/// T reachable).
pub fn almost_sure_reach(m: &Mdp, sub: &SubMdp, t: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let mut good: BTreeSet<StateId> = sub.states.clone();
    loop {
        // Allowed actions: those that cannot fall out of `good`.
        let allowed = SubMdp {
            states: good.clone(),
            acts: good
                .iter()
                .map(|&s| {
                    let acts: BTreeSet<ActionId> = sub
                        .acts_of(s)
                        .filter(|&a| m.post(s, a).all(|succ| good.contains(&succ)))
                        .collect();
                    (s, acts)
                })
                .collect(),
        };
        let target: BTreeSet<StateId> = t.intersection(&good).copied().collect();
        let reach = attractor_one_player(m, &allowed, &target);
        if reach == good {
            return good;
        }
        good = reach;
    }
}

/// Exact maximal reachability probabilities toward `t`, with an optimal
/// deterministic memoryless strategy. Qualitative preprocessing fixes the
/// probability-0 and probability-1 regions; the remainder is solved by policy
/// iteration with exact rational policy evaluation (induced-chain linear
/// systems, least-solution semantics).
pub fn max_reach_prob(
    m: &Mdp,
    t: &BTreeSet<StateId>,
) -> (Vec<Prob>, Vec<Option<ActionId>>) {
    let sub = m.full_sub();
    let n = m.n_states();
    let can_reach = exists_reach(m, &sub, t);
    let s1 = almost_sure_reach(m, &sub, t);
    let mut value: Vec<Prob> = vec![Prob::zero(); n];
    let mut policy: Vec<Option<ActionId>> = vec![None; n];
    for &s in &s1 {
        value[s] = Prob::one();
    }

    // Strategy inside the almost-sure region: decrease BFS distance to T
    // while staying in allowed (value-1-preserving) actions.
    let dist1 = bfs_distance(m, &s1, t, true);
    for &s in &s1 {
        if t.contains(&s) {
            policy[s] = Some(m.enabled(s)[0]);
            continue;
        }
        policy[s] = m
            .enabled(s)
            .iter()
            .copied()
            .filter(|&a| m.post(s, a).all(|succ| s1.contains(&succ)))
            .min_by_key(|&a| m.post(s, a).map(|succ| dist1[succ]).min().unwrap_or(usize::MAX));
    }

    let middle: Vec<StateId> =
        (0..n).filter(|s| can_reach.contains(s) && !s1.contains(s)).collect();
    for s in 0..n {
        if !can_reach.contains(&s) {
            policy[s] = Some(m.enabled(s)[0]);
        }
    }
    if middle.is_empty() {
        return (value, policy);
    }

    // Initial proper policy: shortest-path routing toward T over all edges.
    let dist = bfs_distance(m, &can_reach, t, false);
    for &s in &middle {
        policy[s] = Some(
            m.enabled(s)
                .iter()
                .copied()
                .min_by_key(|&a| m.post(s, a).map(|succ| dist[succ]).min().unwrap_or(usize::MAX))
                .unwrap(),
        );
    }

    let cap = 64 * (middle.len() + 1) * (m.n_actions() + 1);
    for _ in 0..cap {
        evaluate_policy(m, &middle, &s1, &policy, &mut value);
        let mut improved = false;
        for &s in &middle {
            let current = &value[s];
            let mut best_a = policy[s].unwrap();
            let mut best = current.clone();
            for &a in m.enabled(s) {
                let look: Prob = m
                    .dist(s, a)
                    .iter()
                    .map(|(succ, p)| p.clone() * value[*succ].clone())
                    .sum();
                if look > best {
                    best = look;
                    best_a = a;
                    improved = true;
                }
            }
            policy[s] = Some(best_a);
        }
        if !improved {
            break;
        }
    }
    // The fixpoint of the Bellman operator with the prob-0 region pinned at 0
    // is the optimal value; assert we reached it.
    for &s in &middle {
        for &a in m.enabled(s) {
            let look: Prob = m
                .dist(s, a)
                .iter()
                .map(|(succ, p)| p.clone() * value[*succ].clone())
                .sum();
            debug_assert!(look <= value[s], "policy iteration left an improvable state");
        }
    }
    (value, policy)
}

/// Distances to `t` over the edge relation (restricted to allowed-in-`region`
/// actions when `closed_only`); usize::MAX when unreachable.
fn bfs_distance(
    m: &Mdp,
    region: &BTreeSet<StateId>,
    t: &BTreeSet<StateId>,
    closed_only: bool,
) -> Vec<usize> {
    let n = m.n_states();
    let mut dist = vec![usize::MAX; n];
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for &s in t {
        if region.contains(&s) {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    // Backward BFS.
    let mut rev: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for &s in region {
        for &a in m.enabled(s) {
            if closed_only && m.post(s, a).any(|succ| !region.contains(&succ)) {
                continue;
            }
            for succ in m.post(s, a) {
                rev.entry(succ).or_default().push(s);
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        for &pred in rev.get(&v).into_iter().flatten() {
            if dist[pred] == usize::MAX {
                dist[pred] = dist[v] + 1;
                queue.push_back(pred);
            }
        }
    }
    dist
}

/// Evaluate a fixed deterministic policy exactly: states that cannot reach
/// the value-1 region in the induced chain get 0; the rest solve a linear
/// system by Gaussian elimination.
fn evaluate_policy(
    m: &Mdp,
    middle: &[StateId],
    s1: &BTreeSet<StateId>,
    policy: &[Option<ActionId>],
    value: &mut [Prob],
) {
    // Which middle states reach s1 in the induced chain?
    let mut rev: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for &s in middle {
        for succ in m.post(s, policy[s].unwrap()) {
            rev.entry(succ).or_default().push(s);
        }
    }
    let mut live: BTreeSet<StateId> = BTreeSet::new();
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for &t in s1 {
        for &pred in rev.get(&t).into_iter().flatten() {
            if live.insert(pred) {
                queue.push_back(pred);
            }
        }
    }
    while let Some(v) = queue.pop_front() {
        for &pred in rev.get(&v).into_iter().flatten() {
            if live.insert(pred) {
                queue.push_back(pred);
            }
        }
    }
    for &s in middle {
        if !live.contains(&s) {
            value[s] = Prob::zero();
        }
    }
    let vars: Vec<StateId> = middle.iter().copied().filter(|s| live.contains(s)).collect();
    if vars.is_empty() {
        return;
    }
    let idx: BTreeMap<StateId, usize> = vars.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let k = vars.len();
    // Rows: v(s) - Σ_{succ var} P v(succ) = Σ_{succ ∈ S1} P.
    let mut mat: Vec<Vec<Prob>> = vec![vec![Prob::zero(); k + 1]; k];
    for (i, &s) in vars.iter().enumerate() {
        mat[i][i] = Prob::one();
        for (succ, p) in m.dist(s, policy[s].unwrap()) {
            if let Some(&j) = idx.get(succ) {
                mat[i][j] -= p.clone();
            } else if s1.contains(succ) {
                mat[i][k] += p.clone();
            }
        }
    }
    gauss_solve(&mut mat);
    for (i, &s) in vars.iter().enumerate() {
        value[s] = mat[i][k].clone();
    }
}

/// In-place Gaussian elimination with partial (first-nonzero) pivoting over
/// exact rationals; the system is known nonsingular.
fn gauss_solve(mat: &mut [Vec<Prob>]) {
    let k = mat.len();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !mat[r][col].is_zero())
            .expect("transient-chain system must be nonsingular");
        mat.swap(col, pivot);
        let p = mat[col][col].clone();
        for c in col..=k {
            mat[col][c] = mat[col][c].clone() / p.clone();
        }
        for r in 0..k {
            if r != col && !mat[r][col].is_zero() {
                let f = mat[r][col].clone();
                for c in col..=k {
                    let sub = f.clone() * mat[col][c].clone();
                    mat[r][c] -= sub;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use num::BigInt;

    #[test]
    fn attractors_on_two_loop_fixture() {
        let (m, _) = fixtures::two_absorbing_loops();
        let sub = m.full_sub();
        let s0 = m.state_index("s0").unwrap();
        let s1 = m.state_index("s1").unwrap();
        let s2 = m.state_index("s2").unwrap();
        assert_eq!(
            attractor_two_player(&m, &sub, &BTreeSet::from([s1])),
            BTreeSet::from([s0, s1])
        );
        assert_eq!(
            attractor_one_player(&m, &sub, &BTreeSet::from([s2])),
            BTreeSet::from([s0, s2])
        );
        // T = all states → all states; T = ∅ → ∅.
        let all: BTreeSet<_> = (0..m.n_states()).collect();
        assert_eq!(attractor_two_player(&m, &sub, &all), all);
        assert_eq!(attractor_one_player(&m, &sub, &BTreeSet::new()), BTreeSet::new());
    }

    #[test]
    fn mecs_on_two_loop_fixture() {
        let (m, _) = fixtures::two_absorbing_loops();
        let mecs = mec_decomposition(&m, &m.full_sub());
        assert_eq!(mecs.len(), 2);
        let carriers: Vec<_> = mecs.iter().map(|ec| ec.states.clone()).collect();
        assert!(carriers.contains(&BTreeSet::from([m.state_index("s1").unwrap()])));
        assert!(carriers.contains(&BTreeSet::from([m.state_index("s2").unwrap()])));
        for ec in &mecs {
            ec.validate(&m).unwrap();
        }
    }

    #[test]
    fn singleton_self_loop_is_a_mec() {
        let m = crate::model::build_mdp(&["s"], &["a"], &[("s", "a", &[("s", 1, 1)])]);
        let mecs = mec_decomposition(&m, &m.full_sub());
        assert_eq!(mecs.len(), 1);
        assert_eq!(mecs[0].states, BTreeSet::from([0]));
    }

    #[test]
    fn almost_sure_reach_excludes_escapable_branch() {
        let (m, _) = fixtures::two_absorbing_loops();
        let s1 = m.state_index("s1").unwrap();
        let r = almost_sure_reach(&m, &m.full_sub(), &BTreeSet::from([s1]));
        assert_eq!(r, BTreeSet::from([m.state_index("s0").unwrap(), s1]));
    }

    #[test]
    fn max_reach_matches_hand_values() {
        let (m, _) = fixtures::two_absorbing_loops();
        let s1 = m.state_index("s1").unwrap();
        let (v, _) = max_reach_prob(&m, &BTreeSet::from([s1]));
        assert!(v[m.state_index("s0").unwrap()].is_one());
        assert!(v[s1].is_one());
        assert!(v[m.state_index("s2").unwrap()].is_zero());
    }

    #[test]
    fn max_reach_solves_middle_states_exactly() {
        // c: a → {t: 1/2, d: 1/2}; d: a → {c: 1/2, sink: 1/2}.
        // v(c) = 1/2 + 1/2 v(d); v(d) = 1/2 v(c) → v(c) = 2/3, v(d) = 1/3.
        let m = crate::model::build_mdp(
            &["c", "d", "t", "x"],
            &["a"],
            &[
                ("c", "a", &[("t", 1, 2), ("d", 1, 2)]),
                ("d", "a", &[("c", 1, 2), ("x", 1, 2)]),
                ("t", "a", &[("t", 1, 1)]),
                ("x", "a", &[("x", 1, 1)]),
            ],
        );
        let (v, _) = max_reach_prob(&m, &BTreeSet::from([2]));
        assert_eq!(v[0], Prob::new(BigInt::from(2), BigInt::from(3)));
        assert_eq!(v[1], Prob::new(BigInt::from(1), BigInt::from(3)));
    }

    #[test]
    fn max_reach_picks_better_action() {
        // s: a → sink, b → {t: 1/3, s: 2/3}. Optimal value 1 via b.
        let m = crate::model::build_mdp(
            &["s", "t", "x"],
            &["a", "b"],
            &[
                ("s", "a", &[("x", 1, 1)]),
                ("s", "b", &[("t", 1, 3), ("s", 2, 3)]),
                ("t", "a", &[("t", 1, 1)]),
                ("x", "a", &[("x", 1, 1)]),
            ],
        );
        let (v, pol) = max_reach_prob(&m, &BTreeSet::from([1]));
        assert!(v[0].is_one());
        assert_eq!(pol[0], Some(1));
    }
}
