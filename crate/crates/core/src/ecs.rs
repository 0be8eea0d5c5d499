//! End-component classification: dominant-even/odd state sets, Type I / II /
//! III end components and their maximal decompositions, the almost-sure
//! conjunction check, and one-player conjunction-of-parity emptiness with
//! lasso witnesses.

use crate::games;
use crate::graphalg::{mec_decomposition, sccs};
use crate::model::{restrict_within, ActionId, EndComponent, Mdp, ParityMap, StateId, SubMdp};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EcError {
    /// The dominant-even target of the tested condition is empty, so the
    /// Type I property cannot hold.
    #[error("dominant-even target is empty")]
    EmptyTarget,
}

/// {s ∈ C | p(s) even ∧ every odd priority in C is below p(s)}: the states
/// a run must gravitate to for the parity to hold while staying in C.
pub fn c_max_even(states: &BTreeSet<StateId>, p: &ParityMap) -> BTreeSet<StateId> {
    let max_odd = states.iter().map(|&s| p.prio[s]).filter(|v| v % 2 == 1).max();
    states
        .iter()
        .copied()
        .filter(|&s| {
            let v = p.prio[s];
            v % 2 == 0 && max_odd.map_or(true, |o| v > o)
        })
        .collect()
}

/// Dual of `c_max_even`: odd states dominating every even priority in C.
pub fn c_max_odd(states: &BTreeSet<StateId>, p: &ParityMap) -> BTreeSet<StateId> {
    let max_even = states.iter().map(|&s| p.prio[s]).filter(|v| v % 2 == 0).max();
    states
        .iter()
        .copied()
        .filter(|&s| {
            let v = p.prio[s];
            v % 2 == 1 && max_even.map_or(true, |e| v > e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeOneAnswer {
    Yes,
    /// Not Type I; the subset of carrier states that do win the defining
    /// objective (used as pruning feedback by the maximal-EC loops).
    No { winners: BTreeSet<StateId> },
}

/// Does every state of C satisfy ⋀_{a∈𝒜} A(p_a) ∧ AS(◇ C^max_even(p_{aᵢ}))
/// within Γ↾C? Decided by the sure-conjunction game plus the Streett-Büchi
/// game with R = the dominant-even set of condition aᵢ; deterministic
/// carriers short-circuit through lasso search.
pub fn is_type_one_for(
    m: &Mdp,
    c: &EndComponent,
    a_conds: &[ParityMap],
    ai: usize,
) -> Result<TypeOneAnswer, EcError> {
    let r = c_max_even(&c.states, &a_conds[ai]);
    if r.is_empty() {
        return Err(EcError::EmptyTarget);
    }
    let sub = c.as_sub();
    let deterministic = c
        .states
        .iter()
        .all(|&s| sub.acts_of(s).all(|a| m.post(s, a).count() == 1));
    if deterministic {
        // Paths and strategies coincide; the carrier is strongly connected,
        // so every state wins iff some all-even-dominant cycle exists (then
        // route through R first, then to the cycle).
        let good = !good_sets(m, &sub, a_conds).is_empty();
        return Ok(if good {
            TypeOneAnswer::Yes
        } else {
            TypeOneAnswer::No { winners: BTreeSet::new() }
        });
    }
    // Sure conjunction within the carrier.
    let (ga, sv) = games::game_of_sub(m, &sub, a_conds);
    let all: Vec<usize> = (0..a_conds.len()).collect();
    let sol_a = games::solve_streett(&ga, &all);
    let w_a: BTreeSet<StateId> = sv
        .iter()
        .filter(|(_, &v)| sol_a.winning.contains(&v))
        .map(|(&s, _)| s)
        .collect();
    // Sure-parity-unless-R plus almost-sure reach of R.
    let (gb, bv) = games::build_streett_buechi_arena(m, &sub, &r, a_conds);
    let sol_b = games::solve_streett_buechi(&gb);
    let w_b: BTreeSet<StateId> = bv
        .iter()
        .filter(|(_, &v)| sol_b.winning.contains(&v))
        .map(|(&s, _)| s)
        .collect();
    let winners: BTreeSet<StateId> = w_a.intersection(&w_b).copied().collect();
    Ok(if winners == c.states {
        TypeOneAnswer::Yes
    } else {
        TypeOneAnswer::No { winners }
    })
}

/// Maximal Type I(𝒜,{aᵢ}) ECs of `sub` whose maximum odd p_{aᵢ} value is at
/// most `k`: decompose into MECs, carve out states with odd p_{aᵢ} above k
/// (dropping actions that touch them and states that deadlock), carve out
/// non-winners of failed Type I checks, and repeat to a fixpoint.
pub fn max_type_one_bounded(
    m: &Mdp,
    sub: &SubMdp,
    a_conds: &[ParityMap],
    ai: usize,
    k: u32,
) -> Vec<EndComponent> {
    assert!(k % 2 == 1, "bound k must be odd");
    let mut work = sub.clone();
    'restart: loop {
        let mecs = mec_decomposition(m, &work);
        for c in &mecs {
            let p = &a_conds[ai];
            let odd_gt: BTreeSet<StateId> = c
                .states
                .iter()
                .copied()
                .filter(|&s| p.prio[s] % 2 == 1 && p.prio[s] > k)
                .collect();
            if !odd_gt.is_empty() {
                let keep: BTreeSet<StateId> =
                    work.states.difference(&odd_gt).copied().collect();
                work = restrict_within(m, &work, &keep);
                continue 'restart;
            }
            let verdict = is_type_one_for(m, c, a_conds, ai)
                .unwrap_or(TypeOneAnswer::No { winners: BTreeSet::new() });
            if let TypeOneAnswer::No { winners } = verdict {
                let losers: BTreeSet<StateId> =
                    c.states.difference(&winners).copied().collect();
                let keep: BTreeSet<StateId> =
                    work.states.difference(&losers).copied().collect();
                work = restrict_within(m, &work, &keep);
                continue 'restart;
            }
        }
        return mecs;
    }
}

/// Maximal Type I(𝒜,{aᵢ}) ECs: inclusion-maximal elements over all odd
/// bounds k up to the maximum p_{aᵢ} value on the carrier (with k = 1
/// alone when every value is zero).
pub fn max_type_one_single(
    m: &Mdp,
    sub: &SubMdp,
    a_conds: &[ParityMap],
    ai: usize,
) -> Vec<EndComponent> {
    let maxp = sub
        .states
        .iter()
        .map(|&s| a_conds[ai].prio[s])
        .max()
        .unwrap_or(0);
    let ks: Vec<u32> = (1..=maxp.max(1)).step_by(2).collect();
    let mut all: Vec<EndComponent> = Vec::new();
    for k in ks {
        for c in max_type_one_bounded(m, sub, a_conds, ai, k) {
            if !all.contains(&c) {
                all.push(c);
            }
        }
    }
    // Inclusion-maximal elements.
    let mut out: Vec<EndComponent> = Vec::new();
    for (i, c) in all.iter().enumerate() {
        let dominated = all.iter().enumerate().any(|(j, d)| {
            j != i
                && c.states.is_subset(&d.states)
                && (c.states != d.states || j < i)
        });
        if !dominated {
            out.push(c.clone());
        }
    }
    out.sort_by(|a, b| a.states.cmp(&b.states));
    out
}

/// Maximal Type I(𝒜,𝒜) ECs: iterate the per-condition maximal
/// decompositions, shrinking the carrier whenever one of them loses states,
/// and restarting until all agree. With 𝒜 = ∅ this is the plain MEC
/// decomposition.
pub fn max_type_one_all(m: &Mdp, sub: &SubMdp, a_conds: &[ParityMap]) -> Vec<EndComponent> {
    if a_conds.is_empty() {
        return mec_decomposition(m, sub);
    }
    let mut work = sub.clone();
    'restart: loop {
        let mut first: Option<Vec<EndComponent>> = None;
        for ai in 0..a_conds.len() {
            let ci = max_type_one_single(m, &work, a_conds, ai);
            let si: BTreeSet<StateId> =
                ci.iter().flat_map(|c| c.states.iter().copied()).collect();
            if si != work.states {
                work = restrict_within(m, &work, &si);
                continue 'restart;
            }
            if first.is_none() {
                first = Some(ci);
            }
        }
        return first.unwrap_or_default();
    }
}

/// Is there a sub-EC D of C in which every condition's dominant-even set is
/// nonempty (so uniform randomization within D almost-surely satisfies all
/// of them)? Returns the witness D. If C itself qualifies it is preferred;
/// otherwise the dominant-odd states are carved out and the sub-ECs tried.
pub fn check_as_conjunction(
    m: &Mdp,
    c: &EndComponent,
    conds: &[&ParityMap],
) -> Option<EndComponent> {
    if conds.iter().all(|p| !c_max_even(&c.states, p).is_empty()) {
        return Some(c.clone());
    }
    let bad: BTreeSet<StateId> =
        conds.iter().flat_map(|p| c_max_odd(&c.states, p)).collect();
    let keep: BTreeSet<StateId> = c.states.difference(&bad).copied().collect();
    if keep.is_empty() {
        return None;
    }
    let shrunk = restrict_within(m, &c.as_sub(), &keep);
    for sub_ec in mec_decomposition(m, &shrunk) {
        if let Some(d) = check_as_conjunction(m, &sub_ec, conds) {
            return Some(d);
        }
    }
    None
}

/// Maximal Type II(𝒜,𝒜𝒮) ECs: the maximal Type I(𝒜,𝒜) ECs that also admit
/// an almost-sure witness for all of 𝒜 ∪ 𝒜𝒮.
pub fn max_type_two(
    m: &Mdp,
    sub: &SubMdp,
    a_conds: &[ParityMap],
    as_conds: &[ParityMap],
) -> Vec<EndComponent> {
    let all: Vec<&ParityMap> = a_conds.iter().chain(as_conds.iter()).collect();
    max_type_one_all(m, sub, a_conds)
        .into_iter()
        .filter(|c| check_as_conjunction(m, c, &all).is_some())
        .collect()
}

/// Union of carriers of ECs satisfying the almost-sure conjunction over
/// 𝒜 ∪ 𝒜𝒮 ∪ {p_nz}. The input must already be restricted to states
/// satisfying the sure/almost-sure combination, which makes the reach part
/// of the Type III property automatic. Since the qualifying property is
/// existential in sub-ECs, a MEC qualifies exactly when any of its sub-ECs
/// does, so the union is over qualifying MECs.
pub fn type_three_union(
    m: &Mdp,
    pruned: &SubMdp,
    a_conds: &[ParityMap],
    as_conds: &[ParityMap],
    p_nz: &ParityMap,
) -> BTreeSet<StateId> {
    let mut all: Vec<&ParityMap> = a_conds.iter().chain(as_conds.iter()).collect();
    all.push(p_nz);
    let mut out = BTreeSet::new();
    for c in mec_decomposition(m, pruned) {
        if check_as_conjunction(m, &c, &all).is_some() {
            out.extend(c.states.iter().copied());
        }
    }
    out
}

/// A single-path witness: stem then repeated cycle, as (state, action)
/// steps.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Lasso {
    pub stem: Vec<(StateId, ActionId)>,
    pub cycle: Vec<(StateId, ActionId)>,
}

/// Does some single path from `s` satisfy every condition? Paths may pick
/// any successor in a support, so this is reachability of a strongly
/// connected set whose maxima are all even; the witness is a stem plus a
/// covering cycle.
pub fn exists_conjunction_parity(
    m: &Mdp,
    conds: &[ParityMap],
    s: StateId,
) -> Option<Lasso> {
    let sub = m.full_sub();
    let goods = good_sets(m, &sub, conds);
    // BFS from s over (state, action, successor) edges to any good set.
    let start_in: Option<&BTreeSet<StateId>> = goods.iter().find(|g| g.contains(&s));
    let mut prev: BTreeMap<StateId, (StateId, ActionId)> = BTreeMap::new();
    let mut reached: Option<(&BTreeSet<StateId>, StateId)> = match start_in {
        Some(g) => Some((g, s)),
        None => None,
    };
    if reached.is_none() {
        let mut queue = VecDeque::from([s]);
        let mut seen = BTreeSet::from([s]);
        'bfs: while let Some(u) = queue.pop_front() {
            for &a in m.enabled(u) {
                for w in m.post(u, a) {
                    if seen.insert(w) {
                        prev.insert(w, (u, a));
                        if let Some(g) = goods.iter().find(|g| g.contains(&w)) {
                            reached = Some((g, w));
                            break 'bfs;
                        }
                        queue.push_back(w);
                    }
                }
            }
        }
    }
    let (g, entry) = reached?;
    let mut stem = Vec::new();
    let mut cur = entry;
    while cur != s {
        let (u, a) = prev[&cur];
        stem.push((u, a));
        cur = u;
    }
    stem.reverse();
    // Covering closed walk of the good set starting at the entry state.
    let verts: Vec<StateId> = g.iter().copied().collect();
    let mut cycle = Vec::new();
    let mut cur = entry;
    for &goal in verts.iter().chain(std::iter::once(&entry)) {
        cycle.extend(state_path_within(m, g, cur, goal));
        cur = goal;
    }
    if cycle.is_empty() {
        let a = m
            .enabled(entry)
            .iter()
            .copied()
            .find(|&a| m.post(entry, a).any(|w| w == entry))
            .expect("good singleton must have a self-loop");
        cycle.push((entry, a));
    }
    Some(Lasso { stem, cycle })
}

/// Strongly connected subsets of `sub` (over path edges, i.e. any successor
/// in a support) in which every condition's maximum priority is even. Found
/// by SCC decomposition with dominant-odd pruning.
pub fn good_sets(m: &Mdp, sub: &SubMdp, conds: &[ParityMap]) -> Vec<BTreeSet<StateId>> {
    let mut out = Vec::new();
    let mut stack: Vec<SubMdp> = vec![sub.clone()];
    while let Some(part) = stack.pop() {
        for comp in sccs(m, &part) {
            let set: BTreeSet<StateId> = comp.iter().copied().collect();
            let cyclic = set.len() > 1 || {
                let s = *set.iter().next().unwrap();
                part.acts_of(s).any(|a| m.post(s, a).any(|w| w == s))
            };
            if !cyclic {
                continue;
            }
            let bad: BTreeSet<StateId> =
                conds.iter().flat_map(|p| c_max_odd(&set, p)).collect();
            if bad.is_empty() {
                out.push(set);
            } else {
                let keep: BTreeSet<StateId> = set.difference(&bad).copied().collect();
                if !keep.is_empty() {
                    // Path semantics: keep every action with at least one
                    // surviving successor.
                    let acts: BTreeMap<StateId, BTreeSet<usize>> = keep
                        .iter()
                        .map(|&s| {
                            let acts: BTreeSet<usize> = part
                                .acts_of(s)
                                .filter(|&a| m.post(s, a).any(|w| keep.contains(&w)))
                                .collect();
                            (s, acts)
                        })
                        .filter(|(_, acts)| !acts.is_empty())
                        .collect();
                    let states: BTreeSet<StateId> = acts.keys().copied().collect();
                    if !states.is_empty() {
                        stack.push(SubMdp { states, acts });
                    }
                }
            }
        }
    }
    out
}

/// Shortest (state, action) path from `from` to `to` inside `set`; empty
/// when they coincide.
fn state_path_within(
    m: &Mdp,
    set: &BTreeSet<StateId>,
    from: StateId,
    to: StateId,
) -> Vec<(StateId, ActionId)> {
    if from == to {
        return Vec::new();
    }
    let mut prev: BTreeMap<StateId, (StateId, ActionId)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &a in m.enabled(u) {
            for w in m.post(u, a) {
                if set.contains(&w) && w != from && !prev.contains_key(&w) {
                    prev.insert(w, (u, a));
                    if w == to {
                        let mut path = Vec::new();
                        let mut cur = to;
                        while cur != from {
                            let (u, a) = prev[&cur];
                            path.push((u, a));
                            cur = u;
                        }
                        path.reverse();
                        return path;
                    }
                    queue.push_back(w);
                }
            }
        }
    }
    panic!("good set must be strongly connected");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::build_mdp;

    fn ec_of(m: &Mdp) -> EndComponent {
        let mecs = mec_decomposition(m, &m.full_sub());
        assert_eq!(mecs.len(), 1, "expected a single MEC");
        mecs.into_iter().next().unwrap()
    }

    #[test]
    fn dominant_even_sets() {
        let (m, conds) = fixtures::alternating_ec();
        // Carrier {s,t,u} with priorities 1,2,4: both evens dominate the 1.
        let all: BTreeSet<_> = (0..m.n_states()).collect();
        let t = m.state_index("t").unwrap();
        let u = m.state_index("u").unwrap();
        assert_eq!(c_max_even(&all, &conds[0]), BTreeSet::from([t, u]));
        // All-even set: everything qualifies.
        let evens = crate::model::ParityMap { name: "e".into(), prio: vec![0, 2, 4] };
        assert_eq!(c_max_even(&all, &evens), all);
        // Figure-6 shape: priorities 1,0,2 → only the 2.
        let (m6, c6) = fixtures::randomized_cycle();
        let all6: BTreeSet<_> = (0..m6.n_states()).collect();
        assert_eq!(
            c_max_even(&all6, &c6[0]),
            BTreeSet::from([m6.state_index("r").unwrap()])
        );
        // Dual.
        assert_eq!(c_max_odd(&all, &conds[0]), BTreeSet::new());
        let odds = crate::model::ParityMap { name: "o".into(), prio: vec![5, 2, 4] };
        assert_eq!(c_max_odd(&all, &odds), BTreeSet::from([0]));
    }

    #[test]
    fn type_one_on_alternating_core() {
        // The {s,t} sub-EC of the alternating fixture (the `a` action at s
        // leaves it): priorities 1,2 → Type I({p},{p}).
        let (m, conds) = fixtures::alternating_ec();
        let mecs = mec_decomposition(&m, &m.full_sub());
        let s = m.state_index("s").unwrap();
        let core = mecs.iter().find(|c| c.states.contains(&s)).unwrap();
        assert_eq!(is_type_one_for(&m, core, &conds, 0), Ok(TypeOneAnswer::Yes));
    }

    #[test]
    fn type_one_rejects_all_odd() {
        let m = build_mdp(&["x"], &["a"], &[("x", "a", &[("x", 1, 1)])]);
        let p = crate::model::ParityMap { name: "p".into(), prio: vec![3] };
        let c = ec_of(&m);
        assert_eq!(is_type_one_for(&m, &c, &[p], 0), Err(EcError::EmptyTarget));
    }

    #[test]
    fn type_one_on_probabilistic_carrier() {
        // Figure-4 carrier with condition p1 only: every state wins by
        // playing `a` at s00 (all p1 values on that loop are even).
        let (m, conds) = fixtures::surely_almost_cycle();
        let c = ec_of(&m);
        assert_eq!(is_type_one_for(&m, &c, &conds[..1], 0), Ok(TypeOneAnswer::Yes));
    }

    #[test]
    fn max_type_one_decomposes_alternating_fixture() {
        // MECs are {s,t} and {u}; both are Type I for the single condition,
        // and both survive with bound k = 1.
        let (m, conds) = fixtures::alternating_ec();
        let ecs = max_type_one_bounded(&m, &m.full_sub(), &conds, 0, 1);
        assert_eq!(ecs.len(), 2);
        let singles = max_type_one_single(&m, &m.full_sub(), &conds, 0);
        assert_eq!(singles.len(), 2);
        let alls = max_type_one_all(&m, &m.full_sub(), &conds);
        assert_eq!(alls.len(), 2);
        for c in &alls {
            c.validate(&m).unwrap();
        }
    }

    #[test]
    fn max_type_one_all_empty_conditions_is_mec_decomposition() {
        let (m, _) = fixtures::two_absorbing_loops();
        let a = max_type_one_all(&m, &m.full_sub(), &[]);
        let b = mec_decomposition(&m, &m.full_sub());
        assert_eq!(a, b);
    }

    #[test]
    fn figure_four_carrier_is_type_one_and_two() {
        let (m, conds) = fixtures::surely_almost_cycle();
        let alls = max_type_one_all(&m, &m.full_sub(), &conds[..1]);
        assert_eq!(alls.len(), 1);
        assert_eq!(alls[0].states.len(), m.n_states(), "whole carrier");
        let twos = max_type_two(&m, &m.full_sub(), &conds[..1], &conds[1..]);
        assert_eq!(twos.len(), 1);
        assert_eq!(twos[0].states.len(), m.n_states());
    }

    #[test]
    fn check_as_on_randomized_cycle() {
        let (m, conds) = fixtures::randomized_cycle();
        let c = ec_of(&m);
        let refs: Vec<&ParityMap> = conds.iter().collect();
        let d = check_as_conjunction(&m, &c, &refs).expect("should hold");
        assert_eq!(d.states, c.states, "whole carrier is the witness");
    }

    #[test]
    fn check_as_rejects_all_odd_condition() {
        let (m, _) = fixtures::randomized_cycle();
        let c = ec_of(&m);
        let p = crate::model::ParityMap { name: "o".into(), prio: vec![1, 3, 1] };
        assert!(check_as_conjunction(&m, &c, &[&p]).is_none());
    }

    #[test]
    fn check_as_recurses_into_sub_ecs() {
        // Carrier where a dominant-odd state must be carved out first:
        // l(1) ↔ c(0) ↔ r(2) with p = [3, 0, 2]: the 3 dominates, but the
        // sub-EC {c, r} has maximum 2.
        let (m, _) = fixtures::randomized_cycle();
        let c = ec_of(&m);
        let p = crate::model::ParityMap { name: "p".into(), prio: vec![3, 0, 2] };
        let d = check_as_conjunction(&m, &c, &[&p]).expect("sub-EC witness");
        let cidx = m.state_index("c").unwrap();
        let ridx = m.state_index("r").unwrap();
        assert_eq!(d.states, BTreeSet::from([cidx, ridx]));
    }

    #[test]
    fn escalating_rounds_type_three_union() {
        let (m, conds) = fixtures::escalating_rounds();
        // Pruned carrier: the whole MDP is one MEC here; the almost-sure
        // conjunction over p1, p2, p3 holds on the full carrier.
        let t3 = type_three_union(&m, &m.full_sub(), &conds[..1], &conds[1..2], &conds[2]);
        for name in ["s", "r111", "q222"] {
            assert!(t3.contains(&m.state_index(name).unwrap()), "{name}");
        }
        // All-odd NZ condition kills it.
        let odd = crate::model::ParityMap { name: "o".into(), prio: vec![1, 1, 1, 1] };
        let t3o = type_three_union(&m, &m.full_sub(), &conds[..1], &conds[1..2], &odd);
        assert!(t3o.is_empty());
    }

    #[test]
    fn exists_conjunction_on_fixtures() {
        // Figure 1: no single path satisfies both conditions from s0.
        let (m1, c1) = fixtures::two_absorbing_loops();
        assert!(exists_conjunction_parity(&m1, &c1, m1.state_index("s0").unwrap()).is_none());
        // Single even self-loop: trivial yes.
        let m = build_mdp(&["x"], &["a"], &[("x", "a", &[("x", 1, 1)])]);
        let p = crate::model::ParityMap { name: "p".into(), prio: vec![2] };
        let l = exists_conjunction_parity(&m, &[p], 0).expect("yes");
        assert!(l.stem.is_empty());
        assert_eq!(l.cycle, vec![(0, 0)]);
        // Figure 4 from s00: the cycle through q11 and q22 works.
        let (m4, c4) = fixtures::surely_almost_cycle();
        let s00 = m4.state_index("s00").unwrap();
        let l4 = exists_conjunction_parity(&m4, &c4, s00).expect("yes");
        let cyc_states: BTreeSet<StateId> = l4.cycle.iter().map(|&(s, _)| s).collect();
        let q22 = m4.state_index("q22").unwrap();
        assert!(cyc_states.contains(&q22));
        // The witness is sound: max priority on the cycle is even for both.
        for cond in &c4 {
            let mx = cyc_states.iter().map(|&s| cond.prio[s]).max().unwrap();
            assert_eq!(mx % 2, 0, "{}", cond.name);
        }
    }

    #[test]
    fn lasso_steps_follow_transitions() {
        let (m, conds) = fixtures::surely_almost_cycle();
        let s00 = m.state_index("s00").unwrap();
        let l = exists_conjunction_parity(&m, &conds, s00).unwrap();
        let mut cur = s00;
        let steps: Vec<_> = l.stem.iter().chain(l.cycle.iter()).copied().collect();
        for (i, &(s, a)) in steps.iter().enumerate() {
            assert_eq!(s, cur, "step {i}");
            let nexts: Vec<StateId> = m.post(s, a).collect();
            let target = if i + 1 < steps.len() { steps[i + 1].0 } else { l.cycle[0].0 };
            assert!(nexts.contains(&target), "step {i} cannot reach {target}");
            cur = target;
        }
    }
}
