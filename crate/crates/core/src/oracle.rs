//! Brute-force reference implementations for small ("desk-scale")
//! instances.
//!
//! Each oracle works directly from the definitions — exhaustive strategy
//! enumeration, subset enumeration, truth tables — and shares no solver code
//! with the main modules, so agreement between an oracle and the production
//! algorithm is meaningful evidence for both. Every oracle refuses instances
//! above its size limit instead of silently slowing down.
//!
//! The game oracles fix one player's positional choices and analyse the
//! residual graph exhaustively:
//!
//! * parity games are positionally determined for both players, so
//!   enumerating player 1's positional strategies and checking every cycle
//!   the opponent can steer into is exact;
//! * in a game whose winning condition is a conjunction of parities,
//!   player 2's complementary objective is a disjunction (a Rabin
//!   condition), for which player 2 has positional optimal strategies.
//!   Enumerating player 2's positional strategies and asking whether some
//!   play of player 1 beats each of them is therefore exact as well —
//!   no memory bound on player 1 is needed, because in the one-player
//!   residual a winning play can be found by cycle search.

#![cfg(feature = "desk-scale")]

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::games::{Arena, Player};
use crate::model::{EndComponent, Mdp, ParityMap, StateId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for the brute-force oracle: {what} is {got}, limit {limit}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        limit: usize,
    },
}

fn check(what: &'static str, got: usize, limit: usize) -> Result<(), OracleError> {
    if got > limit {
        Err(OracleError::SizeLimit { what, got, limit })
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// A tiny owned-graph view of an arena, built here from scratch.
// ---------------------------------------------------------------------------

/// Arena flattened to a node graph: original vertices keep their priority
/// vector; a player-1 move with several successors becomes an auxiliary
/// player-2 node with no priorities (it cannot dominate any cycle, because
/// every cycle passes through a real vertex).
struct Flat {
    owner: Vec<Player>,
    /// Priority vector per node; empty for auxiliary nodes.
    prio: Vec<Vec<u32>>,
    /// For player-1 original vertices: one entry per move (the node the
    /// move leads to). For player-2-controlled nodes: the successor choices.
    out: Vec<Vec<usize>>,
}

fn flatten(a: &Arena) -> Flat {
    let nv = a.verts.len();
    let mut owner: Vec<Player> = a.verts.iter().map(|v| v.owner).collect();
    let mut prio: Vec<Vec<u32>> = a.verts.iter().map(|v| v.prio.clone()).collect();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (vi, v) in a.verts.iter().enumerate() {
        match v.owner {
            Player::P2 => {
                let mut succ = BTreeSet::new();
                for mv in &v.moves {
                    succ.extend(mv.succs.iter().copied());
                }
                out[vi] = succ.into_iter().collect();
            }
            Player::P1 => {
                for mv in &v.moves {
                    if mv.succs.len() == 1 {
                        out[vi].push(mv.succs[0]);
                    } else {
                        let aux = owner.len();
                        owner.push(Player::P2);
                        prio.push(Vec::new());
                        out.push(mv.succs.clone());
                        out[vi].push(aux);
                    }
                }
            }
        }
    }
    Flat { owner, prio, out }
}

/// All assignments choosing one index below `bounds[i]` for each `i`.
fn assignments(bounds: &[usize]) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    for &b in bounds {
        let mut next = Vec::with_capacity(all.len() * b);
        for partial in &all {
            for k in 0..b {
                let mut ext = partial.clone();
                ext.push(k);
                next.push(ext);
            }
        }
        all = next;
    }
    all
}

fn reachable(out: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; out.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for &w in &out[u] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Is the subgraph induced by `set` strongly connected with at least one
/// edge (i.e. does some closed walk visit exactly these nodes)?
fn cyclable(out: &[Vec<usize>], set: &[usize]) -> bool {
    if set.is_empty() {
        return false;
    }
    let member: BTreeSet<usize> = set.iter().copied().collect();
    let step = |from: usize, rev: bool| -> Vec<bool> {
        let mut seen = vec![false; out.len()];
        seen[from] = true;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for &x in &member {
                let edge = if rev {
                    out[x].contains(&u)
                } else {
                    out[u].contains(&x)
                };
                if edge && !seen[x] {
                    seen[x] = true;
                    stack.push(x);
                }
            }
        }
        seen
    };
    let fwd = step(set[0], false);
    let bwd = step(set[0], true);
    if !set.iter().all(|&u| fwd[u] && bwd[u]) {
        return false;
    }
    // A singleton needs a self-loop.
    set.len() > 1 || out[set[0]].contains(&set[0])
}

// ---------------------------------------------------------------------------
// brute_parity_game
// ---------------------------------------------------------------------------

/// Player-1 winning region of a single-condition parity game, by
/// enumerating player-1 positional strategies. For each strategy, player 2
/// wins from `v` exactly when the residual graph has a reachable cycle of
/// odd maximum priority, which a positional player 2 can steer into.
pub fn brute_parity_game(a: &Arena, cond: usize) -> Result<BTreeSet<usize>, OracleError> {
    check("vertices", a.verts.len(), 10)?;
    let flat = flatten(a);
    let n = flat.out.len();
    // Player-1 nodes pick one outgoing edge; everyone else keeps all.
    let p1_nodes: Vec<usize> = (0..n).filter(|&u| flat.owner[u] == Player::P1).collect();
    let bounds: Vec<usize> = p1_nodes.iter().map(|&u| flat.out[u].len()).collect();
    let mut winning = BTreeSet::new();
    'verts: for v in 0..a.verts.len() {
        for choice in assignments(&bounds) {
            let mut out = flat.out.clone();
            for (k, &u) in p1_nodes.iter().enumerate() {
                out[u] = vec![flat.out[u][choice[k]]];
            }
            let seen = reachable(&out, v);
            if !has_odd_cycle(&out, &flat.prio, cond, &seen) {
                winning.insert(v);
                continue 'verts;
            }
        }
    }
    Ok(winning)
}

/// Does the subgraph on `alive` nodes contain a cycle whose maximum
/// priority (in condition `cond`) is odd? Checked per odd priority `d`:
/// restrict to nodes of priority ≤ d and look for a closed walk through a
/// priority-`d` node.
fn has_odd_cycle(out: &[Vec<usize>], prio: &[Vec<u32>], cond: usize, alive: &[bool]) -> bool {
    let n = out.len();
    let pr = |u: usize| prio[u].get(cond).copied().unwrap_or(0);
    let odd_ds: BTreeSet<u32> = (0..n)
        .filter(|&u| alive[u] && !prio[u].is_empty() && pr(u) % 2 == 1)
        .map(pr)
        .collect();
    for d in odd_ds {
        let keep: Vec<usize> = (0..n)
            .filter(|&u| alive[u] && (prio[u].is_empty() || pr(u) <= d))
            .collect();
        // Any closed walk within `keep` through a priority-d node has odd
        // max: search each strongly-connected subset via simple DFS from
        // the d-nodes.
        for &start in keep.iter().filter(|&&u| !prio[u].is_empty() && pr(u) == d) {
            if cycle_through(out, &keep, start) {
                return true;
            }
        }
    }
    false
}

/// Is there a cycle through `start` within the node set `keep`?
fn cycle_through(out: &[Vec<usize>], keep: &[usize], start: usize) -> bool {
    let member: BTreeSet<usize> = keep.iter().copied().collect();
    let mut seen = vec![false; out.len()];
    let mut stack: Vec<usize> = out[start]
        .iter()
        .copied()
        .filter(|w| member.contains(w))
        .collect();
    while let Some(u) = stack.pop() {
        if u == start {
            return true;
        }
        if seen[u] {
            continue;
        }
        seen[u] = true;
        stack.extend(out[u].iter().copied().filter(|w| member.contains(w)));
    }
    false
}

// ---------------------------------------------------------------------------
// brute_streett_game
// ---------------------------------------------------------------------------

/// Player-1 winning region for a conjunction of parity conditions, by
/// enumerating player-2 positional strategies. The `memory_bound` argument
/// is accepted for interface stability but not needed: fixing player 2
/// leaves a one-player graph in which player 1 wins exactly when some
/// reachable closed walk has even maximum priority in every condition, so
/// the answer is exact rather than a lower bound.
pub fn brute_streett_game(
    a: &Arena,
    conds: &[usize],
    _memory_bound: usize,
) -> Result<BTreeSet<usize>, OracleError> {
    check("vertices", a.verts.len(), 6)?;
    let flat = flatten(a);
    let n = flat.out.len();
    check("expanded nodes", n, 16)?;
    let p2_nodes: Vec<usize> = (0..n).filter(|&u| flat.owner[u] == Player::P2).collect();
    let bounds: Vec<usize> = p2_nodes.iter().map(|&u| flat.out[u].len()).collect();
    let subsets = good_subsets(&flat, conds);
    let mut winning = BTreeSet::new();
    'verts: for v in 0..a.verts.len() {
        for choice in assignments(&bounds) {
            let mut out = flat.out.clone();
            for (k, &u) in p2_nodes.iter().enumerate() {
                out[u] = vec![flat.out[u][choice[k]]];
            }
            let seen = reachable(&out, v);
            let ok = subsets.iter().any(|set| {
                set.iter().all(|&u| seen[u]) && cyclable(&out, set)
            });
            if !ok {
                continue 'verts;
            }
        }
        winning.insert(v);
    }
    Ok(winning)
}

/// Node sets whose visited priorities have even maximum in every
/// condition; candidate supports for a winning closed walk.
fn good_subsets(flat: &Flat, conds: &[usize]) -> Vec<Vec<usize>> {
    let n = flat.out.len();
    let mut good = Vec::new();
    for mask in 1u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&u| mask & (1 << u) != 0).collect();
        if set.iter().all(|&u| flat.prio[u].is_empty()) {
            continue;
        }
        let all_even = conds.iter().all(|&c| {
            set.iter()
                .filter(|&&u| !flat.prio[u].is_empty())
                .map(|&u| flat.prio[u][c])
                .max()
                .is_some_and(|m| m % 2 == 0)
        });
        if all_even {
            good.push(set);
        }
    }
    good
}

// ---------------------------------------------------------------------------
// brute_ecs
// ---------------------------------------------------------------------------

/// All end components of the MDP, by enumerating every (carrier,
/// action-set) pair and keeping those that are closed and strongly
/// connected.
pub fn brute_ecs(m: &Mdp) -> Result<Vec<EndComponent>, OracleError> {
    check("states", m.n_states(), 7)?;
    let n = m.n_states();
    let mut ecs = Vec::new();
    for mask in 1u32..(1 << n) {
        let carrier: Vec<StateId> = (0..n).filter(|&s| mask & (1 << s) != 0).collect();
        let inside: BTreeSet<StateId> = carrier.iter().copied().collect();
        // Per state, the enabled actions whose whole support stays inside.
        let closed: Vec<Vec<usize>> = carrier
            .iter()
            .map(|&s| {
                m.enabled(s)
                    .iter()
                    .copied()
                    .filter(|&a| m.post(s, a).all(|t| inside.contains(&t)))
                    .collect()
            })
            .collect();
        if closed.iter().any(|acts| acts.is_empty()) {
            continue;
        }
        // Each state takes a non-empty subset of its closed actions.
        let bounds: Vec<usize> = closed.iter().map(|acts| (1 << acts.len()) - 1).collect();
        for pick in assignments(&bounds) {
            let acts: BTreeMap<StateId, BTreeSet<usize>> = carrier
                .iter()
                .zip(pick.iter())
                .map(|(&s, &k)| {
                    let sel: BTreeSet<usize> = closed[carrier.binary_search(&s).unwrap()]
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| (k + 1) & (1 << i) != 0)
                        .map(|(_, &a)| a)
                        .collect();
                    (s, sel)
                })
                .collect();
            // Strong connectivity of the chosen sub-graph.
            let out: Vec<Vec<usize>> = (0..n)
                .map(|s| {
                    if !inside.contains(&s) {
                        return Vec::new();
                    }
                    let mut succ = BTreeSet::new();
                    for &a in &acts[&s] {
                        succ.extend(m.post(s, a));
                    }
                    succ.into_iter().collect()
                })
                .collect();
            if strongly_connected(&out, &carrier) {
                ecs.push(EndComponent {
                    states: inside.clone(),
                    acts,
                });
            }
        }
    }
    Ok(ecs)
}

/// Strong connectivity of `set` in the graph (singletons count when they
/// have a self-loop or zero... — a one-state end component always has its
/// chosen action looping, which shows up as a self-edge).
fn strongly_connected(out: &[Vec<usize>], set: &[usize]) -> bool {
    if set.len() == 1 {
        return out[set[0]].contains(&set[0]);
    }
    let member: BTreeSet<usize> = set.iter().copied().collect();
    for dir in [false, true] {
        let mut seen: BTreeSet<usize> = [set[0]].into_iter().collect();
        let mut stack = vec![set[0]];
        while let Some(u) = stack.pop() {
            for &x in &member {
                let edge = if dir {
                    out[x].contains(&u)
                } else {
                    out[u].contains(&x)
                };
                if edge && seen.insert(x) {
                    stack.push(x);
                }
            }
        }
        if seen.len() != set.len() {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// brute_lasso
// ---------------------------------------------------------------------------

/// Is there a single path from `s` whose limit satisfies every condition?
/// Paths may follow any successor in a support, so the question reduces to
/// reaching a closed walk whose visited set has even maximum priority in
/// every condition. Checked by enumerating candidate vertex sets.
pub fn brute_lasso(m: &Mdp, s: StateId, conds: &[ParityMap]) -> Result<bool, OracleError> {
    check("states", m.n_states(), 8)?;
    let n = m.n_states();
    let out: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut succ = BTreeSet::new();
            for &a in m.enabled(u) {
                succ.extend(m.post(u, a));
            }
            succ.into_iter().collect()
        })
        .collect();
    let seen = reachable(&out, s);
    for mask in 1u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&u| mask & (1 << u) != 0).collect();
        if !set.iter().all(|&u| seen[u]) {
            continue;
        }
        if !cyclable(&out, &set) {
            continue;
        }
        if conds
            .iter()
            .all(|p| set.iter().map(|&u| p.prio[u]).max().unwrap() % 2 == 0)
        {
            return Ok(true);
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// truth_table_sat
// ---------------------------------------------------------------------------

/// Exhaustive CNF satisfiability. Clauses hold DIMACS-style literals:
/// `+i` for variable `i`, `-i` for its negation, variables numbered from 1.
pub fn truth_table_sat(n_vars: usize, cnf: &[Vec<i32>]) -> Result<bool, OracleError> {
    check("variables", n_vars, 20)?;
    for val in 0u64..(1 << n_vars) {
        let holds = cnf.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize - 1;
                let bit = val & (1 << v) != 0;
                if lit > 0 {
                    bit
                } else {
                    !bit
                }
            })
        });
        if holds {
            return Ok(true);
        }
    }
    Ok(false)
}
