//! Two-player games on and-or arenas: Zielonka parity solving, Streett
//! (conjunction-of-parity) solving via the index-appearance-record
//! reduction, and the Streett-Büchi arena used for sure-parity /
//! almost-sure-reachability objectives.
//!
//! Arena semantics: player 1 picks a move (an action label); player 2
//! resolves branching among the successors sharing that label. A vertex
//! owned by player 2 carries a single move whose successor list player 2
//! chooses from freely.

use crate::model::{Mdp, ParityMap, StateId, SubMdp};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Player {
    P1,
    P2,
}

#[derive(Debug, Clone)]
pub struct Move {
    pub label: String,
    pub succs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub name: String,
    pub owner: Player,
    /// One priority per condition of the arena.
    pub prio: Vec<u32>,
    pub moves: Vec<Move>,
}

#[derive(Debug, Clone)]
pub struct Arena {
    pub verts: Vec<Vertex>,
    pub n_conds: usize,
    pub buechi: Option<BTreeSet<usize>>,
}

impl Arena {
    /// Every vertex must have a move, every move a successor, and priority
    /// vectors must be total.
    pub fn validate(&self) {
        for (i, v) in self.verts.iter().enumerate() {
            assert!(!v.moves.is_empty(), "vertex {i} has no move");
            assert_eq!(v.prio.len(), self.n_conds, "vertex {i} priority vector");
            for mv in &v.moves {
                assert!(!mv.succs.is_empty(), "vertex {i} move {} empty", mv.label);
                for &w in &mv.succs {
                    assert!(w < self.verts.len(), "vertex {i} dangling edge");
                }
            }
        }
    }

    /// True when player 2 never has a real choice: every move has a single
    /// successor and player-2 vertices have a single move.
    pub fn is_one_player(&self) -> bool {
        self.verts.iter().all(|v| {
            v.moves.iter().all(|mv| mv.succs.len() == 1)
                && (v.owner == Player::P1 || v.moves.len() == 1)
        })
    }
}

/// A finite-memory player-1 strategy for an arena: a Mealy machine whose
/// mode advances on the vertex the play arrives at.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GameStrategy {
    pub n_modes: usize,
    /// Starting mode per arena vertex (winning vertices only).
    pub init: BTreeMap<usize, usize>,
    /// (mode, player-1 vertex) → chosen move index.
    pub act: BTreeMap<(usize, usize), usize>,
    /// (mode, arrived vertex) → next mode.
    pub next: BTreeMap<(usize, usize), usize>,
}

impl GameStrategy {
    pub fn memoryless(init_verts: &BTreeSet<usize>, act: &BTreeMap<usize, usize>) -> Self {
        GameStrategy {
            n_modes: 1,
            init: init_verts.iter().map(|&v| (v, 0)).collect(),
            act: act.iter().map(|(&v, &mv)| ((0, v), mv)).collect(),
            next: BTreeMap::new(),
        }
    }

    pub fn advance(&self, mode: usize, arrived: usize) -> usize {
        *self.next.get(&(mode, arrived)).unwrap_or(&mode)
    }
}

#[derive(Debug, Clone)]
pub struct StreettSolution {
    pub winning: BTreeSet<usize>,
    pub strategy: GameStrategy,
}

/// The turn-based game of an MDP: player-1 vertices are the states (they
/// pick an action), player-2 vertices are the enabled (state, action) pairs
/// (they pick any successor in the support). Priorities are inherited from
/// the state component; pair vertices repeat their state's priorities,
/// which leaves every limit behavior unchanged.
pub fn game_of_mdp(m: &Mdp, conds: &[ParityMap]) -> (Arena, Vec<usize>) {
    let (a, sv) = game_of_sub(m, &m.full_sub(), conds);
    let verts = (0..m.n_states()).map(|s| sv[&s]).collect();
    (a, verts)
}

/// As `game_of_mdp`, restricted to a sub-MDP; returns the vertex of each
/// sub-MDP state.
pub fn game_of_sub(
    m: &Mdp,
    sub: &SubMdp,
    conds: &[ParityMap],
) -> (Arena, BTreeMap<StateId, usize>) {
    let mut verts: Vec<Vertex> = Vec::new();
    let mut state_vert: BTreeMap<StateId, usize> = BTreeMap::new();
    for &s in &sub.states {
        state_vert.insert(s, verts.len());
        verts.push(Vertex {
            name: m.state_names[s].clone(),
            owner: Player::P1,
            prio: conds.iter().map(|c| c.prio[s]).collect(),
            moves: Vec::new(),
        });
    }
    let mut pair_idx: BTreeMap<(StateId, usize), usize> = BTreeMap::new();
    for &s in &sub.states {
        for a in sub.acts_of(s) {
            let idx = verts.len();
            pair_idx.insert((s, a), idx);
            verts.push(Vertex {
                name: format!("({},{})", m.state_names[s], m.action_names[a]),
                owner: Player::P2,
                prio: conds.iter().map(|c| c.prio[s]).collect(),
                moves: vec![Move {
                    label: m.action_names[a].clone(),
                    succs: m.post(s, a).map(|t| state_vert[&t]).collect(),
                }],
            });
        }
    }
    for &s in &sub.states {
        verts[state_vert[&s]].moves = sub
            .acts_of(s)
            .map(|a| Move {
                label: m.action_names[a].clone(),
                succs: vec![pair_idx[&(s, a)]],
            })
            .collect();
    }
    let arena = Arena { verts, n_conds: conds.len(), buechi: None };
    arena.validate();
    (arena, state_vert)
}

/// The Streett-Büchi arena for "each parity surely (unless R is reached)
/// and R reached": vertices are the sub-MDP states plus, for each non-R
/// state and enabled action, a Büchi copy (s,a,0) where player 2 resolves
/// the probabilistic branching and a free copy (s,a,1) where player 1 picks
/// the successor via fresh per-successor labels. R is absorbing with
/// priority 0 everywhere and belongs to the Büchi set together with the
/// (s,a,0) copies. Returns the arena and the vertex index of each sub-MDP
/// state.
pub fn build_streett_buechi_arena(
    m: &Mdp,
    sub: &SubMdp,
    r: &BTreeSet<StateId>,
    conds: &[ParityMap],
) -> (Arena, BTreeMap<StateId, usize>) {
    let (arena, state_vert, _) = build_streett_buechi_arena_full(m, sub, r, conds);
    (arena, state_vert)
}

/// As [`build_streett_buechi_arena`], also returning the vertex index of
/// each copy `(state, action, bit)`, which strategy read-back needs.
#[allow(clippy::type_complexity)]
pub fn build_streett_buechi_arena_full(
    m: &Mdp,
    sub: &SubMdp,
    r: &BTreeSet<StateId>,
    conds: &[ParityMap],
) -> (Arena, BTreeMap<StateId, usize>, BTreeMap<(StateId, usize, u8), usize>) {
    let mut verts: Vec<Vertex> = Vec::new();
    let mut state_vert: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut buechi: BTreeSet<usize> = BTreeSet::new();
    for &s in &sub.states {
        let idx = verts.len();
        state_vert.insert(s, idx);
        let in_r = r.contains(&s);
        verts.push(Vertex {
            name: m.state_names[s].clone(),
            owner: Player::P1,
            prio: if in_r {
                vec![0; conds.len()]
            } else {
                conds.iter().map(|c| c.prio[s]).collect()
            },
            moves: Vec::new(),
        });
        if in_r {
            buechi.insert(idx);
        }
    }
    // Copies, then wire moves.
    let mut copy_idx: BTreeMap<(StateId, usize, u8), usize> = BTreeMap::new();
    for &s in &sub.states {
        if r.contains(&s) {
            continue;
        }
        for a in sub.acts_of(s) {
            for bit in [0u8, 1u8] {
                let idx = verts.len();
                copy_idx.insert((s, a, bit), idx);
                verts.push(Vertex {
                    name: format!("({},{},{bit})", m.state_names[s], m.action_names[a]),
                    owner: Player::P1,
                    prio: vec![0; conds.len()],
                    moves: Vec::new(),
                });
                if bit == 0 {
                    buechi.insert(idx);
                }
            }
        }
    }
    for &s in &sub.states {
        let sv = state_vert[&s];
        if r.contains(&s) {
            verts[sv].moves = vec![Move { label: "stay".into(), succs: vec![sv] }];
            continue;
        }
        let mut moves = Vec::new();
        for a in sub.acts_of(s) {
            // Player 2 chooses between the Büchi copy and the free copy.
            moves.push(Move {
                label: m.action_names[a].clone(),
                succs: vec![copy_idx[&(s, a, 0)], copy_idx[&(s, a, 1)]],
            });
            let succs: Vec<usize> = m.post(s, a).map(|t| state_vert[&t]).collect();
            verts[copy_idx[&(s, a, 0)]].moves = vec![Move {
                label: m.action_names[a].clone(),
                succs: succs.clone(),
            }];
            verts[copy_idx[&(s, a, 1)]].moves = m
                .post(s, a)
                .map(|t| Move {
                    label: format!("{}@{}", m.action_names[a], m.state_names[t]),
                    succs: vec![state_vert[&t]],
                })
                .collect();
        }
        verts[sv].moves = moves;
    }
    let arena = Arena { verts, n_conds: conds.len(), buechi: Some(buechi) };
    arena.validate();
    (arena, state_vert, copy_idx)
}

// ---------------------------------------------------------------------------
// Expansion of an arena into a plain owned graph for the solvers.
// ---------------------------------------------------------------------------

struct Expanded {
    owner: Vec<Player>,
    adj: Vec<Vec<usize>>,
    /// Arena vertex whose priorities the node emits; None for inserted
    /// move-resolution nodes (they emit nothing).
    emits: Vec<Option<usize>>,
    /// Node of each arena vertex.
    vert_node: Vec<usize>,
    /// (player-1 vertex node, successor node) → move index, for strategy
    /// read-back.
    edge_move: BTreeMap<(usize, usize), usize>,
}

fn expand(a: &Arena) -> Expanded {
    let nv = a.verts.len();
    let mut owner: Vec<Player> = a.verts.iter().map(|v| v.owner).collect();
    let mut emits: Vec<Option<usize>> = (0..nv).map(Some).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut edge_move = BTreeMap::new();
    for (vi, v) in a.verts.iter().enumerate() {
        match v.owner {
            Player::P2 => {
                let mut out: BTreeSet<usize> = BTreeSet::new();
                for mv in &v.moves {
                    out.extend(mv.succs.iter().copied());
                }
                adj[vi] = out.into_iter().collect();
            }
            Player::P1 => {
                for (mi, mv) in v.moves.iter().enumerate() {
                    let target = if mv.succs.len() == 1 {
                        mv.succs[0]
                    } else {
                        // Intermediate node where player 2 resolves the move.
                        let t = owner.len();
                        owner.push(Player::P2);
                        emits.push(None);
                        adj.push(mv.succs.clone());
                        t
                    };
                    if !adj[vi].contains(&target) {
                        adj[vi].push(target);
                        edge_move.insert((vi, target), mi);
                    }
                }
            }
        }
    }
    Expanded { owner, adj, emits, vert_node: (0..nv).collect(), edge_move }
}

// ---------------------------------------------------------------------------
// Zielonka on owned graphs.
// ---------------------------------------------------------------------------

/// Attractor of `target` for `p` within `alive`; also returns the
/// attractor strategy for `p`-owned nodes outside the target.
fn graph_attr(
    owner: &[Player],
    adj: &[Vec<usize>],
    alive: &[bool],
    target: &[bool],
    p: Player,
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = owner.len();
    let mut in_attr = vec![false; n];
    let mut strat = vec![None; n];
    let mut cnt = vec![0usize; n];
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for u in 0..n {
        if !alive[u] {
            continue;
        }
        for &w in &adj[u] {
            if alive[w] {
                cnt[u] += 1;
                radj[w].push(u);
            }
        }
    }
    let mut queue: VecDeque<usize> = VecDeque::new();
    for u in 0..n {
        if alive[u] && target[u] {
            in_attr[u] = true;
            queue.push_back(u);
        }
    }
    while let Some(w) = queue.pop_front() {
        for &u in &radj[w] {
            if in_attr[u] {
                continue;
            }
            if owner[u] == p {
                in_attr[u] = true;
                strat[u] = Some(w);
                queue.push_back(u);
            } else {
                cnt[u] -= 1;
                if cnt[u] == 0 {
                    in_attr[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    (in_attr, strat)
}

/// Zielonka's recursive parity solver. Player 1 wins a play iff the maximum
/// priority seen infinitely often is even. Returns the player-1 winning set
/// and, for each node whose owner wins it, a positional choice.
fn zielonka(
    owner: &[Player],
    prio: &[u32],
    adj: &[Vec<usize>],
    alive: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = owner.len();
    let mut p1_wins = vec![false; n];
    let mut strat = vec![None; n];
    if !alive.iter().any(|&b| b) {
        return (p1_wins, strat);
    }
    let d = (0..n).filter(|&u| alive[u]).map(|u| prio[u]).max().unwrap();
    let fav = if d % 2 == 0 { Player::P1 } else { Player::P2 };
    let target: Vec<bool> = (0..n).map(|u| alive[u] && prio[u] == d).collect();
    let (attr, astrat) = graph_attr(owner, adj, alive, &target, fav);
    let rest: Vec<bool> = (0..n).map(|u| alive[u] && !attr[u]).collect();
    let (sub_p1, sub_strat) = zielonka(owner, prio, adj, &rest);
    let opp_nonempty = (0..n).any(|u| {
        rest[u] && (sub_p1[u] == (fav == Player::P2)) // won by fav's opponent
    });
    if !opp_nonempty {
        for u in 0..n {
            if !alive[u] {
                continue;
            }
            p1_wins[u] = fav == Player::P1;
            if rest[u] {
                strat[u] = sub_strat[u];
            } else if owner[u] == fav {
                strat[u] = if target[u] {
                    // Any move staying inside the subgame.
                    adj[u].iter().copied().find(|&w| alive[w])
                } else {
                    astrat[u]
                };
            }
        }
        return (p1_wins, strat);
    }
    let opp = if fav == Player::P1 { Player::P2 } else { Player::P1 };
    let opp_region: Vec<bool> =
        (0..n).map(|u| rest[u] && (sub_p1[u] == (opp == Player::P1))).collect();
    let (battr, bstrat) = graph_attr(owner, adj, alive, &opp_region, opp);
    let remain: Vec<bool> = (0..n).map(|u| alive[u] && !battr[u]).collect();
    let (fin_p1, fin_strat) = zielonka(owner, prio, adj, &remain);
    for u in 0..n {
        if !alive[u] {
            continue;
        }
        if remain[u] {
            p1_wins[u] = fin_p1[u];
            strat[u] = fin_strat[u];
        } else {
            p1_wins[u] = opp == Player::P1;
            if owner[u] == opp {
                strat[u] = if opp_region[u] { sub_strat[u] } else { bstrat[u] };
            }
        }
    }
    (p1_wins, strat)
}

/// Solve the arena for a single parity condition. Returns the player-1
/// winning vertex set and a positional move choice on it.
pub fn solve_parity(a: &Arena, cond: usize) -> (BTreeSet<usize>, BTreeMap<usize, usize>) {
    a.validate();
    let ex = expand(a);
    let prio: Vec<u32> = ex
        .emits
        .iter()
        .map(|e| e.map(|v| a.verts[v].prio[cond]).unwrap_or(0))
        .collect();
    let alive = vec![true; ex.owner.len()];
    let (p1, strat) = zielonka(&ex.owner, &prio, &ex.adj, &alive);
    let mut winning = BTreeSet::new();
    let mut act = BTreeMap::new();
    for (v, &node) in ex.vert_node.iter().enumerate() {
        if p1[node] {
            winning.insert(v);
            if a.verts[v].owner == Player::P1 {
                if let Some(succ) = strat[node] {
                    act.insert(v, ex.edge_move[&(node, succ)]);
                }
            }
        }
    }
    (winning, act)
}

// ---------------------------------------------------------------------------
// Streett pairs and the index-appearance-record reduction.
// ---------------------------------------------------------------------------

/// One Streett pair over arena vertices: if E is visited infinitely often,
/// F must be too.
struct Pair {
    e: Vec<bool>,
    f: Vec<bool>,
}

/// A parity condition "max infinitely-often priority is even" as Streett
/// pairs: for each odd priority d it uses, E = {priority d}, F = {even
/// priority > d}.
fn pairs_of_condition(a: &Arena, cond: usize) -> Vec<Pair> {
    let nv = a.verts.len();
    let odds: BTreeSet<u32> =
        a.verts.iter().map(|v| v.prio[cond]).filter(|p| p % 2 == 1).collect();
    odds.into_iter()
        .map(|d| Pair {
            e: (0..nv).map(|v| a.verts[v].prio[cond] == d).collect(),
            f: (0..nv)
                .map(|v| {
                    let p = a.verts[v].prio[cond];
                    p % 2 == 0 && p > d
                })
                .collect(),
        })
        .collect()
}

/// The Büchi set as a two-priority parity condition (2 inside, 1 outside),
/// i.e. the single Streett pair (everything outside B, B).
fn pair_of_buechi(a: &Arena, b: &BTreeSet<usize>) -> Pair {
    let nv = a.verts.len();
    Pair {
        e: (0..nv).map(|v| !b.contains(&v)).collect(),
        f: (0..nv).map(|v| b.contains(&v)).collect(),
    }
}

/// Product state of the index-appearance-record reduction: an expanded-graph
/// node, the record (a permutation of pair indices, front first), and the
/// latest hit positions (f, e) that determine the emitted priority
/// max(2f, 2e−1).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct IarKey {
    node: usize,
    record: Vec<u8>,
    f: u8,
    e: u8,
}

fn iar_step(ex: &Expanded, pairs: &[Pair], record: &[u8], node: usize) -> (Vec<u8>, u8, u8) {
    let Some(v) = ex.emits[node] else {
        return (record.to_vec(), 0, 0);
    };
    let mut f = 0u8;
    let mut e = 0u8;
    let mut front: Vec<u8> = Vec::new();
    let mut back: Vec<u8> = Vec::new();
    for (pos, &j) in record.iter().enumerate() {
        let pos1 = (pos + 1) as u8;
        if pairs[j as usize].f[v] {
            f = f.max(pos1);
            front.push(j);
        } else {
            back.push(j);
        }
        if pairs[j as usize].e[v] {
            e = e.max(pos1);
        }
    }
    front.extend(back);
    (front, f, e)
}

fn iar_priority(f: u8, e: u8) -> u32 {
    let pf = 2 * f as u32;
    let pe = if e > 0 { 2 * e as u32 - 1 } else { 0 };
    pf.max(pe)
}

/// Solve the conjunction of the selected parity conditions (optionally plus
/// the Büchi set) via the index-appearance-record product. Exponential in
/// the number of pairs; desk-scale inputs keep those small.
fn solve_streett_pairs(a: &Arena, pairs: Vec<Pair>) -> StreettSolution {
    let ex = expand(a);
    if pairs.is_empty() {
        // Trivially winning everywhere; any closed move does.
        let winning: BTreeSet<usize> = (0..a.verts.len()).collect();
        let act = (0..a.verts.len())
            .filter(|&v| a.verts[v].owner == Player::P1)
            .map(|v| (v, 0))
            .collect();
        return StreettSolution {
            winning: winning.clone(),
            strategy: GameStrategy::memoryless(&winning, &act),
        };
    }
    let m = pairs.len();
    let id_record: Vec<u8> = (0..m as u8).collect();

    // Lazy product construction from every arena vertex with the identity
    // record.
    let mut keys: Vec<IarKey> = Vec::new();
    let mut index: BTreeMap<IarKey, usize> = BTreeMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut init_of_vert: BTreeMap<usize, usize> = BTreeMap::new();
    for (v, &node) in ex.vert_node.iter().enumerate() {
        let key = IarKey { node, record: id_record.clone(), f: 0, e: 0 };
        let idx = *index.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            queue.push_back(keys.len() - 1);
            keys.len() - 1
        });
        init_of_vert.insert(v, idx);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); keys.len()];
    while let Some(i) = queue.pop_front() {
        let (node, record) = (keys[i].node, keys[i].record.clone());
        let succs: Vec<usize> = ex.adj[node]
            .iter()
            .map(|&w| {
                let (r2, f, e) = iar_step(&ex, &pairs, &record, w);
                let key = IarKey { node: w, record: r2, f, e };
                *index.entry(key.clone()).or_insert_with(|| {
                    keys.push(key);
                    adj.push(Vec::new());
                    queue.push_back(keys.len() - 1);
                    keys.len() - 1
                })
            })
            .collect();
        adj[i] = succs;
    }
    let owner: Vec<Player> = keys.iter().map(|k| ex.owner[k.node]).collect();
    let prio: Vec<u32> = keys.iter().map(|k| iar_priority(k.f, k.e)).collect();
    let alive = vec![true; keys.len()];
    let (p1, strat) = zielonka(&owner, &prio, &adj, &alive);

    // Winning arena vertices: identity-record entry points won by player 1.
    let mut winning = BTreeSet::new();
    for (&v, &idx) in &init_of_vert {
        if p1[idx] {
            winning.insert(v);
        }
    }

    // Mealy read-back. Modes are the product states whose node is an arena
    // vertex; the move at a player-1 mode comes from the positional product
    // strategy (through the inserted move node if the move branches), and
    // the mode advances deterministically on the arrived vertex.
    let mut mode_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut modes: Vec<usize> = Vec::new(); // product index per mode
    let mut get_mode = |idx: usize, modes: &mut Vec<usize>, mode_of: &mut BTreeMap<usize, usize>| {
        *mode_of.entry(idx).or_insert_with(|| {
            modes.push(idx);
            modes.len() - 1
        })
    };
    let mut init = BTreeMap::new();
    for (&v, &idx) in &init_of_vert {
        if p1[idx] {
            init.insert(v, get_mode(idx, &mut modes, &mut mode_of));
        }
    }
    let mut act = BTreeMap::new();
    let mut next = BTreeMap::new();
    let mut mi = 0usize;
    while mi < modes.len() {
        let idx = modes[mi];
        let key_node = keys[idx].node;
        let v = ex.emits[key_node].expect("modes live on arena vertices");
        let record = keys[idx].record.clone();
        if a.verts[v].owner == Player::P1 && p1[idx] {
            if let Some(succ) = strat[idx] {
                let succ_node = keys[succ].node;
                act.insert((mi, v), ex.edge_move[&(key_node, succ_node)]);
            }
        }
        // Mode advance on every vertex the play could arrive at next.
        let arrivals: BTreeSet<usize> = a.verts[v]
            .moves
            .iter()
            .flat_map(|mv| mv.succs.iter().copied())
            .collect();
        for w in arrivals {
            let w_node = ex.vert_node[w];
            let (r2, f, e) = iar_step(&ex, &pairs, &record, w_node);
            let key = IarKey { node: w_node, record: r2, f, e };
            if let Some(&widx) = index.get(&key) {
                let wm = get_mode(widx, &mut modes, &mut mode_of);
                next.insert((mi, w), wm);
            }
        }
        mi += 1;
    }
    StreettSolution {
        winning,
        strategy: GameStrategy { n_modes: modes.len(), init, act, next },
    }
}

/// Solve the conjunction of the given parity conditions of the arena.
/// One condition goes straight to the parity solver; one-player arenas go
/// through lasso search; otherwise the index-appearance-record product.
pub fn solve_streett(a: &Arena, conds: &[usize]) -> StreettSolution {
    solve_streett_opt(a, conds, false)
}

/// As [`solve_streett`], but with the shortcut routes (single condition,
/// one-player arena) optionally disabled so that the full record product is
/// exercised even on instances where a cheaper route exists.
pub fn solve_streett_opt(a: &Arena, conds: &[usize], force_product: bool) -> StreettSolution {
    a.validate();
    if !force_product && conds.len() == 1 && a.buechi.is_none() {
        let (winning, act) = solve_parity(a, conds[0]);
        return StreettSolution {
            winning: winning.clone(),
            strategy: GameStrategy::memoryless(&winning, &act),
        };
    }
    let mut pairs: Vec<Pair> = Vec::new();
    for &c in conds {
        pairs.extend(pairs_of_condition(a, c));
    }
    if !force_product && a.is_one_player() {
        return solve_one_player(a, &pairs, None);
    }
    solve_streett_pairs(a, pairs)
}

/// Solve (conjunction of all parity conditions) ∧ Büchi on an arena with a
/// Büchi set, by folding the Büchi set in as a two-priority condition.
pub fn solve_streett_buechi(a: &Arena) -> StreettSolution {
    solve_streett_buechi_opt(a, false)
}

/// As [`solve_streett_buechi`], optionally forcing the record product.
pub fn solve_streett_buechi_opt(a: &Arena, force_product: bool) -> StreettSolution {
    a.validate();
    let b = a.buechi.as_ref().expect("arena must carry a Büchi set");
    let mut pairs: Vec<Pair> = Vec::new();
    for c in 0..a.n_conds {
        pairs.extend(pairs_of_condition(a, c));
    }
    pairs.push(pair_of_buechi(a, b));
    if !force_product && a.is_one_player() {
        return solve_one_player(a, &pairs, Some(b));
    }
    solve_streett_pairs(a, pairs)
}

// ---------------------------------------------------------------------------
// One-player fast path: lasso search on the move graph.
// ---------------------------------------------------------------------------

/// On a one-player arena the conjunction holds iff some reachable
/// strongly-connected vertex set is "good": every pair with E present also
/// has F present (hence every condition's maximum is even and the Büchi set
/// is touched). Good sets are found by pruning: drop the E-only offenders
/// of a bad SCC and redecompose.
fn solve_one_player(a: &Arena, pairs: &[Pair], _b: Option<&BTreeSet<usize>>) -> StreettSolution {
    let nv = a.verts.len();
    let succ_of = |v: usize, mv: usize| a.verts[v].moves[mv].succs[0];
    let out: Vec<Vec<usize>> =
        (0..nv).map(|v| (0..a.verts[v].moves.len()).map(|mv| succ_of(v, mv)).collect()).collect();

    // Good strongly-connected subsets, by pruning bad E-states.
    let mut good_sets: Vec<BTreeSet<usize>> = Vec::new();
    let mut stack: Vec<BTreeSet<usize>> = vec![(0..nv).collect()];
    while let Some(set) = stack.pop() {
        for comp in scc_within(&out, &set) {
            // Only cyclic components count: a single vertex needs a self-loop.
            let has_cycle =
                comp.len() > 1 || out[*comp.iter().next().unwrap()].contains(comp.iter().next().unwrap());
            if !has_cycle {
                continue;
            }
            let offenders: BTreeSet<usize> = comp
                .iter()
                .copied()
                .filter(|&v| {
                    pairs.iter().any(|p| p.e[v] && !comp.iter().any(|&w| p.f[w]))
                })
                .collect();
            if offenders.is_empty() {
                good_sets.push(comp);
            } else {
                let rest: BTreeSet<usize> =
                    comp.difference(&offenders).copied().collect();
                if !rest.is_empty() {
                    stack.push(rest);
                }
            }
        }
    }

    // Winning vertices: those that can reach some good set.
    let anchors: Vec<usize> =
        good_sets.iter().map(|g| *g.iter().next().unwrap()).collect();
    let anchor_set: BTreeSet<usize> = anchors.iter().copied().collect();
    let mut dist = vec![usize::MAX; nv];
    let mut hop: Vec<Option<usize>> = vec![None; nv]; // move index toward nearest anchor
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &t in &anchor_set {
        dist[t] = 0;
        queue.push_back(t);
    }
    // Backward BFS over (v, move) edges.
    let mut rev: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for v in 0..nv {
        for (mv, &w) in out[v].iter().enumerate() {
            rev[w].push((v, mv));
        }
    }
    while let Some(w) = queue.pop_front() {
        for &(v, mv) in &rev[w] {
            if dist[v] == usize::MAX {
                dist[v] = dist[w] + 1;
                hop[v] = Some(mv);
                queue.push_back(v);
            }
        }
    }
    let winning: BTreeSet<usize> = (0..nv).filter(|&v| dist[v] != usize::MAX).collect();

    // Modes: 0 = stem (route to the nearest anchor); then one block of
    // covering-walk positions per good set. Arriving at an anchor switches
    // into its walk.
    let mut init = BTreeMap::new();
    let mut act = BTreeMap::new();
    let mut next = BTreeMap::new();
    let mut n_modes = 1usize;
    let mut anchor_base: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in &winning {
        if let Some(mv) = hop[v] {
            act.insert((0usize, v), mv);
        }
    }
    for (gi, g) in good_sets.iter().enumerate() {
        // Closed covering walk of the good set: chain shortest paths
        // through all its vertices and back, using only in-set moves.
        let anchor = anchors[gi];
        let mut walk: Vec<(usize, usize)> = Vec::new(); // (vertex, move)
        let verts: Vec<usize> = g.iter().copied().collect();
        let mut cur = anchor;
        for &goal in verts.iter().chain(std::iter::once(&anchor)) {
            walk.extend(path_within(&out, g, cur, goal));
            cur = goal;
        }
        if walk.is_empty() {
            // Single vertex with a self-loop.
            let mv = out[anchor].iter().position(|&w| w == anchor).unwrap();
            walk.push((anchor, mv));
        }
        let base = n_modes;
        n_modes += walk.len();
        for (i, &(v, mv)) in walk.iter().enumerate() {
            let mode = base + i;
            act.insert((mode, v), mv);
            let arrive = succ_of(v, mv);
            let target_mode = if i + 1 < walk.len() { mode + 1 } else { base };
            next.insert((mode, arrive), target_mode);
        }
        // Entering the anchor from the stem starts the walk.
        next.insert((0usize, anchor), base);
        anchor_base.insert(anchor, base);
    }
    // Plays begin without having "arrived" anywhere, so anchors start
    // directly in their walk mode.
    for &v in &winning {
        init.insert(v, anchor_base.get(&v).copied().unwrap_or(0));
    }
    StreettSolution {
        winning,
        strategy: GameStrategy { n_modes, init, act, next },
    }
}

/// SCCs of the move graph restricted to `set`.
fn scc_within(out: &[Vec<usize>], set: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    // Kosaraju on the restricted graph.
    let nodes: Vec<usize> = set.iter().copied().collect();
    let pos: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = nodes.len();
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&v| out[v].iter().filter_map(|w| pos.get(w).copied()).collect())
        .collect();
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, ws) in adj.iter().enumerate() {
        for &w in ws {
            radj[w].push(u);
        }
    }
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    for r in 0..n {
        if seen[r] {
            continue;
        }
        let mut st = vec![(r, 0usize)];
        seen[r] = true;
        while let Some(&mut (u, ref mut c)) = st.last_mut() {
            if *c < adj[u].len() {
                let w = adj[u][*c];
                *c += 1;
                if !seen[w] {
                    seen[w] = true;
                    st.push((w, 0));
                }
            } else {
                order.push(u);
                st.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut cid = 0;
    for &r in order.iter().rev() {
        if comp[r] != usize::MAX {
            continue;
        }
        let mut st = vec![r];
        comp[r] = cid;
        while let Some(u) = st.pop() {
            for &w in &radj[u] {
                if comp[w] == usize::MAX {
                    comp[w] = cid;
                    st.push(w);
                }
            }
        }
        cid += 1;
    }
    let mut outv: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cid];
    for (i, &c) in comp.iter().enumerate() {
        outv[c].insert(nodes[i]);
    }
    outv
}

/// Shortest move path from `from` to `to` staying inside `set`; empty when
/// from == to.
fn path_within(
    out: &[Vec<usize>],
    set: &BTreeSet<usize>,
    from: usize,
    to: usize,
) -> Vec<(usize, usize)> {
    if from == to {
        return Vec::new();
    }
    let mut prev: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for (mv, &w) in out[u].iter().enumerate() {
            if set.contains(&w) && w != from && !prev.contains_key(&w) {
                prev.insert(w, (u, mv));
                if w == to {
                    let mut path = Vec::new();
                    let mut cur = to;
                    while cur != from {
                        let (u, mv) = prev[&cur];
                        path.push((u, mv));
                        cur = u;
                    }
                    path.reverse();
                    return path;
                }
                queue.push_back(w);
            }
        }
    }
    panic!("good set must be strongly connected");
}

// ---------------------------------------------------------------------------
// DOT export.
// ---------------------------------------------------------------------------

/// DOT rendering of an arena; winning vertices (if given) are shaded,
/// Büchi vertices double-circled.
pub fn to_dot(a: &Arena, winning: Option<&BTreeSet<usize>>) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("digraph arena {\n  rankdir=LR;\n");
    for (i, v) in a.verts.iter().enumerate() {
        let shape = match v.owner {
            Player::P1 => "ellipse",
            Player::P2 => "box",
        };
        let peri = if a.buechi.as_ref().is_some_and(|b| b.contains(&i)) { 2 } else { 1 };
        let fill = if winning.is_some_and(|w| w.contains(&i)) {
            ", style=filled, fillcolor=lightgrey"
        } else {
            ""
        };
        let prios: Vec<String> = v.prio.iter().map(|p| p.to_string()).collect();
        writeln!(
            s,
            "  v{i} [label=\"{}\\n{}\", shape={shape}, peripheries={peri}{fill}];",
            v.name,
            prios.join(",")
        )
        .unwrap();
        for mv in &v.moves {
            for &w in &mv.succs {
                writeln!(s, "  v{i} -> v{w} [label=\"{}\"];", mv.label).unwrap();
            }
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn game_of_mdp_counts_enabled_pairs() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let (a, state_verts) = game_of_mdp(&m, &conds);
        a.validate();
        assert_eq!(a.verts.len(), 3 + 4);
        assert_eq!(state_verts, vec![0, 1, 2]);
        assert!(a.verts[3..].iter().all(|v| v.owner == Player::P2));
    }

    #[test]
    fn parity_on_branching_fixture() {
        // p(s)=0, left=1, right=0: s wins by choosing b toward `right`.
        let (m, conds) = fixtures::even_odd_branch();
        let (a, sv) = game_of_mdp(&m, &conds);
        let (win, act) = solve_parity(&a, 0);
        let s = m.state_index("s").unwrap();
        let right = m.state_index("right").unwrap();
        let left = m.state_index("left").unwrap();
        assert!(win.contains(&sv[s]));
        assert!(win.contains(&sv[right]));
        assert!(!win.contains(&sv[left]));
        let chosen = &a.verts[sv[s]].moves[act[&sv[s]]];
        assert_eq!(chosen.label, "b");
    }

    #[test]
    fn all_even_priorities_win_everywhere() {
        let (m, _) = fixtures::two_absorbing_loops();
        let conds = vec![crate::model::ParityMap { name: "z".into(), prio: vec![0, 2, 4] }];
        let (a, _) = game_of_mdp(&m, &conds);
        let (win, _) = solve_parity(&a, 0);
        assert_eq!(win.len(), a.verts.len());
    }

    #[test]
    fn streett_one_condition_matches_parity() {
        for (_, m, conds) in fixtures::all() {
            let (a, _) = game_of_mdp(&m, &conds);
            let sol = solve_streett(&a, &[0]);
            let (win, _) = solve_parity(&a, 0);
            assert_eq!(sol.winning, win);
        }
    }

    #[test]
    fn memory_hub_needs_memory_but_wins() {
        let (m, conds) = fixtures::memory_hub();
        // The adversarial two-condition game is lost from the hub: the
        // opponent can resolve action `a` toward `sw` forever, pinning the
        // second condition's maximum at 3.
        let (a, sv) = game_of_mdp(&m, &conds);
        let hub = m.state_index("hub").unwrap();
        let sol = solve_streett(&a, &[0, 1]);
        assert!(!sol.winning.contains(&sv[hub]));
        // The real claim: p1 surely plus almost-surely reaching the
        // dominant-even states {nw, ne} — as a game, p1-unless-R plus
        // Büchi(R) — is won from every state, and the winning strategy is
        // not memoryless (it must alternate b and c).
        let nw = m.state_index("nw").unwrap();
        let ne = m.state_index("ne").unwrap();
        let r = BTreeSet::from([nw, ne]);
        let (g, gv) = build_streett_buechi_arena(&m, &m.full_sub(), &r, &conds[..1]);
        let gsol = solve_streett_buechi(&g);
        assert!(gsol.winning.contains(&gv[&hub]), "hub must win p1 with Büchi({{nw,ne}})");
        for (&s, &v) in &gv {
            assert!(gsol.winning.contains(&v), "state {s} should win");
        }
    }

    #[test]
    fn streett_buechi_arena_has_expected_shape() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let s1 = m.state_index("s1").unwrap();
        let r = BTreeSet::from([s1]);
        let (a, sv) = build_streett_buechi_arena(&m, &m.full_sub(), &r, &conds[..1]);
        // 3 states + 2 copies for each of the 3 enabled non-R pairs.
        assert_eq!(a.verts.len(), 3 + 2 * 3);
        let b = a.buechi.as_ref().unwrap();
        assert!(b.contains(&sv[&s1]));
        assert_eq!(b.len(), 1 + 3);
        // R absorbing with priority 0.
        assert_eq!(a.verts[sv[&s1]].prio, vec![0]);
        assert_eq!(a.verts[sv[&s1]].moves.len(), 1);
    }

    #[test]
    fn streett_buechi_trivially_wins_when_r_is_everything() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let r: BTreeSet<_> = (0..m.n_states()).collect();
        let (a, sv) = build_streett_buechi_arena(&m, &m.full_sub(), &r, &conds[..1]);
        assert_eq!(a.verts.len(), m.n_states());
        let sol = solve_streett_buechi(&a);
        assert!(sv.values().all(|v| sol.winning.contains(v)));
    }

    #[test]
    fn alternating_ec_game_wins_everywhere() {
        // Priorities 1, 2, 4; R = the even-maximal states {u}. The sure
        // parity with escape-to-R option is winnable from every vertex.
        let (m, conds) = fixtures::alternating_ec();
        let u = m.state_index("u").unwrap();
        let r = BTreeSet::from([u]);
        let (a, sv) = build_streett_buechi_arena(&m, &m.full_sub(), &r, &conds);
        let sol = solve_streett_buechi(&a);
        for (&s, &v) in &sv {
            assert!(sol.winning.contains(&v), "state {s} should win");
        }
    }

    #[test]
    fn strategy_stays_in_winning_region() {
        // Follow every branch of the strategy from every winning vertex and
        // check closure.
        let (m, conds) = fixtures::surely_almost_cycle();
        let (a, _) = game_of_mdp(&m, &conds);
        let sol = solve_streett(&a, &[0, 1]);
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut stack: Vec<(usize, usize)> = sol
            .winning
            .iter()
            .filter_map(|&v| sol.strategy.init.get(&v).map(|&md| (md, v)))
            .collect();
        while let Some((mode, v)) = stack.pop() {
            if !seen.insert((mode, v)) {
                continue;
            }
            assert!(sol.winning.contains(&v), "strategy left the winning region at {v}");
            let succs: Vec<usize> = match a.verts[v].owner {
                Player::P1 => {
                    let mv = sol.strategy.act[&(mode, v)];
                    a.verts[v].moves[mv].succs.clone()
                }
                Player::P2 => {
                    a.verts[v].moves.iter().flat_map(|mv| mv.succs.clone()).collect()
                }
            };
            for w in succs {
                stack.push((sol.strategy.advance(mode, w), w));
            }
        }
    }

    #[test]
    fn one_player_lasso_path() {
        // Deterministic MDP: all pair vertices have one successor, so the
        // arena is effectively one-player.
        let (m, conds) = fixtures::even_odd_branch();
        let (a, sv) = game_of_mdp(&m, &conds);
        assert!(a.is_one_player());
        let sol = solve_streett(&a, &[0, 0]);
        let s = m.state_index("s").unwrap();
        assert!(sol.winning.contains(&sv[s]));
        assert!(!sol.winning.contains(&sv[m.state_index("left").unwrap()]));
    }

    #[test]
    fn dot_export_mentions_every_vertex() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let (a, _) = game_of_mdp(&m, &conds);
        let dot = to_dot(&a, None);
        for v in &a.verts {
            assert!(dot.contains(&v.name));
        }
    }
}
