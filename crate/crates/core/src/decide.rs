//! Top-level realizability: clause decision, fragment dispatch, the
//! disjunctive-normal-form loop, and the SAT hardness encoder.
//!
//! A clause (𝒜, 𝒜𝒮, 𝒩𝒵, ℰ) of parity atoms is decided in seven steps:
//! compute the maximal end components supporting the sure conjunction over
//! 𝒜, keep those that also admit an almost-sure witness over 𝒜 ∪ 𝒜𝒮
//! (the set T_II), compute the states S1 from which the sure conjunction
//! holds together with almost-sure reachability of T_II, prune the MDP to
//! S1, and then check each NZ atom through a reach-to-parity product and
//! each E atom through a single-path parity search, all inside the pruned
//! MDP.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::ecs::{
    check_as_conjunction, exists_conjunction_parity, max_type_two, type_three_union, Lasso,
};
use crate::games::{
    build_streett_buechi_arena, game_of_mdp, solve_streett_buechi_opt, solve_streett_opt,
};
use crate::graphalg::{almost_sure_reach, mec_decomposition};
use crate::model::{
    extract_sub, reach_to_parity_product, restrict_within, ConditionTable, EndComponent, Mdp,
    ParityMap, StateId,
};
use crate::qpl::{self, Clause, Formula, QplError};

/// Solver route for a clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    /// Pick by the number of sure atoms: 0 → Poly, 1 → Parity, ≥2 → Streett.
    Auto,
    /// Polynomial route for clauses without sure atoms: end-component
    /// analysis and almost-sure reachability only, no games.
    Poly,
    /// Route for exactly one sure atom: the sure-conjunction games are
    /// single-condition and solved directly as parity games.
    Parity,
    /// General route; game solving always goes through the full record
    /// product, even where a single-condition shortcut exists.
    Streett,
}

impl Path {
    fn label(self) -> &'static str {
        match self {
            Path::Auto => "auto",
            Path::Poly => "poly",
            Path::Parity => "parity",
            Path::Streett => "streett",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecideError {
    #[error("condition `{0}` is not defined for this MDP")]
    UnboundCondition(String),
    #[error("path `{path}` does not apply to a clause with {n_sure} sure atoms")]
    PathMismatch { path: &'static str, n_sure: usize },
    #[error(transparent)]
    Formula(#[from] QplError),
}

/// Evidence attached to a yes verdict. Lassos for E atoms live in the
/// pruned sub-MDP (state ids index `pruned_states`); lassos for NZ atoms
/// live in the reach-to-parity product over that sub-MDP, where state
/// `i` is copy 1 and `i + pruned_states.len()` is copy 2 of pruned state
/// `i`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificates {
    /// Maximal end components supporting the sure and almost-sure parts.
    pub t2: Vec<EndComponent>,
    /// States satisfying the sure conjunction plus almost-sure reach of T_II.
    pub s1: BTreeSet<StateId>,
    /// Original ids of the pruned sub-MDP's states, in extraction order.
    pub pruned_states: Vec<StateId>,
    /// Per NZ atom: the target union T_III, in original state ids.
    pub t3: BTreeMap<String, BTreeSet<StateId>>,
    /// Per NZ atom: a positive-probability witness path in the product.
    pub nz_lassos: BTreeMap<String, Lasso>,
    /// Per E atom: a witness path in the pruned sub-MDP.
    pub e_lassos: BTreeMap<String, Lasso>,
}

/// The outcome of deciding a clause or formula from a state.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub answer: bool,
    pub state: StateId,
    /// The satisfied clause, when the answer is yes.
    pub clause: Option<Clause>,
    pub path: &'static str,
    pub certificates: Option<Certificates>,
    pub micros: u128,
}

fn no_verdict(s: StateId, path: Path, t0: Instant) -> Verdict {
    Verdict {
        answer: false,
        state: s,
        clause: None,
        path: path.label(),
        certificates: None,
        micros: t0.elapsed().as_micros(),
    }
}

fn resolve_all(
    table: &ConditionTable,
    names: &BTreeSet<String>,
) -> Result<Vec<ParityMap>, DecideError> {
    names
        .iter()
        .map(|n| {
            table
                .resolve(n)
                .ok_or_else(|| DecideError::UnboundCondition(n.clone()))
        })
        .collect()
}

/// T_II and S1 for the game-based routes. The sure losers are pruned first
/// (a strategy whose action can leave the sure-winning region loses the
/// sure conjunction outright), then the Streett-Büchi game over the
/// remainder decides sure-parity-unless-R plus almost-sure reach of
/// R = ⋃ T_II.
fn front_games(
    m: &Mdp,
    a_conds: &[ParityMap],
    as_conds: &[ParityMap],
    force_product: bool,
) -> (Vec<EndComponent>, BTreeSet<StateId>) {
    let full = m.full_sub();
    let t2 = max_type_two(m, &full, a_conds, as_conds);
    let t2s: BTreeSet<StateId> = t2.iter().flat_map(|c| c.states.iter().copied()).collect();

    let sure_winners: BTreeSet<StateId> = if a_conds.is_empty() {
        full.states.clone()
    } else {
        let (arena, verts) = game_of_mdp(m, a_conds);
        let conds: Vec<usize> = (0..a_conds.len()).collect();
        let sol = solve_streett_opt(&arena, &conds, force_product);
        (0..m.n_states()).filter(|&s| sol.winning.contains(&verts[s])).collect()
    };
    debug_assert!(t2s.is_subset(&sure_winners));
    let sub = restrict_within(m, &full, &sure_winners);
    let r: BTreeSet<StateId> = t2s.intersection(&sub.states).copied().collect();
    let (arena, verts) = build_streett_buechi_arena(m, &sub, &r, a_conds);
    let sol = solve_streett_buechi_opt(&arena, force_product);
    let s1 = sub
        .states
        .iter()
        .copied()
        .filter(|s| sol.winning.contains(&verts[s]))
        .collect();
    (t2, s1)
}

/// T_II and S1 for clauses without sure atoms: the qualifying end
/// components are plain MECs filtered by the almost-sure check, and S1 is
/// almost-sure reachability of their union. No game arenas are built.
fn front_poly(
    m: &Mdp,
    as_conds: &[ParityMap],
) -> (Vec<EndComponent>, BTreeSet<StateId>) {
    let full = m.full_sub();
    let refs: Vec<&ParityMap> = as_conds.iter().collect();
    let t2: Vec<EndComponent> = mec_decomposition(m, &full)
        .into_iter()
        .filter(|c| check_as_conjunction(m, c, &refs).is_some())
        .collect();
    let t2s: BTreeSet<StateId> = t2.iter().flat_map(|c| c.states.iter().copied()).collect();
    let s1 = almost_sure_reach(m, &full, &t2s);
    (t2, s1)
}

fn decide_with(
    m: &Mdp,
    table: &ConditionTable,
    s: StateId,
    c: &Clause,
    path: Path,
) -> Result<Verdict, DecideError> {
    let t0 = Instant::now();
    let a_conds = resolve_all(table, &c.a)?;
    let as_conds = resolve_all(table, &c.r#as)?;
    let nz_conds = resolve_all(table, &c.nz)?;
    let e_conds = resolve_all(table, &c.e)?;

    let route = match path {
        Path::Auto => match a_conds.len() {
            0 => Path::Poly,
            1 => Path::Parity,
            _ => Path::Streett,
        },
        Path::Poly if !a_conds.is_empty() => {
            return Err(DecideError::PathMismatch { path: "poly", n_sure: a_conds.len() });
        }
        Path::Parity if a_conds.len() != 1 => {
            return Err(DecideError::PathMismatch { path: "parity", n_sure: a_conds.len() });
        }
        p => p,
    };
    let (t2, s1) = match route {
        Path::Poly => front_poly(m, &as_conds),
        Path::Parity => front_games(m, &a_conds, &as_conds, false),
        _ => front_games(m, &a_conds, &as_conds, true),
    };
    if !s1.contains(&s) {
        return Ok(no_verdict(s, route, t0));
    }

    let pruned = restrict_within(m, &m.full_sub(), &s1);
    // The pruned sub-MDP is where all later checks happen; its states must
    // all lie in S1 and keep at least one action, otherwise lifting the
    // clause's sure/almost-sure part to it would be unsound.
    assert!(pruned.states.is_subset(&s1) && pruned.contains(s));

    // Extract the pruned sub-MDP with the conditions the path checks need.
    let mut to_lift: Vec<ParityMap> = a_conds.clone();
    to_lift.extend(e_conds.iter().cloned());
    let (pm, orig, lifted) = extract_sub(m, &pruned, &to_lift);
    let (a_x, e_x) = lifted.split_at(a_conds.len());
    let sp = orig.binary_search(&s).expect("start state survives pruning");

    let mut t3 = BTreeMap::new();
    let mut nz_lassos = BTreeMap::new();
    let mut e_lassos = BTreeMap::new();
    for p in &nz_conds {
        let t3_orig = type_three_union(m, &pruned, &a_conds, &as_conds, p);
        let t3_x: BTreeSet<StateId> = t3_orig
            .iter()
            .map(|x| orig.binary_search(x).expect("T_III lies in the pruned states"))
            .collect();
        let (prod, p_reach, lifted_a, lift) = reach_to_parity_product(&pm, &t3_x, a_x);
        let mut conds = lifted_a;
        conds.push(p_reach);
        match exists_conjunction_parity(&prod, &conds, lift[sp]) {
            Some(l) => {
                t3.insert(p.name.clone(), t3_orig);
                nz_lassos.insert(p.name.clone(), l);
            }
            None => return Ok(no_verdict(s, route, t0)),
        }
    }
    for (p, p_x) in e_conds.iter().zip(e_x) {
        let mut conds = a_x.to_vec();
        conds.push(p_x.clone());
        match exists_conjunction_parity(&pm, &conds, sp) {
            Some(l) => {
                e_lassos.insert(p.name.clone(), l);
            }
            None => return Ok(no_verdict(s, route, t0)),
        }
    }
    Ok(Verdict {
        answer: true,
        state: s,
        clause: Some(c.clone()),
        path: route.label(),
        certificates: Some(Certificates {
            t2,
            s1,
            pruned_states: orig,
            t3,
            nz_lassos,
            e_lassos,
        }),
        micros: t0.elapsed().as_micros(),
    })
}

/// Decide a single clause from `s` through the general (Streett) route.
pub fn decide_clause(
    m: &Mdp,
    table: &ConditionTable,
    s: StateId,
    c: &Clause,
) -> Result<Verdict, DecideError> {
    decide_with(m, table, s, c, Path::Streett)
}

/// Decide a single clause from `s`, selecting the solver route by the
/// number of sure atoms (or honoring a forced route). All routes return
/// the same answers.
pub fn dispatch(
    m: &Mdp,
    table: &ConditionTable,
    s: StateId,
    c: &Clause,
    path: Path,
) -> Result<Verdict, DecideError> {
    decide_with(m, table, s, c, path)
}

/// Decide a formula from `s`: convert to negation-free form, distribute to
/// clauses, and decide clauses one by one (most constrained first) until
/// one holds.
pub fn decide_formula(
    m: &Mdp,
    table: &ConditionTable,
    s: StateId,
    f: &Formula,
    path: Path,
) -> Result<Verdict, DecideError> {
    let t0 = Instant::now();
    let nf = qpl::to_negation_free(f);
    qpl::bind(&nf, table).map_err(|e| match e {
        QplError::UnknownCondition(n) => DecideError::UnboundCondition(n),
        other => DecideError::Formula(other),
    })?;
    let mut clauses = qpl::to_dnf_clauses(&nf, qpl::DEFAULT_CLAUSE_CAP)?;
    clauses.sort_by(|x, y| y.len().cmp(&x.len()).then_with(|| x.cmp(y)));
    for c in &clauses {
        let v = decide_with(m, table, s, c, path)?;
        if v.answer {
            return Ok(v);
        }
    }
    let mut v = no_verdict(s, path, t0);
    v.micros = t0.elapsed().as_micros();
    Ok(v)
}

/// Encode a CNF over `n_vars` variables as an MDP plus a formula, such that
/// the formula is realizable (from any state) exactly when the CNF is
/// satisfiable. Clauses use the DIMACS literal convention: variable `i` is
/// the literal `i`, its negation `-i`; variables are `1..=n_vars`.
///
/// The MDP has a state per literal and a complete action-labeled graph; the
/// per-variable conditions force any single path to settle on a consistent
/// valuation, and the CNF is mirrored with sure atoms.
pub fn encode_sat(
    n_vars: usize,
    cnf: &[Vec<i32>],
) -> (Mdp, Vec<ParityMap>, Formula, StateId) {
    use num::One;
    assert!(n_vars >= 1, "the encoding needs at least one variable");
    let n = n_vars;
    let mut names: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
    names.extend((1..=n).map(|i| format!("na{i}")));
    // One action per state, going there with probability one, from
    // everywhere: the complete graph.
    let mut trans = BTreeMap::new();
    for s in 0..2 * n {
        for t in 0..2 * n {
            trans.insert((s, t), vec![(t, crate::model::Prob::one())]);
        }
    }
    let m = Mdp::new(names.clone(), names, trans).expect("the literal graph is a valid MDP");
    let mut conds = Vec::with_capacity(2 * n);
    for i in 0..n {
        // Choosing literal a_i: a_i scores 2, its negation 3, the rest 1.
        let mut pos = vec![1u32; 2 * n];
        pos[i] = 2;
        pos[n + i] = 3;
        conds.push(ParityMap::new(format!("pa{}", i + 1), pos));
        let mut neg = vec![1u32; 2 * n];
        neg[n + i] = 2;
        neg[i] = 3;
        conds.push(ParityMap::new(format!("pna{}", i + 1), neg));
    }
    let lit_atom = |lit: i32| {
        let v = lit.unsigned_abs() as usize;
        assert!(1 <= v && v <= n, "literal {lit} out of range");
        let name = if lit > 0 { format!("pa{v}") } else { format!("pna{v}") };
        Formula::Atom(crate::qpl::Quant::A, name)
    };
    // ψ: every variable resolves to one of its two literals.
    let mut parts: Vec<Formula> = (1..=n as i32)
        .map(|v| Formula::Or(vec![lit_atom(v), lit_atom(-v)]))
        .collect();
    // φ′: the CNF with literals as sure atoms.
    for clause in cnf {
        assert!(!clause.is_empty(), "empty CNF clause is unsatisfiable by fiat");
        parts.push(Formula::Or(clause.iter().map(|&l| lit_atom(l)).collect()));
    }
    (m, conds, Formula::And(parts), 0)
}
