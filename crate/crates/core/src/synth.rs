//! Witness strategy construction.
//!
//! Strategies come in four memory classes: deterministic and randomized
//! memoryless tables, finite-memory Mealy machines read back from game
//! solutions, and scheduled controllers with an unbounded round counter.
//! The scheduled controllers implement the alternating constructions used
//! by the decision procedure's correctness arguments: the two-phase σ_C
//! controller for an end component supporting a sure plus almost-sure
//! conjunction, the global switch-on-entry strategy, the ε-scheduled
//! controller for non-zero atoms, uniform mixing, and the per-step
//! coin-toss controller for existential atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::collections::VecDeque;

use num::{BigInt, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decide::{self, DecideError, Path};
use crate::ecs::{c_max_even, check_as_conjunction, Lasso};
use crate::games::{
    build_streett_buechi_arena_full, game_of_mdp, solve_streett, solve_streett_buechi,
    StreettSolution,
};
use crate::graphalg::mec_decomposition;
use crate::model::{
    restrict_within, ActionId, ConditionTable, EndComponent, Mdp, ParityMap, Prob, StateId,
    SubMdp,
};
use crate::qpl::Clause;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("the objective is not realizable from this state")]
    NotSatisfiable,
    #[error("the end component does not admit the required game witness")]
    NotWinnable,
    #[error(transparent)]
    Decide(#[from] DecideError),
}

/// Exact rationals serialized as `"num/den"` strings.
pub mod rat {
    use super::Prob;
    use num::BigInt;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(p: &Prob, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", p.numer(), p.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Prob, D::Error> {
        let txt = String::deserialize(d)?;
        let (n, den) = txt.split_once('/').unwrap_or((txt.as_str(), "1"));
        let n = BigInt::from_str(n.trim()).map_err(D::Error::custom)?;
        let den = BigInt::from_str(den.trim()).map_err(D::Error::custom)?;
        if den == BigInt::from(0) {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Prob::new(n, den))
    }
}

/// Maps keyed by state or mode indices, serialized as entry pairs: JSON
/// object keys must be strings, and the tagged strategy encoding buffers
/// content in a way that loses the string-to-integer key conversion.
pub mod idx_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer, V: Serialize>(
        m: &BTreeMap<usize, V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<(usize, &V)> = m.iter().map(|(&k, x)| (k, x)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, V: Deserialize<'de>>(
        d: D,
    ) -> Result<BTreeMap<usize, V>, D::Error> {
        let v: Vec<(usize, V)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

/// Maps keyed by `(mode, state)` pairs, serialized as entry triples since
/// JSON keys must be strings.
pub mod pair_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer, V: Serialize>(
        m: &BTreeMap<(usize, usize), V>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<(usize, usize, &V)> = m.iter().map(|(&(a, b), x)| (a, b, x)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, V: Deserialize<'de>>(
        d: D,
    ) -> Result<BTreeMap<(usize, usize), V>, D::Error> {
        let v: Vec<(usize, usize, V)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|(a, b, x)| ((a, b), x)).collect())
    }
}

/// An action with an exact probability weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedAction {
    pub action: ActionId,
    #[serde(with = "rat")]
    pub weight: Prob,
}

/// A finite-memory strategy table. Modes pin the current state, so the
/// transition table can be keyed on the arrived state alone: at state `s`
/// in mode `q`, play `act[(q, s)]`; on arriving at `t`, move to
/// `next[(q, t)]`. The executor falls back to the initial mode of the
/// arrived state when a transition entry is missing (which only happens
/// after the enclosing controller should already have switched away).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealyTable {
    pub n_modes: usize,
    #[serde(with = "idx_map")]
    pub init: BTreeMap<StateId, usize>,
    #[serde(with = "pair_map")]
    pub act: BTreeMap<(usize, StateId), ActionId>,
    #[serde(with = "pair_map")]
    pub next: BTreeMap<(usize, StateId), usize>,
}

/// Round lengths for scheduled controllers: round `i ≥ 1` lasts
/// `offset + unit·i` steps (at least one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub offset: u64,
    pub unit: u64,
}

impl Schedule {
    pub fn n(&self, i: u64) -> u64 {
        (self.offset + self.unit.saturating_mul(i)).max(1)
    }
}

/// A sub-strategy switched to when the run enters a state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierArm {
    pub carrier: BTreeSet<StateId>,
    pub strategy: Strategy,
}

/// A repair phase handler: a Mealy table driving the run into `target`
/// while keeping every sure parity intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairArm {
    pub target: BTreeSet<StateId>,
    pub table: MealyTable,
}

/// A witness strategy. The scheduled variants carry sub-strategies plus
/// the data their controllers need; per-run execution state (mode, round
/// counter, phase) belongs to the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Strategy {
    MemorylessDet {
        #[serde(with = "idx_map")]
        act: BTreeMap<StateId, ActionId>,
    },
    MemorylessRand {
        #[serde(with = "idx_map")]
        act: BTreeMap<StateId, Vec<WeightedAction>>,
    },
    Mealy {
        table: MealyTable,
    },
    /// Two-phase controller on an end component: play `sigma2` for the
    /// scheduled number of steps; if some repair target was missed during
    /// the episode, run its repair table until the target is hit, then
    /// resume. Satisfies every sure parity on all paths and every
    /// almost-sure parity with probability one.
    SigmaC {
        carrier: BTreeSet<StateId>,
        sigma2: Box<Strategy>,
        repair: Vec<RepairArm>,
        schedule: Schedule,
    },
    /// Play `sigma_t` until the run enters one of the inner carriers, then
    /// switch to that carrier's strategy forever.
    SwitchOnEntry {
        sigma_t: MealyTable,
        inner: Vec<CarrierArm>,
    },
    /// The ε-scheduled controller: rounds of `sigma2` with the given round
    /// lengths; a round that misses one of the targets switches to
    /// `sigma1` forever. The round lengths make the probability of never
    /// switching at least `1 − epsilon`.
    TypeThree {
        #[serde(with = "rat")]
        epsilon: Prob,
        targets: Vec<BTreeSet<StateId>>,
        sigma2: Box<Strategy>,
        sigma1: Box<Strategy>,
        schedule: Schedule,
    },
    /// Uniform initial choice among the arms, committed forever.
    Mix {
        arms: Vec<Strategy>,
    },
    /// Follow the lasso; before each step a fair coin decides whether to
    /// switch to `fallback` forever. Entering one of the `arrive` carriers
    /// switches to its strategy instead (used to hand over to a non-zero
    /// controller once its end component is reached).
    ExistSwitch {
        lasso: Lasso,
        fallback: Box<Strategy>,
        arrive: Vec<CarrierArm>,
    },
}

// ---------------------------------------------------------------------------
// Randomized memoryless witnesses and schedules.
// ---------------------------------------------------------------------------

/// The randomized memoryless witness for an almost-sure conjunction on an
/// end component: shortest-path routing into the witness sub-component D,
/// uniform randomization over D's actions inside D.
pub fn synth_as_conjunction(
    m: &Mdp,
    c: &EndComponent,
    conds: &[&ParityMap],
) -> Result<Strategy, SynthError> {
    let d = check_as_conjunction(m, c, conds).ok_or(SynthError::NotSatisfiable)?;
    let mut act: BTreeMap<StateId, Vec<WeightedAction>> = BTreeMap::new();
    for (&s, acts) in &d.acts {
        let w = Prob::new(BigInt::one(), BigInt::from(acts.len() as i64));
        act.insert(
            s,
            acts.iter().map(|&a| WeightedAction { action: a, weight: w.clone() }).collect(),
        );
    }
    // Attractor layers toward D inside the end component: each outside
    // state gets one action with a successor strictly closer to D.
    let mut known: BTreeSet<StateId> = d.states.clone();
    while known.len() < c.states.len() {
        let mut layer: Vec<(StateId, ActionId)> = Vec::new();
        for &s in c.states.difference(&known) {
            if let Some(&a) = c.acts[&s]
                .iter()
                .find(|&&a| m.post(s, a).any(|t| known.contains(&t)))
            {
                layer.push((s, a));
            }
        }
        assert!(!layer.is_empty(), "an end component is strongly connected");
        for (s, a) in layer {
            known.insert(s);
            act.insert(s, vec![WeightedAction { action: a, weight: Prob::one() }]);
        }
    }
    Ok(Strategy::MemorylessRand { act })
}

/// The Markov chain a memoryless strategy induces on a carrier.
fn chain_of(
    m: &Mdp,
    carrier: &BTreeSet<StateId>,
    sigma: &Strategy,
) -> BTreeMap<StateId, Vec<(StateId, Prob)>> {
    let mut chain = BTreeMap::new();
    for &s in carrier {
        let mut row: BTreeMap<StateId, Prob> = BTreeMap::new();
        match sigma {
            Strategy::MemorylessDet { act } => {
                for (t, p) in m.dist(s, act[&s]) {
                    *row.entry(*t).or_insert_with(Prob::zero) += p.clone();
                }
            }
            Strategy::MemorylessRand { act } => {
                for wa in &act[&s] {
                    for (t, p) in m.dist(s, wa.action) {
                        *row.entry(*t).or_insert_with(Prob::zero) += &wa.weight * p;
                    }
                }
            }
            _ => panic!("schedules are computed for memoryless strategies"),
        }
        chain.insert(s, row.into_iter().collect());
    }
    chain
}

/// Minimum, over start states and targets, of the probability of hitting
/// each target within `|carrier|` steps of the chain. `None` when some
/// target is unreachable from some state.
fn block_hit(
    m: &Mdp,
    carrier: &BTreeSet<StateId>,
    sigma: &Strategy,
    targets: &[BTreeSet<StateId>],
) -> Option<(u64, Prob)> {
    let chain = chain_of(m, carrier, sigma);
    let steps = carrier.len();
    let mut delta: Option<Prob> = None;
    for t in targets {
        let mut v: BTreeMap<StateId, Prob> = carrier
            .iter()
            .map(|&s| (s, if t.contains(&s) { Prob::one() } else { Prob::zero() }))
            .collect();
        for _ in 0..steps {
            let mut w = BTreeMap::new();
            for &s in carrier {
                let val = if t.contains(&s) {
                    Prob::one()
                } else {
                    chain[&s].iter().map(|(u, p)| p * &v[u]).sum()
                };
                w.insert(s, val);
            }
            v = w;
        }
        let worst = v.values().min().cloned().expect("carrier is nonempty");
        if worst.is_zero() {
            return None;
        }
        delta = Some(match delta {
            Some(d) if d <= worst => d,
            _ => worst,
        });
    }
    Some((steps as u64, delta?))
}

/// Smallest `k ≥ 1` with `scale · q^k ≤ bound`, exactly.
fn pow_until(q: &Prob, scale: &Prob, bound: &Prob) -> u64 {
    let mut acc = scale * q;
    let mut k = 1u64;
    while acc > *bound {
        acc *= q;
        k += 1;
        assert!(k < 1_000_000, "schedule search diverged");
    }
    k
}

fn half() -> Prob {
    Prob::new(BigInt::one(), BigInt::from(2))
}

/// Round lengths for σ_C: playing `sigma2` for `n(i)` steps visits every
/// target with probability at least `1 − 2^{−i}`, from exact within-block
/// hit probabilities of the induced chain. Falls back to linear rounds if
/// some target is unreachable under `sigma2` (the repair phases then carry
/// the guarantee).
pub fn schedule(
    m: &Mdp,
    c: &EndComponent,
    sigma2: &Strategy,
    targets: &[BTreeSet<StateId>],
) -> Schedule {
    if targets.is_empty() || targets.iter().all(|t| c.states.is_subset(t)) {
        return Schedule { offset: 1, unit: 0 };
    }
    match block_hit(m, &c.states, sigma2, targets) {
        None => Schedule { offset: 1, unit: 1 },
        Some((l, delta)) => {
            let q = Prob::one() - delta;
            let m_t = Prob::new(BigInt::from(targets.len() as i64), BigInt::one());
            Schedule { offset: 0, unit: l * pow_until(&q, &m_t, &half()) }
        }
    }
}

/// Round lengths for the ε-controller: round `i` misses some target with
/// probability at most `ε·2^{−i}`, so the product of round success
/// probabilities is at least `1 − ε`.
pub fn schedule_eps(
    m: &Mdp,
    c: &EndComponent,
    sigma2: &Strategy,
    targets: &[BTreeSet<StateId>],
    epsilon: &Prob,
) -> Schedule {
    if targets.is_empty() || targets.iter().all(|t| c.states.is_subset(t)) {
        return Schedule { offset: 1, unit: 0 };
    }
    match block_hit(m, &c.states, sigma2, targets) {
        None => Schedule { offset: 1, unit: 1 },
        Some((l, delta)) => {
            let q = Prob::one() - delta;
            let m_t = Prob::new(BigInt::from(targets.len() as i64), BigInt::one());
            let k0 = pow_until(&q, &m_t, epsilon);
            let k_half = pow_until(&q, &Prob::one(), &half());
            Schedule { offset: l * k0, unit: l * k_half }
        }
    }
}

// ---------------------------------------------------------------------------
// Mealy read-back from Streett-Büchi solutions.
// ---------------------------------------------------------------------------

/// Read a winning Streett-Büchi game strategy back as a Mealy table over
/// the MDP, for the states of `domain` (which must be winning). Mode
/// updates resolve the arena's copy choice in favor of copy 1 when the
/// drawn successor matches the strategy's own pick there, which preserves
/// the almost-sure reachability guarantee; R states get no entries (the
/// enclosing controller switches on entry).
fn mealy_of_sb(
    m: &Mdp,
    sub: &SubMdp,
    r: &BTreeSet<StateId>,
    sol: &StreettSolution,
    state_vert: &BTreeMap<StateId, usize>,
    copy_vert: &BTreeMap<(StateId, usize, u8), usize>,
    domain: &BTreeSet<StateId>,
) -> MealyTable {
    let acts_list: BTreeMap<StateId, Vec<ActionId>> =
        sub.states.iter().map(|&s| (s, sub.acts_of(s).collect())).collect();
    let g = &sol.strategy;
    let mut mode_id: BTreeMap<(usize, StateId), usize> = BTreeMap::new();
    let mut queue: VecDeque<(usize, StateId)> = VecDeque::new();
    let mut intern = |gq: usize, s: StateId,
                      mode_id: &mut BTreeMap<(usize, StateId), usize>,
                      queue: &mut VecDeque<(usize, StateId)>| {
        let nid = mode_id.len();
        *mode_id.entry((gq, s)).or_insert_with(|| {
            queue.push_back((gq, s));
            nid
        })
    };
    let mut init = BTreeMap::new();
    for &s in domain {
        let v = state_vert[&s];
        let gq = *g.init.get(&v).expect("domain states are winning");
        init.insert(s, intern(gq, s, &mut mode_id, &mut queue));
    }
    let mut act = BTreeMap::new();
    let mut next = BTreeMap::new();
    while let Some((gq, s)) = queue.pop_front() {
        let me = mode_id[&(gq, s)];
        if r.contains(&s) {
            continue;
        }
        let v = state_vert[&s];
        let mv = *g.act.get(&(gq, v)).expect("reachable strategy states have a move");
        let a = acts_list[&s][mv];
        act.insert((me, s), a);
        let v1 = copy_vert[&(s, a, 1)];
        let v0 = copy_vert[&(s, a, 0)];
        let gq1 = g.advance(gq, v1);
        let posts: Vec<StateId> = m.post(s, a).collect();
        let pick: Option<StateId> = g.act.get(&(gq1, v1)).map(|&i| posts[i]);
        let gq0 = g.advance(gq, v0);
        for &t in &posts {
            let gq2 = if pick == Some(t) {
                g.advance(gq1, state_vert[&t])
            } else {
                g.advance(gq0, state_vert[&t])
            };
            let tid = intern(gq2, t, &mut mode_id, &mut queue);
            next.insert((me, t), tid);
        }
    }
    MealyTable { n_modes: mode_id.len(), init, act, next }
}

// ---------------------------------------------------------------------------
// Scheduled controllers.
// ---------------------------------------------------------------------------

/// The two-phase σ_C controller for an end component supporting the sure
/// conjunction over `a_conds` together with the almost-sure conjunction
/// over `a_conds ∪ as_conds`. With no sure atoms this degenerates to the
/// randomized memoryless witness alone.
pub fn synth_sigma_c(
    m: &Mdp,
    c: &EndComponent,
    a_conds: &[ParityMap],
    as_conds: &[ParityMap],
) -> Result<Strategy, SynthError> {
    let all: Vec<&ParityMap> = a_conds.iter().chain(as_conds.iter()).collect();
    let sigma2 = synth_as_conjunction(m, c, &all)?;
    if a_conds.is_empty() {
        return Ok(sigma2);
    }
    let sub = c.as_sub();
    let mut repair = Vec::new();
    let mut targets = Vec::new();
    for p in a_conds {
        let target = c_max_even(&c.states, p);
        if target.is_empty() {
            return Err(SynthError::NotWinnable);
        }
        let (arena, sv, cv) = build_streett_buechi_arena_full(m, &sub, &target, a_conds);
        let sol = solve_streett_buechi(&arena);
        if !c.states.iter().all(|s| sol.winning.contains(&sv[s])) {
            return Err(SynthError::NotWinnable);
        }
        let table = mealy_of_sb(m, &sub, &target, &sol, &sv, &cv, &c.states);
        repair.push(RepairArm { target: target.clone(), table });
        targets.push(target);
    }
    let schedule = schedule(m, c, &sigma2, &targets);
    Ok(Strategy::SigmaC {
        carrier: c.states.clone(),
        sigma2: Box::new(sigma2),
        repair,
        schedule,
    })
}

/// The strategy that sure-wins every `a_conds` parity while reaching the
/// union of the given carriers almost surely, as a Mealy table over its
/// winning states (returned alongside).
pub fn sigma_t_mealy(
    m: &Mdp,
    a_conds: &[ParityMap],
    carriers: &[EndComponent],
) -> Result<(MealyTable, BTreeSet<StateId>), SynthError> {
    let full = m.full_sub();
    let sure_winners: BTreeSet<StateId> = if a_conds.is_empty() {
        full.states.clone()
    } else {
        let (arena, verts) = game_of_mdp(m, a_conds);
        let conds: Vec<usize> = (0..a_conds.len()).collect();
        let sol = solve_streett(&arena, &conds);
        (0..m.n_states()).filter(|&s| sol.winning.contains(&verts[s])).collect()
    };
    let sub = restrict_within(m, &full, &sure_winners);
    let r: BTreeSet<StateId> = carriers
        .iter()
        .flat_map(|c| c.states.iter().copied())
        .filter(|s| sub.contains(*s))
        .collect();
    let (arena, sv, cv) = build_streett_buechi_arena_full(m, &sub, &r, a_conds);
    let sol = solve_streett_buechi(&arena);
    let s1: BTreeSet<StateId> = sub
        .states
        .iter()
        .copied()
        .filter(|s| sol.winning.contains(&sv[s]))
        .collect();
    if s1.is_empty() {
        return Err(SynthError::NotSatisfiable);
    }
    Ok((mealy_of_sb(m, &sub, &r, &sol, &sv, &cv, &s1), s1))
}

/// The global strategy: play `sigma_t` until a supported end component is
/// entered, then its σ_C forever. From a state already inside a carrier
/// the switch happens immediately.
pub fn synth_global(sigma_t: MealyTable, sigma_cs: Vec<CarrierArm>) -> Strategy {
    Strategy::SwitchOnEntry { sigma_t, inner: sigma_cs }
}

/// The ε-scheduled controller for a non-zero atom on an end component that
/// supports the almost-sure conjunction over all of `a_conds`, `as_conds`
/// and `p_nz`: rounds of the randomized witness, switching to the combi
/// witness `sigma1` forever if a round misses one of the sure targets.
pub fn synth_type_three(
    m: &Mdp,
    c: &EndComponent,
    a_conds: &[ParityMap],
    as_conds: &[ParityMap],
    p_nz: &ParityMap,
    sigma1: Strategy,
    epsilon: Prob,
) -> Result<Strategy, SynthError> {
    assert!(epsilon > Prob::zero() && epsilon < Prob::one());
    let mut all: Vec<&ParityMap> = a_conds.iter().chain(as_conds.iter()).collect();
    all.push(p_nz);
    let sigma2 = synth_as_conjunction(m, c, &all)?;
    let targets: Vec<BTreeSet<StateId>> =
        a_conds.iter().map(|p| c_max_even(&c.states, p)).collect();
    let schedule = schedule_eps(m, c, &sigma2, &targets, &epsilon);
    Ok(Strategy::TypeThree {
        epsilon,
        targets,
        sigma2: Box::new(sigma2),
        sigma1: Box::new(sigma1),
        schedule,
    })
}

/// Uniform initial mixing; a single strategy is returned unchanged.
pub fn synth_mix(mut arms: Vec<Strategy>) -> Strategy {
    assert!(!arms.is_empty());
    if arms.len() == 1 {
        arms.pop().unwrap()
    } else {
        Strategy::Mix { arms }
    }
}

/// The per-step coin controller for an existential witness path.
pub fn synth_exist_switch(lasso: Lasso, fallback: Strategy, arrive: Vec<CarrierArm>) -> Strategy {
    Strategy::ExistSwitch { lasso, fallback: Box::new(fallback), arrive }
}

// ---------------------------------------------------------------------------
// Whole-clause synthesis.
// ---------------------------------------------------------------------------

fn resolve_all(
    table: &ConditionTable,
    names: &BTreeSet<String>,
) -> Result<Vec<ParityMap>, SynthError> {
    names
        .iter()
        .map(|n| {
            table
                .resolve(n)
                .ok_or_else(|| SynthError::Decide(DecideError::UnboundCondition(n.clone())))
        })
        .collect()
}

fn project_lasso(lasso: &Lasso, orig: &[StateId], fold: usize) -> Lasso {
    let proj = |steps: &[(StateId, ActionId)]| {
        steps.iter().map(|&(v, a)| (orig[v % fold], a)).collect()
    };
    Lasso { stem: proj(&lasso.stem), cycle: proj(&lasso.cycle) }
}

/// Synthesize a witness strategy for a whole clause from `s`: the global
/// switch-on-entry strategy for the sure/almost-sure part, wrapped per
/// non-zero atom in a coin-lasso controller handing over to an ε-scheduled
/// controller, per existential atom in a plain coin-lasso controller, and
/// mixed uniformly.
pub fn synth_for_clause(
    m: &Mdp,
    table: &ConditionTable,
    s: StateId,
    c: &Clause,
) -> Result<Strategy, SynthError> {
    let v = decide::dispatch(m, table, s, c, Path::Auto)?;
    if !v.answer {
        return Err(SynthError::NotSatisfiable);
    }
    let certs = v.certificates.expect("yes verdicts carry certificates");
    let a_conds = resolve_all(table, &c.a)?;
    let as_conds = resolve_all(table, &c.r#as)?;
    let nz_conds = resolve_all(table, &c.nz)?;
    let e_conds = resolve_all(table, &c.e)?;

    let mut arms_inner = Vec::new();
    for ec in &certs.t2 {
        arms_inner.push(CarrierArm {
            carrier: ec.states.clone(),
            strategy: synth_sigma_c(m, ec, &a_conds, &as_conds)?,
        });
    }
    let (sigma_t, s1) = sigma_t_mealy(m, &a_conds, &certs.t2)?;
    debug_assert_eq!(s1, certs.s1);
    let global = synth_global(sigma_t, arms_inner);
    if nz_conds.is_empty() && e_conds.is_empty() {
        return Ok(global);
    }

    let pruned = restrict_within(m, &m.full_sub(), &certs.s1);
    let mecs = mec_decomposition(m, &pruned);
    let eps = half();
    let n_p = certs.pruned_states.len();
    let mut arms = Vec::new();
    for p in &nz_conds {
        let t3 = &certs.t3[&p.name];
        let lasso = project_lasso(&certs.nz_lassos[&p.name], &certs.pruned_states, n_p);
        let mut arrive = Vec::new();
        for mec in &mecs {
            if !mec.states.is_subset(t3) {
                continue;
            }
            arrive.push(CarrierArm {
                carrier: mec.states.clone(),
                strategy: synth_type_three(
                    m,
                    mec,
                    &a_conds,
                    &as_conds,
                    p,
                    global.clone(),
                    eps.clone(),
                )?,
            });
        }
        arms.push(synth_exist_switch(lasso, global.clone(), arrive));
    }
    for p in &e_conds {
        let lasso = project_lasso(&certs.e_lassos[&p.name], &certs.pruned_states, n_p);
        arms.push(synth_exist_switch(lasso, global.clone(), Vec::new()));
    }
    Ok(synth_mix(arms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graphalg::mec_decomposition;
    use crate::model::build_mdp;

    fn fixture(name: &str) -> (Mdp, Vec<ParityMap>) {
        let (_, m, conds) = fixtures::all()
            .into_iter()
            .find(|(n, _, _)| *n == name)
            .expect("fixture exists");
        (m, conds)
    }

    fn whole_mec(m: &Mdp) -> EndComponent {
        let mecs = mec_decomposition(m, &m.full_sub());
        assert_eq!(mecs.len(), 1);
        mecs.into_iter().next().unwrap()
    }

    #[test]
    fn as_witness_is_uniform_inside_d() {
        let (m, conds) = fixture("randomized_cycle");
        let c = whole_mec(&m);
        let refs: Vec<&ParityMap> = conds.iter().collect();
        let s = synth_as_conjunction(&m, &c, &refs).unwrap();
        let Strategy::MemorylessRand { act } = &s else { panic!("expected randomized") };
        let ci = m.state_index("c").unwrap();
        assert_eq!(act[&ci].len(), 2, "both actions at the hub get weight");
        let total: Prob = act[&ci].iter().map(|w| w.weight.clone()).sum();
        assert_eq!(total, Prob::one());
    }

    #[test]
    fn as_witness_singleton_self_loop() {
        let (m, conds) = fixture("two_absorbing_loops");
        // The end component {s1} with its self-loop; p1 there is 0 (even).
        let s1 = m.state_index("s1").unwrap();
        let a = m.action_index("a").unwrap();
        let c = EndComponent {
            states: BTreeSet::from([s1]),
            acts: BTreeMap::from([(s1, BTreeSet::from([a]))]),
        };
        let s = synth_as_conjunction(&m, &c, &[&conds[0]]).unwrap();
        let Strategy::MemorylessRand { act } = &s else { panic!() };
        assert_eq!(act[&s1], vec![WeightedAction { action: a, weight: Prob::one() }]);
    }

    #[test]
    fn as_witness_rejects_odd_component() {
        let (m, conds) = fixture("two_absorbing_loops");
        let s1 = m.state_index("s1").unwrap();
        let a = m.action_index("a").unwrap();
        let c = EndComponent {
            states: BTreeSet::from([s1]),
            acts: BTreeMap::from([(s1, BTreeSet::from([a]))]),
        };
        // p2 is 1 at s1: no almost-sure witness exists.
        let err = synth_as_conjunction(&m, &c, &[&conds[1]]).unwrap_err();
        assert_eq!(err, SynthError::NotSatisfiable);
    }

    #[test]
    fn schedule_trivial_when_targets_cover_carrier() {
        let (m, conds) = fixture("randomized_cycle");
        let c = whole_mec(&m);
        let refs: Vec<&ParityMap> = conds.iter().collect();
        let s2 = synth_as_conjunction(&m, &c, &refs).unwrap();
        let sch = schedule(&m, &c, &s2, &[c.states.clone()]);
        assert_eq!((sch.offset, sch.unit), (1, 0));
        assert_eq!(sch.n(1), 1);
        assert_eq!(sch.n(9), 1);
    }

    #[test]
    fn schedule_geometric_hitting() {
        // x: a → ½ x + ½ y; y: a → x. Target {y} is hit from x with
        // probability ½ per step.
        let m = build_mdp(
            &["x", "y"],
            &["a"],
            &[("x", "a", &[("x", 1, 2), ("y", 1, 2)]), ("y", "a", &[("x", 1, 1)])],
        );
        let c = whole_mec(&m);
        let sigma2 = Strategy::MemorylessDet {
            act: BTreeMap::from([(0, 0), (1, 0)]),
        };
        let t = BTreeSet::from([m.state_index("y").unwrap()]);
        let sch = schedule(&m, &c, &sigma2, &[t]);
        assert!(sch.unit >= 1);
        for i in 1..=6u64 {
            assert!(sch.n(i) >= i, "round lengths grow at least linearly");
            assert!(sch.n(i + 1) >= sch.n(i));
        }
    }

    #[test]
    fn sigma_c_on_probabilistic_cycle() {
        let (m, conds) = fixture("surely_almost_cycle");
        let c = whole_mec(&m);
        let s = synth_sigma_c(&m, &c, &conds[..1], &conds[1..]).unwrap();
        let Strategy::SigmaC { carrier, repair, schedule, .. } = &s else {
            panic!("expected the two-phase controller");
        };
        assert_eq!(carrier.len(), m.n_states());
        assert_eq!(repair.len(), 1);
        // The repair target is the dominant even set of p1.
        assert_eq!(repair[0].target, c_max_even(&c.states, &conds[0]));
        assert!(schedule.n(1) >= 1);
        // Every mode/state entry of the repair table emits an enabled action.
        for (&(_, st), &a) in &repair[0].table.act {
            assert!(m.enabled(st).contains(&a));
        }
    }

    #[test]
    fn sigma_c_without_sure_atoms_is_memoryless() {
        let (m, conds) = fixture("randomized_cycle");
        let c = whole_mec(&m);
        let s = synth_sigma_c(&m, &c, &[], &conds).unwrap();
        assert!(matches!(s, Strategy::MemorylessRand { .. }));
    }

    #[test]
    fn round_product_stays_above_one_minus_epsilon() {
        // f(i) = 1 − ε·2^{−i} for i = 1..=64: the exact product of round
        // success lower bounds never drops below 1 − ε.
        let eps = half();
        let mut product = Prob::one();
        let mut pow = Prob::one();
        for _ in 1..=64u32 {
            pow *= half();
            product *= Prob::one() - &eps * &pow;
            assert!(product >= Prob::one() - &eps);
        }
    }

    #[test]
    fn type_three_controller_shape() {
        let (m, conds) = fixture("escalating_rounds");
        let pruned = m.full_sub();
        let mecs = mec_decomposition(&m, &pruned);
        let q222 = m.state_index("q222").unwrap();
        let c = mecs.iter().find(|c| c.states.contains(&q222)).unwrap();
        let fallback = Strategy::MemorylessDet { act: BTreeMap::from([(0, 0)]) };
        let s = synth_type_three(
            &m,
            c,
            &conds[..1],
            &conds[1..2],
            &conds[2],
            fallback,
            half(),
        )
        .unwrap();
        let Strategy::TypeThree { targets, schedule, .. } = &s else { panic!() };
        assert_eq!(targets.len(), 1);
        assert!(schedule.n(2) >= schedule.n(1));
    }

    #[test]
    fn mix_of_one_is_identity() {
        let s = Strategy::MemorylessDet { act: BTreeMap::from([(0, 0)]) };
        assert_eq!(synth_mix(vec![s.clone()]), s);
        let mixed = synth_mix(vec![s.clone(), s.clone()]);
        assert!(matches!(mixed, Strategy::Mix { ref arms } if arms.len() == 2));
    }

    #[test]
    fn mealy_read_back_emits_enabled_actions() {
        let (m, conds) = fixture("memory_hub");
        let sub = m.full_sub();
        let r: BTreeSet<StateId> =
            ["nw", "ne"].iter().map(|n| m.state_index(n).unwrap()).collect();
        let (arena, sv, cv) = build_streett_buechi_arena_full(&m, &sub, &r, &conds[..1]);
        let sol = solve_streett_buechi(&arena);
        let domain: BTreeSet<StateId> = (0..m.n_states()).collect();
        assert!(domain.iter().all(|s| sol.winning.contains(&sv[s])));
        let table = mealy_of_sb(&m, &sub, &r, &sol, &sv, &cv, &domain);
        assert_eq!(table.init.len(), m.n_states());
        for (&(_, st), &a) in &table.act {
            assert!(m.enabled(st).contains(&a));
        }
        // Non-target states always have an action entry for their modes.
        for (&st, &q) in &table.init {
            if !r.contains(&st) {
                assert!(table.act.contains_key(&(q, st)));
            }
        }
    }

    #[test]
    fn clause_synthesis_composes() {
        let (m, conds) = fixture("escalating_rounds");
        let t = ConditionTable::new(conds);
        let c = Clause {
            a: BTreeSet::from(["p1".to_string()]),
            r#as: BTreeSet::from(["p2".to_string()]),
            nz: BTreeSet::from(["p3".to_string()]),
            e: BTreeSet::new(),
        };
        let s = m.state_index("s").unwrap();
        let strat = synth_for_clause(&m, &t, s, &c).unwrap();
        let Strategy::ExistSwitch { arrive, .. } = &strat else {
            panic!("single non-zero atom yields a coin-lasso controller");
        };
        assert!(!arrive.is_empty(), "hand-over to a scheduled controller exists");
        assert!(arrive
            .iter()
            .any(|arm| matches!(arm.strategy, Strategy::TypeThree { .. })));
    }

    #[test]
    fn clause_synthesis_rejects_unrealizable() {
        let (m, conds) = fixture("two_absorbing_loops");
        let t = ConditionTable::new(conds);
        let c = Clause {
            a: BTreeSet::from(["p2".to_string()]),
            r#as: BTreeSet::new(),
            nz: BTreeSet::new(),
            e: BTreeSet::new(),
        };
        let s1 = m.state_index("s1").unwrap();
        assert_eq!(synth_for_clause(&m, &t, s1, &c).unwrap_err(), SynthError::NotSatisfiable);
    }

    #[test]
    fn strategy_json_round_trip() {
        let (m, conds) = fixture("surely_almost_cycle");
        let t = ConditionTable::new(conds);
        let c = Clause {
            a: BTreeSet::from(["p1".to_string()]),
            r#as: BTreeSet::from(["p2".to_string()]),
            nz: BTreeSet::new(),
            e: BTreeSet::new(),
        };
        let s = m.state_index("s00").unwrap();
        let strat = synth_for_clause(&m, &t, s, &c).unwrap();
        let json = serde_json::to_string(&strat).unwrap();
        let back: Strategy = serde_json::from_str(&json).unwrap();
        assert_eq!(strat, back);
        assert!(json.contains("\"kind\""));
    }
}
