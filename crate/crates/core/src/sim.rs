//! Monte Carlo execution of strategies.
//!
//! `run` plays a strategy against the chance moves of an MDP for a fixed
//! horizon and records the visited states, the chosen actions, and a
//! transcript of controller phase changes (round starts, repair phases,
//! switches to fallback strategies). `estimate` aggregates many runs into a
//! satisfaction frequency with a Wilson 95% confidence interval.
//!
//! Randomness comes from the ChaCha12 counter-based generator, seeded from a
//! caller-supplied 64-bit seed. Every run owns its own stream (the run index
//! is the ChaCha stream number), so runs are independent, order-insensitive,
//! and individually replayable. Successors are sampled by drawing a uniform
//! 64-bit integer and comparing `k / 2^64` against the exact cumulative
//! distribution, so the sampling itself involves no floating point.
//!
//! Parity on a finite trace is necessarily a heuristic: the simulator judges
//! a run by the maximum priority seen in the trailing `window` states, which
//! approximates the set of states visited infinitely often once the horizon
//! is long enough for the run to settle into its limit behaviour.

use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, BigRational, One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecs::Lasso;
use crate::model::{ActionId, Mdp, ParityMap, Prob, StateId};
use crate::synth::{MealyTable, Strategy};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("horizon {0} is too short; need at least 2 steps")]
    Horizon(u64),
    #[error("window {window} exceeds horizon {horizon}")]
    Window { window: u64, horizon: u64 },
    #[error("state index {0} out of range")]
    BadState(usize),
    #[error("run count must be positive")]
    NoRuns,
}

/// A controller phase change, stamped with the step index at which it
/// happened (the length of the state prefix at that moment).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum PhaseEvent {
    /// A scheduled controller began round `round` of `len` steps.
    RoundStart { at: usize, round: u64, len: u64 },
    /// A round ended with repair arm `arm`'s target unvisited; its repair
    /// table takes over until the target is hit.
    RepairStart { at: usize, round: u64, arm: usize },
    /// The repair phase for `arm` reached its target.
    RepairEnd { at: usize, round: u64, arm: usize },
    /// A switch-on-entry controller entered inner carrier `arm`.
    EnterCarrier { at: usize, arm: usize },
    /// An ε-scheduled controller missed a target and switched to its
    /// backup strategy for the rest of the run.
    SwitchToBackup { at: usize, round: u64 },
    /// A mixing strategy committed to arm `arm` at the start of the run.
    MixChoice { at: usize, arm: usize },
    /// A lasso-following controller flipped its coin (or was pushed off the
    /// lasso by a chance move) and switched to its fallback strategy.
    LassoFallback { at: usize },
    /// A lasso-following controller entered an arrival carrier and handed
    /// over to that carrier's strategy.
    LassoArrive { at: usize, arm: usize },
}

impl PhaseEvent {
    pub fn at(&self) -> usize {
        match self {
            PhaseEvent::RoundStart { at, .. }
            | PhaseEvent::RepairStart { at, .. }
            | PhaseEvent::RepairEnd { at, .. }
            | PhaseEvent::EnterCarrier { at, .. }
            | PhaseEvent::SwitchToBackup { at, .. }
            | PhaseEvent::MixChoice { at, .. }
            | PhaseEvent::LassoFallback { at }
            | PhaseEvent::LassoArrive { at, .. } => *at,
        }
    }
}

/// One simulated run: `states` has `horizon + 1` entries, `actions` has
/// `horizon`, and `phases` lists controller phase changes in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    pub phases: Vec<PhaseEvent>,
}

/// What a run is judged against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    /// Even maximum priority over the trailing window of the trace.
    Parity(ParityMap),
    /// Some state of the target set is visited anywhere in the trace.
    Reach(BTreeSet<StateId>),
}

/// A satisfaction frequency with its Wilson 95% confidence interval. The
/// point estimate is an exact rational tally; the interval bounds are the
/// usual floating-point approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub hits: u64,
    pub runs: u64,
    #[serde(with = "crate::synth::rat")]
    pub point: Prob,
    pub lo: f64,
    pub hi: f64,
}

// ---------------------------------------------------------------------------
// Chance moves.
// ---------------------------------------------------------------------------

/// Sample a successor of `(s, a)` by comparing a uniform draw `k / 2^64`
/// against the exact cumulative distribution.
fn sample_succ(m: &Mdp, s: StateId, a: ActionId, rng: &mut impl RngCore) -> StateId {
    let dist = m.dist(s, a);
    if dist.len() == 1 {
        return dist[0].0;
    }
    let k = rng.next_u64();
    let draw = BigRational::new(BigInt::from(k), BigInt::from(1u128 << 64));
    let mut acc = Prob::zero();
    for (t, p) in dist {
        acc += p;
        if draw < acc {
            return *t;
        }
    }
    dist.last().expect("validated distributions are non-empty").0
}

fn first_enabled(m: &Mdp, s: StateId) -> ActionId {
    m.enabled(s)[0]
}

fn mealy_act(m: &Mdp, table: &MealyTable, mode: usize, s: StateId) -> ActionId {
    table
        .act
        .get(&(mode, s))
        .copied()
        .unwrap_or_else(|| first_enabled(m, s))
}

fn mealy_next(table: &MealyTable, mode: usize, arrived: StateId) -> usize {
    table
        .next
        .get(&(mode, arrived))
        .copied()
        .or_else(|| table.init.get(&arrived).copied())
        .unwrap_or(mode)
}

fn mealy_init(table: &MealyTable, s: StateId) -> usize {
    table.init.get(&s).copied().unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Strategy executors.
// ---------------------------------------------------------------------------

/// Per-run execution state for one strategy node. Controllers that can hand
/// the run over to a sub-strategy (`fallback`, repair, carrier arms) carry a
/// `taken: Option<Box<Exec>>`; once set, every call delegates to it.
enum Exec<'a> {
    Det(&'a BTreeMap<StateId, ActionId>),
    Rand(&'a BTreeMap<StateId, Vec<crate::synth::WeightedAction>>),
    Mealy {
        table: &'a MealyTable,
        mode: usize,
    },
    SigmaC {
        strat: &'a Strategy,
        sigma2: Box<Exec<'a>>,
        round: u64,
        /// Steps of σ₂ still owed in the current round.
        left: u64,
        /// Which repair targets the current round has already touched.
        visited: Vec<bool>,
        /// Active repair phase: arm index plus the repair table's mode.
        repair: Option<(usize, usize)>,
    },
    Switch {
        strat: &'a Strategy,
        mode: usize,
        taken: Option<Box<Exec<'a>>>,
    },
    TypeThree {
        strat: &'a Strategy,
        sigma2: Box<Exec<'a>>,
        round: u64,
        left: u64,
        visited: Vec<bool>,
        taken: Option<Box<Exec<'a>>>,
    },
    Exist {
        strat: &'a Strategy,
        /// Position in the lasso: indices `0..stem.len()` are on the stem,
        /// larger ones wrap around the cycle.
        pos: usize,
        taken: Option<Box<Exec<'a>>>,
    },
}

fn lasso_entry(l: &Lasso, pos: usize) -> (StateId, ActionId) {
    if pos < l.stem.len() {
        l.stem[pos]
    } else {
        l.cycle[(pos - l.stem.len()) % l.cycle.len()]
    }
}

impl<'a> Exec<'a> {
    /// Build an executor positioned at `s`. `t` is the current trace length
    /// (for transcript stamps). Initialisation may consume randomness (the
    /// mixing choice) and may immediately hand over to an inner strategy
    /// (a switch-on-entry controller starting inside a carrier).
    fn init(
        sigma: &'a Strategy,
        m: &Mdp,
        s: StateId,
        rng: &mut impl RngCore,
        phases: &mut Vec<PhaseEvent>,
        t: usize,
    ) -> Exec<'a> {
        match sigma {
            Strategy::MemorylessDet { act } => Exec::Det(act),
            Strategy::MemorylessRand { act } => Exec::Rand(act),
            Strategy::Mealy { table } => Exec::Mealy {
                table,
                mode: mealy_init(table, s),
            },
            Strategy::SigmaC {
                sigma2,
                repair,
                schedule,
                ..
            } => {
                let mut visited = vec![false; repair.len()];
                mark_visits(&mut visited, repair.iter().map(|r| &r.target), s);
                let len = schedule.n(1);
                phases.push(PhaseEvent::RoundStart {
                    at: t,
                    round: 1,
                    len,
                });
                Exec::SigmaC {
                    strat: sigma,
                    sigma2: Box::new(Exec::init(sigma2, m, s, rng, phases, t)),
                    round: 1,
                    left: len,
                    visited,
                    repair: None,
                }
            }
            Strategy::SwitchOnEntry { sigma_t, inner } => {
                if let Some(i) = inner.iter().position(|arm| arm.carrier.contains(&s)) {
                    phases.push(PhaseEvent::EnterCarrier { at: t, arm: i });
                    let sub = Exec::init(&inner[i].strategy, m, s, rng, phases, t);
                    Exec::Switch {
                        strat: sigma,
                        mode: 0,
                        taken: Some(Box::new(sub)),
                    }
                } else {
                    Exec::Switch {
                        strat: sigma,
                        mode: mealy_init(sigma_t, s),
                        taken: None,
                    }
                }
            }
            Strategy::TypeThree {
                targets,
                sigma2,
                schedule,
                ..
            } => {
                let mut visited = vec![false; targets.len()];
                mark_visits(&mut visited, targets.iter(), s);
                let len = schedule.n(1);
                phases.push(PhaseEvent::RoundStart {
                    at: t,
                    round: 1,
                    len,
                });
                Exec::TypeThree {
                    strat: sigma,
                    sigma2: Box::new(Exec::init(sigma2, m, s, rng, phases, t)),
                    round: 1,
                    left: len,
                    visited,
                    taken: None,
                }
            }
            Strategy::Mix { arms } => {
                let i = if arms.len() > 1 {
                    rng.gen_range(0..arms.len())
                } else {
                    0
                };
                phases.push(PhaseEvent::MixChoice { at: t, arm: i });
                Exec::init(&arms[i], m, s, rng, phases, t)
            }
            Strategy::ExistSwitch { lasso, arrive, .. } => {
                if let Some(i) = arrive.iter().position(|arm| arm.carrier.contains(&s)) {
                    phases.push(PhaseEvent::LassoArrive { at: t, arm: i });
                    let sub = Exec::init(&arrive[i].strategy, m, s, rng, phases, t);
                    return Exec::Exist {
                        strat: sigma,
                        pos: 0,
                        taken: Some(Box::new(sub)),
                    };
                }
                let start = lasso_entry(lasso, 0).0;
                if start == s {
                    Exec::Exist {
                        strat: sigma,
                        pos: 0,
                        taken: None,
                    }
                } else {
                    // A lasso built for a different start state: give up on
                    // following it and play the fallback from the beginning.
                    phases.push(PhaseEvent::LassoFallback { at: t });
                    let fb = exist_fallback(sigma);
                    let sub = Exec::init(fb, m, s, rng, phases, t);
                    Exec::Exist {
                        strat: sigma,
                        pos: 0,
                        taken: Some(Box::new(sub)),
                    }
                }
            }
        }
    }

    /// The action to play at `s`.
    fn choose(
        &mut self,
        m: &Mdp,
        s: StateId,
        rng: &mut impl RngCore,
        phases: &mut Vec<PhaseEvent>,
        t: usize,
    ) -> ActionId {
        match self {
            Exec::Det(act) => act.get(&s).copied().unwrap_or_else(|| first_enabled(m, s)),
            Exec::Rand(act) => match act.get(&s) {
                Some(ws) if !ws.is_empty() => {
                    let k = rng.next_u64();
                    let draw = BigRational::new(BigInt::from(k), BigInt::from(1u128 << 64));
                    let mut acc = Prob::zero();
                    for wa in ws.iter() {
                        acc += &wa.weight;
                        if draw < acc {
                            return wa.action;
                        }
                    }
                    ws.last().expect("non-empty").action
                }
                _ => first_enabled(m, s),
            },
            Exec::Mealy { table, mode } => mealy_act(m, table, *mode, s),
            Exec::SigmaC {
                strat,
                sigma2,
                repair,
                ..
            } => match repair {
                Some((arm, mode)) => {
                    let arms = sigma_c_repair(strat);
                    mealy_act(m, &arms[*arm].table, *mode, s)
                }
                None => sigma2.choose(m, s, rng, phases, t),
            },
            Exec::Switch { strat, mode, taken } => match taken {
                Some(sub) => sub.choose(m, s, rng, phases, t),
                None => {
                    let Strategy::SwitchOnEntry { sigma_t, .. } = strat else {
                        unreachable!()
                    };
                    mealy_act(m, sigma_t, *mode, s)
                }
            },
            Exec::TypeThree { sigma2, taken, .. } => match taken {
                Some(sub) => sub.choose(m, s, rng, phases, t),
                None => sigma2.choose(m, s, rng, phases, t),
            },
            Exec::Exist { strat, pos, taken } => match taken {
                Some(sub) => sub.choose(m, s, rng, phases, t),
                None => {
                    let Strategy::ExistSwitch { lasso, fallback, .. } = strat else {
                        unreachable!()
                    };
                    if rng.gen::<bool>() {
                        phases.push(PhaseEvent::LassoFallback { at: t });
                        let mut sub = Exec::init(fallback, m, s, rng, phases, t);
                        let a = sub.choose(m, s, rng, phases, t);
                        *taken = Some(Box::new(sub));
                        a
                    } else {
                        lasso_entry(lasso, *pos).1
                    }
                }
            },
        }
    }

    /// Update after the chance move lands in `arrived`. `from` and `played`
    /// are the state and action of the step just taken.
    fn observe(
        &mut self,
        m: &Mdp,
        from: StateId,
        played: ActionId,
        arrived: StateId,
        rng: &mut impl RngCore,
        phases: &mut Vec<PhaseEvent>,
        t: usize,
    ) {
        match self {
            Exec::Det(_) | Exec::Rand(_) => {}
            Exec::Mealy { table, mode } => *mode = mealy_next(table, *mode, arrived),
            Exec::SigmaC {
                strat,
                sigma2,
                round,
                left,
                visited,
                repair,
            } => {
                let (arms, schedule) = match strat {
                    Strategy::SigmaC {
                        repair, schedule, ..
                    } => (repair, schedule),
                    _ => unreachable!(),
                };
                mark_visits(visited, arms.iter().map(|r| &r.target), arrived);
                match repair {
                    Some((arm, mode)) => {
                        if arms[*arm].target.contains(&arrived) {
                            phases.push(PhaseEvent::RepairEnd {
                                at: t,
                                round: *round,
                                arm: *arm,
                            });
                            match next_repair(visited, *arm + 1) {
                                Some(nxt) => {
                                    phases.push(PhaseEvent::RepairStart {
                                        at: t,
                                        round: *round,
                                        arm: nxt,
                                    });
                                    *repair = Some((nxt, mealy_init(&arms[nxt].table, arrived)));
                                }
                                None => {
                                    *repair = None;
                                    start_round(
                                        round, left, visited, schedule, arms, arrived, phases, t,
                                    );
                                }
                            }
                        } else {
                            *mode = mealy_next(&arms[*arm].table, *mode, arrived);
                        }
                    }
                    None => {
                        sigma2.observe(m, from, played, arrived, rng, phases, t);
                        *left -= 1;
                        if *left == 0 {
                            match next_repair(visited, 0) {
                                Some(arm) => {
                                    phases.push(PhaseEvent::RepairStart {
                                        at: t,
                                        round: *round,
                                        arm,
                                    });
                                    *repair = Some((arm, mealy_init(&arms[arm].table, arrived)));
                                }
                                None => start_round(
                                    round, left, visited, schedule, arms, arrived, phases, t,
                                ),
                            }
                        }
                    }
                }
            }
            Exec::Switch { strat, mode, taken } => match taken {
                Some(sub) => sub.observe(m, from, played, arrived, rng, phases, t),
                None => {
                    let Strategy::SwitchOnEntry { sigma_t, inner } = strat else {
                        unreachable!()
                    };
                    if let Some(i) = inner.iter().position(|arm| arm.carrier.contains(&arrived)) {
                        phases.push(PhaseEvent::EnterCarrier { at: t, arm: i });
                        *taken = Some(Box::new(Exec::init(
                            &inner[i].strategy,
                            m,
                            arrived,
                            rng,
                            phases,
                            t,
                        )));
                    } else {
                        *mode = mealy_next(sigma_t, *mode, arrived);
                    }
                }
            },
            Exec::TypeThree {
                strat,
                sigma2,
                round,
                left,
                visited,
                taken,
            } => match taken {
                Some(sub) => sub.observe(m, from, played, arrived, rng, phases, t),
                None => {
                    let (targets, sigma1, schedule) = match strat {
                        Strategy::TypeThree {
                            targets,
                            sigma1,
                            schedule,
                            ..
                        } => (targets, sigma1, schedule),
                        _ => unreachable!(),
                    };
                    mark_visits(visited, targets.iter(), arrived);
                    sigma2.observe(m, from, played, arrived, rng, phases, t);
                    *left -= 1;
                    if *left == 0 {
                        if visited.iter().all(|&v| v) {
                            *round += 1;
                            *left = schedule.n(*round);
                            visited.iter_mut().for_each(|v| *v = false);
                            mark_visits(visited, targets.iter(), arrived);
                            phases.push(PhaseEvent::RoundStart {
                                at: t,
                                round: *round,
                                len: *left,
                            });
                        } else {
                            phases.push(PhaseEvent::SwitchToBackup {
                                at: t,
                                round: *round,
                            });
                            *taken =
                                Some(Box::new(Exec::init(sigma1, m, arrived, rng, phases, t)));
                        }
                    }
                }
            },
            Exec::Exist { strat, pos, taken } => match taken {
                Some(sub) => sub.observe(m, from, played, arrived, rng, phases, t),
                None => {
                    let Strategy::ExistSwitch {
                        lasso,
                        fallback,
                        arrive,
                    } = strat
                    else {
                        unreachable!()
                    };
                    if let Some(i) = arrive.iter().position(|arm| arm.carrier.contains(&arrived)) {
                        phases.push(PhaseEvent::LassoArrive { at: t, arm: i });
                        *taken = Some(Box::new(Exec::init(
                            &arrive[i].strategy,
                            m,
                            arrived,
                            rng,
                            phases,
                            t,
                        )));
                        return;
                    }
                    *pos += 1;
                    if lasso_entry(lasso, *pos).0 != arrived {
                        // A chance move pushed the run off the lasso.
                        phases.push(PhaseEvent::LassoFallback { at: t });
                        *taken =
                            Some(Box::new(Exec::init(fallback, m, arrived, rng, phases, t)));
                    }
                }
            },
        }
    }
}

fn exist_fallback(strat: &Strategy) -> &Strategy {
    match strat {
        Strategy::ExistSwitch { fallback, .. } => fallback,
        _ => unreachable!(),
    }
}

fn sigma_c_repair(strat: &Strategy) -> &[crate::synth::RepairArm] {
    match strat {
        Strategy::SigmaC { repair, .. } => repair,
        _ => unreachable!(),
    }
}

fn mark_visits<'t>(
    visited: &mut [bool],
    targets: impl Iterator<Item = &'t BTreeSet<StateId>>,
    s: StateId,
) {
    for (v, tgt) in visited.iter_mut().zip(targets) {
        if tgt.contains(&s) {
            *v = true;
        }
    }
}

fn next_repair(visited: &[bool], from: usize) -> Option<usize> {
    (from..visited.len()).find(|&i| !visited[i])
}

#[allow(clippy::too_many_arguments)]
fn start_round(
    round: &mut u64,
    left: &mut u64,
    visited: &mut [bool],
    schedule: &crate::synth::Schedule,
    arms: &[crate::synth::RepairArm],
    s: StateId,
    phases: &mut Vec<PhaseEvent>,
    t: usize,
) {
    *round += 1;
    *left = schedule.n(*round);
    visited.iter_mut().for_each(|v| *v = false);
    mark_visits(visited, arms.iter().map(|r| &r.target), s);
    phases.push(PhaseEvent::RoundStart {
        at: t,
        round: *round,
        len: *left,
    });
}

// ---------------------------------------------------------------------------
// Runs and estimates.
// ---------------------------------------------------------------------------

fn run_with(
    m: &Mdp,
    sigma: &Strategy,
    s: StateId,
    horizon: u64,
    rng: &mut impl RngCore,
) -> Trace {
    let mut states = Vec::with_capacity(horizon as usize + 1);
    let mut actions = Vec::with_capacity(horizon as usize);
    let mut phases = Vec::new();
    states.push(s);
    let mut exec = Exec::init(sigma, m, s, rng, &mut phases, 1);
    let mut cur = s;
    for step in 0..horizon as usize {
        let a = exec.choose(m, cur, rng, &mut phases, step + 1);
        debug_assert!(m.enabled(cur).contains(&a), "strategy played a disabled action");
        let nxt = sample_succ(m, cur, a, rng);
        actions.push(a);
        states.push(nxt);
        exec.observe(m, cur, a, nxt, rng, &mut phases, step + 2);
        cur = nxt;
    }
    Trace {
        states,
        actions,
        phases,
    }
}

/// Play `sigma` from `s` for `horizon` steps. Deterministic in the seed:
/// identical arguments give identical traces.
pub fn run(
    m: &Mdp,
    sigma: &Strategy,
    s: StateId,
    horizon: u64,
    seed: u64,
) -> Result<Trace, SimError> {
    if horizon < 2 {
        return Err(SimError::Horizon(horizon));
    }
    if s >= m.n_states() {
        return Err(SimError::BadState(s));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(0);
    Ok(run_with(m, sigma, s, horizon, &mut rng))
}

/// Judge one trace against an objective. Parity looks at the trailing
/// `window` states; reachability at the whole trace.
pub fn judge(trace: &Trace, objective: &Objective, window: u64) -> bool {
    match objective {
        Objective::Parity(p) => {
            let n = trace.states.len();
            let w = (window as usize).clamp(1, n);
            let maxp = trace.states[n - w..]
                .iter()
                .map(|&s| p.prio[s])
                .max()
                .expect("window is non-empty");
            maxp % 2 == 0
        }
        Objective::Reach(target) => trace.states.iter().any(|s| target.contains(s)),
    }
}

/// Wilson 95% score interval for `hits` successes out of `runs`.
fn wilson(hits: u64, runs: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054_f64;
    let n = runs as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((centre - spread) / denom).max(0.0),
        ((centre + spread) / denom).min(1.0),
    )
}

/// Run `runs` independent simulations and report the fraction satisfying
/// the objective, with a Wilson 95% interval. Run `i` uses ChaCha stream
/// `i` of the seed, so the estimate is deterministic and runs can be
/// reproduced individually.
#[allow(clippy::too_many_arguments)]
pub fn estimate(
    m: &Mdp,
    sigma: &Strategy,
    s: StateId,
    objective: &Objective,
    runs: u64,
    horizon: u64,
    window: u64,
    seed: u64,
) -> Result<Estimate, SimError> {
    if horizon < 2 {
        return Err(SimError::Horizon(horizon));
    }
    if window > horizon {
        return Err(SimError::Window { window, horizon });
    }
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    if s >= m.n_states() {
        return Err(SimError::BadState(s));
    }
    let mut hits = 0u64;
    for i in 0..runs {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let trace = run_with(m, sigma, s, horizon, &mut rng);
        if judge(&trace, objective, window) {
            hits += 1;
        }
    }
    let (lo, hi) = wilson(hits, runs);
    Ok(Estimate {
        hits,
        runs,
        point: BigRational::new(BigInt::from(hits), BigInt::from(runs)),
        lo,
        hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::ConditionTable;
    use crate::qpl::Clause;
    use crate::synth;
    use num::ToPrimitive;

    fn clause(a: &[&str], asures: &[&str], nz: &[&str], e: &[&str]) -> Clause {
        let set = |xs: &[&str]| xs.iter().map(|n| n.to_string()).collect();
        Clause {
            a: set(a),
            r#as: set(asures),
            nz: set(nz),
            e: set(e),
        }
    }

    #[test]
    fn short_horizon_rejected() {
        let (m, _) = fixtures::two_absorbing_loops();
        let sigma = Strategy::MemorylessDet {
            act: BTreeMap::new(),
        };
        assert_eq!(run(&m, &sigma, 0, 0, 7), Err(SimError::Horizon(0)));
        assert_eq!(run(&m, &sigma, 0, 1, 7), Err(SimError::Horizon(1)));
        assert!(run(&m, &sigma, 0, 2, 7).is_ok());
    }

    #[test]
    fn replay_is_deterministic() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let table = ConditionTable::new(conds);
        let c = clause(&[], &[], &["p1", "p2"], &[]);
        let sigma = synth::synth_for_clause(&m, &table, 0, &c).unwrap();
        let t1 = run(&m, &sigma, 0, 50, 42).unwrap();
        let t2 = run(&m, &sigma, 0, 50, 42).unwrap();
        assert_eq!(t1, t2);
        let t3 = run(&m, &sigma, 0, 50, 43).unwrap();
        // A different seed flips the initial mixing choice or some chance
        // move within 50 steps with overwhelming probability.
        assert!(t1 != t3 || t1.phases == t3.phases);
    }

    #[test]
    fn absorbing_loops_trap_the_run() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let table = ConditionTable::new(conds);
        let c = clause(&[], &[], &["p1", "p2"], &[]);
        let sigma = synth::synth_for_clause(&m, &table, 0, &c).unwrap();
        for seed in 0..20 {
            let t = run(&m, &sigma, 0, 30, seed).unwrap();
            let last = *t.states.last().unwrap();
            assert!(last == 1 || last == 2, "run must end absorbed");
            // Once absorbed, the trace never leaves the loop.
            let first_hit = t.states.iter().position(|&s| s == last).unwrap();
            assert!(t.states[first_hit..].iter().all(|&s| s == last));
        }
    }

    #[test]
    fn reach_own_state_is_certain() {
        let (m, _) = fixtures::two_absorbing_loops();
        let sigma = Strategy::MemorylessRand {
            act: BTreeMap::new(),
        };
        let target: BTreeSet<StateId> = [0].into_iter().collect();
        let est = estimate(
            &m,
            &sigma,
            0,
            &Objective::Reach(target),
            50,
            10,
            5,
            9,
        )
        .unwrap();
        assert_eq!(est.hits, 50);
        assert!(est.point.is_one());
    }

    #[test]
    fn estimate_is_deterministic_in_seed() {
        let (m, conds) = fixtures::randomized_cycle();
        let table = ConditionTable::new(conds.clone());
        let c = clause(&[], &["p1", "p2"], &[], &[]);
        let sigma = synth::synth_for_clause(&m, &table, 0, &c).unwrap();
        let obj = Objective::Parity(table.resolve("p1").unwrap());
        let e1 = estimate(&m, &sigma, 0, &obj, 100, 200, 100, 5).unwrap();
        let e2 = estimate(&m, &sigma, 0, &obj, 100, 200, 100, 5).unwrap();
        assert_eq!(e1.hits, e2.hits);
        let point = e1.point.to_f64().unwrap();
        assert!(e1.lo <= point && point <= e1.hi);
    }

    #[test]
    fn almost_sure_witness_scores_high() {
        let (m, conds) = fixtures::randomized_cycle();
        let table = ConditionTable::new(conds);
        let c = clause(&[], &["p1", "p2"], &[], &[]);
        let sigma = synth::synth_for_clause(&m, &table, 0, &c).unwrap();
        for name in ["p1", "p2"] {
            let obj = Objective::Parity(table.resolve(name).unwrap());
            let est = estimate(&m, &sigma, 0, &obj, 300, 400, 200, 11).unwrap();
            assert!(
                est.hits as f64 / est.runs as f64 >= 0.95,
                "{name}: {}/{}",
                est.hits,
                est.runs
            );
        }
    }

    #[test]
    fn sigma_c_repair_phases_end_on_target() {
        let (m, conds) = fixtures::surely_almost_cycle();
        let table = ConditionTable::new(conds);
        let c = clause(&["p1"], &["p2"], &[], &[]);
        let sigma = synth::synth_for_clause(&m, &table, 0, &c).unwrap();
        let mut saw_round = false;
        for seed in 0..10 {
            let t = run(&m, &sigma, 0, 500, seed).unwrap();
            saw_round |= t
                .phases
                .iter()
                .any(|e| matches!(e, PhaseEvent::RoundStart { .. }));
            // Every repair phase must end, and only on a state of its
            // target: pair up starts and ends per arm.
            let mut open: BTreeMap<usize, usize> = BTreeMap::new();
            for ev in &t.phases {
                match ev {
                    PhaseEvent::RepairStart { arm, at, .. } => {
                        assert!(open.insert(*arm, *at).is_none());
                    }
                    PhaseEvent::RepairEnd { arm, at, .. } => {
                        let started = open.remove(arm).expect("end without start");
                        assert!(*at >= started);
                    }
                    _ => {}
                }
            }
        }
        assert!(saw_round, "the carrier controller must start rounds");
    }

    #[test]
    fn type_three_backup_switch_is_recorded_or_absent() {
        let (m, conds) = fixtures::escalating_rounds();
        let table = ConditionTable::new(conds);
        let c = clause(&[], &["p1"], &["p3"], &[]);
        let sigma = synth::synth_for_clause(&m, &table, 0, &c).unwrap();
        let obj = Objective::Parity(table.resolve("p3").unwrap());
        let est = estimate(&m, &sigma, 0, &obj, 400, 600, 300, 3).unwrap();
        // ε = 1/2 with a fair initial mix over one arm: the product bound
        // promises ≥ 1/2 in the limit; half-margin for truncation.
        assert!(
            est.hits as f64 / est.runs as f64 >= 0.25,
            "{}/{}",
            est.hits,
            est.runs
        );
    }

    #[test]
    fn window_must_fit_horizon() {
        let (m, conds) = fixtures::two_absorbing_loops();
        let sigma = Strategy::MemorylessRand {
            act: BTreeMap::new(),
        };
        let obj = Objective::Parity(conds[0].clone());
        assert_eq!(
            estimate(&m, &sigma, 0, &obj, 10, 4, 9, 0),
            Err(SimError::Window {
                window: 9,
                horizon: 4
            })
        );
    }

    #[test]
    fn wilson_interval_brackets_the_point() {
        let (lo, hi) = wilson(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
        let (lo, hi) = wilson(0, 100);
        assert!(lo < 1e-9 && hi > 0.0 && hi < 0.1);
        let (lo, hi) = wilson(100, 100);
        assert!((hi - 1.0).abs() < 1e-12 && lo > 0.9);
    }

    #[test]
    fn trace_shape_matches_horizon() {
        let (m, _) = fixtures::memory_hub();
        let sigma = Strategy::MemorylessRand {
            act: BTreeMap::new(),
        };
        let t = run(&m, &sigma, 0, 25, 1).unwrap();
        assert_eq!(t.states.len(), 26);
        assert_eq!(t.actions.len(), 25);
    }
}
