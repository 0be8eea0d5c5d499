//! Small hand-built models used across tests, the acceptance suite, and the
//! CLI examples. Each constructor returns the MDP together with its parity
//! conditions; state names encode the priority vectors where that helps
//! reading transcripts.

use crate::model::{build_mdp, Mdp, ParityMap};

fn pmap(name: &str, prio: &[u32]) -> ParityMap {
    ParityMap { name: name.to_string(), prio: prio.to_vec() }
}

/// Three states, two absorbing self-loops with complementary priorities.
/// From `s0`, action `a` commits to the (0,1) loop and `b` to the (1,0)
/// loop; winning NZ(p1) & NZ(p2) from `s0` needs randomization.
pub fn two_absorbing_loops() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["s0", "s1", "s2"],
        &["a", "b"],
        &[
            ("s0", "a", &[("s1", 1, 1)]),
            ("s0", "b", &[("s2", 1, 1)]),
            ("s1", "a", &[("s1", 1, 1)]),
            ("s2", "b", &[("s2", 1, 1)]),
        ],
    );
    let p1 = pmap("p1", &[0, 0, 1]);
    let p2 = pmap("p2", &[0, 1, 0]);
    (m, vec![p1, p2])
}

/// A branch state with one even and one odd absorbing successor. Neither
/// A(p) nor E(p~) alone is winning from `s`, so !A(p) holds while E(p~)
/// fails: the negation dualities hold for strategies, not for states.
pub fn even_odd_branch() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["s", "left", "right"],
        &["a", "b"],
        &[
            ("s", "a", &[("left", 1, 1)]),
            ("s", "b", &[("right", 1, 1)]),
            ("left", "a", &[("left", 1, 1)]),
            ("right", "a", &[("right", 1, 1)]),
        ],
    );
    let p = pmap("p", &[0, 1, 0]);
    (m, vec![p])
}

/// A strongly connected EC with priorities 1, 2, 4: alternating `b`/`a`
/// between `s` and `t` secures the even cycle, while `a` from `s` risks the
/// absorbing priority-4 state. Canonical carrier for the sure/almost-sure
/// game construction.
pub fn alternating_ec() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["s", "t", "u"],
        &["a", "b"],
        &[
            ("s", "b", &[("t", 1, 1)]),
            ("t", "a", &[("s", 1, 1)]),
            ("s", "a", &[("s", 1, 2), ("u", 1, 2)]),
            ("u", "a", &[("u", 1, 1)]),
        ],
    );
    let p = pmap("p", &[1, 2, 4]);
    (m, vec![p])
}

/// A single EC where A(p1) & AS(p2) needs the round-based scheduled
/// strategy: the left cycle through (2,2) serves p2, the right cycle
/// through (2,1) repairs p1, and rounds lengthen so the repair tour is
/// taken only finitely often with probability one.
pub fn surely_almost_cycle() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["q22", "q11", "s00", "q05", "q21"],
        &["a", "b"],
        &[
            ("q22", "a", &[("s00", 1, 1)]),
            ("s00", "b", &[("q11", 1, 1)]),
            ("q11", "a", &[("q22", 1, 2), ("s00", 1, 2)]),
            ("s00", "a", &[("q05", 1, 1)]),
            ("q05", "a", &[("s00", 1, 2), ("q21", 1, 2)]),
            ("q21", "a", &[("s00", 1, 1)]),
        ],
    );
    let p1 = pmap("p1", &[2, 1, 0, 0, 2]);
    let p2 = pmap("p2", &[2, 1, 0, 5, 1]);
    (m, vec![p1, p2])
}

/// A hub with four satellites where A(p1) together with almost-surely
/// reaching the dominant-even states {nw, ne} is winnable from the hub only
/// with memory: alternate `b` and `c`. Any fixed memoryless choice either
/// risks the odd-dominant `sw`, loops on the hub's odd priority, or never
/// reaches {nw, ne}.
pub fn memory_hub() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["hub", "nw", "sw", "ne", "se"],
        &["a", "b", "c"],
        &[
            ("hub", "a", &[("nw", 1, 2), ("sw", 1, 2)]),
            ("hub", "b", &[("ne", 1, 2), ("hub", 1, 2)]),
            ("hub", "c", &[("se", 1, 1)]),
            ("nw", "a", &[("hub", 1, 1)]),
            ("sw", "a", &[("hub", 1, 1)]),
            ("ne", "a", &[("hub", 1, 1)]),
            ("se", "a", &[("hub", 1, 1)]),
        ],
    );
    let p1 = pmap("p1", &[1, 4, 3, 4, 2]);
    let p2 = pmap("p2", &[1, 4, 3, 3, 3]);
    (m, vec![p1, p2])
}

/// A three-state line where a randomized memoryless strategy from the
/// middle (0,0) state wins AS(p1) & AS(p2) by visiting both neighbors
/// infinitely often, but no deterministic memoryless strategy does.
pub fn randomized_cycle() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["l", "c", "r"],
        &["a", "b"],
        &[
            ("l", "a", &[("c", 1, 1)]),
            ("c", "a", &[("l", 1, 1)]),
            ("c", "b", &[("r", 1, 1)]),
            ("r", "a", &[("c", 1, 1)]),
        ],
    );
    let p1 = pmap("p1", &[1, 0, 2]);
    let p2 = pmap("p2", &[2, 0, 1]);
    (m, vec![p1, p2])
}

/// Three parity maps over four states; A(p1) & AS(p2) & NZ(p3) from `s`
/// requires rounds whose success probability is tuned so the NZ branch
/// keeps positive mass: the round-based strategy with vanishing switch
/// probability.
pub fn escalating_rounds() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["s", "q221", "r111", "q222"],
        &["a", "b"],
        &[
            ("s", "a", &[("q221", 1, 1)]),
            ("q221", "a", &[("q221", 1, 1)]),
            ("s", "b", &[("r111", 1, 1)]),
            ("r111", "a", &[("s", 1, 2), ("q222", 1, 2)]),
            ("q222", "a", &[("s", 1, 1)]),
        ],
    );
    let p1 = pmap("p1", &[1, 2, 1, 2]);
    let p2 = pmap("p2", &[1, 2, 1, 2]);
    let p3 = pmap("p3", &[1, 1, 1, 2]);
    (m, vec![p1, p2, p3])
}

/// Two states where AS(p1) & E(p2) needs randomization and one bit of
/// memory: toss a coin at (0,1); heads plays `b` back, the first tails
/// locks `a` forever.
pub fn coin_memory() -> (Mdp, Vec<ParityMap>) {
    let m = build_mdp(
        &["s10", "s01"],
        &["a", "b"],
        &[
            ("s10", "a", &[("s01", 1, 1)]),
            ("s01", "b", &[("s10", 1, 1)]),
            ("s01", "a", &[("s01", 1, 1)]),
        ],
    );
    let p1 = pmap("p1", &[1, 0]);
    let p2 = pmap("p2", &[2, 1]);
    (m, vec![p1, p2])
}

/// Every fixture, paired with a stable name, for sweep-style tests.
pub fn all() -> Vec<(&'static str, Mdp, Vec<ParityMap>)> {
    let mut out = Vec::new();
    for (name, f) in [
        ("two_absorbing_loops", two_absorbing_loops as fn() -> (Mdp, Vec<ParityMap>)),
        ("even_odd_branch", even_odd_branch),
        ("alternating_ec", alternating_ec),
        ("surely_almost_cycle", surely_almost_cycle),
        ("memory_hub", memory_hub),
        ("randomized_cycle", randomized_cycle),
        ("escalating_rounds", escalating_rounds),
        ("coin_memory", coin_memory),
    ] {
        let (m, conds) = f();
        out.push((name, m, conds));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_well_formed() {
        for (name, m, conds) in all() {
            assert!(m.n_states() >= 2, "{name}");
            for c in &conds {
                assert_eq!(c.prio.len(), m.n_states(), "{name}:{}", c.name);
            }
        }
    }

    #[test]
    fn fixtures_round_trip_through_text_format() {
        for (name, m, conds) in all() {
            let text = crate::format::emit_mdp(&m, &conds);
            let (m2, c2) = crate::format::parse_mdp(&text).unwrap_or_else(|e| {
                panic!("{name}: {e}");
            });
            assert_eq!(m.state_names, m2.state_names, "{name}");
            for s in 0..m.n_states() {
                for &a in m.enabled(s) {
                    assert_eq!(m.dist(s, a), m2.dist(s, a), "{name} {s} {a}");
                }
            }
            assert_eq!(conds.len(), c2.len(), "{name}");
        }
    }
}
