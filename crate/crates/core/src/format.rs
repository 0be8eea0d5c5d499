//! Line-oriented text format for MDPs with named parity conditions.
//!
//! ```text
//! mdp
//! # comment
//! states: s0 s1 s2
//! actions: a b
//! parity p1: s0=0 s1=0 s2=1
//! trans s0 a: s1=1
//! trans s0 b: s1=1/2 s2=1/2
//! ```
//!
//! Probabilities are exact rationals, `num/den` or an integer; every `trans`
//! distribution must sum to 1 exactly.

use crate::model::{Dist, Mdp, ModelError, ParityMap, Prob};
use num::BigInt;
use std::collections::BTreeMap;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `mdp` header")]
    MissingHeader,
    #[error("missing `states:` declaration")]
    MissingStates,
    #[error("missing `actions:` declaration")]
    MissingActions,
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: unknown action `{name}`")]
    UnknownAction { line: usize, name: String },
    #[error("model error: {0}")]
    Model(#[from] ModelError),
}

fn err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

/// Parse an MDP and its named parity conditions from the text format.
pub fn parse_mdp(text: &str) -> Result<(Mdp, Vec<ParityMap>), FormatError> {
    let mut states: Option<Vec<String>> = None;
    let mut actions: Option<Vec<String>> = None;
    let mut parities: Vec<(usize, String, Vec<(String, u32)>)> = Vec::new();
    let mut trans_lines: Vec<(usize, String, String, Vec<(String, Prob)>)> = Vec::new();
    let mut saw_header = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line == "mdp" {
                saw_header = true;
                continue;
            }
            return Err(FormatError::MissingHeader);
        }
        if let Some(rest) = line.strip_prefix("states:") {
            states = Some(rest.split_whitespace().map(str::to_string).collect());
        } else if let Some(rest) = line.strip_prefix("actions:") {
            actions = Some(rest.split_whitespace().map(str::to_string).collect());
        } else if let Some(rest) = line.strip_prefix("parity ") {
            let (name, body) = rest
                .split_once(':')
                .ok_or_else(|| err(lineno, "expected `parity <name>: ...`"))?;
            let mut prios = Vec::new();
            for item in body.split_whitespace() {
                let (s, v) = item
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("expected `state=nat`, got `{item}`")))?;
                let v: u32 = v
                    .parse()
                    .map_err(|_| err(lineno, format!("bad priority `{v}`")))?;
                prios.push((s.to_string(), v));
            }
            parities.push((lineno, name.trim().to_string(), prios));
        } else if let Some(rest) = line.strip_prefix("trans ") {
            let (head, body) = rest
                .split_once(':')
                .ok_or_else(|| err(lineno, "expected `trans <state> <action>: ...`"))?;
            let mut it = head.split_whitespace();
            let s = it.next().ok_or_else(|| err(lineno, "missing state"))?;
            let a = it.next().ok_or_else(|| err(lineno, "missing action"))?;
            if it.next().is_some() {
                return Err(err(lineno, "trailing tokens before `:`"));
            }
            let mut dist = Vec::new();
            for item in body.split_whitespace() {
                let (succ, p) = item
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("expected `state=prob`, got `{item}`")))?;
                let p = parse_prob(p).ok_or_else(|| err(lineno, format!("bad probability `{p}`")))?;
                dist.push((succ.to_string(), p));
            }
            if dist.is_empty() {
                return Err(err(lineno, "empty distribution"));
            }
            trans_lines.push((lineno, s.to_string(), a.to_string(), dist));
        } else {
            return Err(err(lineno, format!("unrecognized line `{line}`")));
        }
    }

    if !saw_header {
        return Err(FormatError::MissingHeader);
    }
    let state_names = states.ok_or(FormatError::MissingStates)?;
    let action_names = actions.ok_or(FormatError::MissingActions)?;
    let sidx = |line: usize, n: &str| {
        state_names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| FormatError::UnknownState { line, name: n.to_string() })
    };
    let aidx = |line: usize, n: &str| {
        action_names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| FormatError::UnknownAction { line, name: n.to_string() })
    };

    let mut trans: BTreeMap<(usize, usize), Dist> = BTreeMap::new();
    for (line, s, a, dist) in trans_lines {
        let key = (sidx(line, &s)?, aidx(line, &a)?);
        if trans.contains_key(&key) {
            return Err(err(line, format!("duplicate `trans {s} {a}`")));
        }
        let mut d = Vec::new();
        for (succ, p) in dist {
            d.push((sidx(line, &succ)?, p));
        }
        trans.insert(key, d);
    }
    let mdp = Mdp::new(state_names.clone(), action_names, trans)?;

    let mut conds = Vec::new();
    for (line, name, pairs) in parities {
        let mut prio = vec![None; state_names.len()];
        for (s, v) in pairs {
            prio[sidx(line, &s)?] = Some(v);
        }
        let prio: Vec<u32> = prio
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    FormatError::Model(ModelError::MissingPriority {
                        name: name.clone(),
                        state: state_names[i].clone(),
                    })
                })
            })
            .collect::<Result<_, _>>()?;
        conds.push(ParityMap::new(name, prio));
    }
    Ok((mdp, conds))
}

fn parse_prob(s: &str) -> Option<Prob> {
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n).ok()?;
        let d = BigInt::from_str(d).ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        Some(Prob::new(n, d))
    } else {
        let n = BigInt::from_str(s).ok()?;
        Some(Prob::from(n))
    }
}

/// Emit an MDP and conditions in the text format; `parse_mdp` inverts this.
pub fn emit_mdp(m: &Mdp, conds: &[ParityMap]) -> String {
    let mut out = String::from("mdp\n");
    out.push_str(&format!("states: {}\n", m.state_names.join(" ")));
    out.push_str(&format!("actions: {}\n", m.action_names.join(" ")));
    for c in conds {
        let body: Vec<String> = c
            .prio
            .iter()
            .enumerate()
            .map(|(s, v)| format!("{}={}", m.state_names[s], v))
            .collect();
        out.push_str(&format!("parity {}: {}\n", c.name, body.join(" ")));
    }
    for s in 0..m.n_states() {
        for &a in m.enabled(s) {
            let body: Vec<String> = m
                .dist(s, a)
                .iter()
                .map(|(succ, p)| format!("{}={}", m.state_names[*succ], p))
                .collect();
            out.push_str(&format!(
                "trans {} {}: {}\n",
                m.state_names[s], m.action_names[a], body.join(" ")
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
mdp
# two absorbing loops
states: s0 s1 s2
actions: a b
parity p1: s0=0 s1=0 s2=1
trans s0 a: s1=1
trans s0 b: s1=1/2 s2=1/2
trans s1 a: s1=1
trans s2 b: s2=1
";

    #[test]
    fn parses_sample() {
        let (m, conds) = parse_mdp(SAMPLE).unwrap();
        assert_eq!(m.n_states(), 3);
        assert_eq!(m.enabled(0), &[0, 1]);
        assert_eq!(conds[0].prio, vec![0, 0, 1]);
    }

    #[test]
    fn rejects_bad_sum() {
        let bad = SAMPLE.replace("s1=1/2 s2=1/2", "s1=1/2 s2=1/3");
        assert!(matches!(
            parse_mdp(&bad),
            Err(FormatError::Model(ModelError::BadDistribution { .. }))
        ));
    }

    #[test]
    fn rejects_unknown_state() {
        let bad = SAMPLE.replace("trans s1 a: s1=1", "trans s1 a: sX=1");
        assert!(matches!(parse_mdp(&bad), Err(FormatError::UnknownState { .. })));
    }

    #[test]
    fn emit_parse_round_trip() {
        let (m, conds) = parse_mdp(SAMPLE).unwrap();
        let text = emit_mdp(&m, &conds);
        let (m2, conds2) = parse_mdp(&text).unwrap();
        assert_eq!(m.state_names, m2.state_names);
        assert_eq!(conds, conds2);
        assert_eq!(emit_mdp(&m2, &conds2), text);
    }
}
