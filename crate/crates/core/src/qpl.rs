//! Qualitative parity logic: formula AST, parser, negation elimination and
//! DNF clause extraction.
//!
//! Atoms quantify a parity condition in four modes: `A` (every path), `AS`
//! (probability one), `NZ` (positive probability), `E` (some path). Negation
//! is eliminated through the dualities ¬A(p)=E(p̄), ¬E(p)=A(p̄), ¬AS(p)=NZ(p̄),
//! ¬NZ(p)=AS(p̄), where p̄ shifts every priority by one; dualized conditions
//! are referred to by `name~` (iterated for nested negations). Disjunction
//! commutes with satisfiability, so top-level decisions work clause by
//! clause; conjunctions are kept whole.

use crate::model::ConditionTable;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum Quant {
    A,
    AS,
    NZ,
    E,
}

impl Quant {
    /// The quantifier of the negated atom.
    pub fn dual(self) -> Quant {
        match self {
            Quant::A => Quant::E,
            Quant::E => Quant::A,
            Quant::AS => Quant::NZ,
            Quant::NZ => Quant::AS,
        }
    }
}

impl fmt::Display for Quant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Quant::A => "A",
            Quant::AS => "AS",
            Quant::NZ => "NZ",
            Quant::E => "E",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(Quant, String),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Canonical output: `&` chains parenthesize `|` children, `!`
        // parenthesizes non-atoms.
        match self {
            Formula::Atom(q, name) => write!(f, "{q}({name})"),
            Formula::And(cs) => {
                let parts: Vec<String> = cs
                    .iter()
                    .map(|c| match c {
                        Formula::Or(_) => format!("({c})"),
                        _ => format!("{c}"),
                    })
                    .collect();
                write!(f, "{}", parts.join(" & "))
            }
            Formula::Or(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| format!("{c}")).collect();
                write!(f, "{}", parts.join(" | "))
            }
            Formula::Not(c) => match **c {
                Formula::Atom(..) => write!(f, "!{c}"),
                _ => write!(f, "!({c})"),
            },
        }
    }
}

/// A conjunctive clause in the four-set form used by the decision procedure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub struct Clause {
    pub a: BTreeSet<String>,
    pub r#as: BTreeSet<String>,
    pub nz: BTreeSet<String>,
    pub e: BTreeSet<String>,
}

impl Clause {
    pub fn atoms(&self) -> impl Iterator<Item = (Quant, &str)> {
        fn take(set: &BTreeSet<String>, q: Quant) -> Vec<(Quant, &str)> {
            set.iter().map(move |n| (q, n.as_str())).collect()
        }
        take(&self.a, Quant::A)
            .into_iter()
            .chain(take(&self.r#as, Quant::AS))
            .chain(take(&self.nz, Quant::NZ))
            .chain(take(&self.e, Quant::E))
    }

    pub fn len(&self) -> usize {
        self.a.len() + self.r#as.len() + self.nz.len() + self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subsumes(&self, other: &Clause) -> bool {
        // A clause with fewer atoms is weaker (easier to satisfy); it makes
        // any superset clause redundant in a disjunction.
        self.a.is_subset(&other.a)
            && self.r#as.is_subset(&other.r#as)
            && self.nz.is_subset(&other.nz)
            && self.e.is_subset(&other.e)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms().map(|(q, n)| format!("{q}({n})")).collect();
        write!(f, "{}", parts.join(" & "))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QplError {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("DNF clause count exceeds cap of {0}")]
    ClauseBlowup(usize),
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> QplError {
        QplError::Syntax { offset: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    // or := and ('|' and)*
    fn or(&mut self) -> Result<Formula, QplError> {
        let mut parts = vec![self.and()?];
        while self.eat('|') {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    // and := unary ('&' unary)*
    fn and(&mut self) -> Result<Formula, QplError> {
        let mut parts = vec![self.unary()?];
        while self.eat('&') {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    // unary := '!' unary | '(' or ')' | atom
    fn unary(&mut self) -> Result<Formula, QplError> {
        if self.eat('!') {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.eat('(') {
            let inner = self.or()?;
            if !self.eat(')') {
                return Err(self.err("expected `)`"));
            }
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, QplError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let quant = if rest.starts_with("AS") {
            self.pos += 2;
            Quant::AS
        } else if rest.starts_with('A') {
            self.pos += 1;
            Quant::A
        } else if rest.starts_with("NZ") {
            self.pos += 2;
            Quant::NZ
        } else if rest.starts_with('E') {
            self.pos += 1;
            Quant::E
        } else {
            return Err(self.err("expected atom A|AS|NZ|E"));
        };
        if !self.eat('(') {
            return Err(self.err("expected `(` after quantifier"));
        }
        self.skip_ws();
        let start = self.pos;
        while self.text[self.pos..]
            .starts_with(|c: char| c.is_alphanumeric() || c == '_' || c == '~' || c == '-')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected condition name"));
        }
        let name = self.text[start..self.pos].to_string();
        if !self.eat(')') {
            return Err(self.err("expected `)` after condition name"));
        }
        Ok(Formula::Atom(quant, name))
    }
}

/// Parse a formula; condition names are not resolved here (see [`bind`]).
pub fn parse(text: &str) -> Result<Formula, QplError> {
    let mut p = Parser { text, pos: 0 };
    let f = p.or()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

/// Check that every condition name in `f` resolves against `table`.
pub fn bind(f: &Formula, table: &ConditionTable) -> Result<(), QplError> {
    match f {
        Formula::Atom(_, name) => {
            if table.resolve(name).is_none() {
                return Err(QplError::UnknownCondition(name.clone()));
            }
            Ok(())
        }
        Formula::And(cs) | Formula::Or(cs) => cs.iter().try_for_each(|c| bind(c, table)),
        Formula::Not(c) => bind(c, table),
    }
}

/// Eliminate negation using the atom dualities and De Morgan's laws.
/// Dualized atoms refer to conditions named `name~` (one `~` per negation).
pub fn to_negation_free(f: &Formula) -> Formula {
    fn go(f: &Formula, neg: bool) -> Formula {
        match f {
            Formula::Atom(q, name) => {
                if neg {
                    Formula::Atom(q.dual(), format!("{name}~"))
                } else {
                    Formula::Atom(*q, name.clone())
                }
            }
            Formula::And(cs) => {
                let children = cs.iter().map(|c| go(c, neg)).collect();
                if neg {
                    Formula::Or(children)
                } else {
                    Formula::And(children)
                }
            }
            Formula::Or(cs) => {
                let children = cs.iter().map(|c| go(c, neg)).collect();
                if neg {
                    Formula::And(children)
                } else {
                    Formula::Or(children)
                }
            }
            Formula::Not(c) => go(c, !neg),
        }
    }
    go(f, false)
}

pub const DEFAULT_CLAUSE_CAP: usize = 4096;

/// Distribute ∧ over ∨ to obtain a list of clauses whose disjunction is
/// propositionally equivalent to `f`. Duplicate atoms within a clause are
/// merged and subsumed clauses removed as the product is built.
pub fn to_dnf_clauses(f: &Formula, cap: usize) -> Result<Vec<Clause>, QplError> {
    fn insert(clauses: &mut Vec<Clause>, c: Clause) {
        if clauses.iter().any(|existing| existing.subsumes(&c)) {
            return;
        }
        clauses.retain(|existing| !c.subsumes(existing));
        clauses.push(c);
    }

    fn merge(a: &Clause, b: &Clause) -> Clause {
        let union = |x: &BTreeSet<String>, y: &BTreeSet<String>| x.union(y).cloned().collect();
        Clause {
            a: union(&a.a, &b.a),
            r#as: union(&a.r#as, &b.r#as),
            nz: union(&a.nz, &b.nz),
            e: union(&a.e, &b.e),
        }
    }

    fn go(f: &Formula, cap: usize) -> Result<Vec<Clause>, QplError> {
        match f {
            Formula::Atom(q, name) => {
                let mut c = Clause {
                    a: BTreeSet::new(),
                    r#as: BTreeSet::new(),
                    nz: BTreeSet::new(),
                    e: BTreeSet::new(),
                };
                match q {
                    Quant::A => c.a.insert(name.clone()),
                    Quant::AS => c.r#as.insert(name.clone()),
                    Quant::NZ => c.nz.insert(name.clone()),
                    Quant::E => c.e.insert(name.clone()),
                };
                Ok(vec![c])
            }
            Formula::Or(cs) => {
                let mut out: Vec<Clause> = Vec::new();
                for c in cs {
                    for clause in go(c, cap)? {
                        insert(&mut out, clause);
                        if out.len() > cap {
                            return Err(QplError::ClauseBlowup(cap));
                        }
                    }
                }
                Ok(out)
            }
            Formula::And(cs) => {
                let mut acc = vec![Clause {
                    a: BTreeSet::new(),
                    r#as: BTreeSet::new(),
                    nz: BTreeSet::new(),
                    e: BTreeSet::new(),
                }];
                for c in cs {
                    let rhs = go(c, cap)?;
                    let mut next: Vec<Clause> = Vec::new();
                    for l in &acc {
                        for r in &rhs {
                            insert(&mut next, merge(l, r));
                            if next.len() > cap {
                                return Err(QplError::ClauseBlowup(cap));
                            }
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
            Formula::Not(_) => unreachable!("to_dnf_clauses requires negation-free input"),
        }
    }

    go(f, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn atoms(f: &Formula, out: &mut BTreeSet<(Quant, String)>) {
        match f {
            Formula::Atom(q, n) => {
                out.insert((*q, n.clone()));
            }
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| atoms(c, out)),
            Formula::Not(c) => atoms(c, out),
        }
    }

    fn eval(f: &Formula, tt: &BTreeMap<(Quant, String), bool>) -> bool {
        match f {
            Formula::Atom(q, n) => tt[&(*q, n.clone())],
            Formula::And(cs) => cs.iter().all(|c| eval(c, tt)),
            Formula::Or(cs) => cs.iter().any(|c| eval(c, tt)),
            Formula::Not(c) => !eval(c, tt),
        }
    }

    fn eval_clauses(cs: &[Clause], tt: &BTreeMap<(Quant, String), bool>) -> bool {
        cs.iter().any(|c| {
            c.atoms().all(|(q, n)| tt[&(q, n.to_string())])
        })
    }

    #[test]
    fn parses_conjunction_of_atoms() {
        let f = parse("NZ(p1) & NZ(p2)").unwrap();
        assert_eq!(
            f,
            Formula::And(vec![
                Formula::Atom(Quant::NZ, "p1".into()),
                Formula::Atom(Quant::NZ, "p2".into()),
            ])
        );
        assert_eq!(parse("A(p)").unwrap(), Formula::Atom(Quant::A, "p".into()));
        assert!(matches!(parse("!(A(p1) & A(p2))").unwrap(), Formula::Not(_)));
    }

    #[test]
    fn precedence_not_and_or() {
        let f = parse("!A(p) & AS(q) | E(r)").unwrap();
        // Parses as ((!A(p)) & AS(q)) | E(r).
        match f {
            Formula::Or(cs) => {
                assert_eq!(cs.len(), 2);
                assert!(matches!(&cs[0], Formula::And(_)));
            }
            other => panic!("unexpected parse {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_offset() {
        match parse("A(p) &") {
            Err(QplError::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn negation_free_uses_dualities() {
        let f = parse("!(A(p1) & A(p2))").unwrap();
        let nf = to_negation_free(&f);
        assert_eq!(
            nf,
            Formula::Or(vec![
                Formula::Atom(Quant::E, "p1~".into()),
                Formula::Atom(Quant::E, "p2~".into()),
            ])
        );
        // Fixpoint on negation-free input.
        assert_eq!(to_negation_free(&nf), nf);
        // Double negation cancels before any dualization is applied.
        let f2 = parse("!!AS(p)").unwrap();
        assert_eq!(to_negation_free(&f2), Formula::Atom(Quant::AS, "p".into()));
    }

    #[test]
    fn dnf_distributes_and_subsumes() {
        let f = parse("A(p1) & (AS(p2) | E(p3))").unwrap();
        let cs = to_dnf_clauses(&f, DEFAULT_CLAUSE_CAP).unwrap();
        assert_eq!(cs.len(), 2);
        assert!(cs.iter().any(|c| c.a.contains("p1") && c.r#as.contains("p2")));
        assert!(cs.iter().any(|c| c.a.contains("p1") && c.e.contains("p3")));
        // A(p) | (A(p) & A(q)) collapses to the weaker clause.
        let g = parse("A(p) | A(p) & A(q)").unwrap();
        let cs = to_dnf_clauses(&g, DEFAULT_CLAUSE_CAP).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].a, BTreeSet::from(["p".to_string()]));
    }

    #[test]
    fn dnf_cap_triggers() {
        // (x1|y1)&(x2|y2)&... over distinct atoms blows up as 2^n.
        let text = (1..=4)
            .map(|i| format!("(A(x{i}) | A(y{i}))"))
            .collect::<Vec<_>>()
            .join(" & ");
        let f = parse(&text).unwrap();
        assert_eq!(to_dnf_clauses(&f, 8), Err(QplError::ClauseBlowup(8)));
        assert_eq!(to_dnf_clauses(&f, 16).unwrap().len(), 16);
    }

    #[test]
    fn dnf_truth_table_equivalence_random() {
        // Random 8-atom formulas: DNF is propositionally equivalent under
        // every assignment.
        let mut seed = 0xc0ffee_u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as usize
        };
        for _ in 0..50 {
            let f = random_formula(&mut next, 3);
            let nf = to_negation_free(&f);
            let cs = to_dnf_clauses(&nf, DEFAULT_CLAUSE_CAP).unwrap();
            let mut at = BTreeSet::new();
            atoms(&nf, &mut at);
            let at: Vec<_> = at.into_iter().collect();
            assert!(at.len() <= 10);
            for mask in 0..(1usize << at.len()) {
                let tt: BTreeMap<_, _> = at
                    .iter()
                    .enumerate()
                    .map(|(i, k)| (k.clone(), mask >> i & 1 == 1))
                    .collect();
                assert_eq!(eval(&nf, &tt), eval_clauses(&cs, &tt), "formula {nf}");
            }
        }
    }

    fn random_formula(next: &mut impl FnMut() -> usize, depth: usize) -> Formula {
        let quants = [Quant::A, Quant::AS, Quant::NZ, Quant::E];
        if depth == 0 || next() % 3 == 0 {
            let q = quants[next() % 4];
            return Formula::Atom(q, format!("p{}", next() % 3 + 1));
        }
        match next() % 3 {
            0 => Formula::And((0..2 + next() % 2).map(|_| random_formula(next, depth - 1)).collect()),
            1 => Formula::Or((0..2 + next() % 2).map(|_| random_formula(next, depth - 1)).collect()),
            _ => Formula::Not(Box::new(random_formula(next, depth - 1))),
        }
    }

    #[test]
    fn pretty_print_parse_identity() {
        for text in [
            "A(p1) & AS(p2) | NZ(p3)",
            "!(A(p1) & A(p2))",
            "E(p~) & (A(q) | NZ(r))",
        ] {
            let f = parse(text).unwrap();
            let printed = format!("{f}");
            let reparsed = parse(&printed).unwrap();
            assert_eq!(f, reparsed);
            assert_eq!(format!("{reparsed}"), printed);
        }
    }
}
