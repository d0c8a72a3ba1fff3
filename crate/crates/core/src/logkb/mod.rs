//! Logical knowledge bases: a Datalog engine with numeric-valued facts,
//! stratified negation and arithmetic built-ins.

mod eval;
mod parse;
mod program;
mod term;

use thiserror::Error;

use crate::scalar::{format_rational, Rational};
use crate::syntax::SyntaxError;

pub use eval::{evaluate, evaluate_with, EvalConfig, MaterializedKb};
pub use parse::parse_logkb;
pub use program::{referenced_predicates, Clause, LogicProgram};
pub use term::{
    conjunction_vars, format_substitution, sym, ArithOp, Atom, CmpOp, GroundAtom, Literal,
    PredKey, Substitution, Symbol, Term, Value,
};

pub(crate) use parse::{parse_atom, parse_literal};
pub(crate) use program::{check_conjunction, resolve_in};

#[derive(Debug, Clone, Error)]
pub enum LogkbError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: unsafe clause `{clause}`: variable {var} is not bound by a positive body literal")]
    UnsafeRule {
        line: usize,
        clause: String,
        var: String,
    },
    #[error("negation is not stratified: cycle through {}", fmt_cycle(.cycle))]
    Unstratifiable { cycle: Vec<PredKey> },
    #[error("predicate {pred} has both valued and plain clauses")]
    MixedValued { pred: PredKey },
    #[error("unsafe query: variable {var} must be bound by a preceding positive literal")]
    UnsafeQuery { var: String },
    #[error("conflicting values for {atom}: {} vs {}", format_rational(.first), format_rational(.second))]
    Conflict {
        atom: String,
        first: Rational,
        second: Rational,
    },
    #[error("derivation cap of {cap} ground atoms exceeded")]
    DerivationCap { cap: usize },
    #[error("no value for {atom}")]
    Absent { atom: String },
    #[error("unknown predicate {pred}")]
    UnknownPredicate { pred: PredKey },
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
}

fn fmt_cycle(cycle: &[PredKey]) -> String {
    let mut names: Vec<String> = cycle.iter().map(|k| k.to_string()).collect();
    if let Some(first) = names.first().cloned() {
        names.push(first);
    }
    names.join(" -> ")
}

/// Parses a conjunctive query such as `edge(X,Y), not source(X)`.
pub fn parse_query(text: &str) -> Result<Vec<Literal>, SyntaxError> {
    use crate::syntax::{tokenize, Cursor, Tok};
    let mut cur = Cursor::new(tokenize(text, parse::COMMENT_CHARS)?);
    let mut lits = Vec::new();
    if cur.at_eof() {
        return Ok(lits);
    }
    loop {
        lits.push(parse_literal(&mut cur, false)?);
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    if !cur.at_eof() {
        return Err(cur.error(format!("unexpected {}", cur.peek())));
    }
    Ok(lits)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOW: &str = "
        cap(s,a) = 4. cap(s,b) = 2. cap(a,c) = 3. cap(b,c) = 2.
        cap(b,d) = 3. cap(c,b) = 1. cap(c,t) = 2. cap(d,t) = 4.
        edge(X,Y) :- cap(X,Y).
        vertex(X) :- edge(X,_).
        vertex(X) :- edge(_,X).
        source(s).
        sink(t).
    ";

    fn kb(text: &str) -> MaterializedKb {
        evaluate(&parse_logkb(text).unwrap()).unwrap()
    }

    fn q(text: &str) -> Vec<Literal> {
        parse_query(text).unwrap()
    }

    fn ground(pred: &str, args: &[&str]) -> GroundAtom {
        GroundAtom {
            predicate: sym(pred),
            args: args.iter().map(|a| Value::Sym(sym(a))).collect(),
        }
    }

    #[test]
    fn flow_vertices_and_edges() {
        let kb = kb(FLOW);
        let v = kb.query_set(&q("vertex(X)")).unwrap();
        let names: Vec<String> = v.iter().map(|s| s["X"].to_string()).collect();
        assert_eq!(names, ["a", "b", "c", "d", "s", "t"]);
        assert_eq!(kb.query_set(&q("edge(X,Y)")).unwrap().len(), 8);
        assert!(kb.query_set(&q("source(X), not source(X)")).unwrap().is_empty());
        assert_eq!(kb.query_multiset(&q("vertex(X)")).unwrap().len(), 16);
    }

    #[test]
    fn lookup_semantics() {
        let kb = kb(FLOW);
        assert_eq!(kb.lookup_value(&ground("cap", &["s", "a"])).unwrap(), Rational::from_integer(4.into()));
        assert_eq!(kb.lookup_value(&ground("source", &["s"])).unwrap(), Rational::from_integer(1.into()));
        assert_eq!(kb.lookup_value(&ground("source", &["a"])).unwrap(), Rational::from_integer(0.into()));
        assert!(matches!(
            kb.lookup_value(&ground("cap", &["a", "b"])),
            Err(LogkbError::Absent { .. })
        ));
    }

    #[test]
    fn value_argument_is_queryable() {
        let kb = kb(FLOW);
        let subs = kb.query_set(&q("cap(X,t,V), V > 2")).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0]["X"].to_string(), "d");
    }

    #[test]
    fn unsafe_query_names_variable() {
        let kb = kb(FLOW);
        match kb.query_set(&q("not source(X)")) {
            Err(LogkbError::UnsafeQuery { var }) => assert_eq!(var, "X"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn specific_rule_overrides_general_one() {
        let kb = kb("
            person(anna). person(bob).
            w(smokes(X), cancer(X), V1, V2) = 0.75 :- person(X), val(V1), val(V2).
            w(smokes(X), cancer(X), 1, 0) = 0 :- person(X).
            val(0). val(1).
        ");
        let key = PredKey::new(sym("w"), 4);
        assert_eq!(kb.atom_count(&key), 8);
        assert_eq!(kb.derivation_count(&key), 10);
        let zero = kb.query_set(&q("w(P, C, V1, V2, 0)")).unwrap();
        assert_eq!(zero.len(), 2);
        assert!(zero.iter().all(|s| s["V1"].to_string() == "1" && s["V2"].to_string() == "0"));
    }

    #[test]
    fn equally_specific_conflict_is_an_error() {
        let p = parse_logkb("a(x). p(X) = 1 :- a(X). p(X) = 2 :- a(X).").unwrap();
        assert!(matches!(evaluate(&p), Err(LogkbError::Conflict { .. })));
    }

    #[test]
    fn named_constants_and_arithmetic() {
        let kb = kb("
            n = 3.
            coord(1). coord(2). coord(3).
            inner(X) :- coord(X), X > 1, X < n.
            corner(state(n, n - 1)).
            next(X, X + 1) :- coord(X), X < n.
        ");
        let inner = kb.query_set(&q("inner(X)")).unwrap();
        assert_eq!(inner.len(), 1);
        assert_eq!(inner[0]["X"].to_string(), "2");
        assert_eq!(kb.query_set(&q("corner(state(3,2))")).unwrap().len(), 1);
        assert_eq!(kb.query_set(&q("next(2, Y)")).unwrap()[0]["Y"].to_string(), "3");
    }

    #[test]
    fn recursion_reaches_fixpoint() {
        let kb = kb("
            e(a,b). e(b,c). e(c,d). e(d,a).
            path(X,Y) :- e(X,Y).
            path(X,Z) :- path(X,Y), e(Y,Z).
        ");
        assert_eq!(kb.query_set(&q("path(X,Y)")).unwrap().len(), 16);
    }

    #[test]
    fn derivation_cap_is_enforced() {
        let p = parse_logkb("nat(0). nat(X + 1) :- nat(X).").unwrap();
        let err = evaluate_with(&p, &EvalConfig { derivation_cap: 100 }).unwrap_err();
        assert!(matches!(err, LogkbError::DerivationCap { cap: 100 }));
    }

    #[test]
    fn facts_only_model_is_the_fact_set() {
        let kb = kb("p(a). q(b) = 2. q(c) = 1/2.");
        assert_eq!(kb.total_atoms(), 3);
    }
}
