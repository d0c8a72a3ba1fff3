//! Macro expansion of defined predicates and fresh-variable bookkeeping.

use std::collections::{BTreeMap, BTreeSet};

use crate::logkb::{sym, Literal, Symbol, Term};

use super::ast::{ConstraintTemplate, Definition, Objective, ParExpr, RlpModel};
use super::RlpError;

/// Hands out variable names not used elsewhere in one model item.
#[derive(Debug, Default)]
pub(crate) struct Fresh {
    used: BTreeSet<Symbol>,
}

impl Fresh {
    pub fn new(vars: impl IntoIterator<Item = Symbol>) -> Self {
        Fresh {
            used: vars.into_iter().collect(),
        }
    }

    pub fn reserve(&mut self, v: &Symbol) {
        self.used.insert(v.clone());
    }

    pub fn contains(&self, v: &Symbol) -> bool {
        self.used.contains(v)
    }

    pub fn fresh(&mut self, base: &Symbol) -> Symbol {
        let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '_');
        let stem = if stem.is_empty() { "V" } else { stem };
        let mut n = 1;
        loop {
            let cand = sym(&format!("{stem}_{n}"));
            if !self.used.contains(&cand) {
                self.used.insert(cand.clone());
                return cand;
            }
            n += 1;
        }
    }
}

fn expr_vars(e: &ParExpr) -> Vec<Symbol> {
    let mut out = Vec::new();
    e.collect_vars(&mut out);
    out
}

fn query_vars(q: &[Literal]) -> Vec<Symbol> {
    let mut out = Vec::new();
    q.iter().for_each(|l| l.collect_vars(&mut out));
    out
}

struct Inliner<'a> {
    defs: BTreeMap<(Symbol, usize), &'a Definition>,
    stack: Vec<(Symbol, usize)>,
}

impl Inliner<'_> {
    fn expr(&mut self, e: &ParExpr, fresh: &mut Fresh) -> Result<ParExpr, RlpError> {
        Ok(match e {
            ParExpr::Num(_) => e.clone(),
            ParExpr::Atom(a) => {
                let key = (a.predicate.clone(), a.arity());
                let Some(def) = self.defs.get(&key).copied() else {
                    return Ok(e.clone());
                };
                if self.stack.contains(&key) {
                    return Err(RlpError::RecursiveDefinition { pred: def.head.key() });
                }
                let mut map: BTreeMap<Symbol, Term> = BTreeMap::new();
                for (h, arg) in def.head.args.iter().zip(&a.args) {
                    if let Term::Var(v) = h {
                        map.insert(v.clone(), arg.clone());
                    }
                }
                for v in expr_vars(&def.body) {
                    if map.contains_key(&v) {
                        continue;
                    }
                    let name = if fresh.contains(&v) {
                        fresh.fresh(&v)
                    } else {
                        fresh.reserve(&v);
                        v.clone()
                    };
                    map.insert(v, Term::Var(name));
                }
                let body = def
                    .body
                    .rename_vars(&|v: &Symbol| map.get(v).cloned().unwrap_or_else(|| Term::Var(v.clone())));
                self.stack.push(key);
                let out = self.expr(&body, fresh);
                self.stack.pop();
                out?
            }
            ParExpr::Neg(x) => ParExpr::Neg(Box::new(self.expr(x, fresh)?)),
            ParExpr::Bin(op, l, r) => ParExpr::bin(*op, self.expr(l, fresh)?, self.expr(r, fresh)?),
            ParExpr::Sum { mode, query, body } => ParExpr::Sum {
                mode: *mode,
                query: query.clone(),
                body: Box::new(self.expr(body, fresh)?),
            },
        })
    }
}

/// Replaces every use of a defined predicate by its body, renaming the
/// body's local variables where they would clash with the use site.
/// The returned model has no definitions.
pub fn inline_definitions(model: &RlpModel) -> Result<RlpModel, RlpError> {
    let mut inl = Inliner {
        defs: model
            .definitions
            .iter()
            .map(|d| ((d.head.predicate.clone(), d.head.arity()), d))
            .collect(),
        stack: Vec::new(),
    };
    let mut fresh = Fresh::new(expr_vars(&model.objective.expr));
    let objective = Objective {
        sense: model.objective.sense,
        expr: inl.expr(&model.objective.expr, &mut fresh)?,
    };
    let mut constraints = Vec::with_capacity(model.constraints.len());
    for c in &model.constraints {
        let mut vars = c.index.as_deref().map(query_vars).unwrap_or_default();
        vars.extend(expr_vars(&c.lhs));
        vars.extend(expr_vars(&c.rhs));
        let mut fresh = Fresh::new(vars);
        constraints.push(ConstraintTemplate {
            index: c.index.clone(),
            lhs: inl.expr(&c.lhs, &mut fresh)?,
            rel: c.rel,
            rhs: inl.expr(&c.rhs, &mut fresh)?,
        });
    }
    Ok(RlpModel {
        vars: model.vars.clone(),
        definitions: Vec::new(),
        objective,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rlp::parse_rlp;

    #[test]
    fn locals_are_renamed_only_on_clash() {
        let m = parse_rlp(
            "var flow/2;
             outflow(X) = sum {edge(X, Y)} flow(X, Y);
             inflow(Y) = sum {edge(X, Y)} flow(X, Y);
             maximize: sum{source(X)} outflow(X);
             subject to {vertex(X)}: outflow(X) - inflow(X) = 0;",
        )
        .unwrap();
        let e = inline_definitions(&m).unwrap();
        assert_eq!(e.objective.expr.to_string(), "sum{source(X)} sum{edge(X, Y)} flow(X, Y)");
        assert_eq!(
            e.constraints[0].lhs.to_string(),
            "sum{edge(X, Y)} flow(X, Y) - sum{edge(X_1, X)} flow(X_1, X)"
        );
    }

    #[test]
    fn recursion_is_detected() {
        let m = parse_rlp("f(X) = f(X) + 1; minimize: sum{p(X)} f(X);").unwrap();
        assert!(matches!(inline_definitions(&m), Err(RlpError::RecursiveDefinition { .. })));
    }
}
