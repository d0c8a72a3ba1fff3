//! Prenex normal form: every (in)equality side becomes a signed sum of
//! terms `sum{q1} .. sum{qk} coef * a1 * .. * am / d1 / ..`.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::logkb::{Atom, Literal, Symbol, Term};
use crate::scalar::Rational;

use super::ast::{BinOp, ConstraintTemplate, Objective, ParExpr, RlpModel, SumMode};
use super::expand::{inline_definitions, Fresh};
use super::RlpError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrenexTerm {
    pub sums: Vec<(SumMode, Vec<Literal>)>,
    pub coef: Rational,
    pub factors: Vec<Atom>,
    /// Parameter-only divisors that are not plain numbers.
    pub divisors: Vec<ParExpr>,
}

impl PrenexTerm {
    fn constant(coef: Rational) -> Self {
        PrenexTerm {
            sums: Vec::new(),
            coef,
            factors: Vec::new(),
            divisors: Vec::new(),
        }
    }

    fn vars(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        for (_, q) in &self.sums {
            q.iter().for_each(|l| l.collect_vars(&mut out));
        }
        self.factors.iter().for_each(|a| a.collect_vars(&mut out));
        self.divisors.iter().for_each(|d| d.collect_vars(&mut out));
        out
    }

    /// Variables newly bound by this term's sums (not bound outside).
    fn bound_vars(&self, scope: &[Symbol]) -> Vec<Symbol> {
        let mut out = Vec::new();
        for (_, q) in &self.sums {
            q.iter().for_each(|l| l.collect_vars(&mut out));
        }
        out.retain(|v| !scope.contains(v));
        out
    }

    fn rename(&self, map: &BTreeMap<Symbol, Symbol>) -> PrenexTerm {
        let f = |v: &Symbol| Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone()));
        PrenexTerm {
            sums: self
                .sums
                .iter()
                .map(|(m, q)| (*m, q.iter().map(|l| l.rename_vars(&f)).collect()))
                .collect(),
            coef: self.coef.clone(),
            factors: self
                .factors
                .iter()
                .map(|a| Atom {
                    predicate: a.predicate.clone(),
                    args: a.args.iter().map(|t| t.rename_vars(&f)).collect(),
                })
                .collect(),
            divisors: self.divisors.iter().map(|d| d.rename_vars(&f)).collect(),
        }
    }
}

struct Normalizer<'a> {
    fresh: &'a mut Fresh,
    item: String,
}

impl Normalizer<'_> {
    fn norm(&mut self, e: &ParExpr, scope: &[Symbol]) -> Result<Vec<PrenexTerm>, RlpError> {
        Ok(match e {
            ParExpr::Num(r) => vec![PrenexTerm::constant(r.clone())],
            ParExpr::Atom(a) => {
                let mut t = PrenexTerm::constant(Rational::one());
                t.factors.push(a.clone());
                vec![t]
            }
            ParExpr::Neg(x) => {
                let mut ts = self.norm(x, scope)?;
                ts.iter_mut().for_each(|t| t.coef = -t.coef.clone());
                ts
            }
            ParExpr::Bin(BinOp::Add, l, r) => {
                let mut ts = self.norm(l, scope)?;
                ts.extend(self.norm(r, scope)?);
                ts
            }
            ParExpr::Bin(BinOp::Sub, l, r) => {
                let mut ts = self.norm(l, scope)?;
                for mut t in self.norm(r, scope)? {
                    t.coef = -t.coef;
                    ts.push(t);
                }
                ts
            }
            ParExpr::Bin(BinOp::Mul, l, r) => {
                let ls = self.norm(l, scope)?;
                let rs = self.norm(r, scope)?;
                let mut out = Vec::with_capacity(ls.len() * rs.len());
                for tl in &ls {
                    let left_vars = tl.vars();
                    for tr in &rs {
                        let mut map = BTreeMap::new();
                        for v in tr.bound_vars(scope) {
                            if left_vars.contains(&v) {
                                map.insert(v.clone(), self.fresh.fresh(&v));
                            }
                        }
                        let tr = if map.is_empty() { tr.clone() } else { tr.rename(&map) };
                        let mut t = tl.clone();
                        t.sums.extend(tr.sums);
                        t.coef = &t.coef * &tr.coef;
                        t.factors.extend(tr.factors);
                        t.divisors.extend(tr.divisors);
                        out.push(t);
                    }
                }
                out
            }
            ParExpr::Bin(BinOp::Div, l, r) => {
                let mut ls = self.norm(l, scope)?;
                let rs = self.norm(r, scope)?;
                let numeric = match rs.as_slice() {
                    [t] if t.sums.is_empty() && t.factors.is_empty() && t.divisors.is_empty() => {
                        Some(t.coef.clone())
                    }
                    [] => Some(Rational::zero()),
                    _ => None,
                };
                match numeric {
                    Some(c) if c.is_zero() => {
                        return Err(RlpError::DivisionByZero { item: self.item.clone() })
                    }
                    Some(c) => ls.iter_mut().for_each(|t| t.coef = &t.coef / &c),
                    None => {
                        for t in ls.iter_mut() {
                            let clash: Vec<Symbol> = t.bound_vars(scope);
                            let mut local = Vec::new();
                            r.collect_vars(&mut local);
                            let mut map = BTreeMap::new();
                            for v in local.into_iter().filter(|v| clash.contains(v)) {
                                map.insert(v.clone(), self.fresh.fresh(&v));
                            }
                            let d = if map.is_empty() {
                                (**r).clone()
                            } else {
                                r.rename_vars(&|v: &Symbol| {
                                    Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone()))
                                })
                            };
                            t.divisors.push(d);
                        }
                    }
                }
                ls
            }
            ParExpr::Sum { mode, query, body } => {
                let mut inner = scope.to_vec();
                for l in query {
                    l.collect_vars(&mut inner);
                }
                let mut ts = self.norm(body, &inner)?;
                for t in ts.iter_mut() {
                    t.sums.insert(0, (*mode, query.clone()));
                }
                ts
            }
        })
    }
}

/// Normalizes one expression under the variables already bound outside it.
pub fn prenex_terms(e: &ParExpr, scope: &[Symbol]) -> Result<Vec<PrenexTerm>, RlpError> {
    let mut vars = scope.to_vec();
    e.collect_vars(&mut vars);
    let mut fresh = Fresh::new(vars);
    let mut n = Normalizer {
        fresh: &mut fresh,
        item: e.to_string(),
    };
    let mut ts = n.norm(e, scope)?;
    ts.retain(|t| !t.coef.is_zero());
    Ok(ts)
}

fn term_body(t: &PrenexTerm, coef: &Rational) -> ParExpr {
    let mut parts: Vec<ParExpr> = Vec::new();
    let unit = coef.is_one() || (-coef).is_one();
    if !unit || t.factors.is_empty() {
        parts.push(ParExpr::Num(coef.abs()));
    }
    parts.extend(t.factors.iter().cloned().map(ParExpr::Atom));
    let mut e = parts
        .into_iter()
        .reduce(|a, b| ParExpr::bin(BinOp::Mul, a, b))
        .expect("non-empty product");
    for d in &t.divisors {
        e = ParExpr::bin(BinOp::Div, e, d.clone());
    }
    if coef.is_negative() {
        e = ParExpr::Neg(Box::new(e));
    }
    t.sums.iter().rev().fold(e, |body, (mode, q)| ParExpr::Sum {
        mode: *mode,
        query: q.clone(),
        body: Box::new(body),
    })
}

/// Rebuilds an expression from prenex terms as a left-nested chain of
/// `+`/`-`.
pub fn rebuild(terms: &[PrenexTerm]) -> ParExpr {
    let mut acc: Option<ParExpr> = None;
    for t in terms {
        acc = Some(match acc {
            None => term_body(t, &t.coef),
            Some(prev) if t.coef.is_negative() => {
                ParExpr::bin(BinOp::Sub, prev, term_body(t, &-t.coef.clone()))
            }
            Some(prev) => ParExpr::bin(BinOp::Add, prev, term_body(t, &t.coef)),
        });
    }
    acc.unwrap_or_else(|| ParExpr::Num(Rational::zero()))
}

fn prenex_expr(e: &ParExpr, scope: &[Symbol]) -> Result<ParExpr, RlpError> {
    Ok(rebuild(&prenex_terms(e, scope)?))
}

/// Inlines definitions and rewrites the objective and every constraint
/// side into prenex form.
pub fn to_prenex(model: &RlpModel) -> Result<RlpModel, RlpError> {
    let flat = inline_definitions(model)?;
    let objective = Objective {
        sense: flat.objective.sense,
        expr: prenex_expr(&flat.objective.expr, &[])?,
    };
    let mut constraints = Vec::with_capacity(flat.constraints.len());
    for c in &flat.constraints {
        let mut scope = Vec::new();
        if let Some(q) = &c.index {
            q.iter().for_each(|l| l.collect_vars(&mut scope));
        }
        constraints.push(ConstraintTemplate {
            index: c.index.clone(),
            lhs: prenex_expr(&c.lhs, &scope)?,
            rel: c.rel,
            rhs: prenex_expr(&c.rhs, &scope)?,
        });
    }
    Ok(RlpModel {
        vars: flat.vars,
        definitions: Vec::new(),
        objective,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rlp::parse_rlp;

    fn objective_after(text: &str) -> String {
        to_prenex(&parse_rlp(text).unwrap()).unwrap().objective.expr.to_string()
    }

    #[test]
    fn scalar_factor_moves_inside() {
        assert_eq!(objective_after("var p/1; minimize: 2 * sum{q(X)} p(X);"), "sum{q(X)} 2 * p(X)");
    }

    #[test]
    fn prenex_branches_are_unchanged() {
        assert_eq!(
            objective_after("var p/1; var s/1; minimize: sum{q(X)} p(X) + sum{r(Y)} s(Y);"),
            "sum{q(X)} p(X) + sum{r(Y)} s(Y)"
        );
    }

    #[test]
    fn flow_objective_nests_sums() {
        assert_eq!(
            objective_after(
                "var flow/2; outflow(X) = sum {edge(X, Y)} flow(X, Y);
                 maximise: sum {source(X)} outflow(X);"
            ),
            "sum{source(X)} sum{edge(X, Y)} flow(X, Y)"
        );
    }

    #[test]
    fn products_of_sums_rename_clashing_binders() {
        assert_eq!(
            objective_after("var p/1; minimize: (sum{q(X)} w(X)) * (sum{r(X)} p(X));"),
            "sum{q(X)} sum{r(X_1)} w(X) * p(X_1)"
        );
    }

    #[test]
    fn distribution_over_differences() {
        assert_eq!(
            objective_after("var p/1; minimize: sum{q(X)} (3 - p(X)) / 2;"),
            "sum{q(X)} 1.5 - sum{q(X)} 0.5 * p(X)"
        );
    }
}
