use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::logkb::{check_conjunction, resolve_in, Atom, Literal, LogicProgram, PredKey, Symbol};

use super::ast::{BinOp, ParExpr, RlpModel};
use super::expand::inline_definitions;
use super::RlpError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// A predicate plays more than one of the roles LP variable,
    /// defined predicate, KB parameter.
    RoleClash { pred: PredKey, detail: String },
    RecursiveDefinition { pred: PredKey },
    UnknownParameter { pred: PredKey, item: String },
    UnboundObjectiveVariable { var: String },
    FreeVariable { item: String, var: String },
    UnsafeQuery { item: String, var: String },
    VariableInQuery { pred: PredKey, item: String },
    DivisionByVariable { item: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RoleClash { pred, detail } => write!(f, "{pred}: {detail}"),
            Violation::RecursiveDefinition { pred } => {
                write!(f, "definition of {pred} is recursive")
            }
            Violation::UnknownParameter { pred, item } => {
                write!(f, "{item}: parameter {pred} has no clauses in the knowledge base")
            }
            Violation::UnboundObjectiveVariable { var } => {
                write!(f, "objective: variable {var} is not bound by any sum")
            }
            Violation::FreeVariable { item, var } => {
                write!(f, "{item}: variable {var} is not bound by the index query or a sum")
            }
            Violation::UnsafeQuery { item, var } => {
                write!(f, "{item}: unsafe query, {var} is used before it is bound")
            }
            Violation::VariableInQuery { pred, item } => {
                write!(f, "{item}: {pred} is not a knowledge-base predicate and cannot be queried")
            }
            Violation::DivisionByVariable { item } => {
                write!(f, "{item}: divisor mentions an LP variable")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        if !self.violations.contains(&v) {
            self.violations.push(v);
        }
    }

    fn warn(&mut self, w: String) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Objective,
    Other,
}

struct Checker<'a> {
    model: &'a RlpModel,
    preds: &'a BTreeMap<PredKey, bool>,
    declared: BTreeSet<PredKey>,
    defined: BTreeSet<PredKey>,
    report: ValidationReport,
}

impl Checker<'_> {
    fn query(&mut self, q: &[Literal], scope: &mut Vec<Symbol>, item: &str) {
        if let Err(var) = check_conjunction(q, scope) {
            self.report.push(Violation::UnsafeQuery {
                item: item.to_string(),
                var: var.to_string(),
            });
        }
        for lit in q {
            let (Literal::Pos(a) | Literal::Neg(a)) = lit else { continue };
            let key = a.key();
            if self.declared.contains(&key) || self.defined.contains(&key) {
                self.report.push(Violation::VariableInQuery {
                    pred: key,
                    item: item.to_string(),
                });
            } else if resolve_in(self.preds, a).is_none() {
                self.report
                    .warn(format!("{item}: query predicate {key} has no clauses, so its answer set is empty"));
            }
        }
        // variables of the query are bound from here on, even on failure
        for lit in q {
            let mut vs = Vec::new();
            lit.collect_vars(&mut vs);
            for v in vs {
                if !scope.contains(&v) {
                    scope.push(v);
                }
            }
        }
    }

    fn atom(&mut self, a: &Atom, scope: &[Symbol], item: &str, ctx: Ctx) {
        let key = a.key();
        if !self.declared.contains(&key) && !self.defined.contains(&key) && resolve_in(self.preds, a).is_none() {
            self.report.push(Violation::UnknownParameter {
                pred: key,
                item: item.to_string(),
            });
        }
        for v in a.vars() {
            if scope.contains(&v) {
                continue;
            }
            self.report.push(match ctx {
                Ctx::Objective => Violation::UnboundObjectiveVariable { var: v.to_string() },
                Ctx::Other => Violation::FreeVariable {
                    item: item.to_string(),
                    var: v.to_string(),
                },
            });
        }
    }

    fn expr(&mut self, e: &ParExpr, scope: &[Symbol], item: &str, ctx: Ctx) {
        match e {
            ParExpr::Num(_) => {}
            ParExpr::Atom(a) => self.atom(a, scope, item, ctx),
            ParExpr::Neg(x) => self.expr(x, scope, item, ctx),
            ParExpr::Bin(op, l, r) => {
                self.expr(l, scope, item, ctx);
                self.expr(r, scope, item, ctx);
                if *op == BinOp::Div && self.mentions_variable(r) {
                    self.report.push(Violation::DivisionByVariable { item: item.to_string() });
                }
            }
            ParExpr::Sum { query, body, .. } => {
                let mut inner = scope.to_vec();
                self.query(query, &mut inner, item);
                self.expr(body, &inner, item, ctx);
            }
        }
    }

    fn mentions_variable(&self, e: &ParExpr) -> bool {
        let mut found = false;
        e.visit_atoms(&mut |a| found |= self.declared.contains(&a.key()));
        found
    }

    fn check_recursion(&mut self) -> bool {
        let deps: BTreeMap<PredKey, BTreeSet<PredKey>> = self
            .model
            .definitions
            .iter()
            .map(|d| {
                let mut uses = BTreeSet::new();
                d.body.visit_atoms(&mut |a| {
                    if self.defined.contains(&a.key()) {
                        uses.insert(a.key());
                    }
                });
                (d.head.key(), uses)
            })
            .collect();
        let mut ok = true;
        for start in deps.keys() {
            // depth-first reachability back to `start`
            let mut stack: Vec<&PredKey> = deps[start].iter().collect();
            let mut seen = BTreeSet::new();
            while let Some(k) = stack.pop() {
                if k == start {
                    self.report.push(Violation::RecursiveDefinition { pred: start.clone() });
                    ok = false;
                    break;
                }
                if seen.insert(k) {
                    if let Some(next) = deps.get(k) {
                        stack.extend(next.iter());
                    }
                }
            }
        }
        ok
    }
}

/// Checks a model against a knowledge base; grounding refuses to run on a
/// report with violations.
pub fn validate(model: &RlpModel, program: &LogicProgram) -> ValidationReport {
    let declared: BTreeSet<PredKey> = model.vars.iter().map(|v| v.key()).collect();
    let defined: BTreeSet<PredKey> = model.definitions.iter().map(|d| d.head.key()).collect();
    let mut ck = Checker {
        model,
        preds: program.predicates(),
        declared,
        defined,
        report: ValidationReport::default(),
    };

    for key in ck.declared.intersection(&ck.defined) {
        ck.report.push(Violation::RoleClash {
            pred: key.clone(),
            detail: "declared as a variable and also defined".into(),
        });
    }
    let roles: Vec<(PredKey, &str)> = ck
        .declared
        .iter()
        .map(|k| (k.clone(), "declared as a variable"))
        .chain(ck.defined.iter().map(|k| (k.clone(), "defined in the model")))
        .collect();
    for (key, role) in roles {
        if program.is_defined(&key) {
            ck.report.push(Violation::RoleClash {
                pred: key,
                detail: format!("{role} but also has knowledge-base clauses"),
            });
        }
    }
    let mut seen_defs = BTreeSet::new();
    for d in &model.definitions {
        if !seen_defs.insert(d.head.key()) {
            ck.report.push(Violation::RoleClash {
                pred: d.head.key(),
                detail: "defined more than once".into(),
            });
        }
        let scope = d.head.vars();
        let item = format!("definition of {}", d.head.key());
        ck.expr(&d.body, &scope, &item, Ctx::Other);
    }
    if !ck.check_recursion() {
        return ck.report;
    }

    let flat = match inline_definitions(model) {
        Ok(flat) => flat,
        Err(RlpError::RecursiveDefinition { pred }) => {
            ck.report.push(Violation::RecursiveDefinition { pred });
            return ck.report;
        }
        Err(_) => return ck.report,
    };
    ck.expr(&flat.objective.expr, &[], "objective", Ctx::Objective);
    for (i, c) in flat.constraints.iter().enumerate() {
        let item = format!("constraint {}", i + 1);
        let mut scope = Vec::new();
        if let Some(q) = &c.index {
            ck.query(q, &mut scope, &item);
        }
        ck.expr(&c.lhs, &scope, &item, Ctx::Other);
        ck.expr(&c.rhs, &scope, &item, Ctx::Other);
    }
    ck.report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logkb::parse_logkb;
    use crate::rlp::parse_rlp;

    const FLOW_KB: &str = "cap(s,a) = 4. cap(a,t) = 2. edge(X,Y) :- cap(X,Y).
        vertex(X) :- edge(X,_). vertex(X) :- edge(_,X). source(s). sink(t).";

    fn report(model: &str, kb: &str) -> ValidationReport {
        validate(&parse_rlp(model).unwrap(), &parse_logkb(kb).unwrap())
    }

    #[test]
    fn flow_is_clean() {
        let r = report(crate::rlp::parse::tests::FLOW, FLOW_KB);
        assert!(r.is_ok(), "{r}");
    }

    #[test]
    fn free_objective_variable() {
        let r = report("var value/1; maximize: value(S);", "");
        assert_eq!(r.violations, vec![Violation::UnboundObjectiveVariable { var: "S".into() }]);
    }

    #[test]
    fn recursive_definition() {
        let r = report("f(X) = f(X) + 1; minimize: 0;", "");
        assert!(r.violations.iter().any(|v| matches!(v, Violation::RecursiveDefinition { .. })));
    }

    #[test]
    fn unknown_parameter_and_free_constraint_variable() {
        let r = report("var x/1; minimize: 0; subject to {p(X)}: x(X) <= bound(Y);", "p(a).");
        assert!(r.violations.iter().any(|v| matches!(v, Violation::UnknownParameter { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::FreeVariable { var, .. } if var == "Y")));
    }

    #[test]
    fn roles_must_be_disjoint() {
        let r = report("var p/1; minimize: sum{q(X)} p(X);", "q(a). p(a).");
        assert!(matches!(r.violations[0], Violation::RoleClash { .. }));
        let r = report("var p/1; minimize: sum{p(X)} p(X);", "");
        assert!(r.violations.iter().any(|v| matches!(v, Violation::VariableInQuery { .. })));
    }
}
