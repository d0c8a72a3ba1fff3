//! Grounding: expands an RLP against a materialized knowledge base into a
//! concrete LP with named columns.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::logkb::{
    format_substitution, GroundAtom, LogkbError, MaterializedKb, PredKey, Substitution,
};
use crate::rlp::{inline_definitions, BinOp, ParExpr, Rel, RlpError, RlpModel, Sense, SumMode};
use crate::scalar::{format_rational, Rational};

/// `constant + Σ coef·x_col` with no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub constant: Rational,
    pub terms: BTreeMap<usize, Rational>,
}

impl LinExpr {
    pub fn constant(value: Rational) -> Self {
        LinExpr {
            constant: value,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(col: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(col, Rational::one());
        LinExpr {
            constant: Rational::zero(),
            terms,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_scaled(&mut self, other: &LinExpr, factor: &Rational) {
        if factor.is_zero() {
            return;
        }
        self.constant += &other.constant * factor;
        for (col, coef) in &other.terms {
            let entry = self.terms.entry(*col).or_insert_with(Rational::zero);
            *entry += coef * factor;
            if entry.is_zero() {
                self.terms.remove(col);
            }
        }
    }

    pub fn scale(&mut self, factor: &Rational) {
        if factor.is_zero() {
            *self = LinExpr::default();
            return;
        }
        self.constant *= factor;
        for coef in self.terms.values_mut() {
            *coef *= factor;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundRow {
    /// Left-hand side minus right-hand side, without the constant.
    pub coeffs: BTreeMap<usize, Rational>,
    pub rel: Rel,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowOrigin {
    /// Index of the constraint template (after chained bounds are split).
    pub template: usize,
    pub substitution: Substitution,
}

impl fmt::Display for RowOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "constraint {}", self.template + 1)?;
        if !self.substitution.is_empty() {
            write!(f, " {}", format_substitution(&self.substitution))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundLp {
    pub var_names: Vec<GroundAtom>,
    pub c: Vec<Rational>,
    /// Constant part of the objective, reported but not optimized.
    pub objective_offset: Rational,
    pub sense: Sense,
    pub rows: Vec<GroundRow>,
    pub provenance: Vec<RowOrigin>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub vars: usize,
    pub rows: usize,
    pub nnz: usize,
}

impl fmt::Display for SizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} vars, {} rows, {} nonzeros", self.vars, self.rows, self.nnz)
    }
}

impl GroundLp {
    pub fn stats(&self) -> SizeReport {
        SizeReport {
            vars: self.var_names.len(),
            rows: self.rows.len(),
            nnz: self.rows.iter().map(|r| r.coeffs.len()).sum(),
        }
    }

    pub fn column(&self, name: &GroundAtom) -> Option<usize> {
        self.var_names.iter().position(|v| v == name)
    }

    /// Rows with column names instead of indices, sorted; equal for two
    /// groundings that differ only in row and column order.
    pub fn canonical_rows(&self) -> Vec<(Vec<(String, Rational)>, Rel, Rational)> {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                let mut coeffs: Vec<(String, Rational)> = r
                    .coeffs
                    .iter()
                    .map(|(c, a)| (self.var_names[*c].to_string(), a.clone()))
                    .collect();
                coeffs.sort();
                (coeffs, r.rel, r.rhs.clone())
            })
            .collect();
        rows.sort();
        rows
    }

    /// Objective coefficients keyed by column name.
    pub fn named_objective(&self) -> BTreeMap<String, Rational> {
        self.var_names
            .iter()
            .zip(&self.c)
            .filter(|(_, c)| !c.is_zero())
            .map(|(v, c)| (v.to_string(), c.clone()))
            .collect()
    }

    /// Objective value of `x` in the model's own sense, offset included.
    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum::<Rational>() + &self.objective_offset
    }

    /// Largest violation of any row by `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for r in &self.rows {
            let lhs: f64 = r
                .coeffs
                .iter()
                .map(|(c, a)| crate::scalar::rational_to_f64(a) * x[*c])
                .sum();
            let rhs = crate::scalar::rational_to_f64(&r.rhs);
            let v = match r.rel {
                Rel::Le => lhs - rhs,
                Rel::Ge => rhs - lhs,
                Rel::Eq => (lhs - rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn to_json(&self) -> serde_json::Value {
        let name = |c: &usize| self.var_names[*c].to_string();
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let coeffs: serde_json::Map<String, serde_json::Value> = r
                    .coeffs
                    .iter()
                    .map(|(c, a)| (name(c), format_rational(a).into()))
                    .collect();
                serde_json::json!({
                    "coeffs": coeffs,
                    "rel": r.rel.symbol(),
                    "rhs": format_rational(&r.rhs),
                })
            })
            .collect();
        serde_json::json!({
            "sense": self.sense.keyword(),
            "vars": self.var_names.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "c": self.c.iter().map(format_rational).collect::<Vec<_>>(),
            "offset": format_rational(&self.objective_offset),
            "rows": rows,
        })
    }
}

impl fmt::Display for GroundLp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |f: &mut fmt::Formatter<'_>, first: bool, col: usize, a: &Rational| -> fmt::Result {
            let neg = a < &Rational::zero();
            let mag = if neg { -a.clone() } else { a.clone() };
            match (first, neg) {
                (true, true) => f.write_str("-")?,
                (true, false) => {}
                (false, true) => f.write_str(" - ")?,
                (false, false) => f.write_str(" + ")?,
            }
            if !mag.is_one() {
                write!(f, "{} ", format_rational(&mag))?;
            }
            write!(f, "{}", self.var_names[col])
        };
        write!(f, "{}:", self.sense.keyword())?;
        let mut first = true;
        for (col, a) in self.c.iter().enumerate() {
            if !a.is_zero() {
                f.write_str(if first { " " } else { "" })?;
                term(f, first, col, a)?;
                first = false;
            }
        }
        if !self.objective_offset.is_zero() || first {
            write!(f, " + {}", format_rational(&self.objective_offset))?;
        }
        writeln!(f, ";")?;
        for r in &self.rows {
            f.write_str("subject to: ")?;
            let mut first = true;
            for (col, a) in &r.coeffs {
                term(f, first, *col, a)?;
                first = false;
            }
            if first {
                f.write_str("0")?;
            }
            writeln!(f, " {} {};", r.rel.symbol(), format_rational(&r.rhs))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum GroundError {
    #[error("{item}: product of two LP variables is not linear")]
    Nonlinear { item: String },
    #[error("{item}: no value for parameter {atom}")]
    AbsentParameter { item: String, atom: String },
    #[error("{item}: divisor depends on an LP variable")]
    DivisionByVariable { item: String },
    #[error("{item}: division by zero")]
    DivisionByZero { item: String },
    #[error("{item}: {source}")]
    Kb {
        item: String,
        #[source]
        source: LogkbError,
    },
    #[error(transparent)]
    Model(#[from] RlpError),
}

struct Grounder<'a> {
    kb: &'a MaterializedKb,
    declared: Vec<PredKey>,
    names: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    item: String,
}

impl Grounder<'_> {
    fn column(&mut self, atom: GroundAtom) -> usize {
        if let Some(&i) = self.index.get(&atom) {
            return i;
        }
        let i = self.names.len();
        self.index.insert(atom.clone(), i);
        self.names.push(atom);
        i
    }

    fn kb_err(&self, source: LogkbError) -> GroundError {
        match source {
            LogkbError::Absent { atom } => GroundError::AbsentParameter {
                item: self.item.clone(),
                atom,
            },
            source => GroundError::Kb {
                item: self.item.clone(),
                source,
            },
        }
    }

    fn expr(&mut self, e: &ParExpr, sub: &Substitution) -> Result<LinExpr, GroundError> {
        Ok(match e {
            ParExpr::Num(r) => LinExpr::constant(r.clone()),
            ParExpr::Atom(a) => {
                let ground = self.kb.instantiate_atom(a, sub).map_err(|e| self.kb_err(e))?;
                if self.declared.contains(&a.key()) {
                    LinExpr::var(self.column(ground))
                } else {
                    LinExpr::constant(self.kb.lookup_value(&ground).map_err(|e| self.kb_err(e))?)
                }
            }
            ParExpr::Neg(x) => {
                let mut v = self.expr(x, sub)?;
                v.scale(&-Rational::one());
                v
            }
            ParExpr::Bin(op, l, r) => {
                let mut lv = self.expr(l, sub)?;
                let rv = self.expr(r, sub)?;
                match op {
                    BinOp::Add => lv.add_scaled(&rv, &Rational::one()),
                    BinOp::Sub => lv.add_scaled(&rv, &-Rational::one()),
                    BinOp::Mul => {
                        if lv.is_constant() {
                            let mut out = rv;
                            out.scale(&lv.constant);
                            return Ok(out);
                        }
                        if !rv.is_constant() {
                            return Err(GroundError::Nonlinear { item: self.item.clone() });
                        }
                        lv.scale(&rv.constant);
                    }
                    BinOp::Div => {
                        if !rv.is_constant() {
                            return Err(GroundError::DivisionByVariable { item: self.item.clone() });
                        }
                        if rv.constant.is_zero() {
                            return Err(GroundError::DivisionByZero { item: self.item.clone() });
                        }
                        lv.scale(&rv.constant.recip());
                    }
                }
                lv
            }
            ParExpr::Sum { mode, query, body } => {
                let mut acc = LinExpr::default();
                let answers = match mode {
                    SumMode::Set => self
                        .kb
                        .query_set_bound(query, sub)
                        .map(|v| v.into_iter().map(|s| (s, 1u64)).collect::<Vec<_>>()),
                    SumMode::Multiset => self.kb.query_counts_bound(query, sub),
                }
                .map_err(|e| self.kb_err(e))?;
                for (answer, count) in answers {
                    let mut inner = sub.clone();
                    inner.extend(answer);
                    let v = self.expr(body, &inner)?;
                    acc.add_scaled(&v, &Rational::from_integer(count.into()));
                }
                acc
            }
        })
    }
}

/// Grounds a model; definitions, if any remain, are inlined first.
///
/// Columns are numbered by first occurrence, visiting the constraints in
/// source order and then the objective.
pub fn ground(model: &RlpModel, kb: &MaterializedKb) -> Result<GroundLp, GroundError> {
    let flat;
    let model = if model.definitions.is_empty() {
        model
    } else {
        flat = inline_definitions(model)?;
        &flat
    };
    let mut g = Grounder {
        kb,
        declared: model.vars.iter().map(|v| v.key()).collect(),
        names: Vec::new(),
        index: HashMap::new(),
        item: String::new(),
    };
    let mut rows = Vec::new();
    let mut provenance = Vec::new();
    let mut warnings = Vec::new();
    for (t, c) in model.constraints.iter().enumerate() {
        g.item = format!("constraint {}", t + 1);
        let subs = match &c.index {
            Some(q) => kb.query_set(q).map_err(|e| g.kb_err(e))?,
            None => vec![Substitution::new()],
        };
        for sub in subs {
            let mut e = g.expr(&c.lhs, &sub)?;
            let rhs = g.expr(&c.rhs, &sub)?;
            e.add_scaled(&rhs, &-Rational::one());
            if e.terms.is_empty() {
                let holds = match c.rel {
                    Rel::Le => e.constant <= Rational::zero(),
                    Rel::Ge => e.constant >= Rational::zero(),
                    Rel::Eq => e.constant.is_zero(),
                };
                if !holds {
                    warnings.push(format!(
                        "{} {}: constant row is violated, the LP is infeasible",
                        g.item,
                        format_substitution(&sub)
                    ));
                } else {
                    continue;
                }
            }
            rows.push(GroundRow {
                coeffs: e.terms,
                rel: c.rel,
                rhs: -e.constant,
            });
            provenance.push(RowOrigin {
                template: t,
                substitution: sub,
            });
        }
    }
    g.item = "objective".into();
    let obj = g.expr(&model.objective.expr, &Substitution::new())?;
    if obj.terms.is_empty() {
        warnings.push("objective has no LP variables".into());
    }
    let mut c = vec![Rational::zero(); g.names.len()];
    for (col, coef) in obj.terms {
        c[col] = coef;
    }
    Ok(GroundLp {
        var_names: g.names,
        c,
        objective_offset: obj.constant,
        sense: model.objective.sense,
        rows,
        provenance,
        warnings,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::logkb::{evaluate, parse_logkb};
    use crate::rlp::{parse_rlp, to_prenex};

    pub(crate) const TOY_RLP: &str = "var p/1;
        minimize: sum{gadget(X)} p(X);
        subject to: sum{widget(X)} p(X) + sum{gadget(X)} p(X) <= 1;
        subject to {widget(X)}: -p(X) <= 0;
        subject to: sum{widget(X)} p(X) - sum{gadget(X)} p(X) <= -1;";
    pub(crate) const TOY_KB: &str = "widget(x). widget(y). gadget(z).";

    fn ground_text(rlp: &str, kb: &str) -> GroundLp {
        let model = to_prenex(&parse_rlp(rlp).unwrap()).unwrap();
        let kb = evaluate(&parse_logkb(kb).unwrap()).unwrap();
        ground(&model, &kb).unwrap()
    }

    fn r(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn toy_matrix() {
        let lp = ground_text(TOY_RLP, TOY_KB);
        let names: Vec<String> = lp.var_names.iter().map(|v| v.to_string()).collect();
        assert_eq!(names, ["p(x)", "p(y)", "p(z)"]);
        assert_eq!(lp.c, vec![r(0), r(0), r(1)]);
        let dense: Vec<Vec<Rational>> = lp
            .rows
            .iter()
            .map(|row| (0..3).map(|j| row.coeffs.get(&j).cloned().unwrap_or_default()).collect())
            .collect();
        assert_eq!(
            dense,
            vec![
                vec![r(1), r(1), r(1)],
                vec![r(-1), r(0), r(0)],
                vec![r(0), r(-1), r(0)],
                vec![r(1), r(1), r(-1)],
            ]
        );
        let b: Vec<Rational> = lp.rows.iter().map(|r| r.rhs.clone()).collect();
        assert_eq!(b, vec![r(1), r(0), r(0), r(-1)]);
        assert_eq!(lp.stats(), SizeReport { vars: 3, rows: 4, nnz: 8 });
    }

    #[test]
    fn empty_index_contributes_no_rows() {
        let lp = ground_text("var p/1; minimize: sum{q(X)} p(X); subject to {r(X)}: p(X) <= 1;", "q(a). r(b) :- q(c).");
        assert!(lp.rows.is_empty());
        assert_eq!(lp.stats(), SizeReport { vars: 1, rows: 0, nnz: 0 });
    }

    #[test]
    fn multiset_sums_count_derivations() {
        let lp = ground_text(
            "var x/0; minimize: sum<e(X, _)> x;",
            "e(a, b). e(a, c). e(b, c).",
        );
        assert_eq!(lp.c, vec![r(3)]);
        let lp = ground_text("var x/0; minimize: sum{e(X, _)} x;", "e(a, b). e(a, c). e(b, c).");
        assert_eq!(lp.c, vec![r(2)]);
    }

    #[test]
    fn parameters_and_constants() {
        let lp = ground_text(
            "var v/1; maximize: sum{s(X)} w(X) * v(X) / gamma; subject to {s(X)}: v(X) <= w(X) + 1;",
            "s(a). s(b). w(a) = 2. w(b) = 0.5. gamma = 0.5.",
        );
        assert_eq!(lp.c, vec![r(4), r(1)]);
        assert_eq!(lp.rows[1].rhs, Rational::new(3.into(), 2.into()));
    }

    #[test]
    fn errors_name_their_item() {
        let kb = evaluate(&parse_logkb("s(a). w(b) = 1.").unwrap()).unwrap();
        let m = parse_rlp("var v/1; minimize: 0; subject to {s(X)}: v(X) * v(X) <= 1;").unwrap();
        let err = ground(&m, &kb).unwrap_err();
        assert!(matches!(err, GroundError::Nonlinear { .. }));
        assert_eq!(err.to_string(), "constraint 1: product of two LP variables is not linear");
        let m = parse_rlp("var v/1; minimize: sum{s(X)} w(X) * v(X);").unwrap();
        assert!(matches!(ground(&m, &kb), Err(GroundError::AbsentParameter { atom, .. }) if atom == "w(a)"));
    }

    #[test]
    fn empty_objective_warns() {
        let lp = ground_text("var p/1; minimize: sum{q(X)} p(X);", "r(a).");
        assert_eq!(lp.warnings.len(), 1);
    }
}
