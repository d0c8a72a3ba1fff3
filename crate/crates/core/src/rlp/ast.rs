use std::fmt;

use crate::logkb::{Atom, Literal, PredKey, Symbol, Term};
use crate::scalar::{format_rational, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SumMode {
    /// `sum { .. }`: duplicate answers removed.
    Set,
    /// `sum < .. >`: one summand per derivation.
    Multiset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ParExpr {
    Num(Rational),
    Atom(Atom),
    Neg(Box<ParExpr>),
    Bin(BinOp, Box<ParExpr>, Box<ParExpr>),
    Sum {
        mode: SumMode,
        query: Vec<Literal>,
        body: Box<ParExpr>,
    },
}

impl ParExpr {
    pub fn num(value: Rational) -> ParExpr {
        ParExpr::Num(value)
    }

    pub fn bin(op: BinOp, l: ParExpr, r: ParExpr) -> ParExpr {
        ParExpr::Bin(op, Box::new(l), Box::new(r))
    }

    /// Calls `f` on every atom outside of sum queries.
    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            ParExpr::Num(_) => {}
            ParExpr::Atom(a) => f(a),
            ParExpr::Neg(e) => e.visit_atoms(f),
            ParExpr::Bin(_, l, r) => {
                l.visit_atoms(f);
                r.visit_atoms(f);
            }
            ParExpr::Sum { body, .. } => body.visit_atoms(f),
        }
    }

    /// Calls `f` on every sum query.
    pub fn visit_queries(&self, f: &mut impl FnMut(&[Literal])) {
        match self {
            ParExpr::Num(_) | ParExpr::Atom(_) => {}
            ParExpr::Neg(e) => e.visit_queries(f),
            ParExpr::Bin(_, l, r) => {
                l.visit_queries(f);
                r.visit_queries(f);
            }
            ParExpr::Sum { query, body, .. } => {
                f(query);
                body.visit_queries(f);
            }
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Symbol>) {
        match self {
            ParExpr::Num(_) => {}
            ParExpr::Atom(a) => a.collect_vars(out),
            ParExpr::Neg(e) => e.collect_vars(out),
            ParExpr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            ParExpr::Sum { query, body, .. } => {
                query.iter().for_each(|l| l.collect_vars(out));
                body.collect_vars(out);
            }
        }
    }

    pub fn has_sum(&self) -> bool {
        match self {
            ParExpr::Num(_) | ParExpr::Atom(_) => false,
            ParExpr::Neg(e) => e.has_sum(),
            ParExpr::Bin(_, l, r) => l.has_sum() || r.has_sum(),
            ParExpr::Sum { .. } => true,
        }
    }

    pub fn rename_vars(&self, f: &impl Fn(&Symbol) -> Term) -> ParExpr {
        match self {
            ParExpr::Num(r) => ParExpr::Num(r.clone()),
            ParExpr::Atom(a) => ParExpr::Atom(rename_atom(a, f)),
            ParExpr::Neg(e) => ParExpr::Neg(Box::new(e.rename_vars(f))),
            ParExpr::Bin(op, l, r) => ParExpr::bin(*op, l.rename_vars(f), r.rename_vars(f)),
            ParExpr::Sum { mode, query, body } => ParExpr::Sum {
                mode: *mode,
                query: query.iter().map(|l| l.rename_vars(f)).collect(),
                body: Box::new(body.rename_vars(f)),
            },
        }
    }

    // precedence: 1 additive, 2 multiplicative, 3 factor
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        match self {
            ParExpr::Num(r) => f.write_str(&format_rational(r)),
            ParExpr::Atom(a) => write!(f, "{}", AtomText(a)),
            ParExpr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_operand(f, 3)
            }
            ParExpr::Bin(op, l, r) => {
                let prec = match op {
                    BinOp::Add | BinOp::Sub => 1,
                    BinOp::Mul | BinOp::Div => 2,
                };
                let paren = prec < ctx;
                if paren {
                    f.write_str("(")?;
                }
                if prec == 2 {
                    l.fmt_operand(f, 2)?;
                } else {
                    l.fmt_prec(f, 1)?;
                }
                write!(f, " {} ", op.symbol())?;
                if prec == 2 {
                    r.fmt_operand(f, 3)?;
                } else {
                    r.fmt_prec(f, 2)?;
                }
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ParExpr::Sum { mode, query, body } => {
                let (open, close) = match mode {
                    SumMode::Set => ("{", "}"),
                    SumMode::Multiset => ("<", ">"),
                };
                write!(f, "sum{open}{}{close} ", QueryText(query))?;
                body.fmt_prec(f, 2)
            }
        }
    }

    /// Operands of `*`, `/` and unary minus: a sum there would swallow the
    /// rest of the product, so it is bracketed.
    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        if matches!(self, ParExpr::Sum { .. }) {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        self.fmt_prec(f, ctx)
    }
}

fn rename_atom(a: &Atom, f: &impl Fn(&Symbol) -> Term) -> Atom {
    Atom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|t| t.rename_vars(f)).collect(),
    }
}

impl fmt::Display for ParExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

struct AtomText<'a>(&'a Atom);

impl fmt::Display for AtomText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.predicate)?;
        if !self.0.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.0.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub(crate) struct QueryText<'a>(pub &'a [Literal]);

impl fmt::Display for QueryText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub predicate: Symbol,
    pub arity: usize,
}

impl VarDecl {
    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.arity)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Definition {
    pub head: Atom,
    pub body: ParExpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    pub fn keyword(self) -> &'static str {
        match self {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Objective {
    pub sense: Sense,
    pub expr: ParExpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstraintTemplate {
    pub index: Option<Vec<Literal>>,
    pub lhs: ParExpr,
    pub rel: Rel,
    pub rhs: ParExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RlpModel {
    pub vars: Vec<VarDecl>,
    pub definitions: Vec<Definition>,
    pub objective: Objective,
    pub constraints: Vec<ConstraintTemplate>,
}

impl RlpModel {
    pub fn is_declared(&self, key: &PredKey) -> bool {
        self.vars.iter().any(|v| &v.key() == key)
    }

    pub fn definition(&self, key: &PredKey) -> Option<&Definition> {
        self.definitions.iter().find(|d| &d.head.key() == key)
    }
}

impl fmt::Display for RlpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vars {
            writeln!(f, "var {}/{};", v.predicate, v.arity)?;
        }
        for d in &self.definitions {
            writeln!(f, "{} = {};", AtomText(&d.head), d.body)?;
        }
        writeln!(f, "{}: {};", self.objective.sense.keyword(), self.objective.expr)?;
        for c in &self.constraints {
            f.write_str("subject to")?;
            if let Some(q) = &c.index {
                write!(f, " {{{}}}", QueryText(q))?;
            }
            writeln!(f, ": {} {} {};", c.lhs, c.rel.symbol(), c.rhs)?;
        }
        Ok(())
    }
}
