use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::scalar::{format_rational, Rational};

pub type Symbol = Arc<str>;

pub fn sym(name: &str) -> Symbol {
    Arc::from(name)
}

/// A ground term. The derived order (numbers, then symbols, then compounds)
/// is the deterministic order used for query answers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Num(Rational),
    Sym(Symbol),
    Compound(Symbol, Vec<Value>),
}

impl Value {
    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Value::Num(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(r) => f.write_str(&format_rational(r)),
            Value::Sym(s) => f.write_str(s),
            Value::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

/// Source-level term: may contain variables and arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Sym(Symbol),
    Num(Rational),
    Var(Symbol),
    Anon,
    Compound(Symbol, Vec<Term>),
    Arith(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(sym(name))
    }

    pub fn constant(name: &str) -> Term {
        Term::Sym(sym(name))
    }

    /// Named variables in left-to-right order of first occurrence.
    pub fn collect_vars(&self, out: &mut Vec<Symbol>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Term::Arith(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Term::Sym(_) | Term::Num(_) | Term::Anon => {}
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) | Term::Anon => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            Term::Arith(_, l, r) => l.is_ground() && r.is_ground(),
            Term::Sym(_) | Term::Num(_) => true,
        }
    }

    pub fn has_arith(&self) -> bool {
        match self {
            Term::Arith(..) => true,
            Term::Compound(_, args) => args.iter().any(Term::has_arith),
            _ => false,
        }
    }

    /// Renames variables through `f`; used for capture-free macro expansion.
    pub fn rename_vars(&self, f: &impl Fn(&Symbol) -> Term) -> Term {
        match self {
            Term::Var(v) => f(v),
            Term::Compound(name, args) => {
                Term::Compound(name.clone(), args.iter().map(|a| a.rename_vars(f)).collect())
            }
            Term::Arith(op, l, r) => Term::Arith(
                *op,
                Box::new(l.rename_vars(f)),
                Box::new(r.rename_vars(f)),
            ),
            other => other.clone(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right: bool) -> fmt::Result {
        match self {
            Term::Sym(s) => f.write_str(s),
            Term::Num(r) => f.write_str(&format_rational(r)),
            Term::Var(v) => f.write_str(v),
            Term::Anon => f.write_str("_"),
            Term::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0, false)?;
                }
                f.write_str(")")
            }
            Term::Arith(op, l, r) => {
                let prec = op.precedence();
                let paren = prec < parent || (right && prec == parent);
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, prec, false)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, prec, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

impl From<&Value> for Term {
    fn from(v: &Value) -> Term {
        match v {
            Value::Num(r) => Term::Num(r.clone()),
            Value::Sym(s) => Term::Sym(s.clone()),
            Value::Compound(name, args) => {
                Term::Compound(name.clone(), args.iter().map(Term::from).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Atom {
        Atom {
            predicate: sym(predicate),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.args.len())
    }

    pub fn collect_vars(&self, out: &mut Vec<Symbol>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn vars(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
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

/// A ground atom, e.g. a column name of a ground LP.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: Symbol,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn key(&self) -> PredKey {
        PredKey::new(self.predicate.clone(), self.args.len())
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Predicate name plus visible arity (a valued fact's hidden value argument
/// is not counted).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: Symbol,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: Symbol, arity: usize) -> Self {
        PredKey { name, arity }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Cmp(CmpOp, Term, Term),
}

impl Literal {
    pub fn collect_vars(&self, out: &mut Vec<Symbol>) {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => a.collect_vars(out),
            Literal::Cmp(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn rename_vars(&self, f: &impl Fn(&Symbol) -> Term) -> Literal {
        let atom = |a: &Atom| Atom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| t.rename_vars(f)).collect(),
        };
        match self {
            Literal::Pos(a) => Literal::Pos(atom(a)),
            Literal::Neg(a) => Literal::Neg(atom(a)),
            Literal::Cmp(op, l, r) => Literal::Cmp(*op, l.rename_vars(f), r.rename_vars(f)),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
            Literal::Cmp(op, l, r) => write!(f, "{l} {} {r}", op.symbol()),
        }
    }
}

/// Named variables of a conjunction in order of first occurrence.
pub fn conjunction_vars(conj: &[Literal]) -> Vec<Symbol> {
    let mut out = Vec::new();
    conj.iter().for_each(|l| l.collect_vars(&mut out));
    out
}

/// Simultaneous assignment of ground values to named variables.
pub type Substitution = BTreeMap<Symbol, Value>;

pub fn format_substitution(sub: &Substitution) -> String {
    let parts: Vec<String> = sub.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(","))
}
