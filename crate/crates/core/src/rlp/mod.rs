//! Relational linear programs: parsing, definition inlining, prenex
//! normal form and static checks against a knowledge base.

mod ast;
mod expand;
pub(crate) mod parse;
mod prenex;
mod validate;

use thiserror::Error;

use crate::logkb::PredKey;
use crate::syntax::SyntaxError;

pub use ast::{
    BinOp, ConstraintTemplate, Definition, Objective, ParExpr, Rel, RlpModel, Sense, SumMode,
    VarDecl,
};
pub use expand::inline_definitions;
pub use parse::parse_rlp;
pub use prenex::{prenex_terms, rebuild, to_prenex, PrenexTerm};
pub use validate::{validate, ValidationReport, Violation};

#[derive(Debug, Clone, Error)]
pub enum RlpError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("the model has no objective")]
    NoObjective,
    #[error("the model has more than one objective (lines {})", .lines.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", "))]
    MultipleObjectives { lines: Vec<usize> },
    #[error("line {line}: {pred} is declared twice")]
    Redeclared { line: usize, pred: PredKey },
    #[error("definition of {pred} is recursive")]
    RecursiveDefinition { pred: PredKey },
    #[error("division by zero in `{item}`")]
    DivisionByZero { item: String },
}
