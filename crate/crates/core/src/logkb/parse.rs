use num_traits::Zero;

use crate::scalar::{parse_decimal, Rational};
use crate::syntax::{tokenize, Cursor, SyntaxError, Tok};

use super::program::{Clause, LogicProgram};
use super::term::{sym, ArithOp, Atom, CmpOp, Literal, Term};
use super::LogkbError;

pub const COMMENT_CHARS: &[char] = &['%', '#'];

pub fn parse_logkb(text: &str) -> Result<LogicProgram, LogkbError> {
    let (clauses, lines) = parse_clauses(text)?;
    LogicProgram::with_lines(clauses, lines)
}

pub(crate) fn parse_clauses(text: &str) -> Result<(Vec<Clause>, Vec<usize>), SyntaxError> {
    let mut cur = Cursor::new(tokenize(text, COMMENT_CHARS)?);
    let mut clauses = Vec::new();
    let mut lines = Vec::new();
    while !cur.at_eof() {
        lines.push(cur.token().line);
        clauses.push(parse_clause(&mut cur)?);
    }
    Ok((clauses, lines))
}

fn parse_clause(cur: &mut Cursor) -> Result<Clause, SyntaxError> {
    let head_tok = cur.token().clone();
    let head = term_to_atom(parse_term(cur)?)
        .ok_or_else(|| SyntaxError::at(&head_tok, "clause head must be an atom"))?;
    let value = if cur.eat(&Tok::Eq) {
        Some(parse_term(cur)?)
    } else {
        None
    };
    let mut body = Vec::new();
    if cur.eat(&Tok::ColonDash) {
        loop {
            body.push(parse_literal(cur, false)?);
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
    }
    cur.expect(&Tok::Dot)?;
    Ok(Clause { head, value, body })
}

/// Parses one query literal. With `in_angle` set, `>` and `>=` are not
/// comparison operators (they close a `sum < ... >` query).
pub(crate) fn parse_literal(cur: &mut Cursor, in_angle: bool) -> Result<Literal, SyntaxError> {
    if matches!(cur.peek(), Tok::Ident(s) if s == "not") && matches!(cur.peek_at(1), Tok::Ident(_))
    {
        cur.advance();
        return Ok(Literal::Neg(parse_atom(cur)?));
    }
    let start = cur.token().clone();
    let lhs = parse_term(cur)?;
    let op = match cur.peek() {
        Tok::Lt => Some(CmpOp::Lt),
        Tok::Le => Some(CmpOp::Le),
        Tok::Gt if !in_angle => Some(CmpOp::Gt),
        Tok::Ge if !in_angle => Some(CmpOp::Ge),
        Tok::EqEq => Some(CmpOp::Eq),
        Tok::Ne => Some(CmpOp::Ne),
        _ => None,
    };
    if let Some(op) = op {
        cur.advance();
        let rhs = parse_term(cur)?;
        return Ok(Literal::Cmp(op, lhs, rhs));
    }
    term_to_atom(lhs)
        .map(Literal::Pos)
        .ok_or_else(|| SyntaxError::at(&start, "expected an atom or a comparison"))
}

pub(crate) fn parse_atom(cur: &mut Cursor) -> Result<Atom, SyntaxError> {
    let tok = cur.advance();
    let Tok::Ident(name) = &tok.tok else {
        return Err(SyntaxError::at(&tok, format!("expected predicate name, found {}", tok.tok)));
    };
    let args = if matches!(cur.peek(), Tok::LParen) {
        parse_args(cur)?
    } else {
        Vec::new()
    };
    Ok(Atom::new(name, args))
}

fn term_to_atom(term: Term) -> Option<Atom> {
    match term {
        Term::Sym(name) => Some(Atom {
            predicate: name,
            args: Vec::new(),
        }),
        Term::Compound(name, args) => Some(Atom {
            predicate: name,
            args,
        }),
        _ => None,
    }
}

fn parse_args(cur: &mut Cursor) -> Result<Vec<Term>, SyntaxError> {
    cur.expect(&Tok::LParen)?;
    let mut args = vec![parse_term(cur)?];
    while cur.eat(&Tok::Comma) {
        args.push(parse_term(cur)?);
    }
    cur.expect(&Tok::RParen)?;
    Ok(args)
}

pub(crate) fn parse_term(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let mut lhs = parse_product(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Plus => ArithOp::Add,
            Tok::Minus => ArithOp::Sub,
            _ => return Ok(lhs),
        };
        cur.advance();
        let rhs = parse_product(cur)?;
        lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_product(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    let mut lhs = parse_unary(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Star => ArithOp::Mul,
            Tok::Slash => ArithOp::Div,
            _ => return Ok(lhs),
        };
        cur.advance();
        let rhs = parse_unary(cur)?;
        lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_unary(cur: &mut Cursor) -> Result<Term, SyntaxError> {
    if cur.eat(&Tok::Minus) {
        return Ok(match parse_unary(cur)? {
            Term::Num(r) => Term::Num(-r),
            other => Term::Arith(ArithOp::Sub, Box::new(Term::Num(Rational::zero())), Box::new(other)),
        });
    }
    let tok = cur.advance();
    match &tok.tok {
        Tok::Number(text) => parse_decimal(text)
            .map(Term::Num)
            .ok_or_else(|| SyntaxError::at(&tok, format!("bad number `{text}`"))),
        Tok::Var(name) => Ok(Term::Var(sym(name))),
        Tok::Anon => Ok(Term::Anon),
        Tok::Ident(name) => {
            if matches!(cur.peek(), Tok::LParen) {
                Ok(Term::Compound(sym(name), parse_args(cur)?))
            } else {
                Ok(Term::Sym(sym(name)))
            }
        }
        Tok::LParen => {
            let inner = parse_term(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(inner)
        }
        other => Err(SyntaxError::at(&tok, format!("expected a term, found {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn valued_fact_sugar() {
        let p = parse_logkb("cap(s,a) = 4.").unwrap();
        assert_eq!(p.clauses().len(), 1);
        let c = &p.clauses()[0];
        assert_eq!(c.head.to_string(), "cap(s, a)");
        assert_eq!(c.value, Some(Term::Num(Rational::from_integer(4.into()))));
        assert!(c.body.is_empty());
    }

    #[test]
    fn empty_input_is_empty_program() {
        assert!(parse_logkb("").unwrap().clauses().is_empty());
        assert!(parse_logkb("% only a comment\n").unwrap().clauses().is_empty());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_logkb("p(a).\nq(b) :- .").unwrap_err();
        match err {
            LogkbError::Syntax(e) => assert_eq!((e.line, e.col), (2, 9)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn arithmetic_precedence() {
        let p = parse_logkb("p(X - 1 * 2) :- q(X).").unwrap();
        assert_eq!(p.clauses()[0].head.to_string(), "p(X - 1 * 2)");
        let p = parse_logkb("p((X - 1) * 2) :- q(X).").unwrap();
        assert_eq!(p.clauses()[0].head.to_string(), "p((X - 1) * 2)");
    }

    #[test]
    fn negated_and_builtin_literals() {
        let p = parse_logkb("r(X) :- q(X), not s(X), X != 3, X >= n - 1.").unwrap();
        let body = &p.clauses()[0].body;
        assert!(matches!(body[1], Literal::Neg(_)));
        assert!(matches!(body[2], Literal::Cmp(CmpOp::Ne, _, _)));
        assert!(matches!(body[3], Literal::Cmp(CmpOp::Ge, _, _)));
    }
}
