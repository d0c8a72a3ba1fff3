use crate::logkb::{parse_atom, parse_literal, Literal, Term};
use crate::scalar::parse_decimal;
use crate::syntax::{tokenize, Cursor, SyntaxError, Tok};

use super::ast::{
    BinOp, ConstraintTemplate, Definition, Objective, ParExpr, Rel, RlpModel, Sense, SumMode,
    VarDecl,
};
use super::RlpError;

pub fn parse_rlp(text: &str) -> Result<RlpModel, RlpError> {
    let mut cur = Cursor::new(tokenize(text, &['#', '%'])?);
    let mut vars: Vec<VarDecl> = Vec::new();
    let mut definitions = Vec::new();
    let mut objectives: Vec<(Objective, usize)> = Vec::new();
    let mut constraints = Vec::new();

    while !cur.at_eof() {
        let line = cur.token().line;
        let word = match cur.peek() {
            Tok::Ident(w) => w.clone(),
            other => return Err(cur.error(format!("expected an item, found {other}")).into()),
        };
        match word.as_str() {
            "var" if matches!(cur.peek_at(1), Tok::Ident(_)) => {
                cur.advance();
                let decl = parse_vardecl(&mut cur)?;
                if vars.contains(&decl) {
                    return Err(RlpError::Redeclared {
                        line,
                        pred: decl.key(),
                    });
                }
                vars.push(decl);
            }
            "maximize" | "maximise" | "minimize" | "minimise"
                if matches!(cur.peek_at(1), Tok::Colon) =>
            {
                cur.advance();
                cur.advance();
                let sense = if word.starts_with("max") {
                    Sense::Maximize
                } else {
                    Sense::Minimize
                };
                let expr = parse_expr(&mut cur)?;
                cur.expect(&Tok::Semi)?;
                objectives.push((Objective { sense, expr }, line));
            }
            "subject" if matches!(cur.peek_at(1), Tok::Ident(w) if w == "to") => {
                cur.advance();
                cur.advance();
                constraints.extend(parse_constraint(&mut cur)?);
            }
            _ => definitions.push(parse_definition(&mut cur)?),
        }
    }

    let objective = match objectives.len() {
        0 => return Err(RlpError::NoObjective),
        1 => objectives.pop().unwrap().0,
        _ => {
            return Err(RlpError::MultipleObjectives {
                lines: objectives.iter().map(|(_, l)| *l).collect(),
            })
        }
    };
    Ok(RlpModel {
        vars,
        definitions,
        objective,
        constraints,
    })
}

fn parse_vardecl(cur: &mut Cursor) -> Result<VarDecl, SyntaxError> {
    let name = match cur.advance().tok {
        Tok::Ident(n) => n,
        other => return Err(cur.error(format!("expected predicate name, found {other}"))),
    };
    cur.expect(&Tok::Slash)?;
    let tok = cur.advance();
    let arity = match &tok.tok {
        Tok::Number(n) => n.parse::<usize>().ok(),
        _ => None,
    }
    .ok_or_else(|| SyntaxError::at(&tok, "expected an integer arity"))?;
    cur.expect(&Tok::Semi)?;
    Ok(VarDecl {
        predicate: crate::logkb::sym(&name),
        arity,
    })
}

fn parse_definition(cur: &mut Cursor) -> Result<Definition, SyntaxError> {
    let start = cur.token().clone();
    let head = parse_atom(cur)?;
    let mut seen = Vec::new();
    for arg in &head.args {
        match arg {
            Term::Var(v) if !seen.contains(v) => seen.push(v.clone()),
            _ => {
                return Err(SyntaxError::at(
                    &start,
                    format!("definition head {head} must take distinct variables"),
                ))
            }
        }
    }
    cur.expect(&Tok::Eq)?;
    let body = parse_expr(cur)?;
    cur.expect(&Tok::Semi)?;
    Ok(Definition { head, body })
}

fn parse_rel(cur: &mut Cursor) -> Option<Rel> {
    let rel = match cur.peek() {
        Tok::Le => Rel::Le,
        Tok::Ge => Rel::Ge,
        Tok::Eq => Rel::Eq,
        _ => return None,
    };
    cur.advance();
    Some(rel)
}

fn parse_constraint(cur: &mut Cursor) -> Result<Vec<ConstraintTemplate>, SyntaxError> {
    let index = match cur.peek() {
        Tok::LBrace => {
            cur.advance();
            let q = parse_query(cur, false)?;
            cur.expect(&Tok::RBrace)?;
            Some(q)
        }
        Tok::Lt => return Err(cur.error("multiset indexing `< .. >` is not allowed on constraints")),
        _ => None,
    };
    cur.expect(&Tok::Colon)?;
    let first = parse_expr(cur)?;
    let rel = parse_rel(cur).ok_or_else(|| cur.error(format!("expected <=, >= or =, found {}", cur.peek())))?;
    let second = parse_expr(cur)?;
    let mut out = vec![ConstraintTemplate {
        index: index.clone(),
        lhs: first,
        rel,
        rhs: second.clone(),
    }];
    if let Some(rel2) = parse_rel(cur) {
        let third = parse_expr(cur)?;
        out.push(ConstraintTemplate {
            index,
            lhs: second,
            rel: rel2,
            rhs: third,
        });
    }
    cur.expect(&Tok::Semi)?;
    Ok(out)
}

fn parse_query(cur: &mut Cursor, in_angle: bool) -> Result<Vec<Literal>, SyntaxError> {
    let mut lits = Vec::new();
    if matches!(cur.peek(), Tok::RBrace) || (in_angle && matches!(cur.peek(), Tok::Gt)) {
        return Ok(lits);
    }
    loop {
        lits.push(parse_literal(cur, in_angle)?);
        if !cur.eat(&Tok::Comma) {
            return Ok(lits);
        }
    }
}

pub(crate) fn parse_expr(cur: &mut Cursor) -> Result<ParExpr, SyntaxError> {
    let mut lhs = parse_product(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            _ => return Ok(lhs),
        };
        cur.advance();
        let rhs = parse_product(cur)?;
        lhs = ParExpr::bin(op, lhs, rhs);
    }
}

fn parse_product(cur: &mut Cursor) -> Result<ParExpr, SyntaxError> {
    let mut lhs = parse_factor(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return Ok(lhs),
        };
        cur.advance();
        let rhs = parse_factor(cur)?;
        lhs = ParExpr::bin(op, lhs, rhs);
    }
}

fn parse_factor(cur: &mut Cursor) -> Result<ParExpr, SyntaxError> {
    match cur.peek().clone() {
        Tok::Minus => {
            cur.advance();
            Ok(ParExpr::Neg(Box::new(parse_factor(cur)?)))
        }
        Tok::Number(text) => {
            let tok = cur.advance();
            parse_decimal(&text)
                .map(ParExpr::Num)
                .ok_or_else(|| SyntaxError::at(&tok, format!("bad number `{text}`")))
        }
        Tok::LParen => {
            cur.advance();
            let e = parse_expr(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(e)
        }
        Tok::Ident(w) if w == "sum" && matches!(cur.peek_at(1), Tok::LBrace | Tok::Lt) => {
            cur.advance();
            let (mode, query) = if cur.eat(&Tok::LBrace) {
                let q = parse_query(cur, false)?;
                cur.expect(&Tok::RBrace)?;
                (SumMode::Set, q)
            } else {
                cur.expect(&Tok::Lt)?;
                let q = parse_query(cur, true)?;
                cur.expect(&Tok::Gt)?;
                (SumMode::Multiset, q)
            };
            let body = parse_product(cur)?;
            Ok(ParExpr::Sum {
                mode,
                query,
                body: Box::new(body),
            })
        }
        Tok::Ident(_) => Ok(ParExpr::Atom(parse_atom(cur)?)),
        other => Err(cur.error(format!("expected an expression, found {other}"))),
    }
}
