//! Semi-naive bottom-up evaluation and the query engine.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Zero};

use crate::scalar::Rational;

use super::program::{check_conjunction, resolve_in, Clause, LogicProgram};
use super::term::{
    conjunction_vars, ArithOp, Atom, CmpOp, GroundAtom, Literal, PredKey, Substitution, Symbol,
    Term, Value,
};
use super::LogkbError;

#[derive(Clone, Debug)]
pub struct EvalConfig {
    /// Upper bound on the number of distinct ground atoms.
    pub derivation_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            derivation_cap: 10_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Origin {
    Fact,
    Rule(usize),
}

#[derive(Clone, Debug)]
struct Row {
    args: Vec<Value>,
    value: Rational,
    round: u32,
    origin: Origin,
    mult: u64,
}

#[derive(Clone, Debug)]
struct Relation {
    valued: bool,
    rows: Vec<Row>,
    lookup: HashMap<Vec<Value>, usize>,
    columns: Vec<HashMap<Value, Vec<usize>>>,
}

impl Relation {
    fn new(arity: usize, valued: bool) -> Self {
        Relation {
            valued,
            rows: Vec::new(),
            lookup: HashMap::new(),
            columns: vec![HashMap::new(); arity],
        }
    }

    fn push(&mut self, row: Row) {
        let idx = self.rows.len();
        for (c, v) in row.args.iter().enumerate() {
            self.columns[c].entry(v.clone()).or_default().push(idx);
        }
        self.lookup.insert(row.args.clone(), idx);
        self.rows.push(row);
    }
}

#[derive(Clone, Debug)]
enum CTerm {
    Val(Value),
    Slot(usize),
    Anon,
    Compound(Symbol, Vec<CTerm>),
    Arith(ArithOp, Box<CTerm>, Box<CTerm>),
}

#[derive(Clone, Debug)]
enum CLit {
    /// `rel == None`: predicate unknown to the KB, no answers.
    Pos {
        rel: Option<PredKey>,
        args: Vec<CTerm>,
        value: Option<CTerm>,
    },
    Neg {
        rel: Option<PredKey>,
        args: Vec<CTerm>,
        value: Option<CTerm>,
    },
    Cmp(CmpOp, CTerm, CTerm),
}

type Window = (u32, u32);
const ALL: Window = (0, u32::MAX);

struct Compiler<'a> {
    slots: Vec<Symbol>,
    constants: &'a HashMap<Symbol, Rational>,
    preds: &'a BTreeMap<PredKey, bool>,
}

impl Compiler<'_> {
    fn slot(&mut self, v: &Symbol) -> usize {
        match self.slots.iter().position(|s| s == v) {
            Some(i) => i,
            None => {
                self.slots.push(v.clone());
                self.slots.len() - 1
            }
        }
    }

    fn term(&mut self, t: &Term) -> CTerm {
        match t {
            Term::Sym(s) => match self.constants.get(s) {
                Some(r) => CTerm::Val(Value::Num(r.clone())),
                None => CTerm::Val(Value::Sym(s.clone())),
            },
            Term::Num(r) => CTerm::Val(Value::Num(r.clone())),
            Term::Var(v) => CTerm::Slot(self.slot(v)),
            Term::Anon => CTerm::Anon,
            Term::Compound(f, args) => {
                let args: Vec<CTerm> = args.iter().map(|a| self.term(a)).collect();
                if args.iter().all(|a| matches!(a, CTerm::Val(_))) {
                    let vals = args
                        .into_iter()
                        .map(|a| match a {
                            CTerm::Val(v) => v,
                            _ => unreachable!(),
                        })
                        .collect();
                    CTerm::Val(Value::Compound(f.clone(), vals))
                } else {
                    CTerm::Compound(f.clone(), args)
                }
            }
            Term::Arith(op, l, r) => {
                CTerm::Arith(*op, Box::new(self.term(l)), Box::new(self.term(r)))
            }
        }
    }

    fn atom(&mut self, atom: &Atom) -> (Option<PredKey>, Vec<CTerm>, Option<CTerm>) {
        match resolve_in(self.preds, atom) {
            None => (None, atom.args.iter().map(|a| self.term(a)).collect(), None),
            Some(r) => {
                let mut args: Vec<CTerm> = atom.args.iter().map(|a| self.term(a)).collect();
                let value = if r.value_arg { args.pop() } else { None };
                (Some(r.key), args, value)
            }
        }
    }

    fn literal(&mut self, lit: &Literal) -> CLit {
        match lit {
            Literal::Pos(a) => {
                let (rel, args, value) = self.atom(a);
                CLit::Pos { rel, args, value }
            }
            Literal::Neg(a) => {
                let (rel, args, value) = self.atom(a);
                CLit::Neg { rel, args, value }
            }
            Literal::Cmp(op, l, r) => CLit::Cmp(*op, self.term(l), self.term(r)),
        }
    }
}

struct CompiledRule {
    index: usize,
    head_key: PredKey,
    head: Vec<CTerm>,
    value: Option<CTerm>,
    body: Vec<CLit>,
    nslots: usize,
}

fn eval_term(t: &CTerm, env: &[Option<Value>]) -> Result<Option<Value>, LogkbError> {
    Ok(match t {
        CTerm::Val(v) => Some(v.clone()),
        CTerm::Slot(s) => env[*s].clone(),
        CTerm::Anon => None,
        CTerm::Compound(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                match eval_term(a, env)? {
                    Some(v) => vals.push(v),
                    None => return Ok(None),
                }
            }
            Some(Value::Compound(f.clone(), vals))
        }
        CTerm::Arith(op, l, r) => {
            let (Some(l), Some(r)) = (eval_term(l, env)?, eval_term(r, env)?) else {
                return Ok(None);
            };
            Some(Value::Num(arith(*op, &l, &r)?))
        }
    })
}

pub(crate) fn arith(op: ArithOp, l: &Value, r: &Value) -> Result<Rational, LogkbError> {
    let (Value::Num(a), Value::Num(b)) = (l, r) else {
        return Err(LogkbError::Arithmetic(format!(
            "non-numeric operand in {l} {} {r}",
            op.symbol()
        )));
    };
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => {
            if b.is_zero() {
                return Err(LogkbError::Arithmetic(format!("division by zero in {l} / {r}")));
            }
            a / b
        }
    })
}

fn unify(t: &CTerm, v: &Value, env: &mut [Option<Value>], trail: &mut Vec<usize>) -> Result<bool, LogkbError> {
    match t {
        CTerm::Val(c) => Ok(c == v),
        CTerm::Anon => Ok(true),
        CTerm::Slot(s) => match &env[*s] {
            Some(b) => Ok(b == v),
            None => {
                env[*s] = Some(v.clone());
                trail.push(*s);
                Ok(true)
            }
        },
        CTerm::Compound(f, args) => match v {
            Value::Compound(g, vals) if f == g && args.len() == vals.len() => {
                for (a, x) in args.iter().zip(vals) {
                    if !unify(a, x, env, trail)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Ok(false),
        },
        CTerm::Arith(..) => match eval_term(t, env)? {
            Some(x) => Ok(&x == v),
            None => Err(LogkbError::Arithmetic("arithmetic over unbound variable".into())),
        },
    }
}

fn undo(env: &mut [Option<Value>], trail: &mut Vec<usize>, mark: usize) {
    for s in trail.drain(mark..) {
        env[s] = None;
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<bool, LogkbError> {
    match op {
        CmpOp::Eq => Ok(l == r),
        CmpOp::Ne => Ok(l != r),
        _ => {
            let (Value::Num(a), Value::Num(b)) = (l, r) else {
                return Err(LogkbError::Arithmetic(format!(
                    "comparison {l} {} {r} needs numbers",
                    op.symbol()
                )));
            };
            Ok(match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            })
        }
    }
}

/// Materialized least model: immutable after [`evaluate`], safe to share
/// across threads for concurrent queries.
#[derive(Clone, Debug)]
pub struct MaterializedKb {
    relations: BTreeMap<PredKey, Relation>,
    preds: BTreeMap<PredKey, bool>,
    constants: HashMap<Symbol, Rational>,
}

type Sink<'s> = dyn FnMut(&[Option<Value>], u64) -> Result<(), LogkbError> + 's;

impl MaterializedKb {
    fn compiler(&self) -> Compiler<'_> {
        Compiler {
            slots: Vec::new(),
            constants: &self.constants,
            preds: &self.preds,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        lits: &[CLit],
        windows: &[Window],
        i: usize,
        env: &mut Vec<Option<Value>>,
        trail: &mut Vec<usize>,
        mult: u64,
        sink: &mut Sink<'_>,
    ) -> Result<(), LogkbError> {
        let Some(lit) = lits.get(i) else {
            return sink(env, mult);
        };
        match lit {
            CLit::Pos { rel, args, value } => {
                let Some(key) = rel else { return Ok(()) };
                let rel = &self.relations[key];
                let (lo, hi) = windows[i];
                let mut candidates: Option<&[usize]> = None;
                for (c, arg) in args.iter().enumerate() {
                    if matches!(arg, CTerm::Slot(_) | CTerm::Anon) && !is_bound(arg, env) {
                        continue;
                    }
                    if let Some(v) = eval_term(arg, env)? {
                        let bucket = rel.columns[c].get(&v).map_or(&[][..], |b| b.as_slice());
                        if candidates.is_none_or(|best| bucket.len() < best.len()) {
                            candidates = Some(bucket);
                        }
                        if bucket.is_empty() {
                            break;
                        }
                    }
                }
                let all: Vec<usize>;
                let candidates = match candidates {
                    Some(c) => c,
                    None => {
                        all = (0..rel.rows.len()).collect();
                        &all
                    }
                };
                for &idx in candidates {
                    let row = &rel.rows[idx];
                    if row.round < lo || row.round >= hi {
                        continue;
                    }
                    let mark = trail.len();
                    let mut ok = true;
                    for (a, v) in args.iter().zip(&row.args) {
                        if !unify(a, v, env, trail)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        if let Some(vt) = value {
                            ok = unify(vt, &Value::Num(row.value.clone()), env, trail)?;
                        }
                    }
                    if ok {
                        self.solve(lits, windows, i + 1, env, trail, mult.saturating_mul(row.mult), sink)?;
                    }
                    undo(env, trail, mark);
                }
                Ok(())
            }
            CLit::Neg { rel, args, value } => {
                let found = match rel {
                    None => false,
                    Some(key) => self.exists(&self.relations[key], args, value.as_ref(), env, trail)?,
                };
                if !found {
                    self.solve(lits, windows, i + 1, env, trail, mult, sink)?;
                }
                Ok(())
            }
            CLit::Cmp(op, l, r) => {
                let (Some(a), Some(b)) = (eval_term(l, env)?, eval_term(r, env)?) else {
                    return Err(LogkbError::Arithmetic("comparison over unbound variable".into()));
                };
                if compare(*op, &a, &b)? {
                    self.solve(lits, windows, i + 1, env, trail, mult, sink)?;
                }
                Ok(())
            }
        }
    }

    fn exists(
        &self,
        rel: &Relation,
        args: &[CTerm],
        value: Option<&CTerm>,
        env: &mut [Option<Value>],
        trail: &mut Vec<usize>,
    ) -> Result<bool, LogkbError> {
        let mut ground = Vec::with_capacity(args.len());
        for a in args {
            match eval_term(a, env)? {
                Some(v) => ground.push(v),
                None => break,
            }
        }
        if ground.len() == args.len() {
            let Some(&idx) = rel.lookup.get(&ground) else {
                return Ok(false);
            };
            return match value {
                None => Ok(true),
                Some(vt) => {
                    let mark = trail.len();
                    let ok = unify(vt, &Value::Num(rel.rows[idx].value.clone()), env, trail)?;
                    undo(env, trail, mark);
                    Ok(ok)
                }
            };
        }
        for row in &rel.rows {
            let mark = trail.len();
            let mut ok = true;
            for (a, v) in args.iter().zip(&row.args) {
                if !unify(a, v, env, trail)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                if let Some(vt) = value {
                    ok = unify(vt, &Value::Num(row.value.clone()), env, trail)?;
                }
            }
            undo(env, trail, mark);
            if ok {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Runs a safe conjunction under an initial binding, returning each
    /// solution projected onto the conjunction's free variables together
    /// with its derivation count.
    fn run_query(
        &self,
        conj: &[Literal],
        bound: &Substitution,
    ) -> Result<(Vec<Symbol>, Vec<(Vec<Value>, u64)>), LogkbError> {
        let mut bound_vars: Vec<Symbol> = bound.keys().cloned().collect();
        check_conjunction(conj, &mut bound_vars)
            .map_err(|var| LogkbError::UnsafeQuery { var: var.to_string() })?;

        let mut comp = self.compiler();
        let free: Vec<Symbol> = conjunction_vars(conj)
            .into_iter()
            .filter(|v| !bound.contains_key(v))
            .collect();
        for v in &free {
            comp.slot(v);
        }
        let lits: Vec<CLit> = conj.iter().map(|l| comp.literal(l)).collect();
        let mut env: Vec<Option<Value>> = vec![None; comp.slots.len()];
        for (i, name) in comp.slots.iter().enumerate() {
            if let Some(v) = bound.get(name) {
                env[i] = Some(v.clone());
            }
        }
        let windows = vec![ALL; lits.len()];
        let nfree = free.len();
        let mut out = Vec::new();
        let mut sink = |env: &[Option<Value>], mult: u64| {
            let key: Vec<Value> = env[..nfree]
                .iter()
                .map(|v| v.clone().expect("projected variable bound"))
                .collect();
            out.push((key, mult));
            Ok(())
        };
        self.solve(&lits, &windows, 0, &mut env, &mut Vec::new(), 1, &mut sink)?;
        Ok((free, out))
    }

    /// Set semantics: distinct substitutions over the free variables, in
    /// lexicographic order of the bound values.
    pub fn query_set(&self, conj: &[Literal]) -> Result<Vec<Substitution>, LogkbError> {
        self.query_set_bound(conj, &Substitution::new())
    }

    pub fn query_set_bound(
        &self,
        conj: &[Literal],
        bound: &Substitution,
    ) -> Result<Vec<Substitution>, LogkbError> {
        let (free, rows) = self.run_query(conj, bound)?;
        let distinct: BTreeSet<Vec<Value>> = rows.into_iter().map(|(k, _)| k).collect();
        Ok(distinct.into_iter().map(|k| to_substitution(&free, k)).collect())
    }

    /// Multiset semantics: one substitution per derivation.
    pub fn query_multiset(&self, conj: &[Literal]) -> Result<Vec<Substitution>, LogkbError> {
        self.query_multiset_bound(conj, &Substitution::new())
    }

    pub fn query_multiset_bound(
        &self,
        conj: &[Literal],
        bound: &Substitution,
    ) -> Result<Vec<Substitution>, LogkbError> {
        let mut out = Vec::new();
        for (sub, count) in self.query_counts_bound(conj, bound)? {
            for _ in 0..count {
                out.push(sub.clone());
            }
        }
        Ok(out)
    }

    /// Multiset semantics in compressed form: distinct substitutions with
    /// their multiplicities, in the same order as [`Self::query_set_bound`].
    pub fn query_counts_bound(
        &self,
        conj: &[Literal],
        bound: &Substitution,
    ) -> Result<Vec<(Substitution, u64)>, LogkbError> {
        let (free, rows) = self.run_query(conj, bound)?;
        let mut counts: BTreeMap<Vec<Value>, u64> = BTreeMap::new();
        for (k, m) in rows {
            let e = counts.entry(k).or_insert(0);
            *e = e.saturating_add(m);
        }
        Ok(counts
            .into_iter()
            .map(|(k, m)| (to_substitution(&free, k), m))
            .collect())
    }

    /// Value of a ground atom: the stored value for valued predicates,
    /// 1/0 truth value for plain predicates.
    pub fn lookup_value(&self, atom: &GroundAtom) -> Result<Rational, LogkbError> {
        let key = atom.key();
        let Some(rel) = self.relations.get(&key) else {
            return Err(LogkbError::UnknownPredicate { pred: key });
        };
        match rel.lookup.get(&atom.args) {
            Some(&idx) => Ok(rel.rows[idx].value.clone()),
            None if rel.valued => Err(LogkbError::Absent {
                atom: atom.to_string(),
            }),
            None => Ok(Rational::zero()),
        }
    }

    /// Evaluates a term under a substitution: resolves named constants and
    /// performs arithmetic.
    pub fn instantiate(&self, term: &Term, sub: &Substitution) -> Result<Value, LogkbError> {
        let mut comp = self.compiler();
        let ct = comp.term(term);
        let env: Vec<Option<Value>> = comp.slots.iter().map(|s| sub.get(s).cloned()).collect();
        match eval_term(&ct, &env)? {
            Some(v) => Ok(v),
            None => {
                let mut vars = Vec::new();
                term.collect_vars(&mut vars);
                let var = vars
                    .into_iter()
                    .find(|v| !sub.contains_key(v))
                    .map_or_else(|| "_".to_string(), |v| v.to_string());
                Err(LogkbError::UnsafeQuery { var })
            }
        }
    }

    pub fn instantiate_atom(&self, atom: &Atom, sub: &Substitution) -> Result<GroundAtom, LogkbError> {
        let args = atom
            .args
            .iter()
            .map(|t| self.instantiate(t, sub))
            .collect::<Result<_, _>>()?;
        Ok(GroundAtom {
            predicate: atom.predicate.clone(),
            args,
        })
    }

    pub fn has_predicate(&self, key: &PredKey) -> bool {
        self.relations.contains_key(key)
    }

    /// Resolves a possibly value-carrying atom pattern to a stored predicate.
    pub fn resolves(&self, atom: &Atom) -> bool {
        resolve_in(&self.preds, atom).is_some()
    }

    pub fn is_valued(&self, key: &PredKey) -> bool {
        self.preds.get(key).copied().unwrap_or(false)
    }

    pub fn constant(&self, name: &str) -> Option<&Rational> {
        self.constants.get(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredKey> {
        self.relations.keys()
    }

    /// Number of distinct ground atoms of a predicate.
    pub fn atom_count(&self, key: &PredKey) -> usize {
        self.relations.get(key).map_or(0, |r| r.rows.len())
    }

    /// Sum of derivation counts over the atoms of a predicate.
    pub fn derivation_count(&self, key: &PredKey) -> u64 {
        self.relations
            .get(key)
            .map_or(0, |r| r.rows.iter().fold(0u64, |acc, row| acc.saturating_add(row.mult)))
    }

    pub fn total_atoms(&self) -> usize {
        self.relations.values().map(|r| r.rows.len()).sum()
    }

    /// All ground atoms in sorted order, with values for valued predicates.
    pub fn atoms(&self) -> Vec<(GroundAtom, Option<Rational>)> {
        let mut out = Vec::new();
        for (key, rel) in &self.relations {
            let mut rows: Vec<&Row> = rel.rows.iter().collect();
            rows.sort_by(|a, b| a.args.cmp(&b.args));
            for row in rows {
                out.push((
                    GroundAtom {
                        predicate: key.name.clone(),
                        args: row.args.clone(),
                    },
                    rel.valued.then(|| row.value.clone()),
                ));
            }
        }
        out
    }

    /// The model as a fact-only program.
    pub fn to_program(&self) -> LogicProgram {
        let clauses = self
            .atoms()
            .into_iter()
            .map(|(atom, value)| Clause {
                head: Atom {
                    predicate: atom.predicate.clone(),
                    args: atom.args.iter().map(Term::from).collect(),
                },
                value: value.map(Term::Num),
                body: Vec::new(),
            })
            .collect();
        LogicProgram::new(clauses).expect("fact-only programs are always valid")
    }
}

fn is_bound(t: &CTerm, env: &[Option<Value>]) -> bool {
    match t {
        CTerm::Slot(s) => env[*s].is_some(),
        CTerm::Anon => false,
        _ => true,
    }
}

fn to_substitution(vars: &[Symbol], values: Vec<Value>) -> Substitution {
    vars.iter().cloned().zip(values).collect()
}

/// `true` if `general` matches `specific` one-way (specific is an instance).
fn subsumes(general: &[Term], specific: &[Term]) -> bool {
    fn go(g: &Term, s: &Term, map: &mut BTreeMap<Symbol, Term>) -> bool {
        match (g, s) {
            (Term::Var(v), _) => match map.get(v) {
                Some(prev) => prev == s,
                None => {
                    map.insert(v.clone(), s.clone());
                    true
                }
            },
            (Term::Compound(f, ga), Term::Compound(h, sa)) => {
                f == h && ga.len() == sa.len() && ga.iter().zip(sa).all(|(x, y)| go(x, y, map))
            }
            (Term::Arith(..), _) | (_, Term::Arith(..)) => false,
            _ => g == s,
        }
    }
    let mut map = BTreeMap::new();
    general.len() == specific.len() && general.iter().zip(specific).all(|(g, s)| go(g, s, &mut map))
}

fn strictly_more_specific(a: &Clause, b: &Clause) -> bool {
    subsumes(&b.head.args, &a.head.args) && !subsumes(&a.head.args, &b.head.args)
}

struct Derived {
    key: PredKey,
    args: Vec<Value>,
    value: Rational,
    rule: usize,
    mult: u64,
}

pub fn evaluate(program: &LogicProgram) -> Result<MaterializedKb, LogkbError> {
    evaluate_with(program, &EvalConfig::default())
}

pub fn evaluate_with(program: &LogicProgram, config: &EvalConfig) -> Result<MaterializedKb, LogkbError> {
    let preds = program.predicates().clone();
    let mut kb = MaterializedKb {
        relations: preds
            .iter()
            .map(|(k, &valued)| (k.clone(), Relation::new(k.arity, valued)))
            .collect(),
        preds,
        constants: HashMap::new(),
    };
    let clauses = program.clauses();

    // named constants: 0-ary valued facts with a plain numeric value
    for c in program.facts() {
        if c.head.args.is_empty() {
            if let Some(Term::Num(r)) = &c.value {
                kb.constants.insert(c.head.predicate.clone(), r.clone());
            }
        }
    }

    let mut total = 0usize;
    for (ci, clause) in clauses.iter().enumerate() {
        if !clause.is_fact() {
            continue;
        }
        let empty = Substitution::new();
        let atom = kb.instantiate_atom(&clause.head, &empty).map_err(|e| at_line(e, program, ci))?;
        let value = match &clause.value {
            Some(t) => numeric(kb.instantiate(t, &empty)?, &atom)?,
            None => Rational::one(),
        };
        let key = atom.key();
        let rel = kb.relations.get_mut(&key).expect("relation per head");
        if let Some(&idx) = rel.lookup.get(&atom.args) {
            if rel.rows[idx].value != value {
                return Err(LogkbError::Conflict {
                    atom: atom.to_string(),
                    first: rel.rows[idx].value.clone(),
                    second: value,
                });
            }
            continue;
        }
        rel.push(Row {
            args: atom.args,
            value,
            round: 0,
            origin: Origin::Fact,
            mult: 1,
        });
        total += 1;
        if total > config.derivation_cap {
            return Err(LogkbError::DerivationCap { cap: config.derivation_cap });
        }
    }

    for comp in program.components() {
        let rules: Vec<CompiledRule> = clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_fact() && comp.preds.contains(&c.head.key()))
            .map(|(i, c)| {
                let mut compiler = kb.compiler();
                let body: Vec<CLit> = c.body.iter().map(|l| compiler.literal(l)).collect();
                let head: Vec<CTerm> = c.head.args.iter().map(|t| compiler.term(t)).collect();
                let value = c.value.as_ref().map(|t| compiler.term(t));
                CompiledRule {
                    index: i,
                    head_key: c.head.key(),
                    head,
                    value,
                    body,
                    nslots: compiler.slots.len(),
                }
            })
            .collect();
        if rules.is_empty() {
            continue;
        }

        let in_comp = |lit: &CLit| matches!(lit, CLit::Pos { rel: Some(k), .. } if comp.preds.contains(k));

        if !comp.recursive {
            let mut derived = Vec::new();
            for rule in &rules {
                let windows = vec![ALL; rule.body.len()];
                fire(&kb, rule, &windows, &mut derived).map_err(|e| at_line(e, program, rule.index))?;
            }
            insert_all(&mut kb, clauses, derived, 1, &mut total, config)?;
            continue;
        }

        let mut round = 1u32;
        loop {
            let mut derived = Vec::new();
            for rule in &rules {
                if round == 1 {
                    let windows: Vec<Window> = rule
                        .body
                        .iter()
                        .map(|l| if in_comp(l) { (0, 1) } else { ALL })
                        .collect();
                    fire(&kb, rule, &windows, &mut derived).map_err(|e| at_line(e, program, rule.index))?;
                    continue;
                }
                for (pos, lit) in rule.body.iter().enumerate() {
                    if !in_comp(lit) {
                        continue;
                    }
                    let windows: Vec<Window> = rule
                        .body
                        .iter()
                        .enumerate()
                        .map(|(j, l)| {
                            if !in_comp(l) {
                                ALL
                            } else if j < pos {
                                (0, round - 1)
                            } else if j == pos {
                                (round - 1, round)
                            } else {
                                (0, round)
                            }
                        })
                        .collect();
                    fire(&kb, rule, &windows, &mut derived).map_err(|e| at_line(e, program, rule.index))?;
                }
            }
            let added = insert_all(&mut kb, clauses, derived, round, &mut total, config)?;
            if added == 0 {
                break;
            }
            round += 1;
        }
        // derivation counts are only tracked through non-recursive rules
        for key in &comp.preds {
            if let Some(rel) = kb.relations.get_mut(key) {
                rel.rows.iter_mut().for_each(|r| r.mult = 1);
            }
        }
    }
    Ok(kb)
}

fn at_line(err: LogkbError, program: &LogicProgram, clause: usize) -> LogkbError {
    match err {
        LogkbError::Arithmetic(msg) => {
            LogkbError::Arithmetic(format!("line {}: {msg}", program.line_of(clause)))
        }
        other => other,
    }
}

fn numeric(v: Value, atom: &GroundAtom) -> Result<Rational, LogkbError> {
    match v {
        Value::Num(r) => Ok(r),
        other => Err(LogkbError::Arithmetic(format!("value of {atom} is not a number: {other}"))),
    }
}

fn fire(
    kb: &MaterializedKb,
    rule: &CompiledRule,
    windows: &[Window],
    out: &mut Vec<Derived>,
) -> Result<(), LogkbError> {
    let mut env = vec![None; rule.nslots];
    let mut sink = |env: &[Option<Value>], mult: u64| {
        let mut args = Vec::with_capacity(rule.head.len());
        for t in &rule.head {
            args.push(eval_term(t, env)?.expect("range-restricted head"));
        }
        let value = match &rule.value {
            None => Rational::one(),
            Some(t) => match eval_term(t, env)? {
                Some(Value::Num(r)) => r,
                other => {
                    return Err(LogkbError::Arithmetic(format!(
                        "rule value is not a number: {other:?}"
                    )))
                }
            },
        };
        out.push(Derived {
            key: rule.head_key.clone(),
            args,
            value,
            rule: rule.index,
            mult,
        });
        Ok(())
    };
    kb.solve(&rule.body, windows, 0, &mut env, &mut Vec::new(), 1, &mut sink)
}

fn insert_all(
    kb: &mut MaterializedKb,
    clauses: &[Clause],
    derived: Vec<Derived>,
    round: u32,
    total: &mut usize,
    config: &EvalConfig,
) -> Result<usize, LogkbError> {
    let mut added = 0;
    for d in derived {
        let rel = kb.relations.get_mut(&d.key).expect("relation per head");
        if let Some(&idx) = rel.lookup.get(&d.args) {
            let row = &mut rel.rows[idx];
            row.mult = row.mult.saturating_add(d.mult);
            if row.value == d.value {
                continue;
            }
            let conflict = || LogkbError::Conflict {
                atom: GroundAtom {
                    predicate: d.key.name.clone(),
                    args: d.args.clone(),
                }
                .to_string(),
                first: row.value.clone(),
                second: d.value.clone(),
            };
            match row.origin {
                Origin::Fact => {}
                Origin::Rule(j) if j == d.rule => return Err(conflict()),
                Origin::Rule(j) => {
                    if strictly_more_specific(&clauses[d.rule], &clauses[j]) {
                        row.value = d.value;
                        row.origin = Origin::Rule(d.rule);
                    } else if !strictly_more_specific(&clauses[j], &clauses[d.rule]) {
                        return Err(conflict());
                    }
                }
            }
            continue;
        }
        rel.push(Row {
            args: d.args,
            value: d.value,
            round,
            origin: Origin::Rule(d.rule),
            mult: d.mult,
        });
        added += 1;
        *total += 1;
        if *total > config.derivation_cap {
            return Err(LogkbError::DerivationCap { cap: config.derivation_cap });
        }
    }
    Ok(added)
}
