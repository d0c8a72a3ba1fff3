use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::term::{Atom, Literal, PredKey, Symbol, Term};
use super::LogkbError;

/// `head [= value] [:- body].` A clause with an empty body is a fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Atom,
    pub value: Option<Term>,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if let Some(v) = &self.value {
            write!(f, " = {v}")?;
        }
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{lit}")?;
            }
        }
        f.write_str(".")
    }
}

/// A strongly connected group of predicates, evaluated together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Component {
    pub preds: Vec<PredKey>,
    pub recursive: bool,
}

/// How a body atom binds to a stored relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Resolved {
    pub key: PredKey,
    /// The last written argument is matched against the stored value.
    pub value_arg: bool,
}

#[derive(Clone, Debug)]
pub struct LogicProgram {
    clauses: Vec<Clause>,
    lines: Vec<usize>,
    preds: BTreeMap<PredKey, bool>,
    components: Vec<Component>,
    strata: Vec<Vec<PredKey>>,
}

impl PartialEq for LogicProgram {
    fn eq(&self, other: &Self) -> bool {
        self.clauses == other.clauses
    }
}

impl LogicProgram {
    pub fn new(clauses: Vec<Clause>) -> Result<Self, LogkbError> {
        let lines = vec![0; clauses.len()];
        Self::with_lines(clauses, lines)
    }

    pub(crate) fn with_lines(clauses: Vec<Clause>, lines: Vec<usize>) -> Result<Self, LogkbError> {
        let mut preds: BTreeMap<PredKey, bool> = BTreeMap::new();
        for (clause, &line) in clauses.iter().zip(&lines) {
            check_clause(clause, line)?;
            let key = clause.head.key();
            let valued = clause.value.is_some();
            match preds.get(&key) {
                Some(&v) if v != valued => return Err(LogkbError::MixedValued { pred: key }),
                _ => {
                    preds.insert(key, valued);
                }
            }
        }
        let mut program = LogicProgram {
            clauses,
            lines,
            preds,
            components: Vec::new(),
            strata: Vec::new(),
        };
        program.stratify()?;
        Ok(program)
    }

    /// Concatenates two programs (e.g. a model KB and a constants KB).
    pub fn merge(&self, other: &LogicProgram) -> Result<LogicProgram, LogkbError> {
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        let mut lines = self.lines.clone();
        lines.extend(other.lines.iter().copied());
        Self::with_lines(clauses, lines)
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn facts(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.is_fact())
    }

    pub fn rules(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.is_fact())
    }

    /// Layers of predicates; a predicate only depends negatively on
    /// predicates of strictly lower layers.
    pub fn strata(&self) -> &[Vec<PredKey>] {
        &self.strata
    }

    /// Every predicate with at least one clause, with its valued flag.
    pub fn predicates(&self) -> &BTreeMap<PredKey, bool> {
        &self.preds
    }

    pub fn is_defined(&self, key: &PredKey) -> bool {
        self.preds.contains_key(key)
    }

    pub(crate) fn components(&self) -> &[Component] {
        &self.components
    }

    pub(crate) fn line_of(&self, clause: usize) -> usize {
        self.lines.get(clause).copied().unwrap_or(0)
    }

    /// Resolves `p(t1..tk)` to relation `p/k`, or to valued `p/(k-1)` with
    /// the last argument standing for the value.
    pub(crate) fn resolve(&self, atom: &Atom) -> Option<Resolved> {
        resolve_in(&self.preds, atom)
    }

    fn stratify(&mut self) -> Result<(), LogkbError> {
        let mut graph: DiGraph<PredKey, bool> = DiGraph::new();
        let mut nodes: BTreeMap<PredKey, NodeIndex> = BTreeMap::new();
        for key in self.preds.keys() {
            nodes.insert(key.clone(), graph.add_node(key.clone()));
        }
        for clause in self.clauses.iter().filter(|c| !c.is_fact()) {
            let head = nodes[&clause.head.key()];
            for lit in &clause.body {
                let (atom, negative) = match lit {
                    Literal::Pos(a) => (a, false),
                    Literal::Neg(a) => (a, true),
                    Literal::Cmp(..) => continue,
                };
                if let Some(r) = self.resolve(atom) {
                    // edges point from a head to what it depends on
                    graph.add_edge(head, nodes[&r.key], negative);
                }
            }
        }

        let sccs = tarjan_scc(&graph);
        let mut comp_of = vec![0usize; graph.node_count()];
        for (ci, scc) in sccs.iter().enumerate() {
            for &n in scc {
                comp_of[n.index()] = ci;
            }
        }
        let mut layer = vec![0usize; sccs.len()];
        let mut components = Vec::with_capacity(sccs.len());
        for (ci, scc) in sccs.iter().enumerate() {
            let mut recursive = false;
            for &n in scc {
                for e in graph.edges(n) {
                    use petgraph::visit::EdgeRef;
                    let target = comp_of[e.target().index()];
                    if target == ci {
                        if *e.weight() {
                            let mut cycle: Vec<PredKey> =
                                scc.iter().map(|&m| graph[m].clone()).collect();
                            cycle.sort();
                            return Err(LogkbError::Unstratifiable { cycle });
                        }
                        recursive = true;
                    } else {
                        let bump = usize::from(*e.weight());
                        layer[ci] = layer[ci].max(layer[target] + bump);
                    }
                }
            }
            let mut preds: Vec<PredKey> = scc.iter().map(|&n| graph[n].clone()).collect();
            preds.sort();
            components.push(Component { preds, recursive });
        }

        let depth = layer.iter().copied().max().map_or(0, |d| d + 1);
        let mut strata = vec![Vec::new(); depth];
        for (ci, comp) in components.iter().enumerate() {
            strata[layer[ci]].extend(comp.preds.iter().cloned());
        }
        strata.iter_mut().for_each(|s| s.sort());
        self.components = components;
        self.strata = strata;
        Ok(())
    }
}

pub(crate) fn resolve_in(preds: &BTreeMap<PredKey, bool>, atom: &Atom) -> Option<Resolved> {
    let key = atom.key();
    if preds.contains_key(&key) {
        return Some(Resolved {
            key,
            value_arg: false,
        });
    }
    if atom.arity() > 0 {
        let shorter = PredKey::new(atom.predicate.clone(), atom.arity() - 1);
        if preds.get(&shorter) == Some(&true) {
            return Some(Resolved {
                key: shorter,
                value_arg: true,
            });
        }
    }
    None
}

impl fmt::Display for LogicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for clause in &self.clauses {
            writeln!(f, "{clause}")?;
        }
        Ok(())
    }
}

fn check_clause(clause: &Clause, line: usize) -> Result<(), LogkbError> {
    let unsafe_var = |var: &str| LogkbError::UnsafeRule {
        line,
        clause: clause.to_string(),
        var: var.to_string(),
    };
    if contains_anon(&clause.head.args) || clause.value.as_ref().is_some_and(|v| contains_anon(std::slice::from_ref(v))) {
        return Err(unsafe_var("_"));
    }
    let mut bound = Vec::new();
    check_conjunction(&clause.body, &mut bound).map_err(|v| unsafe_var(&v))?;
    let mut head_vars = clause.head.vars();
    if let Some(v) = &clause.value {
        v.collect_vars(&mut head_vars);
    }
    match head_vars.iter().find(|v| !bound.contains(v)) {
        Some(v) => Err(unsafe_var(v)),
        None => Ok(()),
    }
}

fn contains_anon(terms: &[Term]) -> bool {
    terms.iter().any(|t| match t {
        Term::Anon => true,
        Term::Compound(_, args) => contains_anon(args),
        Term::Arith(_, l, r) => contains_anon(&[(**l).clone(), (**r).clone()]),
        _ => false,
    })
}

/// Left-to-right safety: negated literals, comparisons and arithmetic
/// arguments may only use variables bound earlier. Extends `bound` with
/// the variables bound by positive literals; on failure returns the
/// offending variable.
pub(crate) fn check_conjunction(conj: &[Literal], bound: &mut Vec<Symbol>) -> Result<(), Symbol> {
    for lit in conj {
        match lit {
            Literal::Pos(atom) => {
                for arg in &atom.args {
                    check_arith_bound(arg, bound)?;
                }
                for v in atom.vars() {
                    if !bound.contains(&v) {
                        bound.push(v);
                    }
                }
            }
            Literal::Neg(atom) => {
                if let Some(v) = atom.vars().into_iter().find(|v| !bound.contains(v)) {
                    return Err(v);
                }
            }
            Literal::Cmp(_, l, r) => {
                let mut vars = Vec::new();
                l.collect_vars(&mut vars);
                r.collect_vars(&mut vars);
                if let Some(v) = vars.into_iter().find(|v| !bound.contains(v)) {
                    return Err(v);
                }
                if contains_anon(&[l.clone(), r.clone()]) {
                    return Err(Symbol::from("_"));
                }
            }
        }
    }
    Ok(())
}

fn check_arith_bound(term: &Term, bound: &[Symbol]) -> Result<(), Symbol> {
    match term {
        Term::Arith(..) => {
            let mut vars = Vec::new();
            term.collect_vars(&mut vars);
            if let Some(v) = vars.into_iter().find(|v| !bound.contains(v)) {
                return Err(v);
            }
            if contains_anon(std::slice::from_ref(term)) {
                return Err(Symbol::from("_"));
            }
            Ok(())
        }
        Term::Compound(_, args) => args.iter().try_for_each(|a| check_arith_bound(a, bound)),
        _ => Ok(()),
    }
}

/// Predicates referenced in a conjunction (positive or negated).
pub fn referenced_predicates(conj: &[Literal]) -> BTreeSet<(Symbol, usize)> {
    conj.iter()
        .filter_map(|l| match l {
            Literal::Pos(a) | Literal::Neg(a) => Some((a.predicate.clone(), a.arity())),
            Literal::Cmp(..) => None,
        })
        .collect()
}
