//! Coefficient graphs, color passing and equitable partitions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::lp::DualFormLp;
use crate::scalar::{Scalar, ScalarKey};

/// Bipartite colored graph of an LP. Vertices `0..nrows` are constraints,
/// `nrows..nrows+ncols` are variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientGraph {
    pub nrows: usize,
    pub ncols: usize,
    /// `(neighbor, edge color)` per vertex, sorted.
    pub adj: Vec<Vec<(usize, usize)>>,
    /// Initial vertex colors; row and column colors never coincide.
    pub initial: Vec<usize>,
    /// Coefficient value of each edge color.
    pub edge_values: Vec<ScalarKey>,
    /// `b` value (rows) or `c` value (columns) of each initial color.
    pub vertex_values: Vec<(Side, ScalarKey)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Row,
    Col,
}

/// Numbers keys by first occurrence.
struct Palette<K> {
    ids: HashMap<K, usize>,
    keys: Vec<K>,
}

impl<K: Clone + Eq + std::hash::Hash> Palette<K> {
    fn new() -> Self {
        Palette {
            ids: HashMap::new(),
            keys: Vec::new(),
        }
    }

    fn id(&mut self, k: K) -> usize {
        if let Some(&i) = self.ids.get(&k) {
            return i;
        }
        let i = self.keys.len();
        self.ids.insert(k.clone(), i);
        self.keys.push(k);
        i
    }
}

impl CoefficientGraph {
    pub fn num_vertices(&self) -> usize {
        self.nrows + self.ncols
    }

    pub fn num_edges(&self) -> usize {
        self.adj[..self.nrows].iter().map(Vec::len).sum()
    }

    pub fn side(&self, v: usize) -> Side {
        if v < self.nrows {
            Side::Row
        } else {
            Side::Col
        }
    }
}

/// Builds the coefficient graph. With `digits`, values are rounded to that
/// many decimals before colors are assigned.
pub fn build_coefficient_graph<T: Scalar>(lp: &DualFormLp<T>, digits: Option<u32>) -> CoefficientGraph {
    let key = |v: &T| match digits {
        Some(d) => v.round_to_decimals(d).key(),
        None => v.key(),
    };
    let (m, n) = (lp.nrows(), lp.ncols());
    let mut vcolors = Palette::new();
    let mut initial = Vec::with_capacity(m + n);
    for b in &lp.b {
        initial.push(vcolors.id((Side::Row, key(b))));
    }
    for c in &lp.c {
        initial.push(vcolors.id((Side::Col, key(c))));
    }
    let mut ecolors = Palette::new();
    let mut adj = vec![Vec::new(); m + n];
    for (i, j, a) in lp.a.triplets() {
        let k = key(a);
        let e = ecolors.id(k);
        adj[i].push((m + j, e));
        adj[m + j].push((i, e));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    CoefficientGraph {
        nrows: m,
        ncols: n,
        adj,
        initial,
        edge_values: ecolors.keys,
        vertex_values: vcolors.keys,
    }
}

/// Vertex classes of a coefficient graph, numbered per side by first
/// occurrence in index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub row_class: Vec<usize>,
    pub col_class: Vec<usize>,
    pub row_classes: Vec<Vec<usize>>,
    pub col_classes: Vec<Vec<usize>>,
    /// Refinement rounds that changed the coloring.
    pub rounds: usize,
}

fn canonical(labels: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut p = Palette::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let ids: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(v, l)| {
            let id = p.id(*l);
            if id == classes.len() {
                classes.push(Vec::new());
            }
            classes[id].push(v);
            id
        })
        .collect();
    (ids, classes)
}

impl Partition {
    /// Partition from arbitrary class labels per row and per column.
    pub fn from_labels(rows: &[usize], cols: &[usize]) -> Self {
        let (row_class, row_classes) = canonical(rows);
        let (col_class, col_classes) = canonical(cols);
        Partition {
            row_class,
            col_class,
            row_classes,
            col_classes,
            rounds: 0,
        }
    }

    pub fn discrete(nrows: usize, ncols: usize) -> Self {
        Partition::from_labels(&(0..nrows).collect::<Vec<_>>(), &(0..ncols).collect::<Vec<_>>())
    }

    pub fn num_col_classes(&self) -> usize {
        self.col_classes.len()
    }

    pub fn num_row_classes(&self) -> usize {
        self.row_classes.len()
    }

    fn class_of(&self, g: &CoefficientGraph, v: usize) -> ClassRef {
        if v < g.nrows {
            ClassRef::Row(self.row_class[v])
        } else {
            ClassRef::Col(self.col_class[v - g.nrows])
        }
    }

    fn members(&self, g: &CoefficientGraph, c: ClassRef) -> Vec<usize> {
        match c {
            ClassRef::Row(k) => self.row_classes[k].clone(),
            ClassRef::Col(k) => self.col_classes[k].iter().map(|j| j + g.nrows).collect(),
        }
    }

    /// `true` when members of every class share their initial color.
    pub fn refines(&self, g: &CoefficientGraph) -> bool {
        self.row_classes
            .iter()
            .all(|c| c.iter().all(|&v| g.initial[v] == g.initial[c[0]]))
            && self
                .col_classes
                .iter()
                .all(|c| c.iter().all(|&j| g.initial[g.nrows + j] == g.initial[g.nrows + c[0]]))
    }
}

/// Coarsest equitable partition refining the initial colors.
///
/// Every round recolors each vertex by its own color and the sorted
/// multiset of `(neighbor color, edge color)` pairs. Signatures are compared
/// in full and numbered by first occurrence, so the result does not depend
/// on hashing. Stops when a round leaves the number of colors unchanged.
pub fn color_passing(g: &CoefficientGraph) -> Partition {
    let nv = g.num_vertices();
    let mut colors = canonical(&g.initial).0;
    let mut count = colors.iter().max().map_or(0, |c| c + 1);
    let mut rounds = 0;
    loop {
        let mut palette: Palette<(usize, Vec<(usize, usize)>)> = Palette::new();
        let mut next = Vec::with_capacity(nv);
        for v in 0..nv {
            let mut sig: Vec<(usize, usize)> = g.adj[v].iter().map(|&(u, e)| (colors[u], e)).collect();
            sig.sort_unstable();
            next.push(palette.id((colors[v], sig)));
        }
        let new_count = palette.keys.len();
        if new_count == count {
            break;
        }
        colors = next;
        count = new_count;
        rounds += 1;
    }
    let mut p = Partition::from_labels(&colors[..g.nrows], &colors[g.nrows..]);
    p.rounds = rounds;
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassRef {
    Row(usize),
    Col(usize),
}

impl fmt::Display for ClassRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassRef::Row(k) => write!(f, "row class {k}"),
            ClassRef::Col(k) => write!(f, "column class {k}"),
        }
    }
}

/// Two vertices of one class with different edge counts into `target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotEquitable {
    pub first: usize,
    pub second: usize,
    pub target: ClassRef,
    pub edge_color: usize,
}

/// Definitional check: within every class, all members have the same
/// number of edges of each color into every class.
pub fn verify_equitable(g: &CoefficientGraph, part: &Partition) -> Result<(), NotEquitable> {
    let profile = |v: usize| -> BTreeMap<(ClassRef, usize), usize> {
        let mut counts = BTreeMap::new();
        for &(u, e) in &g.adj[v] {
            *counts.entry((part.class_of(g, u), e)).or_insert(0) += 1;
        }
        counts
    };
    let classes = (0..part.num_row_classes())
        .map(ClassRef::Row)
        .chain((0..part.num_col_classes()).map(ClassRef::Col));
    for class in classes {
        let members = part.members(g, class);
        let base = profile(members[0]);
        for &v in &members[1..] {
            let other = profile(v);
            if other == base {
                continue;
            }
            let key = base
                .keys()
                .chain(other.keys())
                .filter(|k| base.get(k) != other.get(k))
                .min()
                .copied()
                .expect("profiles differ");
            return Err(NotEquitable {
                first: members[0],
                second: v,
                target: key.0,
                edge_color: key.1,
            });
        }
    }
    Ok(())
}
