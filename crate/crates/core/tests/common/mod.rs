//! Fixtures, independent oracles and random LP generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlplift::lp::{DualFormLp, SparseMatrix};
use rlplift::pipeline::{self, Compiled, Mode, RunOptions, RunResult, SolverChoice};
use rlplift::Rational;

pub fn corpus(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(file)
}

pub fn read(file: &str) -> String {
    std::fs::read_to_string(corpus(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn compile(model: &str, kb: &str) -> Compiled {
    pipeline::compile_files(&corpus(&format!("{model}.rlp")), &corpus(&format!("{kb}.lkb")))
        .unwrap_or_else(|e| panic!("{model}+{kb}: {e}"))
}

pub fn run(model: &str, kb: &str, mode: Mode, solver: SolverChoice) -> RunResult {
    let opts = RunOptions {
        mode,
        solver,
        ..RunOptions::default()
    };
    pipeline::solve_compiled(&compile(model, kb), &opts).unwrap_or_else(|e| panic!("{model}+{kb}: {e}"))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// Every model/KB pair of the corpus.
pub const FIXTURES: &[(&str, &str)] = &[
    ("toy", "toy"),
    ("flow", "flow_fig4"),
    ("frucht", "frucht"),
    ("mdp", "grid5_1goal"),
    ("mdp", "grid5_4goal"),
    ("mdp", "grid10_1goal"),
    ("mdp", "grid10_4goal"),
    ("mdp", "grid20_1goal"),
    ("mdp", "grid20_4goal"),
    ("map_pairwise", "smokers"),
    ("map_triplewise", "smokers"),
    ("map_pairwise", "smokers_grid5"),
    ("map_pairwise", "smokers_grid10"),
    ("svm", "mckay"),
    ("tc_svm", "mckay"),
    ("svm", "cora_sample"),
    ("tc_svm", "cora_sample"),
];

/// `cap(u, v) = c.` facts read straight from the KB text.
pub fn capacities(kb_text: &str) -> Vec<(String, String, i64)> {
    let mut caps = Vec::new();
    for stmt in kb_text.lines().filter(|l| !l.trim_start().starts_with('%')).flat_map(|l| l.split('.')) {
        let s = stmt.trim();
        let Some(rest) = s.strip_prefix("cap(") else { continue };
        let Some((args, value)) = rest.split_once(')') else { continue };
        let Some(value) = value.trim().strip_prefix('=') else { continue };
        let (u, v) = args.split_once(',').expect("two arguments");
        caps.push((u.trim().to_string(), v.trim().to_string(), value.trim().parse().expect("integer capacity")));
    }
    caps
}

/// Edmonds–Karp on integer capacities.
pub fn max_flow(edges: &[(String, String, i64)], source: &str, sink: &str) -> i64 {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (u, v, _) in edges {
        let k = index.len();
        index.entry(u).or_insert(k);
        let k = index.len();
        index.entry(v).or_insert(k);
    }
    let n = index.len();
    let mut cap = vec![vec![0i64; n]; n];
    for (u, v, c) in edges {
        cap[index[u.as_str()]][index[v.as_str()]] += c;
    }
    let (s, t) = (index[source], index[sink]);
    let mut total = 0;
    loop {
        let mut parent = vec![usize::MAX; n];
        parent[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if parent[v] == usize::MAX && cap[u][v] > 0 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            return total;
        }
        let mut push = i64::MAX;
        let mut v = t;
        while v != s {
            push = push.min(cap[parent[v]][v]);
            v = parent[v];
        }
        let mut v = t;
        while v != s {
            cap[parent[v]][v] -= push;
            cap[v][parent[v]] += push;
            v = parent[v];
        }
        total += push;
    }
}

/// Value function of the deterministic gridworld under the Bellman
/// inequality `v(s) ≤ r(s,a) + γ v(s')` for all `a`, i.e. the minimum over
/// actions. Goals are absorbing with reward 0, entering a goal earns 100 and
/// every other move −1; moves into a wall stay put. Iterates until the
/// sup-norm residual drops below `tol`.
pub fn grid_values(n: i64, goals: &[(i64, i64)], gamma: f64, tol: f64) -> BTreeMap<(i64, i64), f64> {
    let states: Vec<(i64, i64)> = (1..=n).flat_map(|x| (1..=n).map(move |y| (x, y))).collect();
    let mut v: BTreeMap<(i64, i64), f64> = states.iter().map(|s| (*s, 0.0)).collect();
    loop {
        let mut next = BTreeMap::new();
        for &(x, y) in &states {
            if goals.contains(&(x, y)) {
                next.insert((x, y), gamma * v[&(x, y)]);
                continue;
            }
            let best = [(0, 1), (0, -1), (1, 0), (-1, 0)]
                .iter()
                .map(|(dx, dy)| {
                    let t = ((x + dx).clamp(1, n), (y + dy).clamp(1, n));
                    let r = if goals.contains(&t) { 100.0 } else { -1.0 };
                    r + gamma * v[&t]
                })
                .fold(f64::INFINITY, f64::min);
            next.insert((x, y), best);
        }
        let residual = states.iter().map(|s| (next[s] - v[s]).abs()).fold(0.0, f64::max);
        v = next;
        if residual < tol {
            return v;
        }
    }
}

/// Random sparse LP with planted symmetry: variables come in blocks of
/// 2–10, and each base row either treats a block through its sum or is
/// repeated once per rotation of a block. Rotating any block therefore maps
/// the LP onto itself. All rows have `b > 0`, so `x = 0` is feasible, and a
/// box keeps the optimum finite.
pub fn planted_lp(seed: u64) -> DualFormLp<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(20..=200);
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut n = 0;
    while n < target {
        let size = rng.gen_range(2..=10).min(target - n).max(2);
        blocks.push((n..n + size).collect());
        n += size;
    }
    let mut rows: Vec<Vec<(usize, Rational)>> = Vec::new();
    let mut b = Vec::new();
    let base_rows = rng.gen_range(2..=8);
    for _ in 0..base_rows {
        let cyclic = rng.gen_range(0..blocks.len());
        let coef: Vec<i64> = (0..blocks.len())
            .map(|_| if rng.gen_bool(0.3) { rng.gen_range(-3..=3) } else { 0 })
            .collect();
        let (a0, a1) = (rng.gen_range(1..=4), rng.gen_range(-2..=2));
        let rhs = int(rng.gen_range(1..=10));
        let size = blocks[cyclic].len();
        for t in 0..size {
            let mut row: BTreeMap<usize, i64> = BTreeMap::new();
            for (k, block) in blocks.iter().enumerate() {
                if k != cyclic && coef[k] != 0 {
                    for &j in block {
                        row.insert(j, coef[k]);
                    }
                }
            }
            *row.entry(blocks[cyclic][t]).or_insert(0) += a0;
            *row.entry(blocks[cyclic][(t + 1) % size]).or_insert(0) += a1;
            rows.push(row.into_iter().filter(|(_, a)| *a != 0).map(|(j, a)| (j, int(a))).collect());
            b.push(rhs.clone());
        }
    }
    let upper = int(rng.gen_range(1..=5));
    for j in 0..n {
        rows.push(vec![(j, int(1))]);
        b.push(upper.clone());
        rows.push(vec![(j, int(-1))]);
        b.push(int(0));
    }
    let mut c = vec![int(0); n];
    for block in &blocks {
        let ck = int(rng.gen_range(-5..=5));
        for &j in block {
            c[j] = ck.clone();
        }
    }
    DualFormLp::new(SparseMatrix::from_rows(n, rows), b, c)
}

/// Random sparse integer LP without any planted structure.
pub fn random_lp(seed: u64, m: usize, n: usize, density: f64) -> DualFormLp<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..m)
        .map(|_| {
            let mut row = Vec::new();
            for j in 0..n {
                if rng.gen_bool(density) {
                    let a = rng.gen_range(-2..=2);
                    if a != 0 {
                        row.push((j, int(a)));
                    }
                }
            }
            row
        })
        .collect();
    let b = (0..m).map(|_| int(rng.gen_range(0..=3))).collect();
    let c = (0..n).map(|_| int(rng.gen_range(-2..=2))).collect();
    DualFormLp::new(SparseMatrix::from_rows(n, rows), b, c)
}
