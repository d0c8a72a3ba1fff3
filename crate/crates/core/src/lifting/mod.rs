//! Lifted linear programming: equitable partitions of the coefficient
//! graph, fractional automorphisms and the reduced LP `(A B, b, Bᵀc)`.

mod graph;

use std::collections::HashMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::ground::SizeReport;
use crate::lp::{check_feasible, solve, DualFormLp, RowSource, SolveError, Solution, SolverOptions, SparseMatrix, Status};
use crate::scalar::{Scalar, ScalarKey};

pub use graph::{
    build_coefficient_graph, color_passing, verify_equitable, ClassRef, CoefficientGraph, NotEquitable,
    Partition, Side,
};

/// Block-constant doubly stochastic matrices `(X_P, X_Q)`: entry `1/|C|` when
/// both indices lie in the same class `C`, else 0.
pub fn fractional_automorphism<T: Scalar>(part: &Partition) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    fn block<T: Scalar>(class: &[usize], classes: &[Vec<usize>]) -> Vec<Vec<T>> {
        let n = class.len();
        let mut x = vec![vec![T::zero(); n]; n];
        for members in classes {
            let w = T::one() / T::from_usize(members.len()).expect("class size");
            for &i in members {
                for &j in members {
                    x[i][j] = w.clone();
                }
            }
        }
        x
    }
    (
        block(&part.col_class, &part.col_classes),
        block(&part.row_class, &part.row_classes),
    )
}

/// Checks `X_Q A = A X_P`, `cᵀ X_P = cᵀ` and `X_Q b = b` via class sums.
pub fn fa_identities_hold<T: Scalar>(lp: &DualFormLp<T>, part: &Partition) -> bool {
    let (m, n) = (lp.nrows(), lp.ncols());
    let size = |k: usize| T::from_usize(k).expect("class size");
    // (A X_P)_ij = mean of A_ik over k in P(j); (X_Q A)_ij = mean of A_lj over l in Q(i)
    let mut row_sums: Vec<HashMap<usize, T>> = vec![HashMap::new(); m];
    let mut col_sums: Vec<HashMap<usize, T>> = vec![HashMap::new(); part.num_row_classes()];
    for (i, j, a) in lp.a.triplets() {
        let e = row_sums[i].entry(part.col_class[j]).or_insert_with(T::zero);
        *e = e.clone() + a.clone();
        let e = col_sums[part.row_class[i]].entry(j).or_insert_with(T::zero);
        *e = e.clone() + a.clone();
    }
    let close = |x: &T, y: &T| {
        if T::EXACT {
            x == y
        } else {
            (x.clone() - y.clone()).abs() <= T::epsilon() * (T::one() + x.abs())
        }
    };
    for i in 0..m {
        let qi = part.row_class[i];
        let qsize = size(part.row_classes[qi].len());
        for j in 0..n {
            let pj = part.col_class[j];
            let ax = row_sums[i].get(&pj).cloned().unwrap_or_else(T::zero) / size(part.col_classes[pj].len());
            let xa = col_sums[qi].get(&j).cloned().unwrap_or_else(T::zero) / qsize.clone();
            if !close(&ax, &xa) {
                return false;
            }
        }
    }
    let mean = |v: &[T], members: &[usize]| {
        members.iter().fold(T::zero(), |acc, &k| acc + v[k].clone()) / size(members.len())
    };
    part.col_classes
        .iter()
        .all(|c| c.iter().all(|&j| close(&mean(&lp.c, c), &lp.c[j])))
        && part
            .row_classes
            .iter()
            .all(|q| q.iter().all(|&i| close(&mean(&lp.b, q), &lp.b[i])))
}

/// How the columns of the characteristic matrix are scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColumnScaling {
    /// Class indicator vectors: `x_i = y_m` for `i ∈ P_m`. Exact in every
    /// scalar type.
    #[default]
    Indicator,
    /// Orthonormal columns `1/√|P_m|`, so that `BᵀB = I`. Needs a float
    /// type unless every class size is a perfect square.
    Orthonormal,
}

/// Class assignment of the columns together with the class sizes; stands
/// for the n×p matrix with entry `1/√|P_m|` where column `i` lies in `P_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharMatrix {
    pub class_of: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl CharMatrix {
    pub fn new(part: &Partition) -> Self {
        CharMatrix {
            class_of: part.col_class.clone(),
            sizes: part.col_classes.iter().map(Vec::len).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.class_of.len()
    }

    pub fn ncols(&self) -> usize {
        self.sizes.len()
    }

    /// Column weight of class `m` under `scaling`.
    pub fn weight<T: Scalar>(&self, m: usize, scaling: ColumnScaling) -> Result<T, LiftError> {
        match scaling {
            ColumnScaling::Indicator => Ok(T::one()),
            ColumnScaling::Orthonormal => {
                let k = self.sizes[m];
                let root = (k as f64).sqrt().round() as usize;
                if root * root == k {
                    return Ok(T::one() / T::from_usize(root).expect("class size"));
                }
                if T::EXACT {
                    return Err(LiftError::IrrationalScaling { size: k });
                }
                Ok(T::from_f64(1.0 / (k as f64).sqrt()).expect("finite weight"))
            }
        }
    }

    /// Dense `B̃` with orthonormal columns.
    pub fn to_dense_f64(&self) -> Vec<Vec<f64>> {
        let mut b = vec![vec![0.0; self.ncols()]; self.nrows()];
        for (i, &m) in self.class_of.iter().enumerate() {
            b[i][m] = 1.0 / (self.sizes[m] as f64).sqrt();
        }
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftOptions {
    pub scaling: ColumnScaling,
    /// Keep one copy of identical projected rows within a row class.
    pub row_dedup: bool,
    /// Round coefficients to this many decimals before coloring.
    pub color_digits: Option<u32>,
    pub solver: SolverOptions,
    /// Feasibility and objective tolerance when verifying in float mode.
    pub verify_tol: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions {
            scaling: ColumnScaling::Indicator,
            row_dedup: true,
            color_digits: None,
            solver: SolverOptions::default(),
            verify_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedLp<T> {
    pub lp: DualFormLp<T>,
    pub chars: CharMatrix,
    pub scaling: ColumnScaling,
    /// Original row behind each lifted row.
    pub row_map: Vec<usize>,
}

/// The reduced LP `(A B, b, Bᵀc)` for a column partition.
pub fn lift<T: Scalar>(lp: &DualFormLp<T>, part: &Partition, opts: &LiftOptions) -> Result<LiftedLp<T>, LiftError> {
    let chars = CharMatrix::new(part);
    let p = chars.ncols();
    let weights = (0..p)
        .map(|m| chars.weight::<T>(m, opts.scaling))
        .collect::<Result<Vec<T>, _>>()?;
    // order-independent class sums so equal multisets give equal results
    let class_sum = |mut vals: Vec<T>| -> T {
        vals.sort_by_key(|v| v.key());
        vals.into_iter().fold(T::zero(), |acc, v| acc + v)
    };
    let project = |i: usize| -> Vec<(usize, T)> {
        let mut parts: Vec<Vec<T>> = Vec::new();
        let mut order: Vec<usize> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (j, a) in lp.a.row(i) {
            let m = part.col_class[j];
            let s = *slot.entry(m).or_insert_with(|| {
                order.push(m);
                parts.push(Vec::new());
                parts.len() - 1
            });
            parts[s].push(a.clone());
        }
        let mut row: Vec<(usize, T)> = order
            .into_iter()
            .zip(parts)
            .map(|(m, vals)| (m, class_sum(vals) * weights[m].clone()))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        row.sort_by_key(|(m, _)| *m);
        row
    };
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut prov: Vec<RowSource> = Vec::new();
    let mut row_map = Vec::new();
    let mut seen: HashMap<(usize, Vec<(usize, ScalarKey)>, ScalarKey), ()> = HashMap::new();
    for i in 0..lp.nrows() {
        let row = project(i);
        if opts.row_dedup {
            let sig = (
                part.row_class[i],
                row.iter().map(|(m, v)| (*m, v.key())).collect(),
                lp.b[i].key(),
            );
            if seen.insert(sig, ()).is_some() {
                continue;
            }
        }
        rows.push(row);
        b.push(lp.b[i].clone());
        prov.push(lp.row_provenance[i].clone());
        row_map.push(i);
    }
    let c: Vec<T> = part
        .col_classes
        .iter()
        .enumerate()
        .map(|(m, members)| class_sum(members.iter().map(|&j| lp.c[j].clone()).collect()) * weights[m].clone())
        .collect();
    let col_names = part
        .col_classes
        .iter()
        .map(|members| match members.len() {
            1 => lp.col_names[members[0]].clone(),
            k => format!("{}~{k}", lp.col_names[members[0]]),
        })
        .collect();
    Ok(LiftedLp {
        lp: DualFormLp {
            a: SparseMatrix::from_rows(p, rows),
            b,
            c,
            col_names,
            row_provenance: prov,
            sense_map: lp.sense_map.clone(),
        },
        chars,
        scaling: opts.scaling,
        row_map,
    })
}

/// `x = B y`: every column of class `m` takes `w_m · y_m`.
pub fn unlift<T: Scalar>(lifted: &LiftedLp<T>, y: &[T]) -> Result<Vec<T>, LiftError> {
    assert_eq!(y.len(), lifted.chars.ncols());
    let weights = (0..y.len())
        .map(|m| lifted.chars.weight::<T>(m, lifted.scaling))
        .collect::<Result<Vec<T>, _>>()?;
    Ok(lifted
        .chars
        .class_of
        .iter()
        .map(|&m| weights[m].clone() * y[m].clone())
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub graph: f64,
    pub colorpass: f64,
    pub lift: f64,
    pub solve: f64,
    pub unlift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftReport {
    pub ground: SizeReport,
    pub lifted: SizeReport,
    pub rounds: usize,
    pub row_classes: usize,
    pub col_classes: usize,
    pub times_ms: StageTimes,
    pub verified: bool,
}

impl LiftReport {
    pub fn var_ratio(&self) -> f64 {
        ratio(self.lifted.vars, self.ground.vars)
    }

    pub fn row_ratio(&self) -> f64 {
        ratio(self.lifted.rows, self.ground.rows)
    }

    pub fn to_json(&self, with_times: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("plain data");
        if !with_times {
            v.as_object_mut().expect("object").remove("times_ms");
        }
        v
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Error)]
pub enum LiftError {
    #[error("orthonormal scaling of a class of size {size} is irrational; use indicator scaling in exact mode")]
    IrrationalScaling { size: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("unlifted solution fails verification: {0}")]
    Verification(String),
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Coefficient graph, partition and reduced LP, without solving.
pub struct Lifting<T> {
    pub graph: CoefficientGraph,
    pub partition: Partition,
    pub lifted: LiftedLp<T>,
    pub times: StageTimes,
}

pub fn prepare<T: Scalar>(lp: &DualFormLp<T>, opts: &LiftOptions) -> Result<Lifting<T>, LiftError> {
    let mut times = StageTimes::default();
    let t = Instant::now();
    let graph = build_coefficient_graph(lp, opts.color_digits);
    times.graph = millis(t);
    let t = Instant::now();
    let partition = if lp.nrows() == 0 || lp.ncols() == 0 {
        Partition::discrete(lp.nrows(), lp.ncols())
    } else {
        color_passing(&graph)
    };
    times.colorpass = millis(t);
    let t = Instant::now();
    let lifted = lift(lp, &partition, opts)?;
    times.lift = millis(t);
    Ok(Lifting {
        graph,
        partition,
        lifted,
        times,
    })
}

/// Lifts, solves the reduced LP, maps the solution back and verifies it
/// against the original LP.
pub fn lifted_solve<T: Scalar>(lp: &DualFormLp<T>, opts: &LiftOptions) -> Result<(Solution<T>, LiftReport), LiftError> {
    lifted_solve_with(lp, opts, |reduced| solve(reduced, &opts.solver))
}

/// [`lifted_solve`] with a caller-supplied solver for the reduced LP.
pub fn lifted_solve_with<T: Scalar>(
    lp: &DualFormLp<T>,
    opts: &LiftOptions,
    solver: impl FnOnce(&DualFormLp<T>) -> Result<Solution<T>, SolveError>,
) -> Result<(Solution<T>, LiftReport), LiftError> {
    let Lifting {
        partition,
        lifted,
        mut times,
        ..
    } = prepare(lp, opts)?;
    let t = Instant::now();
    let reduced = solver(&lifted.lp)?;
    times.solve = millis(t);
    let mut report = LiftReport {
        ground: lp.stats(),
        lifted: lifted.lp.stats(),
        rounds: partition.rounds,
        row_classes: partition.num_row_classes(),
        col_classes: partition.num_col_classes(),
        times_ms: times,
        verified: false,
    };
    if reduced.status != Status::Optimal {
        return Ok((Solution { pivots: reduced.pivots, ..Solution::status_only(reduced.status, 0) }, report));
    }
    let t = Instant::now();
    let x = unlift(&lifted, &reduced.x)?;
    report.times_ms.unlift = millis(t);
    let objective = lp.objective(&x);
    let tol = if T::EXACT {
        T::zero()
    } else {
        T::from_f64(opts.verify_tol).expect("finite tolerance")
    };
    let feas = check_feasible(lp, &x, &tol);
    if !feas.feasible {
        let row = feas.worst_row.map_or_else(String::new, |i| format!(" at {}", lp.row_provenance[i]));
        return Err(LiftError::Verification(format!(
            "constraint violated by {}{row}",
            feas.max_violation
        )));
    }
    let gap = (objective.clone() - reduced.objective.clone()).abs();
    if gap > tol.clone() * (T::one() + objective.abs()) {
        return Err(LiftError::Verification(format!(
            "objective {} differs from the lifted optimum {}",
            objective, reduced.objective
        )));
    }
    report.verified = true;
    Ok((
        Solution {
            status: Status::Optimal,
            x,
            objective,
            pivots: reduced.pivots,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn l0<T: Scalar>() -> DualFormLp<T> {
        let f = |v: f64| T::from_f64(v).unwrap();
        let a = [[1., 1., 1.], [-1., 0., 0.], [0., -1., 0.], [1., 1., -1.]]
            .iter()
            .map(|row| row.iter().map(|v| f(*v)).collect())
            .collect::<Vec<Vec<T>>>();
        DualFormLp::from_dense(&a, vec![f(1.), f(0.), f(0.), f(-1.)], vec![f(0.), f(0.), f(1.)])
    }

    fn r(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn toy_graph_colors() {
        let g = build_coefficient_graph(&l0::<Rational>(), None);
        assert_eq!((g.nrows, g.ncols, g.num_edges()), (4, 3, 8));
        // rows: b = 1, 0, 0, -1; columns: c = 0, 0, 1
        assert_eq!(g.initial, vec![0, 1, 1, 2, 3, 3, 4]);
        assert_eq!(g.edge_values.len(), 2);
    }

    #[test]
    fn toy_partition() {
        let g = build_coefficient_graph(&l0::<Rational>(), None);
        let p = color_passing(&g);
        assert_eq!(p.col_classes, vec![vec![0, 1], vec![2]]);
        assert_eq!(p.row_classes, vec![vec![0], vec![1, 2], vec![3]]);
        assert!(verify_equitable(&g, &p).is_ok());
        assert!(p.refines(&g));
        assert!(fa_identities_hold(&l0::<Rational>(), &p));
    }

    #[test]
    fn merging_x_and_z_is_not_equitable() {
        let g = build_coefficient_graph(&l0::<Rational>(), None);
        let p = Partition::from_labels(&[0, 1, 2, 3], &[0, 1, 0]);
        let err = verify_equitable(&g, &p).unwrap_err();
        assert_eq!((err.first, err.second), (4, 6));
        assert_eq!((err.target, err.edge_color), (ClassRef::Row(1), 1));
        // with r2 and r3 merged as well, the row class is caught first
        let p = Partition::from_labels(&[0, 1, 1, 2], &[0, 1, 0]);
        let err = verify_equitable(&g, &p).unwrap_err();
        assert_eq!((err.first, err.second, err.target), (1, 2, ClassRef::Col(0)));
    }

    #[test]
    fn discrete_partitions() {
        let g = build_coefficient_graph(&l0::<Rational>(), None);
        let p = Partition::discrete(4, 3);
        assert!(verify_equitable(&g, &p).is_ok());
        let (xp, xq) = fractional_automorphism::<Rational>(&p);
        assert_eq!(xp[1], vec![r(0), r(1), r(0)]);
        assert_eq!(xq.len(), 4);
        let lifted = lift(&l0::<Rational>(), &p, &LiftOptions { row_dedup: false, ..Default::default() }).unwrap();
        assert_eq!(lifted.lp.a, l0::<Rational>().a);
    }

    #[test]
    fn fractional_automorphism_of_toy() {
        let p = color_passing(&build_coefficient_graph(&l0::<Rational>(), None));
        let (xp, _) = fractional_automorphism::<Rational>(&p);
        let h = Rational::new(1.into(), 2.into());
        assert_eq!(xp, vec![vec![h.clone(), h.clone(), r(0)], vec![h.clone(), h, r(0)], vec![r(0), r(0), r(1)]]);
    }

    #[test]
    fn orthonormal_toy_lift() {
        let lp = l0::<f64>();
        let p = color_passing(&build_coefficient_graph(&lp, None));
        let opts = LiftOptions { scaling: ColumnScaling::Orthonormal, row_dedup: false, ..Default::default() };
        let lifted = lift(&lp, &p, &opts).unwrap();
        let s = 2f64.sqrt();
        let expect = [[2.0 / s, 1.0], [-1.0 / s, 0.0], [-1.0 / s, 0.0], [2.0 / s, -1.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((lifted.lp.a.get(i, j) - v).abs() < 1e-12);
            }
        }
        assert_eq!(lifted.lp.c, vec![0.0, 1.0]);
        let dedup = lift(&lp, &p, &LiftOptions { scaling: ColumnScaling::Orthonormal, ..Default::default() }).unwrap();
        assert_eq!(dedup.lp.nrows(), 3);
        let x = unlift(&dedup, &[0.0, 1.0]).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 1.0]);
        assert!(lift(&l0::<Rational>(), &p, &opts).is_err());
    }

    #[test]
    fn toy_lifted_solve_is_exact() {
        let (sol, report) = lifted_solve(&l0::<Rational>(), &LiftOptions::default()).unwrap();
        assert_eq!(sol.objective, r(1));
        assert_eq!(sol.x, vec![r(0), r(0), r(1)]);
        assert_eq!(report.lifted.vars, 2);
        assert!(report.verified);
    }

    #[test]
    fn char_matrix_columns_are_orthonormal() {
        let p = Partition::from_labels(&[], &[0, 0, 1]);
        let b = CharMatrix::new(&p).to_dense_f64();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(b, vec![vec![h, 0.0], vec![h, 0.0], vec![0.0, 1.0]]);
        assert_eq!(CharMatrix::new(&Partition::discrete(0, 2)).to_dense_f64(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn unlift_zero_and_identity() {
        let lp = l0::<Rational>();
        let lifted = lift(&lp, &Partition::discrete(4, 3), &LiftOptions::default()).unwrap();
        assert_eq!(unlift(&lifted, &[r(1), r(2), r(3)]).unwrap(), vec![r(1), r(2), r(3)]);
        let p = color_passing(&build_coefficient_graph(&lp, None));
        let lifted = lift(&lp, &p, &LiftOptions::default()).unwrap();
        assert_eq!(unlift(&lifted, &[r(0), r(0)]).unwrap(), vec![r(0); 3]);
    }

    #[test]
    fn all_distinct_colors_need_no_rounds() {
        let lp = DualFormLp::from_dense(&[vec![r(1), r(2)]], vec![r(3)], vec![r(4), r(5)]);
        let p = color_passing(&build_coefficient_graph(&lp, None));
        assert_eq!(p.rounds, 0);
        assert_eq!(p.num_col_classes(), 2);
    }

    #[test]
    fn diagonal_graph() {
        let n = 5;
        let a: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| r((i == j) as i64)).collect()).collect();
        let lp = DualFormLp::from_dense(&a, vec![r(1); n], vec![r(-1); n]);
        let g = build_coefficient_graph(&lp, None);
        assert_eq!((g.num_edges(), g.edge_values.len()), (n, 1));
        let p = color_passing(&g);
        assert_eq!((p.num_col_classes(), p.num_row_classes()), (1, 1));
    }
}
