//! LP normal forms, solvers, feasibility checks and file export.

mod dual;
pub mod export;
pub mod external;
mod simplex;
mod sparse;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

pub use dual::{check_feasible, to_dual_form, DualFormLp, Feasibility, RowSource, SenseMap};
pub use sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub status: Status,
    /// Empty unless optimal.
    pub x: Vec<T>,
    /// `⟨c, x⟩` of the minimization; zero unless optimal.
    pub objective: T,
    pub pivots: usize,
}

impl<T: Scalar> Solution<T> {
    pub(crate) fn status_only(status: Status, pivots: usize) -> Self {
        Solution {
            status,
            x: Vec::new(),
            objective: T::zero(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pricing {
    /// Smallest-index rule; never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost, falling back to Bland's rule after a run
    /// of degenerate pivots.
    Dantzig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Simplex,
    /// The `minilp` crate (float only); used for the larger instances.
    Minilp,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simplex" => Ok(Backend::Simplex),
            "minilp" => Ok(Backend::Minilp),
            _ => Err(format!("unknown backend `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub backend: Backend,
    pub pricing: Pricing,
    pub max_pivots: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::Simplex,
            pricing: Pricing::Bland,
            max_pivots: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("pivot limit of {cap} exceeded")]
    IterationCap { cap: usize },
    #[error("the {0} backend works in floating point and cannot produce exact solutions")]
    InexactBackend(&'static str),
    #[error("solver failure: {0}")]
    Backend(String),
}

/// Solves `min cᵀx, Ax ≤ b` with free `x`.
pub fn solve<T: Scalar>(lp: &DualFormLp<T>, opts: &SolverOptions) -> Result<Solution<T>, SolveError> {
    match opts.backend {
        Backend::Simplex => simplex::solve_simplex(lp, opts.pricing, opts.max_pivots),
        Backend::Minilp => {
            if T::EXACT {
                return Err(SolveError::InexactBackend("minilp"));
            }
            let s = solve_minilp(&lp.convert(|v| v.to_f64()))?;
            let x: Vec<T> = s.x.iter().map(|v| T::from_f64(*v).expect("finite")).collect();
            let objective = if s.is_optimal() { lp.objective(&x) } else { T::zero() };
            Ok(Solution {
                status: s.status,
                x,
                objective,
                pivots: 0,
            })
        }
    }
}

/// Rows of a dual-form LP regrouped for a bounded-variable solver: pairs
/// `a·x ≤ b`, `−a·x ≤ −b` become equalities and single-entry rows become
/// bounds.
struct Regrouped {
    bounds: Vec<(f64, f64)>,
    /// `(row, is_equality)`
    rows: Vec<(usize, bool)>,
}

fn regroup(lp: &DualFormLp<f64>) -> Option<Regrouped> {
    use std::collections::HashMap;
    type Key = (Vec<(usize, u64)>, u64);
    let key = |i: usize, sign: f64| -> Key {
        let bits = |v: f64| (v * sign + 0.0).to_bits();
        (lp.a.row(i).map(|(j, a)| (j, bits(*a))).collect(), bits(lp.b[i]))
    };
    let mut open: HashMap<Key, Vec<usize>> = HashMap::new();
    let mut partner = vec![None; lp.nrows()];
    for i in 0..lp.nrows() {
        if let Some(list) = open.get_mut(&key(i, -1.0)) {
            if let Some(k) = list.pop() {
                partner[k] = Some(i);
                partner[i] = Some(k);
                continue;
            }
        }
        open.entry(key(i, 1.0)).or_default().push(i);
    }
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); lp.ncols()];
    let mut rows = Vec::new();
    for i in 0..lp.nrows() {
        let eq = match partner[i] {
            Some(k) if k < i => continue,
            Some(_) => true,
            None => false,
        };
        if lp.a.row_len(i) == 1 {
            let (j, a) = lp.a.row(i).next().expect("one entry");
            let v = lp.b[i] / a;
            let (lo, hi) = &mut bounds[j];
            if eq || *a > 0.0 {
                *hi = hi.min(v);
            }
            if eq || *a < 0.0 {
                *lo = lo.max(v);
            }
            continue;
        }
        rows.push((i, eq));
    }
    if bounds.iter().any(|(lo, hi)| lo > hi) {
        return None;
    }
    Some(Regrouped { bounds, rows })
}

fn solve_minilp(lp: &DualFormLp<f64>) -> Result<Solution<f64>, SolveError> {
    use minilp::{ComparisonOp, Error, OptimizationDirection, Problem};
    let Some(g) = regroup(lp) else {
        return Ok(Solution::status_only(Status::Infeasible, 0));
    };
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = lp.c.iter().zip(&g.bounds).map(|(c, b)| p.add_var(*c, *b)).collect();
    for &(i, eq) in &g.rows {
        let terms: Vec<_> = lp.a.row(i).map(|(j, a)| (vars[j], *a)).collect();
        let op = if eq { ComparisonOp::Eq } else { ComparisonOp::Le };
        p.add_constraint(terms, op, lp.b[i]);
    }
    match p.solve() {
        // minilp reports some unbounded problems as solved with infinite values
        Ok(sol) if !sol.objective().is_finite() => Ok(Solution::status_only(Status::Unbounded, 0)),
        Ok(sol) => {
            let x: Vec<f64> = vars.iter().map(|v| *sol.var_value(*v)).collect();
            if x.iter().any(|v| !v.is_finite()) {
                return Ok(Solution::status_only(Status::Unbounded, 0));
            }
            Ok(Solution {
                status: Status::Optimal,
                objective: lp.objective(&x),
                x,
                pivots: 0,
            })
        }
        Err(Error::Infeasible) => Ok(Solution::status_only(Status::Infeasible, 0)),
        Err(Error::Unbounded) => Ok(Solution::status_only(Status::Unbounded, 0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    fn l0<T: Scalar>() -> DualFormLp<T> {
        let f = |v: f64| T::from_f64(v).unwrap();
        let a = [[1., 1., 1.], [-1., 0., 0.], [0., -1., 0.], [1., 1., -1.]]
            .iter()
            .map(|row| row.iter().map(|v| f(*v)).collect())
            .collect::<Vec<Vec<T>>>();
        DualFormLp::from_dense(&a, vec![f(1.), f(0.), f(0.), f(-1.)], vec![f(0.), f(0.), f(1.)])
    }

    #[test]
    fn toy_optimum_is_exact() {
        let s = solve(&l0::<Rational>(), &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, r(1));
        assert_eq!(s.x, vec![r(0), r(0), r(1)]);
    }

    #[test]
    fn toy_in_every_mode() {
        for backend in [Backend::Simplex, Backend::Minilp] {
            for pricing in [Pricing::Bland, Pricing::Dantzig] {
                let opts = SolverOptions { backend, pricing, ..Default::default() };
                let s = solve(&l0::<f64>(), &opts).unwrap();
                assert!((s.objective - 1.0).abs() < 1e-9, "{backend:?} {pricing:?}");
            }
        }
        let s = solve(&l0::<f32>(), &SolverOptions::default()).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-5);
        assert!(solve(&l0::<Rational>(), &SolverOptions { backend: Backend::Minilp, ..Default::default() }).is_err());
    }

    #[test]
    fn bounded_single_variable() {
        let lp = DualFormLp::from_dense(&[vec![r(1)], vec![r(-1)]], vec![r(5), r(0)], vec![r(-1)]);
        let s = solve(&lp, &SolverOptions::default()).unwrap();
        assert_eq!((s.x[0].clone(), s.objective), (r(5), r(-5)));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = DualFormLp::from_dense(&[vec![r(1)], vec![r(-1)]], vec![r(-1), r(-2)], vec![r(0)]);
        assert_eq!(solve(&lp, &SolverOptions::default()).unwrap().status, Status::Infeasible);
        let lp = DualFormLp::from_dense(&[vec![r(-1)]], vec![r(0)], vec![r(-1)]);
        assert_eq!(solve(&lp, &SolverOptions::default()).unwrap().status, Status::Unbounded);
        let lpf = lp.to_scalar::<f64>();
        let opts = SolverOptions { backend: Backend::Minilp, ..Default::default() };
        assert_eq!(solve(&lpf, &opts).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn empty_lp() {
        let lp: DualFormLp<Rational> = DualFormLp::from_dense(&[], vec![], vec![]);
        let s = solve(&lp, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!(s.x.is_empty());
    }

    #[test]
    fn minilp_sees_equalities_and_bounds() {
        let lp = DualFormLp::from_dense(
            &[vec![1.0, 1.0], vec![-1.0, -1.0], vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 0.0]],
            vec![2.0, -2.0, 0.0, 0.0, 0.5],
            vec![-2.0, -1.0],
        );
        let g = regroup(&lp).unwrap();
        assert_eq!(g.rows, vec![(0, true)]);
        assert_eq!(g.bounds, vec![(0.0, 0.5), (0.0, f64::INFINITY)]);
        let s = solve(&lp, &SolverOptions { backend: Backend::Minilp, ..Default::default() }).unwrap();
        assert!((s.objective + 2.5).abs() < 1e-9);
        let clash = DualFormLp::from_dense(&[vec![1.0], vec![-1.0]], vec![1.0, -2.0], vec![0.0]);
        let s = solve(&clash, &SolverOptions { backend: Backend::Minilp, ..Default::default() }).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn pivot_cap_is_reported() {
        let opts = SolverOptions { max_pivots: 0, ..Default::default() };
        assert!(matches!(solve(&l0::<Rational>(), &opts), Err(SolveError::IterationCap { cap: 0 })));
    }
}
