use std::fmt;

use num_traits::Zero;

use crate::ground::{GroundLp, SizeReport};
use crate::rlp::{Rel, Sense};
use crate::scalar::{Rational, Scalar};

use super::sparse::SparseMatrix;

/// Where a dual-form row came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowSource {
    /// Row of the ground LP, if the LP was produced from one.
    pub ground_row: Option<usize>,
    /// `true` when the row is the ground row multiplied by −1.
    pub negated: bool,
    pub label: String,
}

impl fmt::Display for RowSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if self.negated {
            f.write_str(" (negated)")?;
        }
        Ok(())
    }
}

/// Recovers the model's own objective from the minimized one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseMap {
    pub sense: Sense,
    pub offset: Rational,
}

impl Default for SenseMap {
    fn default() -> Self {
        SenseMap {
            sense: Sense::Minimize,
            offset: Rational::zero(),
        }
    }
}

impl SenseMap {
    pub fn report<T: Scalar>(&self, minimized: &T) -> T {
        let v = match self.sense {
            Sense::Minimize => minimized.clone(),
            Sense::Maximize => -minimized.clone(),
        };
        v + T::from_rational(&self.offset)
    }
}

/// `minimize ⟨c, x⟩ subject to A x ≤ b`, with `x` free.
#[derive(Clone, Debug, PartialEq)]
pub struct DualFormLp<T> {
    pub a: SparseMatrix<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub col_names: Vec<String>,
    pub row_provenance: Vec<RowSource>,
    pub sense_map: SenseMap,
}

impl<T: Scalar> DualFormLp<T> {
    /// An LP with generated column names `x1..xn` and row labels `r1..rm`.
    pub fn new(a: SparseMatrix<T>, b: Vec<T>, c: Vec<T>) -> Self {
        assert_eq!(a.nrows(), b.len());
        assert_eq!(a.ncols(), c.len());
        DualFormLp {
            col_names: (1..=c.len()).map(|j| format!("x{j}")).collect(),
            row_provenance: (1..=b.len())
                .map(|i| RowSource {
                    ground_row: None,
                    negated: false,
                    label: format!("r{i}"),
                })
                .collect(),
            a,
            b,
            c,
            sense_map: SenseMap::default(),
        }
    }

    pub fn from_dense(a: &[Vec<T>], b: Vec<T>, c: Vec<T>) -> Self {
        let a = if a.is_empty() {
            SparseMatrix::zeros(0, c.len())
        } else {
            SparseMatrix::from_dense(a)
        };
        DualFormLp::new(a, b, c)
    }

    pub fn nrows(&self) -> usize {
        self.b.len()
    }

    pub fn ncols(&self) -> usize {
        self.c.len()
    }

    pub fn stats(&self) -> SizeReport {
        SizeReport {
            vars: self.ncols(),
            rows: self.nrows(),
            nnz: self.a.nnz(),
        }
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.c
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    /// Objective of `x` in the sense and offset of the originating model.
    pub fn reported_objective(&self, x: &[T]) -> T {
        self.sense_map.report(&self.objective(x))
    }

    /// Same LP in another scalar type.
    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U) -> DualFormLp<U> {
        DualFormLp {
            a: self.a.map(&f),
            b: self.b.iter().map(&f).collect(),
            c: self.c.iter().map(&f).collect(),
            col_names: self.col_names.clone(),
            row_provenance: self.row_provenance.clone(),
            sense_map: self.sense_map.clone(),
        }
    }
}

impl DualFormLp<Rational> {
    pub fn to_scalar<U: Scalar>(&self) -> DualFormLp<U> {
        self.convert(U::from_rational)
    }
}

/// Rewrites a ground LP as a minimization with `≤` rows only: `≥` rows are
/// negated, equalities become a `≤` row followed by its negation, and a
/// maximized objective is negated.
pub fn to_dual_form<T: Scalar>(lp: &GroundLp) -> DualFormLp<T> {
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut prov = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let label = lp
            .provenance
            .get(i)
            .map_or_else(|| format!("row {}", i + 1), |o| o.to_string());
        let plain = || -> Vec<(usize, T)> {
            row.coeffs
                .iter()
                .map(|(j, a)| (*j, T::from_rational(a)))
                .collect()
        };
        let negated = || -> Vec<(usize, T)> {
            row.coeffs
                .iter()
                .map(|(j, a)| (*j, T::from_rational(&-a.clone())))
                .collect()
        };
        let mut push = |coeffs: Vec<(usize, T)>, rhs: T, neg: bool| {
            rows.push(coeffs);
            b.push(rhs);
            prov.push(RowSource {
                ground_row: Some(i),
                negated: neg,
                label: label.clone(),
            });
        };
        if matches!(row.rel, Rel::Le | Rel::Eq) {
            push(plain(), T::from_rational(&row.rhs), false);
        }
        if matches!(row.rel, Rel::Ge | Rel::Eq) {
            push(negated(), T::from_rational(&-row.rhs.clone()), true);
        }
    }
    let c = lp
        .c
        .iter()
        .map(|v| match lp.sense {
            Sense::Minimize => T::from_rational(v),
            Sense::Maximize => T::from_rational(&-v.clone()),
        })
        .collect();
    DualFormLp {
        a: SparseMatrix::from_rows(lp.var_names.len(), rows),
        b,
        c,
        col_names: lp.var_names.iter().map(|v| v.to_string()).collect(),
        row_provenance: prov,
        sense_map: SenseMap {
            sense: lp.sense,
            offset: lp.objective_offset.clone(),
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility<T> {
    pub feasible: bool,
    /// `max(Ax − b)`, clamped at 0.
    pub max_violation: T,
    pub worst_row: Option<usize>,
}

/// Checks `Ax ≤ b + tol`; reports the worst row.
pub fn check_feasible<T: Scalar>(lp: &DualFormLp<T>, x: &[T], tol: &T) -> Feasibility<T> {
    assert_eq!(x.len(), lp.ncols());
    let ax = lp.a.mul_vec(x);
    let mut worst = T::zero();
    let mut worst_row = None;
    for (i, (lhs, rhs)) in ax.into_iter().zip(&lp.b).enumerate() {
        let v = lhs - rhs.clone();
        if v > worst {
            worst = v;
            worst_row = Some(i);
        }
    }
    Feasibility {
        feasible: worst <= *tol,
        max_violation: worst,
        worst_row,
    }
}
