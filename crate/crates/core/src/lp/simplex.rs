//! Dense two-phase primal simplex on `min cᵀx, Ax ≤ b` with free `x`.
//!
//! Each free variable is split as `x = x⁺ − x⁻`; every row gets a slack, and
//! rows with a negative right-hand side are flipped and get an artificial.

use super::{Pricing, SolveError, Solution, Status};
use crate::scalar::Scalar;

use super::dual::DualFormLp;

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    /// Reduced costs of the current phase.
    d: Vec<T>,
    /// Negated objective value of the current phase.
    z: T,
    ncols: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, s: usize) {
        let p = self.rows[r][s].clone();
        let nz: Vec<usize> = (0..self.ncols)
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        for &j in &nz {
            self.rows[r][j] = self.rows[r][j].clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        // exact zero in the pivot column
        self.rows[r][s] = T::one();
        let (prow, prhs) = (self.rows[r].clone(), self.rhs[r].clone());
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][s].is_zero() {
                continue;
            }
            let f = self.rows[i][s].clone();
            let row = &mut self.rows[i];
            for &j in &nz {
                row[j] = row[j].clone() - f.clone() * prow[j].clone();
            }
            row[s] = T::zero();
            self.rhs[i] = self.rhs[i].clone() - f * prhs.clone();
        }
        if !self.d[s].is_zero() {
            let f = self.d[s].clone();
            for &j in &nz {
                self.d[j] = self.d[j].clone() - f.clone() * prow[j].clone();
            }
            self.d[s] = T::zero();
            self.z = self.z.clone() - f * prhs;
        }
        self.basis[r] = s;
        self.pivots += 1;
    }

    fn entering(&self, allowed: usize, pricing: Pricing) -> Option<usize> {
        let eps = T::epsilon();
        let neg = |j: &usize| self.d[*j] < -eps.clone();
        match pricing {
            Pricing::Bland => (0..allowed).find(neg),
            Pricing::Dantzig => (0..allowed).filter(neg).fold(None, |best: Option<usize>, j| match best {
                Some(b) if self.d[b] <= self.d[j] => Some(b),
                _ => Some(j),
            }),
        }
    }

    fn leaving(&self, s: usize) -> Option<usize> {
        let eps = T::epsilon();
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.rows.len() {
            let a = &self.rows[i][s];
            if *a <= eps {
                continue;
            }
            let rhs = if self.rhs[i] < T::zero() { T::zero() } else { self.rhs[i].clone() };
            let ratio = rhs / a.clone();
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = if T::EXACT {
                        ratio == br
                    } else {
                        (ratio.clone() - br.clone()).abs() <= eps
                    };
                    if (tie && self.basis[i] < self.basis[bi]) || (!tie && ratio < br) {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Runs pivots until optimal; `Ok(false)` when unbounded.
    fn optimize(&mut self, allowed: usize, pricing: Pricing, cap: usize) -> Result<bool, SolveError> {
        let mut degenerate = 0usize;
        loop {
            let rule = if degenerate > 50 { Pricing::Bland } else { pricing };
            let Some(s) = self.entering(allowed, rule) else {
                return Ok(true);
            };
            let Some(r) = self.leaving(s) else {
                return Ok(false);
            };
            if self.pivots >= cap {
                return Err(SolveError::IterationCap { cap });
            }
            if self.rhs[r].is_negligible() {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, s);
        }
    }
}

pub(crate) fn solve_simplex<T: Scalar>(
    lp: &DualFormLp<T>,
    pricing: Pricing,
    cap: usize,
) -> Result<Solution<T>, SolveError> {
    let (m, n) = (lp.nrows(), lp.ncols());
    let n_struct = 2 * n + m;
    let flipped: Vec<bool> = lp.b.iter().map(|b| *b < T::zero()).collect();
    let n_art = flipped.iter().filter(|f| **f).count();
    let ncols = n_struct + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = n_struct;
    for i in 0..m {
        let mut row = vec![T::zero(); ncols];
        let sign = if flipped[i] { -T::one() } else { T::one() };
        for (j, a) in lp.a.row(i) {
            row[j] = sign.clone() * a.clone();
            row[n + j] = -(sign.clone() * a.clone());
        }
        row[2 * n + i] = sign.clone();
        if flipped[i] {
            row[next_art] = T::one();
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(2 * n + i);
        }
        rows.push(row);
        rhs.push(sign * lp.b[i].clone());
    }

    // phase 1: minimize the sum of artificials
    let mut d = vec![T::zero(); ncols];
    let mut z = T::zero();
    for i in (0..m).filter(|&i| flipped[i]) {
        for j in 0..n_struct {
            if !rows[i][j].is_zero() {
                d[j] = d[j].clone() - rows[i][j].clone();
            }
        }
        z = z - rhs[i].clone();
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis,
        d,
        z,
        ncols,
        pivots: 0,
    };
    if n_art > 0 {
        t.optimize(n_struct, pricing, cap)?;
        // z holds minus the phase-1 optimum
        let infeas = -t.z.clone();
        let tol = if T::EXACT {
            T::zero()
        } else {
            T::epsilon() * T::from_f64(1.0 + lp.b.iter().map(|b| b.to_f64().abs()).fold(0.0, f64::max)).unwrap()
        };
        if infeas > tol {
            return Ok(Solution::status_only(Status::Infeasible, t.pivots));
        }
        // drive artificials out of the basis or drop their rows
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= n_struct {
                match (0..n_struct).find(|&j| !t.rows[i][j].is_negligible()) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    // phase 2
    let mut cost = vec![T::zero(); ncols];
    for j in 0..n {
        cost[j] = lp.c[j].clone();
        cost[n + j] = -lp.c[j].clone();
    }
    t.d = cost.clone();
    t.z = T::zero();
    for i in 0..t.rows.len() {
        let cb = cost[t.basis[i]].clone();
        if cb.is_zero() {
            continue;
        }
        for j in 0..ncols {
            if !t.rows[i][j].is_zero() {
                t.d[j] = t.d[j].clone() - cb.clone() * t.rows[i][j].clone();
            }
        }
        t.z = t.z.clone() - cb * t.rhs[i].clone();
    }
    if !t.optimize(n_struct, pricing, cap)? {
        return Ok(Solution::status_only(Status::Unbounded, t.pivots));
    }

    let mut values = vec![T::zero(); n_struct];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n_struct {
            values[bv] = t.rhs[i].clone();
        }
    }
    let x: Vec<T> = (0..n).map(|j| values[j].clone() - values[n + j].clone()).collect();
    let objective = lp.objective(&x);
    Ok(Solution {
        status: Status::Optimal,
        x,
        objective,
        pivots: t.pivots,
    })
}
