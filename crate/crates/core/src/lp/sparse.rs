//! Compressed sparse row storage.

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from per-row `(column, value)` lists. Entries are sorted by
    /// column, duplicates summed and zeros dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut m = SparseMatrix::zeros(0, ncols);
        m.row_ptr.clear();
        m.row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(j, _)| *j);
            let mut merged: Vec<(usize, T)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                assert!(j < ncols, "column {j} out of range {ncols}");
                match merged.last_mut() {
                    Some((lj, lv)) if *lj == j => *lv = lv.clone() + v,
                    _ => merged.push((j, v)),
                }
            }
            for (j, v) in merged {
                if !v.is_zero() {
                    m.cols.push(j);
                    m.vals.push(v);
                }
            }
            m.row_ptr.push(m.cols.len());
            m.nrows += 1;
        }
        m
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let ncols = rows.first().map_or(0, |r| r.len());
        SparseMatrix::from_rows(
            ncols,
            rows.iter()
                .map(|r| r.iter().cloned().enumerate().collect())
                .collect(),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(&self.vals[span])
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k].clone(),
            Err(_) => T::zero(),
        }
    }

    /// `(row, col, value)` for every stored entry, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, &T)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                self.row(i)
                    .fold(T::zero(), |acc, (j, v)| acc + v.clone() * x[j].clone())
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.ncols];
        for (i, j, v) in self.triplets() {
            rows[j].push((i, v.clone()));
        }
        SparseMatrix::from_rows(self.nrows, rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v.clone();
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> SparseMatrix<U> {
        SparseMatrix::from_rows(
            self.ncols,
            (0..self.nrows)
                .map(|i| self.row(i).map(|(j, v)| (j, f(v))).collect())
                .collect(),
        )
    }
}
