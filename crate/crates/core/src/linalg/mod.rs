//! Sparse symmetric matrices and the solvers built on them.

mod banded;
mod eigen;

pub use banded::{BandedLdl, SingularPivot};
pub use eigen::{sym_eigs_near, sym_lowest, EigenMethod, RawEigen, DENSE_MAX};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Symmetric matrix in compressed sparse row form, both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(i, j, v)` triplets. Off-diagonal triplets are mirrored,
    /// so each unordered pair should be given once; duplicates are summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return invalid(format!("entry ({i}, {j}) outside a {n}x{n} matrix"));
            }
            if !v.is_finite() {
                return invalid(format!("non-finite entry at ({i}, {j})"));
            }
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, v));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(entries.len());
        let mut val: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *val.last_mut().expect("previous entry") += v;
                continue;
            }
            col.push(j);
            val.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseSym {
            n,
            row_ptr,
            col,
            val,
        })
    }

    /// Takes the lower triangle of `a`.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return invalid("matrix is not square");
        }
        let n = a.nrows();
        let trips = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j)));
        Self::from_triplets(
            n,
            trips
                .map(|(i, j)| (i, j, a[(i, j)]))
                .filter(|&(i, j, v)| v != 0.0 || i == j),
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    /// All stored entries, row by row.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Gershgorin enclosure `(lower, upper)` of the spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut d = 0.0;
            let mut off = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    d += v;
                } else {
                    off += v.abs();
                }
            }
            lo = lo.min(d - off);
            hi = hi.max(d + off);
        }
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.entries().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Largest `|a_ij - a_ji|`; zero by construction.
    pub fn max_asymmetry(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// `A + c I`.
    pub fn shifted(&self, c: f64) -> SparseSym {
        let trips = self
            .entries()
            .filter(|&(i, j, _)| j <= i)
            .chain((0..self.n).map(|i| (i, i, c)));
        Self::from_triplets(self.n, trips).expect("shifted copy of a valid matrix")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            a[(i, j)] = v;
        }
        a
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}
