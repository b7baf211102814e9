use super::SparseSym;

/// Pivot too small to continue the factorization without pivoting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularPivot {
    pub index: usize,
    pub pivot: f64,
}

/// `A - σI = L D Lᵀ` for a banded symmetric `A`, computed without pivoting.
///
/// Without pivoting the factorization exists whenever every leading minor of
/// `A - σI` is non-singular; callers nudge `σ` when a pivot collapses.
/// Sylvester's law of inertia turns the pivot signs into an eigenvalue count.
#[derive(Clone, Debug)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    shift: f64,
    /// Row `i` holds `L[i][i-bw .. i]`.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdl {
    pub fn factor(a: &SparseSym, shift: f64) -> Result<Self, SingularPivot> {
        let n = a.dim();
        let bw = a.bandwidth();
        let mut l = vec![0.0; n * bw];
        let mut d = vec![0.0; n];
        let scale = a
            .diagonal()
            .iter()
            .map(|v| (v - shift).abs())
            .fold(0.0, f64::max)
            .max(a.gershgorin_bounds().1.abs())
            .max(1.0);
        let tiny = 1e-14 * scale;

        let mut row = vec![0.0; bw + 1];
        let mut w = vec![0.0; bw];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            row.iter_mut().for_each(|v| *v = 0.0);
            for (j, v) in a.row(i) {
                if j >= lo && j <= i {
                    row[j + bw - i] = v;
                }
            }
            row[bw] -= shift;

            for j in lo..i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = row[j + bw - i];
                for k in jlo..j {
                    s -= w[k + bw - i] * l[j * bw + k + bw - j];
                }
                let lij = s / d[j];
                l[i * bw + j + bw - i] = lij;
                w[j + bw - i] = lij * d[j];
            }
            let mut di = row[bw];
            for k in lo..i {
                di -= l[i * bw + k + bw - i] * w[k + bw - i];
            }
            if !(di.abs() > tiny) {
                return Err(SingularPivot { index: i, pivot: di });
            }
            d[i] = di;
        }
        Ok(BandedLdl { n, bw, shift, l, d })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of eigenvalues of `A` below the shift.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    /// Smallest pivot magnitude, a cheap proxy for conditioning.
    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.l[i * bw + k + bw - i] * x[k];
            }
            x[i] = s;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= self.l[i * bw + k + bw - i] * xi;
            }
        }
    }

    /// Solve with two steps of iterative refinement against `a`, which must
    /// be the matrix that was factored.
    pub fn solve_refined(&self, a: &SparseSym, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        let mut r = vec![0.0; self.n];
        for _ in 0..2 {
            a.matvec(&x, &mut r);
            for i in 0..self.n {
                r[i] = b[i] - (r[i] - self.shift * x[i]);
            }
            self.solve_in_place(&mut r);
            for i in 0..self.n {
                x[i] += r[i];
            }
        }
        x
    }
}
