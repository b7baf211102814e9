use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::{axpy, dot, norm, scale, BandedLdl, SparseSym};
use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

/// Matrices up to this size are diagonalised densely under [`EigenMethod::Auto`].
pub const DENSE_MAX: usize = 400;

const CHECK_EVERY: usize = 8;
const MAX_RUNS: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// Eigenpairs in the Euclidean inner product, ascending.
#[derive(Clone, Debug)]
pub struct RawEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖Ax − λx‖` for unit `x`.
    pub residuals: Vec<f64>,
}

pub(crate) fn residual_tol(lambda: f64) -> f64 {
    1e-8 * (1.0 + lambda.abs())
}

/// The `k` eigenpairs of `a` closest to `target`. Equidistant eigenvalues
/// are resolved in favour of the smaller one.
pub fn sym_eigs_near(a: &SparseSym, target: f64, k: usize, method: EigenMethod) -> Result<RawEigen> {
    let n = a.dim();
    if k == 0 {
        return invalid("need k >= 1");
    }
    if n == 0 {
        return Err(Error::EmptyInput("empty matrix".into()));
    }
    if !target.is_finite() {
        return invalid("target energy must be finite");
    }
    let k = k.min(n);
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => k == n,
        EigenMethod::Auto => n <= DENSE_MAX || 2 * k >= n,
    };
    if dense {
        dense_near(a, target, k)
    } else {
        lanczos_near(a, target, k)
    }
}

/// The `k` lowest eigenpairs of `a`.
pub fn sym_lowest(a: &SparseSym, k: usize, method: EigenMethod) -> Result<RawEigen> {
    if a.dim() == 0 {
        return Err(Error::EmptyInput("empty matrix".into()));
    }
    let k = k.min(a.dim());
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => k == a.dim(),
        EigenMethod::Auto => a.dim() <= DENSE_MAX || 2 * k >= a.dim(),
    };
    if dense {
        let (lo, _) = a.gershgorin_bounds();
        return dense_near(a, lo - 1.0, k);
    }
    let shift = lower_shift(a, k)?;
    lanczos_near(a, shift, k)
}

/// A shift below the whole spectrum with at most `k` eigenvalues between it
/// and a known upper point, found by inertia bisection. Shift-invert then
/// separates the wanted eigenvalues well even when they are tightly packed
/// relative to their distance from the Gershgorin bound.
fn lower_shift(a: &SparseSym, k: usize) -> Result<f64> {
    let n = a.dim();
    let (g_lo, g_hi) = a.gershgorin_bounds();
    let span = (g_hi - g_lo).max(1e-300);
    let mut lo = g_lo - 1e-9 * span;
    let ones = vec![1.0; n];
    let rq = dot(&a.mul(&ones), &ones) / n as f64;
    let min_diag = a.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    let mut hi = rq.min(min_diag).max(lo) + 1e-9 * span;
    while count_below(a, hi)? == 0 {
        hi += (hi - lo).max(1e-9 * span);
    }
    for _ in 0..80 {
        if hi - lo <= 1e-12 * span || count_below(a, hi)? <= k {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if count_below(a, mid)? == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn count_below(a: &SparseSym, x: f64) -> Result<usize> {
    Ok(factor_near(a, x, 1.0)?.negative_count())
}

/// Indices (into ascending `values`) of the `k` entries closest to `target`,
/// preferring the smaller value on ties. Returned ascending.
pub(crate) fn select_nearest(values: &[f64], target: f64, k: usize) -> Vec<usize> {
    let mut right = values.partition_point(|&v| v < target);
    let mut left = right; // candidates are left-1 (below) and right (at or above)
    let mut out = Vec::with_capacity(k);
    while out.len() < k && (left > 0 || right < values.len()) {
        let take_left = match (left > 0, right < values.len()) {
            (true, true) => {
                let dl = target - values[left - 1];
                let dr = values[right] - target;
                dl <= dr + 1e-12 * (1.0 + target.abs())
            }
            (l, _) => l,
        };
        if take_left {
            left -= 1;
            out.push(left);
        } else {
            out.push(right);
            right += 1;
        }
    }
    out.sort_unstable();
    out
}

fn residual(a: &SparseSym, x: &[f64], lambda: f64, work: &mut [f64]) -> f64 {
    a.matvec(x, work);
    axpy(-lambda, x, work);
    norm(work)
}

fn dense_near(a: &SparseSym, target: f64, k: usize) -> Result<RawEigen> {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let picked = select_nearest(&sorted, target, k);
    let mut work = vec![0.0; a.dim()];
    let mut out = RawEigen {
        values: Vec::with_capacity(k),
        vectors: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
    };
    for p in picked {
        let col = order[p];
        let v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let lambda = sorted[p];
        out.residuals.push(residual(a, &v, lambda, &mut work));
        out.values.push(lambda);
        out.vectors.push(v);
    }
    Ok(out)
}

/// Factor `a − σI` for some `σ` close to `around`, stepping away from
/// singular pivots.
fn factor_near(a: &SparseSym, around: f64, direction: f64) -> Result<BandedLdl> {
    let base = 1e-10 * (1.0 + around.abs());
    let mut step = 0.0;
    for attempt in 0..30 {
        match BandedLdl::factor(a, around + direction * step) {
            Ok(f) => return Ok(f),
            Err(_) => step = base * 4f64.powi(attempt),
        }
    }
    Err(Error::NoConvergence {
        iterations: 30,
        residual: f64::NAN,
    })
}

struct Locked {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
}

fn lanczos_near(a: &SparseSym, target: f64, k: usize) -> Result<RawEigen> {
    let n = a.dim();
    let fact = factor_near(a, target, 1.0)?;
    let sigma = fact.shift();
    let mut locked = Locked {
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
    };
    let mut want = k;
    let mut worst = f64::NAN;
    for run in 0..MAX_RUNS {
        let found = lanczos_run(a, &fact, sigma, &locked.vectors, run as u64, want)?;
        if found.is_empty() {
            worst = f64::INFINITY;
            break;
        }
        for (lambda, x, r) in found {
            locked.values.push(lambda);
            locked.vectors.push(x);
            locked.residuals.push(r);
        }
        if locked.values.len() < k {
            want = k - locked.values.len();
            continue;
        }
        // Inertia check: every eigenvalue within the selected radius must be locked.
        let mut order: Vec<usize> = (0..locked.values.len()).collect();
        order.sort_by(|&i, &j| locked.values[i].total_cmp(&locked.values[j]));
        let sorted: Vec<f64> = order.iter().map(|&i| locked.values[i]).collect();
        let picked = select_nearest(&sorted, target, k);
        let radius = picked
            .iter()
            .map(|&p| (sorted[p] - target).abs())
            .fold(0.0, f64::max);
        let pad = 1e-7 * (1.0 + target.abs() + radius);
        let lo = factor_near(a, target - radius - pad, -1.0)?;
        let hi = factor_near(a, target + radius + pad, 1.0)?;
        let inside = hi.negative_count() - lo.negative_count();
        let have = sorted
            .iter()
            .filter(|&&v| v > lo.shift() && v < hi.shift())
            .count();
        if inside <= have || locked.values.len() >= n {
            let mut out = RawEigen {
                values: Vec::with_capacity(k),
                vectors: Vec::with_capacity(k),
                residuals: Vec::with_capacity(k),
            };
            for p in picked {
                let i = order[p];
                out.values.push(locked.values[i]);
                out.vectors.push(locked.vectors[i].clone());
                out.residuals.push(locked.residuals[i]);
            }
            return Ok(out);
        }
        want = inside - have;
        worst = 0.0;
    }
    Err(Error::NoConvergence {
        iterations: MAX_RUNS,
        residual: worst,
    })
}

/// One Lanczos run on `(A − σ)⁻¹` in the orthogonal complement of `locked`.
/// Returns the converged pairs among the `want` Ritz values nearest `σ`.
fn lanczos_run(
    a: &SparseSym,
    fact: &BandedLdl,
    sigma: f64,
    locked: &[Vec<f64>],
    seed: u64,
    want: usize,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let n = a.dim();
    let room = n - locked.len();
    if room == 0 {
        return Ok(Vec::new());
    }
    let max_steps = room.min((6 * want + 80).max(300));
    let mut rng = seeded(0x5eed_1a2c_0000 + seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, locked);
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut work = vec![0.0; n];
    let mut best_res = f64::INFINITY;

    loop {
        let j = basis.len() - 1;
        let mut w = basis[j].clone();
        fact.solve_in_place(&mut w);
        let aj = dot(&w, &basis[j]);
        axpy(-aj, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        alpha.push(aj);
        let b = norm(&w);
        let m = alpha.len();
        let exhausted = b <= 1e-13 * aj.abs().max(1e-300) || m == room;

        if m.is_multiple_of(CHECK_EVERY) || exhausted || m >= max_steps || m == want {
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&p, &q| eig.eigenvalues[q].abs().total_cmp(&eig.eigenvalues[p].abs()));
            let mut pairs = Vec::new();
            for &c in order.iter().take(want.min(m)) {
                let theta = eig.eigenvalues[c];
                if theta == 0.0 {
                    continue;
                }
                let mut x = vec![0.0; n];
                for (i, bi) in basis.iter().enumerate().take(m) {
                    axpy(eig.eigenvectors[(i, c)], bi, &mut x);
                }
                let nx = norm(&x);
                scale(1.0 / nx, &mut x);
                let lambda = sigma + 1.0 / theta;
                let r = residual(a, &x, lambda, &mut work);
                pairs.push((lambda, x, r));
            }
            let ok = pairs
                .iter()
                .filter(|(l, _, r)| *r <= 0.5 * residual_tol(*l))
                .count();
            best_res = pairs
                .iter()
                .map(|p| p.2 / residual_tol(p.0))
                .fold(f64::INFINITY, f64::min)
                .min(best_res);
            if ok == pairs.len() && !pairs.is_empty() {
                return Ok(pairs);
            }
            if exhausted || m >= max_steps {
                let good: Vec<_> = pairs
                    .into_iter()
                    .filter(|(l, _, r)| *r <= residual_tol(*l))
                    .collect();
                if good.is_empty() && !exhausted {
                    return Err(Error::NoConvergence {
                        iterations: m,
                        residual: best_res,
                    });
                }
                return Ok(good);
            }
        }
        scale(1.0 / b, &mut w);
        beta.push(b);
        basis.push(w);
    }
}
