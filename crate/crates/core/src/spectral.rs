//! Eigenpairs, resolvent norms and local resolvent blocks.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Cube;
use crate::linalg::{self, dot, norm, sym_eigs_near, sym_lowest, BandedLdl, EigenMethod, RawEigen, SparseSym};
use crate::operator::DiscretizedHamiltonian;

/// Anything with a symmetric matrix and a quadrature weight.
pub trait SymOperator {
    fn matrix(&self) -> &SparseSym;

    /// Weight of the inner product, `hᵈ` on a grid.
    fn weight(&self) -> f64 {
        1.0
    }
}

impl SymOperator for SparseSym {
    fn matrix(&self) -> &SparseSym {
        self
    }
}

impl SymOperator for DiscretizedHamiltonian {
    fn matrix(&self) -> &SparseSym {
        DiscretizedHamiltonian::matrix(self)
    }

    fn weight(&self) -> f64 {
        self.grid().weight()
    }
}

/// Eigenpairs in ascending order, vectors normalised in the weighted inner
/// product.
#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Set by [`eigs_near`] when the target coincides with an eigenvalue.
    pub exact_hit: bool,
}

/// Residual contract for every returned pair.
pub fn residual_tolerance(lambda: f64) -> f64 {
    1e-8 * (1.0 + lambda.abs())
}

fn exact_hit_tol(e: f64) -> f64 {
    1e-12 * e.abs().max(1.0)
}

fn finish(raw: RawEigen, weight: f64, exact_hit: bool) -> Result<EigenResult> {
    for (l, r) in raw.values.iter().zip(&raw.residuals) {
        if *r > residual_tolerance(*l) {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: *r,
            });
        }
    }
    let s = 1.0 / weight.sqrt();
    let eigenvectors = raw
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * s).collect())
        .collect();
    Ok(EigenResult {
        eigenvalues: raw.values,
        eigenvectors,
        residuals: raw.residuals,
        exact_hit,
    })
}

/// The `k` lowest eigenpairs.
pub fn lowest<H: SymOperator + ?Sized>(h: &H, k: usize, method: EigenMethod) -> Result<EigenResult> {
    if k == 0 {
        return invalid("need k >= 1");
    }
    finish(sym_lowest(h.matrix(), k, method)?, h.weight(), false)
}

/// Smallest eigenpair `(λ₀, φ₀)`.
pub fn ground_state<H: SymOperator + ?Sized>(h: &H) -> Result<(f64, Vec<f64>)> {
    let mut r = lowest(h, 1, EigenMethod::Auto)?;
    Ok((r.eigenvalues[0], r.eigenvectors.swap_remove(0)))
}

/// The `k` eigenpairs closest to `e`; equidistant eigenvalues are resolved
/// toward the smaller one.
pub fn eigs_near<H: SymOperator + ?Sized>(h: &H, e: f64, k: usize) -> Result<EigenResult> {
    eigs_near_with(h, e, k, EigenMethod::Auto)
}

pub fn eigs_near_with<H: SymOperator + ?Sized>(
    h: &H,
    e: f64,
    k: usize,
    method: EigenMethod,
) -> Result<EigenResult> {
    let raw = sym_eigs_near(h.matrix(), e, k, method)?;
    let hit = raw.values.iter().any(|l| (l - e).abs() <= exact_hit_tol(e));
    finish(raw, h.weight(), hit)
}

/// Distance from `e` to the spectrum, with the nearest eigenvalue.
pub fn spectral_distance<H: SymOperator + ?Sized>(h: &H, e: f64) -> Result<(f64, f64)> {
    let raw = sym_eigs_near(h.matrix(), e, 1, EigenMethod::Auto)?;
    let l = raw.values[0];
    Ok(((l - e).abs(), l))
}

/// `‖(H − E)⁻¹‖ = 1/dist(E, σ(H))`.
pub fn resolvent_norm<H: SymOperator + ?Sized>(h: &H, e: f64) -> Result<f64> {
    let (dist, l) = spectral_distance(h, e)?;
    if dist <= exact_hit_tol(e) {
        return Err(Error::SpectrumHit {
            energy: e,
            eigenvalue: l,
        });
    }
    Ok(1.0 / dist)
}

/// A factorisation of `H − E` for repeated solves.
pub struct Resolvent<'a> {
    a: &'a SparseSym,
    fact: BandedLdl,
}

impl<'a> Resolvent<'a> {
    pub fn new<H: SymOperator + ?Sized>(h: &'a H, e: f64) -> Result<Self> {
        let a = h.matrix();
        match BandedLdl::factor(a, e) {
            Ok(fact) => Ok(Resolvent { a, fact }),
            Err(_) => {
                let (dist, l) = spectral_distance(h, e)?;
                if dist <= exact_hit_tol(e) {
                    Err(Error::SpectrumHit {
                        energy: e,
                        eigenvalue: l,
                    })
                } else {
                    Err(Error::NoConvergence {
                        iterations: 0,
                        residual: f64::NAN,
                    })
                }
            }
        }
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.fact.solve_refined(self.a, b)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BlockNorm {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const BLOCK_MAX_ITER: usize = 200;
pub const BLOCK_TOL: f64 = 1e-6;

/// `‖P_y R P_z‖` for node sets `y_nodes`, `z_nodes`, by power iteration on
/// `P_z R P_y R P_z` from the indicator of `z_nodes`.
pub fn block_norm_nodes(res: &Resolvent<'_>, y_nodes: &[usize], z_nodes: &[usize]) -> BlockNorm {
    let n = res.a.dim();
    if y_nodes.is_empty() || z_nodes.is_empty() {
        return BlockNorm {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = vec![0.0; n];
    for &i in z_nodes {
        x[i] = 1.0;
    }
    let mut mu_prev = f64::NAN;
    let mut buf = vec![0.0; n];
    for it in 1..=BLOCK_MAX_ITER {
        let nx = norm(&x);
        if nx == 0.0 {
            return BlockNorm {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        linalg::scale(1.0 / nx, &mut x);
        let rx = res.apply(&x);
        buf.iter_mut().for_each(|v| *v = 0.0);
        for &i in y_nodes {
            buf[i] = rx[i];
        }
        let rrx = res.apply(&buf);
        let mut next = vec![0.0; n];
        for &i in z_nodes {
            next[i] = rrx[i];
        }
        // Rayleigh quotient of the positive semi-definite map.
        let mu = dot(&next, &x);
        if (mu - mu_prev).abs() <= BLOCK_TOL * mu.abs() {
            return BlockNorm {
                value: mu.max(0.0).sqrt(),
                iterations: it,
                converged: true,
            };
        }
        mu_prev = mu;
        x = next;
    }
    BlockNorm {
        value: mu_prev.max(0.0).sqrt(),
        iterations: BLOCK_MAX_ITER,
        converged: false,
    }
}

fn block_cube(h: &DiscretizedHamiltonian, c: &[f64], s: f64) -> Result<Vec<usize>> {
    let cube = Cube::new(c.to_vec(), s)?;
    if !h.grid().cube().contains_cube(&cube) {
        return Err(Error::Precondition(format!(
            "block of side {s} at {c:?} leaves the grid box"
        )));
    }
    Ok(h.grid().nodes_in(&cube))
}

/// `‖χ_y (H − E)⁻¹ χ_z‖` with `χ` the indicators of `Λ_s(y)`, `Λ_s(z)`.
pub fn local_resolvent_block(
    h: &DiscretizedHamiltonian,
    e: f64,
    y: &[f64],
    z: &[f64],
    s: f64,
) -> Result<BlockNorm> {
    let yn = block_cube(h, y, s)?;
    let zn = block_cube(h, z, s)?;
    let res = Resolvent::new(h, e)?;
    Ok(block_norm_nodes(&res, &yn, &zn))
}

/// `(4/(3η)) exp((√η/2)(√d − dist))`.
pub fn combes_thomas_bound(eta: f64, d: usize, dist: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return invalid(format!("eta must be positive, got {eta}"));
    }
    if !(dist >= 0.0) {
        return invalid(format!("distance must be non-negative, got {dist}"));
    }
    let s = eta.sqrt();
    Ok(4.0 / (3.0 * eta) * (0.5 * s * ((d as f64).sqrt() - dist)).exp())
}

/// Slack allowed on continuum inequalities evaluated on grids.
pub const DISCRETIZATION_SLACK: f64 = 1.1;

#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub distance: f64,
    pub measured: f64,
    pub bound: f64,
    /// `slack · bound − measured`.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CombesThomasReport {
    pub energy: f64,
    pub lambda0: f64,
    pub eta: f64,
    pub width: f64,
    pub slack: f64,
    pub pairs: Vec<PairCheck>,
    pub failures: Vec<usize>,
}

impl CombesThomasReport {
    pub fn all_hold(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares measured blocks with the Combes–Thomas bound at `η = λ₀ − E`.
pub fn combes_thomas_check(
    h: &DiscretizedHamiltonian,
    e: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    width: f64,
) -> Result<CombesThomasReport> {
    let (lambda0, _) = ground_state(h)?;
    if e >= lambda0 {
        return Err(Error::Precondition(format!(
            "energy {e} is not below the ground state {lambda0}"
        )));
    }
    let eta = lambda0 - e;
    let d = h.grid().dim();
    let res = Resolvent::new(h, e)?;
    let mut out = Vec::with_capacity(pairs.len());
    let mut failures = Vec::new();
    for (idx, (y, z)) in pairs.iter().enumerate() {
        let yn = block_cube(h, y, width)?;
        let zn = block_cube(h, z, width)?;
        let measured = block_norm_nodes(&res, &yn, &zn).value;
        let distance = linalg_dist(y, z);
        let bound = combes_thomas_bound(eta, d, distance)?;
        let holds = measured <= DISCRETIZATION_SLACK * bound;
        if !holds {
            failures.push(idx);
        }
        out.push(PairCheck {
            y: y.clone(),
            z: z.clone(),
            distance,
            measured,
            bound,
            margin: DISCRETIZATION_SLACK * bound - measured,
            holds,
        });
    }
    Ok(CombesThomasReport {
        energy: e,
        lambda0,
        eta,
        width,
        slack: DISCRETIZATION_SLACK,
        pairs: out,
        failures,
    })
}

fn linalg_dist(a: &[f64], b: &[f64]) -> f64 {
    crate::geometry::euclid(a, b)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Localization {
    pub ipr: f64,
    pub decay_rate: f64,
}

/// `Σφ⁴hᵈ / (Σφ²hᵈ)²`.
pub fn ipr(phi: &[f64], weight: f64) -> f64 {
    let s2: f64 = phi.iter().map(|v| v * v).sum::<f64>() * weight;
    let s4: f64 = phi.iter().map(|v| v.powi(4)).sum::<f64>() * weight;
    s4 / (s2 * s2)
}

/// Decay rate from the least-squares slope of `log max_{shell} |φ|` against
/// the sup-norm shell radius around the maximising node.
pub fn decay_rate(phi: &[f64], grid: &crate::operator::GridSpec) -> f64 {
    let Some((peak, _)) = phi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    else {
        return 0.0;
    };
    let centre = grid.multi_index(peak);
    let mut shell_max: Vec<f64> = Vec::new();
    for (node, v) in phi.iter().enumerate() {
        let idx = grid.multi_index(node);
        let r = idx
            .iter()
            .zip(&centre)
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap_or(0);
        if r >= shell_max.len() {
            shell_max.resize(r + 1, 0.0);
        }
        shell_max[r] = shell_max[r].max(v.abs());
    }
    let pts: Vec<(f64, f64)> = shell_max
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(r, m)| (r as f64 * grid.h(), m.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// IPR and decay rate of the `k` lowest eigenvectors.
pub fn localization_profile(h: &DiscretizedHamiltonian, k: usize) -> Result<(EigenResult, Vec<Localization>)> {
    let eig = lowest(h, k, EigenMethod::Auto)?;
    let w = h.grid().weight();
    let prof = eig
        .eigenvectors
        .iter()
        .map(|phi| Localization {
            ipr: ipr(phi, w),
            decay_rate: decay_rate(phi, h.grid()),
        })
        .collect();
    Ok((eig, prof))
}

/// CSV with columns `index,eigenvalue,residual,ipr,decay_rate`.
pub fn write_eigen_csv<W: Write>(eig: &EigenResult, prof: &[Localization], mut out: W) -> Result<()> {
    writeln!(out, "index,eigenvalue,residual,ipr,decay_rate")?;
    for (i, (l, r)) in eig.eigenvalues.iter().zip(&eig.residuals).enumerate() {
        let (p, d) = prof.get(i).map_or((f64::NAN, f64::NAN), |p| (p.ipr, p.decay_rate));
        writeln!(out, "{i},{l:.16e},{r:.16e},{p:.16e},{d:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::GridSpec;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn free_1d(side: f64, h: f64) -> DiscretizedHamiltonian {
        DiscretizedHamiltonian::free(GridSpec::new(vec![0.0], side, h).unwrap())
    }

    #[test]
    fn free_ground_state_is_pi_squared() {
        let h = free_1d(1.0, 1.0 / 512.0);
        let (l, phi) = ground_state(&h).unwrap();
        assert!((l - PI * PI).abs() / (PI * PI) < 1e-4);
        let w = h.grid().weight();
        let n2: f64 = phi.iter().map(|v| v * v).sum::<f64>() * w;
        assert!((n2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shift_moves_ground_state_exactly() {
        let h = free_1d(2.0, 1.0 / 64.0);
        let (a, _) = ground_state(&h).unwrap();
        let (b, _) = ground_state(&h.shifted(0.75)).unwrap();
        assert!((b - a - 0.75).abs() < 1e-10);
    }

    #[test]
    fn diagonal_examples() {
        let a = SparseSym::from_triplets(3, [(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        let r = eigs_near(&a, 2.1, 1).unwrap();
        assert_eq!(r.eigenvalues, vec![2.0]);
        assert!((r.eigenvectors[0][1].abs() - 1.0).abs() < 1e-14);
        assert!(!r.exact_hit);
        assert!(eigs_near(&a, 2.0, 1).unwrap().exact_hit);

        let sym = SparseSym::from_triplets(2, [(0, 0, -1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(eigs_near(&sym, 0.0, 1).unwrap().eigenvalues, vec![-1.0]);

        let two = SparseSym::from_triplets(2, [(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        assert!((resolvent_norm(&two, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((resolvent_norm(&two, 1.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            resolvent_norm(&two, 2.0),
            Err(Error::SpectrumHit { .. })
        ));
    }

    #[test]
    fn block_norm_with_full_projections_is_resolvent_norm() {
        let h = free_1d(2.0, 1.0 / 32.0).shifted(0.3);
        let e = 1.0;
        let full = local_resolvent_block(&h, e, &[0.0], &[0.0], 2.0).unwrap();
        let rn = resolvent_norm(&h, e).unwrap();
        assert!((full.value - rn).abs() / rn < 1e-5, "{} vs {rn}", full.value);
    }

    #[test]
    fn block_norm_matches_dense_svd() {
        let grid = GridSpec::new(vec![0.0], 4.0, 1.0 / 16.0).unwrap();
        let v: Vec<f64> = (0..grid.len()).map(|i| ((i * 7) % 5) as f64 * 0.2).collect();
        let h = DiscretizedHamiltonian::new(grid, v).unwrap();
        let e = 0.5;
        let (y, z, s) = ([-1.0], [1.0], 1.0);
        let got = local_resolvent_block(&h, e, &y, &z, s).unwrap();

        let n = h.dim();
        let mut a = h.matrix().to_dense();
        for i in 0..n {
            a[(i, i)] -= e;
        }
        let r = a.try_inverse().unwrap();
        let yn = h.grid().nodes_in(&Cube::new(y.to_vec(), s).unwrap());
        let zn = h.grid().nodes_in(&Cube::new(z.to_vec(), s).unwrap());
        let block = DMatrix::from_fn(yn.len(), zn.len(), |i, j| r[(yn[i], zn[j])]);
        let oracle = block.singular_values().max();
        assert!((got.value - oracle).abs() / oracle < 1e-6, "{} vs {oracle}", got.value);

        let swapped = local_resolvent_block(&h, e, &z, &y, s).unwrap();
        assert!((swapped.value - got.value).abs() / oracle < 1e-6);
    }

    #[test]
    fn combes_thomas_formula() {
        let b = combes_thomas_bound(1.0, 1, 10.0).unwrap();
        assert!((b - 4.0 / 3.0 * (-4.5f64).exp()).abs() < 1e-15);
        assert!((b - 0.014_812).abs() < 1e-6);
        assert!((combes_thomas_bound(2.0, 2, 2f64.sqrt()).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(combes_thomas_bound(0.0, 1, 1.0).is_err());
    }

    #[test]
    fn combes_thomas_holds_on_free_box() {
        let h = free_1d(24.0, 1.0 / 16.0);
        let (l0, _) = ground_state(&h).unwrap();
        let pairs = vec![
            (vec![-5.0], vec![0.0]),
            (vec![-5.0], vec![5.0]),
            (vec![2.0], vec![2.0]),
        ];
        let rep = combes_thomas_check(&h, l0 - 1.0, &pairs, 1.0).unwrap();
        assert!(rep.all_hold(), "{rep:?}");
        assert!(combes_thomas_check(&h, l0 + 0.1, &pairs, 1.0).is_err());
    }

    #[test]
    fn ipr_extremes() {
        let grid = GridSpec::new(vec![0.0], 2.0, 0.25).unwrap();
        let w = grid.weight();
        let n = grid.len();
        let uniform = vec![1.0; n];
        assert!((ipr(&uniform, w) - 1.0 / (n as f64 * w)).abs() < 1e-14);
        let mut delta = vec![0.0; n];
        delta[3] = 1.0;
        assert!((ipr(&delta, w) - 1.0 / w).abs() < 1e-12);
    }

    #[test]
    fn decay_rate_of_exponential() {
        let grid = GridSpec::new(vec![0.0], 10.0, 0.05).unwrap();
        let phi: Vec<f64> = (0..grid.len())
            .map(|i| (-2.0 * grid.node_position(i)[0].abs()).exp())
            .collect();
        let rate = decay_rate(&phi, &grid);
        assert!((rate - 2.0).abs() < 1e-6, "{rate}");
    }
}
