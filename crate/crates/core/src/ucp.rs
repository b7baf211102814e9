//! Quantitative unique continuation in one dimension and the spectral
//! lifting it implies.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Cube;
use crate::operator::DiscretizedHamiltonian;
use crate::spectral::{ground_state, DISCRETIZATION_SLACK};

const EPS: f64 = 1e-9;

/// `C_{s,V,E} = 2 (2·18²/s² + 2 s² ‖V − E‖²_∞)^{1/2}`.
pub fn c_sve(s: f64, v_sup_dev: f64) -> Result<f64> {
    if !(s > 0.0) {
        return invalid(format!("s must be positive, got {s}"));
    }
    if !(v_sup_dev >= 0.0) {
        return invalid(format!("sup deviation must be non-negative, got {v_sup_dev}"));
    }
    Ok(2.0 * (2.0 * 18.0 * 18.0 / (s * s) + 2.0 * s * s * v_sup_dev * v_sup_dev).sqrt())
}

/// `sup_{E∈I} C_{s,V,E}` for potentials with values in `v_range`.
pub fn c_svi(s: f64, v_range: (f64, f64), interval: (f64, f64)) -> Result<f64> {
    let dev = [
        (v_range.1 - interval.0).abs(),
        (v_range.0 - interval.0).abs(),
        (v_range.1 - interval.1).abs(),
        (v_range.0 - interval.1).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    c_sve(s, dev)
}

/// `ln((s/4M) e^{−2CM})`.
pub fn ln_c_uc_ve(s: f64, m: f64, c: f64) -> f64 {
    (s / (4.0 * m)).ln() - 2.0 * c * m
}

/// `(s/4M) e^{−2CM}`; underflows to 0 for large `CM`, see [`ln_c_uc_ve`].
pub fn c_uc_ve(s: f64, m: f64, c: f64) -> f64 {
    ln_c_uc_ve(s, m, c).exp()
}

/// Squared `L²` norm of `φ` on the open window `Λ_s(c)`, by the nodal
/// quadrature of the grid.
pub fn window_mass(h: &DiscretizedHamiltonian, phi: &[f64], c: f64, s: f64) -> Result<f64> {
    let cube = Cube::new(vec![c], s)?;
    let w = h.grid().weight();
    Ok(h.grid().nodes_in(&cube).iter().map(|&i| phi[i] * phi[i]).sum::<f64>() * w)
}

fn total_mass(h: &DiscretizedHamiltonian, phi: &[f64]) -> f64 {
    phi.iter().map(|v| v * v).sum::<f64>() * h.grid().weight()
}

fn sup_dev(v: &[f64], e: f64) -> f64 {
    v.iter().map(|x| (x - e).abs()).fold(0.0, f64::max)
}

fn require_1d(h: &DiscretizedHamiltonian) -> Result<()> {
    if h.grid().dim() != 1 {
        return invalid("unique continuation checks are one-dimensional");
    }
    Ok(())
}

fn inside_box(h: &DiscretizedHamiltonian, c: f64, s: f64) -> bool {
    let g = h.grid();
    let (lo, hi) = (g.centre()[0] - 0.5 * g.side(), g.centre()[0] + 0.5 * g.side());
    c - 0.5 * s >= lo - EPS && c + 0.5 * s <= hi + EPS
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslateCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub holds: bool,
    /// `φ` vanishes on `Λ_s(k)`; the inequality says nothing.
    pub vacuous: bool,
}

/// `‖φ‖²_{Λ_s(k+y)} ≤ e^{C_{s,V,E}|y|} ‖φ‖²_{Λ_s(k)}` for an eigenpair `(λ, φ)`.
pub fn translate_bound_check(
    h: &DiscretizedHamiltonian,
    phi: &[f64],
    lambda: f64,
    s: f64,
    k: f64,
    y: f64,
) -> Result<TranslateCheck> {
    require_1d(h)?;
    if !inside_box(h, k, s) || !inside_box(h, k + y, s) {
        return Err(Error::Precondition("windows must lie inside the box".into()));
    }
    let constant = c_sve(s, sup_dev(h.potential(), lambda))?;
    let lhs = window_mass(h, phi, k + y, s)?;
    let base = window_mass(h, phi, k, s)?;
    let vacuous = base <= 1e-300 || base <= 1e-28 * total_mass(h, phi);
    let ln_rhs = constant * y.abs() + base.ln();
    let holds = vacuous || lhs.ln() <= DISCRETIZATION_SLACK.ln() + ln_rhs;
    Ok(TranslateCheck {
        lhs,
        rhs: ln_rhs.exp(),
        constant,
        holds,
        vacuous,
    })
}

/// Centres of the cover of `Λ_L(x)` by cubes of side `M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexSets {
    /// `{k ∈ Mℤ : Λ_M(k) ⊂ Λ_L(x)}`, ascending.
    pub j1: Vec<f64>,
    /// `x ∓ (L/2 − M/2)`.
    pub j2: [f64; 2],
    /// `J1 ∪ J2`, ascending, without duplicates.
    pub j: Vec<f64>,
}

pub fn index_sets(x: f64, big_l: f64, m: f64) -> Result<IndexSets> {
    if !(m > 0.0 && m < big_l) {
        return invalid(format!("need 0 < M < L, got M = {m}, L = {big_l}"));
    }
    let lo = ((x - 0.5 * big_l + 0.5 * m) / m - EPS).ceil() as i64;
    let hi = ((x + 0.5 * big_l - 0.5 * m) / m + EPS).floor() as i64;
    let j1: Vec<f64> = (lo..=hi).map(|j| j as f64 * m).collect();
    let j2 = [x - 0.5 * big_l + 0.5 * m, x + 0.5 * big_l - 0.5 * m];
    let mut j = j1.clone();
    for c in j2 {
        if !j.iter().any(|k| (k - c).abs() <= EPS * m.max(1.0)) {
            j.push(c);
        }
    }
    j.sort_by(f64::total_cmp);
    Ok(IndexSets { j1, j2, j })
}

/// Whether the closed cubes `Λ_M(κ)`, `κ ∈ J`, cover the closed `Λ_L(x)`.
pub fn covers(x: f64, big_l: f64, m: f64, j: &[f64]) -> bool {
    let mut spans: Vec<(f64, f64)> = j.iter().map(|k| (k - 0.5 * m, k + 0.5 * m)).collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = x - 0.5 * big_l;
    for (a, b) in spans {
        if a > reach + EPS {
            return false;
        }
        reach = reach.max(b);
    }
    reach >= x + 0.5 * big_l - EPS
}

/// Window length `s`, cell length `M`, the points `γ_k` and the energy
/// interval `I`. Cells without an explicit point use `γ_k = k`.
#[derive(Clone, Debug, Serialize)]
pub struct UcpSetup {
    pub s: f64,
    pub m: f64,
    /// `j ↦ γ_{jM}`.
    pub centres: BTreeMap<i64, f64>,
    pub interval: (f64, f64),
}

impl UcpSetup {
    pub fn new(s: f64, m: f64, centres: BTreeMap<i64, f64>, interval: (f64, f64)) -> Result<Self> {
        if !(s > 0.0 && s < m) {
            return invalid(format!("need 0 < s < M, got s = {s}, M = {m}"));
        }
        if !(interval.0 < interval.1) {
            return invalid(format!("energy interval {interval:?} is degenerate"));
        }
        for (&j, &g) in &centres {
            let k = j as f64 * m;
            if g - 0.5 * s < k - 0.5 * m - EPS || g + 0.5 * s > k + 0.5 * m + EPS {
                return Err(Error::Precondition(format!(
                    "window of side {s} at {g} is not inside the cell at {k}"
                )));
            }
        }
        Ok(UcpSetup {
            s,
            m,
            centres,
            interval,
        })
    }

    pub fn gamma(&self, j: i64) -> f64 {
        self.centres.get(&j).copied().unwrap_or(j as f64 * self.m)
    }

    fn cell(&self, k: f64) -> i64 {
        (k / self.m).round() as i64
    }
}

/// The map `τ: J → J1 ∪ {k_l, k_r}` assigning to each covering cube the cell
/// whose window is used to bound it.
pub fn tau_map(kappa: f64, x: f64, big_l: f64, setup: &UcpSetup) -> Result<f64> {
    let m = setup.m;
    let sets = index_sets(x, big_l, m)?;
    let tol = EPS * m.max(1.0);
    let (Some(&first), Some(&last)) = (sets.j1.first(), sets.j1.last()) else {
        return Err(Error::Precondition("no cell of side M fits inside the box".into()));
    };
    if sets.j1.iter().any(|k| (k - kappa).abs() <= tol) {
        return Ok(kappa);
    }
    let window_inside = |k: f64| {
        let g = setup.gamma(setup.cell(k));
        g - 0.5 * setup.s >= x - 0.5 * big_l - EPS && g + 0.5 * setup.s <= x + 0.5 * big_l + EPS
    };
    if (kappa - sets.j2[0]).abs() <= tol {
        let k_l = first - m;
        return Ok(if window_inside(k_l) { k_l } else { first });
    }
    if (kappa - sets.j2[1]).abs() <= tol {
        let k_r = last + m;
        return Ok(if window_inside(k_r) { k_r } else { last });
    }
    Err(Error::Precondition(format!("{kappa} is not in the index set")))
}

/// How often `min J1` and `max J1` occur as images of `τ` on `J`.
pub fn tau_extreme_multiplicity(x: f64, big_l: f64, setup: &UcpSetup) -> Result<(usize, usize)> {
    let sets = index_sets(x, big_l, setup.m)?;
    let images = sets
        .j
        .iter()
        .map(|&k| tau_map(k, x, big_l, setup))
        .collect::<Result<Vec<f64>>>()?;
    let count = |t: f64| images.iter().filter(|&&v| (v - t).abs() <= EPS * setup.m).count();
    Ok((count(sets.j1[0]), count(*sets.j1.last().expect("non-empty"))))
}

#[derive(Clone, Debug, Serialize)]
pub struct MassCheck {
    pub eigenvalue: f64,
    pub mass_sum: f64,
    pub total: f64,
    pub constant_c_sve: f64,
    /// `ln C_UC^{(V,E)}(M)`.
    pub ln_c_uc_ve: f64,
    /// `ln(mass_sum / (C_UC · total))`.
    pub ln_ratio: f64,
    pub holds: bool,
    pub windows: usize,
}

/// `Σ_{γ_k ∈ Λ_{L−s}(x)} ‖φ‖²_{Λ_s(γ_k)} ≥ C_UC^{(V,E)}(M) ‖φ‖²_{Λ_L(x)}`.
pub fn ucp_mass_check(h: &DiscretizedHamiltonian, phi: &[f64], lambda: f64, setup: &UcpSetup) -> Result<MassCheck> {
    require_1d(h)?;
    if !(lambda >= setup.interval.0 && lambda <= setup.interval.1) {
        return Err(Error::Precondition(format!(
            "eigenvalue {lambda} outside the interval {:?}",
            setup.interval
        )));
    }
    let g = h.grid();
    let (x, big_l) = (g.centre()[0], g.side());
    let inner = Cube::new(vec![x], big_l - setup.s)?;
    let j_lo = ((x - 0.5 * big_l) / setup.m).floor() as i64 - 1;
    let j_hi = ((x + 0.5 * big_l) / setup.m).ceil() as i64 + 1;
    let mut mass_sum = 0.0;
    let mut windows = 0;
    for j in j_lo..=j_hi {
        let gamma = setup.gamma(j);
        if inner.contains(&[gamma]) {
            mass_sum += window_mass(h, phi, gamma, setup.s)?;
            windows += 1;
        }
    }
    let total = total_mass(h, phi);
    let c = c_sve(setup.s, sup_dev(h.potential(), lambda))?;
    let ln_c = ln_c_uc_ve(setup.s, setup.m, c);
    let ln_ratio = mass_sum.ln() - ln_c - total.ln();
    Ok(MassCheck {
        eigenvalue: lambda,
        mass_sum,
        total,
        constant_c_sve: c,
        ln_c_uc_ve: ln_c,
        ln_ratio,
        holds: ln_ratio + DISCRETIZATION_SLACK.ln() >= 0.0,
        windows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftRow {
    pub t: f64,
    pub lambda: f64,
    pub bound: f64,
    pub margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftingReport {
    pub lambda0: f64,
    pub c_minus: f64,
    pub interval: (f64, f64),
    pub c_svi: f64,
    pub ln_c_uc: f64,
    pub rows: Vec<LiftRow>,
    pub monotone: bool,
    pub lipschitz: bool,
    /// `(λ(τ) − λ(0))/τ` for small `τ`.
    pub initial_slope: f64,
    /// `⟨φ₀, W φ₀⟩`.
    pub perturbative_slope: f64,
}

impl LiftingReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds) && self.monotone && self.lipschitz
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,lambda,bound,margin")?;
        for r in &self.rows {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r.t, r.lambda, r.bound, r.margin)?;
        }
        Ok(())
    }
}

/// Default `t` grid `{0.1, …, 1.0}`.
pub fn default_t_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

const SLOPE_STEP: f64 = 1e-4;

/// Checks `λ(t) ≥ λ(0) + t C₋ C_UC(M)` for `H(t) = H₀ + tW` on `t_grid`,
/// with `C_UC(M) = (s/4M) e^{−2 C_{s,V,I} M}` and `I` the computed
/// eigenvalue range widened by 1.
pub fn lifting_1d(
    h0: &DiscretizedHamiltonian,
    w: &[f64],
    setup: &UcpSetup,
    c_minus: f64,
    t_grid: &[f64],
) -> Result<LiftingReport> {
    require_1d(h0)?;
    let g = h0.grid();
    let (x, big_l) = (g.centre()[0], g.side());
    if !(big_l >= 1.0 && big_l > setup.m) {
        return Err(Error::Precondition(format!("need L >= 1 and L > M, got L = {big_l}")));
    }
    if !(c_minus > 0.0) {
        return invalid("C_minus must be positive");
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return invalid("t grid must be a non-empty subset of (0, 1]");
    }
    check_w_lower_bound(h0, w, setup, c_minus, x, big_l)?;

    let (lambda0, phi0) = ground_state(h0)?;
    let mut lambdas = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let wt: Vec<f64> = w.iter().map(|v| t * v).collect();
        lambdas.push(ground_state(&h0.with_added_potential(&wt)?)?.0);
    }
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let v0 = h0.potential();
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let v_min = v0
        .iter()
        .zip(w)
        .map(|(a, b)| a.min(a + t_max * b))
        .fold(f64::INFINITY, f64::min);
    let v_max = v0
        .iter()
        .zip(w)
        .map(|(a, b)| a.max(a + t_max * b))
        .fold(f64::NEG_INFINITY, f64::max);
    let c = c_svi(setup.s, (v_min, v_max), (lo, hi))?;
    let ln_cuc = ln_c_uc_ve(setup.s, setup.m, c);
    let lift_unit = c_minus * ln_cuc.exp();

    let tol = |l: f64| 1e-9 * (1.0 + l.abs());
    let w_sup = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut monotone = lambdas[0] >= lambda0 - tol(lambda0);
    let mut lipschitz = (lambdas[0] - lambda0).abs() <= w_sup * t_grid[0] + tol(lambda0);
    for (i, (&t, &l)) in t_grid.iter().zip(&lambdas).enumerate() {
        let bound = lambda0 + t * lift_unit;
        if i > 0 {
            let dt = t - t_grid[i - 1];
            let dl = l - lambdas[i - 1];
            if dt >= 0.0 {
                monotone &= dl >= -tol(l);
            }
            lipschitz &= dl.abs() <= w_sup * dt.abs() + tol(l);
        }
        rows.push(LiftRow {
            t,
            lambda: l,
            bound,
            margin: l - bound,
            holds: l >= bound - tol(l),
        });
    }

    let ws: Vec<f64> = w.iter().map(|v| SLOPE_STEP * v).collect();
    let l_eps = ground_state(&h0.with_added_potential(&ws)?)?.0;
    let weight = g.weight();
    let perturbative_slope = phi0.iter().zip(w).map(|(p, v)| p * p * v).sum::<f64>() * weight;

    Ok(LiftingReport {
        lambda0,
        c_minus,
        interval: (lo, hi),
        c_svi: c,
        ln_c_uc: ln_cuc,
        rows,
        monotone,
        lipschitz,
        initial_slope: (l_eps - lambda0) / SLOPE_STEP,
        perturbative_slope,
    })
}

fn check_w_lower_bound(
    h0: &DiscretizedHamiltonian,
    w: &[f64],
    setup: &UcpSetup,
    c_minus: f64,
    x: f64,
    big_l: f64,
) -> Result<()> {
    let g = h0.grid();
    if w.len() != g.len() {
        return Err(Error::IndexMismatch("W has the wrong number of samples".into()));
    }
    let mut required = vec![0.0; w.len()];
    let j_lo = ((x - 0.5 * big_l) / setup.m).floor() as i64 - 1;
    let j_hi = ((x + 0.5 * big_l) / setup.m).ceil() as i64 + 1;
    for j in j_lo..=j_hi {
        let cube = Cube::new(vec![setup.gamma(j)], setup.s)?;
        for node in g.nodes_in(&cube) {
            required[node] = c_minus;
        }
    }
    for (node, (&v, &r)) in w.iter().zip(&required).enumerate() {
        if v < r {
            return Err(Error::LowerBoundViolated {
                node,
                position: g.node_position(node),
                value: v,
                required: r,
            });
        }
    }
    Ok(())
}

/// Admissible `p` for UCP constants of the form `M^{−CM^γ}`:
/// `γ − 1 < p < 1/(2γ)` (with `p > 0`), provided `γ < (1+√3)/2`.
pub fn msa_p_window(gamma: f64) -> Option<(f64, f64)> {
    if !(gamma > 0.0 && gamma < 0.5 * (1.0 + 3f64.sqrt())) {
        return None;
    }
    Some(((gamma - 1.0).max(0.0), 1.0 / (2.0 * gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn constant_values() {
        assert!((c_sve(1.0, 0.0).unwrap() - 2.0 * 648f64.sqrt()).abs() < 1e-12);
        assert!((c_sve(1.0, 18.0).unwrap() - 72.0).abs() < 1e-12);
        let a = c_sve(1.0, 0.0).unwrap();
        assert!((c_sve(2.0, 0.0).unwrap() - a / 2.0).abs() < 1e-12);
        assert!((c_sve(0.7, 0.0).unwrap() - 2.0 * 18.0 * 2f64.sqrt() / 0.7).abs() < 1e-12);
        assert!(c_sve(0.0, 1.0).is_err());
    }

    #[test]
    fn index_set_examples() {
        let m = 2.0;
        let a = index_sets(0.0, 3.0 * m, m).unwrap();
        assert_eq!(a.j1, vec![-m, 0.0, m]);
        assert_eq!(a.j2, [-m, m]);
        assert_eq!(a.j.len(), 3);
        assert!(covers(0.0, 3.0 * m, m, &a.j));

        let b = index_sets(0.0, 3.5 * m, m).unwrap();
        assert_eq!(b.j1, vec![-m, 0.0, m]);
        assert_eq!(b.j2, [-1.25 * m, 1.25 * m]);
        assert_eq!(b.j.len(), 5);
        assert!(covers(0.0, 3.5 * m, m, &b.j));
        assert!(!covers(0.0, 3.5 * m, m, &b.j1));
    }

    fn setup(m: f64, s: f64, shift: f64, span: i64) -> UcpSetup {
        let centres = (-span..=span).map(|j| (j, j as f64 * m + shift)).collect();
        UcpSetup::new(s, m, centres, (-10.0, 10.0)).unwrap()
    }

    #[test]
    fn tau_cases() {
        let m = 1.0;
        // L = 3.5: J1 = {-1, 0, 1}, J2 = {±1.25}, k_l = -2, k_r = 2.
        let centred = setup(m, 0.2, 0.0, 5);
        assert_eq!(tau_map(0.0, 0.0, 3.5, &centred).unwrap(), 0.0);
        // γ_{-2} = -2 has window (-2.1, -1.9), outside (-1.75, 1.75).
        assert_eq!(tau_map(-1.25, 0.0, 3.5, &centred).unwrap(), -1.0);
        assert_eq!(tau_map(1.25, 0.0, 3.5, &centred).unwrap(), 1.0);
        // Shifted points: γ_{-2} = -1.6 with window (-1.7, -1.5) inside.
        let mut c = BTreeMap::new();
        c.insert(-2, -1.6);
        c.insert(2, 1.6);
        let shifted = UcpSetup::new(0.2, m, c, (-1.0, 1.0)).unwrap();
        assert_eq!(tau_map(-1.25, 0.0, 3.5, &shifted).unwrap(), -2.0);
        assert_eq!(tau_map(1.25, 0.0, 3.5, &shifted).unwrap(), 2.0);
        assert!(tau_map(0.5, 0.0, 3.5, &centred).is_err());
    }

    #[test]
    fn tau_multiplicity_can_reach_three_with_a_single_interior_cell() {
        // L = 2.5M: J1 = {0}, both boundary cubes map to 0 when the outer
        // windows stick out of the box.
        let mut c = BTreeMap::new();
        c.insert(-1, -1.35);
        c.insert(1, 1.35);
        let s = UcpSetup::new(0.2, 1.0, c, (0.0, 1.0)).unwrap();
        assert_eq!(index_sets(0.0, 2.5, 1.0).unwrap().j1, vec![0.0]);
        assert_eq!(tau_extreme_multiplicity(0.0, 2.5, &s).unwrap(), (3, 3));
        assert!(tau_extreme_multiplicity(0.0, 3.5, &s).unwrap().0 <= 2);
    }

    #[test]
    fn setup_validation() {
        let mut c = BTreeMap::new();
        c.insert(0, 0.45);
        assert!(UcpSetup::new(0.2, 1.0, c, (0.0, 1.0)).is_err());
        assert!(UcpSetup::new(1.0, 1.0, BTreeMap::new(), (0.0, 1.0)).is_err());
        assert!(UcpSetup::new(0.5, 1.0, BTreeMap::new(), (1.0, 1.0)).is_err());
    }

    fn free_box() -> DiscretizedHamiltonian {
        DiscretizedHamiltonian::free(GridSpec::new(vec![0.0], 1.0, 1.0 / 1000.0).unwrap())
    }

    #[test]
    fn translate_bound_on_cosine() {
        let h = free_box();
        let (l, phi) = ground_state(&h).unwrap();
        let same = translate_bound_check(&h, &phi, l, 0.2, 0.0, 0.0).unwrap();
        assert!(same.holds && (same.lhs - same.rhs).abs() < 1e-12);

        let r = translate_bound_check(&h, &phi, l, 0.2, 0.0, 0.3).unwrap();
        // ∫ 2cos²(πx) over (a, b) = (b − a) + (sin 2πb − sin 2πa)/(2π)
        let mass = |a: f64, b: f64| (b - a) + ((2.0 * PI * b).sin() - (2.0 * PI * a).sin()) / (2.0 * PI);
        assert!((r.lhs - mass(0.2, 0.4)).abs() < 1e-2);
        assert!(r.holds);

        let plus = translate_bound_check(&h, &phi, l, 0.2, 0.0, 0.25).unwrap();
        let minus = translate_bound_check(&h, &phi, l, 0.2, 0.0, -0.25).unwrap();
        assert!((plus.lhs - minus.lhs).abs() < 1e-9);
    }

    #[test]
    fn mass_check_tiling_windows() {
        let h = DiscretizedHamiltonian::free(GridSpec::new(vec![0.0], 8.0, 1.0 / 200.0).unwrap());
        let (l, phi) = ground_state(&h).unwrap();
        let s = setup(1.0, 0.5, 0.0, 10);
        let r = ucp_mass_check(&h, &phi, l, &s).unwrap();
        assert!(r.holds);
        assert!((r.mass_sum / r.total - 0.5).abs() < 0.05, "{}", r.mass_sum / r.total);
    }

    #[test]
    fn p_windows() {
        assert_eq!(msa_p_window(1.0), Some((0.0, 0.5)));
        let (a, b) = msa_p_window(4.0 / 3.0).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15 && (b - 3.0 / 8.0).abs() < 1e-15);
        assert_eq!(msa_p_window(1.5), None);
    }

    #[test]
    fn lifting_on_flat_bump() {
        let grid = GridSpec::new(vec![0.0], 1.0, 1.0 / 400.0).unwrap();
        let h0 = DiscretizedHamiltonian::free(grid.clone());
        let w: Vec<f64> = (0..grid.len())
            .map(|i| if grid.node_position(i)[0].abs() < 0.05 { 0.5 } else { 0.0 })
            .collect();
        let mut c = BTreeMap::new();
        c.insert(0, 0.0);
        let s = UcpSetup::new(0.1, 0.9, c, (0.0, 20.0)).unwrap();
        let rep = lifting_1d(&h0, &w, &s, 0.5, &default_t_grid()).unwrap();
        assert!(rep.all_hold(), "{rep:?}");
        let rel = (rep.initial_slope - rep.perturbative_slope).abs() / rep.perturbative_slope;
        assert!(rel < 1e-3, "{rel}");

        let weak: Vec<f64> = w.iter().map(|v| v * 0.1).collect();
        assert!(matches!(
            lifting_1d(&h0, &weak, &s, 0.5, &default_t_grid()),
            Err(Error::LowerBoundViolated { .. })
        ));
    }
}
