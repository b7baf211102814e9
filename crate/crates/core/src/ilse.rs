//! The initial length-scale estimate: scale choices, explicit constants,
//! the event `𝒜`, the thinned potential `W_ω` and the resulting lifting of
//! the ground state.
//!
//! Many of the constants here are far below the smallest positive `f64`;
//! every such quantity has a natural-logarithm twin (`ln_*`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{box_decomposition, euclid, free_sites_split, lex_cmp, Cube, FreeSiteSplit, PointSet};
use crate::msa::GoodBoxParams;
use crate::operator::{
    add_bumps, assemble_hamiltonian, sample_config, BernoulliConfig, DiscretizedHamiltonian, FreeSites, GridSpec,
    Model, SingleSitePotential,
};
use crate::rng::trial_rng;
use crate::spectral::{block_norm_nodes, ground_state, resolvent_norm, Resolvent, DISCRETIZATION_SLACK};
use crate::stats::{min_median_max, wilson_interval, Interval, Z95};
use crate::ucp::c_svi;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IlseParams {
    pub d: usize,
    /// Used for `d = 2` only.
    pub epsilon: f64,
    pub p: f64,
    pub beta: f64,
    /// `R₀ = 3R′`.
    pub r0: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub u_minus: f64,
    /// Dimensional constant of the scale-free unique continuation bound.
    pub c_d: f64,
    pub zeta: f64,
}

impl IlseParams {
    pub fn validate(&self) -> Result<()> {
        match self.d {
            1 => {}
            2 => {
                let e = self.epsilon;
                if !(e > 0.0 && e < 0.75 - 0.5) {
                    return invalid(format!("epsilon must lie in (0, 1/4) for d = 2, got {e}"));
                }
                if !(4.0 / 3.0 * (e + 0.5) < 1.0) {
                    return invalid("need (4/3)(epsilon + 1/d) < 1");
                }
            }
            d => return invalid(format!("dimension must be 1 or 2, got {d}")),
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return invalid(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.p > 0.0 && self.r0 > 0.0 && self.u_minus > 0.0 && self.c_d > 0.0) {
            return invalid("p, R0, u_minus and C_d must be positive");
        }
        if !(self.delta_minus > 0.0 && self.delta_minus < self.delta_plus) {
            return invalid("need 0 < delta_minus < delta_plus");
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return invalid(format!("zeta must lie in (0, 1), got {}", self.zeta));
        }
        Ok(())
    }

    /// `4R₀(log L)^{ε+1/d}`.
    pub fn upper_scale(&self, big_l: f64) -> f64 {
        4.0 * self.r0 * big_l.ln().powf(self.epsilon + 1.0 / self.d as f64)
    }

    /// `4R₀(1+p) log L / |log β|`.
    pub fn upper_scale_1d(&self, big_l: f64) -> f64 {
        4.0 * self.r0 * (1.0 + self.p) * big_l.ln() / self.beta.ln().abs()
    }

    /// `1 − L^{−pd}`.
    pub fn good_threshold(&self, big_l: f64) -> f64 {
        1.0 - big_l.powf(-self.p * self.d as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleChoice {
    #[serde(rename = "M")]
    pub m: f64,
    pub ell: u64,
    pub upper: f64,
}

/// Largest `μ ∈ (lower, upper]` with `L/μ` an odd natural number.
fn odd_quotient_scale(big_l: f64, lower: f64, upper: f64) -> Result<ScaleChoice> {
    if !(big_l > 0.0 && upper > 0.0) {
        return Err(Error::ScaleTooSmall(format!("L = {big_l} too small for the scale choice")));
    }
    let mut n = (big_l / upper).ceil().max(1.0) as u64;
    if big_l / n as f64 > upper * (1.0 + 1e-12) {
        n += 1;
    }
    if n.is_multiple_of(2) {
        n += 1;
    }
    let m = big_l / n as f64;
    if !(m > lower) {
        return Err(Error::ScaleTooSmall(format!(
            "L = {big_l} too small: no M in ({lower}, {upper}] with L/M odd"
        )));
    }
    Ok(ScaleChoice { m, ell: n, upper })
}

/// `M_L = max{μ ∈ (R₀+2δ₊, 4R₀(log L)^{ε+1/d}] : L/μ ∈ 2ℕ+1}`.
pub fn choose_m(big_l: f64, params: &IlseParams) -> Result<ScaleChoice> {
    params.validate()?;
    odd_quotient_scale(
        big_l,
        params.r0 + 2.0 * params.delta_plus,
        params.upper_scale(big_l),
    )
}

/// As [`choose_m`] with upper end `4R₀(1+p) log L/|log β|`.
pub fn choose_m_1d(big_l: f64, params: &IlseParams) -> Result<ScaleChoice> {
    params.validate()?;
    odd_quotient_scale(
        big_l,
        params.r0 + 2.0 * params.delta_plus,
        params.upper_scale_1d(big_l),
    )
}

/// `ln C_UC(M)` with `C_UC(M) = (δ₋/(C_d M))^{C_d + 3C_d M^{4/3}}`.
pub fn ln_c_uc(m: f64, params: &IlseParams) -> Result<f64> {
    let base = params.delta_minus / (params.c_d * m);
    if !(m > 0.0 && base < 1.0) {
        return Err(Error::ScaleTooSmall(format!(
            "M = {m} too small: delta_minus/(C_d M) = {base} >= 1"
        )));
    }
    Ok((params.c_d + 3.0 * params.c_d * m.powf(4.0 / 3.0)) * base.ln())
}

pub fn c_uc(m: f64, params: &IlseParams) -> Result<f64> {
    Ok(ln_c_uc(m, params)?.exp())
}

/// `K_V = M²(4 + M^{−2} dπ²/9)`.
pub fn k_v_bound(m: f64, d: usize) -> Result<f64> {
    if !(m > 0.0) {
        return invalid(format!("M must be positive, got {m}"));
    }
    Ok(m * m * (4.0 + d as f64 * PI * PI / (9.0 * m * m)))
}

/// `ln ℰ_L = ln u₋ + ln C_UC(4R₀(log L)^{ε+1/d})`.
pub fn ln_energy_threshold(big_l: f64, params: &IlseParams) -> Result<f64> {
    params.validate()?;
    Ok(params.u_minus.ln() + ln_c_uc(params.upper_scale(big_l), params)?)
}

pub fn energy_threshold(big_l: f64, params: &IlseParams) -> Result<f64> {
    Ok(ln_energy_threshold(big_l, params)?.exp())
}

/// `ln C̃_UC(M) = ln(δ₋/(4M)) − C M`.
pub fn ln_c_uc_tilde(m: f64, params: &IlseParams, c: f64) -> f64 {
    (params.delta_minus / (4.0 * m)).ln() - c * m
}

/// `ln ℰ̃_L = ln u₋ + ln C̃_UC(M̃_L)` with `C = 2 C_{s,V,I}`.
pub fn ln_energy_threshold_1d(big_l: f64, params: &IlseParams, c: f64) -> Result<f64> {
    let m = choose_m_1d(big_l, params)?.m;
    Ok(params.u_minus.ln() + ln_c_uc_tilde(m, params, c))
}

pub fn energy_threshold_1d(big_l: f64, params: &IlseParams, c: f64) -> Result<f64> {
    Ok(ln_energy_threshold_1d(big_l, params, c)?.exp())
}

/// `C = 2 C_{δ₋,V,I}` for the background `h_d` with bumps switched on at
/// coupling up to 1 and `I = [Ê₀ − 1, Ê₀ + sup u + 1]`.
pub fn one_d_constant(h_d: &DiscretizedHamiltonian, u: &SingleSitePotential, e_hat0: f64) -> Result<f64> {
    let v = h_d.potential();
    let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + u.sup();
    let interval = (e_hat0 - 1.0, e_hat0 + u.sup() + 1.0);
    Ok(2.0 * c_svi(u.delta_minus, (v_min, v_max), interval)?)
}

/// `e^{−C̃}` with `C̃ = 2R₀(1+p) C`, the exponent in `ℰ̃_L ∝ L^{−2C̃/|log β|}`.
pub fn induced_beta_threshold(params: &IlseParams, c: f64) -> f64 {
    (-2.0 * params.r0 * (1.0 + params.p) * c).exp()
}

/// `1 − ℓᵈ β^{⌊(M−2δ₊)/R₀⌋^d}`.
pub fn event_a_probability_bound(ell: u64, m: f64, params: &IlseParams) -> Result<f64> {
    let q = (m - 2.0 * params.delta_plus) / params.r0;
    let k = (q + 1e-9).floor();
    if k < 1.0 {
        return Err(Error::Precondition(format!(
            "(M - 2 delta_plus)/R0 = {q} < 1: the bound is vacuous"
        )));
    }
    let d = params.d as i32;
    Ok(1.0 - (ell as f64).powi(d) * params.beta.powf(k.powi(d)))
}

#[derive(Clone, Debug, Serialize)]
pub struct EventA {
    pub occurred: bool,
    /// Sub-box index `k` to the chosen point `γ_k(ω)` (unscaled coordinates).
    pub chosen: BTreeMap<Vec<i64>, Vec<f64>>,
    pub omega: BernoulliConfig,
}

impl EventA {
    pub fn chosen_points(&self) -> impl Iterator<Item = &[f64]> {
        self.chosen.values().map(|v| v.as_slice())
    }
}

/// Finds, for every sub-box `Λ_M(x+Mk)`, an `ω = 1` point of `D₀` in
/// `Λ_{M−2δ₊}(x+Mk)`: the one closest to the centre, then lexicographically
/// smallest.
pub fn event_a_from_config(
    omega: &BernoulliConfig,
    x: &[f64],
    big_l: f64,
    m: f64,
    delta_plus: f64,
) -> Result<BTreeMap<Vec<i64>, Vec<f64>>> {
    let boxes = box_decomposition(big_l, m, x)?;
    let mut chosen = BTreeMap::new();
    for b in boxes {
        let shrunk = Cube::new(b.centre.clone(), m - 2.0 * delta_plus)?;
        let best = omega
            .sites()
            .zip(omega.values())
            .filter(|(p, &v)| v == 1.0 && shrunk.contains(p))
            .map(|(p, _)| p)
            .min_by(|a, b| {
                euclid(a, shrunk.centre())
                    .total_cmp(&euclid(b, shrunk.centre()))
                    .then_with(|| lex_cmp(a, b))
            });
        if let Some(p) = best {
            chosen.insert(b.index, p.to_vec());
        }
    }
    Ok(chosen)
}

/// Draws `ω` on `D₀ ∩ Λ_L(x)` and evaluates the event `𝒜`.
pub fn simulate_event_a<R: Rng + ?Sized>(
    d0: &PointSet,
    beta: f64,
    x: &[f64],
    big_l: f64,
    m: f64,
    params: &IlseParams,
    rng: &mut R,
) -> Result<EventA> {
    let cube = Cube::new(x.to_vec(), big_l)?;
    let local = d0.intersect(&cube)?;
    let omega = sample_config(&local, beta, rng)?;
    let chosen = event_a_from_config(&omega, x, big_l, m, params.delta_plus)?;
    let ell = (big_l / m).round() as u32;
    let occurred = chosen.len() == (ell as usize).pow(x.len() as u32);
    Ok(EventA {
        occurred,
        chosen,
        omega,
    })
}

/// `W_ω = Σ_k u(· − γ_k(ω))` on the grid.
pub fn thinned_potential<'a, I>(chosen: I, u: &SingleSitePotential, grid: &GridSpec) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut w = vec![0.0; grid.len()];
    add_bumps(grid, u, chosen.into_iter().map(|p| (p, 1.0)), &mut w);
    w
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftCheck {
    pub lambda_background: f64,
    pub lambda_lifted: f64,
    pub lift_measured: f64,
    pub ln_lift_bound: f64,
    pub lift_bound: f64,
    /// `ln(lift_measured / lift_bound)`.
    pub ln_ratio: f64,
    pub holds: bool,
}

/// `λ₀(H_{D,x,L} + W_ω) − λ₀(H_{D,x,L})` against `u₋ C_UC(M)` (`d = 2`) or
/// `u₋ C̃_UC(M)` (`d = 1`, constant chain from the unique continuation module).
pub fn lifting_check<'a, I>(
    h_d: &DiscretizedHamiltonian,
    u: &SingleSitePotential,
    chosen: I,
    m: f64,
    params: &IlseParams,
) -> Result<LiftCheck>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let w = thinned_potential(chosen, u, h_d.grid());
    let (l0, _) = ground_state(h_d)?;
    let (l1, _) = ground_state(&h_d.with_added_potential(&w)?)?;
    let ln_bound = match params.d {
        1 => {
            let v = h_d.potential();
            let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let v_max = v
                .iter()
                .zip(&w)
                .map(|(a, b)| a + b)
                .fold(f64::NEG_INFINITY, f64::max);
            let c = 2.0 * c_svi(u.delta_minus, (v_min, v_max), (l0 - 1.0, l1 + 1.0))?;
            u.u_minus.ln() + ln_c_uc_tilde(m, params, c)
        }
        _ => u.u_minus.ln() + ln_c_uc(m, params)?,
    };
    let lift = l1 - l0;
    Ok(LiftCheck {
        lambda_background: l0,
        lambda_lifted: l1,
        lift_measured: lift,
        ln_lift_bound: ln_bound,
        lift_bound: ln_bound.exp(),
        ln_ratio: lift.ln() - ln_bound,
        holds: lift > 0.0 && lift.ln() >= ln_bound,
    })
}

/// `m_L = √(ℰ/64)`.
pub fn mass_from_energy(e: f64) -> Result<f64> {
    if !(e > 0.0) {
        return invalid(format!("energy threshold must be positive, got {e}"));
    }
    Ok((e / 64.0).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct CtEnergyRow {
    pub energy: f64,
    pub resolvent_norm: f64,
    pub norm_bound: f64,
    pub norm_holds: bool,
    pub block_norms: Vec<f64>,
    pub block_bounds: Vec<f64>,
    pub blocks_hold: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CtWindowReport {
    pub e_hat0: f64,
    pub energy_threshold: f64,
    pub lambda0: f64,
    pub rows: Vec<CtEnergyRow>,
    /// `2/ℰ ≤ e^{L^{1−ζ}}`.
    pub norm_within_good_threshold: bool,
    /// `2/ℰ − ‖R(Ê₀+ℰ/2)‖`.
    pub equality_defect: f64,
    pub slack: f64,
}

impl CtWindowReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.norm_holds && r.blocks_hold)
    }
}

/// Resolvent bounds at `E ∈ {Ê₀, Ê₀+ℰ/4, Ê₀+ℰ/2}` for an operator with
/// `λ₀ ≥ Ê₀ + ℰ`.
pub fn ct_window_check(
    h: &DiscretizedHamiltonian,
    e_hat0: f64,
    energy: f64,
    zeta: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    width: f64,
) -> Result<CtWindowReport> {
    if !(energy > 0.0) {
        return invalid("energy threshold must be positive");
    }
    let (l0, _) = ground_state(h)?;
    let target = e_hat0 + energy;
    if l0 < target - 1e-12 * (1.0 + target.abs()) {
        return Err(Error::Precondition(format!(
            "ground state {l0} is below E0 + threshold = {target}"
        )));
    }
    let big_l = h.grid().side();
    let norm_bound = 2.0 / energy;
    let mut rows = Vec::new();
    let mut defect = f64::NAN;
    for frac in [0.0, 0.25, 0.5] {
        let e = e_hat0 + frac * energy;
        let rn = resolvent_norm(h, e)?;
        if frac == 0.5 {
            defect = norm_bound - rn;
        }
        let res = Resolvent::new(h, e)?;
        let mut block_norms = Vec::new();
        let mut block_bounds = Vec::new();
        for (y, z) in pairs {
            let yn = h.grid().nodes_in(&Cube::new(y.clone(), width)?);
            let zn = h.grid().nodes_in(&Cube::new(z.clone(), width)?);
            block_norms.push(block_norm_nodes(&res, &zn, &yn).value);
            block_bounds.push(8.0 / (3.0 * energy) * (-(energy / 32.0).sqrt() * euclid(y, z)).exp());
        }
        let blocks_hold = block_norms
            .iter()
            .zip(&block_bounds)
            .all(|(b, c)| *b <= DISCRETIZATION_SLACK * c);
        rows.push(CtEnergyRow {
            energy: e,
            resolvent_norm: rn,
            norm_bound,
            norm_holds: rn <= norm_bound * (1.0 + 1e-10),
            block_norms,
            block_bounds,
            blocks_hold,
        });
    }
    Ok(CtWindowReport {
        e_hat0,
        energy_threshold: energy,
        lambda0: l0,
        rows,
        norm_within_good_threshold: norm_bound <= big_l.powf(1.0 - zeta).exp(),
        equality_defect: defect,
        slack: DISCRETIZATION_SLACK,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LiftStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IlseConstants {
    #[serde(rename = "C_d")]
    pub c_d: f64,
    pub beta: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub u_minus: f64,
    pub epsilon: f64,
    pub zeta: f64,
    /// `2 C_{s,V,I}` of the one-dimensional chain; `None` for `d = 2`.
    pub c_1d: Option<f64>,
    pub induced_beta_threshold: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IlseReport {
    #[serde(rename = "L")]
    pub big_l: f64,
    pub x: Vec<f64>,
    #[serde(rename = "M_L")]
    pub m_l: f64,
    pub ell: u64,
    #[serde(rename = "E_L")]
    pub energy_threshold: f64,
    #[serde(rename = "ln_E_L")]
    pub ln_energy_threshold: f64,
    pub m_l_mass: f64,
    pub e_hat0: f64,
    pub p: f64,
    pub threshold: f64,
    pub event_a_bound: Option<f64>,
    pub n_trials: usize,
    pub n_event_a: usize,
    pub n_pass: usize,
    pub p_hat: f64,
    pub ci: Interval,
    pub lift_stats: LiftStats,
    pub constants: IlseConstants,
}

/// The model restricted to free sites: `D₀` from `D′` at radius `R′ = R₀/3`.
pub fn split_for(model: &Model, params: &IlseParams) -> Result<FreeSiteSplit> {
    free_sites_split(&model.pair.extra, params.r0 / 3.0)
}

/// Monte Carlo over `ω` on `D₀` with every free-site coupling at 0, checking
/// `λ₀(H_{ω,0,x,L}) ≥ Ê₀ + ℰ_L` with `Ê₀ = λ₀(H_{D,x,L})`.
pub fn ilse_experiment(
    model: &Model,
    x: &[f64],
    big_l: f64,
    params: &IlseParams,
    n_trials: usize,
    seed: u64,
) -> Result<IlseReport> {
    params.validate()?;
    if x.len() != params.d {
        return invalid("centre dimension does not match d");
    }
    if n_trials == 0 {
        return invalid("need at least one trial");
    }
    let split = split_for(model, params)?;
    let grid = model.grid(x, big_l)?;
    let h_d = model.background(&grid)?;
    let (e_hat0, _) = ground_state(&h_d)?;

    let (choice, ln_e, c_1d) = match params.d {
        1 => {
            let c = one_d_constant(&h_d, &model.u, e_hat0)?;
            (choose_m_1d(big_l, params)?, ln_energy_threshold_1d(big_l, params, c)?, Some(c))
        }
        _ => (choose_m(big_l, params)?, ln_energy_threshold(big_l, params)?, None),
    };
    let energy = ln_e.exp();
    let bound = event_a_probability_bound(choice.ell, choice.m, params).ok();

    let reach = grid.cube().resized(model.u.delta_plus);
    let d0_local = split.d0.intersect(&reach)?;
    let s_local = split.s.intersect(&reach)?;
    let t_zero = BernoulliConfig::constant(&s_local, 0.0)?;

    let trials: Vec<(bool, bool, f64)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let omega = sample_config(&d0_local, params.beta, &mut rng)?;
            let h = assemble_hamiltonian(
                &model.pair,
                &model.u,
                &omega,
                Some(FreeSites {
                    split: &split,
                    t_s: &t_zero,
                }),
                &grid,
            )?;
            let (l0, _) = ground_state(&h)?;
            let lift = l0 - e_hat0;
            let chosen = event_a_from_config(&omega, x, big_l, choice.m, params.delta_plus)?;
            let occurred = chosen.len() == (choice.ell as usize).pow(params.d as u32);
            // Compare in log space: ℰ_L may be far below the f64 range.
            let pass = lift > 0.0 && lift.ln() >= ln_e;
            Ok((pass, occurred, lift))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_pass = trials.iter().filter(|t| t.0).count();
    let n_event_a = trials.iter().filter(|t| t.1).count();
    let lifts: Vec<f64> = trials.iter().map(|t| t.2).collect();
    let (lo, med, hi) = min_median_max(&lifts).expect("at least one trial");
    Ok(IlseReport {
        big_l,
        x: x.to_vec(),
        m_l: choice.m,
        ell: choice.ell,
        energy_threshold: energy,
        ln_energy_threshold: ln_e,
        m_l_mass: (ln_e.exp() / 64.0).sqrt(),
        e_hat0,
        p: params.p,
        threshold: params.good_threshold(big_l),
        event_a_bound: bound,
        n_trials,
        n_event_a,
        n_pass,
        p_hat: n_pass as f64 / n_trials as f64,
        ci: wilson_interval(n_pass as u64, n_trials as u64, Z95),
        lift_stats: LiftStats {
            min: lo,
            median: med,
            max: hi,
        },
        constants: IlseConstants {
            c_d: params.c_d,
            beta: params.beta,
            r0: params.r0,
            delta_minus: params.delta_minus,
            delta_plus: params.delta_plus,
            u_minus: params.u_minus,
            epsilon: params.epsilon,
            zeta: params.zeta,
            c_1d,
            induced_beta_threshold: c_1d.map(|c| induced_beta_threshold(params, c)),
        },
    })
}

/// Good-box parameters at the bottom of the window: `E = Ê₀`, `m = m_L`.
pub fn good_box_params_at_threshold(e_hat0: f64, energy: f64, zeta: f64, pair_budget: usize) -> Result<GoodBoxParams> {
    GoodBoxParams::new(e_hat0, mass_from_energy(energy)?, zeta, pair_budget)
}
