//! One runner per experiment kind. Runners return the report, an optional
//! table and the list of violated inequalities; writing is left to the caller.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};

use delone_core::geometry::{
    count_pattern_translates, free_sites_split, patch_convergence_check, periodize, translate, verify_delone,
    DeloneReport,
};
use delone_core::ilse::{event_a_from_config, ilse_experiment, thinned_potential};
use delone_core::linalg::EigenMethod;
use delone_core::msa::{good_scale_probability, test_pairs, GoodBoxParams, GoodScaleReport};
use delone_core::operator::sample_config;
use delone_core::rng::seeded;
use delone_core::spectral::{
    combes_thomas_check, decay_rate, eigs_near, ground_state, ipr, lowest, residual_tolerance, write_eigen_csv,
    Localization,
};
use delone_core::ucp::{default_t_grid, lifting_1d, tau_extreme_multiplicity, ucp_mass_check, UcpSetup};
use delone_core::{BernoulliConfig, Cube, DeloneParams, DiscretizedHamiltonian, PointSet};

use crate::config::{centre_or_origin, Couplings, Experiment, Params, UcpParams};
use crate::output::{num, Table};

pub struct RunOutput {
    pub report: Value,
    pub table: Option<String>,
    /// Inequalities found violated beyond the allowed slack.
    pub violations: Vec<String>,
    /// Named scalars for sweep tables, in a fixed order per kind.
    pub summary: Vec<(&'static str, f64)>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    kind: &'a str,
    config_hash: &'a str,
    seed: u64,
    n_trials: usize,
    violations: &'a [String],
    report: &'a Value,
}

impl RunOutput {
    pub fn envelope(&self, exp: &Experiment) -> Value {
        serde_json::to_value(Envelope {
            kind: exp.kind.name(),
            config_hash: &exp.config_hash,
            seed: exp.seed,
            n_trials: exp.n_trials,
            violations: &self.violations,
            report: &self.report,
        })
        .expect("envelope serializes")
    }
}

pub fn run(exp: &Experiment) -> Result<RunOutput> {
    match &exp.params {
        Params::VerifyDelone(p) => verify(exp, p.r, p.big_r),
        Params::Spectrum(_) => spectrum(exp),
        Params::GoodScale(_) => good_scale(exp),
        Params::Ilse(..) => ilse(exp),
        Params::Ucp1d(p) => ucp1d(exp, p),
        Params::Lift(p) => lift(exp, p),
        Params::Patterns(_) => patterns(exp),
    }
}

fn check_set(name: &str, ps: &PointSet, claimed: Option<DeloneParams>) -> Result<(Value, bool)> {
    let Some(DeloneParams { r, big_r: Some(big_r) }) = claimed else {
        bail!("{name} carries no claimed (r, R)");
    };
    let rep: DeloneReport = verify_delone(ps, r, big_r)?;
    let ok = rep.uniform_discrete && rep.relatively_dense;
    Ok((json!({ "r": r, "R": big_r, "points": ps.len(), "holds": ok, "report": rep }), ok))
}

fn verify(exp: &Experiment, r: Option<f64>, big_r: Option<f64>) -> Result<RunOutput> {
    let pair = &exp.model.pair;
    let mut base_claim = pair.base.params().unwrap_or(DeloneParams { r: 0.0, big_r: None });
    if let Some(r) = r {
        base_claim.r = r;
    }
    if big_r.is_some() {
        base_claim.big_r = big_r;
    }
    let union = pair.union()?;
    let (b, b_ok) = check_set("D", &pair.base, Some(base_claim))?;
    let (e, e_ok) = check_set("D'", &pair.extra, pair.extra.params())?;
    let (u, u_ok) = check_set("D''", &union, Some(pair.union_params))?;
    let mut violations = Vec::new();
    for (name, ok) in [("D", b_ok), ("D'", e_ok), ("D''", u_ok)] {
        if !ok {
            violations.push(format!("{name} is not Delone with its claimed parameters"));
        }
    }
    let min_union = verify_delone(&union, pair.union_params.r, pair.union_params.big_r.unwrap_or(f64::NAN))?
        .min_sup_distance
        .unwrap_or(f64::NAN);
    Ok(RunOutput {
        report: json!({ "D": b, "D'": e, "D''": u }),
        table: None,
        violations,
        summary: vec![
            ("base_ok", b_ok as u8 as f64),
            ("extra_ok", e_ok as u8 as f64),
            ("union_ok", u_ok as u8 as f64),
            ("union_min_sup_distance", min_union),
        ],
    })
}

fn couplings(exp: &Experiment, grid: &delone_core::GridSpec, which: Couplings) -> Result<BernoulliConfig> {
    let sites = exp.model.local_sites(grid)?;
    Ok(match which {
        Couplings::Background => BernoulliConfig::constant(&sites, 0.0)?,
        Couplings::Full => BernoulliConfig::constant(&sites, 1.0)?,
        Couplings::Sample => sample_config(&sites, exp.model.beta, &mut seeded(exp.seed))?,
    })
}

fn spectrum(exp: &Experiment) -> Result<RunOutput> {
    let Params::Spectrum(p) = &exp.params else { unreachable!() };
    let x = centre_or_origin(&p.x, exp.model.pair.base.dim());
    let grid = exp.grid(&x, p.big_l)?;
    let omega = couplings(exp, &grid, p.couplings)?;
    let h = exp.model.hamiltonian(&grid, &omega)?;
    let eig = match p.energy {
        Some(e) => eigs_near(&h, e, p.k)?,
        None => lowest(&h, p.k, EigenMethod::Auto)?,
    };
    let prof: Vec<Localization> = eig
        .eigenvectors
        .iter()
        .map(|v| Localization {
            ipr: ipr(v, grid.weight()),
            decay_rate: decay_rate(v, &grid),
        })
        .collect();
    let mut csv = Vec::new();
    write_eigen_csv(&eig, &prof, &mut csv)?;

    let mut violations = Vec::new();
    let worst = eig
        .eigenvalues
        .iter()
        .zip(&eig.residuals)
        .map(|(l, r)| r / residual_tolerance(*l))
        .fold(0.0, f64::max);
    if worst > 1.0 {
        violations.push(format!("eigen residual {worst:.3} times the tolerance"));
    }
    let ct = match p.ct_gap {
        Some(gap) => {
            let (l0, _) = ground_state(&h)?;
            let width = p.ct_width.min(p.big_l / 10.0);
            let pairs = test_pairs(&x, p.big_l, p.ct_pairs);
            let rep = combes_thomas_check(&h, l0 - gap, &pairs, width)?;
            if !rep.all_hold() {
                violations.push(format!("Combes-Thomas bound fails on {} pairs", rep.failures.len()));
            }
            Some(rep)
        }
        None => None,
    };
    let lambda0 = eig.eigenvalues.first().copied().unwrap_or(f64::NAN);
    let lambda_last = eig.eigenvalues.last().copied().unwrap_or(f64::NAN);
    Ok(RunOutput {
        report: json!({
            "L": p.big_l,
            "x": x,
            "h": grid.h(),
            "nodes": grid.len(),
            "couplings": p.couplings,
            "eigenvalues": eig.eigenvalues,
            "residuals": eig.residuals,
            "exact_hit": eig.exact_hit,
            "localization": prof,
            "combes_thomas": ct,
        }),
        table: Some(String::from_utf8(csv)?),
        violations,
        summary: vec![
            ("lambda0", lambda0),
            ("lambda_last", lambda_last),
            ("h", grid.h()),
            ("worst_residual_ratio", worst),
        ],
    })
}

fn good_scale(exp: &Experiment) -> Result<RunOutput> {
    let Params::GoodScale(p) = &exp.params else { unreachable!() };
    if exp.grid.h.is_some() {
        bail!("good-scale uses the refine grid policy; drop grid.h");
    }
    let x = centre_or_origin(&p.x, exp.model.pair.base.dim());
    let grid = exp.grid(&x, p.big_l)?;
    let (e_hat0, lift) = {
        let (e0, _) = ground_state(&exp.model.background(&grid)?)?;
        let ones = couplings(exp, &grid, Couplings::Full)?;
        let (e1, _) = ground_state(&exp.model.hamiltonian(&grid, &ones)?)?;
        (e0, e1 - e0)
    };
    let energy = match (p.energy, p.lift_fraction) {
        (Some(e), _) => e,
        (None, Some(f)) => e_hat0 + f * lift,
        (None, None) => unreachable!("checked at parse time"),
    };
    let params = GoodBoxParams::new(energy, p.m, p.zeta, p.pair_budget)?;
    let rep: GoodScaleReport = good_scale_probability(&exp.model, &x, p.big_l, &params, p.p, exp.n_trials, exp.seed)?;
    let table = format!("{}\n{}\n", GoodScaleReport::CSV_HEADER, rep.csv_row());
    Ok(RunOutput {
        report: json!({ "e_hat0": e_hat0, "full_lift": lift, "result": rep }),
        table: Some(table),
        violations: Vec::new(),
        summary: vec![
            ("energy", energy),
            ("p_hat", rep.p_hat),
            ("ci_lo", rep.wilson_95_ci.lo),
            ("ci_hi", rep.wilson_95_ci.hi),
            ("threshold", rep.threshold),
        ],
    })
}

fn ilse(exp: &Experiment) -> Result<RunOutput> {
    let Params::Ilse(p, ip) = &exp.params else { unreachable!() };
    if exp.grid.h.is_some() {
        bail!("ilse uses the refine grid policy; drop grid.h");
    }
    let x = centre_or_origin(&p.x, ip.d);
    let rep = ilse_experiment(&exp.model, &x, p.big_l, ip, exp.n_trials, exp.seed)?;
    let mut violations = Vec::new();
    // Adding non-negative potential cannot lower the ground state.
    if rep.lift_stats.min < -1e-9 * (1.0 + rep.e_hat0.abs()) {
        violations.push(format!("negative lift {}", rep.lift_stats.min));
    }
    let summary = vec![
        ("M_L", rep.m_l),
        ("ln_E_L", rep.ln_energy_threshold),
        ("p_hat", rep.p_hat),
        ("ci_lo", rep.ci.lo),
        ("ci_hi", rep.ci.hi),
        ("threshold", rep.threshold),
        ("event_a_frequency", rep.n_event_a as f64 / rep.n_trials as f64),
        ("lift_min", rep.lift_stats.min),
        ("lift_median", rep.lift_stats.median),
    ];
    let mut t = Table::new(&summary.iter().map(|s| s.0).collect::<Vec<_>>());
    t.push(summary.iter().map(|s| num(s.1)).collect());
    Ok(RunOutput {
        report: serde_json::to_value(&rep)?,
        table: Some(t.render()),
        violations,
        summary,
    })
}

struct UcpFixture {
    grid: delone_core::GridSpec,
    h_d: DiscretizedHamiltonian,
    w: Vec<f64>,
    centres: BTreeMap<i64, f64>,
    chosen: usize,
}

/// Background `H_D` on `Λ_L(x)` plus bumps at one point per cell: the event
/// choice from a sampled skeleton where there is one, the cell centre
/// otherwise.
fn ucp_fixture(exp: &Experiment, p: &UcpParams) -> Result<UcpFixture> {
    let model = &exp.model;
    let grid = exp.grid(&[p.x], p.big_l)?;
    let h_d = model.background(&grid)?;
    let split = free_sites_split(&model.pair.extra, p.r0 / 3.0)?;
    let local = split.d0.intersect(&Cube::new(vec![p.x], p.big_l)?)?;
    let omega = sample_config(&local, model.beta, &mut seeded(exp.seed))?;
    let chosen = event_a_from_config(&omega, &[p.x], p.big_l, p.m, model.u.delta_plus)?;
    let shift = (p.x / p.m).round() as i64;
    let lo = ((p.x - 0.5 * p.big_l) / p.m).floor() as i64 - 1;
    let hi = ((p.x + 0.5 * p.big_l) / p.m).ceil() as i64 + 1;
    let centres: BTreeMap<i64, f64> = (lo..=hi)
        .map(|j| {
            let g = chosen.get(&vec![j - shift]).map_or(j as f64 * p.m, |g| g[0]);
            (j, g)
        })
        .collect();
    let pts: Vec<[f64; 1]> = centres.values().map(|&g| [g]).collect();
    let w = thinned_potential(pts.iter().map(|p| p.as_slice()), &model.u, &grid);
    Ok(UcpFixture {
        grid,
        h_d,
        w,
        centres,
        chosen: chosen.len(),
    })
}

fn ucp1d(exp: &Experiment, p: &UcpParams) -> Result<RunOutput> {
    let f = ucp_fixture(exp, p)?;
    let h = f.h_d.with_added_potential(&f.w)?;
    let eig = lowest(&h, p.n_eigs, EigenMethod::Auto)?;
    let interval = (
        eig.eigenvalues[0] - 1.0,
        eig.eigenvalues.last().copied().unwrap_or(f64::NAN) + 1.0,
    );
    let s = p.s.unwrap_or(exp.model.u.delta_minus);
    let setup = UcpSetup::new(s, p.m, f.centres.clone(), interval)?;
    let mut t = Table::new(&["index", "eigenvalue", "mass_sum", "ln_constant", "ln_ratio"]);
    let mut checks = Vec::new();
    let mut violations = Vec::new();
    for (i, (l, phi)) in eig.eigenvalues.iter().zip(&eig.eigenvectors).enumerate() {
        let c = ucp_mass_check(&h, phi, *l, &setup)?;
        if !c.holds {
            violations.push(format!("mass bound fails for eigenpair {i}"));
        }
        t.push(vec![i.to_string(), num(*l), num(c.mass_sum), num(c.ln_c_uc_ve), num(c.ln_ratio)]);
        checks.push(c);
    }
    let (m_lo, m_hi) = tau_extreme_multiplicity(p.x, p.big_l, &setup)?;
    if m_lo.max(m_hi) > 2 {
        violations.push(format!("tau multiplicity {} exceeds 2", m_lo.max(m_hi)));
    }
    let min_ratio = checks.iter().map(|c| c.ln_ratio).fold(f64::INFINITY, f64::min);
    Ok(RunOutput {
        report: json!({
            "L": p.big_l,
            "x": p.x,
            "M": p.m,
            "s": s,
            "h": f.grid.h(),
            "interval": [interval.0, interval.1],
            "centres": f.centres.values().collect::<Vec<_>>(),
            "cells_with_event_choice": f.chosen,
            "checks": checks,
            "tau_multiplicity": [m_lo, m_hi],
        }),
        table: Some(t.render()),
        violations,
        summary: vec![
            ("min_ln_ratio", min_ratio),
            ("tau_multiplicity", m_lo.max(m_hi) as f64),
            ("lambda0", eig.eigenvalues[0]),
        ],
    })
}

fn lift(exp: &Experiment, p: &UcpParams) -> Result<RunOutput> {
    let f = ucp_fixture(exp, p)?;
    let s = p.s.unwrap_or(exp.model.u.delta_minus);
    let (l0, _) = ground_state(&f.h_d)?;
    let (l1, _) = ground_state(&f.h_d.with_added_potential(&f.w)?)?;
    let setup = UcpSetup::new(s, p.m, f.centres.clone(), (l0 - 1.0, l1 + 1.0))?;
    let c_minus = p.c_minus.unwrap_or(exp.model.u.u_minus);
    let t_grid = p.t_grid.clone().unwrap_or_else(default_t_grid);
    let rep = lifting_1d(&f.h_d, &f.w, &setup, c_minus, &t_grid)?;
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)?;
    let mut violations = Vec::new();
    if !rep.all_hold() {
        violations.push("lifting bound, monotonicity or Lipschitz check failed".to_string());
    }
    let min_margin = rep.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(RunOutput {
        report: json!({ "L": p.big_l, "x": p.x, "M": p.m, "s": s, "h": f.grid.h(), "result": rep }),
        table: Some(String::from_utf8(csv)?),
        violations,
        summary: vec![
            ("lambda0", rep.lambda0),
            ("min_margin", min_margin),
            ("initial_slope", rep.initial_slope),
            ("perturbative_slope", rep.perturbative_slope),
        ],
    })
}

fn patterns(exp: &Experiment) -> Result<RunOutput> {
    let Params::Patterns(p) = &exp.params else { unreachable!() };
    let d = &exp.model.pair.base;
    let dim = d.dim();
    let search = Cube::centred(dim, p.search_side)?;
    let k = Cube::centred(dim, p.k_side)?;
    let periodic = periodize(d, p.period, &search)?;
    let found = count_pattern_translates(&periodic, &k, &search)?;
    // Every y ∈ ℓℤ^d with y + K inside the search window is a translate.
    let per_axis = 2.0 * ((0.5 * (p.search_side - p.k_side) / p.period) - 1e-9).floor().max(-0.5) + 1.0;
    let lower = per_axis.max(0.0).powi(dim as i32) as usize;
    let mut violations = Vec::new();
    if found.count < lower {
        violations.push(format!("{} pattern translates, expected at least {lower}", found.count));
    }

    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    let seq: Vec<PointSet> = (1..=p.sequence_len)
        .map(|n| {
            let shift: Vec<f64> = e.iter().map(|v| p.shift * v / n as f64).collect();
            translate(d, &shift)
        })
        .collect::<delone_core::Result<_>>()?;
    let conv = patch_convergence_check(&seq, d, p.patch_side, p.tol)?;
    let scaled: Vec<f64> = conv
        .distances
        .iter()
        .enumerate()
        .map(|(i, dist)| dist * (i + 1) as f64)
        .collect();
    let mut t = Table::new(&["n", "distance", "n_times_distance"]);
    for (i, (dist, s)) in conv.distances.iter().zip(&scaled).enumerate() {
        t.push(vec![(i + 1).to_string(), num(*dist), num(*s)]);
    }
    Ok(RunOutput {
        report: json!({
            "period": p.period,
            "translate_count": found.count,
            "translate_lower_bound": lower,
            "witnesses": found.witnesses,
            "convergence": conv,
            "n_times_distance": scaled,
        }),
        table: Some(t.render()),
        violations,
        summary: vec![
            ("translate_count", found.count as f64),
            ("translate_lower_bound", lower as f64),
            ("final_distance", conv.distances.last().copied().unwrap_or(f64::NAN)),
        ],
    })
}
