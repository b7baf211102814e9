//! Good boxes, good scales and the doubling scale sequence.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::euclid;
use crate::operator::{DiscretizedHamiltonian, Model};
use crate::rng::trial_rng;
use crate::spectral::{block_norm_nodes, ground_state, resolvent_norm, Resolvent};
use crate::stats::{wilson_interval, Interval, Z95};
use crate::geometry::Cube;

/// Subgrid points per axis for the pair centres; blocks have side `L/10`.
pub const SUBGRID: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GoodBoxParams {
    pub energy: f64,
    pub m: f64,
    pub zeta: f64,
    pub pair_budget: usize,
}

impl GoodBoxParams {
    pub fn new(energy: f64, m: f64, zeta: f64, pair_budget: usize) -> Result<Self> {
        if !(m > 0.0) {
            return invalid(format!("m must be positive, got {m}"));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return invalid(format!("zeta must lie in (0, 1), got {zeta}"));
        }
        if !energy.is_finite() {
            return invalid("energy must be finite");
        }
        Ok(GoodBoxParams {
            energy,
            m,
            zeta,
            pair_budget,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairMargin {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub distance: f64,
    pub block_norm: f64,
    /// `−m‖y−z‖ − log(block_norm)`; negative means the pair fails.
    pub log_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodBoxOutcome {
    pub good: bool,
    pub reason: Option<String>,
    pub resolvent_norm: Option<f64>,
    /// `e^{L^{1−ζ}}`.
    pub resolvent_threshold: f64,
    pub worst_pair: Option<PairMargin>,
    pub margins: Vec<PairMargin>,
}

/// Deterministic test pairs: centres of the `L/10` subgrid, all unordered
/// pairs at distance `≥ L/100`, farthest first, at most `budget`.
pub fn test_pairs(centre: &[f64], side: f64, budget: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let step = side / SUBGRID as f64;
    let axis: Vec<Vec<f64>> = centre
        .iter()
        .map(|&c| {
            (0..SUBGRID)
                .map(|i| c - 0.5 * side + (i as f64 + 0.5) * step)
                .collect()
        })
        .collect();
    let points: Vec<Vec<f64>> = match centre.len() {
        1 => axis[0].iter().map(|&x| vec![x]).collect(),
        _ => axis[1]
            .iter()
            .flat_map(|&y| axis[0].iter().map(move |&x| vec![x, y]))
            .collect(),
    };
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = euclid(&points[i], &points[j]);
            if d >= side / 100.0 {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    pairs
        .into_iter()
        .take(budget)
        .map(|(_, i, j)| (points[i].clone(), points[j].clone()))
        .collect()
}

/// Checks `‖R(E)‖ ≤ e^{L^{1−ζ}}` and `‖χ_y R χ_z‖ ≤ e^{−m‖y−z‖}` on the
/// test pairs, with `χ` the indicators of cubes of side `L/10`.
pub fn is_good_box(h: &DiscretizedHamiltonian, params: &GoodBoxParams) -> Result<GoodBoxOutcome> {
    let side = h.grid().side();
    let threshold = side.powf(1.0 - params.zeta).exp();
    let spectrum_hit = || GoodBoxOutcome {
        good: false,
        reason: Some("spectrum hit".into()),
        resolvent_norm: None,
        resolvent_threshold: threshold,
        worst_pair: None,
        margins: Vec::new(),
    };
    let rn = match resolvent_norm(h, params.energy) {
        Ok(v) => v,
        Err(Error::SpectrumHit { .. }) => return Ok(spectrum_hit()),
        Err(e) => return Err(e),
    };
    let res = match Resolvent::new(h, params.energy) {
        Ok(r) => r,
        Err(Error::SpectrumHit { .. }) => return Ok(spectrum_hit()),
        Err(e) => return Err(e),
    };
    let s = side / SUBGRID as f64;
    let mut margins = Vec::new();
    for (y, z) in test_pairs(h.grid().centre(), side, params.pair_budget) {
        let yn = h.grid().nodes_in(&Cube::new(y.clone(), s)?);
        let zn = h.grid().nodes_in(&Cube::new(z.clone(), s)?);
        let b = block_norm_nodes(&res, &yn, &zn).value;
        let distance = euclid(&y, &z);
        margins.push(PairMargin {
            y,
            z,
            distance,
            block_norm: b,
            log_margin: -params.m * distance - b.ln(),
        });
    }
    let worst_pair = margins
        .iter()
        .min_by(|a, b| a.log_margin.total_cmp(&b.log_margin))
        .cloned();
    let norm_ok = rn <= threshold;
    let pairs_ok = margins.iter().all(|p| p.log_margin >= 0.0);
    let reason = match (norm_ok, pairs_ok) {
        (true, true) => None,
        (false, _) => Some("resolvent norm above threshold".into()),
        (true, false) => Some("off-diagonal decay violated".into()),
    };
    Ok(GoodBoxOutcome {
        good: norm_ok && pairs_ok,
        reason,
        resolvent_norm: Some(rn),
        resolvent_threshold: threshold,
        worst_pair,
        margins,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The whole interval lies at or above the threshold.
    Meets,
    /// The whole interval lies below the threshold.
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn compare(ci: &Interval, threshold: f64) -> Self {
        if ci.lo >= threshold {
            Verdict::Meets
        } else if ci.hi < threshold {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Meets => "meets",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodScaleReport {
    #[serde(rename = "L")]
    pub big_l: f64,
    pub x: Vec<f64>,
    pub params: GoodBoxParams,
    pub block_width: f64,
    pub p: f64,
    pub n_trials: usize,
    pub n_good: usize,
    pub p_hat: f64,
    pub wilson_95_ci: Interval,
    /// `1 − L^{−pd}`.
    pub threshold: f64,
    pub verdict: Verdict,
}

impl GoodScaleReport {
    pub const CSV_HEADER: &'static str =
        "L,x,E,m,zeta,pair_budget,block_width,p,n_trials,n_good,p_hat,ci_lo,ci_hi,threshold,verdict";

    pub fn csv_row(&self) -> String {
        let x: Vec<String> = self.x.iter().map(|v| format!("{v:.16e}")).collect();
        format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.big_l,
            x.join(";"),
            self.params.energy,
            self.params.m,
            self.params.zeta,
            self.params.pair_budget,
            self.block_width,
            self.p,
            self.n_trials,
            self.n_good,
            self.p_hat,
            self.wilson_95_ci.lo,
            self.wilson_95_ci.hi,
            self.threshold,
            self.verdict.as_str()
        )
    }
}

pub const MIN_TRIALS: usize = 30;

/// Monte Carlo estimate of `P(Λ_L(x) is good)` with a Wilson interval.
/// Trial `t` draws its configuration from the stream `(seed, t)`, so the
/// report does not depend on scheduling.
pub fn good_scale_probability(
    model: &Model,
    x: &[f64],
    big_l: f64,
    params: &GoodBoxParams,
    p: f64,
    n_trials: usize,
    seed: u64,
) -> Result<GoodScaleReport> {
    if n_trials < MIN_TRIALS {
        return invalid(format!("need at least {MIN_TRIALS} trials, got {n_trials}"));
    }
    if !(p > 0.0) {
        return invalid(format!("p must be positive, got {p}"));
    }
    let grid = model.grid(x, big_l)?;
    let outcomes: Vec<bool> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let omega = model.sample(&grid, &mut rng)?;
            let h = model.hamiltonian(&grid, &omega)?;
            Ok(is_good_box(&h, params)?.good)
        })
        .collect::<Result<Vec<bool>>>()?;
    let n_good = outcomes.iter().filter(|&&g| g).count();
    let ci = wilson_interval(n_good as u64, n_trials as u64, Z95);
    let d = x.len() as f64;
    let threshold = 1.0 - big_l.powf(-p * d);
    Ok(GoodScaleReport {
        big_l,
        x: x.to_vec(),
        params: *params,
        block_width: big_l / SUBGRID as f64,
        p,
        n_trials,
        n_good,
        p_hat: n_good as f64 / n_trials as f64,
        wilson_95_ci: ci,
        threshold,
        verdict: Verdict::compare(&ci, threshold),
    })
}

/// `[L₀, 2L₀, …, 2ⁿL₀]`.
pub fn scale_sequence(l0: f64, n: usize) -> Result<Vec<f64>> {
    if !(l0 > 0.0) {
        return invalid(format!("L0 must be positive, got {l0}"));
    }
    Ok((0..=n).map(|k| l0 * 2f64.powi(k as i32)).collect())
}

/// `(Ê₀, lift)`: the background ground state on `Λ_L(x)` and the increase
/// produced by switching every random coupling on.
pub fn background_and_full_lift(model: &Model, x: &[f64], big_l: f64) -> Result<(f64, f64)> {
    let grid = model.grid(x, big_l)?;
    let (e0, _) = ground_state(&model.background(&grid)?)?;
    let ones = crate::operator::BernoulliConfig::constant(&model.local_sites(&grid)?, 1.0)?;
    let (e1, _) = ground_state(&model.hamiltonian(&grid, &ones)?)?;
    Ok((e0, e1 - e0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::GridSpec;

    #[test]
    fn doubling_sequence() {
        assert_eq!(scale_sequence(10.0, 3).unwrap(), vec![10.0, 20.0, 40.0, 80.0]);
        assert_eq!(scale_sequence(7.0, 0).unwrap(), vec![7.0]);
        assert!(scale_sequence(0.0, 2).is_err());
    }

    #[test]
    fn pairs_are_farthest_first_and_capped() {
        let p = test_pairs(&[0.0], 10.0, 3);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], (vec![-4.5], vec![4.5]));
        assert_eq!(test_pairs(&[0.0], 10.0, 1000).len(), 45);
        assert_eq!(test_pairs(&[0.0, 0.0], 10.0, 10_000).len(), 100 * 99 / 2);
    }

    #[test]
    fn param_validation() {
        assert!(GoodBoxParams::new(0.0, 0.0, 0.5, 10).is_err());
        assert!(GoodBoxParams::new(0.0, 1.0, 1.5, 10).is_err());
        assert!(GoodBoxParams::new(0.0, 1.0, 0.5, 10).is_ok());
    }

    fn free_box(side: f64) -> DiscretizedHamiltonian {
        DiscretizedHamiltonian::free(GridSpec::new(vec![0.0], side, 1.0 / 8.0).unwrap())
    }

    #[test]
    fn far_below_spectrum_is_good_and_huge_mass_is_bad() {
        let h = free_box(20.0);
        let (l0, _) = ground_state(&h).unwrap();
        let eta: f64 = 4.0;
        let m = 0.25 * eta.sqrt();
        let good = is_good_box(&h, &GoodBoxParams::new(l0 - eta, m, 0.5, 45).unwrap()).unwrap();
        assert!(good.good, "{:?}", good.worst_pair);
        let bad = is_good_box(&h, &GoodBoxParams::new(l0 - eta, 1e3, 0.5, 45).unwrap()).unwrap();
        assert!(!bad.good);
    }

    #[test]
    fn spectrum_hit_is_a_bad_box() {
        let h = free_box(4.0);
        let (l0, _) = ground_state(&h).unwrap();
        let out = is_good_box(&h, &GoodBoxParams::new(l0, 0.1, 0.5, 5).unwrap()).unwrap();
        assert!(!out.good);
        assert_eq!(out.reason.as_deref(), Some("spectrum hit"));
    }

    #[test]
    fn relaxing_parameters_never_flips_good_to_bad() {
        let h = free_box(20.0);
        let (l0, _) = ground_state(&h).unwrap();
        let e = l0 - 0.5;
        for &m in &[0.05, 0.1, 0.2, 0.4, 0.8] {
            for &z in &[0.2, 0.5, 0.8] {
                let strict = is_good_box(&h, &GoodBoxParams::new(e, m, z, 20).unwrap()).unwrap();
                let loose = is_good_box(&h, &GoodBoxParams::new(e, m / 2.0, z / 2.0, 20).unwrap()).unwrap();
                assert!(!strict.good || loose.good, "m {m}, zeta {z}");
            }
        }
    }
}
