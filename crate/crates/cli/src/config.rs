//! Experiment configuration: TOML on disk, validated into typed parameters
//! before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use delone_core::geometry::{generate_lattice, generate_perturbed_lattice, make_delone_pair};
use delone_core::ilse::IlseParams;
use delone_core::operator::{check_resolution, Model};
use delone_core::rng::seeded;
use delone_core::{Cube, GridSpec, Profile, SingleSitePotential};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    VerifyDelone,
    Spectrum,
    GoodScale,
    Ilse,
    Ucp1d,
    Lift,
    Patterns,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::VerifyDelone => "verify-delone",
            Kind::Spectrum => "spectrum",
            Kind::GoodScale => "good-scale",
            Kind::Ilse => "ilse",
            Kind::Ucp1d => "ucp1d",
            Kind::Lift => "lift",
            Kind::Patterns => "patterns",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    /// `aℤ^d`.
    Lattice { spacing: f64 },
    /// `ℤ^d` with each point moved uniformly inside `Λ_{1−ρ}`.
    Perturbed { rho: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub u_minus: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    #[serde(default = "default_profile")]
    pub profile: Profile,
}

fn default_profile() -> Profile {
    Profile::Flat
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    /// Side of the generated patch, centred at the origin.
    pub patch: f64,
    pub generator: Generator,
    pub beta: f64,
    pub bump: BumpConfig,
    /// Seed for the geometry; the Monte Carlo seed is separate.
    #[serde(default)]
    pub geometry_seed: u64,
}

/// Either `refine` (`h = δ₋/(4 refine)`, snapped so that `L/h` is integral)
/// or an explicit `h`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    pub refine: Option<usize>,
    pub h: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem for the report and table; defaults to the experiment kind.
    pub stem: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            stem: None,
        }
    }
}

fn default_trials() -> usize {
    200
}

/// The file as written. Per-kind parameters stay untyped until validation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration,
    /// leaving out where the output goes.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn set_param(&mut self, key: &str, value: toml::Value) {
        self.params.insert(key.to_string(), value);
    }

    pub fn validate(&self, kind: Kind) -> Result<Experiment> {
        if let Some(k) = self.kind {
            if k != kind {
                bail!("config is for `{k}` but `{kind}` was requested");
            }
        }
        if self.grid.h.is_some() && !matches!(kind, Kind::Spectrum | Kind::Ucp1d | Kind::Lift) {
            bail!("{kind} uses the refine grid policy; grid.h is for spectrum, ucp1d and lift");
        }
        let model = self.build_model()?;
        let params = Params::parse(kind, &self.params, self)?;
        if matches!(kind, Kind::GoodScale | Kind::Ilse) && self.n_trials == 0 {
            bail!("n_trials must be positive");
        }
        Ok(Experiment {
            kind,
            model,
            params,
            grid: self.grid.clone(),
            seed: self.seed,
            n_trials: self.n_trials,
            config_hash: self.hash(),
        })
    }

    pub fn bump(&self) -> Result<SingleSitePotential> {
        let b = &self.model.bump;
        Ok(SingleSitePotential::new(b.u_minus, b.delta_minus, b.delta_plus, b.profile)?)
    }

    pub fn build_model(&self) -> Result<Model> {
        let m = &self.model;
        if !(1..=2).contains(&m.dim) {
            bail!("model.dim must be 1 or 2, got {}", m.dim);
        }
        if !(m.beta > 0.0 && m.beta < 1.0) {
            bail!("model.beta must lie in (0, 1), got {}", m.beta);
        }
        if !(m.patch > 0.0) {
            bail!("model.patch must be positive");
        }
        let u = self.bump()?;
        match (self.grid.refine, self.grid.h) {
            (Some(_), Some(_)) => bail!("grid: give either refine or h, not both"),
            (Some(0), None) => bail!("grid.refine must be at least 1"),
            (None, Some(h)) if !(h > 0.0 && h <= 0.25 * u.delta_minus * (1.0 + 1e-12)) => {
                bail!("grid.h = {h} must lie in (0, delta_minus/4]")
            }
            _ => {}
        }
        let window = Cube::centred(m.dim, m.patch)?;
        let mut rng = seeded(m.geometry_seed);
        let base = match m.generator {
            Generator::Lattice { spacing } => generate_lattice(m.dim, spacing, &window)?,
            Generator::Perturbed { rho } => generate_perturbed_lattice(m.dim, rho, &window, &mut rng)?,
        };
        let pair = make_delone_pair(&base, &mut rng)?;
        Ok(Model {
            pair,
            u,
            beta: m.beta,
            refine: self.grid.refine.unwrap_or(1),
        })
    }
}

/// A validated run: everything the runners need.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub kind: Kind,
    pub model: Model,
    pub params: Params,
    pub grid: GridPolicy,
    pub seed: u64,
    pub n_trials: usize,
    pub config_hash: String,
}

impl Experiment {
    pub fn grid(&self, x: &[f64], side: f64) -> Result<GridSpec> {
        let g = match self.grid.h {
            Some(h) => GridSpec::new(x.to_vec(), side, h)?,
            None => self.model.grid(x, side)?,
        };
        check_resolution(&g, &self.model.u)?;
        Ok(g)
    }
}

fn typed<T: DeserializeOwned>(kind: Kind, table: &toml::Table) -> Result<T> {
    toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e| anyhow!("[params] for {kind}: {e}"))
}

fn check_centre(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        bail!("params.x has {} coordinates, model.dim is {dim}", x.len());
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("params.{name} must be positive, got {v}");
    }
    Ok(())
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        bail!("params.{name} must lie in (0, 1), got {v}");
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    /// Overrides the claimed `r` of the base set.
    pub r: Option<f64>,
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Couplings {
    Background,
    #[default]
    Sample,
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(rename = "L")]
    pub big_l: f64,
    pub x: Option<Vec<f64>>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Eigenpairs nearest this energy instead of the lowest ones.
    pub energy: Option<f64>,
    #[serde(default)]
    pub couplings: Couplings,
    /// Run a Combes–Thomas check at `E = λ₀ − ct_gap`.
    pub ct_gap: Option<f64>,
    #[serde(default = "default_pairs")]
    pub ct_pairs: usize,
    #[serde(default = "one")]
    pub ct_width: f64,
}

fn default_k() -> usize {
    5
}

fn default_pairs() -> usize {
    10
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodScaleParams {
    #[serde(rename = "L")]
    pub big_l: f64,
    pub x: Option<Vec<f64>>,
    /// Absolute energy.
    pub energy: Option<f64>,
    /// `E = Ê₀ + lift_fraction · lift` with `lift` the all-couplings-on shift.
    pub lift_fraction: Option<f64>,
    pub m: f64,
    pub zeta: f64,
    pub p: f64,
    #[serde(default = "default_pairs")]
    pub pair_budget: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlseCliParams {
    #[serde(rename = "L")]
    pub big_l: f64,
    pub x: Option<Vec<f64>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub p: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "C_d", default = "one")]
    pub c_d: f64,
    pub zeta: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UcpParams {
    #[serde(rename = "L")]
    pub big_l: f64,
    #[serde(default)]
    pub x: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// Window length; defaults to `δ₋`.
    pub s: Option<f64>,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(default = "default_k")]
    pub n_eigs: usize,
    /// Lower bound of `W` on the windows; defaults to `u₋`.
    pub c_minus: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternParams {
    /// Period `ℓ` of the periodized patch.
    pub period: f64,
    /// Side of the pattern box `K`, centred at the origin.
    pub k_side: f64,
    /// Side of the search window, centred at the origin.
    pub search_side: f64,
    /// Members `D + shift·e₁/n`, `n = 1..=sequence_len`, of the convergence fixture.
    #[serde(default = "default_sequence")]
    pub sequence_len: usize,
    #[serde(default = "default_shift")]
    pub shift: f64,
    /// Scan starts above this side.
    pub patch_side: f64,
    #[serde(default = "default_pattern_tol")]
    pub tol: f64,
}

fn default_sequence() -> usize {
    8
}

fn default_shift() -> f64 {
    0.25
}

fn default_pattern_tol() -> f64 {
    0.2
}

#[derive(Clone, Debug)]
pub enum Params {
    VerifyDelone(VerifyParams),
    Spectrum(SpectrumParams),
    GoodScale(GoodScaleParams),
    Ilse(IlseCliParams, IlseParams),
    Ucp1d(UcpParams),
    Lift(UcpParams),
    Patterns(PatternParams),
}

impl Params {
    fn parse(kind: Kind, table: &toml::Table, cfg: &ExperimentConfig) -> Result<Self> {
        let dim = cfg.model.dim;
        let bump = &cfg.model.bump;
        Ok(match kind {
            Kind::VerifyDelone => {
                let p: VerifyParams = typed(kind, table)?;
                if let (Some(r), Some(big_r)) = (p.r, p.big_r) {
                    if !(r > 0.0 && r <= big_r) {
                        bail!("params: need 0 < r <= R");
                    }
                }
                Params::VerifyDelone(p)
            }
            Kind::Spectrum => {
                let p: SpectrumParams = typed(kind, table)?;
                positive("L", p.big_l)?;
                if let Some(x) = &p.x {
                    check_centre(x, dim)?;
                }
                if p.k == 0 {
                    bail!("params.k must be at least 1");
                }
                if let Some(g) = p.ct_gap {
                    positive("ct_gap", g)?;
                    positive("ct_width", p.ct_width)?;
                }
                Params::Spectrum(p)
            }
            Kind::GoodScale => {
                let p: GoodScaleParams = typed(kind, table)?;
                positive("L", p.big_l)?;
                if let Some(x) = &p.x {
                    check_centre(x, dim)?;
                }
                match (p.energy, p.lift_fraction) {
                    (Some(_), None) => {}
                    (None, Some(f)) if (0.0..=1.0).contains(&f) => {}
                    (None, Some(f)) => bail!("params.lift_fraction must lie in [0, 1], got {f}"),
                    _ => bail!("params: give exactly one of energy and lift_fraction"),
                }
                positive("m", p.m)?;
                unit_interval("zeta", p.zeta)?;
                positive("p", p.p)?;
                if cfg.n_trials < delone_core::msa::MIN_TRIALS {
                    bail!("good-scale needs n_trials >= {}", delone_core::msa::MIN_TRIALS);
                }
                Params::GoodScale(p)
            }
            Kind::Ilse => {
                let p: IlseCliParams = typed(kind, table)?;
                positive("L", p.big_l)?;
                if let Some(x) = &p.x {
                    check_centre(x, dim)?;
                }
                let ip = IlseParams {
                    d: dim,
                    epsilon: p.epsilon,
                    p: p.p,
                    beta: cfg.model.beta,
                    r0: p.r0,
                    delta_plus: bump.delta_plus,
                    delta_minus: bump.delta_minus,
                    u_minus: bump.u_minus,
                    c_d: p.c_d,
                    zeta: p.zeta,
                };
                ip.validate()?;
                Params::Ilse(p, ip)
            }
            Kind::Ucp1d | Kind::Lift => {
                let p: UcpParams = typed(kind, table)?;
                if dim != 1 {
                    bail!("{kind} runs in one dimension only");
                }
                positive("L", p.big_l)?;
                positive("M", p.m)?;
                positive("R0", p.r0)?;
                let q = p.big_l / p.m;
                if (q - q.round()).abs() > 1e-9 || (q.round() as i64) % 2 == 0 || q < 2.5 {
                    bail!("params: L/M = {q} must be an odd natural number of at least 3");
                }
                let shift = p.x / p.m;
                if (shift - shift.round()).abs() > 1e-9 {
                    bail!("params.x must be a multiple of M");
                }
                let s = p.s.unwrap_or(bump.delta_minus);
                if !(s > 0.0 && s < 2.0 * bump.delta_plus && s < p.m) {
                    bail!("params.s = {s} must lie in (0, min(2 delta_plus, M))");
                }
                if p.n_eigs == 0 {
                    bail!("params.n_eigs must be at least 1");
                }
                if let Some(c) = p.c_minus {
                    positive("c_minus", c)?;
                }
                if let Some(t) = &p.t_grid {
                    if t.is_empty() || t.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                        bail!("params.t_grid must be a non-empty subset of (0, 1]");
                    }
                }
                if kind == Kind::Ucp1d {
                    Params::Ucp1d(p)
                } else {
                    Params::Lift(p)
                }
            }
            Kind::Patterns => {
                let p: PatternParams = typed(kind, table)?;
                positive("period", p.period)?;
                positive("k_side", p.k_side)?;
                positive("search_side", p.search_side)?;
                positive("patch_side", p.patch_side)?;
                positive("tol", p.tol)?;
                positive("shift", p.shift)?;
                if p.sequence_len == 0 {
                    bail!("params.sequence_len must be at least 1");
                }
                Params::Patterns(p)
            }
        })
    }
}

pub fn centre_or_origin(x: &Option<Vec<f64>>, dim: usize) -> Vec<f64> {
    x.clone().unwrap_or_else(|| vec![0.0; dim])
}
