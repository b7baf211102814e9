//! `delone`: runs the delone-core experiments from TOML configs and writes
//! JSON reports and CSV tables.
//!
//! Exit codes: 0 on success, 1 on any error (bad config, failed solve),
//! 2 when a checked inequality is violated beyond its slack.

mod config;
mod output;
mod run;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use delone_core::geometry::write_point_set;

use config::{ExperimentConfig, Kind};

#[derive(Parser)]
#[command(name = "delone", version, about = "Delone-Bernoulli operator experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, env = "DELONE_CONFIG")]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long, env = "DELONE_SEED")]
    seed: Option<u64>,
    /// Overrides `n_trials`.
    #[arg(long, env = "DELONE_TRIALS")]
    trials: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long, env = "DELONE_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, env = "DELONE_THREADS")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "L")]
    L,
    #[value(name = "beta")]
    Beta,
    #[value(name = "E")]
    E,
    #[value(name = "h")]
    H,
}

#[derive(Args, Clone, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Experiment kind; defaults to `kind` in the config.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    axis: Axis,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', conflicts_with = "doubling")]
    values: Vec<f64>,
    /// `L0,N`: the values `L0, 2L0, ..., 2^N L0`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    doubling: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the point sets of the model and write them to the output directory.
    Gen(Common),
    VerifyDelone(Common),
    Spectrum(Common),
    GoodScale(Common),
    Ilse(Common),
    Ucp1d(Common),
    Lift(Common),
    Patterns(Common),
    /// Run one experiment over a list of values of one parameter.
    Sweep(SweepArgs),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.trials {
        cfg.n_trials = n;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn set_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

/// Runs `kind` on `cfg`, writes `<stem>.json` and `<stem>.csv` under `dir`
/// and returns the exit code with the run's summary.
pub fn execute(cfg: &ExperimentConfig, kind: Kind, dir: &Path) -> Result<(u8, Vec<(&'static str, f64)>)> {
    let exp = cfg.validate(kind)?;
    let out = run::run(&exp)?;
    let stem = cfg.output.stem.clone().unwrap_or_else(|| kind.name().to_string());
    output::write_file(dir, &format!("{stem}.json"), &output::to_json(&out.envelope(&exp))?)?;
    if let Some(t) = &out.table {
        output::write_file(dir, &format!("{stem}.csv"), t)?;
    }
    for v in &out.violations {
        eprintln!("violated: {v}");
    }
    Ok((if out.violations.is_empty() { 0 } else { 2 }, out.summary))
}

fn gen(cfg: &ExperimentConfig) -> Result<u8> {
    let model = cfg.build_model()?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, ps) in [
        ("base.txt", model.pair.base.clone()),
        ("extra.txt", model.pair.extra.clone()),
        ("union.txt", model.pair.union()?),
    ] {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_point_set(&ps, std::io::BufWriter::new(file))?;
    }
    let summary = serde_json::json!({
        "config_hash": cfg.hash(),
        "geometry_seed": cfg.model.geometry_seed,
        "base_points": model.pair.base.len(),
        "extra_points": model.pair.extra.len(),
        "union_params": model.pair.union_params,
    });
    output::write_file(dir, "gen.json", &output::to_json(&summary)?)?;
    Ok(0)
}

fn single(common: &Common, kind: Kind) -> Result<u8> {
    let cfg = load(common)?;
    set_threads(common.threads)?;
    let dir = cfg.output.dir.clone();
    Ok(execute(&cfg, kind, &dir)?.0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Gen(c) => {
            let cfg = load(&c)?;
            gen(&cfg)
        }
        Cmd::VerifyDelone(c) => single(&c, Kind::VerifyDelone),
        Cmd::Spectrum(c) => single(&c, Kind::Spectrum),
        Cmd::GoodScale(c) => single(&c, Kind::GoodScale),
        Cmd::Ilse(c) => single(&c, Kind::Ilse),
        Cmd::Ucp1d(c) => single(&c, Kind::Ucp1d),
        Cmd::Lift(c) => single(&c, Kind::Lift),
        Cmd::Patterns(c) => single(&c, Kind::Patterns),
        Cmd::Sweep(s) => {
            let cfg = load(&s.common)?;
            set_threads(s.common.threads)?;
            let kind = match (&s.kind, cfg.kind) {
                (Some(k), _) => serde_json::from_value(serde_json::Value::String(k.clone()))
                    .with_context(|| format!("unknown kind `{k}`"))?,
                (None, Some(k)) => k,
                (None, None) => bail!("sweep needs --kind or `kind` in the config"),
            };
            let values = match &s.doubling {
                Some(d) => {
                    let [l0, n] = d.as_slice() else {
                        bail!("--doubling takes L0,N");
                    };
                    if *n < 0.0 || n.fract() != 0.0 {
                        bail!("--doubling: N must be a non-negative integer");
                    }
                    delone_core::msa::scale_sequence(*l0, *n as usize)?
                }
                None => s.values.clone(),
            };
            sweep::sweep(&cfg, kind, s.axis, &values)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1 like every other error; 2 is reserved for violations.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
