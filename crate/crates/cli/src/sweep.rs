//! Parameter sweeps: one sub-run per value and a combined table.

use anyhow::{bail, Result};

use crate::config::{ExperimentConfig, Kind};
use crate::output::{num, write_file, Table};
use crate::{execute, Axis};

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::L => "L",
        Axis::Beta => "beta",
        Axis::E => "E",
        Axis::H => "h",
    }
}

/// Value, exit code, error message and summary of one sub-run.
type Row = (f64, u8, String, Vec<(&'static str, f64)>);

/// The base config with `axis` set to `value`.
pub fn with_value(cfg: &ExperimentConfig, axis: Axis, value: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    match axis {
        Axis::L => c.set_param("L", toml::Value::Float(value)),
        Axis::Beta => c.model.beta = value,
        Axis::E => {
            c.params.remove("lift_fraction");
            c.set_param("energy", toml::Value::Float(value));
        }
        Axis::H => {
            c.grid.refine = None;
            c.grid.h = Some(value);
        }
    }
    c
}

/// Runs every value; failures are recorded and the sweep continues. The exit
/// code is the largest one seen.
pub fn sweep(cfg: &ExperimentConfig, kind: Kind, axis: Axis, values: &[f64]) -> Result<u8> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let name = axis_name(axis);
    let base_dir = cfg.output.dir.clone();
    let mut worst = 0u8;
    let mut rows: Vec<Row> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let sub = with_value(cfg, axis, v);
        let dir = base_dir.join(format!("sweep_{name}")).join(format!("{i:03}"));
        match execute(&sub, kind, &dir) {
            Ok((code, summary)) => {
                worst = worst.max(code);
                rows.push((v, code, String::new(), summary));
            }
            Err(e) => {
                eprintln!("{name} = {v}: error: {e:#}");
                worst = worst.max(1);
                rows.push((v, 1, format!("{e:#}").replace([',', '\n'], ";"), Vec::new()));
            }
        }
    }

    let keys: Vec<&'static str> = rows
        .iter()
        .find(|r| !r.3.is_empty())
        .map(|r| r.3.iter().map(|(k, _)| *k).filter(|k| *k != name).collect())
        .unwrap_or_default();
    let richardson = axis == Axis::H && keys.contains(&"lambda0");
    let mut header: Vec<String> = vec![name.into(), "exit_code".into(), "error".into()];
    header.extend(keys.iter().map(|k| k.to_string()));
    if richardson {
        header.push("richardson_ratio".into());
    }
    let lambda0: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r.3.iter().find(|(k, _)| *k == "lambda0").map(|(_, v)| *v))
        .collect();
    let mut t = Table::new(&header);
    for (i, (v, code, err, summary)) in rows.iter().enumerate() {
        let mut cells = vec![num(*v), code.to_string(), err.clone()];
        for k in &keys {
            let cell = summary.iter().find(|(kk, _)| kk == k).map_or(String::new(), |(_, x)| num(*x));
            cells.push(cell);
        }
        if richardson {
            // (λ(h_{i-2}) − λ(h_{i-1})) / (λ(h_{i-1}) − λ(h_i)); 4 for second order under halving.
            let ratio = match (i.checked_sub(2).and_then(|j| lambda0[j]), i.checked_sub(1).and_then(|j| lambda0[j]), lambda0[i]) {
                (Some(a), Some(b), Some(c)) => num((a - b) / (b - c)),
                _ => String::new(),
            };
            cells.push(ratio);
        }
        t.push(cells);
    }
    write_file(&base_dir, &format!("sweep_{name}.csv"), &t.render())?;
    Ok(worst)
}
