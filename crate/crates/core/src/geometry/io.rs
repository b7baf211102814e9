//! Plain-text point-set files.
//!
//! ```text
//! dim=2
//! window=0,0,20
//! r=1
//! R=2
//! -9.0000000000000000e0 3.0000000000000000e0
//! ...
//! ```
//!
//! `window` lists the centre coordinates followed by the side. `r` and `R`
//! are optional. Numbers are written with 17 significant digits, which makes
//! the round trip exact. Blank lines and lines starting with `#` are ignored.

use std::io::{BufRead, Write};

use super::{Cube, DeloneParams, PointSet};
use crate::error::{Error, Result};

pub fn write_point_set<W: Write>(ps: &PointSet, mut out: W) -> Result<()> {
    writeln!(out, "dim={}", ps.dim())?;
    let w = ps.window();
    let centre: Vec<String> = w.centre().iter().map(|c| fmt17(*c)).collect();
    writeln!(out, "window={},{}", centre.join(","), fmt17(w.side()))?;
    if let Some(p) = ps.params() {
        writeln!(out, "r={}", fmt17(p.r))?;
        if let Some(big_r) = p.big_r {
            writeln!(out, "R={}", fmt17(big_r))?;
        }
    }
    for p in ps.points() {
        let row: Vec<String> = p.iter().map(|c| fmt17(*c)).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(line, format!("bad number {s:?}: {e}")))
}

pub fn read_point_set<R: BufRead>(input: R) -> Result<PointSet> {
    let mut dim: Option<usize> = None;
    let mut window: Option<(Vec<f64>, f64)> = None;
    let mut r: Option<f64> = None;
    let mut big_r: Option<f64> = None;
    let mut coords = Vec::new();

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            match key.trim() {
                "dim" => {
                    dim = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|e| parse_err(lineno, format!("bad dim: {e}")))?,
                    )
                }
                "window" => {
                    let parts = value
                        .split(',')
                        .map(|s| parse_f64(s, lineno))
                        .collect::<Result<Vec<f64>>>()?;
                    let (side, centre) = parts
                        .split_last()
                        .ok_or_else(|| parse_err(lineno, "empty window"))?;
                    window = Some((centre.to_vec(), *side));
                }
                "r" => r = Some(parse_f64(value, lineno)?),
                "R" => big_r = Some(parse_f64(value, lineno)?),
                other => return Err(parse_err(lineno, format!("unknown header {other:?}"))),
            }
            continue;
        }
        let d = dim.ok_or_else(|| parse_err(lineno, "point before dim header"))?;
        let row = line
            .split_whitespace()
            .map(|s| parse_f64(s, lineno))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != d {
            return Err(parse_err(
                lineno,
                format!("expected {d} coordinates, found {}", row.len()),
            ));
        }
        coords.extend(row);
    }

    let dim = dim.ok_or_else(|| parse_err(0, "missing dim header"))?;
    let (centre, side) = window.ok_or_else(|| parse_err(0, "missing window header"))?;
    if centre.len() != dim {
        return Err(parse_err(0, "window centre does not match dim"));
    }
    let ps = PointSet::from_coords(dim, coords, Cube::new(centre, side)?)?;
    let params = match (r, big_r) {
        (Some(r), big_r) => Some(DeloneParams { r, big_r }),
        (None, Some(_)) => return Err(parse_err(0, "R given without r")),
        (None, None) => None,
    };
    Ok(ps.with_params_unchecked(params))
}

pub fn parse_point_set(text: &str) -> Result<PointSet> {
    read_point_set(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_perturbed_lattice;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn parses_header_and_points() {
        let text = "dim=1\nwindow=0,10\nr=1\nR=2\n# comment\n-1\n0.5\n3\n";
        let ps = parse_point_set(text).unwrap();
        assert_eq!(ps.coords(), &[-1.0, 0.5, 3.0]);
        assert_eq!(ps.params().unwrap().big_r, Some(2.0));
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(parse_point_set("dim=2\nwindow=0,0,4\n1.0\n").is_err());
        assert!(parse_point_set("window=0,4\n1.0\n").is_err());
        assert!(parse_point_set("dim=1\nwindow=0,4\nfoo\n").is_err());
    }

    proptest! {
        #[test]
        fn text_roundtrip_is_exact(seed in any::<u64>(), dim in 1usize..=2) {
            let w = Cube::new(vec![0.123456789; dim], 9.87654321).unwrap();
            let ps = generate_perturbed_lattice(dim, 0.25, &w, &mut seeded(seed)).unwrap();
            let mut buf = Vec::new();
            write_point_set(&ps, &mut buf).unwrap();
            let back = read_point_set(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ps);
        }
    }
}
