use serde::Serialize;

use super::{euclid, lex_cmp, sup_dist, Cube, PointSet, TOL};
use crate::error::{invalid, Error, Result};

/// Tolerance for pattern equality, sup norm per point.
pub const PATTERN_TOL: f64 = 1e-9;

/// Number of candidate box sides scanned by [`patch_convergence_check`].
const CONVERGENCE_CANDIDATES: usize = 64;

fn directed_hausdorff<'a>(
    from: impl Iterator<Item = &'a [f64]>,
    to: &[&'a [f64]],
) -> f64 {
    let mut cmax = 0.0f64;
    for x in from {
        let mut cmin = f64::INFINITY;
        for y in to {
            let d = euclid(x, y);
            if d < cmin {
                cmin = d;
                if cmin <= cmax {
                    break;
                }
            }
        }
        cmax = cmax.max(cmin);
    }
    cmax
}

fn hausdorff_slices(xs: &[&[f64]], ys: &[&[f64]]) -> f64 {
    directed_hausdorff(xs.iter().copied(), ys).max(directed_hausdorff(ys.iter().copied(), xs))
}

/// Euclidean Hausdorff distance between two non-empty patches.
pub fn hausdorff_distance(x: &PointSet, y: &PointSet) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("Hausdorff distance needs non-empty sets".into()));
    }
    if x.dim() != y.dim() {
        return invalid("Hausdorff distance between sets of different dimension");
    }
    let xs: Vec<&[f64]> = x.points().collect();
    let ys: Vec<&[f64]> = y.points().collect();
    Ok(hausdorff_slices(&xs, &ys))
}

/// Distance between `D_n ∩ Λ_L(0)` and `D ∩ Λ_L(0)`: zero when both are
/// empty, infinite when exactly one is.
fn windowed_distance(a: &PointSet, b: &PointSet, cube: &Cube) -> f64 {
    let xs = a.restricted_to(cube);
    let ys = b.restricted_to(cube);
    match (xs.is_empty(), ys.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => hausdorff_slices(&xs, &ys),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchConvergenceReport {
    /// Smallest scanned `L > l` at which the last distance is below `tol`.
    pub l_found: Option<f64>,
    /// Side at which `distances` were taken (`l_found`, or the largest candidate).
    pub reported_side: f64,
    /// `d_H(D_n ∩ Λ_L(0), D ∩ Λ_L(0))` for each member of the sequence.
    pub distances: Vec<f64>,
}

/// Scans sides `L ∈ (l, L_max]` for Hausdorff convergence of `D_n ∩ Λ_L(0)`
/// to `D ∩ Λ_L(0)`; `L_max` is the largest centred cube inside every window.
/// Convergence means the distance at the final member is below `tol`.
pub fn patch_convergence_check(
    seq: &[PointSet],
    target: &PointSet,
    l: f64,
    tol: f64,
) -> Result<PatchConvergenceReport> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("empty sequence".into()));
    }
    if !(l > 0.0 && tol > 0.0) {
        return invalid("need l > 0 and tol > 0");
    }
    let l_max = seq
        .iter()
        .chain(std::iter::once(target))
        .map(|p| p.window().largest_centred_side())
        .fold(f64::INFINITY, f64::min);
    if l_max <= l + TOL {
        return Err(Error::WindowTooSmall(format!(
            "windows only cover Λ_{l_max}(0), need a side beyond l = {l}"
        )));
    }
    let dim = target.dim();
    let mut last = None;
    for j in 1..=CONVERGENCE_CANDIDATES {
        let side = l + (l_max - l) * j as f64 / CONVERGENCE_CANDIDATES as f64;
        let cube = Cube::centred(dim, side)?;
        let distances: Vec<f64> = seq
            .iter()
            .map(|dn| windowed_distance(dn, target, &cube))
            .collect();
        if *distances.last().unwrap() < tol {
            return Ok(PatchConvergenceReport {
                l_found: Some(side),
                reported_side: side,
                distances,
            });
        }
        last = Some((side, distances));
    }
    let (side, distances) = last.unwrap();
    Ok(PatchConvergenceReport {
        l_found: None,
        reported_side: side,
        distances,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PatternTranslates {
    pub count: usize,
    pub witnesses: Vec<Vec<f64>>,
}

/// Counts translates `y` with `y + (D ∩ K) = D ∩ (y + K)` and `y + K` inside
/// `search_window`. Candidates are difference vectors of `D`.
pub fn count_pattern_translates(
    d: &PointSet,
    k: &Cube,
    search_window: &Cube,
) -> Result<PatternTranslates> {
    if k.dim() != d.dim() || search_window.dim() != d.dim() {
        return invalid("dimension mismatch between set, pattern box and search window");
    }
    if !d.window().contains_cube(k) {
        return Err(Error::WindowTooSmall(
            "pattern box must lie inside the patch window".into(),
        ));
    }
    let mut sorted: Vec<&[f64]> = d.points().collect();
    sorted.sort_by(|a, b| lex_cmp(a, b));
    let xs: Vec<f64> = sorted.iter().map(|p| p[0]).collect();
    let in_cube = |cube: &Cube| -> Vec<&[f64]> {
        let lo = xs.partition_point(|&x| x <= cube.lower(0) - PATTERN_TOL);
        let hi = xs.partition_point(|&x| x < cube.upper(0) + PATTERN_TOL);
        sorted[lo..hi]
            .iter()
            .copied()
            .filter(|p| cube.contains(p))
            .collect()
    };
    let pattern = in_cube(k);

    // Any translate maps a pattern point onto a point of D.
    let mut candidates: Vec<Vec<f64>> = match pattern.first() {
        Some(p0) => sorted
            .iter()
            .map(|q| q.iter().zip(*p0).map(|(a, b)| a - b).collect())
            .collect(),
        None => {
            let mut all: Vec<Vec<f64>> = vec![vec![0.0; d.dim()]];
            for q in &sorted {
                for p in &sorted {
                    all.push(q.iter().zip(*p).map(|(a, b)| a - b).collect());
                }
            }
            all.sort_by(|a, b| lex_cmp(a, b));
            all.dedup_by(|a, b| sup_dist(a, b) <= PATTERN_TOL);
            all
        }
    };
    candidates.retain(|y| search_window.contains_cube(&k.translated(y)));

    let mut witnesses = Vec::new();
    for y in candidates {
        let image = in_cube(&k.translated(&y));
        if image.len() != pattern.len() {
            continue;
        }
        let matches = pattern.iter().all(|p| {
            let shifted: Vec<f64> = p.iter().zip(&y).map(|(a, b)| a + b).collect();
            image.iter().any(|q| sup_dist(q, &shifted) <= PATTERN_TOL)
        });
        if matches {
            witnesses.push(y);
        }
    }
    Ok(PatternTranslates {
        count: witnesses.len(),
        witnesses,
    })
}

/// `ℓℤ^d`-periodic tiling by translates of `D ∩ Λ_ℓ(0)`, restricted to
/// `out_window`.
pub fn periodize(d: &PointSet, ell: f64, out_window: &Cube) -> Result<PointSet> {
    if !(ell > 0.0) {
        return invalid(format!("period must be positive, got {ell}"));
    }
    if out_window.dim() != d.dim() {
        return invalid("output window dimension mismatch");
    }
    let cell = Cube::centred(d.dim(), ell)?;
    if !d.window().contains_cube(&cell) {
        return Err(Error::WindowTooSmall(format!(
            "patch window does not contain Λ_{ell}(0)"
        )));
    }
    let tile = d.restricted_to(&cell);
    if tile.is_empty() {
        return Err(Error::EmptyInput(format!(
            "D ∩ Λ_{ell}(0) is empty; the periodization would not be relatively dense"
        )));
    }
    let ranges: Vec<(i64, i64)> = (0..d.dim())
        .map(|a| {
            (
                ((out_window.lower(a) - 0.5 * ell) / ell).floor() as i64,
                ((out_window.upper(a) + 0.5 * ell) / ell).ceil() as i64,
            )
        })
        .collect();
    let mut coords = Vec::new();
    let mut push = |shift: &[f64]| {
        for p in &tile {
            let q: Vec<f64> = p.iter().zip(shift).map(|(a, b)| a + b).collect();
            if out_window.contains(&q) {
                coords.extend(q);
            }
        }
    };
    match ranges.as_slice() {
        [(lo, hi)] => {
            for i in *lo..=*hi {
                push(&[i as f64 * ell]);
            }
        }
        [(xlo, xhi), (ylo, yhi)] => {
            for j in *ylo..=*yhi {
                for i in *xlo..=*xhi {
                    push(&[i as f64 * ell, j as f64 * ell]);
                }
            }
        }
        _ => unreachable!(),
    }
    PointSet::from_coords(d.dim(), coords, out_window.clone())
}

/// Shifts every point and the window by `shift`; parameters are kept.
pub fn translate(d: &PointSet, shift: &[f64]) -> Result<PointSet> {
    if shift.len() != d.dim() {
        return invalid("shift dimension mismatch");
    }
    let coords = d
        .points()
        .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>())
        .collect();
    Ok(PointSet::from_coords(d.dim(), coords, d.window().translated(shift))?
        .with_params_unchecked(d.params()))
}

/// One cell `Λ_M(x + Mk)` of a [`box_decomposition`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubBox {
    pub index: Vec<i64>,
    pub centre: Vec<f64>,
}

/// Splits `Λ_L(x)` into `ℓ^d` cubes of side `M`, `ℓ = L/M` odd. Cells are
/// listed with the first coordinate varying fastest.
pub fn box_decomposition(big_l: f64, m: f64, x: &[f64]) -> Result<Vec<SubBox>> {
    if !(big_l > 0.0 && m > 0.0) {
        return invalid("need L > 0 and M > 0");
    }
    let q = big_l / m;
    let ell = q.round();
    if (q - ell).abs() > 1e-9 || ell < 1.0 || (ell as i64) % 2 == 0 {
        return invalid(format!("L/M = {q} is not an odd natural number"));
    }
    let half = (ell as i64 - 1) / 2;
    let mut out = Vec::new();
    match x.len() {
        1 => {
            for i in -half..=half {
                out.push(SubBox {
                    index: vec![i],
                    centre: vec![x[0] + m * i as f64],
                });
            }
        }
        2 => {
            for j in -half..=half {
                for i in -half..=half {
                    out.push(SubBox {
                        index: vec![i, j],
                        centre: vec![x[0] + m * i as f64, x[1] + m * j as f64],
                    });
                }
            }
        }
        d => return invalid(format!("dimension must be 1 or 2, got {d}")),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_lattice, generate_perturbed_lattice};
    use crate::rng::seeded;

    fn set1(points: &[f64], centre: f64, side: f64) -> PointSet {
        let pts: Vec<[f64; 1]> = points.iter().map(|&x| [x]).collect();
        PointSet::from_points(1, &pts, Cube::new(vec![centre], side).unwrap()).unwrap()
    }

    #[test]
    fn hausdorff_examples() {
        let a = set1(&[0.0], 0.0, 10.0);
        let b = set1(&[3.0], 0.0, 10.0);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 3.0);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let c = set1(&[0.0, 1.0], 0.0, 10.0);
        assert_eq!(hausdorff_distance(&c, &a).unwrap(), 1.0);
        let empty = set1(&[], 0.0, 10.0);
        assert!(hausdorff_distance(&a, &empty).is_err());
    }

    #[test]
    fn constant_sequence_converges_everywhere() {
        let z = generate_lattice(1, 1.0, &Cube::new(vec![0.0], 30.0).unwrap()).unwrap();
        let seq = vec![z.clone(); 5];
        let rep = patch_convergence_check(&seq, &z, 3.0, 1e-9).unwrap();
        assert!(rep.l_found.is_some());
        assert!(rep.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn disjoint_patches_never_converge() {
        let a = set1(&[-5.0, 5.0], 0.0, 30.0);
        let b = set1(&[0.0], 0.0, 30.0);
        let rep = patch_convergence_check(&[a.clone(), a], &b, 1.0, 0.1).unwrap();
        assert!(rep.l_found.is_none());
    }

    #[test]
    fn convergence_check_needs_room() {
        let a = set1(&[0.0], 0.0, 2.0);
        assert!(matches!(
            patch_convergence_check(std::slice::from_ref(&a), &a, 2.0, 0.1),
            Err(Error::WindowTooSmall(_))
        ));
    }

    #[test]
    fn integer_translates() {
        let z = generate_lattice(1, 1.0, &Cube::new(vec![0.0], 20.0).unwrap()).unwrap();
        let k = Cube::new(vec![0.0], 1.0).unwrap();
        let rep = count_pattern_translates(&z, &k, z.window()).unwrap();
        assert!(rep.count >= 18, "count {}", rep.count);
        assert!(rep.witnesses.iter().any(|y| y[0] == 0.0));
    }

    #[test]
    fn generic_perturbation_has_only_trivial_translate() {
        let w = Cube::new(vec![0.0], 40.0).unwrap();
        let d = generate_perturbed_lattice(1, 0.3, &w, &mut seeded(17)).unwrap();
        let k = Cube::new(vec![0.0], 3.0).unwrap();
        let rep = count_pattern_translates(&d, &k, &w).unwrap();
        assert_eq!(rep.count, 1);
        assert_eq!(rep.witnesses[0], vec![0.0]);
    }

    #[test]
    fn periodize_examples() {
        let d = set1(&[0.3, 1.7, 5.2], 0.0, 12.0);
        let out = Cube::new(vec![0.0], 10.0).unwrap();
        let p = periodize(&d, 2.0, &out).unwrap();
        for q in p.points() {
            let r = (q[0] - 0.3).rem_euclid(2.0);
            assert!(r < 1e-12 || (2.0 - r) < 1e-12, "{q:?}");
        }
        assert_eq!(p.len(), 5);

        let z = generate_lattice(1, 1.0, &Cube::new(vec![0.0], 20.0).unwrap()).unwrap();
        let zp = periodize(&z, 1.0, z.window()).unwrap();
        assert_eq!(zp.coords(), z.coords());

        let gap = set1(&[3.0], 0.0, 12.0);
        assert!(periodize(&gap, 2.0, &out).is_err());
    }

    #[test]
    fn translate_roundtrip() {
        let d = set1(&[0.3, 1.7], 0.0, 12.0);
        let there = translate(&d, &[2.5]).unwrap();
        let back = translate(&there, &[-2.5]).unwrap();
        assert!(hausdorff_distance(&back, &d).unwrap() < 1e-12);
        assert_eq!(back.window().side(), d.window().side());
        assert_eq!(translate(&d, &[0.0]).unwrap(), d);
    }

    #[test]
    fn decomposition_examples() {
        let c = box_decomposition(3.0, 1.0, &[0.0]).unwrap();
        let centres: Vec<f64> = c.iter().map(|b| b.centre[0]).collect();
        assert_eq!(centres, vec![-1.0, 0.0, 1.0]);
        assert_eq!(box_decomposition(15.0, 5.0, &[0.0, 0.0]).unwrap().len(), 9);
        assert!(box_decomposition(4.0, 2.0, &[0.0]).is_err());
        assert!(box_decomposition(4.5, 2.0, &[0.0]).is_err());
    }
}
