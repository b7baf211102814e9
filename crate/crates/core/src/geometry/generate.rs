use std::collections::BTreeMap;

use rand::Rng;

use super::{euclid, lex_cmp, Cube, DeloneParams, DelonePair, FreeSiteSplit, PointSet, TOL};
use crate::error::{invalid, Error, Result};

/// Integer ranges `[lo, hi]` of multiples of `a` inside the open window, per axis.
fn lattice_ranges(window: &Cube, a: f64) -> Vec<(i64, i64)> {
    (0..window.dim())
        .map(|axis| {
            let lo = (window.lower(axis) / a).ceil() as i64;
            let hi = (window.upper(axis) / a).floor() as i64;
            (lo, hi)
        })
        .collect()
}

fn for_each_lattice_point(window: &Cube, a: f64, mut f: impl FnMut(&[f64])) {
    let ranges = lattice_ranges(window, a);
    match ranges.as_slice() {
        [(lo, hi)] => {
            for i in *lo..=*hi {
                let p = [i as f64 * a];
                if window.contains(&p) {
                    f(&p);
                }
            }
        }
        [(xlo, xhi), (ylo, yhi)] => {
            for j in *ylo..=*yhi {
                for i in *xlo..=*xhi {
                    let p = [i as f64 * a, j as f64 * a];
                    if window.contains(&p) {
                        f(&p);
                    }
                }
            }
        }
        _ => unreachable!("dimension checked by caller"),
    }
}

fn check_dim(dim: usize, window: &Cube) -> Result<()> {
    if !(1..=2).contains(&dim) || window.dim() != dim {
        return invalid(format!(
            "dimension must be 1 or 2 and match the window (got {dim} vs {})",
            window.dim()
        ));
    }
    Ok(())
}

/// `aℤ^d ∩ window`, claimed as `(a, 2a)`-Delone.
pub fn generate_lattice(dim: usize, spacing: f64, window: &Cube) -> Result<PointSet> {
    check_dim(dim, window)?;
    if !(spacing > 0.0) {
        return invalid(format!("lattice spacing must be positive, got {spacing}"));
    }
    let mut coords = Vec::new();
    for_each_lattice_point(window, spacing, |p| coords.extend_from_slice(p));
    Ok(PointSet::from_coords(dim, coords, window.clone())?.with_params_unchecked(Some(
        DeloneParams {
            r: spacing,
            big_r: Some(2.0 * spacing),
        },
    )))
}

/// Random displacement of `ℤ^d`: one point `γ + ω_γ` per `γ ∈ ℤ^d ∩ window`
/// with `ω_γ` uniform in `Λ_{1-ρ}(0)`. Displaced points leaving the window
/// closure are dropped. Claimed parameters are `(ρ, 2-ρ)`.
pub fn generate_perturbed_lattice<R: Rng + ?Sized>(
    dim: usize,
    rho: f64,
    window: &Cube,
    rng: &mut R,
) -> Result<PointSet> {
    check_dim(dim, window)?;
    if !(rho > 0.0 && rho < 0.5) {
        return invalid(format!("rho must lie in (0, 1/2), got {rho}"));
    }
    let half = 0.5 * (1.0 - rho);
    let mut coords = Vec::new();
    for_each_lattice_point(window, 1.0, |g| {
        let p: Vec<f64> = g
            .iter()
            .map(|&x| x + rng.random_range(-half..half))
            .collect();
        if window.contains_closed(&p) {
            coords.extend_from_slice(&p);
        }
    });
    Ok(
        PointSet::from_coords(dim, coords, window.clone())?.with_params_unchecked(Some(
            DeloneParams {
                r: rho,
                big_r: Some(2.0 - rho),
            },
        )),
    )
}

/// Keeps each point independently with probability `keep_prob`. Uniform
/// discreteness survives with the same `r`; relative denseness is unknown.
pub fn thin_by_percolation<R: Rng + ?Sized>(
    ps: &PointSet,
    keep_prob: f64,
    rng: &mut R,
) -> Result<PointSet> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return invalid(format!("keep probability must lie in (0, 1], got {keep_prob}"));
    }
    let mut coords = Vec::with_capacity(ps.coords().len());
    for p in ps.points() {
        if rng.random::<f64>() < keep_prob {
            coords.extend_from_slice(p);
        }
    }
    let params = ps.params().map(|p| DeloneParams {
        r: p.r,
        big_r: None,
    });
    Ok(PointSet::from_coords(ps.dim(), coords, ps.window().clone())?.with_params_unchecked(params))
}

/// For each `γ ∈ D` draws `γ'` uniformly in `Λ_{r/2}(γ) \ Λ_{r/4}(γ)`.
///
/// `D'` gets the window of `D` enlarged by `r/2` so that every `γ'` lies in its
/// closure. The union is claimed `(r/8, R)`-Delone: `γ'` may sit at sup-distance
/// `r/8` from `γ`.
pub fn make_delone_pair<R: Rng + ?Sized>(base: &PointSet, rng: &mut R) -> Result<DelonePair> {
    let Some(DeloneParams { r, big_r: Some(big_r) }) = base.params() else {
        return invalid("make_delone_pair needs a base set with claimed (r, R)");
    };
    let outer = 0.25 * r;
    let inner = 0.125 * r;
    let mut coords = Vec::with_capacity(base.coords().len());
    for g in base.points() {
        let offset: Vec<f64> = loop {
            let u: Vec<f64> = g.iter().map(|_| rng.random_range(-outer..outer)).collect();
            if u.iter().any(|c| c.abs() >= inner) {
                break u;
            }
        };
        coords.extend(g.iter().zip(&offset).map(|(x, o)| x + o));
    }
    let window = base.window().resized(0.5 * r);
    let extra = PointSet::from_coords(base.dim(), coords, window)?
        .with_params_unchecked(Some(DeloneParams { r: 0.5 * r, big_r: Some(big_r + 0.5 * r) }));
    Ok(DelonePair {
        base: base.clone(),
        extra,
        union_params: DeloneParams {
            r: 0.125 * r,
            big_r: Some(big_r),
        },
    })
}

/// Picks, for every `z ∈ (2R'ℤ)^d` whose cell `Λ_{R'}(z)` lies in the window,
/// the point of `D' ∩ Λ_{R'}(z)` closest to `z` (ties: lexicographically
/// smallest). The picks form `D₀`, the rest are the free sites `S`.
pub fn free_sites_split(dprime: &PointSet, r_prime: f64) -> Result<FreeSiteSplit> {
    if !(r_prime > 0.0) {
        return invalid(format!("R' must be positive, got {r_prime}"));
    }
    let dim = dprime.dim();
    let spacing = 2.0 * r_prime;
    let window = dprime.window();

    // lattice indices whose cell fits in the window
    let ranges: Vec<(i64, i64)> = (0..dim)
        .map(|a| {
            let lo = ((window.lower(a) + 0.5 * r_prime - TOL) / spacing).ceil() as i64;
            let hi = ((window.upper(a) - 0.5 * r_prime + TOL) / spacing).floor() as i64;
            (lo, hi)
        })
        .collect();

    let mut best: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (idx, p) in dprime.points().enumerate() {
        let key: Vec<i64> = p.iter().map(|x| (x / spacing).round() as i64).collect();
        if key
            .iter()
            .zip(&ranges)
            .any(|(k, (lo, hi))| k < lo || k > hi)
        {
            continue;
        }
        let z: Vec<f64> = key.iter().map(|&k| k as f64 * spacing).collect();
        let cell = Cube::new(z.clone(), r_prime)?;
        if !cell.contains(p) {
            continue;
        }
        match best.get(&key) {
            Some(&cur) => {
                let q = dprime.point(cur);
                let (dp, dq) = (euclid(p, &z), euclid(q, &z));
                if dp < dq || (dp == dq && lex_cmp(p, q).is_lt()) {
                    best.insert(key, idx);
                }
            }
            None => {
                best.insert(key, idx);
            }
        }
    }

    let mut keys: Vec<Vec<i64>> = vec![Vec::new()];
    for &(lo, hi) in &ranges {
        keys = keys
            .into_iter()
            .flat_map(|k| {
                (lo..=hi).map(move |i| {
                    let mut k = k.clone();
                    k.push(i);
                    k
                })
            })
            .collect();
    }
    let mut chosen = vec![false; dprime.len()];
    let mut d0 = Vec::new();
    let mut generators = Vec::new();
    for key in keys {
        let z: Vec<f64> = key.iter().map(|&k| k as f64 * spacing).collect();
        match best.get(&key) {
            Some(&i) => {
                chosen[i] = true;
                d0.extend_from_slice(dprime.point(i));
                generators.push(z);
            }
            None => {
                return Err(Error::NotRelativelyDense {
                    radius: r_prime,
                    cell: z,
                })
            }
        }
    }
    let s: Vec<f64> = dprime
        .points()
        .zip(&chosen)
        .filter(|(_, &c)| !c)
        .flat_map(|(p, _)| p.iter().copied())
        .collect();
    let d0 = PointSet::from_coords(dim, d0, window.clone())?.with_params_unchecked(Some(
        DeloneParams {
            r: r_prime,
            big_r: Some(3.0 * r_prime),
        },
    ));
    let s = PointSet::from_coords(dim, s, window.clone())?
        .with_params_unchecked(dprime.params().map(|p| DeloneParams { r: p.r, big_r: None }));
    Ok(FreeSiteSplit {
        d0,
        s,
        r_prime,
        generators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sup_dist, verify_delone};
    use crate::rng::seeded;

    fn win1(side: f64) -> Cube {
        Cube::new(vec![0.0], side).unwrap()
    }

    #[test]
    fn lattice_examples() {
        let z = generate_lattice(1, 1.0, &win1(5.0)).unwrap();
        assert_eq!(z.coords(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let z2 = generate_lattice(2, 2.0, &Cube::new(vec![0.0, 0.0], 6.0).unwrap()).unwrap();
        assert_eq!(z2.len(), 9);
        let single = generate_lattice(1, 1.0, &win1(0.8)).unwrap();
        assert_eq!(single.coords(), &[0.0]);
        assert_eq!(z.params().unwrap().big_r, Some(2.0));
    }

    #[test]
    fn lattice_verifies_for_many_spacings() {
        for &a in &[0.1, 0.37, 1.0, 2.5, 7.0] {
            let w = Cube::new(vec![0.3, -0.2], 40.0 * a).unwrap();
            let z = generate_lattice(2, a, &w).unwrap();
            let rep = verify_delone(&z, a, 2.0 * a).unwrap();
            assert!(rep.uniform_discrete && rep.relatively_dense, "a = {a}: {rep:?}");
        }
    }

    #[test]
    fn perturbed_lattice_verifies() {
        for dim in 1..=2 {
            let w = Cube::new(vec![0.0; dim], 30.0).unwrap();
            let ps = generate_perturbed_lattice(dim, 0.3, &w, &mut seeded(11)).unwrap();
            let rep = verify_delone(&ps, 0.3, 1.7).unwrap();
            assert!(rep.uniform_discrete && rep.relatively_dense, "{rep:?}");
        }
    }

    #[test]
    fn perturbed_lattice_is_reproducible() {
        let w = win1(6.0);
        let a = generate_perturbed_lattice(1, 0.3, &w, &mut seeded(2024)).unwrap();
        let b = generate_perturbed_lattice(1, 0.3, &w, &mut seeded(2024)).unwrap();
        assert_eq!(a, b);
        let empty = generate_perturbed_lattice(1, 0.3, &win1(0.0), &mut seeded(1)).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn percolation_identity_at_one() {
        let z = generate_lattice(1, 1.0, &win1(50.0)).unwrap();
        let kept = thin_by_percolation(&z, 1.0, &mut seeded(3)).unwrap();
        assert_eq!(kept.coords(), z.coords());
        assert_eq!(kept.params().unwrap().big_r, None);
        assert!(thin_by_percolation(&z, 0.0, &mut seeded(3)).is_err());
    }

    #[test]
    fn pair_offsets_lie_in_annulus() {
        let z = generate_lattice(1, 1.0, &win1(40.0)).unwrap();
        let pair = make_delone_pair(&z, &mut seeded(5)).unwrap();
        assert_eq!(pair.extra.len(), z.len());
        for (g, gp) in z.points().zip(pair.extra.points()) {
            let d = sup_dist(g, gp);
            assert!((0.125..0.25).contains(&d), "offset {d}");
        }
        let union = pair.union().unwrap();
        let p = pair.union_params;
        let rep = verify_delone(&union, p.r, p.big_r.unwrap()).unwrap();
        assert!(rep.uniform_discrete && rep.relatively_dense, "{rep:?}");
    }

    #[test]
    fn free_sites_of_integers() {
        let z = generate_lattice(1, 1.0, &win1(20.0)).unwrap();
        let split = free_sites_split(&z, 1.0).unwrap();
        assert!(split.d0.points().all(|p| (p[0] / 2.0).fract() == 0.0));
        assert!(split.s.points().all(|p| (p[0].rem_euclid(2.0) - 1.0).abs() < 1e-12));
        assert_eq!(split.d0.len() + split.s.len(), z.len());
    }

    #[test]
    fn free_sites_missing_cell_errors() {
        let pts = [[-6.0], [-4.0], [-2.0], [2.0], [4.0], [6.0]];
        let ps = PointSet::from_points(1, &pts, win1(14.0)).unwrap();
        match free_sites_split(&ps, 1.0) {
            Err(Error::NotRelativelyDense { cell, .. }) => assert_eq!(cell, vec![0.0]),
            other => panic!("expected missing-cell error, got {other:?}"),
        }
    }
}
