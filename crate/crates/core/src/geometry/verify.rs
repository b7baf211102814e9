use serde::Serialize;

use super::{lex_cmp, sup_dist, Cube, PointSet, TOL};
use crate::error::{invalid, Error, Result};

/// Outcome of [`verify_delone`].
///
/// Relative denseness is only certified on `test_region`, the window shrunk
/// by `R/2` on each side; cubes reaching outside the window cannot be
/// decided from a finite patch.
#[derive(Clone, Debug, Serialize)]
pub struct DeloneReport {
    pub uniform_discrete: bool,
    pub relatively_dense: bool,
    /// Centre of an open cube of side `r` holding two points.
    pub discreteness_witness: Option<Vec<f64>>,
    /// Centre of an open cube of side `R` holding no point.
    pub density_witness: Option<Vec<f64>>,
    /// Smallest pairwise sup-norm distance, `None` for fewer than two points.
    pub min_sup_distance: Option<f64>,
    pub test_region: Cube,
}

/// Checks the `(r, R)`-Delone conditions on a finite patch.
pub fn verify_delone(ps: &PointSet, r: f64, big_r: f64) -> Result<DeloneReport> {
    if ps.is_empty() {
        return Err(Error::EmptyInput("verify_delone needs a non-empty patch".into()));
    }
    if !(r > 0.0 && r <= big_r) {
        return invalid(format!("need 0 < r <= R, got r = {r}, R = {big_r}"));
    }
    if ps.window().side() <= 2.0 * big_r {
        return Err(Error::WindowTooSmall(format!(
            "window side {} must exceed 2R = {}",
            ps.window().side(),
            2.0 * big_r
        )));
    }

    let closest = closest_pair(ps);
    let (uniform_discrete, discreteness_witness, min_sup_distance) = match closest {
        Some((d, a, b)) => {
            let ok = d >= r - TOL;
            let witness = (!ok).then(|| {
                ps.point(a)
                    .iter()
                    .zip(ps.point(b))
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect()
            });
            (ok, witness, Some(d))
        }
        None => (true, None, None),
    };

    let test_region = ps.window().resized(-big_r);
    let density_witness = match ps.dim() {
        1 => uncovered_1d(ps, &test_region, big_r).map(|x| vec![x]),
        _ => uncovered_2d(ps, &test_region, big_r),
    };

    Ok(DeloneReport {
        uniform_discrete,
        relatively_dense: density_witness.is_none(),
        discreteness_witness,
        density_witness,
        min_sup_distance,
        test_region,
    })
}

/// Closest pair in the sup norm: `(distance, i, j)`.
fn closest_pair(ps: &PointSet) -> Option<(f64, usize, usize)> {
    let n = ps.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(ps.point(a), ps.point(b)));
    let mut best = (f64::INFINITY, 0, 0);
    for (pos, &i) in order.iter().enumerate() {
        let pi = ps.point(i);
        for &j in &order[pos + 1..] {
            let pj = ps.point(j);
            if pj[0] - pi[0] >= best.0 {
                break;
            }
            let d = sup_dist(pi, pj);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    Some(best)
}

/// First uncovered point of the open interval `(lo, hi)` by the union of the
/// open intervals `spans` (sorted by left end).
pub(crate) fn first_gap(spans: &[(f64, f64)], lo: f64, hi: f64) -> Option<f64> {
    if hi <= lo {
        return None;
    }
    let mut reach = lo;
    let mut started = false;
    for &(a, b) in spans {
        if b <= reach {
            continue;
        }
        if a >= hi {
            break;
        }
        // `reach` itself is uncovered once we have left the (excluded) start.
        let gap = if started { a >= reach } else { a > reach };
        if gap {
            return Some(if a > reach { 0.5 * (reach + a) } else { reach });
        }
        reach = b;
        started = true;
        if reach >= hi {
            return None;
        }
    }
    Some(0.5 * (reach + hi))
}

fn uncovered_1d(ps: &PointSet, region: &Cube, big_r: f64) -> Option<f64> {
    let half = 0.5 * big_r - TOL;
    let mut spans: Vec<(f64, f64)> = ps.points().map(|p| (p[0] - half, p[0] + half)).collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    first_gap(&spans, region.lower(0), region.upper(0))
}

fn uncovered_2d(ps: &PointSet, region: &Cube, big_r: f64) -> Option<Vec<f64>> {
    let half = 0.5 * big_r - TOL;
    let (x0, x1) = (region.lower(0), region.upper(0));
    let (y0, y1) = (region.lower(1), region.upper(1));
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    let mut pts: Vec<&[f64]> = ps.points().collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();

    // Between consecutive critical abscissae the active set is constant, so
    // the critical lines themselves and one interior abscissa per slab suffice.
    let mut crit: Vec<f64> = pts
        .iter()
        .flat_map(|p| [p[0] - half, p[0] + half])
        .filter(|&c| c > x0 && c < x1)
        .collect();
    crit.push(x0);
    crit.push(x1);
    crit.sort_by(f64::total_cmp);
    crit.dedup();
    let mut samples = Vec::with_capacity(2 * crit.len());
    for w in crit.windows(2) {
        samples.push(0.5 * (w[0] + w[1]));
    }
    samples.extend(crit.iter().copied().filter(|&c| c > x0 && c < x1));

    let mut spans = Vec::new();
    for x in samples {
        let start = xs.partition_point(|&v| v <= x - half);
        let end = xs.partition_point(|&v| v < x + half);
        spans.clear();
        spans.extend(
            pts[start..end]
                .iter()
                .filter(|p| (p[0] - x).abs() < half)
                .map(|p| (p[1] - half, p[1] + half)),
        );
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(y) = first_gap(&spans, y0, y1) {
            return Some(vec![x, y]);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_lattice;

    fn set1(points: &[f64], centre: f64, side: f64) -> PointSet {
        let pts: Vec<[f64; 1]> = points.iter().map(|&x| [x]).collect();
        PointSet::from_points(1, &pts, Cube::new(vec![centre], side).unwrap()).unwrap()
    }

    #[test]
    fn integer_lattice_is_delone() {
        let z = generate_lattice(1, 1.0, &Cube::new(vec![0.0], 20.0).unwrap()).unwrap();
        let rep = verify_delone(&z, 1.0, 2.0).unwrap();
        assert!(rep.uniform_discrete && rep.relatively_dense, "{rep:?}");
    }

    #[test]
    fn close_points_fail_discreteness() {
        let ps = set1(&[0.0, 0.3], 0.0, 10.0);
        let rep = verify_delone(&ps, 1.0, 1.0).unwrap();
        assert!(!rep.uniform_discrete);
        let w = rep.discreteness_witness.unwrap();
        assert!((w[0] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn large_gap_fails_density() {
        let ps = set1(&[0.0, 5.0], 2.5, 7.0);
        let rep = verify_delone(&ps, 1.0, 2.0).unwrap();
        assert!(!rep.relatively_dense);
        let w = rep.density_witness.unwrap();
        assert!((w[0] - 2.5).abs() < 1e-9, "{w:?}");
    }

    #[test]
    fn small_window_is_an_error() {
        let ps = set1(&[0.0], 0.0, 3.0);
        assert!(matches!(
            verify_delone(&ps, 1.0, 2.0),
            Err(Error::WindowTooSmall(_))
        ));
    }

    #[test]
    fn touching_open_cubes_leave_a_gap() {
        // Λ_1 cubes around the integers miss the half-integers.
        let z = generate_lattice(1, 1.0, &Cube::new(vec![0.0], 20.0).unwrap()).unwrap();
        let rep = verify_delone(&z, 1.0, 1.0).unwrap();
        assert!(!rep.relatively_dense);
    }

    #[test]
    fn planar_lattice_and_hole() {
        let w = Cube::new(vec![0.0, 0.0], 12.0).unwrap();
        let z2 = generate_lattice(2, 1.0, &w).unwrap();
        let rep = verify_delone(&z2, 1.0, 2.0).unwrap();
        assert!(rep.uniform_discrete && rep.relatively_dense);

        let holed: Vec<&[f64]> = z2
            .points()
            .filter(|p| p[0].abs() + p[1].abs() > 1.5)
            .collect();
        let ps = PointSet::from_points(2, &holed, w).unwrap();
        let rep = verify_delone(&ps, 1.0, 2.0).unwrap();
        assert!(!rep.relatively_dense);
        let x = rep.density_witness.unwrap();
        assert!(ps.points().all(|p| sup_dist(p, &x) >= 1.0 - 1e-9));
    }

    #[test]
    fn gap_scan() {
        assert_eq!(first_gap(&[(-1.0, 1.0), (0.5, 3.0)], 0.0, 2.0), None);
        assert_eq!(first_gap(&[(-1.0, 1.0), (1.0, 3.0)], 0.0, 2.0), Some(1.0));
        assert_eq!(first_gap(&[(0.5, 3.0)], 0.0, 2.0), Some(0.25));
        assert_eq!(first_gap(&[(0.0, 3.0)], 0.0, 2.0), None);
    }
}
