//! Finite patches of Delone point sets.
//!
//! A [`PointSet`] is a finite list of points in dimension one or two together
//! with the open observation window on which the patch is complete. All cube
//! membership tests use the open-cube convention `Λ_L(x) = Π (x_j - L/2, x_j + L/2)`
//! with a tolerance of [`TOL`].

mod generate;
mod io;
mod patterns;
mod verify;

pub use generate::{
    free_sites_split, generate_lattice, generate_perturbed_lattice, make_delone_pair,
    thin_by_percolation,
};
pub use io::{parse_point_set, read_point_set, write_point_set};
pub use patterns::{
    box_decomposition, count_pattern_translates, hausdorff_distance, patch_convergence_check,
    periodize, translate, PatchConvergenceReport, PatternTranslates, SubBox,
};
pub use verify::{verify_delone, DeloneReport};

use serde::Serialize;

use crate::error::{invalid, Result};

/// Tolerance used for strict cube membership.
pub const TOL: f64 = 1e-12;

/// Axis-aligned open cube `Λ_side(centre)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cube {
    centre: Vec<f64>,
    side: f64,
}

impl Cube {
    pub fn new(centre: Vec<f64>, side: f64) -> Result<Self> {
        if centre.is_empty() {
            return invalid("cube centre must have at least one coordinate");
        }
        if !(side >= 0.0) || !side.is_finite() {
            return invalid(format!("cube side must be finite and non-negative, got {side}"));
        }
        if centre.iter().any(|c| !c.is_finite()) {
            return invalid("cube centre must be finite");
        }
        Ok(Cube { centre, side })
    }

    /// Cube of side `side` centred at the origin of `R^dim`.
    pub fn centred(dim: usize, side: f64) -> Result<Self> {
        Cube::new(vec![0.0; dim], side)
    }

    pub fn dim(&self) -> usize {
        self.centre.len()
    }

    pub fn centre(&self) -> &[f64] {
        &self.centre
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn half(&self) -> f64 {
        0.5 * self.side
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.centre[axis] - self.half()
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.centre[axis] + self.half()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    /// Strict membership in the open cube.
    pub fn contains(&self, p: &[f64]) -> bool {
        let h = self.half();
        self.centre
            .iter()
            .zip(p)
            .all(|(c, x)| (x - c).abs() < h - TOL)
    }

    /// Membership in the closed cube.
    pub fn contains_closed(&self, p: &[f64]) -> bool {
        let h = self.half();
        self.centre
            .iter()
            .zip(p)
            .all(|(c, x)| (x - c).abs() <= h + TOL)
    }

    /// `other ⊆ closure(self)`.
    pub fn contains_cube(&self, other: &Cube) -> bool {
        (0..self.dim()).all(|a| {
            other.lower(a) >= self.lower(a) - TOL && other.upper(a) <= self.upper(a) + TOL
        })
    }

    /// Same centre, side changed by `delta` (negative shrinks).
    pub fn resized(&self, delta: f64) -> Cube {
        Cube {
            centre: self.centre.clone(),
            side: (self.side + delta).max(0.0),
        }
    }

    pub fn translated(&self, shift: &[f64]) -> Cube {
        Cube {
            centre: self.centre.iter().zip(shift).map(|(c, s)| c + s).collect(),
            side: self.side,
        }
    }

    /// Largest `L` with `Λ_L(0) ⊆ closure(self)`, or a negative number when
    /// the origin lies outside.
    pub fn largest_centred_side(&self) -> f64 {
        let h = self.half();
        2.0 * self
            .centre
            .iter()
            .map(|c| h - c.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Claimed Delone parameters. `big_r` is `None` when relative denseness is
/// unknown (e.g. after percolation thinning).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeloneParams {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
}

/// A finite patch of a (candidate) Delone set.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    window: Cube,
    params: Option<DeloneParams>,
}

impl PointSet {
    /// Builds a patch from flat coordinates. Points must lie in the closed
    /// window; points within `1e-12` of an earlier point are dropped.
    pub fn from_coords(dim: usize, coords: Vec<f64>, window: Cube) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return invalid(format!("dimension must be 1 or 2, got {dim}"));
        }
        if window.dim() != dim {
            return invalid(format!(
                "window has dimension {}, points have dimension {dim}",
                window.dim()
            ));
        }
        if !coords.len().is_multiple_of(dim) {
            return invalid("coordinate count is not a multiple of the dimension");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        for p in coords.chunks_exact(dim) {
            if !window.contains_closed(p) {
                return invalid(format!("point {p:?} lies outside the window closure"));
            }
        }
        let coords = dedup(dim, coords);
        Ok(PointSet {
            dim,
            coords,
            window,
            params: None,
        })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P], window: Cube) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return invalid(format!("point {p:?} does not have dimension {dim}"));
            }
            coords.extend_from_slice(p);
        }
        PointSet::from_coords(dim, coords, window)
    }

    pub fn empty(window: Cube) -> Result<Self> {
        PointSet::from_coords(window.dim(), Vec::new(), window)
    }

    /// Attaches claimed parameters after checking them with [`verify_delone`].
    /// Relative denseness is only checked when `big_r` is given.
    pub fn claim_params(mut self, params: DeloneParams) -> Result<Self> {
        let check_r = params.big_r.unwrap_or(params.r);
        let report = verify_delone(&self, params.r, check_r)?;
        if !report.uniform_discrete || (params.big_r.is_some() && !report.relatively_dense) {
            return invalid(format!(
                "patch does not verify as ({}, {:?})-Delone: {report:?}",
                params.r, params.big_r
            ));
        }
        self.params = Some(params);
        Ok(self)
    }

    pub(crate) fn with_params_unchecked(mut self, params: Option<DeloneParams>) -> Self {
        self.params = params;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn window(&self) -> &Cube {
        &self.window
    }

    pub fn params(&self) -> Option<DeloneParams> {
        self.params
    }

    /// Points strictly inside `cube`, in patch order.
    pub fn restricted_to(&self, cube: &Cube) -> Vec<&[f64]> {
        self.points().filter(|p| cube.contains(p)).collect()
    }

    /// The patch `self ∩ cube` with `cube` as its new window.
    pub fn intersect(&self, cube: &Cube) -> Result<PointSet> {
        let coords = self
            .points()
            .filter(|p| cube.contains(p))
            .flatten()
            .copied()
            .collect();
        PointSet::from_coords(self.dim, coords, cube.clone())
    }

    /// Union of two patches; the window is the smallest cube containing both
    /// windows' closures when they differ.
    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return invalid("cannot unite point sets of different dimension");
        }
        let window = if self.window.contains_cube(&other.window) {
            self.window.clone()
        } else if other.window.contains_cube(&self.window) {
            other.window.clone()
        } else {
            bounding_cube(&self.window, &other.window)
        };
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        PointSet::from_coords(self.dim, coords, window)
    }
}

fn bounding_cube(a: &Cube, b: &Cube) -> Cube {
    let dim = a.dim();
    let lo: Vec<f64> = (0..dim).map(|i| a.lower(i).min(b.lower(i))).collect();
    let hi: Vec<f64> = (0..dim).map(|i| a.upper(i).max(b.upper(i))).collect();
    let side = (0..dim).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let centre = (0..dim).map(|i| 0.5 * (lo[i] + hi[i])).collect();
    Cube { centre, side }
}

fn dedup(dim: usize, coords: Vec<f64>) -> Vec<f64> {
    let n = coords.len() / dim;
    let pt = |i: usize| &coords[i * dim..(i + 1) * dim];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(pt(a), pt(b)));
    let mut drop = vec![false; n];
    for (pos, &i) in order.iter().enumerate() {
        if drop[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if pt(j)[0] - pt(i)[0] > TOL {
                break;
            }
            if drop[j] || euclid(pt(i), pt(j)) > TOL {
                continue;
            }
            // keep whichever came first in input order
            if j > i {
                drop[j] = true;
            } else {
                drop[i] = true;
                break;
            }
        }
    }
    (0..n)
        .filter(|&i| !drop[i])
        .flat_map(|i| pt(i).iter().copied())
        .collect()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `(D, D')` with `D'' = D ∪ D'` again Delone.
#[derive(Clone, Debug)]
pub struct DelonePair {
    pub base: PointSet,
    pub extra: PointSet,
    pub union_params: DeloneParams,
}

impl DelonePair {
    pub fn union(&self) -> Result<PointSet> {
        Ok(self
            .base
            .union(&self.extra)?
            .with_params_unchecked(Some(self.union_params)))
    }
}

/// Split of `D'` into a skeleton `D₀` (one point per cell of `(2R'ℤ)^d`) and
/// the free sites `S = D' \ D₀`.
#[derive(Clone, Debug)]
pub struct FreeSiteSplit {
    pub d0: PointSet,
    pub s: PointSet,
    pub r_prime: f64,
    /// Lattice point `z` that generated each point of `d0`, in `d0` order.
    pub generators: Vec<Vec<f64>>,
}

impl FreeSiteSplit {
    /// Radius of relative denseness `R₀ = 3R'` of the skeleton.
    pub fn r0(&self) -> f64 {
        3.0 * self.r_prime
    }
}
