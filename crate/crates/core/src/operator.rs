//! Finite-difference Dirichlet Hamiltonians `-Δ + V` on boxes `Λ_L(x)`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{euclid, lex_cmp, sup_dist, Cube, DelonePair, FreeSiteSplit, PointSet, TOL};
use crate::linalg::SparseSym;

/// Radial shape of the single-site bump, in the sup norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `u₋` on `Λ_{δ₋}`, linear down to 0 at the boundary of `Λ_{δ₊}`.
    Flat,
    /// 1 at the centre, `u₋` on the boundary of `Λ_{δ₋}`, 0 on the boundary
    /// of `Λ_{δ₊}`, linear in between.
    Tent,
}

/// The bump `u` with `u₋ χ_{Λ_{δ₋}} ≤ u ≤ χ_{Λ_{δ₊}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingleSitePotential {
    pub u_minus: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub profile: Profile,
}

impl SingleSitePotential {
    pub fn new(u_minus: f64, delta_minus: f64, delta_plus: f64, profile: Profile) -> Result<Self> {
        if !(u_minus > 0.0 && u_minus <= 1.0) {
            return invalid(format!("u_minus must lie in (0, 1], got {u_minus}"));
        }
        if !(delta_minus > 0.0 && delta_minus < delta_plus && delta_plus.is_finite()) {
            return invalid(format!(
                "need 0 < delta_minus < delta_plus, got {delta_minus}, {delta_plus}"
            ));
        }
        let u = SingleSitePotential {
            u_minus,
            delta_minus,
            delta_plus,
            profile,
        };
        u.check_bounds(4001)?;
        Ok(u)
    }

    /// `u` at displacement `y` from the bump centre.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let r = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.eval_radius(r)
    }

    /// `u` at sup-norm radius `r`.
    pub fn eval_radius(&self, r: f64) -> f64 {
        let (a, b) = (0.5 * self.delta_minus, 0.5 * self.delta_plus);
        if r >= b {
            return 0.0;
        }
        let outer = self.u_minus * (b - r) / (b - a);
        let v = match self.profile {
            Profile::Flat => outer.min(self.u_minus),
            Profile::Tent if r < a => 1.0 - (1.0 - self.u_minus) * r / a,
            Profile::Tent => outer,
        };
        v.min(1.0)
    }

    /// Checks the two-sided bound on `samples` radii spanning `[0, δ₊]`.
    pub fn check_bounds(&self, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        for i in 0..samples {
            let r = self.delta_plus * i as f64 / (samples - 1) as f64;
            let v = self.eval_radius(r);
            let lower = if r < 0.5 * self.delta_minus {
                self.u_minus
            } else {
                0.0
            };
            let upper = if r < 0.5 * self.delta_plus { 1.0 } else { 0.0 };
            if v < lower - 1e-15 || v > upper + 1e-15 {
                return Err(Error::LowerBoundViolated {
                    node: i,
                    position: vec![r],
                    value: v,
                    required: lower,
                });
            }
        }
        Ok(())
    }

    pub fn sup(&self) -> f64 {
        self.eval_radius(0.0)
    }
}

/// Interior nodes of `Λ_L(x)` with spacing `h`; boundary nodes are excluded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    centre: Vec<f64>,
    side: f64,
    h: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(centre: Vec<f64>, side: f64, h: f64) -> Result<Self> {
        let dim = centre.len();
        if !(dim == 1 || dim == 2) {
            return invalid(format!("dimension must be 1 or 2, got {dim}"));
        }
        if !(side > 0.0 && h > 0.0 && side.is_finite()) {
            return invalid(format!("need positive side and spacing, got {side}, {h}"));
        }
        let q = side / h;
        let cells = q.round();
        if (q - cells).abs() > 1e-9 * q.max(1.0) || cells < 2.0 {
            return invalid(format!("L/h = {q} is not an integer >= 2"));
        }
        Ok(GridSpec {
            dim,
            centre,
            side,
            h,
            n: cells as usize - 1,
        })
    }

    /// Grid for `u` with the coarsest admissible spacing `δ₋/(4 refine)`
    /// rounded so that `L/h` is an integer.
    pub fn for_potential(centre: Vec<f64>, side: f64, u: &SingleSitePotential, refine: usize) -> Result<Self> {
        let target = u.delta_minus / (4.0 * refine.max(1) as f64);
        let cells = (side / target).ceil().max(2.0);
        Self::new(centre, side, side / cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centre(&self) -> &[f64] {
        &self.centre
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior nodes per axis.
    pub fn n_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Quadrature weight `hᵈ`.
    pub fn weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn cube(&self) -> Cube {
        Cube::new(self.centre.clone(), self.side).expect("grid box is valid")
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.centre[axis] - 0.5 * self.side + (i + 1) as f64 * self.h
    }

    /// Node index from per-axis indices, first axis fastest.
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|_| {
                let i = node % self.n;
                node /= self.n;
                i
            })
            .collect()
    }

    pub fn node_position(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    /// Per-axis node index range `[lo, hi)` with `|coord - c| < r`.
    pub(crate) fn axis_range(&self, axis: usize, c: f64, r: f64) -> (usize, usize) {
        let origin = self.centre[axis] - 0.5 * self.side;
        // coord(i) = origin + (i+1) h
        let lo = ((c - r - origin) / self.h - 1.0).floor().max(0.0) as usize;
        let hi = (((c + r - origin) / self.h).ceil().max(0.0) as usize).min(self.n);
        let mut lo = lo.min(self.n);
        while lo < hi && self.coord(axis, lo) - c <= -r {
            lo += 1;
        }
        let mut hi = hi;
        while hi > lo && self.coord(axis, hi - 1) - c >= r {
            hi -= 1;
        }
        (lo, hi)
    }

    /// Nodes strictly inside the open cube.
    pub fn nodes_in(&self, cube: &Cube) -> Vec<usize> {
        let half = cube.half() - TOL;
        let ranges: Vec<(usize, usize)> = (0..self.dim)
            .map(|a| self.axis_range(a, cube.centre()[a], half))
            .collect();
        let mut out = Vec::new();
        match self.dim {
            1 => out.extend(ranges[0].0..ranges[0].1),
            _ => {
                for j in ranges[1].0..ranges[1].1 {
                    for i in ranges[0].0..ranges[0].1 {
                        out.push(i + self.n * j);
                    }
                }
            }
        }
        out
    }

    /// Standard `(2d+1)`-point Dirichlet Laplacian `-Δ_h` plus `diag(v)`.
    pub fn laplacian_plus(&self, v: &[f64]) -> Result<SparseSym> {
        if v.len() != self.len() {
            return Err(Error::IndexMismatch(format!(
                "potential has {} samples for {} nodes",
                v.len(),
                self.len()
            )));
        }
        let inv_h2 = 1.0 / (self.h * self.h);
        let n = self.n;
        let mut t = Vec::with_capacity(self.len() * (self.dim + 1));
        for node in 0..self.len() {
            t.push((node, node, 2.0 * self.dim as f64 * inv_h2 + v[node]));
            if node % n > 0 {
                t.push((node, node - 1, -inv_h2));
            }
            if self.dim == 2 && node >= n {
                t.push((node, node - n, -inv_h2));
            }
        }
        SparseSym::from_triplets(self.len(), t)
    }
}

/// Coupling constants on an ordered site list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernoulliConfig {
    dim: usize,
    sites: Vec<f64>,
    values: Vec<f64>,
    /// Defect probability the values were drawn with; `None` for
    /// deterministic free-site parameters.
    beta: Option<f64>,
}

impl BernoulliConfig {
    pub fn new(dim: usize, sites: Vec<f64>, values: Vec<f64>, beta: Option<f64>) -> Result<Self> {
        if dim == 0 || sites.len() != dim * values.len() {
            return Err(Error::IndexMismatch(format!(
                "{} site coordinates for {} values in dimension {dim}",
                sites.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("coupling {v} outside [0, 1]"));
        }
        if let Some(b) = beta {
            if !(b > 0.0 && b < 1.0) {
                return invalid(format!("beta must lie in (0, 1), got {b}"));
            }
        }
        Ok(BernoulliConfig {
            dim,
            sites,
            values,
            beta,
        })
    }

    /// Same value at every point of `ps`.
    pub fn constant(ps: &PointSet, value: f64) -> Result<Self> {
        Self::new(ps.dim(), ps.coords().to_vec(), vec![value; ps.len()], None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.sites[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sites(&self) -> std::slice::ChunksExact<'_, f64> {
        self.sites.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn with_value(&self, i: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        values[i] = value;
        Self::new(self.dim, self.sites.clone(), values, self.beta)
    }
}

/// Independent draws on the points of `sites`: 1 with probability `1 − β`.
pub fn sample_config<R: Rng + ?Sized>(sites: &PointSet, beta: f64, rng: &mut R) -> Result<BernoulliConfig> {
    if !(beta > 0.0 && beta < 1.0) {
        return invalid(format!("beta must lie in (0, 1), got {beta}"));
    }
    let values = (0..sites.len())
        .map(|_| if rng.random::<f64>() < beta { 0.0 } else { 1.0 })
        .collect();
    BernoulliConfig::new(sites.dim(), sites.coords().to_vec(), values, Some(beta))
}

/// `Σ_γ 2^{−‖γ‖} |ω_γ − ω′_γ|` with the Euclidean norm.
pub fn config_metric(a: &BernoulliConfig, b: &BernoulliConfig) -> Result<f64> {
    if a.dim != b.dim || a.sites != b.sites {
        return Err(Error::IndexMismatch("configurations live on different sites".into()));
    }
    let origin = vec![0.0; a.dim];
    Ok(a.sites()
        .zip(a.values.iter().zip(&b.values))
        .map(|(g, (x, y))| 2f64.powf(-euclid(g, &origin)) * (x - y).abs())
        .sum())
}

/// Adds `Σ w_k u(· − p_k)` to the node samples `v`.
pub fn add_bumps<'a, I>(grid: &GridSpec, u: &SingleSitePotential, bumps: I, v: &mut [f64])
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let r = 0.5 * u.delta_plus;
    let n = grid.n_axis();
    for (p, w) in bumps {
        if w == 0.0 {
            continue;
        }
        let rx = grid.axis_range(0, p[0], r);
        if grid.dim() == 1 {
            for i in rx.0..rx.1 {
                v[i] += w * u.eval_radius((grid.coord(0, i) - p[0]).abs());
            }
        } else {
            let ry = grid.axis_range(1, p[1], r);
            for j in ry.0..ry.1 {
                let dy = (grid.coord(1, j) - p[1]).abs();
                for i in rx.0..rx.1 {
                    let dx = (grid.coord(0, i) - p[0]).abs();
                    v[i + n * j] += w * u.eval_radius(dx.max(dy));
                }
            }
        }
    }
}

/// Box from which bump centres can reach the grid.
fn reach_cube(grid: &GridSpec, u: &SingleSitePotential) -> Cube {
    grid.cube().resized(u.delta_plus)
}

fn check_coverage(ps: &PointSet, grid: &GridSpec, u: &SingleSitePotential, what: &str) -> Result<()> {
    if ps.dim() != grid.dim() {
        return invalid(format!("{what} has dimension {}, grid {}", ps.dim(), grid.dim()));
    }
    let need = reach_cube(grid, u);
    if !ps.window().contains_cube(&need) {
        return Err(Error::WindowTooSmall(format!(
            "{what} window of side {} does not cover the grid box dilated by delta_plus (side {})",
            ps.window().side(),
            need.side()
        )));
    }
    Ok(())
}

/// `V_D = Σ_{γ∈D} u(· − γ)` sampled at the nodes.
pub fn assemble_potential(d: &PointSet, u: &SingleSitePotential, grid: &GridSpec) -> Result<Vec<f64>> {
    check_coverage(d, grid, u, "point set")?;
    let reach = reach_cube(grid, u);
    let mut v = vec![0.0; grid.len()];
    add_bumps(grid, u, d.restricted_to(&reach).into_iter().map(|p| (p, 1.0)), &mut v);
    Ok(v)
}

/// Checks that the sites of `cfg` near the grid are exactly the points of
/// `ps` near the grid.
fn check_sites(cfg: &BernoulliConfig, ps: &PointSet, reach: &Cube, what: &str) -> Result<()> {
    if cfg.dim != ps.dim() {
        return Err(Error::IndexMismatch(format!("{what}: dimension mismatch")));
    }
    let mut want = ps.restricted_to(reach);
    let mut have: Vec<&[f64]> = cfg.sites().filter(|s| reach.contains_closed(s)).collect();
    want.sort_by(|a, b| lex_cmp(a, b));
    have.sort_by(|a, b| lex_cmp(a, b));
    let same = want.len() == have.len()
        && want.iter().zip(&have).all(|(a, b)| sup_dist(a, b) <= TOL);
    if !same {
        return Err(Error::IndexMismatch(format!(
            "{what}: configuration lists {} sites near the box, the point set has {}",
            have.len(),
            want.len()
        )));
    }
    Ok(())
}

/// Free-site data for [`assemble_hamiltonian`]: the split of `D′` and the
/// deterministic couplings `t_S` on `S`.
#[derive(Clone, Copy, Debug)]
pub struct FreeSites<'a> {
    pub split: &'a FreeSiteSplit,
    pub t_s: &'a BernoulliConfig,
}

/// `−Δ + V_D + V_{D′ω}` on the grid; with `free`, `omega` lives on `D₀` and
/// the free sites carry `t_S`.
pub fn assemble_hamiltonian(
    pair: &DelonePair,
    u: &SingleSitePotential,
    omega: &BernoulliConfig,
    free: Option<FreeSites<'_>>,
    grid: &GridSpec,
) -> Result<DiscretizedHamiltonian> {
    check_resolution(grid, u)?;
    check_coverage(&pair.extra, grid, u, "D'")?;
    let mut v = assemble_potential(&pair.base, u, grid)?;
    let reach = reach_cube(grid, u);
    let mut random_part = |cfg: &BernoulliConfig| {
        add_bumps(
            grid,
            u,
            cfg.sites()
                .zip(cfg.values.iter().copied())
                .filter(|(s, _)| reach.contains_closed(s)),
            &mut v,
        )
    };
    match free {
        None => {
            check_sites(omega, &pair.extra, &reach, "omega on D'")?;
            random_part(omega);
        }
        Some(FreeSites { split, t_s }) => {
            if split.d0.len() + split.s.len() != pair.extra.len() {
                return Err(Error::IndexMismatch("free-site split does not partition D'".into()));
            }
            check_sites(omega, &split.d0, &reach, "omega on D0")?;
            check_sites(t_s, &split.s, &reach, "t_S on S")?;
            random_part(omega);
            random_part(t_s);
        }
    }
    DiscretizedHamiltonian::new(grid.clone(), v)
}

/// The spacing must resolve the narrow bump with at least four cells.
pub fn check_resolution(grid: &GridSpec, u: &SingleSitePotential) -> Result<()> {
    if grid.h() > u.delta_minus / 4.0 * (1.0 + 1e-9) {
        return invalid(format!(
            "spacing h = {} exceeds delta_minus / 4 = {}",
            grid.h(),
            u.delta_minus / 4.0
        ));
    }
    Ok(())
}

/// `H = −Δ_h + diag(V)` on a [`GridSpec`]. Immutable after construction.
#[derive(Clone, Debug)]
pub struct DiscretizedHamiltonian {
    grid: GridSpec,
    matrix: SparseSym,
    potential: Vec<f64>,
}

impl DiscretizedHamiltonian {
    pub fn new(grid: GridSpec, potential: Vec<f64>) -> Result<Self> {
        if let Some(v) = potential.iter().find(|v| !v.is_finite()) {
            return invalid(format!("non-finite potential sample {v}"));
        }
        let matrix = grid.laplacian_plus(&potential)?;
        Ok(DiscretizedHamiltonian {
            grid,
            matrix,
            potential,
        })
    }

    pub fn free(grid: GridSpec) -> Self {
        let v = vec![0.0; grid.len()];
        Self::new(grid, v).expect("zero potential is valid")
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `H + diag(w)`.
    pub fn with_added_potential(&self, w: &[f64]) -> Result<Self> {
        if w.len() != self.potential.len() {
            return Err(Error::IndexMismatch("added potential has the wrong length".into()));
        }
        let v = self.potential.iter().zip(w).map(|(a, b)| a + b).collect();
        Self::new(self.grid.clone(), v)
    }

    /// `H + c I`.
    pub fn shifted(&self, c: f64) -> Self {
        let v = self.potential.iter().map(|a| a + c).collect();
        Self::new(self.grid.clone(), v).expect("shifted potential stays finite")
    }

    /// Coordinate-format dump: `row col value` per stored entry, 0-based.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "% {} {} {}", self.dim(), self.dim(), self.matrix.nnz())?;
        for (i, j, v) in self.matrix.entries() {
            writeln!(out, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }
}

/// A Delone–Bernoulli model: background `D`, random sites `D′`, the bump,
/// the defect probability and the grid refinement.
#[derive(Clone, Debug)]
pub struct Model {
    pub pair: DelonePair,
    pub u: SingleSitePotential,
    pub beta: f64,
    /// Grid spacing is `δ₋ / (4 refine)`, adjusted so that `L/h` is integral.
    pub refine: usize,
}

impl Model {
    pub fn grid(&self, x: &[f64], side: f64) -> Result<GridSpec> {
        GridSpec::for_potential(x.to_vec(), side, &self.u, self.refine)
    }

    /// The points of `D′` that can influence `Λ_L(x)`.
    pub fn local_sites(&self, grid: &GridSpec) -> Result<PointSet> {
        let reach = reach_cube(grid, &self.u);
        check_coverage(&self.pair.extra, grid, &self.u, "D'")?;
        let pts = self.pair.extra.restricted_to(&reach);
        PointSet::from_points(grid.dim(), &pts, reach)
    }

    pub fn sample<R: Rng + ?Sized>(&self, grid: &GridSpec, rng: &mut R) -> Result<BernoulliConfig> {
        sample_config(&self.local_sites(grid)?, self.beta, rng)
    }

    pub fn hamiltonian(&self, grid: &GridSpec, omega: &BernoulliConfig) -> Result<DiscretizedHamiltonian> {
        assemble_hamiltonian(&self.pair, &self.u, omega, None, grid)
    }

    /// The background operator `H_{D,x,L}` (all couplings zero).
    pub fn background(&self, grid: &GridSpec) -> Result<DiscretizedHamiltonian> {
        let zero = BernoulliConfig::constant(&self.local_sites(grid)?, 0.0)?;
        self.hamiltonian(grid, &zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_lattice, make_delone_pair};
    use crate::rng::seeded;

    fn flat() -> SingleSitePotential {
        SingleSitePotential::new(0.5, 0.1, 0.2, Profile::Flat).unwrap()
    }

    #[test]
    fn profiles_respect_two_sided_bound() {
        for profile in [Profile::Flat, Profile::Tent] {
            let u = SingleSitePotential::new(0.3, 0.1, 0.25, profile).unwrap();
            assert!(u.eval(&[0.0]) >= 0.3);
            assert!(u.eval(&[0.049]) >= 0.3);
            assert_eq!(u.eval(&[0.125]), 0.0);
            assert_eq!(u.eval(&[0.3, 0.0]), 0.0);
        }
        let t = SingleSitePotential::new(0.3, 0.1, 0.25, Profile::Tent).unwrap();
        assert_eq!(t.sup(), 1.0);
        assert_eq!(flat().sup(), 0.5);
        assert!(SingleSitePotential::new(0.3, 0.3, 0.2, Profile::Flat).is_err());
        assert!(SingleSitePotential::new(1.5, 0.1, 0.2, Profile::Flat).is_err());
    }

    #[test]
    fn grid_geometry() {
        let g = GridSpec::new(vec![0.0], 1.0, 0.25).unwrap();
        assert_eq!(g.n_axis(), 3);
        assert_eq!(g.coord(0, 0), -0.25);
        assert!(GridSpec::new(vec![0.0], 1.0, 0.3).is_err());
        assert!(GridSpec::new(vec![0.0; 3], 1.0, 0.25).is_err());

        let g2 = GridSpec::new(vec![1.0, 2.0], 2.0, 0.5).unwrap();
        assert_eq!(g2.len(), 9);
        let node = g2.index(&[2, 1]);
        assert_eq!(g2.multi_index(node), vec![2, 1]);
        assert_eq!(g2.node_position(node), vec![1.5, 2.0]);
        let inside = g2.nodes_in(&Cube::new(vec![1.0, 2.0], 1.0).unwrap());
        assert_eq!(inside, vec![g2.index(&[1, 1])]);
    }

    #[test]
    fn potential_of_single_bump() {
        let u = flat();
        let grid = GridSpec::new(vec![0.0], 1.0, 0.025).unwrap();
        let d = PointSet::from_points(1, &[[0.0]], Cube::new(vec![0.0], 2.0).unwrap()).unwrap();
        let v = assemble_potential(&d, &u, &grid).unwrap();
        for (node, &val) in v.iter().enumerate() {
            let x = grid.node_position(node)[0];
            assert_eq!(val, u.eval(&[x]));
        }
        assert_eq!(v.iter().cloned().fold(0.0, f64::max), 0.5);

        let empty = PointSet::empty(Cube::new(vec![0.0], 2.0).unwrap()).unwrap();
        assert!(assemble_potential(&empty, &u, &grid).unwrap().iter().all(|&x| x == 0.0));
        let small = PointSet::empty(Cube::new(vec![0.0], 1.1).unwrap()).unwrap();
        assert!(matches!(
            assemble_potential(&small, &u, &grid),
            Err(Error::WindowTooSmall(_))
        ));
    }

    #[test]
    fn zero_couplings_on_empty_background_give_free_laplacian() {
        let w = Cube::new(vec![0.0], 4.0).unwrap();
        let pair = DelonePair {
            base: PointSet::empty(w.clone()).unwrap(),
            extra: PointSet::empty(w).unwrap(),
            union_params: crate::geometry::DeloneParams { r: 1.0, big_r: None },
        };
        let grid = GridSpec::new(vec![0.0], 1.0, 0.025).unwrap();
        let omega = BernoulliConfig::constant(&pair.extra, 0.0).unwrap();
        let h = assemble_hamiltonian(&pair, &flat(), &omega, None, &grid).unwrap();
        assert!(h.potential().iter().all(|&v| v == 0.0));
        assert_eq!(h.matrix().get(0, 0), 2.0 / 0.025f64.powi(2));
        assert_eq!(h.matrix().max_asymmetry(), 0.0);
    }

    #[test]
    fn all_ones_equals_union_assembly() {
        let w = Cube::new(vec![0.0], 12.0).unwrap();
        let d = generate_lattice(1, 1.0, &w).unwrap();
        let pair = make_delone_pair(&d, &mut seeded(5)).unwrap();
        let u = SingleSitePotential::new(0.5, 0.04, 0.1, Profile::Flat).unwrap();
        let grid = GridSpec::new(vec![0.0], 4.0, 0.01).unwrap();
        let ones = BernoulliConfig::constant(&pair.extra, 1.0).unwrap();
        let h = assemble_hamiltonian(&pair, &u, &ones, None, &grid).unwrap();
        let direct = assemble_potential(&pair.union().unwrap(), &u, &grid).unwrap();
        for (a, b) in h.potential().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(h.potential().iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn mismatched_sites_are_rejected() {
        let w = Cube::new(vec![0.0], 12.0).unwrap();
        let d = generate_lattice(1, 1.0, &w).unwrap();
        let pair = make_delone_pair(&d, &mut seeded(5)).unwrap();
        let u = SingleSitePotential::new(0.5, 0.04, 0.1, Profile::Flat).unwrap();
        let grid = GridSpec::new(vec![0.0], 4.0, 0.01).unwrap();
        let wrong = BernoulliConfig::constant(&d, 1.0).unwrap();
        assert!(matches!(
            assemble_hamiltonian(&pair, &u, &wrong, None, &grid),
            Err(Error::IndexMismatch(_))
        ));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let w = Cube::new(vec![0.0], 12.0).unwrap();
        let d = generate_lattice(1, 1.0, &w).unwrap();
        let pair = make_delone_pair(&d, &mut seeded(5)).unwrap();
        let u = SingleSitePotential::new(0.5, 0.04, 0.1, Profile::Flat).unwrap();
        let grid = GridSpec::new(vec![0.0], 4.0, 0.02).unwrap();
        let ones = BernoulliConfig::constant(&pair.extra, 1.0).unwrap();
        assert!(assemble_hamiltonian(&pair, &u, &ones, None, &grid).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_unbiased() {
        let w = Cube::new(vec![0.0], 10001.0).unwrap();
        let sites = generate_lattice(1, 1.0, &w).unwrap();
        let a = sample_config(&sites, 0.3, &mut seeded(11)).unwrap();
        let b = sample_config(&sites, 0.3, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
        let n = a.len() as f64;
        let mean = a.values().iter().sum::<f64>() / n;
        let sigma = (0.3f64 * 0.7 / n).sqrt();
        assert!((mean - 0.7).abs() < 3.0 * sigma, "mean {mean}");
        assert!(sample_config(&sites, 1.0, &mut seeded(1)).is_err());
    }

    #[test]
    fn metric_single_term() {
        let w = Cube::new(vec![0.0], 10.0).unwrap();
        let sites = PointSet::from_points(1, &[[-2.0], [0.0], [3.0]], w).unwrap();
        let a = BernoulliConfig::constant(&sites, 1.0).unwrap();
        let b = a.with_value(0, 0.0).unwrap();
        assert_eq!(config_metric(&a, &a).unwrap(), 0.0);
        assert_eq!(config_metric(&a, &b).unwrap(), 0.25);
        let other = BernoulliConfig::new(1, vec![5.0], vec![1.0], None).unwrap();
        assert!(config_metric(&a, &other).is_err());
    }

    #[test]
    fn coo_export_lists_every_entry() {
        let g = GridSpec::new(vec![0.0], 1.0, 0.25).unwrap();
        let h = DiscretizedHamiltonian::free(g);
        let mut buf = Vec::new();
        h.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 7);
        assert!(text.contains("0 0 3.2000000000000000e1"));
    }
}
