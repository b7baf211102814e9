#![allow(dead_code)]

use delone_core::geometry::{generate_lattice, generate_perturbed_lattice, make_delone_pair, translate};
use delone_core::operator::Model;
use delone_core::rng::seeded;
use delone_core::{Cube, PointSet, Profile, SingleSitePotential};

pub fn flat_bump() -> SingleSitePotential {
    SingleSitePotential::new(0.5, 0.1, 0.2, Profile::Flat).unwrap()
}

/// Perturbed-lattice background on `Λ_window(0)` with its random partner set.
pub fn model_1d(beta: f64, window: f64, seed: u64) -> Model {
    let mut rng = seeded(seed);
    let w = Cube::new(vec![0.0], window).unwrap();
    let base = generate_perturbed_lattice(1, 0.3, &w, &mut rng).unwrap();
    let pair = make_delone_pair(&base, &mut rng).unwrap();
    Model {
        pair,
        u: flat_bump(),
        beta,
        refine: 1,
    }
}

/// `ℤ + 1/2` on `Λ_side(0)`.
pub fn half_integers(side: f64) -> PointSet {
    let w = Cube::new(vec![-0.5], side + 2.0).unwrap();
    let z = generate_lattice(1, 1.0, &w).unwrap();
    let t = translate(&z, &[0.5]).unwrap();
    t.intersect(&Cube::new(vec![0.0], side).unwrap()).unwrap()
}
