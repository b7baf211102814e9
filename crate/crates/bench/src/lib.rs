//! Shared fixtures for the benchmarks.

use delone_core::geometry::{generate_perturbed_lattice, make_delone_pair};
use delone_core::operator::Model;
use delone_core::rng::seeded;
use delone_core::{Cube, Profile, SingleSitePotential};

/// One-dimensional perturbed-lattice model on `Λ_window(0)`.
pub fn model(dim: usize, window: f64, seed: u64) -> Model {
    let mut rng = seeded(seed);
    let w = Cube::centred(dim, window).expect("window");
    let base = generate_perturbed_lattice(dim, 0.3, &w, &mut rng).expect("lattice");
    let pair = make_delone_pair(&base, &mut rng).expect("pair");
    Model {
        pair,
        u: SingleSitePotential::new(0.5, 0.1, 0.2, Profile::Flat).expect("bump"),
        beta: 0.5,
        refine: 1,
    }
}
