//! Numerical laboratory for Delone–Bernoulli random Schrödinger operators.
//!
//! The crate builds finite patches of Delone sets ([`geometry`]), assembles
//! Dirichlet finite-difference Hamiltonians `-Δ + V_D + V_{D'ω}` on boxes
//! ([`operator`]), and computes eigenpairs, resolvent norms and local
//! resolvent blocks ([`spectral`]). On top of that sit the good-box and
//! good-scale machinery of the multiscale analysis ([`msa`]), the
//! constructive pieces of the initial length-scale estimate ([`ilse`]) and the
//! one-dimensional quantitative unique continuation bounds ([`ucp`]).

pub mod error;
pub mod geometry;
pub mod ilse;
pub mod linalg;
pub mod msa;
pub mod operator;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod ucp;

pub use error::{Error, Result};
pub use geometry::{Cube, DeloneParams, DelonePair, FreeSiteSplit, PointSet};
pub use operator::{
    BernoulliConfig, DiscretizedHamiltonian, GridSpec, Profile, SingleSitePotential,
};
pub use spectral::EigenResult;
