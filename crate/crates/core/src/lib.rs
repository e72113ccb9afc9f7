//! Random factor-graph ensembles, teacher–student sampling and cavity
//! functionals for the mutual information of LDGM codes.
//!
//! The crate is organised bottom-up:
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | alphabets, weight families, degree objects, factor graphs and the three generators |
//! | [`gibbs`] | exact enumeration of partition functions, marginals, entropies and symmetry metrics |
//! | [`planted`] | teacher–student sampling, pinning, posterior oracles and conditional-entropy estimates |
//! | [`ldgm`] | the ±1 parity family, the BSC, exact code MI and the code-form functional |
//! | [`cavity`] | populations, the general functional, population dynamics and MI assembly |
//! | [`experiments`] | the coupling experiment and the interpolation ensemble |
//!
//! All entropies and free energies are in nats.

pub mod cavity;
pub mod error;
pub mod experiments;
pub mod gibbs;
pub mod graph;
pub mod ldgm;
pub mod planted;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
