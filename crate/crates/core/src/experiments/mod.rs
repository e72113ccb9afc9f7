//! Finite-n experiments: the coupling between the `(α,β)` approximation and
//! the configuration model, and the interpolation ensemble `G*_{T,s,t}`.

mod coupling;
mod interpolation;

pub use coupling::{coupled_generate, coupling_scaling_stat, CoupledPair, CouplingReport, ScalingPoint, ScalingStat};
pub use interpolation::{interpolation_sample, InterpolationParams, InterpolationPoint, InterpolationSample};
