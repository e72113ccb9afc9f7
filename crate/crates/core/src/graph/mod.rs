//! Data model for alphabets, weight families, degree objects and factor
//! graphs, plus the configuration model, the batch-layered model and its
//! `(α,β)` layer planner.

mod alphabet;
mod degree;
mod factor_graph;
mod format;
mod generate;
mod sockets;
mod weights;

pub(crate) mod weights_internal {
    pub(crate) use super::weights::{encode_index, sample_discrete};
}

pub use alphabet::Alphabet;
pub(crate) use alphabet::spin;
pub use degree::{sample_d_partition, DPartition, DegreeDistribution, DegreeSequence};
pub use factor_graph::{Check, FactorGraph, Pin};
pub use format::{read_graph, write_graph};
pub use generate::{
    alpha_beta_plan, configuration_model, layered_model, tv_shift_distance, LayerPlan,
    LayeredGraph,
};
pub(crate) use generate::{poisson, s_max};
pub use sockets::{SocketSampler, SocketState};
pub use weights::{WeightFamily, WeightFunction};
