//! Finite populations standing in for `π ∈ 𝒫²_*(Ω)`, Monte Carlo
//! evaluation of the cavity functionals, and population dynamics for the
//! sup over `π`.

mod functional;
mod population;
mod solver;

pub use functional::{big_lambda, b_functional, channel_term, closed_form_forest, gamma_correction, BFunctional};
pub(crate) use functional::{contract, lambda};
pub use population::{Population, SeedKind, MEAN_TOLERANCE};
pub use solver::{
    code_family_model, mi_predict_general, pd_step, solve_sup, CavityModel, GeneralPrediction, PdStep,
    RestartDiagnostics, SolverSettings, SupResult, THETA_CLIP,
};
