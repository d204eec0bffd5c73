//! Underdamped Langevin dynamics `dx = v dt, m dv = (F − γv) dt + σ dB` on a domain
//! X ⊂ Rⁿ, its small-mass limit
//!
//! ```text
//! dx = (γ⁻¹F + S) dt + γ⁻¹σ dB,   S_i = ∂_l(γ⁻¹)_{ij} J_{jl},   γJ + Jγᵀ = σσᵀ,
//! ```
//!
//! and coupled Monte Carlo experiments comparing the two.

pub mod domain;
pub mod error;
pub mod integrators;
pub mod linalg;
pub mod lyapunov;
pub mod lyapunov_check;
pub mod models;
pub mod montecarlo;
pub mod noise;

pub use domain::DomainSpec;
pub use error::{Error, Result};
pub use integrators::{
    coupled_outcome, d_infinity, simulate_coupled, step_overdamped, step_underdamped, CoupledSpec,
    ExtendedState, PathOutcome, TrajectoryPair,
};
pub use lyapunov::{
    friction_inverse, grad_friction_inverse, integral_lyapunov, noise_induced_drift, solve_lyapunov,
    DiffusionMatrix, FrictionMatrix, LyapunovSolution,
};
pub use lyapunov_check::{apply_generator, verify_p1, verify_p2, LyapunovCandidate, ProbeGrid};
pub use models::{AnyModel, Model, ModelSpec};
pub use montecarlo::{
    estimate_exceedance, estimate_exit_probability, run_experiment, wilson_interval, ConvergenceTable,
    ExecutionPolicy, ExperimentPlan,
};
pub use noise::NoiseStream;
