//! Feedback-linearization control of nth-order companion-form plants, with an
//! online Gaussian RBF network that learns to cancel the unmodeled disturbance.
//!
//! The crate is organized bottom-up:
//!
//! * [`dynamics`]: state/error algebra, binomial pole placement, Routh-Hurwitz.
//! * [`rbf`]: the single-input RBF compensator and its adaptation law.
//! * [`plants`]: benchmark plants and bounded disturbance generators.
//! * [`controller`]: the baseline and compensated control laws.
//! * [`simulation`]: RK4 closed-loop integration, references and metrics.

pub mod controller;
pub mod dynamics;
mod error;
pub mod plants;
pub mod rbf;
pub mod simulation;

pub use controller::{
    CompensatedControl, ControlMode, ControlSignal, ControllerState, NominalTerms, StepLog,
};
pub use dynamics::{
    binomial_coefficient, binomial_gains, filtered_error, hurwitz_check, tracking_error,
    CharPolynomial, GainVector, StateVector,
};
pub use error::{Error, Result};
pub use plants::{
    disturbance_sample, duffing_plant, pendulum_plant, vanderpol_plant, DisturbanceKind,
    DisturbanceSignal, DisturbanceSpec, PlantModel,
};
pub use rbf::{default_network, gaussian_basis, Adapted, RbfNetwork};
pub use simulation::{
    compute_metrics, reference_at, rk4_step, run_closed_loop, DisturbanceSource, Event,
    IdealRepresentation, Metrics, Observer, Record, ReferenceSpec, Simulation, Sinusoid,
    Trajectory,
};
