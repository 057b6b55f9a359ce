//! Numerical laboratory for the nonlocal reaction-diffusion Cauchy problem
//! u_t - Δu = u^α (1 - σ ∫ u^β dx).

pub mod exponents;
pub mod field;
pub mod monitors;
pub mod oracles;
mod reduce;
pub mod scalar;
pub mod stepper;

pub use scalar::{real, Extended, Real};

/// Concrete aliases for the default double-precision lane.
pub type Grid64 = field::Grid<f64>;
pub type Field64 = field::Field<f64>;
pub type InitialData64 = field::InitialData<f64>;
pub type RegimeReport64 = exponents::RegimeReport<f64>;
pub type ProblemSpec64 = stepper::ProblemSpec<f64>;
pub type StepControls64 = stepper::StepControls<f64>;
pub type RunOutcome64 = stepper::RunOutcome<f64>;
pub type TimeSeriesRecord64 = monitors::TimeSeriesRecord<f64>;
pub type InvariantReport64 = monitors::InvariantReport<f64>;
