//! Weak measurements of logical observables: bases, filter functions,
//! registers, readout estimators and the ν self-test.

mod basis;
mod filter;
mod readout;
mod register;
mod selftest;

pub use basis::{BasisVariant, MeasurementBasis};
pub use filter::{accumulated_filter, cos_estimate, filter_function, measurement_cost, peak_width, phase_grid};
pub use readout::{born_statistics, initialize, measure_observable, trial_rng, BornStatistics, Eigenphases, Initialization, MeasurementResult, RANGE_SLACK};
pub use register::{eigenphase_ladder, weak_measure_step, FixedPointRegister, VirtualRegister, WeakRegister};
pub use selftest::{estimate_nu, wire_completeness, wire_probabilities, NuEstimate, OffDiagonalEstimate, FIT_ALPHA, FIT_BETAS, FIT_STEPS};
