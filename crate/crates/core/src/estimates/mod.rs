//! Virial identity residuals, smoothing functionals, term bounds and the
//! magnetic Hardy quotient.

mod hardy;
mod smoothing;
mod termwise;
mod virial;

pub use hardy::{hardy_check, HardyReport, HARDY_SLACK};
pub use smoothing::{
    data_norm_sqr, default_radii, rhs_exponent, smoothing_functional, smoothing_ratio,
    EstimateReport, EstimateRow,
};
pub use termwise::{termwise_bounds, BilinearBound, BilinearCase, BoundsDiagnostics, TermBound};
pub use virial::{
    max_residuals, origin_value, theta, virial_residual, virial_terms, QuadratureTerms,
    VirialCalculator, VirialMonitor, VirialRow, VirialTerms,
};
