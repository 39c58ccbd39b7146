//! Field-gradient vectometry and thermometry.

mod fit;
mod gradiometer;
mod sweep;
mod thermometry;

pub use fit::{fit_peak, fit_peak_with, FitMethod, FitOptions, PeakFit};
pub use gradiometer::{
    estimate_gradient, imprint_gradient, reference_sensitivities, GradientField,
    GradiometerEstimate, ReferenceSensitivities,
};
pub use sweep::{
    loglog_slope, sensitivity_sweep, CollectiveEstimator, ProbeMode, SweepConfig, SweepResult,
    SweepRow, ALIAS_ODDS,
};
pub use thermometry::{
    simulate_motion, tau1_grid, thermometry_run, MotionModel, ThermometryConfig, ThermometryCurve,
    BOLTZMANN, MAX_RELIABLE_EXPONENT, RB87_MASS,
};
