//! Ensemble geometry and far-field diffraction images.

mod counts;
mod geometry;
mod image;
mod pattern;
mod ratio;

pub use counts::{multinomial, photon_counts, pixel_weights};
pub use geometry::{
    boundary_angle, sample_positions, EnsemblePositions, Geometry, PhaseProfile, FWHM_PER_SIGMA,
};
pub use image::{delta_k, polar_angle, DiffractionImage, Envelope, ImageData, ImageMode, KGrid};
pub use pattern::{
    collective_pattern, pattern_value, structure_map, structure_term, PatternMode, PatternOptions,
    StructureMap,
};
pub use ratio::{
    background_points, direct_ratio, large_n_ratio, peak_dip_ratio, ring_radius,
    time_resolved_ratio, vanishing_background_ratio, Background, RatioEstimate, RatioOptions,
};
