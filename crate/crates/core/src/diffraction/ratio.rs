//! Peak (dip) to background ratios.

use nalgebra::Vector3;

use super::geometry::{EnsemblePositions, PhaseProfile};
use super::image::{delta_k, DiffractionImage};
use super::pattern::{check_summary, pattern_value, structure_unchecked};
use crate::error::{Error, Result};
use crate::spin_states::StateSummary;

/// Where the background is read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    /// Mean over `samples` equally spaced azimuths on the `θ_b` ring.
    Ring { samples: usize },
    /// A single point on the ring at the given azimuth.
    Point { azimuth: f64 },
}

impl Default for Background {
    fn default() -> Self {
        Background::Ring { samples: 360 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RatioOptions {
    /// Transverse transfer of the feature center (zero unless displaced).
    pub center: [f64; 2],
    pub background: Background,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    /// `(I(0) - I(θ_b)) / I(θ_b)`.
    pub ratio: f64,
    pub peak: f64,
    pub background: f64,
}

impl RatioEstimate {
    fn from_parts(peak: f64, background: f64) -> Result<Self> {
        if !(background > 0.0) {
            return Err(Error::Numerical(format!(
                "background intensity {background} is not positive"
            )));
        }
        Ok(Self {
            ratio: (peak - background) / background,
            peak,
            background,
        })
    }
}

/// `P / (<N_s> - P/N)`: the ratio when the background structure is `N`
/// wide-angle speckle on average.
pub fn large_n_ratio(ns_mean: f64, pair_sum: f64, n_atoms: usize) -> f64 {
    pair_sum / (ns_mean - pair_sum / n_atoms as f64)
}

/// Ratio when the structure term vanishes at `θ_b`:
/// `(P + P/(N-1)) / (<N_s> - P/(N-1))`.
pub fn vanishing_background_ratio(ns_mean: f64, pair_sum: f64, n_atoms: usize) -> f64 {
    let c = pair_sum / (n_atoms as f64 - 1.0);
    (pair_sum + c) / (ns_mean - c)
}

/// Transverse points at which the background is read: the `θ_b` ring
/// (or its two intersections with a line detector).
pub fn background_points(
    center: [f64; 2],
    radius: f64,
    background: Background,
    line: bool,
) -> Vec<[f64; 2]> {
    let at = |az: f64| [center[0] + radius * az.cos(), center[1] + radius * az.sin()];
    match (background, line) {
        (Background::Point { azimuth }, false) => vec![at(azimuth)],
        (Background::Point { azimuth }, true) => {
            let sign = if azimuth.cos() >= 0.0 { 1.0 } else { -1.0 };
            vec![[center[0] + sign * radius, center[1]]]
        }
        (Background::Ring { .. }, true) => {
            vec![
                [center[0] - radius, center[1]],
                [center[0] + radius, center[1]],
            ]
        }
        (Background::Ring { samples }, false) => {
            let m = samples.max(1);
            (0..m)
                .map(|i| at(2.0 * std::f64::consts::PI * i as f64 / m as f64))
                .collect()
        }
    }
}

/// Radius of the `θ_b` ring in transverse wavevector.
pub fn ring_radius(k0: f64, theta_b: f64) -> f64 {
    k0 * theta_b.sin()
}

/// Reads the ratio off an image.
pub fn peak_dip_ratio(
    image: &DiffractionImage,
    theta_b: f64,
    options: &RatioOptions,
) -> Result<RatioEstimate> {
    let radius = ring_radius(image.k0, theta_b);
    let miss = || {
        Error::domain(
            "image grid",
            format!("does not reach theta_b = {theta_b:.4e} rad"),
        )
    };
    let peak = image
        .sample(options.center)
        .ok_or_else(|| Error::domain("image grid", "does not cover the feature center"))?;
    let pts = background_points(
        options.center,
        radius,
        options.background,
        image.grid.is_line(),
    );
    let mut sum = 0.0;
    for p in &pts {
        sum += image.sample(*p).ok_or_else(miss)?;
    }
    RatioEstimate::from_parts(peak, sum / pts.len() as f64)
}

/// Ratio evaluated directly from positions, without building an image.
pub fn direct_ratio(
    summary: &StateSummary,
    positions: &EnsemblePositions,
    phases: Option<&PhaseProfile>,
    theta_b: f64,
    options: &RatioOptions,
) -> Result<RatioEstimate> {
    let (peak, background) = direct_intensities(summary, positions, phases, theta_b, options)?;
    RatioEstimate::from_parts(peak, background)
}

fn direct_intensities(
    summary: &StateSummary,
    positions: &EnsemblePositions,
    phases: Option<&PhaseProfile>,
    theta_b: f64,
    options: &RatioOptions,
) -> Result<(f64, f64)> {
    check_summary(summary, positions.len())?;
    if let Some(p) = phases {
        if p.len() != positions.len() {
            return Err(Error::LengthMismatch {
                what: "phase profile",
                expected: positions.len(),
                found: p.len(),
            });
        }
    }
    let ph = phases.map(|p| p.phases.as_slice());
    let k0 = positions.k0;
    let eval = |k: [f64; 2]| -> f64 {
        let dk: Vector3<f64> = delta_k(k, k0);
        pattern_value(
            summary,
            structure_unchecked(&positions.coordinates, ph, &dk),
        )
    };
    let line = positions.geometry.dimensionality() == 1;
    let pts = background_points(
        options.center,
        ring_radius(k0, theta_b),
        options.background,
        line,
    );
    let ring = crate::par_map(pts.len(), |i| eval(pts[i]));
    let background = ring.iter().sum::<f64>() / ring.len() as f64;
    Ok((eval(options.center), background))
}

/// Ratio of photons collected in `[0, τ_c]` for each `τ_c`, under
/// independent spin decay at rate `gamma`.
///
/// Every pixel then scales by the common factor `1 - exp(-Γ τ_c)`, so the
/// returned series is constant.
pub fn time_resolved_ratio(
    summary: &StateSummary,
    positions: &EnsemblePositions,
    phases: Option<&PhaseProfile>,
    gamma_rate: f64,
    tau_c_grid: &[f64],
    theta_b: f64,
    options: &RatioOptions,
) -> Result<Vec<(f64, f64)>> {
    if !(gamma_rate > 0.0 && gamma_rate.is_finite()) {
        return Err(Error::domain(
            "decay rate",
            format!("{gamma_rate} must be positive"),
        ));
    }
    if tau_c_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::domain("collection interval", "must be >= 0"));
    }
    let (peak, background) = direct_intensities(summary, positions, phases, theta_b, options)?;
    tau_c_grid
        .iter()
        .map(|&tau| {
            let collected = -(-gamma_rate * tau).exp_m1();
            let r = if collected > 0.0 {
                let (n0, nb) = (collected * peak, collected * background);
                RatioEstimate::from_parts(n0, nb)?.ratio
            } else {
                RatioEstimate::from_parts(peak, background)?.ratio
            };
            Ok((tau, r))
        })
        .collect()
}
