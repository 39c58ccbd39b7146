//! Field-gradient imprinting and readout.

use nalgebra::{Matrix2, Vector3};

use super::fit::PeakFit;
use crate::diffraction::{EnsemblePositions, PhaseProfile};
use crate::error::{Error, Result};

/// Linear field gradient `∇η` (rad/(s·m)) acting for a probe time `τ₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientField {
    pub grad: Vector3<f64>,
    pub probe_time: f64,
}

impl GradientField {
    pub fn new(grad: Vector3<f64>, probe_time: f64) -> Result<Self> {
        let f = Self { grad, probe_time };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grad.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("gradient", "non-finite component"));
        }
        if !(self.probe_time >= 0.0 && self.probe_time.is_finite()) {
            return Err(Error::domain(
                "probe time",
                format!("{} must be >= 0", self.probe_time),
            ));
        }
        Ok(())
    }

    /// `τ₀ ∇η`, rad/m.
    pub fn transfer(&self) -> Vector3<f64> {
        self.grad * self.probe_time
    }

    /// In-plane part of `τ₀ ∇η`: where the feature center lands on the
    /// transverse detector grid.
    pub fn expected_center(&self) -> [f64; 2] {
        let q = self.transfer();
        [q.x, q.y]
    }
}

/// `φ_j = τ₀ ∇η · r_j`.
pub fn imprint_gradient(
    positions: &EnsemblePositions,
    field: &GradientField,
) -> Result<PhaseProfile> {
    field.validate()?;
    Ok(PhaseProfile::linear(positions, field.transfer()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradiometerEstimate {
    /// `∇η` estimate, rad/(s·m); the z component is not observable.
    pub estimated_grad: Vector3<f64>,
    /// In-plane covariance, (rad/(s·m))².
    pub covariance: Matrix2<f64>,
    pub photons_used: u64,
    pub fit_residual: f64,
}

/// `∇η = c / τ₀` with covariance scaled by `1/τ₀²`.
pub fn estimate_gradient(fit: &PeakFit, probe_time: f64) -> Result<GradiometerEstimate> {
    if !(probe_time > 0.0 && probe_time.is_finite()) {
        return Err(Error::domain(
            "probe time",
            format!("{probe_time} must be positive"),
        ));
    }
    Ok(GradiometerEstimate {
        estimated_grad: Vector3::new(fit.center[0] / probe_time, fit.center[1] / probe_time, 0.0),
        covariance: fit.covariance / (probe_time * probe_time),
        photons_used: fit.photons.round() as u64,
        fit_residual: fit.reduced_deviance,
    })
}

/// Closed-form sensitivities, rad/(s·m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSensitivities {
    /// One collective probe of N atoms: `k₀ / (N τ₀ sqrt(k₀ A))`.
    pub diffraction: f64,
    /// N/2 independent pair probes: `sqrt(N)` times worse.
    pub sql_pairs: f64,
    /// Mach-Zehnder fountain gradiometer: `1 / (sqrt(N) τ₀ A)`.
    pub mzi: f64,
}

pub fn reference_sensitivities(
    n_atoms: usize,
    probe_time: f64,
    size: f64,
    k0: f64,
) -> Result<ReferenceSensitivities> {
    for (what, v) in [
        ("probe time", probe_time),
        ("ensemble size", size),
        ("k0", k0),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(what, format!("{v} must be positive")));
        }
    }
    if n_atoms == 0 {
        return Err(Error::domain("n_atoms", "must be at least 1"));
    }
    let n = n_atoms as f64;
    let diffraction = k0 / (n * probe_time * (k0 * size).sqrt());
    Ok(ReferenceSensitivities {
        diffraction,
        sql_pairs: diffraction * n.sqrt(),
        mzi: 1.0 / (n.sqrt() * probe_time * size),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::{
        collective_pattern, photon_counts, sample_positions, Geometry, KGrid, PatternMode,
        PatternOptions,
    };
    use crate::metrology::fit::{fit_peak, FitMethod};
    use crate::spin_states::coherent_summary;
    use approx::assert_relative_eq;

    const K0: f64 = 8.055e6;

    #[test]
    fn zero_gradient_gives_zero_profile() {
        let p = sample_positions(Geometry::Gaussian2d { fwhm: 50e-6 }, 20, K0, 1).unwrap();
        let f = GradientField::new(Vector3::zeros(), 1.0).unwrap();
        let ph = imprint_gradient(&p, &f).unwrap();
        assert!(ph.phases.iter().all(|&x| x == 0.0));
        assert_eq!(f.expected_center(), [0.0, 0.0]);
    }

    #[test]
    fn angular_displacement_example() {
        let f = GradientField::new(Vector3::new(10.0, 0.0, 0.0), 1.0).unwrap();
        let dtheta = (f.expected_center()[0] / 8.06e6).asin();
        assert_relative_eq!(dtheta, 1.24e-6, max_relative = 1e-2);
        assert!(GradientField::new(Vector3::new(f64::NAN, 0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn reference_values() {
        let r = reference_sensitivities(10_000, 1.0, 1e-3, 8.06e6).unwrap();
        assert_relative_eq!(r.diffraction, 8.98, max_relative = 1e-3);
        assert_relative_eq!(r.sql_pairs, r.diffraction * 100.0, max_relative = 1e-12);
        let r = reference_sensitivities(10_000, 0.1, 1e-3, 8.06e6).unwrap();
        assert_relative_eq!(r.mzi, 100.0, max_relative = 1e-12);
        assert!(reference_sensitivities(10, 0.0, 1e-3, 8e6).is_err());
    }

    #[test]
    fn noiseless_displacement_recovered() {
        let fwhm = 100e-6;
        let p = sample_positions(Geometry::Gaussian2d { fwhm }, 400, K0, 2).unwrap();
        let field = GradientField::new(Vector3::new(2.3e4, -1.1e4, 0.0), 1.0).unwrap();
        let ph = imprint_gradient(&p, &field).unwrap();
        let s = coherent_summary(400, std::f64::consts::FRAC_PI_2, 0.0);
        let grid = KGrid::square([0.0, 0.0], 1.2e5, 121).unwrap();
        for mode in [PatternMode::EnsembleAveraged, PatternMode::FixedPositions] {
            let opts = PatternOptions {
                mode,
                ..Default::default()
            };
            let img = collective_pattern(&s, &p, Some(&ph), &grid, &opts).unwrap();
            let fit = fit_peak(&img).unwrap();
            let c = field.expected_center();
            assert!(
                (fit.center[0] - c[0]).abs() < 0.1 * grid.spacing,
                "{mode:?} {:?}",
                fit.center
            );
            assert!(
                (fit.center[1] - c[1]).abs() < 0.1 * grid.spacing,
                "{mode:?} {:?}",
                fit.center
            );
            let est = estimate_gradient(&fit, 1.0).unwrap();
            assert!((est.estimated_grad - field.grad).xy().norm() < 0.1 * grid.spacing);
        }
        let img = collective_pattern(&s, &p, Some(&ph), &grid, &PatternOptions::default()).unwrap();
        let counts = photon_counts(&img, 10_000, 5).unwrap();
        let fit = fit_peak(&counts).unwrap();
        assert_eq!(fit.method, FitMethod::Gaussian);
        assert!(estimate_gradient(&fit, 0.0).is_err());
    }
}
