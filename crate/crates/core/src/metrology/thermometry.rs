//! Temperature from the decay of a displaced diffraction peak.
//!
//! A phase gradient `∇φ` written on the atoms at `t = 0` shifts the sharp
//! feature to `Δk = ∇φ`. Motion during the delay `τ₁` scrambles the phases
//! and the peak height falls as
//!
//! ```text
//! S(τ₁) = |Σ_j exp(-i ∇φ·Δr_j)|² ≈ N² exp(-|∇φ|² σ_v² τ₁²),   σ_v² = k_B T / m,
//! ```
//!
//! for ballistic motion, where `σ_v²` is the velocity variance along `∇φ`.
//! The fit regresses `ln S` on `τ₁²`, so the slope gives `T` directly. The
//! reported mean-square displacement coefficient counts `axes` spatial
//! components, `<Δr²> = axes · (k_B T / m) τ₁²`.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffraction::EnsemblePositions;
use crate::error::{Error, Result};
use crate::rng::SeedSplitter;
use crate::spin_states::StateSummary;

pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Mass of a rubidium-87 atom, kg.
pub const RB87_MASS: f64 = 1.443_160_6e-25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionModel {
    /// Free flight with Maxwell-Boltzmann velocities.
    Ballistic,
    /// Ornstein-Uhlenbeck velocities relaxing at `collision_rate` (1/s).
    Langevin { collision_rate: f64 },
}

impl MotionModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionModel::Ballistic => "ballistic",
            MotionModel::Langevin { .. } => "langevin",
        }
    }

    fn validate(&self) -> Result<()> {
        if let MotionModel::Langevin { collision_rate } = *self {
            if !(collision_rate > 0.0 && collision_rate.is_finite()) {
                return Err(Error::domain(
                    "collision rate",
                    format!("{collision_rate} must be positive"),
                ));
            }
        }
        Ok(())
    }

    /// Per-axis displacement variance after `tau`, in units of `k_B T / m`.
    pub fn displacement_factor(&self, tau: f64) -> f64 {
        match *self {
            MotionModel::Ballistic => tau * tau,
            MotionModel::Langevin { collision_rate: g } => ou_position_factor(g * tau) / (g * g),
        }
    }
}

/// `2x - 3 + 4e^{-x} - e^{-2x}`: OU position variance in units of
/// `σ_v² / γ²`, with a series for small `x` to avoid cancellation.
fn ou_position_factor(x: f64) -> f64 {
    if x < 1e-2 {
        x.powi(3) * (2.0 / 3.0 - x / 2.0 + 7.0 / 30.0 * x * x - x.powi(3) / 12.0)
    } else {
        2.0 * x - 3.0 + 4.0 * (-x).exp() - (-2.0 * x).exp()
    }
}

fn check_thermal(temperature: f64, mass: f64, tau: f64) -> Result<()> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::domain(
            "temperature",
            format!("{temperature} must be >= 0"),
        ));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::domain("mass", format!("{mass} must be positive")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain("tau1", format!("{tau} must be >= 0")));
    }
    Ok(())
}

/// Moves every atom for `tau` along the first `axes` coordinate axes,
/// starting from a thermal velocity.
pub fn simulate_motion(
    positions: &EnsemblePositions,
    temperature: f64,
    mass: f64,
    tau: f64,
    model: MotionModel,
    axes: usize,
    rng_seed: u64,
) -> Result<EnsemblePositions> {
    check_thermal(temperature, mass, tau)?;
    model.validate()?;
    if !(1..=3).contains(&axes) {
        return Err(Error::domain("axes", format!("{axes} is not in 1..=3")));
    }
    let sv = (BOLTZMANN * temperature / mass).sqrt();
    let mut rng = SeedSplitter::new(rng_seed).rng("motion", 0);
    let mut out = positions.clone();
    for r in out.coordinates.iter_mut() {
        for a in 0..axes {
            let v0: f64 = sv * rng.sample::<f64, _>(StandardNormal);
            r[a] += match model {
                MotionModel::Ballistic => v0 * tau,
                MotionModel::Langevin { collision_rate: g } => {
                    // mean drift from v0 plus the conditional OU spread
                    let x = g * tau;
                    let relax = -(-x).exp_m1() / g;
                    let var = sv * sv * (ou_position_factor(x) - (relax * g).powi(2)) / (g * g);
                    v0 * relax + var.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal)
                }
            };
        }
    }
    out.rng_seed = Some(rng_seed);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermometryConfig {
    pub temperature: f64,
    pub mass: f64,
    /// Imprinted phase gradient along x, rad/m.
    pub phase_gradient: f64,
    pub tau1_grid: Vec<f64>,
    pub model: MotionModel,
    /// Spatial axes the atoms move along.
    pub axes: usize,
    /// Inverse dephasing rate; delays beyond it are flagged.
    pub dephasing_time: f64,
    pub seed: u64,
}

impl ThermometryConfig {
    /// Ballistic rubidium-87 at `temperature`, 3D motion.
    pub fn new(temperature: f64, phase_gradient: f64, tau1_grid: Vec<f64>) -> Self {
        Self {
            temperature,
            mass: RB87_MASS,
            phase_gradient,
            tau1_grid,
            model: MotionModel::Ballistic,
            axes: 3,
            dephasing_time: 1.0,
            seed: 0,
        }
    }
}

/// `n` delays evenly spaced in `τ₁²` from 0 to `tau_max²`.
pub fn tau1_grid(tau_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![tau_max];
    }
    (0..n)
        .map(|i| tau_max * (i as f64 / (n - 1) as f64).sqrt())
        .collect()
}

/// Exponent above which the fitted decay is no longer reliable.
pub const MAX_RELIABLE_EXPONENT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct ThermometryCurve {
    pub tau1_grid: Vec<f64>,
    /// Sharp-feature height at the displaced center, per delay.
    pub peak_strengths: Vec<f64>,
    pub fitted_temperature: f64,
    /// `<Δr²> / τ₁²` over the configured axes, m²/s².
    pub fitted_msd_coefficient: f64,
    /// Fitted `ln S` intercept.
    pub intercept: f64,
    pub model: MotionModel,
    pub warnings: Vec<String>,
}

/// Simulates the decay curve and fits a temperature. The ballistic law is
/// assumed in the fit whatever `model` drives the atoms.
pub fn thermometry_run(
    summary: &StateSummary,
    positions: &EnsemblePositions,
    cfg: &ThermometryConfig,
) -> Result<ThermometryCurve> {
    summary.validate()?;
    if summary.n_atoms != positions.len() {
        return Err(Error::LengthMismatch {
            what: "positions",
            expected: summary.n_atoms,
            found: positions.len(),
        });
    }
    if summary.pair_sum <= 0.0 {
        return Err(Error::domain("state", "needs P > 0 for a sharp peak"));
    }
    if !cfg.phase_gradient.is_finite() {
        return Err(Error::domain("phase gradient", "non-finite"));
    }
    if cfg.tau1_grid.len() < 2 {
        return Err(Error::domain("tau1 grid", "needs at least two delays"));
    }
    for &t in &cfg.tau1_grid {
        check_thermal(cfg.temperature, cfg.mass, t)?;
    }
    let mut warnings = Vec::new();
    let tau_max = cfg.tau1_grid.iter().cloned().fold(0.0, f64::max);
    let sv2 = BOLTZMANN * cfg.temperature / cfg.mass;
    let exponent = cfg.phase_gradient.powi(2) * sv2 * cfg.model.displacement_factor(tau_max);
    if exponent > MAX_RELIABLE_EXPONENT {
        warnings.push(format!(
            "peak decays by exp(-{exponent:.2}) at the longest delay; fit accuracy degrades beyond {MAX_RELIABLE_EXPONENT}"
        ));
    }
    if tau_max > cfg.dephasing_time {
        warnings.push(format!(
            "longest delay {tau_max:.3e} s exceeds the dephasing time {:.3e} s",
            cfg.dephasing_time
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let n = summary.n_atoms as f64;
    let sharp = summary.pair_sum / (n * n - n);
    let q = cfg.phase_gradient;
    let splitter = SeedSplitter::new(cfg.seed);
    let strengths = crate::par_map(cfg.tau1_grid.len(), |i| -> Result<f64> {
        let moved = simulate_motion(
            positions,
            cfg.temperature,
            cfg.mass,
            cfg.tau1_grid[i],
            cfg.model,
            cfg.axes,
            splitter.derive("delay", i as u64),
        )?;
        let (mut re, mut im) = (0.0, 0.0);
        for (r0, r) in positions.coordinates.iter().zip(&moved.coordinates) {
            // imprint on the original site, read out at the displaced peak
            let dr: Vector3<f64> = r - r0;
            let (s, c) = (-q * dr.x).sin_cos();
            re += c;
            im += s;
        }
        Ok(sharp * (re * re + im * im))
    });
    let strengths: Vec<f64> = strengths.into_iter().collect::<Result<_>>()?;

    let xs: Vec<f64> = cfg.tau1_grid.iter().map(|t| t * t).collect();
    let ys: Vec<f64> = strengths
        .iter()
        .map(|s| s.max(f64::MIN_POSITIVE).ln())
        .collect();
    let (slope, intercept) = linear_fit(&xs, &ys)?;
    let decay = -slope;
    let fitted_temperature = if q == 0.0 {
        0.0
    } else {
        cfg.mass * decay / (BOLTZMANN * q * q)
    };
    Ok(ThermometryCurve {
        tau1_grid: cfg.tau1_grid.clone(),
        peak_strengths: strengths,
        fitted_temperature,
        fitted_msd_coefficient: cfg.axes as f64 * BOLTZMANN * fitted_temperature / cfg.mass,
        intercept,
        model: cfg.model,
        warnings,
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("tau1 grid", "all delays coincide"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
