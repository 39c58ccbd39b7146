//! Monte Carlo sensitivity of the 1D gradiometer versus atom number.
//!
//! Each trial draws atom positions from a 1D Gaussian of FWHM `A`,
//! imprints `q = τ₀ ∂_x η`, lets every probe emit `shots × <N_s>` photons
//! and records those landing on a line detector covering `|k_x| ≤ R`.
//! Emission is spread over `k_x ∈ (-k₀, k₀)` (the projection of an
//! isotropic emitter onto one axis is uniform), so only a fraction of the
//! budget reaches the detector; that fraction is what makes the peak
//! photon number grow as `N² / (k₀ A)`.
//!
//! * Collective: one coherent N-atom probe, peak located by [`fit_peak`]
//!   and by default refined against the pattern of the sampled positions.
//! * Pairs: N/2 coherent two-atom probes; `q` is the joint maximum
//!   likelihood over all fringe patterns. When a distinct fringe alias
//!   comes within [`ALIAS_ODDS`] of the best mode the trial is reported as
//!   unresolved rather than estimated.

use nalgebra::Vector3;
use num_complex::Complex64;

use super::fit::{fit_peak, FitMethod};
use super::gradiometer::GradientField;
use crate::diffraction::{
    multinomial, pattern_value, sample_positions, DiffractionImage, Geometry, ImageData, ImageMode,
    KGrid, FWHM_PER_SIGMA,
};
use crate::error::{Error, Result};
use crate::rng::SeedSplitter;
use crate::spin_states::{coherent_summary, StateSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    Collective,
    Pairs,
}

impl ProbeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProbeMode::Collective => "collective",
            ProbeMode::Pairs => "pairs",
        }
    }
}

/// How the collective trial turns counts into `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollectiveEstimator {
    /// Gaussian-plus-background peak fit only.
    GaussianFit,
    /// Peak fit, then maximum likelihood over the pattern predicted from
    /// the sampled positions. Matches the pairs estimator, which also uses
    /// each pair's separation.
    #[default]
    StructureMl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mode: ProbeMode,
    pub n_list: Vec<usize>,
    /// FWHM `A` of the 1D Gaussian ensemble, m.
    pub fwhm: f64,
    pub k0: f64,
    pub field: GradientField,
    /// Repetitions per trial; each probe emits `shots × <N_s>` photons.
    pub shots: u64,
    /// Detector half-width in units of `1/σ`.
    pub window: f64,
    /// Pixel pitch in units of `1/σ`.
    pub pixel: f64,
    pub trials: usize,
    pub seed: u64,
    pub collective_estimator: CollectiveEstimator,
}

impl SweepConfig {
    /// 1 mm ensemble at 780 nm, probed for 1 s.
    pub fn new(mode: ProbeMode, n_list: Vec<usize>) -> Self {
        let fwhm = 1e-3;
        let sigma = fwhm / FWHM_PER_SIGMA;
        Self {
            mode,
            n_list,
            fwhm,
            k0: 2.0 * std::f64::consts::PI / 780e-9,
            field: GradientField {
                grad: Vector3::new(3.7 / sigma, 0.0, 0.0),
                probe_time: 1.0,
            },
            shots: 1_000_000,
            window: 25.0,
            pixel: 0.2,
            trials: 200,
            seed: 0,
            collective_estimator: CollectiveEstimator::default(),
        }
    }

    fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }

    fn validate(&self) -> Result<()> {
        self.field.validate()?;
        for (what, v) in [
            ("fwhm", self.fwhm),
            ("k0", self.k0),
            ("window", self.window),
            ("pixel", self.pixel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(what, format!("{v} must be positive")));
            }
        }
        if !(self.field.probe_time > 0.0) {
            return Err(Error::domain("probe time", "must be positive"));
        }
        if self.trials < 2 {
            return Err(Error::domain("trials", "need at least 2"));
        }
        if self.shots == 0 {
            return Err(Error::domain("shots", "need at least 1"));
        }
        if self.n_list.is_empty() {
            return Err(Error::domain("n_list", "empty"));
        }
        let q = self.field.transfer().x * self.sigma();
        if q.abs() >= self.window {
            return Err(Error::domain(
                "gradient",
                format!(
                    "displacement {q:.2}/σ falls outside the ±{}/σ detector",
                    self.window
                ),
            ));
        }
        let bound = self.k0 * self.fwhm;
        for &n in &self.n_list {
            if n < 2 || (self.mode == ProbeMode::Pairs && n % 2 == 1) {
                return Err(Error::domain(
                    "n_atoms",
                    format!("{n} cannot be split into the probes"),
                ));
            }
            if n as f64 > bound {
                return Err(Error::NotDilute { n_atoms: n, bound });
            }
        }
        Ok(())
    }

    fn grid(&self) -> Result<KGrid> {
        let sigma = self.sigma();
        let half_px = (self.window / self.pixel).round() as usize;
        KGrid::line(0.0, half_px as f64 * self.pixel / sigma, 2 * half_px + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n_atoms: usize,
    /// Trials that produced an estimate.
    pub trials: usize,
    /// Trials whose estimator failed outright.
    pub failures: usize,
    /// Pair trials whose fringe alias could not be resolved; included in
    /// `failures`.
    pub unresolved: usize,
    /// Trials resolved by the centroid fallback.
    pub fallbacks: usize,
    /// Mean of `∇η̂ - ∇η`, rad/(s·m).
    pub bias: f64,
    /// Standard deviation of `∇η̂`, rad/(s·m).
    pub std: f64,
    pub mean_detected_photons: f64,
    /// Sharp-feature height above the detector-mean level, summed over
    /// probes, from the noiseless patterns.
    pub peak_strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub mode: ProbeMode,
    pub rows: Vec<SweepRow>,
    /// Log-log slope of `std` against N.
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::domain(
            "regression",
            "needs two or more matched points",
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::domain(
            "regression",
            "log-log fit needs positive values",
        ));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("regression", "all x values coincide"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

struct Trial {
    error: Option<f64>,
    unresolved: bool,
    fallback: bool,
    detected: u64,
    strength: f64,
}

/// Runs the sweep; trials are independent and seeded by `(N, trial)`.
pub fn sensitivity_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let splitter = SeedSplitter::new(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let trials = crate::par_map(cfg.trials, |t| {
            let index = (n as u64) << 32 | t as u64;
            match cfg.mode {
                ProbeMode::Collective => collective_trial(cfg, &grid, n, &splitter, index),
                ProbeMode::Pairs => pairs_trial(cfg, &grid, n, &splitter, index),
            }
        });
        let trials: Vec<Trial> = trials.into_iter().collect::<Result<_>>()?;
        rows.push(summarize(n, &trials, cfg.field.probe_time)?);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n_atoms as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.std).collect();
    let (slope, intercept) = if rows.len() >= 2 {
        loglog_slope(&xs, &ys)?
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SweepResult {
        mode: cfg.mode,
        rows,
        slope,
        intercept,
    })
}

fn summarize(n: usize, trials: &[Trial], tau: f64) -> Result<SweepRow> {
    let errs: Vec<f64> = trials.iter().filter_map(|t| t.error).collect();
    let failures = trials.len() - errs.len();
    if errs.len() < 2 {
        return Err(Error::Fit(format!(
            "N = {n}: {failures} of {} trials failed",
            trials.len()
        )));
    }
    if failures > 0 {
        log::warn!(
            "N = {n}: {failures} of {} trials produced no estimate",
            trials.len()
        );
    }
    let k = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / k;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let m = trials.len() as f64;
    Ok(SweepRow {
        n_atoms: n,
        trials: errs.len(),
        failures,
        unresolved: trials.iter().filter(|t| t.unresolved).count(),
        fallbacks: trials.iter().filter(|t| t.fallback).count(),
        bias: mean / tau,
        std: var.sqrt() / tau,
        mean_detected_photons: trials.iter().map(|t| t.detected as f64).sum::<f64>() / m,
        peak_strength: trials.iter().map(|t| t.strength).sum::<f64>() / m,
    })
}

/// Probe state: the equatorial coherent state.
fn probe_summary(n: usize) -> StateSummary {
    coherent_summary(n, std::f64::consts::FRAC_PI_2, 0.0)
}

/// `∫_{-k₀}^{k₀} S(k) dk` for 1D coordinates and phases `q x_j`.
fn structure_integral(xs: &[f64], q: f64, k0: f64) -> f64 {
    let n = xs.len() as f64;
    let mut off = 0.0;
    for (a, &xa) in xs.iter().enumerate() {
        for &xb in &xs[..a] {
            let d = xa - xb;
            // sin(k₀ d)/d, written to stay finite at d → 0
            let sinc = if d.abs() * k0 < 1e-8 {
                k0
            } else {
                (k0 * d).sin() / d
            };
            off += 2.0 * (q * d).cos() * 2.0 * sinc;
        }
    }
    2.0 * k0 * n + off
}

fn structure_1d(xs: &[f64], q: f64, k: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &x in xs {
        let (s, c) = ((q - k) * x).sin_cos();
        re += c;
        im += s;
    }
    re * re + im * im
}

/// Detector-pixel intensities and the full emitted weight of one probe.
fn probe_emission(
    xs: &[f64],
    summary: &StateSummary,
    q: f64,
    grid: &KGrid,
    k0: f64,
) -> (Vec<f64>, f64, f64) {
    let n = xs.len() as f64;
    let flat = summary.ns_mean - summary.pair_sum / (n - 1.0);
    let sharp = summary.pair_sum / (n * n - n);
    let s: Vec<f64> = grid.points().map(|k| structure_1d(xs, q, k[0])).collect();
    let pix: Vec<f64> = s
        .iter()
        .map(|&v| pattern_value(summary, v) * grid.spacing)
        .collect();
    let total = flat * 2.0 * k0 + sharp * structure_integral(xs, q, k0);
    let mean_s = s.iter().sum::<f64>() / s.len() as f64;
    let strength = sharp * (structure_1d(xs, q, q) - mean_s);
    (pix, total, strength)
}

fn detect(pix: &[f64], total: f64, photons: u64, seed: u64) -> Result<Vec<u64>> {
    let inside: f64 = pix.iter().sum();
    let mut w = pix.to_vec();
    w.push((total - inside).max(0.0));
    let mut c = multinomial(&w, photons, seed)?;
    c.pop();
    Ok(c)
}

fn draw_x(cfg: &SweepConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let p = sample_positions(Geometry::Gaussian1d { fwhm: cfg.fwhm }, n, cfg.k0, seed)?;
    Ok(p.coordinates.iter().map(|r| r.x).collect())
}

fn collective_trial(
    cfg: &SweepConfig,
    grid: &KGrid,
    n: usize,
    sp: &SeedSplitter,
    index: u64,
) -> Result<Trial> {
    let xs = draw_x(cfg, n, sp.derive("positions", index))?;
    let q = cfg.field.transfer().x;
    let summary = probe_summary(n);
    let (pix, total, strength) = probe_emission(&xs, &summary, q, grid, cfg.k0);
    let photons = (cfg.shots as f64 * summary.ns_mean).round() as u64;
    let counts = detect(&pix, total, photons, sp.derive("photons", index))?;
    let detected = counts.iter().sum();
    let image = DiffractionImage {
        grid: *grid,
        data: ImageData::Counts(counts),
        mode: ImageMode::Counts,
        n_atoms: n,
        k0: cfg.k0,
        theta_b: 0.0,
        clipped_pixels: 0,
    };
    let fit = match fit_peak(&image) {
        Ok(f) => f,
        Err(e) => {
            log::debug!("collective trial {index:#x} failed: {e}");
            return Ok(Trial {
                error: None,
                unresolved: false,
                fallback: false,
                detected,
                strength,
            });
        }
    };
    let fallback = fit.method == FitMethod::Centroid;
    let estimate = match cfg.collective_estimator {
        CollectiveEstimator::GaussianFit => fit.center[0],
        CollectiveEstimator::StructureMl => {
            let inv_sigma = 1.0 / cfg.sigma();
            let sd = fit.covariance[(0, 0)].sqrt();
            let reach = if fallback || !sd.is_finite() {
                inv_sigma
            } else {
                (6.0 * sd).clamp(0.1 * inv_sigma, inv_sigma)
            };
            let counts = image.counts().expect("count image");
            structure_ml(&xs, &summary, grid, counts, fit.center[0], reach)
        }
    };
    Ok(Trial {
        error: Some(estimate - q),
        unresolved: false,
        fallback,
        detected,
        strength,
    })
}

/// Maximizes the conditional multinomial likelihood of the detector counts
/// over `q ∈ [center - reach, center + reach]`, with the pattern computed
/// from the sampled positions.
fn structure_ml(
    xs: &[f64],
    summary: &StateSummary,
    grid: &KGrid,
    counts: &[u64],
    center: f64,
    reach: f64,
) -> f64 {
    let n = xs.len() as f64;
    let flat = summary.ns_mean - summary.pair_sum / (n - 1.0);
    let sharp = summary.pair_sum / (n * n - n);
    let ks: Vec<f64> = grid.points().map(|k| k[0]).collect();
    // e^{-i k x_j}, pixel-major
    let basis: Vec<Complex64> = ks
        .iter()
        .flat_map(|&k| xs.iter().map(move |&x| Complex64::from_polar(1.0, -k * x)))
        .collect();
    let loglik = |q: f64| -> f64 {
        let shift: Vec<Complex64> = xs
            .iter()
            .map(|&x| Complex64::from_polar(1.0, q * x))
            .collect();
        let (mut acc, mut norm) = (0.0, 0.0);
        for (row, &c) in basis.chunks_exact(xs.len()).zip(counts) {
            let a: Complex64 = row.iter().zip(&shift).map(|(b, s)| b * s).sum();
            let lambda = flat + sharp * a.norm_sqr();
            norm += lambda;
            if c > 0 {
                acc += c as f64 * lambda.ln();
            }
        }
        let total: u64 = counts.iter().sum();
        acc - total as f64 * norm.ln()
    };
    let steps = 40;
    let h = 2.0 * reach / steps as f64;
    let (best, _) = (0..=steps)
        .map(|i| {
            let q = center - reach + i as f64 * h;
            (q, loglik(q))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    golden_max(&loglik, best - h, best + h).0
}

/// Likelihood odds the best pair-fringe mode must hold over any distinct
/// rival (the usual "decisive" evidence level); below this the fringe
/// alias is reported as unresolved.
pub const ALIAS_ODDS: f64 = 100.0;

/// Harmonics kept in the expansion of `ln(1 + V cos u)`.
const HARMONICS: usize = 20;

/// Per-pair sufficient statistics for the fringe likelihood.
struct PairData {
    d: f64,
    detected: f64,
    /// `Σ_i n_i e^{-i h d k_i}` for `h = 1..=HARMONICS`.
    photon_moments: Vec<Complex64>,
    /// `Σ_i e^{-i d k_i}` over detector pixels.
    pixel_moment: Complex64,
}

fn pairs_trial(
    cfg: &SweepConfig,
    grid: &KGrid,
    n: usize,
    sp: &SeedSplitter,
    index: u64,
) -> Result<Trial> {
    let xs = draw_x(cfg, n, sp.derive("positions", index))?;
    let q = cfg.field.transfer().x;
    let summary = probe_summary(2);
    let visibility = summary.pair_sum / summary.ns_mean;
    let photons = (cfg.shots as f64 * summary.ns_mean).round() as u64;
    let ks: Vec<f64> = grid.points().map(|k| k[0]).collect();
    let mut pairs = Vec::with_capacity(n / 2);
    let mut strength = 0.0;
    let mut detected = 0;
    for (p, xy) in xs.chunks_exact(2).enumerate() {
        let (pix, total, s) = probe_emission(xy, &summary, q, grid, cfg.k0);
        strength += s;
        let counts = detect(
            &pix,
            total,
            photons,
            sp.derive("photons", index ^ (p as u64) << 20),
        )?;
        let d = xy[0] - xy[1];
        let mut moments = vec![Complex64::new(0.0, 0.0); HARMONICS];
        let mut pixel_moment = Complex64::new(0.0, 0.0);
        let mut np = 0u64;
        for (&c, &k) in counts.iter().zip(&ks) {
            let base = Complex64::from_polar(1.0, -d * k);
            pixel_moment += base;
            if c > 0 {
                np += c;
                let mut z = base;
                for m in moments.iter_mut() {
                    *m += z * c as f64;
                    z *= base;
                }
            }
        }
        detected += np;
        pairs.push(PairData {
            d,
            detected: np as f64,
            photon_moments: moments,
            pixel_moment,
        });
    }
    let sigma = cfg.sigma();
    let half = grid.max_abs_k();
    let estimate = pairs_ml(
        &pairs,
        visibility,
        ks.len() as f64,
        -half,
        half,
        0.02 / sigma,
    );
    let unresolved = estimate
        .as_ref()
        .is_some_and(|e| e.alias_gap < ALIAS_ODDS.ln());
    Ok(Trial {
        error: estimate.filter(|_| !unresolved).map(|e| e.q - q),
        unresolved,
        fallback: false,
        detected,
        strength,
    })
}

/// Joint log-likelihood of `q` given every pair's photons:
/// `Σ_p [Σ_photons ln(1 + V cos(d(q - k))) - n_p ln Z_p(q)]`.
fn pairs_loglik(pairs: &[PairData], coef: &[f64], visibility: f64, n_pixels: f64, q: f64) -> f64 {
    let mut total = 0.0;
    for p in pairs {
        if p.detected == 0.0 {
            continue;
        }
        let base = Complex64::from_polar(1.0, p.d * q);
        let mut z = base;
        let mut acc = 0.0;
        for (m, c) in p.photon_moments.iter().zip(coef) {
            acc += c * (z * m).re;
            z *= base;
        }
        let norm = n_pixels + visibility * (base * p.pixel_moment).re;
        total += acc - p.detected * norm.ln();
    }
    total
}

/// Joint maximum of the pair likelihood and its margin over the best
/// distinct competing mode.
struct PairsMl {
    q: f64,
    alias_gap: f64,
}

fn pairs_ml(
    pairs: &[PairData],
    visibility: f64,
    n_pixels: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Option<PairsMl> {
    if pairs.iter().all(|p| p.detected == 0.0) {
        return None;
    }
    // ln(1 + V cos u) = ln c + 2 Σ_h (-1)^{h+1} r^h cos(h u) / h
    let s = (1.0 - visibility * visibility).sqrt();
    let r = (1.0 - s) / visibility;
    let coef: Vec<f64> = (1..=HARMONICS)
        .map(|h| 2.0 * if h % 2 == 1 { 1.0 } else { -1.0 } * r.powi(h as i32) / h as f64)
        .collect();
    let ll = |q: f64| pairs_loglik(pairs, &coef, visibility, n_pixels, q);
    let m = ((hi - lo) / step).ceil() as usize + 1;
    let vals: Vec<f64> = (0..m).map(|i| ll(lo + i as f64 * step)).collect();
    let mut peaks: Vec<usize> = (0..m)
        .filter(|&i| (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == m || vals[i] >= vals[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(5);
    let mut modes: Vec<(f64, f64)> = peaks
        .into_iter()
        .map(|i| {
            let c = lo + i as f64 * step;
            golden_max(&ll, (c - step).max(lo), (c + step).min(hi))
        })
        .collect();
    modes.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (q, best) = *modes.first()?;
    let rival = modes
        .iter()
        .filter(|(x, _)| (x - q).abs() > 2.0 * step)
        .map(|m| m.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(PairsMl {
        q,
        alias_gap: best - rival,
    })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
