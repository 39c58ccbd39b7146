//! Browser bindings: a diffraction image with its peak/dip ratio, the
//! sum-rule phase diagram, and a thermometry decay curve.

use wasm_bindgen::prelude::*;

use stokesdiff::diffraction::{
    collective_pattern, direct_ratio, large_n_ratio, sample_positions, Geometry, KGrid,
    PatternMode, PatternOptions, RatioOptions,
};
use stokesdiff::metrology::{tau1_grid, thermometry_run, ThermometryConfig, BOLTZMANN, RB87_MASS};
use stokesdiff::spin_states::coherent_summary;
use stokesdiff::witness::{evaluate_sum_rules, phase_diagram_grid};
use stokesdiff::StateSummary;

const K0: f64 = 2.0 * std::f64::consts::PI / 780e-9;

fn js_err(e: stokesdiff::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A square image in row-major order, lowest `k_y` first.
#[wasm_bindgen]
pub struct Pattern {
    values: Vec<f64>,
    size: usize,
    ratio: f64,
    large_n: f64,
    theta_b: f64,
    half_angle: f64,
}

#[wasm_bindgen]
impl Pattern {
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }
    /// `(I(0) - I(θ_b)) / I(θ_b)` from a 360-point ring.
    #[wasm_bindgen(getter)]
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
    #[wasm_bindgen(getter)]
    pub fn large_n(&self) -> f64 {
        self.large_n
    }
    #[wasm_bindgen(getter)]
    pub fn theta_b(&self) -> f64 {
        self.theta_b
    }
    #[wasm_bindgen(getter)]
    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }
}

/// Collective pattern of a 2D Gaussian cloud at 780 nm, out to three
/// boundary angles.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn pattern(
    n_atoms: usize,
    ns_mean: f64,
    ns_var: f64,
    pair_sum: f64,
    fwhm_um: f64,
    size: usize,
    seed: u64,
    averaged: bool,
) -> Result<Pattern, JsError> {
    let s = StateSummary::new(n_atoms, ns_mean, ns_var, pair_sum).map_err(js_err)?;
    let pos = sample_positions(
        Geometry::Gaussian2d {
            fwhm: fwhm_um * 1e-6,
        },
        n_atoms,
        K0,
        seed,
    )
    .map_err(js_err)?;
    let theta_b = pos.boundary_angle();
    let half_angle = 3.0 * theta_b;
    let grid = KGrid::square([0.0, 0.0], K0 * half_angle.sin(), size).map_err(js_err)?;
    let options = PatternOptions {
        mode: if averaged {
            PatternMode::EnsembleAveraged
        } else {
            PatternMode::FixedPositions
        },
        ..Default::default()
    };
    let image = collective_pattern(&s, &pos, None, &grid, &options).map_err(js_err)?;
    let ratio = direct_ratio(&s, &pos, None, theta_b, &RatioOptions::default())
        .map_err(js_err)?
        .ratio;
    Ok(Pattern {
        values: image.values(),
        size,
        ratio,
        large_n: large_n_ratio(ns_mean, pair_sum, n_atoms),
        theta_b,
        half_angle,
    })
}

/// Verdict and margins for one state, as a short text block.
#[wasm_bindgen]
pub fn classify_state(
    n_atoms: usize,
    ns_mean: f64,
    ns_var: f64,
    pair_sum: f64,
) -> Result<String, JsError> {
    let s = StateSummary::new(n_atoms, ns_mean, ns_var, pair_sum).map_err(js_err)?;
    let r = evaluate_sum_rules(&s);
    let flag = |v: bool| if v { "violated" } else { "ok" };
    Ok(format!(
        "upper: {} ({:+.4})\nlower: {} ({:+.4})\nmoment: {} ({:+.4})\nverdict: {}",
        flag(r.violated_upper),
        r.margins.upper,
        flag(r.violated_lower),
        r.margins.lower,
        flag(r.violated_moment),
        r.margins.moment,
        r.verdict.as_str()
    ))
}

/// Label codes over `ΔN_s² ∈ [0, max]` (rows) by `P ∈ [-N/2, N(N-1)/p_scale]`
/// (columns). Codes follow `PhaseLabel::code`.
#[wasm_bindgen]
pub fn phase_diagram(
    n_atoms: usize,
    ns_mean: f64,
    rows: usize,
    cols: usize,
    p_scale: f64,
) -> Result<Vec<u8>, JsError> {
    if rows < 2 || cols < 2 || !(p_scale >= 1.0) {
        return Err(JsError::new("need rows, cols >= 2 and p_scale >= 1"));
    }
    let n = n_atoms as f64;
    let vmax = ns_mean * (n - ns_mean);
    let lin = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect()
    };
    let cells = phase_diagram_grid(
        n_atoms,
        ns_mean,
        &lin(0.0, vmax, rows),
        &lin(-n / 2.0, n * (n - 1.0) / p_scale, cols),
    )
    .map_err(js_err)?;
    Ok(cells.iter().map(|c| c.label.code()).collect())
}

/// Interleaved `[τ₁, S]` pairs followed by the fitted temperature (K).
#[wasm_bindgen]
pub fn thermometry_curve(
    n_atoms: usize,
    temperature_uk: f64,
    tau_max_ms: f64,
    points: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let t = temperature_uk * 1e-6;
    let tau_max = tau_max_ms * 1e-3;
    // exponent 0.3 at the longest delay for the 1 µK reference
    let sv2 = BOLTZMANN * 1e-6 / RB87_MASS;
    let grad = (0.3 / (sv2 * tau_max * tau_max)).sqrt();
    let pos =
        sample_positions(Geometry::Gaussian2d { fwhm: 1e-3 }, n_atoms, K0, seed).map_err(js_err)?;
    let s = coherent_summary(n_atoms, std::f64::consts::FRAC_PI_2, 0.0);
    let mut cfg = ThermometryConfig::new(t, grad, tau1_grid(tau_max, points));
    cfg.seed = seed;
    let curve = thermometry_run(&s, &pos, &cfg).map_err(js_err)?;
    let mut out: Vec<f64> = curve
        .tau1_grid
        .iter()
        .zip(&curve.peak_strengths)
        .flat_map(|(&a, &b)| [a, b])
        .collect();
    out.push(curve.fitted_temperature);
    Ok(out)
}
