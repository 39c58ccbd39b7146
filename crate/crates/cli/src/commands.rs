//! Subcommand implementations.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use stokesdiff::diffraction::{
    collective_pattern, delta_k, direct_ratio, large_n_ratio, pattern_value, photon_counts,
    sample_positions, structure_term, time_resolved_ratio, Background, EnsemblePositions, Geometry,
    KGrid, PatternOptions, RatioOptions, FWHM_PER_SIGMA,
};
use stokesdiff::exact_oracle::{
    build_product_state, build_symmetric_dicke, collective_intensity, ns_moments,
    pair_correlation_sum, ExactState, ProductSpec, Qubit,
};
use stokesdiff::metrology::{
    estimate_gradient, fit_peak, imprint_gradient, reference_sensitivities, sensitivity_sweep,
    tau1_grid, thermometry_run, GradientField, SweepConfig, ThermometryConfig, BOLTZMANN,
};
use stokesdiff::rng::SeedSplitter;
use stokesdiff::spin_states::{
    coherent_summary, dicke_summary, mixture_summary, BlochAngles, HalfInt,
};
use stokesdiff::witness::{
    dicke_strength_map, evaluate_sum_rules, full_dicke_grid, phase_diagram_grid, Feature,
};
use stokesdiff::StateSummary;

use crate::config::{GradiometerMode, RunConfig, SweepTarget};
use crate::output::Output;
use crate::CliError;

/// Deviation above which the oracle check fails.
pub const ORACLE_TOL: f64 = 1e-9;

fn positions(cfg: &RunConfig, n: usize) -> Result<EnsemblePositions, CliError> {
    draw(cfg, n, 0)
}

/// Realization `index` of the configured geometry.
fn draw(cfg: &RunConfig, n: usize, index: u64) -> Result<EnsemblePositions, CliError> {
    let seed = SeedSplitter::new(cfg.seed).derive("positions", index);
    let pos = sample_positions(cfg.geometry()?.geometry()?, n, cfg.optics.k0(), seed)?;
    if let Some(w) = pos.dilute_warning() {
        log::warn!("{w}");
    }
    Ok(pos)
}

fn summary_lines(out: &mut Output, s: &StateSummary) {
    out.line(format!(
        "state: N = {}, <N_s> = {}, ΔN_s² = {}, P = {}",
        s.n_atoms, s.ns_mean, s.ns_var, s.pair_sum
    ));
}

pub fn diffract(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let summary = cfg.state()?.summary()?;
    let pos = positions(cfg, summary.n_atoms)?;
    let (ratio, peak, background, theta_b) = mean_ratio(cfg, &summary)?;
    let k0 = pos.k0;
    let d = &cfg.diffract;
    let half_angle = d.half_angle.map_or(3.0 * theta_b, |a| a.value());
    let grid = KGrid::square([0.0, 0.0], k0 * half_angle.sin(), d.grid_points)?;
    let options = PatternOptions {
        mode: d.mode.mode(),
        envelope: cfg.optics.envelope(),
    };
    let image = collective_pattern(&summary, &pos, None, &grid, &options)?;

    summary_lines(out, &summary);
    out.line(format!("boundary angle θ_b = {theta_b:.6e} rad"));
    out.line(format!(
        "ratio = {ratio:.4} (peak {peak:.6e}, ring background {background:.6e}, {} realization(s))",
        d.realizations
    ));
    out.line(format!(
        "large-N prediction = {:.4}",
        large_n_ratio(summary.ns_mean, summary.pair_sum, summary.n_atoms)
    ));
    out.line(format!(
        "feature: {}",
        Feature::of(summary.pair_sum).as_str()
    ));
    if image.clipped_pixels > 0 {
        out.line(format!(
            "warning: {} negative pixels clipped to 0",
            image.clipped_pixels
        ));
    }
    out.image("intensity", &image)?;
    if d.photons > 0 {
        let seed = SeedSplitter::new(cfg.seed).derive("photons", 0);
        let counts = photon_counts(&image, d.photons, seed)?;
        out.image("counts", &counts)?;
        out.line(format!("photons drawn: {}", d.photons));
    }

    if let Some(l) = &cfg.laser {
        let laser = l.laser(k0);
        let gamma = laser.effective_scattering_rate()?;
        for w in laser.warnings() {
            out.line(format!("warning: {w}"));
        }
        out.line(format!(
            "effective scattering rate Γ = {gamma:.6e} 1/s (emission time {:.6e} s)",
            1.0 / gamma
        ));
        if !d.collection_times.is_empty() {
            let taus: Vec<f64> = d.collection_times.iter().map(|t| t.value()).collect();
            let series = time_resolved_ratio(
                &summary,
                &pos,
                None,
                gamma,
                &taus,
                theta_b,
                &ratio_options(cfg),
            )?;
            let rows: Vec<Vec<f64>> = series.iter().map(|&(t, r)| vec![t, r]).collect();
            out.table("time_resolved", &["tau_c_s", "ratio"], &rows)?;
        }
    } else if !d.collection_times.is_empty() {
        return Err(CliError::Config(
            "diffract.collection_times: needs a [laser] section for Γ".into(),
        ));
    }
    Ok(())
}

fn ratio_options(cfg: &RunConfig) -> RatioOptions {
    RatioOptions {
        center: [0.0, 0.0],
        background: Background::Ring {
            samples: cfg.diffract.ring_samples,
        },
    }
}

/// [`ratio_of`] averaged over `diffract.realizations` position draws; the
/// image and time series use the first draw.
fn mean_ratio(cfg: &RunConfig, summary: &StateSummary) -> Result<(f64, f64, f64, f64), CliError> {
    let k = cfg.diffract.realizations;
    let mut acc = [0.0; 4];
    for i in 0..k {
        let pos = draw(cfg, summary.n_atoms, i as u64)?;
        let r = ratio_of(cfg, summary, &pos)?;
        for (a, v) in acc.iter_mut().zip([r.0, r.1, r.2, r.3]) {
            *a += v / k as f64;
        }
    }
    Ok((acc[0], acc[1], acc[2], acc[3]))
}

/// `(ratio, peak, background, θ_b)` read directly from the positions.
fn ratio_of(
    cfg: &RunConfig,
    summary: &StateSummary,
    pos: &EnsemblePositions,
) -> Result<(f64, f64, f64, f64), CliError> {
    let theta_b = pos.boundary_angle();
    let r = direct_ratio(summary, pos, None, theta_b, &ratio_options(cfg))?;
    Ok((r.ratio, r.peak, r.background, theta_b))
}

pub fn witness(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let s = cfg.state()?.summary()?;
    let r = evaluate_sum_rules(&s);
    summary_lines(out, &s);
    let mark = |v: bool| if v { "violated" } else { "satisfied" };
    out.line(format!(
        "upper  P <= (N-1)ΔN_s²            {:<9} margin {:+.6e}",
        mark(r.violated_upper),
        r.margins.upper
    ));
    out.line(format!(
        "lower  P >= -ΔN_s²                {:<9} margin {:+.6e}",
        mark(r.violated_lower),
        r.margins.lower
    ));
    out.line(format!(
        "moment (N-1)P >= <N_s²> - N<N_s>  {:<9} margin {:+.6e}",
        mark(r.violated_moment),
        r.margins.moment
    ));
    let q = r.qualitative;
    out.line(format!(
        "qualitative: vanishing-uncertainty {}, maximum-uncertainty dip {}, half-excitation {}",
        q.vanishing_uncertainty, q.maximum_uncertainty_dip, q.half_excitation
    ));
    out.line(format!("verdict: {}", r.verdict.as_str()));

    let w = &cfg.witness;
    if w.phase_diagram {
        let n = s.n_atoms as f64;
        let vmax = s.max_variance();
        let lin = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
            (0..k)
                .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                .collect()
        };
        let cells = phase_diagram_grid(
            s.n_atoms,
            s.ns_mean,
            &lin(0.0, vmax, w.var_points),
            &lin(-n / 2.0, n * (n - 1.0), w.p_points),
        )?;
        let rows: Vec<Vec<f64>> = cells
            .iter()
            .map(|c| vec![c.ns_var, c.pair_sum, c.label.code() as f64])
            .collect();
        out.table("phase_diagram", &["ns_var", "pair_sum", "label"], &rows)?;
    }
    if w.dicke_table {
        let (js, ms) = full_dicke_grid(s.n_atoms);
        let rows: Vec<Vec<f64>> = dicke_strength_map(s.n_atoms, &js, &ms)?
            .iter()
            .map(|d| {
                let sign = match d.feature {
                    Feature::Peak => 1.0,
                    Feature::Dip => -1.0,
                    Feature::Flat => 0.0,
                };
                vec![d.j.value(), d.m.value(), d.pair_sum, sign]
            })
            .collect();
        out.table("dicke", &["j", "m", "pair_sum", "feature"], &rows)?;
    }
    Ok(())
}

pub fn gradiometer(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    match cfg.gradiometer.mode {
        GradiometerMode::Estimate => gradiometer_estimate(cfg, out),
        GradiometerMode::Sweep => gradiometer_sweep(cfg, out),
    }
}

fn gradiometer_estimate(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let g = &cfg.gradiometer;
    let summary = cfg.state()?.summary()?;
    let pos = positions(cfg, summary.n_atoms)?;
    let grad = Vector3::new(
        g.gradient[0].value(),
        g.gradient[1].value(),
        g.gradient[2].value(),
    );
    let field = GradientField::new(grad, g.probe_time.value())?;
    let phases = imprint_gradient(&pos, &field)?;
    let size = pos.transverse_size();
    let half = match g.half_extent {
        Some(h) => h.value(),
        None => {
            let c = field.expected_center();
            1.5 * c[0].abs().max(c[1].abs()) + 6.0 * FWHM_PER_SIGMA / size
        }
    };
    let grid = KGrid::square([0.0, 0.0], half, g.grid_points)?;
    let options = PatternOptions {
        mode: cfg.diffract.mode.mode(),
        envelope: cfg.optics.envelope(),
    };
    let image = collective_pattern(&summary, &pos, Some(&phases), &grid, &options)?;
    let seed = SeedSplitter::new(cfg.seed).derive("photons", 0);
    let counts = photon_counts(&image, g.photons, seed)?;
    let fit = fit_peak(&counts)?;
    let est = estimate_gradient(&fit, field.probe_time)?;
    let refs = reference_sensitivities(summary.n_atoms, field.probe_time, size, pos.k0)?;

    summary_lines(out, &summary);
    out.line(format!(
        "true ∇η = [{:.6e}, {:.6e}, {:.6e}] rad/(s*m)",
        grad.x, grad.y, grad.z
    ));
    out.line(format!(
        "estimated ∇η = [{:.6e} ± {:.3e}, {:.6e} ± {:.3e}] rad/(s*m) (z not observable)",
        est.estimated_grad.x,
        est.covariance[(0, 0)].sqrt(),
        est.estimated_grad.y,
        est.covariance[(1, 1)].sqrt()
    ));
    out.line(format!(
        "fit: method {}, {} iterations, {} photons, reduced deviance {:.4}",
        fit.method.as_str(),
        fit.iterations,
        est.photons_used,
        est.fit_residual
    ));
    out.line(format!(
        "reference sensitivities: diffraction {:.4e}, pairs (SQL) {:.4e}, Mach-Zehnder {:.4e} rad/(s*m)",
        refs.diffraction, refs.sql_pairs, refs.mzi
    ));
    out.image("counts", &counts)?;
    Ok(())
}

fn gradiometer_sweep(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let s = &cfg.gradiometer.sweep;
    for &probe in &s.probes {
        let mut sc = SweepConfig::new(probe.into(), s.n_list.clone());
        sc.fwhm = s.fwhm.value();
        sc.k0 = cfg.optics.k0();
        sc.shots = s.shots;
        sc.trials = s.trials;
        sc.seed = SeedSplitter::new(cfg.seed).derive("sweep", 0);
        sc.collective_estimator = s.estimator.into();
        let sigma = sc.fwhm / FWHM_PER_SIGMA;
        let probe_time = s.probe_time.value();
        let gx = s.gradient.map_or(3.7 / sigma / probe_time, |q| q.value());
        sc.field = GradientField::new(Vector3::new(gx, 0.0, 0.0), probe_time)?;
        let r = sensitivity_sweep(&sc)?;
        let name = r.mode.as_str();
        out.line(format!(
            "{name}: log-log slope of std vs N = {:.4} (intercept {:.4})",
            r.slope, r.intercept
        ));
        for row in &r.rows {
            out.line(format!(
                "  N = {:>5}: std {:.4e}, bias {:+.3e}, failures {} ({} unresolved)",
                row.n_atoms, row.std, row.bias, row.failures, row.unresolved
            ));
        }
        let rows: Vec<Vec<f64>> = r
            .rows
            .iter()
            .map(|x| {
                vec![
                    x.n_atoms as f64,
                    x.trials as f64,
                    x.failures as f64,
                    x.unresolved as f64,
                    x.fallbacks as f64,
                    x.bias,
                    x.std,
                    x.mean_detected_photons,
                    x.peak_strength,
                ]
            })
            .collect();
        out.table(
            &format!("sweep_{name}"),
            &[
                "n_atoms",
                "trials",
                "failures",
                "unresolved",
                "fallbacks",
                "bias",
                "std",
                "mean_detected_photons",
                "peak_strength",
            ],
            &rows,
        )?;
    }
    Ok(())
}

pub fn thermometry(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let t = cfg
        .thermometry
        .as_ref()
        .ok_or_else(|| CliError::Config("thermometry: missing [thermometry] section".into()))?;
    let summary = cfg.state()?.summary()?;
    let pos = positions(cfg, summary.n_atoms)?;
    let temperature = t.temperature.value();
    let tau_max = t.tau_max.value();
    let grad = match t.phase_gradient {
        Some(g) => g.value(),
        None if temperature > 0.0 => {
            let sv2 = BOLTZMANN * temperature / t.mass.value();
            (0.3 / (sv2 * tau_max * tau_max)).sqrt()
        }
        None => {
            return Err(CliError::Config(
                "thermometry.phase_gradient: required when temperature is 0".into(),
            ))
        }
    };
    let mut tc = ThermometryConfig::new(temperature, grad, tau1_grid(tau_max, t.tau_points));
    tc.mass = t.mass.value();
    tc.model = t.model()?;
    tc.axes = t.axes;
    tc.dephasing_time = t.dephasing_time.value();
    tc.seed = SeedSplitter::new(cfg.seed).derive("motion", 0);
    let curve = thermometry_run(&summary, &pos, &tc)?;

    summary_lines(out, &summary);
    out.line(format!(
        "phase gradient = {grad:.6e} rad/m, model {}",
        curve.model.as_str()
    ));
    out.line(format!("input T = {temperature:.6e} K"));
    out.line(format!("fitted T = {:.6e} K", curve.fitted_temperature));
    out.line(format!(
        "fitted <Δr²>/τ₁² = {:.6e} m²/s² over {} axes",
        curve.fitted_msd_coefficient, t.axes
    ));
    for w in &curve.warnings {
        out.line(format!("warning: {w}"));
    }
    let rows: Vec<Vec<f64>> = curve
        .tau1_grid
        .iter()
        .zip(&curve.peak_strengths)
        .map(|(&tau, &s)| vec![tau, s])
        .collect();
    out.table("curve", &["tau1_s", "peak_strength"], &rows)?;
    Ok(())
}

/// Closed forms against brute force for Dicke, coherent, product and
/// mixed states up to `max_n` spins. Returns the largest deviation.
pub fn oracle_check(cfg: &RunConfig, out: &mut Output) -> Result<f64, CliError> {
    let max_n = cfg.oracle.max_n;
    let k0 = cfg.optics.k0();
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for n in 1..=max_n {
        let mut dev_n = 0.0f64;
        let mut cases = 0usize;
        // pixels need two or more atoms; N = 1 checks the moments only
        let pos = if n >= 2 {
            let coords: Vec<Vector3<f64>> = (0..n)
                .map(|j| {
                    let a = 2.399_963 * j as f64;
                    let r = 0.4e-6 * (j as f64 + 0.5).sqrt();
                    Vector3::new(r * a.cos(), r * a.sin(), 0.0)
                })
                .collect();
            Some(EnsemblePositions::from_coordinates(
                coords,
                Geometry::Explicit {
                    transverse_size: 2e-6,
                    longitudinal_size: None,
                },
                k0,
            )?)
        } else {
            None
        };
        let dks: Vec<Vector3<f64>> = [[0.0, 0.0], [1.1e6, 0.0], [-0.7e6, 2.3e6]]
            .iter()
            .map(|&k| delta_k(k, k0))
            .collect();
        let mut compare = |closed: &StateSummary, exact: &ExactState| -> Result<(), CliError> {
            let (mean, var) = ns_moments(exact);
            let p = pair_correlation_sum(exact)?;
            let mut d = (closed.ns_mean - mean)
                .abs()
                .max((closed.ns_var - var).abs())
                .max((closed.pair_sum - p).abs());
            if let Some(pos) = &pos {
                for dk in &dks {
                    let s = structure_term(pos, None, *dk)?;
                    let c = pattern_value(closed, s);
                    d = d.max((c - collective_intensity(exact, pos, *dk)?).abs());
                }
            }
            dev_n = dev_n.max(d);
            cases += 1;
            Ok(())
        };
        for k in 0..=n {
            let m = HalfInt::from_twice(2 * k as i64 - n as i64);
            let j = HalfInt::from_twice(n as i64);
            compare(&dicke_summary(n, j, m)?, &build_symmetric_dicke(n, k)?)?;
        }
        let mut coherent = Vec::new();
        for (polar, az) in [(FRAC_PI_2, 0.0), (0.7, 1.3), (2.5, -0.4)] {
            let q = Qubit::from_bloch(BlochAngles::new(polar, az));
            let exact = build_product_state(n, ProductSpec::Shared(q))?;
            let closed = coherent_summary(n, polar, az);
            compare(&closed, &exact)?;
            coherent.push((closed, exact));
        }
        let w = [0.3, 0.7];
        let mixed =
            ExactState::mixture(&[(w[0], coherent[0].1.clone()), (w[1], coherent[1].1.clone())])?;
        let closed = mixture_summary(&[(w[0], coherent[0].0), (w[1], coherent[1].0)])?;
        compare(&closed, &mixed)?;
        worst = worst.max(dev_n);
        out.line(format!(
            "N = {n:>2}: {cases:>2} states, max |closed - exact| = {dev_n:.3e}"
        ));
        rows.push(vec![n as f64, cases as f64, dev_n]);
    }
    let pass = worst < ORACLE_TOL;
    out.line(format!(
        "max deviation {worst:.3e} (tolerance {ORACLE_TOL:e}): {}",
        if pass { "PASS" } else { "FAIL" }
    ));
    out.table("deviations", &["n_atoms", "states", "max_deviation"], &rows)?;
    Ok(worst)
}

/// One row per swept value: `[index, ...target metrics]`.
pub fn sweep(base: &toml::Table, cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep: missing [sweep] section".into()))?;
    if spec.values.is_empty() {
        return Err(CliError::Config("sweep.values: empty".into()));
    }
    let mut rows = Vec::new();
    for (i, v) in spec.values.iter().enumerate() {
        let mut table = base.clone();
        crate::config::set_path(&mut table, &spec.key, v.clone())?;
        let run = crate::config::resolve(table, None)
            .map_err(|e| CliError::Config(format!("sweep value #{i} ({v}): {e}")))?;
        let label = v.to_string();
        match spec.target {
            SweepTarget::Diffract => {
                let s = run.state()?.summary()?;
                let (ratio, peak, background, theta_b) = mean_ratio(&run, &s)?;
                out.line(format!("{} = {label}: ratio {ratio:.4}", spec.key));
                rows.push(vec![i as f64, ratio, peak, background, theta_b]);
            }
            SweepTarget::Witness => {
                let s = run.state()?.summary()?;
                let r = evaluate_sum_rules(&s);
                out.line(format!("{} = {label}: {}", spec.key, r.verdict.as_str()));
                rows.push(vec![
                    i as f64,
                    r.margins.upper,
                    r.margins.lower,
                    r.margins.moment,
                    if r.is_entangled() { 1.0 } else { 0.0 },
                ]);
            }
        }
    }
    let columns: &[&str] = match spec.target {
        SweepTarget::Diffract => &["index", "ratio", "peak", "background", "theta_b"],
        SweepTarget::Witness => &[
            "index",
            "margin_upper",
            "margin_lower",
            "margin_moment",
            "entangled",
        ],
    };
    out.table("table", columns, &rows)?;
    Ok(())
}
