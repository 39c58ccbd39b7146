//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- <substring>`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::Vector3;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use stokesdiff::diffraction::{
    background_points, collective_pattern, delta_k, direct_ratio, large_n_ratio, photon_counts,
    ring_radius, sample_positions, structure_term, time_resolved_ratio, Background,
    EnsemblePositions, Geometry, KGrid, PatternOptions, RatioOptions,
};
use stokesdiff::exact_oracle::{
    build_product_state, build_symmetric_dicke, collective_intensity, lindblad_independent_decay,
    ns_moments, pair_correlation_sum, singlet, ExactState, ProductSpec, Qubit,
};
use stokesdiff::export::{write_image_csv, write_table_csv, ArtifactHeader};
use stokesdiff::metrology::{
    estimate_gradient, fit_peak, imprint_gradient, loglog_slope, sensitivity_sweep, tau1_grid,
    thermometry_run, GradientField, ProbeMode, SweepConfig, ThermometryConfig, BOLTZMANN,
    RB87_MASS,
};
use stokesdiff::spin_states::{
    coherent_summary, dicke_summary, mixture_summary, product_summary, BlochAngles, HalfInt,
};
use stokesdiff::witness::{evaluate_sum_rules, exceeds_half_excitation_threshold};
use stokesdiff::StateSummary;

const K0: f64 = 8.055e6;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [Criterion; 8] = [
        ("oracle_equivalence", oracle_equivalence),
        ("ratio_constancy", ratio_constancy),
        ("ratio_values_at_scale", ratio_values_at_scale),
        ("witness_benchmarks", witness_benchmarks),
        ("gradiometer_displacement", gradiometer_displacement),
        ("sensitivity_scaling", sensitivity_scaling),
        ("thermometry", thermometry),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !out.passed {
            failed += 1;
        }
        println!(
            "criterion {} {:<26} {} [{:.1} s] {}",
            i + 1,
            name,
            if out.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn explicit_positions(coords: Vec<Vector3<f64>>, size: f64) -> EnsemblePositions {
    EnsemblePositions::from_coordinates(
        coords,
        Geometry::Explicit {
            transverse_size: size,
            longitudinal_size: None,
        },
        K0,
    )
    .unwrap()
}

fn summary_of(state: &ExactState) -> StateSummary {
    let (mean, var) = ns_moments(state);
    StateSummary::new_unchecked(
        state.n_atoms(),
        mean,
        var,
        pair_correlation_sum(state).unwrap(),
    )
}

fn summary_deviation(closed: &StateSummary, exact: &StateSummary) -> f64 {
    [
        closed.ns_mean - exact.ns_mean,
        closed.ns_var - exact.ns_var,
        closed.pair_sum - exact.pair_sum,
    ]
    .iter()
    .fold(0.0, |m, d| m.max(d.abs()))
}

/// Largest `|closed form - brute force|` over a few pixels.
fn pixel_deviation(
    summary: &StateSummary,
    state: &ExactState,
    pos: &EnsemblePositions,
    dks: &[Vector3<f64>],
) -> f64 {
    dks.iter()
        .map(|dk| {
            let s = structure_term(pos, None, *dk).unwrap();
            let closed = stokesdiff::diffraction::pattern_value(summary, s);
            (closed - collective_intensity(state, pos, *dk).unwrap()).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
struct RandomCase {
    n: usize,
    kind: u8,
    angles: Vec<(f64, f64)>,
    weights: Vec<f64>,
    coords: Vec<(f64, f64)>,
    dks: Vec<(f64, f64)>,
}

fn random_case() -> impl Strategy<Value = RandomCase> {
    (
        2usize..=8,
        0u8..4,
        prop::collection::vec((0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU), 24),
        prop::collection::vec(0.05f64..1.0, 3),
        prop::collection::vec((-2e-6f64..2e-6, -2e-6f64..2e-6), 8),
        prop::collection::vec((-3e6f64..3e6, -3e6f64..3e6), 3),
    )
        .prop_map(|(n, kind, angles, weights, coords, dks)| RandomCase {
            n,
            kind,
            angles,
            weights,
            coords,
            dks,
        })
}

/// Builds `(closed form, oracle state, permutation symmetric)` for a case.
fn realize(c: &RandomCase) -> (StateSummary, ExactState, bool) {
    let bloch = |i: usize| BlochAngles::new(c.angles[i].0, c.angles[i].1);
    let coherent = |i: usize| {
        let a = bloch(i);
        (
            coherent_summary(c.n, c.angles[i].0, c.angles[i].1),
            build_product_state(c.n, ProductSpec::Shared(Qubit::from_bloch(a))).unwrap(),
        )
    };
    let product = |offset: usize| {
        let spins: Vec<BlochAngles> = (0..c.n).map(|j| bloch(offset + j)).collect();
        let qs: Vec<Qubit> = spins.iter().map(|a| Qubit::from_bloch(*a)).collect();
        (
            product_summary(&spins),
            build_product_state(c.n, ProductSpec::PerAtom(&qs)).unwrap(),
        )
    };
    let mix = |parts: Vec<(StateSummary, ExactState)>| {
        let total: f64 = c.weights[..parts.len()].iter().sum();
        let w: Vec<f64> = c.weights[..parts.len()].iter().map(|x| x / total).collect();
        let closed: Vec<(f64, StateSummary)> =
            w.iter().zip(&parts).map(|(w, p)| (*w, p.0)).collect();
        let exact: Vec<(f64, ExactState)> = w.iter().zip(parts).map(|(w, p)| (*w, p.1)).collect();
        (
            mixture_summary(&closed).unwrap(),
            ExactState::mixture(&exact).unwrap(),
        )
    };
    match c.kind {
        0 => {
            let (s, e) = coherent(0);
            (s, e, true)
        }
        1 => {
            let (s, e) = product(0);
            (s, e, false)
        }
        2 => {
            let (s, e) = mix(vec![coherent(0), coherent(1), coherent(2)]);
            (s, e, true)
        }
        _ => {
            let (s, e) = mix(vec![product(0), product(8)]);
            (s, e, false)
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let tol = 1e-9;
    let mut worst = 0.0f64;
    // every symmetric Dicke state up to eight atoms
    let mut dicke_count = 0;
    for n in 2..=8usize {
        let coords: Vec<Vector3<f64>> = (0..n)
            .map(|j| Vector3::new(0.37e-6 * j as f64, 0.21e-6 * (j * j % 5) as f64, 0.0))
            .collect();
        let pos = explicit_positions(coords, 3e-6);
        let dks = [
            Vector3::zeros(),
            Vector3::new(1.1e6, -0.4e6, 0.0),
            Vector3::new(-2.3e6, 0.9e6, 0.0),
        ];
        for k in 0..=n {
            let closed = dicke_summary(
                n,
                HalfInt::from_twice(n as i64),
                HalfInt::from_twice(2 * k as i64 - n as i64),
            )
            .unwrap();
            let state = build_symmetric_dicke(n, k).unwrap();
            worst = worst
                .max(summary_deviation(&closed, &summary_of(&state)))
                .max(pixel_deviation(&closed, &state, &pos, &dks));
            dicke_count += 1;
        }
    }
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let worst_random = std::cell::Cell::new(0.0f64);
    let result = runner.run(&random_case(), |c| {
        let (closed, state, symmetric) = realize(&c);
        let mut dev = summary_deviation(&closed, &summary_of(&state));
        if symmetric {
            let coords = c.coords[..c.n]
                .iter()
                .map(|&(x, y)| Vector3::new(x, y, 0.0))
                .collect();
            let pos = explicit_positions(coords, 4e-6);
            let dks: Vec<Vector3<f64>> = c
                .dks
                .iter()
                .map(|&(x, y)| Vector3::new(x, y, 0.0))
                .collect();
            dev = dev.max(pixel_deviation(&closed, &state, &pos, &dks));
        }
        worst_random.set(worst_random.get().max(dev));
        if dev > tol {
            return Err(TestCaseError::fail(format!("deviation {dev:e} for {c:?}")));
        }
        Ok(())
    });
    worst = worst.max(worst_random.get());
    match result {
        Ok(()) => Outcome::new(
            worst <= tol,
            format!("{dicke_count} Dicke + 10000 random states, max |deviation| = {worst:.2e}"),
        ),
        Err(e) => Outcome::new(false, format!("{e}")),
    }
}

fn ratio_constancy() -> Outcome {
    let pos = explicit_positions(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.3e-6, 0.4e-6, 0.0),
            Vector3::new(-0.7e-6, 1.1e-6, 0.0),
            Vector3::new(0.5e-6, -0.9e-6, 0.0),
        ],
        2e-6,
    );
    let theta_b = pos.boundary_angle();
    let gamma = 1.0;
    let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
    let initial = build_symmetric_dicke(4, 2).unwrap();
    let states = lindblad_independent_decay(&initial, gamma, &times).unwrap();
    let ring = background_points(
        [0.0, 0.0],
        ring_radius(K0, theta_b),
        Background::Ring { samples: 360 },
        false,
    );
    let exact: Vec<f64> = states
        .iter()
        .map(|st| {
            let peak = collective_intensity(st, &pos, delta_k([0.0, 0.0], K0)).unwrap();
            let bg = ring
                .iter()
                .map(|p| collective_intensity(st, &pos, delta_k(*p, K0)).unwrap())
                .sum::<f64>()
                / ring.len() as f64;
            peak / bg - 1.0
        })
        .collect();
    let summary = dicke_summary(4, HalfInt::from_int(2), HalfInt::from_int(0)).unwrap();
    let fast = time_resolved_ratio(
        &summary,
        &pos,
        None,
        gamma,
        &times,
        theta_b,
        &RatioOptions::default(),
    )
    .unwrap();
    let lo = exact.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = exact.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mismatch = exact
        .iter()
        .zip(&fast)
        .map(|(e, (_, f))| (e - f).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        hi - lo < 1e-6 && mismatch < 1e-6,
        format!(
            "ratio {:.6}, spread over [0, 5/Γ] {:.1e}, fast path mismatch {:.1e}",
            exact[0],
            hi - lo,
            mismatch
        ),
    )
}

fn ratio_values_at_scale() -> Outcome {
    let n = 4000;
    let seeds = 20;
    let mean_ratio = |pair_sum: f64, theta_scale: f64| -> f64 {
        let s = StateSummary::new(n, 2000.0, 1500.0, pair_sum).unwrap();
        let total: f64 = (0..seeds)
            .map(|seed| {
                let pos =
                    sample_positions(Geometry::Gaussian2d { fwhm: 100e-6 }, n, K0, seed).unwrap();
                let theta = theta_scale * pos.boundary_angle();
                direct_ratio(&s, &pos, None, theta, &RatioOptions::default())
                    .unwrap()
                    .ratio
            })
            .sum();
        total / seeds as f64
    };
    let up = mean_ratio(2.5 * n as f64, 1.0);
    let down = mean_ratio(-0.35 * n as f64, 1.0);
    // far from the feature the background structure is N on average and
    // the image ratio approaches the large-N formula
    let far = mean_ratio(2.5 * n as f64, 3.0);
    let formula = large_n_ratio(2000.0, 2.5 * n as f64, n);
    let o1n = 2.0 * (1.0 + formula).powi(2) / n as f64;
    Outcome::new(
        (up - 5.006).abs() <= 0.05 && (down + 0.700).abs() <= 0.01 && (far - formula).abs() <= o1n,
        format!(
            "P=2.5N: {up:.4} (target 5.006±0.05); P=-0.35N: {down:.4} (target -0.700±0.01); \
             off-feature {far:.4} vs formula {formula:.4} (bound {o1n:.3})"
        ),
    )
}

fn witness_benchmarks() -> Outcome {
    let singlet_summary = summary_of(&singlet());
    let singlet_report = evaluate_sum_rules(&singlet_summary);
    let r = large_n_ratio(singlet_summary.ns_mean, singlet_summary.pair_sum, 2);
    let singlet_ok =
        singlet_report.violated_lower && exceeds_half_excitation_threshold(r, 2).unwrap();

    let dicke = summary_of(&build_symmetric_dicke(4, 2).unwrap());
    let dicke_report = evaluate_sum_rules(&dicke);
    let dicke_ok = dicke_report.violated_upper;

    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        2usize..=40,
        0u8..3,
        prop::collection::vec((0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU), 80),
        prop::collection::vec(0.05f64..1.0, 2),
    );
    let flagged = runner.run(&strategy, |(n, kind, angles, w)| {
        let product = |offset: usize| {
            let spins: Vec<BlochAngles> = (0..n)
                .map(|j| {
                    let (polar, az) = angles[offset + j];
                    // kind 2 pins every spin to the equator: half excitation
                    BlochAngles::new(
                        if kind == 2 {
                            std::f64::consts::FRAC_PI_2
                        } else {
                            polar
                        },
                        az,
                    )
                })
                .collect();
            product_summary(&spins)
        };
        let s = match kind {
            0 => product(0),
            _ => {
                let a = w[0] / (w[0] + w[1]);
                mixture_summary(&[(a, product(0)), (1.0 - a, product(40))]).unwrap()
            }
        };
        let rep = evaluate_sum_rules(&s);
        prop_assert!(
            !rep.is_entangled(),
            "separable state flagged: {s:?} {rep:?}"
        );
        Ok(())
    });
    let separable_ok = flagged.is_ok();
    Outcome::new(
        singlet_ok && dicke_ok && separable_ok,
        format!(
            "singlet lower-violated={} r={r:.4}; Dicke N=4 M=0 upper-violated={}; 10000 separable: {}",
            singlet_report.violated_lower,
            dicke_report.violated_upper,
            match flagged {
                Ok(()) => "none flagged".to_string(),
                Err(e) => e.to_string(),
            }
        ),
    )
}

fn gradiometer_displacement() -> Outcome {
    let n = 400;
    let pos = sample_positions(Geometry::Gaussian2d { fwhm: 100e-6 }, n, K0, 11).unwrap();
    let field = GradientField::new(Vector3::new(2.3e4, -1.1e4, 0.0), 1.0).unwrap();
    let phases = imprint_gradient(&pos, &field).unwrap();
    let s = coherent_summary(n, std::f64::consts::FRAC_PI_2, 0.0);
    let grid = KGrid::square([0.0, 0.0], 1.2e5, 121).unwrap();
    let img =
        collective_pattern(&s, &pos, Some(&phases), &grid, &PatternOptions::default()).unwrap();
    let truth = field.expected_center();
    let noiseless = fit_peak(&img).unwrap();
    let px_err = ((noiseless.center[0] - truth[0])
        .abs()
        .max((noiseless.center[1] - truth[1]).abs()))
        / grid.spacing;

    let seeds = 200;
    let mut err = [Vec::new(), Vec::new()];
    let mut var = [0.0; 2];
    for seed in 0..seeds {
        let counts = photon_counts(&img, 10_000, 1000 + seed).unwrap();
        let fit = fit_peak(&counts).unwrap();
        let est = estimate_gradient(&fit, field.probe_time).unwrap();
        for a in 0..2 {
            err[a].push(est.estimated_grad[a] - field.grad[a]);
            var[a] += est.covariance[(a, a)] / seeds as f64;
        }
    }
    let mut unbiased = true;
    let mut detail = format!("noiseless error {px_err:.3} px");
    for a in 0..2 {
        let m = err[a].iter().sum::<f64>() / seeds as f64;
        let sd =
            (err[a].iter().map(|e| (e - m).powi(2)).sum::<f64>() / (seeds as f64 - 1.0)).sqrt();
        let se = (var[a] / seeds as f64).sqrt();
        unbiased &= m.abs() <= 3.0 * se;
        detail += &format!(
            "; axis {a}: bias {m:.3e} = {:.2} σ_mean, empirical/reported sd {:.3}",
            m / se,
            sd / var[a].sqrt()
        );
    }
    Outcome::new(px_err <= 0.1 && unbiased, detail)
}

fn sensitivity_scaling() -> Outcome {
    let ns = vec![8, 16, 32, 64, 128];
    let run = |mode| {
        let mut cfg = SweepConfig::new(mode, ns.clone());
        cfg.trials = 1000;
        cfg.seed = 2024;
        sensitivity_sweep(&cfg).unwrap()
    };
    let col = run(ProbeMode::Collective);
    let pairs = run(ProbeMode::Pairs);
    let ratios: Vec<f64> = col
        .rows
        .iter()
        .zip(&pairs.rows)
        .map(|(c, p)| c.peak_strength / p.peak_strength)
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (ratio_slope, _) = loglog_slope(&xs, &ratios).unwrap();
    let factor_ok = ns
        .iter()
        .zip(&ratios)
        .filter(|(n, _)| **n >= 16)
        .all(|(n, r)| (r / *n as f64 - 1.0).abs() <= 0.1);
    let col_ok = (-1.15..=-0.85).contains(&col.slope);
    let pairs_ok = (-0.65..=-0.35).contains(&pairs.slope);
    let fmt_std = |r: &stokesdiff::metrology::SweepResult| {
        r.rows
            .iter()
            .map(|x| {
                let lost = if x.failures > 0 {
                    format!("({} unresolved)", x.failures)
                } else {
                    String::new()
                };
                format!("{:.3e}{lost}", x.std)
            })
            .collect::<Vec<_>>()
            .join(",")
    };
    Outcome::new(
        col_ok && pairs_ok && factor_ok && (ratio_slope - 1.0).abs() <= 0.1,
        format!(
            "collective slope {:.3} [std {}], pairs slope {:.3} [std {}], strength ratio/N {} (slope {:.3})",
            col.slope,
            fmt_std(&col),
            pairs.slope,
            fmt_std(&pairs),
            ns.iter()
                .zip(&ratios)
                .map(|(n, r)| format!("{:.3}", r / *n as f64))
                .collect::<Vec<_>>()
                .join(","),
            ratio_slope
        ),
    )
}

fn thermometry() -> Outcome {
    let n = 1000;
    let t_in = 1e-6;
    let tau_max = 1e-3;
    let sv2 = BOLTZMANN * t_in / RB87_MASS;
    // largest exponent |∇φ|² σ_v² τ² on the grid is 0.3
    let grad = (0.3 / (sv2 * tau_max * tau_max)).sqrt();
    let pos = sample_positions(Geometry::Gaussian2d { fwhm: 1e-3 }, n, K0, 5).unwrap();
    let s = coherent_summary(n, std::f64::consts::FRAC_PI_2, 0.0);
    let mut cfg = ThermometryConfig::new(t_in, grad, tau1_grid(tau_max, 12));
    cfg.seed = 31;
    let curve = thermometry_run(&s, &pos, &cfg).unwrap();
    let rel = curve.fitted_temperature / t_in - 1.0;
    cfg.temperature = 0.0;
    let frozen = thermometry_run(&s, &pos, &cfg).unwrap();
    let s0 = frozen.peak_strengths[0];
    let flat = frozen
        .peak_strengths
        .iter()
        .all(|v| (v - s0).abs() <= 1e-9 * s0);
    Outcome::new(
        rel.abs() <= 0.1 && flat && frozen.fitted_temperature.abs() < 1e-12,
        format!(
            "|∇φ| = {grad:.3e} rad/m, fitted T = {:.4e} K ({:+.2}%), T=0 curve flat at {s0:.1} (N²/4 = {})",
            curve.fitted_temperature,
            100.0 * rel,
            n * n / 4
        ),
    )
}

/// Artifacts from a counts image, a sweep and a thermometry curve.
fn artifacts() -> Vec<Vec<u8>> {
    let header = ArtifactHeader::new().with("seed", 99);
    let pos = sample_positions(Geometry::Gaussian2d { fwhm: 50e-6 }, 300, K0, 99).unwrap();
    let s = coherent_summary(300, std::f64::consts::FRAC_PI_2, 0.0);
    let grid = KGrid::square([0.0, 0.0], 2e5, 65).unwrap();
    let img = collective_pattern(&s, &pos, None, &grid, &PatternOptions::default()).unwrap();
    let counts = photon_counts(&img, 50_000, 99).unwrap();
    let mut a = Vec::new();
    write_image_csv(&mut a, &counts, &header).unwrap();

    let mut cfg = SweepConfig::new(ProbeMode::Pairs, vec![8, 16]);
    cfg.trials = 24;
    cfg.seed = 99;
    let sweep = sensitivity_sweep(&cfg).unwrap();
    let rows: Vec<Vec<f64>> = sweep
        .rows
        .iter()
        .map(|r| vec![r.n_atoms as f64, r.std, r.bias, r.mean_detected_photons])
        .collect();
    let mut b = Vec::new();
    write_table_csv(&mut b, &header, &["n", "std", "bias", "photons"], &rows).unwrap();

    let mut tc = ThermometryConfig::new(1e-6, 5e4, tau1_grid(1e-3, 8));
    tc.seed = 99;
    let curve = thermometry_run(&s, &pos, &tc).unwrap();
    let rows: Vec<Vec<f64>> = curve
        .tau1_grid
        .iter()
        .zip(&curve.peak_strengths)
        .map(|(t, v)| vec![*t, *v])
        .collect();
    let mut c = Vec::new();
    write_table_csv(&mut c, &header, &["tau1", "strength"], &rows).unwrap();
    vec![a, b, c]
}

fn reproducibility() -> Outcome {
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(artifacts)
    };
    let one = in_pool(1);
    let four = in_pool(4);
    let again = in_pool(4);
    let bytes: usize = one.iter().map(|a| a.len()).sum();
    Outcome::new(
        one == four && four == again,
        format!(
            "{} artifacts, {bytes} bytes, 1 vs 4 threads identical: {}",
            one.len(),
            one == four
        ),
    )
}
