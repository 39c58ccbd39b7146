//! Sufficient statistics of permutation-symmetric spin states.
//!
//! A state of N two-level atoms (ground `|g>`, excited `|s>`) enters the
//! far-field pattern only through three numbers: the mean excitation
//! `<N_s>`, its variance `ΔN_s²`, and the pair-correlation sum
//! `P = Σ_{j≠j'} <σ⁺_{j'} σ⁻_j>`. [`StateSummary`] carries exactly those.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative slack used when validating summary invariants.
const INVARIANT_RTOL: f64 = 1e-9;

/// `(N, <N_s>, ΔN_s², P)` of a many-body spin state.
///
/// The variance is stored rather than the standard deviation so that
/// mixtures combine exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSummary {
    pub n_atoms: usize,
    pub ns_mean: f64,
    pub ns_var: f64,
    pub pair_sum: f64,
}

impl StateSummary {
    /// Builds a summary and checks the physical bounds.
    pub fn new(n_atoms: usize, ns_mean: f64, ns_var: f64, pair_sum: f64) -> Result<Self> {
        let s = Self::new_unchecked(n_atoms, ns_mean, ns_var, pair_sum);
        s.validate()?;
        Ok(s)
    }

    /// Builds a summary without checking bounds. Used to probe unphysical
    /// corners of the `(<N_s>, ΔN_s, P)` space.
    pub fn new_unchecked(n_atoms: usize, ns_mean: f64, ns_var: f64, pair_sum: f64) -> Self {
        Self {
            n_atoms,
            ns_mean,
            ns_var,
            pair_sum,
        }
    }

    fn slack(&self) -> f64 {
        let n = self.n_atoms as f64;
        INVARIANT_RTOL * (n * n).max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_atoms as f64;
        let tol = self.slack();
        if self.n_atoms == 0 {
            return Err(Error::domain("n_atoms", "must be at least 1"));
        }
        if ![self.ns_mean, self.ns_var, self.pair_sum]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::domain("state summary", "non-finite entry"));
        }
        if self.ns_mean < -tol || self.ns_mean > n + tol {
            return Err(Error::domain(
                "ns_mean",
                format!("{} outside [0, {}]", self.ns_mean, self.n_atoms),
            ));
        }
        if self.ns_var < -tol || self.ns_var > self.max_variance() + tol {
            return Err(Error::domain(
                "ns_var",
                format!(
                    "{} outside [0, <N_s>(N - <N_s>) = {}]",
                    self.ns_var,
                    self.max_variance()
                ),
            ));
        }
        let (lo, hi) = self.pair_sum_bounds();
        if self.pair_sum < lo - tol || self.pair_sum > hi + tol {
            return Err(Error::domain(
                "pair_sum",
                format!("{} outside [{lo}, {hi}]", self.pair_sum),
            ));
        }
        Ok(())
    }

    pub fn is_physical(&self) -> bool {
        self.validate().is_ok()
    }

    /// Largest variance a count bounded in `[0, N]` can have at this mean.
    pub fn max_variance(&self) -> f64 {
        self.ns_mean * (self.n_atoms as f64 - self.ns_mean)
    }

    /// `[-N/2, N(N-1)]`.
    pub fn pair_sum_bounds(&self) -> (f64, f64) {
        let n = self.n_atoms as f64;
        (-n / 2.0, n * (n - 1.0))
    }

    /// `<N_s²>`.
    pub fn ns_second_moment(&self) -> f64 {
        self.ns_var + self.ns_mean * self.ns_mean
    }

    pub fn ns_std(&self) -> f64 {
        self.ns_var.max(0.0).sqrt()
    }

    /// `<J_x²> + <J_y²> = P + N/2`.
    pub fn transverse_second_moment(&self) -> f64 {
        self.pair_sum + self.n_atoms as f64 / 2.0
    }

    /// Pure single-spin dephasing at rate `gamma` for a time `tau`.
    ///
    /// Every pair correlation acquires `exp(-2 γ τ)`; the excitation number
    /// is conserved, so mean and variance are unchanged.
    pub fn dephased(&self, gamma: f64, tau: f64) -> Result<Self> {
        apply_homogeneous_dephasing(self, gamma, tau)
    }
}

/// A half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const fn from_twice(twice: i64) -> Self {
        Self(twice)
    }

    pub const fn from_int(v: i64) -> Self {
        Self(2 * v)
    }

    /// `None` unless `2v` is an integer.
    pub fn from_f64(v: f64) -> Option<Self> {
        let t = 2.0 * v;
        (t.is_finite() && t == t.round() && t.abs() < 9.0e15).then_some(Self(t as i64))
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Checks that `(J, M)` label a total-spin eigenstate of `n_atoms` spins.
pub fn validate_quantum_numbers(n_atoms: usize, j: HalfInt, m: HalfInt) -> Result<()> {
    let n2 = n_atoms as i64;
    let (tj, tm) = (j.twice(), m.twice());
    if tj < 0 || tj > n2 {
        return Err(Error::domain(
            "total spin J",
            format!("J = {j} outside [0, N/2] for N = {n_atoms}"),
        ));
    }
    if (n2 - tj) % 2 != 0 {
        return Err(Error::domain(
            "total spin J",
            format!("N/2 - J must be an integer (N = {n_atoms}, J = {j})"),
        ));
    }
    if tm.abs() > tj || (tj - tm) % 2 != 0 {
        return Err(Error::domain(
            "magnetic number M",
            format!("M = {m} not in {{-J, ..., J}} for J = {j}"),
        ));
    }
    Ok(())
}

/// Pair-correlation sum of the eigenstate `|J, M>`: `J(J+1) - M² - N/2`.
pub fn dicke_pair_sum(n_atoms: usize, j: HalfInt, m: HalfInt) -> f64 {
    let (j, m) = (j.value(), m.value());
    j * (j + 1.0) - m * m - n_atoms as f64 / 2.0
}

/// Statistics of a simultaneous eigenstate of `J²` and `J_z`.
///
/// Depends only on `(J, M)`, not on which of the degenerate irreps the
/// state lives in.
pub fn dicke_summary(n_atoms: usize, j: HalfInt, m: HalfInt) -> Result<StateSummary> {
    if n_atoms == 0 {
        return Err(Error::domain("n_atoms", "must be at least 1"));
    }
    validate_quantum_numbers(n_atoms, j, m)?;
    Ok(StateSummary::new_unchecked(
        n_atoms,
        m.value() + n_atoms as f64 / 2.0,
        0.0,
        dicke_pair_sum(n_atoms, j, m),
    ))
}

/// Direction of a single spin on the Bloch sphere. `polar = 0` is `|g>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAngles {
    pub polar: f64,
    pub azimuth: f64,
}

impl BlochAngles {
    pub fn new(polar: f64, azimuth: f64) -> Self {
        Self { polar, azimuth }
    }

    /// Probability of `|s>`.
    pub fn excitation(&self) -> f64 {
        let s = (self.polar / 2.0).sin();
        s * s
    }

    /// `<σ⁻> = <ψ|g><s|ψ>` for `|ψ> = cos(θ/2)|g> + e^{iφ} sin(θ/2)|s>`.
    pub fn lowering(&self) -> Complex64 {
        Complex64::from_polar(self.polar.sin() / 2.0, self.azimuth)
    }

    /// Amplitudes `(c_g, c_s)`.
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        let (half_s, half_c) = (self.polar / 2.0).sin_cos();
        (
            Complex64::new(half_c, 0.0),
            Complex64::from_polar(half_s, self.azimuth),
        )
    }
}

/// Spin-coherent state: `N` identical spins along `(polar, azimuth)`.
pub fn coherent_summary(n_atoms: usize, polar: f64, azimuth: f64) -> StateSummary {
    let _ = azimuth; // P is azimuth independent
    let n = n_atoms as f64;
    let p = (polar / 2.0).sin().powi(2);
    let c2 = polar.sin().powi(2) / 4.0;
    StateSummary::new_unchecked(n_atoms, n * p, n * p * (1.0 - p), n * (n - 1.0) * c2)
}

/// Product state with an arbitrary direction per atom.
///
/// `P = |Σ_j <σ⁻_j>|² - Σ_j |<σ⁻_j>|²`.
pub fn product_summary(spins: &[BlochAngles]) -> StateSummary {
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut total = Complex64::new(0.0, 0.0);
    let mut self_terms = 0.0;
    for s in spins {
        let p = s.excitation();
        let c = s.lowering();
        mean += p;
        var += p * (1.0 - p);
        total += c;
        self_terms += c.norm_sqr();
    }
    StateSummary::new_unchecked(spins.len(), mean, var, total.norm_sqr() - self_terms)
}

/// Convex mixture of summaries.
///
/// Mean and `P` mix linearly; the variance is rebuilt from the mixed first
/// and second moments.
pub fn mixture_summary(components: &[(f64, StateSummary)]) -> Result<StateSummary> {
    let first = components
        .first()
        .ok_or_else(|| Error::domain("mixture", "no components"))?;
    let n_atoms = first.1.n_atoms;
    let mut wsum = 0.0;
    let (mut m1, mut m2, mut p) = (0.0, 0.0, 0.0);
    for (w, s) in components {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::domain("mixture weight", format!("{w} is negative")));
        }
        if s.n_atoms != n_atoms {
            return Err(Error::domain(
                "mixture",
                format!("components disagree on N ({} vs {n_atoms})", s.n_atoms),
            ));
        }
        wsum += w;
        m1 += w * s.ns_mean;
        m2 += w * s.ns_second_moment();
        p += w * s.pair_sum;
    }
    if (wsum - 1.0).abs() > 1e-12 {
        return Err(Error::domain(
            "mixture weights",
            format!("sum to {wsum}, expected 1"),
        ));
    }
    let var = m2 - m1 * m1;
    // cancellation noise only; the true variance is nonnegative
    let var = if var < 0.0 && var > -1e-9 * m2.max(1.0) {
        0.0
    } else {
        var
    };
    Ok(StateSummary::new_unchecked(n_atoms, m1, var, p))
}

/// Pure dephasing: `P -> P exp(-2 γ τ)`.
pub fn apply_homogeneous_dephasing(s: &StateSummary, gamma: f64, tau: f64) -> Result<StateSummary> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain(
            "dephasing rate",
            format!("{gamma} must be >= 0"),
        ));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::domain(
            "dephasing time",
            format!("{tau} must be >= 0"),
        ));
    }
    Ok(StateSummary {
        pair_sum: s.pair_sum * (-2.0 * gamma * tau).exp(),
        ..*s
    })
}

/// Driving-laser and transition parameters of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    /// Ω_L, rad/s.
    pub rabi_frequency: f64,
    /// Δ, rad/s.
    pub detuning: f64,
    /// Γ₀, 1/s.
    pub excited_linewidth: f64,
    /// k₀, rad/m.
    pub wavevector_magnitude: f64,
}

/// Minimum ratio Δ/Ω_L and Δ/Γ₀ for adiabatic elimination of `|e>`.
pub const ADIABATIC_RATIO: f64 = 10.0;

impl LaserConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rabi_frequency", self.rabi_frequency),
            ("detuning", self.detuning),
            ("excited_linewidth", self.excited_linewidth),
            ("wavevector_magnitude", self.wavevector_magnitude),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    /// Soft violations of the far-detuned regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.detuning < ADIABATIC_RATIO * self.rabi_frequency {
            out.push(format!(
                "detuning/rabi_frequency = {:.3} < {ADIABATIC_RATIO}; adiabatic elimination is marginal",
                self.detuning / self.rabi_frequency
            ));
        }
        if self.detuning < ADIABATIC_RATIO * self.excited_linewidth {
            out.push(format!(
                "detuning/excited_linewidth = {:.3} < {ADIABATIC_RATIO}; adiabatic elimination is marginal",
                self.detuning / self.excited_linewidth
            ));
        }
        out
    }

    /// `Γ = (Ω_L / 2Δ)² Γ₀`, the rate of Stokes emission per excitation.
    pub fn effective_scattering_rate(&self) -> Result<f64> {
        self.validate()?;
        for w in self.warnings() {
            log::warn!("{w}");
        }
        let x = self.rabi_frequency / (2.0 * self.detuning);
        Ok(x * x * self.excited_linewidth)
    }
}

/// Free function form of [`LaserConfig::effective_scattering_rate`].
pub fn effective_scattering_rate(cfg: &LaserConfig) -> Result<f64> {
    cfg.effective_scattering_rate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn hi(twice: i64) -> HalfInt {
        HalfInt::from_twice(twice)
    }

    #[test]
    fn dicke_examples() {
        let s = dicke_summary(4, HalfInt::from_int(2), HalfInt::from_int(0)).unwrap();
        assert_eq!((s.ns_mean, s.ns_var, s.pair_sum), (2.0, 0.0, 4.0));
        let s = dicke_summary(2, HalfInt::from_int(0), HalfInt::from_int(0)).unwrap();
        assert_eq!((s.ns_mean, s.ns_var, s.pair_sum), (1.0, 0.0, -1.0));
        let s = dicke_summary(4, HalfInt::from_int(2), HalfInt::from_int(2)).unwrap();
        assert_eq!((s.ns_mean, s.ns_var, s.pair_sum), (4.0, 0.0, 0.0));
    }

    #[test]
    fn dicke_rejects_bad_quantum_numbers() {
        // J > N/2
        assert!(dicke_summary(4, hi(6), hi(0)).is_err());
        // |M| > J
        assert!(dicke_summary(4, hi(2), hi(4)).is_err());
        // N = 4 admits only integer J
        assert!(dicke_summary(4, hi(3), hi(1)).is_err());
        // J integer, M half-integer
        assert!(dicke_summary(4, hi(2), hi(1)).is_err());
        assert!(dicke_summary(3, hi(3), hi(1)).is_ok());
        assert!(dicke_summary(0, hi(0), hi(0)).is_err());
    }

    #[test]
    fn half_int_parsing() {
        assert_eq!(HalfInt::from_f64(1.5), Some(hi(3)));
        assert_eq!(HalfInt::from_f64(-2.0), Some(hi(-4)));
        assert_eq!(HalfInt::from_f64(0.3), None);
        assert_eq!(hi(3).to_string(), "3/2");
        assert_eq!(hi(-4).to_string(), "-2");
    }

    #[test]
    fn coherent_examples() {
        let s = coherent_summary(4, PI / 2.0, 0.0);
        assert_abs_diff_eq!(s.ns_mean, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ns_var, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.pair_sum, 3.0, epsilon = 1e-12);

        let s = coherent_summary(10, 0.0, 0.7);
        assert_eq!((s.ns_mean, s.ns_var, s.pair_sum), (0.0, 0.0, 0.0));

        let s = coherent_summary(2, PI / 2.0, 1.3);
        assert_abs_diff_eq!(s.ns_mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ns_var, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.pair_sum, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn product_summary_reduces_to_coherent() {
        let spins = vec![BlochAngles::new(1.1, 0.4); 6];
        let a = product_summary(&spins);
        let b = coherent_summary(6, 1.1, 0.4);
        assert_abs_diff_eq!(a.ns_mean, b.ns_mean, epsilon = 1e-12);
        assert_abs_diff_eq!(a.ns_var, b.ns_var, epsilon = 1e-12);
        assert_abs_diff_eq!(a.pair_sum, b.pair_sum, epsilon = 1e-12);
    }

    #[test]
    fn mixture_examples() {
        let s = coherent_summary(5, 0.9, 0.0);
        assert_eq!(mixture_summary(&[(1.0, s)]).unwrap(), s);

        let up = dicke_summary(4, hi(4), hi(4)).unwrap();
        let down = dicke_summary(4, hi(4), hi(-4)).unwrap();
        let m = mixture_summary(&[(0.5, up), (0.5, down)]).unwrap();
        assert_abs_diff_eq!(m.ns_mean, 2.0);
        assert_abs_diff_eq!(m.ns_var, 4.0);
        assert_abs_diff_eq!(m.pair_sum, 0.0);
        assert_abs_diff_eq!(m.ns_var, m.max_variance());

        let a = dicke_summary(4, hi(4), hi(0)).unwrap();
        let b = dicke_summary(4, hi(2), hi(0)).unwrap();
        let m = mixture_summary(&[(0.3, a), (0.7, b)]).unwrap();
        assert_abs_diff_eq!(m.ns_mean, 2.0);
        assert_abs_diff_eq!(m.ns_var, 0.0);
        assert_abs_diff_eq!(m.pair_sum, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn mixture_errors() {
        let a = coherent_summary(4, 1.0, 0.0);
        let b = coherent_summary(5, 1.0, 0.0);
        assert!(mixture_summary(&[(0.5, a), (0.5, b)]).is_err());
        assert!(mixture_summary(&[(0.5, a), (0.4, a)]).is_err());
        assert!(mixture_summary(&[(1.5, a), (-0.5, a)]).is_err());
        assert!(mixture_summary(&[]).is_err());
    }

    #[test]
    fn dephasing_examples() {
        let s = StateSummary::new_unchecked(4, 2.0, 0.0, 4.0);
        assert_eq!(
            apply_homogeneous_dephasing(&s, 0.0, 123.0)
                .unwrap()
                .pair_sum,
            4.0
        );
        let d = apply_homogeneous_dephasing(&s, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(d.pair_sum, 4.0 * (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.pair_sum, 1.4715, epsilon = 1e-4);
        assert_eq!((d.ns_mean, d.ns_var), (2.0, 0.0));

        let s = StateSummary::new_unchecked(2, 1.0, 0.0, -1.0);
        let d = apply_homogeneous_dephasing(&s, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.pair_sum, -0.01832, epsilon = 1e-5);
        assert!(apply_homogeneous_dephasing(&s, -1.0, 1.0).is_err());
        assert!(apply_homogeneous_dephasing(&s, 1.0, -1.0).is_err());
    }

    #[test]
    fn scattering_rate_examples() {
        // (Ω/2Δ)² = 1/40, Γ₀ = 30 / μs
        let cfg = LaserConfig {
            rabi_frequency: 2.0 * (1.0f64 / 40.0).sqrt(),
            detuning: 1.0,
            excited_linewidth: 30.0e6,
            wavevector_magnitude: 8.055e6,
        };
        let g = cfg.effective_scattering_rate().unwrap();
        assert_abs_diff_eq!(g, 0.75e6, epsilon = 1e-6);
        assert_abs_diff_eq!(1.0 / g, 1.333e-6, epsilon = 1e-9);
        assert!(!cfg.warnings().is_empty());

        let cfg = LaserConfig {
            rabi_frequency: 2.0,
            detuning: 1.0,
            excited_linewidth: 1.0,
            wavevector_magnitude: 1.0,
        };
        assert_abs_diff_eq!(effective_scattering_rate(&cfg).unwrap(), 1.0);

        let cfg = LaserConfig {
            rabi_frequency: 2.0 * 0.1f64.sqrt(),
            detuning: 1.0,
            excited_linewidth: 1.0e7,
            wavevector_magnitude: 1.0,
        };
        assert_abs_diff_eq!(
            cfg.effective_scattering_rate().unwrap(),
            1.0e6,
            epsilon = 1e-6
        );

        let bad = LaserConfig {
            detuning: 0.0,
            ..cfg
        };
        assert!(bad.effective_scattering_rate().is_err());
    }

    #[test]
    fn far_detuned_config_has_no_warnings() {
        let cfg = LaserConfig {
            rabi_frequency: 1.0e7,
            detuning: 1.0e9,
            excited_linewidth: 3.0e7,
            wavevector_magnitude: 8.055e6,
        };
        assert!(cfg.warnings().is_empty());
    }

    #[test]
    fn unphysical_summaries_rejected() {
        assert!(StateSummary::new(4, 5.0, 0.0, 0.0).is_err());
        assert!(StateSummary::new(4, 2.0, 4.5, 0.0).is_err());
        assert!(StateSummary::new(4, 2.0, 0.0, -2.5).is_err());
        assert!(StateSummary::new(4, 2.0, 0.0, 12.5).is_err());
        assert!(StateSummary::new(4, 2.0, 4.0, -2.0).is_ok());
    }

    proptest! {
        #[test]
        fn constructors_respect_bounds(n in 1usize..40, polar in 0.0..PI, az in -PI..PI, jfrac in 0.0..1.0f64, mfrac in 0.0..1.0f64) {
            prop_assert!(coherent_summary(n, polar, az).validate().is_ok());

            // pick a valid (J, M)
            let max_k = n as i64 / 2;
            let k = (jfrac * (max_k as f64 + 1.0)).floor().min(max_k as f64) as i64;
            let tj = n as i64 - 2 * k;
            let steps = tj; // M = -J..J in unit steps
            let i = (mfrac * (steps as f64 + 1.0)).floor().min(steps as f64) as i64;
            let tm = -tj + 2 * i;
            let s = dicke_summary(n, hi(tj), hi(tm)).unwrap();
            prop_assert!(s.validate().is_ok(), "{:?}", s);
        }

        #[test]
        fn dephasing_composes(p in -50.0..500.0f64, g in 0.0..3.0f64, t1 in 0.0..2.0f64, t2 in 0.0..2.0f64) {
            let s = StateSummary::new_unchecked(40, 10.0, 1.0, p);
            let a = apply_homogeneous_dephasing(&apply_homogeneous_dephasing(&s, g, t1).unwrap(), g, t2).unwrap();
            let b = apply_homogeneous_dephasing(&s, g, t1 + t2).unwrap();
            prop_assert!((a.pair_sum - b.pair_sum).abs() <= 1e-12 * p.abs().max(1.0));
        }

        #[test]
        fn mixture_is_affine_in_pair_sum(w in 0.0..1.0f64, pa in 0.0..3.0f64, pb in 0.0..3.0f64) {
            let a = coherent_summary(7, pa, 0.0);
            let b = coherent_summary(7, pb, 1.0);
            let m = mixture_summary(&[(w, a), (1.0 - w, b)]).unwrap();
            prop_assert!((m.pair_sum - (w * a.pair_sum + (1.0 - w) * b.pair_sum)).abs() < 1e-12);
            prop_assert!(m.validate().is_ok());
        }
    }
}
