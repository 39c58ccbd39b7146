//! Entanglement witnesses built on the pair-correlation sum.
//!
//! Every separable state obeys three inequalities:
//!
//! * upper: `P <= (N-1) ΔN_s²`
//! * lower: `P >= -ΔN_s²`
//! * moment: `(N-1) P >= <N_s²> - N <N_s>`
//!
//! so a violation of any of them certifies entanglement. Margins are signed
//! so that a positive margin means "violated".

use crate::diffraction::large_n_ratio;
use crate::error::{Error, Result};
use crate::spin_states::{dicke_pair_sum, validate_quantum_numbers, HalfInt, StateSummary};

/// Absolute margin tolerance at `N = 1`; scaled by `N²` since every
/// quantity in the inequalities is at most that large.
pub const MARGIN_TOL: f64 = 1e-12;

/// Tolerance used when matching a summary to a qualitative class.
pub const CLASS_TOL: f64 = 1e-9;

fn margin_tol(n_atoms: usize) -> f64 {
    let n = n_atoms as f64;
    MARGIN_TOL * (n * n).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRuleMargins {
    pub upper: f64,
    pub lower: f64,
    pub moment: f64,
}

/// Flags raised by the qualitative (sign-of-feature) rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QualitativeFlags {
    /// Any peak or dip while `ΔN_s` vanishes.
    pub vanishing_uncertainty: bool,
    /// A dip while `ΔN_s` is maximal.
    pub maximum_uncertainty_dip: bool,
    /// Half-excitation ratio beyond the separable thresholds.
    pub half_excitation: bool,
}

impl QualitativeFlags {
    pub fn any(&self) -> bool {
        self.vanishing_uncertainty || self.maximum_uncertainty_dip || self.half_excitation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Entangled,
    NotDetected,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Entangled => "entangled",
            Verdict::NotDetected => "not-detected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessReport {
    pub violated_upper: bool,
    pub violated_lower: bool,
    pub violated_moment: bool,
    pub margins: SumRuleMargins,
    pub qualitative: QualitativeFlags,
    pub verdict: Verdict,
}

impl WitnessReport {
    pub fn is_entangled(&self) -> bool {
        self.verdict == Verdict::Entangled
    }
}

/// Raw margins, positive when the corresponding inequality fails.
pub fn sum_rule_margins(summary: &StateSummary) -> SumRuleMargins {
    let n = summary.n_atoms as f64;
    let (p, var) = (summary.pair_sum, summary.ns_var);
    SumRuleMargins {
        upper: p - (n - 1.0) * var,
        lower: -var - p,
        moment: (summary.ns_second_moment() - n * summary.ns_mean) - (n - 1.0) * p,
    }
}

/// Evaluates all three inequalities and every qualitative rule whose
/// class the summary falls into.
pub fn evaluate_sum_rules(summary: &StateSummary) -> WitnessReport {
    let margins = sum_rule_margins(summary);
    let tol = margin_tol(summary.n_atoms);
    let qualitative = auto_qualitative(summary);
    let violated_upper = margins.upper > tol;
    let violated_lower = margins.lower > tol;
    let violated_moment = margins.moment > tol;
    let entangled = violated_upper || violated_lower || violated_moment || qualitative.any();
    WitnessReport {
        violated_upper,
        violated_lower,
        violated_moment,
        margins,
        qualitative,
        verdict: if entangled {
            Verdict::Entangled
        } else {
            Verdict::NotDetected
        },
    }
}

/// Declared uncertainty regime of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyClass {
    /// `ΔN_s² = 0`.
    Vanishing,
    /// `ΔN_s² = <N_s>(N - <N_s>)`.
    Maximum,
    Generic,
}

fn class_tol(summary: &StateSummary) -> f64 {
    CLASS_TOL * (summary.n_atoms as f64).powi(2).max(1.0)
}

fn matches_class(summary: &StateSummary, class: UncertaintyClass) -> bool {
    let eps = class_tol(summary);
    match class {
        UncertaintyClass::Vanishing => summary.ns_var <= eps,
        UncertaintyClass::Maximum => summary.ns_var >= summary.max_variance() - eps,
        UncertaintyClass::Generic => true,
    }
}

/// Applies the sign-of-feature rules for a declared uncertainty class.
///
/// A peak with vanishing uncertainty counts only when `P` clears
/// `(N-1) ε`, and dips need `P < -ε` (or `-ε/(N-1)` at maximum
/// uncertainty), so separable states sitting on the class boundary within
/// `ε` are never flagged.
pub fn qualitative_criteria(
    summary: &StateSummary,
    class: UncertaintyClass,
) -> Result<QualitativeFlags> {
    if !matches_class(summary, class) {
        return Err(Error::domain(
            "uncertainty class",
            format!(
                "{class:?} does not match ΔN_s² = {} (maximum {})",
                summary.ns_var,
                summary.max_variance()
            ),
        ));
    }
    let eps = class_tol(summary);
    let n1 = (summary.n_atoms as f64 - 1.0).max(1.0);
    let p = summary.pair_sum;
    let mut flags = QualitativeFlags {
        half_excitation: half_excitation_flag(summary),
        ..Default::default()
    };
    match class {
        UncertaintyClass::Vanishing => flags.vanishing_uncertainty = p > n1 * eps || p < -eps,
        UncertaintyClass::Maximum => flags.maximum_uncertainty_dip = p < -eps / n1,
        UncertaintyClass::Generic => {}
    }
    Ok(flags)
}

fn auto_qualitative(summary: &StateSummary) -> QualitativeFlags {
    let mut flags = QualitativeFlags {
        half_excitation: half_excitation_flag(summary),
        ..Default::default()
    };
    for class in [UncertaintyClass::Vanishing, UncertaintyClass::Maximum] {
        if let Ok(f) = qualitative_criteria(summary, class) {
            flags.vanishing_uncertainty |= f.vanishing_uncertainty;
            flags.maximum_uncertainty_dip |= f.maximum_uncertainty_dip;
        }
    }
    flags
}

fn half_excitation_flag(summary: &StateSummary) -> bool {
    let n = summary.n_atoms;
    if n < 2 || (summary.ns_mean - n as f64 / 2.0).abs() > class_tol(summary) {
        return false;
    }
    let r = large_n_ratio(summary.ns_mean, summary.pair_sum, n);
    exceeds_half_excitation_threshold(r, n).unwrap_or(false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfExcitationThresholds {
    /// Dips with `|r|` at or above this are entangled.
    pub dip: f64,
    /// Peaks above this are entangled.
    pub peak: f64,
}

/// Ratio thresholds for states with `<N_s> = N/2`: `|r| >= 1/2` for dips
/// and `r > N(N-1)/(N+1)` for peaks.
pub fn half_excitation_thresholds(n_atoms: usize) -> Result<HalfExcitationThresholds> {
    if n_atoms < 2 {
        return Err(Error::domain("n_atoms", "thresholds need N >= 2"));
    }
    let n = n_atoms as f64;
    Ok(HalfExcitationThresholds {
        dip: 0.5,
        peak: n * (n - 1.0) / (n + 1.0),
    })
}

/// Whether a measured half-excitation ratio certifies entanglement.
///
/// The equatorial coherent state reaches the peak threshold exactly, so
/// the peak comparison is strict with a relative guard of `1e-9`.
pub fn exceeds_half_excitation_threshold(ratio: f64, n_atoms: usize) -> Result<bool> {
    let t = half_excitation_thresholds(n_atoms)?;
    Ok(ratio <= -t.dip || ratio > t.peak * (1.0 + 1e-9))
}

/// How a measured ratio is converted back into a pair sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatioConvention {
    /// `r = P / (<N_s> - P/N)`.
    #[default]
    LargeN,
    /// `r = (P + P/(N-1)) / (<N_s> - P/(N-1))`.
    VanishingBackground,
}

/// Inverts `r = P / (<N_s> - P/N)`: `P = r <N_s> / (1 + r/N)`.
pub fn ratio_to_pair_sum(ratio: f64, ns_mean: f64, n_atoms: usize) -> Result<f64> {
    ratio_to_pair_sum_with(ratio, ns_mean, n_atoms, RatioConvention::LargeN)
}

pub fn ratio_to_pair_sum_with(
    ratio: f64,
    ns_mean: f64,
    n_atoms: usize,
    convention: RatioConvention,
) -> Result<f64> {
    if n_atoms < 2 {
        return Err(Error::domain("n_atoms", "ratio inversion needs N >= 2"));
    }
    if !ratio.is_finite() || !ns_mean.is_finite() {
        return Err(Error::domain("ratio", "non-finite input"));
    }
    let n = n_atoms as f64;
    let denom = n + ratio;
    if denom.abs() < 1e-12 * n {
        return Err(Error::domain(
            "ratio",
            format!("r = {ratio} sits on the pole r = -N"),
        ));
    }
    let p = match convention {
        RatioConvention::LargeN => ratio * ns_mean * n / denom,
        RatioConvention::VanishingBackground => ratio * ns_mean * (n - 1.0) / denom,
    };
    let (lo, hi) = (-n / 2.0, n * (n - 1.0));
    let slack = 1e-9 * n * n;
    if p < lo - slack || p > hi + slack {
        return Err(Error::domain(
            "ratio",
            format!("implies P = {p}, outside [{lo}, {hi}]"),
        ));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Peak,
    Dip,
    Flat,
}

impl Feature {
    pub fn of(pair_sum: f64) -> Self {
        if pair_sum > 0.0 {
            Feature::Peak
        } else if pair_sum < 0.0 {
            Feature::Dip
        } else {
            Feature::Flat
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Feature::Peak => "peak",
            Feature::Dip => "dip",
            Feature::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DickeStrength {
    pub j: HalfInt,
    pub m: HalfInt,
    pub pair_sum: f64,
    pub feature: Feature,
}

/// `P(J, M)` over the valid pairs of a `(J, M)` grid; combinations with
/// `|M| > J` or mismatched parity are skipped, while a `J` that no state
/// of `N` spins can carry is an error.
pub fn dicke_strength_map(
    n_atoms: usize,
    j_grid: &[HalfInt],
    m_grid: &[HalfInt],
) -> Result<Vec<DickeStrength>> {
    let mut out = Vec::new();
    for &j in j_grid {
        validate_quantum_numbers(n_atoms, j, j)?;
        for &m in m_grid {
            if validate_quantum_numbers(n_atoms, j, m).is_err() {
                continue;
            }
            let p = dicke_pair_sum(n_atoms, j, m);
            out.push(DickeStrength {
                j,
                m,
                pair_sum: p,
                feature: Feature::of(p),
            });
        }
    }
    Ok(out)
}

/// Every `(J, M)` reachable by `N` spins.
pub fn full_dicke_grid(n_atoms: usize) -> (Vec<HalfInt>, Vec<HalfInt>) {
    let n = n_atoms as i64;
    let js = (0..=n).rev().step_by(2).map(HalfInt::from_twice).collect();
    let ms = (-n..=n).step_by(2).map(HalfInt::from_twice).collect();
    (js, ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseLabel {
    Upper,
    Lower,
    Moment,
    Multiple,
    None,
    Unphysical,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Upper => "upper-violated",
            PhaseLabel::Lower => "lower-violated",
            PhaseLabel::Moment => "moment-violated",
            PhaseLabel::Multiple => "multiple",
            PhaseLabel::None => "none",
            PhaseLabel::Unphysical => "unphysical",
        }
    }

    /// Small integer code, stable across releases.
    pub fn code(&self) -> u8 {
        match self {
            PhaseLabel::None => 0,
            PhaseLabel::Upper => 1,
            PhaseLabel::Lower => 2,
            PhaseLabel::Moment => 3,
            PhaseLabel::Multiple => 4,
            PhaseLabel::Unphysical => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub ns_var: f64,
    pub pair_sum: f64,
    pub label: PhaseLabel,
}

/// Label for a single `(ΔN_s², P)` point.
pub fn classify(summary: &StateSummary) -> PhaseLabel {
    if !summary.is_physical() {
        return PhaseLabel::Unphysical;
    }
    let r = evaluate_sum_rules(summary);
    match (r.violated_upper, r.violated_lower, r.violated_moment) {
        (false, false, false) => PhaseLabel::None,
        (true, false, false) => PhaseLabel::Upper,
        (false, true, false) => PhaseLabel::Lower,
        (false, false, true) => PhaseLabel::Moment,
        _ => PhaseLabel::Multiple,
    }
}

/// Sum-rule labels over a `ΔN_s² × P` grid at fixed `N` and `<N_s>`,
/// variance-major.
///
/// Cells outside the summary type bounds are labeled unphysical; this
/// region contains the true physical set but may be larger.
pub fn phase_diagram_grid(
    n_atoms: usize,
    ns_mean: f64,
    var_grid: &[f64],
    p_grid: &[f64],
) -> Result<Vec<PhaseCell>> {
    if n_atoms == 0 {
        return Err(Error::domain("n_atoms", "must be at least 1"));
    }
    if !ns_mean.is_finite() || var_grid.iter().chain(p_grid).any(|v| !v.is_finite()) {
        return Err(Error::domain("phase-diagram grid", "non-finite entry"));
    }
    let np = p_grid.len();
    Ok(crate::par_map(var_grid.len() * np, |i| {
        let (var, p) = (var_grid[i / np], p_grid[i % np]);
        PhaseCell {
            ns_var: var,
            pair_sum: p,
            label: classify(&StateSummary::new_unchecked(n_atoms, ns_mean, var, p)),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::vanishing_background_ratio;
    use crate::spin_states::{
        coherent_summary, dicke_summary, mixture_summary, product_summary, BlochAngles,
    };
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h(v: i64) -> HalfInt {
        HalfInt::from_int(v)
    }

    #[test]
    fn sum_rule_examples() {
        let d = dicke_summary(4, h(2), h(0)).unwrap();
        let r = evaluate_sum_rules(&d);
        assert!(r.violated_upper && r.is_entangled());
        assert_relative_eq!(r.margins.upper, 4.0);

        let singlet = StateSummary::new(2, 1.0, 0.0, -1.0).unwrap();
        let r = evaluate_sum_rules(&singlet);
        assert!(r.violated_lower && r.is_entangled());

        let coh = StateSummary::new(4, 2.0, 1.0, 3.0).unwrap();
        let r = evaluate_sum_rules(&coh);
        assert_eq!(r.margins.upper, 0.0);
        assert!(!r.violated_upper && !r.violated_lower && !r.violated_moment);
        assert_eq!(r.verdict, Verdict::NotDetected);
    }

    #[test]
    fn qualitative_examples() {
        let s = StateSummary::new(4, 2.0, 0.0, 4.0).unwrap();
        assert!(
            qualitative_criteria(&s, UncertaintyClass::Vanishing)
                .unwrap()
                .vanishing_uncertainty
        );

        let s = StateSummary::new(4, 2.0, 4.0, -0.1).unwrap();
        assert!(
            qualitative_criteria(&s, UncertaintyClass::Maximum)
                .unwrap()
                .maximum_uncertainty_dip
        );

        let s = StateSummary::new(4, 2.0, 4.0, 5.0).unwrap();
        let f = qualitative_criteria(&s, UncertaintyClass::Maximum).unwrap();
        assert!(!f.maximum_uncertainty_dip && !f.vanishing_uncertainty);

        assert!(qualitative_criteria(&s, UncertaintyClass::Vanishing).is_err());
        assert!(
            qualitative_criteria(&coherent_summary(4, 1.0, 0.0), UncertaintyClass::Maximum)
                .is_err()
        );
    }

    #[test]
    fn thresholds() {
        let t = half_excitation_thresholds(4).unwrap();
        assert_eq!((t.dip, t.peak), (0.5, 2.4));
        let t = half_excitation_thresholds(2).unwrap();
        assert_relative_eq!(t.peak, 2.0 / 3.0);
        let n = 1e6;
        let t = half_excitation_thresholds(1_000_000).unwrap();
        assert_relative_eq!(t.peak, n - 2.0, max_relative = 1e-6);
        assert!(half_excitation_thresholds(1).is_err());
    }

    #[test]
    fn equatorial_coherent_state_sits_on_peak_threshold() {
        for n in [2, 4, 10, 1000] {
            let s = coherent_summary(n, std::f64::consts::FRAC_PI_2, 0.3);
            let r = large_n_ratio(s.ns_mean, s.pair_sum, n);
            let t = half_excitation_thresholds(n).unwrap();
            assert_relative_eq!(r, t.peak, max_relative = 1e-12);
            assert!(!exceeds_half_excitation_threshold(r, n).unwrap());
            assert!(!evaluate_sum_rules(&s).is_entangled());
        }
    }

    #[test]
    fn singlet_crosses_dip_threshold() {
        // the exact two-atom ratio of the singlet is -1
        let r = vanishing_background_ratio(1.0, -1.0, 2);
        assert!(exceeds_half_excitation_threshold(r, 2).unwrap());
        let s = StateSummary::new(2, 1.0, 0.0, -1.0).unwrap();
        assert!(evaluate_sum_rules(&s).qualitative.half_excitation);
    }

    #[test]
    fn ratio_inversion_examples() {
        assert_eq!(ratio_to_pair_sum(0.0, 5.0, 10).unwrap(), 0.0);
        let p = ratio_to_pair_sum(large_n_ratio(2000.0, 10_000.0, 4000), 2000.0, 4000).unwrap();
        assert_relative_eq!(p, 10_000.0, max_relative = 1e-12);
        assert_relative_eq!(
            ratio_to_pair_sum(5.006, 2000.0, 4000).unwrap(),
            10_000.0,
            max_relative = 2e-4
        );
        assert_relative_eq!(
            ratio_to_pair_sum(-0.6997, 2000.0, 4000).unwrap(),
            -1400.0,
            max_relative = 1e-3
        );
        assert!(ratio_to_pair_sum(-10.0, 1.0, 10).is_err());
        assert!(ratio_to_pair_sum(1e6, 20.0, 10).is_err());
        let p = ratio_to_pair_sum_with(-1.0, 1.0, 2, RatioConvention::VanishingBackground).unwrap();
        assert_relative_eq!(p, -1.0);
    }

    #[test]
    fn dicke_map_examples() {
        let n = 8;
        let (js, ms) = full_dicke_grid(n);
        let map = dicke_strength_map(n, &js, &ms).unwrap();
        let at = |j: i64, m: i64| map.iter().find(|d| d.j == h(j) && d.m == h(m)).unwrap();
        assert_eq!(at(4, 0).pair_sum, 16.0);
        assert_eq!(at(4, 0).feature, Feature::Peak);
        assert_eq!(at(0, 0).pair_sum, -4.0);
        assert_eq!(at(0, 0).feature, Feature::Dip);
        // J(J+1) - M² = N/2 on the P = 0 curve: J = 2, M = ±√2 is off-grid,
        // J = 3, M = ±√8 too; J = 4 has none, so check the closed form instead
        for d in &map {
            let (j, m) = (d.j.value(), d.m.value());
            assert_eq!(d.pair_sum, j * (j + 1.0) - m * m - n as f64 / 2.0);
        }
        assert_eq!(map.len(), 25);
        assert!(dicke_strength_map(n, &[h(5)], &ms).is_err());
    }

    #[test]
    fn phase_diagram_rows() {
        let n = 10;
        let m = 5.0;
        let ps: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.2).collect();
        let cells = phase_diagram_grid(n, m, &[0.0], &ps).unwrap();
        for c in &cells {
            if c.pair_sum > 0.0 {
                assert_eq!(c.label, PhaseLabel::Upper);
            } else if c.pair_sum < 0.0 {
                assert!(
                    matches!(c.label, PhaseLabel::Lower | PhaseLabel::Multiple),
                    "{c:?}"
                );
            } else {
                assert_eq!(c.label, PhaseLabel::None);
            }
        }
        let vars: Vec<f64> = (0..=25).map(|i| i as f64).collect();
        let cells = phase_diagram_grid(n, m, &vars, &[0.0]).unwrap();
        assert!(cells.iter().all(|c| c.label == PhaseLabel::None));

        let cells = phase_diagram_grid(n, m, &[25.0], &[-0.5, -0.01]).unwrap();
        assert!(cells.iter().all(|c| c.label == PhaseLabel::Moment));

        let cells = phase_diagram_grid(n, m, &[30.0], &[0.0]).unwrap();
        assert_eq!(cells[0].label, PhaseLabel::Unphysical);
    }

    fn angles() -> impl Strategy<Value = BlochAngles> {
        (0.0..std::f64::consts::PI, -3.2..3.2f64).prop_map(|(t, p)| BlochAngles::new(t, p))
    }

    proptest! {
        #[test]
        fn separable_states_never_flagged(
            spins in prop::collection::vec(prop::collection::vec(angles(), 6), 1..4),
            weights in prop::collection::vec(0.01..1.0f64, 3),
        ) {
            let comps: Vec<StateSummary> = spins.iter().map(|s| product_summary(s)).collect();
            let wsum: f64 = weights[..comps.len()].iter().sum();
            let mix: Vec<(f64, StateSummary)> = comps
                .iter()
                .zip(&weights)
                .map(|(s, w)| (w / wsum, *s))
                .collect();
            let total: f64 = mix.iter().map(|(w, _)| w).sum();
            let mut mix = mix;
            mix[0].0 += 1.0 - total;
            let s = mixture_summary(&mix).unwrap();
            prop_assert!(!evaluate_sum_rules(&s).is_entangled(), "{s:?}");
        }

        #[test]
        fn ratio_round_trip(p in -5.0..8.0f64, m in 1.0..9.0f64) {
            let n = 10;
            let r = large_n_ratio(m, p, n);
            let back = ratio_to_pair_sum(r, m, n).unwrap();
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }
}
