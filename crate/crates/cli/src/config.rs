//! Run configuration: a TOML file plus `key.path=value` overrides.
//!
//! Every physical quantity is a unit-suffixed string (see [`crate::units`]);
//! unknown keys are rejected.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stokesdiff::diffraction::{Envelope, Geometry, PatternMode};
use stokesdiff::metrology::{CollectiveEstimator, MotionModel, ProbeMode, RB87_MASS};
use stokesdiff::spin_states::{coherent_summary, dicke_summary, HalfInt, LaserConfig};
use stokesdiff::witness::{ratio_to_pair_sum_with, RatioConvention};
use stokesdiff::StateSummary;

use crate::units::{Angle, Gradient, Length, Mass, Quantity, Rate, Temperature, Time, Wavenumber};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub state: Option<StateSpec>,
    pub geometry: Option<GeometrySpec>,
    #[serde(default)]
    pub optics: Optics,
    pub laser: Option<LaserSpec>,
    #[serde(default)]
    pub diffract: DiffractSpec,
    #[serde(default)]
    pub witness: WitnessSpec,
    #[serde(default)]
    pub gradiometer: GradiometerSpec,
    pub thermometry: Option<ThermometrySpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// Sufficient statistics given directly.
    Summary,
    /// Total-spin eigenstate `|J, M>`.
    Dicke,
    /// Spin-coherent state.
    Coherent,
    /// A measured peak/dip ratio converted to a pair sum.
    Ratio,
}

/// Spin state. Which keys are required depends on `kind`; keys that the
/// kind does not use are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub kind: StateKind,
    pub n_atoms: usize,
    pub ns_mean: Option<f64>,
    pub ns_var: Option<f64>,
    pub pair_sum: Option<f64>,
    pub j: Option<f64>,
    pub m: Option<f64>,
    pub polar: Option<Quantity<Angle>>,
    pub azimuth: Option<Quantity<Angle>>,
    pub ratio: Option<f64>,
    pub convention: Option<ConventionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionSpec {
    #[default]
    LargeN,
    VanishingBackground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Gaussian2d,
    Gaussian1d,
    Slab,
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub fwhm: Option<Quantity<Length>>,
    pub width: Option<Quantity<Length>>,
    pub thickness: Option<Quantity<Length>>,
    pub spacing: Option<Quantity<Length>>,
    pub dims: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeSpec {
    #[default]
    Uniform,
    Dipole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Optics {
    pub wavelength: Quantity<Length>,
    pub envelope: EnvelopeSpec,
}

impl Default for Optics {
    fn default() -> Self {
        Self {
            wavelength: Quantity::si(780e-9),
            envelope: EnvelopeSpec::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSpec {
    pub rabi_frequency: Quantity<Rate>,
    pub detuning: Quantity<Rate>,
    pub excited_linewidth: Quantity<Rate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternModeSpec {
    #[default]
    FixedPositions,
    EnsembleAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffractSpec {
    pub grid_points: usize,
    /// Detector half-angle; defaults to three boundary angles.
    pub half_angle: Option<Quantity<Angle>>,
    pub mode: PatternModeSpec,
    /// Photons drawn onto the image; 0 keeps the intensity image only.
    pub photons: u64,
    pub ring_samples: usize,
    /// Position draws the reported ratio is averaged over.
    pub realizations: usize,
    /// Collection intervals for the time-resolved ratio (needs `[laser]`).
    pub collection_times: Vec<Quantity<Time>>,
}

impl Default for DiffractSpec {
    fn default() -> Self {
        Self {
            grid_points: 129,
            half_angle: None,
            mode: PatternModeSpec::FixedPositions,
            photons: 0,
            ring_samples: 360,
            realizations: 1,
            collection_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessSpec {
    pub phase_diagram: bool,
    pub var_points: usize,
    pub p_points: usize,
    pub dicke_table: bool,
}

impl Default for WitnessSpec {
    fn default() -> Self {
        Self {
            phase_diagram: false,
            var_points: 41,
            p_points: 41,
            dicke_table: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradiometerMode {
    #[default]
    Estimate,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradiometerSpec {
    pub mode: GradiometerMode,
    pub gradient: [Quantity<Gradient>; 3],
    pub probe_time: Quantity<Time>,
    pub photons: u64,
    pub grid_points: usize,
    /// Detector half-width in k-space; defaults to cover the displaced
    /// feature with margin.
    pub half_extent: Option<Quantity<Wavenumber>>,
    pub sweep: SensitivitySpec,
}

impl Default for GradiometerSpec {
    fn default() -> Self {
        Self {
            mode: GradiometerMode::Estimate,
            gradient: [Quantity::si(3e7), Quantity::si(-1.5e7), Quantity::si(0.0)],
            probe_time: Quantity::si(1e-3),
            photons: 10_000,
            grid_points: 121,
            half_extent: None,
            sweep: SensitivitySpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeSpec {
    Collective,
    Pairs,
}

impl From<ProbeSpec> for ProbeMode {
    fn from(p: ProbeSpec) -> Self {
        match p {
            ProbeSpec::Collective => ProbeMode::Collective,
            ProbeSpec::Pairs => ProbeMode::Pairs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorSpec {
    GaussianFit,
    #[default]
    StructureMl,
}

/// Sensitivity sweep over N on a 1D Gaussian ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySpec {
    pub probes: Vec<ProbeSpec>,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub shots: u64,
    pub fwhm: Quantity<Length>,
    /// Gradient along x; defaults to a 3.7/σ displacement after `probe_time`.
    pub gradient: Option<Quantity<Gradient>>,
    pub probe_time: Quantity<Time>,
    pub estimator: EstimatorSpec,
}

impl Default for SensitivitySpec {
    fn default() -> Self {
        Self {
            probes: vec![ProbeSpec::Collective, ProbeSpec::Pairs],
            n_list: vec![8, 16, 32, 64, 128],
            trials: 200,
            shots: 1_000_000,
            fwhm: Quantity::si(1e-3),
            gradient: None,
            probe_time: Quantity::si(1.0),
            estimator: EstimatorSpec::StructureMl,
        }
    }
}

impl From<EstimatorSpec> for CollectiveEstimator {
    fn from(e: EstimatorSpec) -> Self {
        match e {
            EstimatorSpec::GaussianFit => CollectiveEstimator::GaussianFit,
            EstimatorSpec::StructureMl => CollectiveEstimator::StructureMl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionSpec {
    #[default]
    Ballistic,
    Langevin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometrySpec {
    pub temperature: Quantity<Temperature>,
    #[serde(default = "rb87")]
    pub mass: Quantity<Mass>,
    /// Imprinted phase gradient; defaults to an exponent of 0.3 at `tau_max`.
    pub phase_gradient: Option<Quantity<Wavenumber>>,
    #[serde(default = "one_ms")]
    pub tau_max: Quantity<Time>,
    #[serde(default = "twelve")]
    pub tau_points: usize,
    #[serde(default)]
    pub model: MotionSpec,
    pub collision_rate: Option<Quantity<Rate>>,
    #[serde(default = "three")]
    pub axes: usize,
    #[serde(default = "one_s")]
    pub dephasing_time: Quantity<Time>,
}

fn rb87() -> Quantity<Mass> {
    Quantity::si(RB87_MASS)
}
fn one_ms() -> Quantity<Time> {
    Quantity::si(1e-3)
}
fn one_s() -> Quantity<Time> {
    Quantity::si(1.0)
}
fn twelve() -> usize {
    12
}
fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub max_n: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { max_n: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    Diffract,
    Witness,
}

/// Batch run over one configuration key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub target: SweepTarget,
    /// Dotted key path, e.g. `state.pair_sum`.
    pub key: String,
    pub values: Vec<toml::Value>,
}

/// Largest system the oracle check will enumerate.
pub const ORACLE_MAX_N: usize = 10;

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive (got {v})")))
    }
}

/// Rejects keys set but not used by `kind`, then hands back the used ones.
fn check_keys(
    section: &str,
    kind: &str,
    set: &[(&str, bool)],
    used: &[&str],
) -> Result<(), CliError> {
    for (name, present) in set {
        if *present && !used.contains(name) {
            return Err(bad(
                &format!("{section}.{name}"),
                format!("not used by kind = \"{kind}\""),
            ));
        }
    }
    Ok(())
}

fn need<T: Copy>(key: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| bad(key, "required for this kind"))
}

impl StateSpec {
    fn keys(&self) -> [(&'static str, bool); 9] {
        [
            ("ns_mean", self.ns_mean.is_some()),
            ("ns_var", self.ns_var.is_some()),
            ("pair_sum", self.pair_sum.is_some()),
            ("j", self.j.is_some()),
            ("m", self.m.is_some()),
            ("polar", self.polar.is_some()),
            ("azimuth", self.azimuth.is_some()),
            ("ratio", self.ratio.is_some()),
            ("convention", self.convention.is_some()),
        ]
    }

    pub fn summary(&self) -> Result<StateSummary, CliError> {
        let n = self.n_atoms;
        let half = |key: &str, v: Option<f64>| {
            let v = need(key, v)?;
            HalfInt::from_f64(v).ok_or_else(|| bad(key, format!("{v} is not a half-integer")))
        };
        let (kind, used): (&str, &[&str]) = match self.kind {
            StateKind::Summary => ("summary", &["ns_mean", "ns_var", "pair_sum"]),
            StateKind::Dicke => ("dicke", &["j", "m"]),
            StateKind::Coherent => ("coherent", &["polar", "azimuth"]),
            StateKind::Ratio => ("ratio", &["ratio", "ns_mean", "ns_var", "convention"]),
        };
        check_keys("state", kind, &self.keys(), used)?;
        let s = match self.kind {
            StateKind::Summary => StateSummary::new(
                n,
                need("state.ns_mean", self.ns_mean)?,
                need("state.ns_var", self.ns_var)?,
                need("state.pair_sum", self.pair_sum)?,
            ),
            StateKind::Dicke => {
                dicke_summary(n, half("state.j", self.j)?, half("state.m", self.m)?)
            }
            StateKind::Coherent => Ok(coherent_summary(
                n,
                need("state.polar", self.polar)?.value(),
                self.azimuth.map_or(0.0, |a| a.value()),
            )),
            StateKind::Ratio => {
                let conv = match self.convention.unwrap_or_default() {
                    ConventionSpec::LargeN => RatioConvention::LargeN,
                    ConventionSpec::VanishingBackground => RatioConvention::VanishingBackground,
                };
                let ns_mean = need("state.ns_mean", self.ns_mean)?;
                let ns_var = need("state.ns_var", self.ns_var)?;
                ratio_to_pair_sum_with(need("state.ratio", self.ratio)?, ns_mean, n, conv)
                    .and_then(|p| StateSummary::new(n, ns_mean, ns_var, p))
            }
        };
        s.map_err(|e| bad("state", e))
    }
}

impl GeometrySpec {
    pub fn geometry(&self) -> Result<Geometry, CliError> {
        let set = [
            ("fwhm", self.fwhm.is_some()),
            ("width", self.width.is_some()),
            ("thickness", self.thickness.is_some()),
            ("spacing", self.spacing.is_some()),
            ("dims", self.dims.is_some()),
        ];
        let len = |key: &str, v: Option<Quantity<Length>>| -> Result<f64, CliError> {
            let v = need(key, v)?.value();
            positive(key, v)?;
            Ok(v)
        };
        Ok(match self.kind {
            GeometryKind::Gaussian2d => {
                check_keys("geometry", "gaussian2d", &set, &["fwhm"])?;
                Geometry::Gaussian2d {
                    fwhm: len("geometry.fwhm", self.fwhm)?,
                }
            }
            GeometryKind::Gaussian1d => {
                check_keys("geometry", "gaussian1d", &set, &["fwhm"])?;
                Geometry::Gaussian1d {
                    fwhm: len("geometry.fwhm", self.fwhm)?,
                }
            }
            GeometryKind::Slab => {
                check_keys("geometry", "slab", &set, &["width", "thickness"])?;
                Geometry::Slab {
                    width: len("geometry.width", self.width)?,
                    thickness: len("geometry.thickness", self.thickness)?,
                }
            }
            GeometryKind::Lattice => {
                check_keys("geometry", "lattice", &set, &["spacing", "dims"])?;
                let dims = need("geometry.dims", self.dims)?;
                if dims.contains(&0) {
                    return Err(bad("geometry.dims", "every entry must be at least 1"));
                }
                Geometry::Lattice {
                    spacing: len("geometry.spacing", self.spacing)?,
                    dims,
                }
            }
        })
    }
}

impl Optics {
    pub fn k0(&self) -> f64 {
        TAU / self.wavelength.value()
    }

    pub fn envelope(&self) -> Envelope {
        match self.envelope {
            EnvelopeSpec::Uniform => Envelope::Uniform,
            EnvelopeSpec::Dipole => Envelope::Dipole,
        }
    }
}

impl LaserSpec {
    pub fn laser(&self, k0: f64) -> LaserConfig {
        LaserConfig {
            rabi_frequency: self.rabi_frequency.value(),
            detuning: self.detuning.value(),
            excited_linewidth: self.excited_linewidth.value(),
            wavevector_magnitude: k0,
        }
    }
}

impl PatternModeSpec {
    pub fn mode(self) -> PatternMode {
        match self {
            PatternModeSpec::FixedPositions => PatternMode::FixedPositions,
            PatternModeSpec::EnsembleAveraged => PatternMode::EnsembleAveraged,
        }
    }
}

impl ThermometrySpec {
    pub fn model(&self) -> Result<MotionModel, CliError> {
        match (self.model, self.collision_rate) {
            (MotionSpec::Ballistic, _) => Ok(MotionModel::Ballistic),
            (MotionSpec::Langevin, Some(g)) => Ok(MotionModel::Langevin {
                collision_rate: g.value(),
            }),
            (MotionSpec::Langevin, None) => Err(bad(
                "thermometry.collision_rate",
                "required for the langevin model",
            )),
        }
    }
}

impl RunConfig {
    /// Checks the invariants serde cannot express, naming the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(g) = &self.geometry {
            g.geometry()?;
        }
        if let Some(st) = &self.state {
            st.summary()?;
        }
        positive("optics.wavelength", self.optics.wavelength.value())?;
        if let Some(l) = &self.laser {
            positive("laser.rabi_frequency", l.rabi_frequency.value())?;
            positive("laser.detuning", l.detuning.value())?;
            positive("laser.excited_linewidth", l.excited_linewidth.value())?;
        }
        let d = &self.diffract;
        if d.grid_points < 2 {
            return Err(bad("diffract.grid_points", "must be at least 2"));
        }
        if let Some(a) = d.half_angle {
            if !(a.value() > 0.0 && a.value() < std::f64::consts::FRAC_PI_2) {
                return Err(bad("diffract.half_angle", "must lie in (0, 90 deg)"));
            }
        }
        if d.realizations == 0 {
            return Err(bad("diffract.realizations", "must be at least 1"));
        }
        if d.ring_samples == 0 {
            return Err(bad("diffract.ring_samples", "must be at least 1"));
        }
        if d.collection_times.iter().any(|t| !(t.value() >= 0.0)) {
            return Err(bad("diffract.collection_times", "must be >= 0"));
        }
        let w = &self.witness;
        if w.var_points < 2 || w.p_points < 2 {
            return Err(bad("witness", "var_points and p_points must be at least 2"));
        }
        let g = &self.gradiometer;
        if g.grid_points < 2 {
            return Err(bad("gradiometer.grid_points", "must be at least 2"));
        }
        positive("gradiometer.probe_time", g.probe_time.value())?;
        if let Some(h) = g.half_extent {
            positive("gradiometer.half_extent", h.value())?;
        }
        let s = &g.sweep;
        positive("gradiometer.sweep.fwhm", s.fwhm.value())?;
        positive("gradiometer.sweep.probe_time", s.probe_time.value())?;
        if s.trials < 2 {
            return Err(bad("gradiometer.sweep.trials", "must be at least 2"));
        }
        if s.n_list.len() < 2 {
            return Err(bad("gradiometer.sweep.n_list", "needs at least two sizes"));
        }
        if let Some(t) = &self.thermometry {
            if !(t.temperature.value() >= 0.0) {
                return Err(bad("thermometry.temperature", "must be >= 0"));
            }
            positive("thermometry.mass", t.mass.value())?;
            positive("thermometry.tau_max", t.tau_max.value())?;
            positive("thermometry.dephasing_time", t.dephasing_time.value())?;
            if t.tau_points < 2 {
                return Err(bad("thermometry.tau_points", "must be at least 2"));
            }
            if !(1..=3).contains(&t.axes) {
                return Err(bad("thermometry.axes", "must be 1, 2 or 3"));
            }
            t.model()?;
        }
        if !(1..=ORACLE_MAX_N).contains(&self.oracle.max_n) {
            return Err(bad(
                "oracle.max_n",
                format!("must lie in 1..={ORACLE_MAX_N}"),
            ));
        }
        Ok(())
    }

    pub fn state(&self) -> Result<&StateSpec, CliError> {
        self.state
            .as_ref()
            .ok_or_else(|| bad("state", "missing [state] section"))
    }

    pub fn geometry(&self) -> Result<&GeometrySpec, CliError> {
        self.geometry
            .as_ref()
            .ok_or_else(|| bad("geometry", "missing [geometry] section"))
    }

    /// Canonical TOML with every default filled in.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A parsed `key.path=value` override. Values that are not valid TOML are
/// taken as strings, so `--set geometry.fwhm="50 um"` and
/// `--set geometry.fwhm=50\ um` both work.
pub fn parse_override(text: &str) -> Result<(String, toml::Value), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {text}: expected key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set {text}: malformed key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Writes `value` at a dotted `key` path, creating tables on the way.
pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses the raw table behind a config file (empty when absent).
pub fn load_table(text: Option<&str>) -> Result<toml::Table, CliError> {
    match text {
        None => Ok(toml::Table::new()),
        Some(t) => toml::from_str(t).map_err(|e| CliError::Config(e.to_string())),
    }
}

/// Deserializes and validates a table.
///
/// When `source` is the untouched file text, parse errors point at its
/// lines; otherwise they name the key.
pub fn resolve(table: toml::Table, source: Option<&str>) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = match source {
        Some(text) => toml::from_str(text),
        None => RunConfig::deserialize(toml::Value::Table(table)),
    }
    .map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// File text plus overrides to a validated config.
pub fn parse_config(
    text: Option<&str>,
    overrides: &[(String, toml::Value)],
) -> Result<RunConfig, CliError> {
    let mut table = load_table(text)?;
    for (k, v) in overrides {
        set_path(&mut table, k, v.clone())?;
    }
    let source = if overrides.is_empty() { text } else { None };
    resolve(table, source)
}
