//! Collective emission pattern of a permutation-symmetric state.
//!
//! For a state with statistics `(N, <N_s>, P)` the collective factor is
//!
//! ```text
//! I_c(Δk) = <N_s> - P/(N-1) + P · S(Δk) / (N² - N),
//! S(Δk)   = | Σ_j exp(i(φ_j - Δk·r_j)) |²,
//! ```
//!
//! so the geometry enters only through the structure term `S`, which is
//! computed once per grid and reused for any number of states.

use nalgebra::Vector3;

use super::geometry::{EnsemblePositions, Geometry, PhaseProfile};
use super::image::{delta_k, polar_angle, DiffractionImage, Envelope, ImageData, ImageMode, KGrid};
use crate::error::{Error, Result};
use crate::spin_states::StateSummary;

/// Structure term for one transfer `Δk`. Equals `N²` at `Δk = 0` with no
/// phases.
pub fn structure_term(
    positions: &EnsemblePositions,
    phases: Option<&PhaseProfile>,
    delta_k: Vector3<f64>,
) -> Result<f64> {
    let phases = checked_phases(positions, phases)?;
    Ok(structure_unchecked(
        &positions.coordinates,
        phases,
        &delta_k,
    ))
}

fn checked_phases<'a>(
    positions: &EnsemblePositions,
    phases: Option<&'a PhaseProfile>,
) -> Result<Option<&'a [f64]>> {
    match phases {
        Some(p) if p.len() != positions.len() => Err(Error::LengthMismatch {
            what: "phase profile",
            expected: positions.len(),
            found: p.len(),
        }),
        Some(p) => Ok(Some(&p.phases)),
        None => Ok(None),
    }
}

pub(crate) fn structure_unchecked(
    coords: &[Vector3<f64>],
    phases: Option<&[f64]>,
    dk: &Vector3<f64>,
) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    match phases {
        Some(ph) => {
            for (r, &p) in coords.iter().zip(ph) {
                let (s, c) = (p - dk.dot(r)).sin_cos();
                re += c;
                im += s;
            }
        }
        None => {
            for r in coords {
                let (s, c) = (-dk.dot(r)).sin_cos();
                re += c;
                im += s;
            }
        }
    }
    re * re + im * im
}

/// One collective pixel from the structure term.
pub fn pattern_value(summary: &StateSummary, structure: f64) -> f64 {
    let n = summary.n_atoms as f64;
    summary.ns_mean - summary.pair_sum / (n - 1.0) + summary.pair_sum * structure / (n * n - n)
}

/// Source of the structure term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatternMode {
    /// Evaluate `S` for the sampled positions; reproduces speckle.
    #[default]
    FixedPositions,
    /// Gaussian characteristic function `N² exp(-|Δk_⊥ - q|² σ²)`.
    EnsembleAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PatternOptions {
    pub mode: PatternMode,
    pub envelope: Envelope,
}

/// Structure term sampled over a grid, independent of the spin state.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMap {
    pub grid: KGrid,
    pub values: Vec<f64>,
    pub mode: ImageMode,
    pub n_atoms: usize,
    pub k0: f64,
    pub theta_b: f64,
}

/// Evaluates `S` over every grid pixel.
///
/// The result is a pure per-pixel function of its inputs, so parallel and
/// serial evaluation agree bit for bit.
pub fn structure_map(
    positions: &EnsemblePositions,
    phases: Option<&PhaseProfile>,
    grid: &KGrid,
    mode: PatternMode,
) -> Result<StructureMap> {
    let k0 = positions.k0;
    grid.check_propagating(k0)?;
    let ph = checked_phases(positions, phases)?;
    let n = positions.len();
    let values = match mode {
        PatternMode::FixedPositions => crate::par_map(grid.len(), |i| {
            let dk = delta_k(grid.point_at(i), k0);
            structure_unchecked(&positions.coordinates, ph, &dk)
        }),
        PatternMode::EnsembleAveraged => {
            let sigma = positions.geometry.gaussian_sigma().ok_or_else(|| {
                Error::domain(
                    "pattern mode",
                    "ensemble averaging needs a Gaussian geometry",
                )
            })?;
            let q = match phases {
                None => Vector3::zeros(),
                Some(p) => p.linear.ok_or_else(|| {
                    Error::domain(
                        "pattern mode",
                        "ensemble averaging needs a linear phase profile",
                    )
                })?,
            };
            let line = matches!(positions.geometry, Geometry::Gaussian1d { .. });
            let n2 = (n * n) as f64;
            grid.points()
                .map(|k| {
                    let dx = k[0] - q.x;
                    let dy = if line { 0.0 } else { k[1] - q.y };
                    n2 * (-(dx * dx + dy * dy) * sigma * sigma).exp()
                })
                .collect()
        }
    };
    Ok(StructureMap {
        grid: *grid,
        values,
        mode: match mode {
            PatternMode::FixedPositions => ImageMode::FixedPositions,
            PatternMode::EnsembleAveraged => ImageMode::Analytic,
        },
        n_atoms: n,
        k0,
        theta_b: positions.boundary_angle(),
    })
}

impl StructureMap {
    /// Collective intensity of `summary` on this map.
    pub fn pattern(&self, summary: &StateSummary, envelope: Envelope) -> Result<DiffractionImage> {
        check_summary(summary, self.n_atoms)?;
        let mut clipped = 0;
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(self.grid.points())
            .map(|(&s, k)| {
                let v = pattern_value(summary, s);
                if v < 0.0 {
                    clipped += 1;
                    0.0
                } else {
                    v * envelope.factor(polar_angle(k, self.k0))
                }
            })
            .collect();
        if clipped > 0 {
            log::warn!("{clipped} pixels clipped at zero; the state summary is unphysical");
        }
        Ok(DiffractionImage {
            grid: self.grid,
            data: ImageData::Intensity(values),
            mode: self.mode,
            n_atoms: self.n_atoms,
            k0: self.k0,
            theta_b: self.theta_b,
            clipped_pixels: clipped,
        })
    }

    /// The structure term itself as an image.
    pub fn as_image(&self) -> DiffractionImage {
        DiffractionImage {
            grid: self.grid,
            data: ImageData::Intensity(self.values.clone()),
            mode: self.mode,
            n_atoms: self.n_atoms,
            k0: self.k0,
            theta_b: self.theta_b,
            clipped_pixels: 0,
        }
    }
}

pub(crate) fn check_summary(summary: &StateSummary, n_atoms: usize) -> Result<()> {
    if summary.n_atoms < 2 {
        return Err(Error::domain("n_atoms", "the pattern needs N >= 2"));
    }
    if summary.n_atoms != n_atoms {
        return Err(Error::LengthMismatch {
            what: "atom positions",
            expected: summary.n_atoms,
            found: n_atoms,
        });
    }
    Ok(())
}

/// Collective pattern of `summary` over `grid`.
pub fn collective_pattern(
    summary: &StateSummary,
    positions: &EnsemblePositions,
    phases: Option<&PhaseProfile>,
    grid: &KGrid,
    options: &PatternOptions,
) -> Result<DiffractionImage> {
    check_summary(summary, positions.len())?;
    structure_map(positions, phases, grid, options.mode)?.pattern(summary, options.envelope)
}
