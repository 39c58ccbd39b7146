//! Atom positions and per-atom phase profiles.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// `2 sqrt(2 ln 2)`: FWHM of a unit-variance Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Spatial distribution the positions were drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Gaussian in the x-y plane, z = 0.
    Gaussian2d { fwhm: f64 },
    /// Gaussian along x, y = z = 0.
    Gaussian1d { fwhm: f64 },
    /// Uniform box: `width` along x and y, `thickness` along z.
    Slab { width: f64, thickness: f64 },
    /// Regular cubic grid, `dims[0] × dims[1] × dims[2]` sites.
    Lattice { spacing: f64, dims: [usize; 3] },
    /// Caller-supplied coordinates.
    Explicit {
        transverse_size: f64,
        longitudinal_size: Option<f64>,
    },
}

impl Geometry {
    fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(name, format!("{v} must be positive")))
            }
        };
        match *self {
            Geometry::Gaussian2d { fwhm } | Geometry::Gaussian1d { fwhm } => positive("fwhm", fwhm),
            Geometry::Slab { width, thickness } => {
                positive("width", width)?;
                positive("thickness", thickness)
            }
            Geometry::Lattice { spacing, dims } => {
                positive("spacing", spacing)?;
                if dims.contains(&0) {
                    return Err(Error::domain(
                        "lattice dims",
                        "every dimension needs at least one site",
                    ));
                }
                Ok(())
            }
            Geometry::Explicit {
                transverse_size,
                longitudinal_size,
            } => {
                positive("transverse_size", transverse_size)?;
                if let Some(h) = longitudinal_size {
                    positive("longitudinal_size", h)?;
                }
                Ok(())
            }
        }
    }

    /// Transverse ensemble size A.
    pub fn transverse_size(&self) -> f64 {
        match *self {
            Geometry::Gaussian2d { fwhm } | Geometry::Gaussian1d { fwhm } => fwhm,
            Geometry::Slab { width, .. } => width,
            Geometry::Lattice { spacing, dims } => spacing * dims[0].max(dims[1]) as f64,
            Geometry::Explicit {
                transverse_size, ..
            } => transverse_size,
        }
    }

    /// Longitudinal size H, if the ensemble has any extent along z.
    pub fn longitudinal_size(&self) -> Option<f64> {
        match *self {
            Geometry::Slab { thickness, .. } => Some(thickness),
            Geometry::Lattice { spacing, dims } if dims[2] > 1 => Some(spacing * dims[2] as f64),
            Geometry::Explicit {
                longitudinal_size, ..
            } => longitudinal_size,
            _ => None,
        }
    }

    /// Number of spatial axes along which atoms are spread.
    pub fn dimensionality(&self) -> usize {
        match *self {
            Geometry::Gaussian1d { .. } => 1,
            Geometry::Gaussian2d { .. } => 2,
            Geometry::Slab { .. } => 3,
            Geometry::Lattice { dims, .. } => dims.iter().filter(|&&d| d > 1).count().max(1),
            Geometry::Explicit {
                longitudinal_size, ..
            } => {
                if longitudinal_size.is_some() {
                    3
                } else {
                    2
                }
            }
        }
    }

    /// Gaussian standard deviation per spread axis, for Gaussian geometries.
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match *self {
            Geometry::Gaussian2d { fwhm } | Geometry::Gaussian1d { fwhm } => {
                Some(fwhm / FWHM_PER_SIGMA)
            }
            _ => None,
        }
    }
}

/// Sampled atom coordinates (meters) plus the geometry they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePositions {
    pub coordinates: Vec<Vector3<f64>>,
    pub geometry: Geometry,
    /// Laser wavevector magnitude k₀, rad/m.
    pub k0: f64,
    pub rng_seed: Option<u64>,
}

impl EnsemblePositions {
    pub fn from_coordinates(
        coordinates: Vec<Vector3<f64>>,
        geometry: Geometry,
        k0: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        check_k0(k0)?;
        if coordinates.len() < 2 {
            return Err(Error::domain("positions", "need at least two atoms"));
        }
        if coordinates.iter().any(|r| !r.iter().all(|v| v.is_finite())) {
            return Err(Error::domain("positions", "non-finite coordinate"));
        }
        Ok(Self {
            coordinates,
            geometry,
            k0,
            rng_seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn transverse_size(&self) -> f64 {
        self.geometry.transverse_size()
    }

    /// Half-width θ_b of the sharp diffraction feature.
    pub fn boundary_angle(&self) -> f64 {
        boundary_angle(
            self.k0,
            self.transverse_size(),
            self.geometry.longitudinal_size(),
        )
        .expect("validated geometry has positive sizes")
    }

    /// Warns when a line-like ensemble is denser than `N <= k₀ A`.
    pub fn dilute_warning(&self) -> Option<String> {
        let bound = self.k0 * self.transverse_size();
        (self.geometry.dimensionality() == 1 && self.len() as f64 > bound).then(|| {
            format!(
                "N = {} exceeds k0*A = {bound:.1}; the ensemble is not dilute",
                self.len()
            )
        })
    }

    /// Sample standard deviation of each coordinate axis.
    pub fn axis_std(&self) -> [f64; 3] {
        let n = self.len() as f64;
        let mean: Vector3<f64> = self.coordinates.iter().sum::<Vector3<f64>>() / n;
        let mut var = [0.0; 3];
        for r in &self.coordinates {
            for (a, v) in var.iter_mut().enumerate() {
                *v += (r[a] - mean[a]).powi(2);
            }
        }
        var.map(|v| (v / (n - 1.0)).sqrt())
    }
}

fn check_k0(k0: f64) -> Result<()> {
    if k0 > 0.0 && k0.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("k0", format!("{k0} must be positive")))
    }
}

/// Draws `n_atoms` positions. Deterministic for a fixed seed.
pub fn sample_positions(
    geometry: Geometry,
    n_atoms: usize,
    k0: f64,
    rng_seed: u64,
) -> Result<EnsemblePositions> {
    geometry.validate()?;
    check_k0(k0)?;
    if n_atoms < 2 {
        return Err(Error::domain("n_atoms", format!("{n_atoms} < 2")));
    }
    let mut rng = rng_from_seed(rng_seed);
    let coordinates: Vec<Vector3<f64>> = match geometry {
        Geometry::Gaussian2d { fwhm } => {
            let d = Normal::new(0.0, fwhm / FWHM_PER_SIGMA).expect("positive sigma");
            (0..n_atoms)
                .map(|_| {
                    let x = d.sample(&mut rng);
                    let y = d.sample(&mut rng);
                    Vector3::new(x, y, 0.0)
                })
                .collect()
        }
        Geometry::Gaussian1d { fwhm } => {
            let d = Normal::new(0.0, fwhm / FWHM_PER_SIGMA).expect("positive sigma");
            (0..n_atoms)
                .map(|_| Vector3::new(d.sample(&mut rng), 0.0, 0.0))
                .collect()
        }
        Geometry::Slab { width, thickness } => {
            let ux = Uniform::new(-width / 2.0, width / 2.0).expect("positive width");
            let uz = Uniform::new(-thickness / 2.0, thickness / 2.0).expect("positive thickness");
            (0..n_atoms)
                .map(|_| {
                    let x = rng.sample(ux);
                    let y = rng.sample(ux);
                    Vector3::new(x, y, rng.sample(uz))
                })
                .collect()
        }
        Geometry::Lattice { spacing, dims } => {
            let sites: usize = dims.iter().product();
            if sites != n_atoms {
                return Err(Error::domain(
                    "lattice dims",
                    format!("{dims:?} holds {sites} sites, not {n_atoms}"),
                ));
            }
            let offset = |n: usize| (n as f64 - 1.0) / 2.0;
            let mut out = Vec::with_capacity(sites);
            for iz in 0..dims[2] {
                for iy in 0..dims[1] {
                    for ix in 0..dims[0] {
                        out.push(Vector3::new(
                            (ix as f64 - offset(dims[0])) * spacing,
                            (iy as f64 - offset(dims[1])) * spacing,
                            (iz as f64 - offset(dims[2])) * spacing,
                        ));
                    }
                }
            }
            out
        }
        Geometry::Explicit { .. } => {
            return Err(Error::domain(
                "geometry",
                "explicit geometries are built with EnsemblePositions::from_coordinates",
            ))
        }
    };
    Ok(EnsemblePositions {
        coordinates,
        geometry,
        k0,
        rng_seed: Some(rng_seed),
    })
}

/// `θ_b = min{ sqrt(π / (k₀ H)), 2π / (k₀ A) }`; the first branch is
/// dropped when the ensemble has no longitudinal extent.
pub fn boundary_angle(k0: f64, transverse: f64, longitudinal: Option<f64>) -> Result<f64> {
    check_k0(k0)?;
    if !(transverse > 0.0 && transverse.is_finite()) {
        return Err(Error::domain(
            "transverse size",
            format!("{transverse} must be positive"),
        ));
    }
    let transverse_branch = 2.0 * std::f64::consts::PI / (k0 * transverse);
    match longitudinal {
        None => Ok(transverse_branch),
        Some(h) if h > 0.0 && h.is_finite() => Ok((std::f64::consts::PI / (k0 * h))
            .sqrt()
            .min(transverse_branch)),
        Some(h) => Err(Error::domain(
            "longitudinal size",
            format!("{h} must be positive"),
        )),
    }
}

/// Per-atom phases `φ_j` imprinted before emission.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub phases: Vec<f64>,
    /// Set when `φ_j = q · r_j` for a single transfer vector `q`.
    pub linear: Option<Vector3<f64>>,
}

impl PhaseProfile {
    pub fn zeros(n: usize) -> Self {
        Self {
            phases: vec![0.0; n],
            linear: Some(Vector3::zeros()),
        }
    }

    /// `φ_j = q · r_j`.
    pub fn linear(positions: &EnsemblePositions, q: Vector3<f64>) -> Self {
        Self {
            phases: positions.coordinates.iter().map(|r| q.dot(r)).collect(),
            linear: Some(q),
        }
    }

    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("phase profile", "non-finite phase"));
        }
        Ok(Self {
            phases,
            linear: None,
        })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}
