//! Detector grids over transverse wavevector and the images defined on them.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Regular grid over the transverse wavevector transfer `(k_x, k_y)`, rad/m.
///
/// A far-field direction `(θ, φ)` maps to `k_⊥ = k₀ sin θ (cos φ, sin φ)`,
/// so a gradient imprint `q` translates the pattern rigidly in these
/// coordinates. `ny == 1` describes a line detector along `k_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    /// Coordinates of pixel `(0, 0)`.
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl KGrid {
    pub fn new(origin: [f64; 2], spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::domain(
                "grid spacing",
                format!("{spacing} must be positive"),
            ));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::domain(
                "grid size",
                "needs at least one pixel per axis",
            ));
        }
        Ok(Self {
            origin,
            spacing,
            nx,
            ny,
        })
    }

    /// `n × n` square centered on `center` spanning `±half_extent`.
    pub fn square(center: [f64; 2], half_extent: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("grid size", "square grid needs n >= 2"));
        }
        let spacing = 2.0 * half_extent / (n as f64 - 1.0);
        Self::new(
            [center[0] - half_extent, center[1] - half_extent],
            spacing,
            n,
            n,
        )
    }

    /// Line detector along `k_x` centered on `center_x`.
    pub fn line(center_x: f64, half_extent: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("grid size", "line grid needs n >= 2"));
        }
        let spacing = 2.0 * half_extent / (n as f64 - 1.0);
        Self::new([center_x - half_extent, 0.0], spacing, n, 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_line(&self) -> bool {
        self.ny == 1
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.spacing,
            self.origin[1] + iy as f64 * self.spacing,
        ]
    }

    /// Point of the row-major pixel index.
    pub fn point_at(&self, index: usize) -> [f64; 2] {
        self.point(index % self.nx, index / self.nx)
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(|i| self.point_at(i))
    }

    pub fn max_abs_k(&self) -> f64 {
        let far = self.point(self.nx - 1, self.ny - 1);
        let corners = [
            self.origin,
            far,
            [self.origin[0], far[1]],
            [far[0], self.origin[1]],
        ];
        corners.iter().map(|c| c[0].hypot(c[1])).fold(0.0, f64::max)
    }

    /// Rejects grids reaching evanescent transfers `|k_⊥| >= k₀`.
    pub fn check_propagating(&self, k0: f64) -> Result<()> {
        let m = self.max_abs_k();
        if m >= k0 {
            return Err(Error::domain(
                "grid extent",
                format!("|k_perp| reaches {m:.4e} >= k0 = {k0:.4e}"),
            ));
        }
        Ok(())
    }

    /// Fractional pixel coordinates of a point.
    pub fn locate(&self, k: [f64; 2]) -> (f64, f64) {
        (
            (k[0] - self.origin[0]) / self.spacing,
            (k[1] - self.origin[1]) / self.spacing,
        )
    }
}

/// Far-field polar angle of a transverse transfer.
pub fn polar_angle(k_perp: [f64; 2], k0: f64) -> f64 {
    (k_perp[0].hypot(k_perp[1]) / k0).min(1.0).asin()
}

/// Full 3D transfer `Δk = k - k₀ ẑ` for a propagating far-field direction.
pub fn delta_k(k_perp: [f64; 2], k0: f64) -> Vector3<f64> {
    let kt2 = k_perp[0] * k_perp[0] + k_perp[1] * k_perp[1];
    // k0 (cos θ - 1), written to avoid cancellation at small angles
    let kz = -kt2 / (k0 + (k0 * k0 - kt2).max(0.0).sqrt());
    Vector3::new(k_perp[0], k_perp[1], kz)
}

/// Single-atom emission envelope `I_s(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Envelope {
    #[default]
    Uniform,
    /// `(1 + cos² θ) / 2`, unity in the forward direction.
    Dipole,
}

impl Envelope {
    pub fn factor(&self, theta: f64) -> f64 {
        match self {
            Envelope::Uniform => 1.0,
            Envelope::Dipole => 0.5 * (1.0 + theta.cos().powi(2)),
        }
    }
}

/// How an image was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageMode {
    /// Ensemble-averaged structure term.
    Analytic,
    /// One realization of the atom positions.
    FixedPositions,
    /// Shot-noise photon counts.
    Counts,
}

impl ImageMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageMode::Analytic => "analytic",
            ImageMode::FixedPositions => "fixed-positions",
            ImageMode::Counts => "counts",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageData {
    Intensity(Vec<f64>),
    Counts(Vec<u64>),
}

/// Collective intensity or photon counts over a [`KGrid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionImage {
    pub grid: KGrid,
    pub data: ImageData,
    pub mode: ImageMode,
    pub n_atoms: usize,
    pub k0: f64,
    pub theta_b: f64,
    /// Pixels clipped at zero (only for unphysical summaries).
    pub clipped_pixels: usize,
}

impl DiffractionImage {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        let i = iy * self.grid.nx + ix;
        match &self.data {
            ImageData::Intensity(v) => v[i],
            ImageData::Counts(c) => c[i] as f64,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match &self.data {
            ImageData::Intensity(v) => v.clone(),
            ImageData::Counts(c) => c.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn counts(&self) -> Option<&[u64]> {
        match &self.data {
            ImageData::Counts(c) => Some(c),
            ImageData::Intensity(_) => None,
        }
    }

    pub fn intensities(&self) -> Option<&[f64]> {
        match &self.data {
            ImageData::Intensity(v) => Some(v),
            ImageData::Counts(_) => None,
        }
    }

    pub fn total(&self) -> f64 {
        match &self.data {
            ImageData::Intensity(v) => v.iter().sum(),
            ImageData::Counts(c) => c.iter().sum::<u64>() as f64,
        }
    }

    /// Bilinear interpolation at `k`; `None` outside the grid. Line images
    /// interpolate along `k_x` and require `k_y` on the line.
    pub fn sample(&self, k: [f64; 2]) -> Option<f64> {
        let g = &self.grid;
        let (fx, fy) = g.locate(k);
        let eps = 1e-9;
        let inside = |f: f64, n: usize| f >= -eps && f <= (n as f64 - 1.0) + eps;
        if !inside(fx, g.nx) {
            return None;
        }
        let lerp_x = |iy: usize| -> f64 {
            if g.nx == 1 {
                return self.value(0, iy);
            }
            let fx = fx.clamp(0.0, g.nx as f64 - 1.0);
            let i0 = (fx.floor() as usize).min(g.nx - 2);
            let t = fx - i0 as f64;
            (1.0 - t) * self.value(i0, iy) + t * self.value(i0 + 1, iy)
        };
        if g.ny == 1 {
            return (fy.abs() <= eps * 1e3).then(|| lerp_x(0));
        }
        if !inside(fy, g.ny) {
            return None;
        }
        let fy = fy.clamp(0.0, g.ny as f64 - 1.0);
        let j0 = (fy.floor() as usize).min(g.ny - 2);
        let u = fy - j0 as f64;
        Some((1.0 - u) * lerp_x(j0) + u * lerp_x(j0 + 1))
    }
}
