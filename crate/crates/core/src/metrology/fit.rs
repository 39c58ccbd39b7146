//! Peak localization on diffraction images.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::diffraction::{DiffractionImage, ImageData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Poisson maximum-likelihood Gaussian plus flat background.
    Gaussian,
    /// Background-subtracted centroid.
    Centroid,
}

impl FitMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMethod::Gaussian => "gaussian",
            FitMethod::Centroid => "centroid",
        }
    }
}

/// Fitted peak in transverse wavevector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFit {
    /// Center `(k_x, k_y)`, rad/m. `k_y` is zero for line images.
    pub center: [f64; 2],
    /// Covariance of the center, (rad/m)².
    pub covariance: Matrix2<f64>,
    pub amplitude: f64,
    /// Gaussian standard deviation of the peak, rad/m.
    pub width: f64,
    pub background: f64,
    pub method: FitMethod,
    pub iterations: usize,
    /// Counts (or summed intensity) in the whole image.
    pub photons: f64,
    /// Poisson deviance per degree of freedom inside the fit window.
    pub reduced_deviance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Fit window half-width in units of the initial width estimate.
    pub window_widths: f64,
    /// Smallest photon total accepted on count images.
    pub min_counts: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            window_widths: 5.0,
            min_counts: 20,
        }
    }
}

/// Locates the dominant peak with default options.
pub fn fit_peak(image: &DiffractionImage) -> Result<PeakFit> {
    fit_peak_with(image, &FitOptions::default())
}

/// Locates the dominant peak of a count or intensity image.
///
/// A multi-scale box-filter significance scan picks the starting point;
/// a damped Gauss-Newton iteration on the Poisson likelihood then fits
/// `b + a exp(-|k - c|² / 2w²)` inside a window around it. The center
/// covariance is the inverse Fisher information at the optimum. If the
/// iteration does not converge, or converges to something that is not a
/// peak, the background-subtracted centroid of the window is returned.
pub fn fit_peak_with(image: &DiffractionImage, options: &FitOptions) -> Result<PeakFit> {
    let y = image.values();
    if let ImageData::Counts(c) = &image.data {
        let total: u64 = c.iter().sum();
        if total < options.min_counts {
            return Err(Error::InsufficientCounts {
                found: total,
                required: options.min_counts,
            });
        }
    } else if y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::domain(
            "image",
            "intensities must be finite and nonnegative",
        ));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !(hi > lo) {
        return Err(Error::DegenerateImage("flat image has no peak".into()));
    }
    let grid = &image.grid;
    let line = grid.is_line();
    let seed = seed_peak(&y, grid.nx, grid.ny);

    let w0 = (seed.scale.max(1.0) * 0.8) * grid.spacing;
    let half = (options.window_widths * w0).max(4.0 * grid.spacing);
    let hp = (half / grid.spacing).ceil() as isize;
    let clip = |c: usize, n: usize| -> (usize, usize) {
        let a = (c as isize - hp).max(0) as usize;
        let b = ((c as isize + hp) as usize).min(n - 1);
        (a, b)
    };
    let (x0, x1) = clip(seed.ix, grid.nx);
    let (y0, y1) = if line { (0, 0) } else { clip(seed.iy, grid.ny) };
    let mut pts = Vec::new();
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            pts.push((grid.point(ix, iy), y[iy * grid.nx + ix]));
        }
    }
    let photons: f64 = y.iter().sum();
    let b0 = seed.background.max(1e-9 * hi);
    let a0 = (y[seed.iy * grid.nx + seed.ix] - b0)
        .max(seed.excess)
        .max(1e-6 * hi);
    let c0 = grid.point(seed.ix, seed.iy);
    let start = Params {
        b: b0,
        a: a0,
        cx: c0[0],
        cy: c0[1],
        w: w0,
    };
    let bounds = Bounds {
        x: [grid.point(x0, 0)[0], grid.point(x1, 0)[0]],
        y: [grid.point(0, y0)[1], grid.point(0, y1)[1]],
        w_min: 0.2 * grid.spacing,
        w_max: 2.0 * half,
    };
    match poisson_gaussian_fit(&pts, start, line, options.max_iterations) {
        Some(fit) if bounds.accepts(&fit.params, line) => Ok(PeakFit {
            center: [fit.params.cx, if line { 0.0 } else { fit.params.cy }],
            covariance: fit.center_cov,
            amplitude: fit.params.a,
            width: fit.params.w,
            background: fit.params.b,
            method: FitMethod::Gaussian,
            iterations: fit.iterations,
            photons,
            reduced_deviance: fit.deviance / (pts.len() as f64 - fit.n_params as f64).max(1.0),
        }),
        _ => {
            log::debug!("gaussian fit rejected; using centroid");
            centroid(&pts, seed.background, line, photons)
        }
    }
}

struct Seed {
    ix: usize,
    iy: usize,
    /// Box half-width (pixels) of the most significant scale.
    scale: f64,
    background: f64,
    /// Mean excess per pixel inside the winning box.
    excess: f64,
}

/// Multi-scale box-filter significance scan.
fn seed_peak(y: &[f64], nx: usize, ny: usize) -> Seed {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mu = if median > 0.0 { median } else { mean };

    // integral image with a zero border
    let (w, h) = (nx + 1, ny + 1);
    let mut sat = vec![0.0; w * h];
    for iy in 0..ny {
        let mut row = 0.0;
        for ix in 0..nx {
            row += y[iy * nx + ix];
            sat[(iy + 1) * w + ix + 1] = sat[iy * w + ix + 1] + row;
        }
    }
    let rect = |x0: usize, x1: usize, y0: usize, y1: usize| {
        sat[(y1 + 1) * w + x1 + 1] - sat[y0 * w + x1 + 1] - sat[(y1 + 1) * w + x0]
            + sat[y0 * w + x0]
    };

    let max_scale = (nx.max(ny) / 4).max(1);
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize, 0usize, 0.0);
    let mut s = 0usize;
    loop {
        for iy in 0..ny {
            let (y0, y1) = if ny == 1 {
                (0, 0)
            } else {
                (iy.saturating_sub(s), (iy + s).min(ny - 1))
            };
            for ix in 0..nx {
                let (x0, x1) = (ix.saturating_sub(s), (ix + s).min(nx - 1));
                let n = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
                let sum = rect(x0, x1, y0, y1);
                let z = (sum - mu * n) / (mu * n + 1.0).sqrt();
                if z > best.0 {
                    best = (z, ix, iy, s, (sum - mu * n) / n);
                }
            }
        }
        if s >= max_scale {
            break;
        }
        s = if s == 0 { 1 } else { 2 * s };
    }
    Seed {
        ix: best.1,
        iy: best.2,
        scale: best.3 as f64,
        background: mu,
        excess: best.4,
    }
}

#[derive(Debug, Clone, Copy)]
struct Params {
    b: f64,
    a: f64,
    cx: f64,
    cy: f64,
    w: f64,
}

impl Params {
    fn to_vec(self, line: bool) -> Vec<f64> {
        if line {
            vec![self.b, self.a, self.cx, self.w]
        } else {
            vec![self.b, self.a, self.cx, self.cy, self.w]
        }
    }

    fn from_vec(v: &[f64], line: bool) -> Self {
        if line {
            Params {
                b: v[0],
                a: v[1],
                cx: v[2],
                cy: 0.0,
                w: v[3],
            }
        } else {
            Params {
                b: v[0],
                a: v[1],
                cx: v[2],
                cy: v[3],
                w: v[4],
            }
        }
    }
}

struct Bounds {
    x: [f64; 2],
    y: [f64; 2],
    w_min: f64,
    w_max: f64,
}

impl Bounds {
    fn accepts(&self, p: &Params, line: bool) -> bool {
        let inside = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        p.a > 0.0
            && p.w >= self.w_min
            && p.w <= self.w_max
            && inside(p.cx, self.x)
            && (line || inside(p.cy, self.y))
    }
}

struct GaussFit {
    params: Params,
    center_cov: Matrix2<f64>,
    deviance: f64,
    iterations: usize,
    n_params: usize,
}

/// Model value and gradient with respect to the parameter vector.
fn model(p: &Params, k: [f64; 2], line: bool, grad: &mut [f64]) -> f64 {
    let dx = k[0] - p.cx;
    let dy = if line { 0.0 } else { k[1] - p.cy };
    let r2 = dx * dx + dy * dy;
    let w2 = p.w * p.w;
    let g = (-r2 / (2.0 * w2)).exp();
    grad[0] = 1.0;
    grad[1] = g;
    grad[2] = p.a * g * dx / w2;
    if line {
        grad[3] = p.a * g * r2 / (w2 * p.w);
    } else {
        grad[3] = p.a * g * dy / w2;
        grad[4] = p.a * g * r2 / (w2 * p.w);
    }
    p.b + p.a * g
}

fn nll(pts: &[([f64; 2], f64)], p: &Params, line: bool) -> Option<f64> {
    if !(p.w > 0.0 && p.b >= 0.0) {
        return None;
    }
    let mut grad = [0.0; 5];
    let mut acc = 0.0;
    for (k, y) in pts {
        let m = model(p, *k, line, &mut grad);
        if !(m > 0.0) {
            return None;
        }
        acc += m - if *y > 0.0 { y * m.ln() } else { 0.0 };
    }
    Some(acc)
}

fn poisson_gaussian_fit(
    pts: &[([f64; 2], f64)],
    start: Params,
    line: bool,
    max_iter: usize,
) -> Option<GaussFit> {
    let np = if line { 4 } else { 5 };
    if pts.len() <= np {
        return None;
    }
    let mut theta = start.to_vec(line);
    let mut cur = nll(pts, &start, line)?;
    let mut lambda = 1e-3;
    let mut grad = [0.0; 5];
    let mut converged = false;
    let mut iterations = 0;
    let fisher = |theta: &[f64]| -> (DMatrix<f64>, DVector<f64>) {
        let p = Params::from_vec(theta, line);
        let mut h = DMatrix::zeros(np, np);
        let mut g = DVector::zeros(np);
        let mut gr = [0.0; 5];
        for (k, y) in pts {
            let m = model(&p, *k, line, &mut gr);
            let r = 1.0 - y / m;
            for a in 0..np {
                g[a] += r * gr[a];
                for b in 0..=a {
                    h[(a, b)] += gr[a] * gr[b] / m;
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        (h, g)
    };
    while iterations < max_iter {
        iterations += 1;
        let (h, g) = fisher(&theta);
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = h.clone();
            for i in 0..np {
                a[(i, i)] += lambda * h[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            match nll(pts, &Params::from_vec(&trial, line), line) {
                Some(v) if v <= cur => {
                    let drop = cur - v;
                    theta = trial;
                    cur = v;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    if drop <= 1e-10 * cur.abs().max(1.0) {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left: stationary if the Newton decrement vanishes
            let (h, g) = fisher(&theta);
            if let Some(c) = h.cholesky() {
                converged = g.dot(&c.solve(&g)) < 1e-8;
            }
            break;
        }
    }
    if !converged {
        return None;
    }
    let params = Params::from_vec(&theta, line);
    let (h, _) = fisher(&theta);
    let inv = h.try_inverse()?;
    let center_cov = if line {
        Matrix2::new(inv[(2, 2)], 0.0, 0.0, 0.0)
    } else {
        Matrix2::new(inv[(2, 2)], inv[(2, 3)], inv[(3, 2)], inv[(3, 3)])
    };
    if !(center_cov[(0, 0)] >= 0.0 && center_cov[(1, 1)] >= 0.0) {
        return None;
    }
    let mut deviance = 0.0;
    for (k, y) in pts {
        let m = model(&params, *k, line, &mut grad);
        deviance += 2.0 * (m - y + if *y > 0.0 { y * (y / m).ln() } else { 0.0 });
    }
    Some(GaussFit {
        params,
        center_cov,
        deviance,
        iterations,
        n_params: np,
    })
}

fn centroid(pts: &[([f64; 2], f64)], background: f64, line: bool, photons: f64) -> Result<PeakFit> {
    let excess: f64 = pts.iter().map(|(_, y)| y - background).sum();
    if !(excess > 0.0) {
        return Err(Error::DegenerateImage(
            "no excess above background near the peak".into(),
        ));
    }
    let mut c = [0.0; 2];
    for (k, y) in pts {
        c[0] += (y - background) * k[0];
        c[1] += (y - background) * k[1];
    }
    c[0] /= excess;
    c[1] /= excess;
    // Poisson propagation: Var(c) = Σ y (k - c)² / excess²
    let mut cov = Matrix2::zeros();
    let mut spread = 0.0;
    for (k, y) in pts {
        let d = [k[0] - c[0], k[1] - c[1]];
        cov[(0, 0)] += y * d[0] * d[0];
        cov[(0, 1)] += y * d[0] * d[1];
        cov[(1, 1)] += y * d[1] * d[1];
        spread += (y - background).max(0.0) * (d[0] * d[0] + d[1] * d[1]);
    }
    cov[(1, 0)] = cov[(0, 1)];
    cov /= excess * excess;
    if line {
        c[1] = 0.0;
        cov[(0, 1)] = 0.0;
        cov[(1, 0)] = 0.0;
        cov[(1, 1)] = 0.0;
    }
    let dims = if line { 1.0 } else { 2.0 };
    Ok(PeakFit {
        center: c,
        covariance: cov,
        amplitude: excess,
        width: (spread / excess / dims).sqrt(),
        background,
        method: FitMethod::Centroid,
        iterations: 0,
        photons,
        reduced_deviance: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::{multinomial, ImageMode, KGrid};

    fn gaussian_image(grid: KGrid, c: [f64; 2], w: f64, a: f64, b: f64) -> DiffractionImage {
        let v = grid
            .points()
            .map(|k| {
                let r2 = (k[0] - c[0]).powi(2)
                    + if grid.is_line() {
                        0.0
                    } else {
                        (k[1] - c[1]).powi(2)
                    };
                b + a * (-r2 / (2.0 * w * w)).exp()
            })
            .collect();
        DiffractionImage {
            grid,
            data: ImageData::Intensity(v),
            mode: ImageMode::Analytic,
            n_atoms: 10,
            k0: 1e7,
            theta_b: 0.01,
            clipped_pixels: 0,
        }
    }

    #[test]
    fn noiseless_2d_recovery() {
        let grid = KGrid::square([0.0, 0.0], 1e5, 65).unwrap();
        let c = [1.234e4, -2.71e4];
        let img = gaussian_image(grid, c, 6e3, 500.0, 3.0);
        let f = fit_peak(&img).unwrap();
        assert_eq!(f.method, FitMethod::Gaussian);
        assert!((f.center[0] - c[0]).abs() < 1e-3 * grid.spacing);
        assert!((f.center[1] - c[1]).abs() < 1e-3 * grid.spacing);
        assert!((f.width - 6e3).abs() < 1e-3 * 6e3);
    }

    #[test]
    fn noiseless_line_recovery() {
        let grid = KGrid::line(0.0, 1e5, 401).unwrap();
        let img = gaussian_image(grid, [3.3e4, 0.0], 2e3, 50.0, 0.5);
        let f = fit_peak(&img).unwrap();
        assert!((f.center[0] - 3.3e4).abs() < 1e-3 * grid.spacing);
        assert_eq!(f.center[1], 0.0);
        assert_eq!(f.covariance[(1, 1)], 0.0);
    }

    #[test]
    fn flat_and_starved_images_rejected() {
        let grid = KGrid::square([0.0, 0.0], 1e5, 9).unwrap();
        let img = gaussian_image(grid, [0.0, 0.0], 1.0, 0.0, 2.0);
        assert!(matches!(fit_peak(&img), Err(Error::DegenerateImage(_))));
        let counts = DiffractionImage {
            data: ImageData::Counts(vec![1; 10]),
            grid: KGrid::line(0.0, 1.0, 10).unwrap(),
            ..img
        };
        assert!(matches!(
            fit_peak(&counts),
            Err(Error::InsufficientCounts { .. })
        ));
    }

    #[test]
    fn reported_covariance_is_calibrated() {
        let grid = KGrid::line(0.0, 1.0, 201).unwrap();
        let truth = 0.137;
        let img = gaussian_image(grid, [truth, 0.0], 0.05, 30.0, 1.0);
        let w = img.values();
        let (mut errs, mut vars) = (Vec::new(), Vec::new());
        for seed in 0..300 {
            let c = multinomial(&w, 10_000, seed).unwrap();
            let f = fit_peak(&DiffractionImage {
                data: ImageData::Counts(c),
                ..img.clone()
            })
            .unwrap();
            errs.push(f.center[0] - truth);
            vars.push(f.covariance[(0, 0)]);
        }
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let reported = (vars.iter().sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt(), "bias {mean} vs sd {sd}");
        assert!(
            (sd / reported - 1.0).abs() < 0.25,
            "sd {sd} reported {reported}"
        );
    }
}
