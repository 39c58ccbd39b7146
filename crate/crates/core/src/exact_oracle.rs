//! Brute-force quantum mechanics for a few spins.
//!
//! Basis states are bit strings: bit `j` of the index is set when atom `j`
//! is in `|s>`. Spin operators act matrix-free on these indices, so pure
//! states cost `O(2^N)` per operator and density matrices `O(4^N)`.
//!
//! This module is the ground truth for the closed forms in
//! [`crate::spin_states`] and [`crate::diffraction`]; it shares no code
//! path with them beyond the geometry types.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use crate::diffraction::{
    delta_k, polar_angle, DiffractionImage, EnsemblePositions, Envelope, ImageData, ImageMode,
    KGrid,
};
use crate::error::{Error, Result};
use crate::spin_states::BlochAngles;

/// Largest N for density-matrix paths.
pub const MAX_MIXED_ATOMS: usize = 10;
/// Largest N for state-vector paths.
pub const MAX_PURE_ATOMS: usize = 14;

const NORM_TOL: f64 = 1e-10;

type C64 = Complex64;

/// Single-spin amplitudes on `|g>` and `|s>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit {
    pub g: C64,
    pub s: C64,
}

impl Qubit {
    pub const GROUND: Qubit = Qubit {
        g: C64::new(1.0, 0.0),
        s: C64::new(0.0, 0.0),
    };
    pub const EXCITED: Qubit = Qubit {
        g: C64::new(0.0, 0.0),
        s: C64::new(1.0, 0.0),
    };

    pub fn new(g: C64, s: C64) -> Self {
        Self { g, s }
    }

    pub fn from_bloch(angles: BlochAngles) -> Self {
        let (g, s) = angles.amplitudes();
        Self { g, s }
    }

    fn norm_sqr(&self) -> f64 {
        self.g.norm_sqr() + self.s.norm_sqr()
    }
}

/// Shared or per-atom single-spin states of a product state.
#[derive(Debug, Clone, Copy)]
pub enum ProductSpec<'a> {
    Shared(Qubit),
    PerAtom(&'a [Qubit]),
}

/// Exact state of `n_atoms` spins.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactState {
    Pure {
        n_atoms: usize,
        amplitudes: Vec<C64>,
    },
    Mixed {
        n_atoms: usize,
        rho: DMatrix<C64>,
    },
}

fn check_size(n_atoms: usize, mixed: bool) -> Result<()> {
    let (cap, representation) = if mixed {
        (MAX_MIXED_ATOMS, "mixed")
    } else {
        (MAX_PURE_ATOMS, "pure")
    };
    if n_atoms == 0 {
        return Err(Error::domain("n_atoms", "must be at least 1"));
    }
    if n_atoms > cap {
        return Err(Error::TooLarge {
            n_atoms,
            cap,
            representation,
        });
    }
    Ok(())
}

/// Tensor product of single-spin states.
pub fn build_product_state(n_atoms: usize, spec: ProductSpec<'_>) -> Result<ExactState> {
    check_size(n_atoms, false)?;
    let spins: Vec<Qubit> = match spec {
        ProductSpec::Shared(q) => vec![q; n_atoms],
        ProductSpec::PerAtom(qs) => {
            if qs.len() != n_atoms {
                return Err(Error::LengthMismatch {
                    what: "single-spin states",
                    expected: n_atoms,
                    found: qs.len(),
                });
            }
            qs.to_vec()
        }
    };
    for (j, q) in spins.iter().enumerate() {
        if (q.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(
                "single-spin state",
                format!("atom {j} has norm² {}", q.norm_sqr()),
            ));
        }
    }
    let dim = 1usize << n_atoms;
    let amplitudes = (0..dim)
        .map(|b| {
            spins
                .iter()
                .enumerate()
                .fold(C64::new(1.0, 0.0), |acc, (j, q)| {
                    acc * if b >> j & 1 == 1 { q.s } else { q.g }
                })
        })
        .collect();
    Ok(ExactState::Pure {
        n_atoms,
        amplitudes,
    })
}

/// Equal-weight superposition of every basis state with `n_excitations`
/// atoms in `|s>`: the `J = N/2` Dicke state.
pub fn build_symmetric_dicke(n_atoms: usize, n_excitations: usize) -> Result<ExactState> {
    check_size(n_atoms, false)?;
    if n_excitations > n_atoms {
        return Err(Error::domain(
            "excitation number",
            format!("{n_excitations} > N = {n_atoms}"),
        ));
    }
    let dim = 1usize << n_atoms;
    let hits = (0..dim)
        .filter(|b: &usize| b.count_ones() as usize == n_excitations)
        .count();
    let a = 1.0 / (hits as f64).sqrt();
    let amplitudes = (0..dim)
        .map(|b: usize| {
            if b.count_ones() as usize == n_excitations {
                C64::new(a, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(ExactState::Pure {
        n_atoms,
        amplitudes,
    })
}

/// Two-spin singlet `(|gs> - |sg>)/√2`; atom 0 is the first label.
pub fn singlet() -> ExactState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // index 2 = atom 1 excited = |gs>, index 1 = |sg>
    ExactState::Pure {
        n_atoms: 2,
        amplitudes: vec![
            C64::new(0.0, 0.0),
            C64::new(-h, 0.0),
            C64::new(h, 0.0),
            C64::new(0.0, 0.0),
        ],
    }
}

impl ExactState {
    pub fn n_atoms(&self) -> usize {
        match self {
            ExactState::Pure { n_atoms, .. } | ExactState::Mixed { n_atoms, .. } => *n_atoms,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_atoms()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, ExactState::Pure { .. })
    }

    /// `self ⊗ other`; atoms of `other` are appended after those of `self`.
    pub fn tensor(&self, other: &ExactState) -> Result<ExactState> {
        let n_atoms = self.n_atoms() + other.n_atoms();
        match (self, other) {
            (ExactState::Pure { amplitudes: a, .. }, ExactState::Pure { amplitudes: b, .. }) => {
                check_size(n_atoms, false)?;
                let shift = self.n_atoms();
                let mut out = vec![C64::new(0.0, 0.0); 1 << n_atoms];
                for (ib, vb) in b.iter().enumerate() {
                    for (ia, va) in a.iter().enumerate() {
                        out[ia | ib << shift] = va * vb;
                    }
                }
                Ok(ExactState::Pure {
                    n_atoms,
                    amplitudes: out,
                })
            }
            _ => {
                check_size(n_atoms, true)?;
                let ra = self.to_density_matrix()?;
                let rb = other.to_density_matrix()?;
                Ok(ExactState::Mixed {
                    n_atoms,
                    rho: rb.kronecker(&ra),
                })
            }
        }
    }

    /// Density matrix `|ψ><ψ|` or a copy of `ρ`.
    pub fn to_density_matrix(&self) -> Result<DMatrix<C64>> {
        match self {
            ExactState::Mixed { rho, .. } => Ok(rho.clone()),
            ExactState::Pure {
                n_atoms,
                amplitudes,
            } => {
                check_size(*n_atoms, true)?;
                let d = amplitudes.len();
                Ok(DMatrix::from_fn(d, d, |a, b| {
                    amplitudes[a] * amplitudes[b].conj()
                }))
            }
        }
    }

    /// Convex mixture `Σ w_i ρ_i`.
    pub fn mixture(components: &[(f64, ExactState)]) -> Result<ExactState> {
        let n_atoms = components
            .first()
            .ok_or_else(|| Error::domain("mixture", "no components"))?
            .1
            .n_atoms();
        check_size(n_atoms, true)?;
        let d = 1 << n_atoms;
        let mut rho = DMatrix::<C64>::zeros(d, d);
        let mut wsum = 0.0;
        for (w, s) in components {
            if s.n_atoms() != n_atoms {
                return Err(Error::domain("mixture", "components disagree on N"));
            }
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::domain("mixture weight", format!("{w} is negative")));
            }
            wsum += w;
            rho += s.to_density_matrix()? * C64::new(*w, 0.0);
        }
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::domain("mixture weights", format!("sum to {wsum}")));
        }
        Ok(ExactState::Mixed { n_atoms, rho })
    }

    /// Checks normalization (pure) or trace, Hermiticity and positivity
    /// (mixed).
    pub fn validate(&self) -> Result<()> {
        match self {
            ExactState::Pure { amplitudes, .. } => {
                let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::Numerical(format!("state norm² = {norm}")));
                }
            }
            ExactState::Mixed { rho, .. } => {
                let tr = rho.trace();
                if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
                    return Err(Error::Numerical(format!("trace = {tr}")));
                }
                let herm = (rho - rho.adjoint())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if herm > NORM_TOL {
                    return Err(Error::Numerical(format!("non-Hermitian by {herm:e}")));
                }
                let min_eig = rho
                    .clone()
                    .symmetric_eigenvalues()
                    .iter()
                    .fold(f64::INFINITY, |m, &e| m.min(e));
                if min_eig < -NORM_TOL {
                    return Err(Error::Numerical(format!("negative eigenvalue {min_eig:e}")));
                }
            }
        }
        Ok(())
    }

    /// Diagonal of the density matrix in the bit-string basis.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            ExactState::Pure { amplitudes, .. } => {
                amplitudes.iter().map(|a| a.norm_sqr()).collect()
            }
            ExactState::Mixed { rho, .. } => rho.diagonal().iter().map(|z| z.re).collect(),
        }
    }

    /// Probability that atom `j` is in `|s>`.
    pub fn excitation_probability(&self, j: usize) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .filter(|(b, _)| b >> j & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }
}

/// `σ⁻_j ψ`.
fn lower(amplitudes: &[C64], j: usize) -> Vec<C64> {
    let bit = 1usize << j;
    (0..amplitudes.len())
        .map(|b| {
            if b & bit == 0 {
                amplitudes[b | bit]
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// `C[(j', j)] = <σ⁺_{j'} σ⁻_j>`; the diagonal holds `<n_j>`.
pub fn correlation_matrix(state: &ExactState) -> DMatrix<C64> {
    let n = state.n_atoms();
    match state {
        ExactState::Pure { amplitudes, .. } => {
            let lowered: Vec<Vec<C64>> = (0..n).map(|j| lower(amplitudes, j)).collect();
            DMatrix::from_fn(n, n, |jp, j| {
                lowered[jp]
                    .iter()
                    .zip(&lowered[j])
                    .map(|(x, y)| x.conj() * y)
                    .sum()
            })
        }
        ExactState::Mixed { rho, .. } => {
            let d = rho.nrows();
            DMatrix::from_fn(n, n, |jp, j| {
                let (bj, bjp) = (1usize << j, 1usize << jp);
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..d {
                    if jp == j {
                        if c & bj != 0 {
                            acc += rho[(c, c)];
                        }
                    } else if c & bj != 0 && c & bjp == 0 {
                        // Tr(O ρ) = Σ_c ρ[c, O(c)] with O = σ⁺_{j'} σ⁻_j
                        acc += rho[(c, c - bj + bjp)];
                    }
                }
                acc
            })
        }
    }
}

fn real_part(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-10 * z.re.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "{what} has imaginary part {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `P = Σ_{j≠j'} <σ⁺_{j'} σ⁻_j>`.
pub fn pair_correlation_sum(state: &ExactState) -> Result<f64> {
    let c = correlation_matrix(state);
    let total: C64 = c.iter().sum::<C64>() - c.trace();
    real_part(total, "pair-correlation sum")
}

/// Mean and variance of the excitation number `N_s`.
pub fn ns_moments(state: &ExactState) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (b, p) in state.populations().into_iter().enumerate() {
        let k = b.count_ones() as f64;
        m1 += p * k;
        m2 += p * k * k;
    }
    (m1, m2 - m1 * m1)
}

fn check_positions(state: &ExactState, positions: &EnsemblePositions) -> Result<()> {
    if positions.len() != state.n_atoms() {
        return Err(Error::LengthMismatch {
            what: "atom positions",
            expected: state.n_atoms(),
            found: positions.len(),
        });
    }
    Ok(())
}

/// `I_c = Tr[J⁺(Δk) J⁻(Δk) ρ]` with `J⁻(Δk) = Σ_j e^{-iΔk·r_j} σ⁻_j`.
pub fn collective_intensity(
    state: &ExactState,
    positions: &EnsemblePositions,
    delta_k: Vector3<f64>,
) -> Result<f64> {
    check_positions(state, positions)?;
    let phases: Vec<C64> = positions
        .coordinates
        .iter()
        .map(|r| C64::from_polar(1.0, -delta_k.dot(r)))
        .collect();
    match state {
        ExactState::Pure { amplitudes, .. } => {
            // ‖J⁻ ψ‖²
            let mut out = vec![C64::new(0.0, 0.0); amplitudes.len()];
            for (j, u) in phases.iter().enumerate() {
                let bit = 1usize << j;
                for (b, o) in out.iter_mut().enumerate() {
                    if b & bit == 0 {
                        *o += u * amplitudes[b | bit];
                    }
                }
            }
            Ok(out.iter().map(|z| z.norm_sqr()).sum())
        }
        ExactState::Mixed { .. } => {
            let c = correlation_matrix(state);
            real_part(quadratic_form(&c, &phases), "collective intensity")
        }
    }
}

/// `u† C u`.
fn quadratic_form(c: &DMatrix<C64>, u: &[C64]) -> C64 {
    let n = u.len();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for jp in 0..n {
            acc += u[jp].conj() * c[(jp, j)] * u[j];
        }
    }
    acc
}

/// Emission-rate pattern `I_s(θ) I_c(θ, φ)` over a grid.
pub fn emission_rate_pattern(
    state: &ExactState,
    positions: &EnsemblePositions,
    grid: &KGrid,
    envelope: Envelope,
) -> Result<DiffractionImage> {
    check_positions(state, positions)?;
    let k0 = positions.k0;
    grid.check_propagating(k0)?;
    let c = correlation_matrix(state);
    let values = crate::par_map(grid.len(), |i| {
        let k = grid.point_at(i);
        let dk = delta_k(k, k0);
        let u: Vec<C64> = positions
            .coordinates
            .iter()
            .map(|r| C64::from_polar(1.0, -dk.dot(r)))
            .collect();
        (quadratic_form(&c, &u), envelope.factor(polar_angle(k, k0)))
    });
    let mut out = Vec::with_capacity(values.len());
    for (z, env) in values {
        out.push(real_part(z, "collective intensity")? * env);
    }
    Ok(DiffractionImage {
        grid: *grid,
        data: ImageData::Intensity(out),
        mode: ImageMode::FixedPositions,
        n_atoms: state.n_atoms(),
        k0,
        theta_b: positions.boundary_angle(),
        clipped_pixels: 0,
    })
}

/// Integrator settings for [`lindblad_independent_decay_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladOptions {
    /// Largest RK4 step in units of `1/(N Γ)`.
    pub step_fraction: f64,
    /// Allowed drift of `Tr ρ` from 1.
    pub trace_tolerance: f64,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self {
            step_fraction: 0.05,
            trace_tolerance: 1e-8,
        }
    }
}

/// Density matrices at `times` under `dρ/dt = Γ Σ_j D[σ⁻_j] ρ`.
pub fn lindblad_independent_decay(
    initial: &ExactState,
    gamma_rate: f64,
    times: &[f64],
) -> Result<Vec<ExactState>> {
    lindblad_independent_decay_with(initial, gamma_rate, times, &LindbladOptions::default())
}

pub fn lindblad_independent_decay_with(
    initial: &ExactState,
    gamma_rate: f64,
    times: &[f64],
    options: &LindbladOptions,
) -> Result<Vec<ExactState>> {
    let n = initial.n_atoms();
    check_size(n, true)?;
    if !(gamma_rate > 0.0 && gamma_rate.is_finite()) {
        return Err(Error::domain(
            "decay rate",
            format!("{gamma_rate} must be positive"),
        ));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::domain("times", "must be >= 0 and sorted ascending"));
    }
    let rho0 = initial.to_density_matrix()?;
    let d = rho0.nrows();
    let mut rho: Vec<C64> = rho0.as_slice().to_vec();
    let h_max = options.step_fraction / (gamma_rate * n as f64);
    let mut rk = Rk4Scratch::new(d * d);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                rk.step(&mut rho, h, |x, y| decay_generator(x, y, d, n, gamma_rate));
            }
            t = target;
        }
        let tr: C64 = (0..d).map(|a| rho[a * d + a]).sum();
        if (tr.re - 1.0).abs() > options.trace_tolerance {
            return Err(Error::Integration(format!(
                "trace drifted to {} at t = {t:e}; reduce step_fraction (now {})",
                tr.re, options.step_fraction
            )));
        }
        out.push(ExactState::Mixed {
            n_atoms: n,
            rho: DMatrix::from_column_slice(d, d, &rho),
        });
    }
    Ok(out)
}

/// Independent-decay generator on a column-major `d × d` matrix:
/// `ρ̇_ab = Γ [Σ_{j: a_j=b_j=0} ρ_{a+2^j, b+2^j} - (n_a + n_b)/2 ρ_ab]`.
fn decay_generator(rho: &[C64], out: &mut [C64], d: usize, n: usize, gamma: f64) {
    let mask = d - 1;
    for b in 0..d {
        for a in 0..d {
            let mut acc = rho[b * d + a] * (-0.5 * (a.count_ones() + b.count_ones()) as f64);
            let free = !(a | b) & mask;
            for j in 0..n {
                let bit = 1usize << j;
                if free & bit != 0 {
                    acc += rho[(b | bit) * d + (a | bit)];
                }
            }
            out[b * d + a] = acc * gamma;
        }
    }
}

struct Rk4Scratch {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Scratch {
    fn new(len: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); len];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, y: &mut [C64], h: f64, f: impl Fn(&[C64], &mut [C64])) {
        f(y, &mut self.k1);
        for ((t, &a), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = a + k * (h / 2.0);
        }
        f(&self.tmp, &mut self.k2);
        for ((t, &a), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = a + k * (h / 2.0);
        }
        f(&self.tmp, &mut self.k3);
        for ((t, &a), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = a + k * h;
        }
        f(&self.tmp, &mut self.k4);
        for (i, a) in y.iter_mut().enumerate() {
            *a += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * (h / 6.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::{sample_positions, Geometry};
    use approx::assert_abs_diff_eq;

    const K0: f64 = 8.055e6;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn product_state_examples() {
        let s = build_product_state(2, ProductSpec::Shared(Qubit::GROUND)).unwrap();
        let ExactState::Pure { amplitudes, .. } = &s else {
            panic!()
        };
        assert_eq!(amplitudes, &vec![c(1.0), c(0.0), c(0.0), c(0.0)]);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = build_product_state(3, ProductSpec::Shared(Qubit::new(c(h), c(h)))).unwrap();
        let ExactState::Pure { amplitudes, .. } = &s else {
            panic!()
        };
        for a in amplitudes {
            assert_abs_diff_eq!(a.re, 2f64.powf(-1.5), epsilon = 1e-15);
        }

        let s = build_product_state(1, ProductSpec::PerAtom(&[Qubit::EXCITED])).unwrap();
        let ExactState::Pure { amplitudes, .. } = &s else {
            panic!()
        };
        assert_eq!(amplitudes, &vec![c(0.0), c(1.0)]);

        assert!(build_product_state(2, ProductSpec::Shared(Qubit::new(c(1.0), c(1.0)))).is_err());
        assert!(build_product_state(2, ProductSpec::PerAtom(&[Qubit::GROUND])).is_err());
        assert!(build_product_state(15, ProductSpec::Shared(Qubit::GROUND)).is_err());
    }

    #[test]
    fn dicke_examples() {
        let s = build_symmetric_dicke(2, 1).unwrap();
        let ExactState::Pure { amplitudes, .. } = &s else {
            panic!()
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(amplitudes[1].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(amplitudes[2].re, h, epsilon = 1e-15);

        let s = build_symmetric_dicke(4, 2).unwrap();
        assert_abs_diff_eq!(pair_correlation_sum(&s).unwrap(), 4.0, epsilon = 1e-12);

        let s = build_symmetric_dicke(3, 0).unwrap();
        assert_eq!(s.populations()[0], 1.0);
        assert!(build_symmetric_dicke(3, 4).is_err());
    }

    #[test]
    fn pair_sums_by_hand() {
        assert_abs_diff_eq!(
            pair_correlation_sum(&singlet()).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        let ground = build_product_state(5, ProductSpec::Shared(Qubit::GROUND)).unwrap();
        assert_eq!(pair_correlation_sum(&ground).unwrap(), 0.0);
        let triplet = build_symmetric_dicke(2, 1).unwrap();
        assert_abs_diff_eq!(
            pair_correlation_sum(&triplet).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        // mixed and pure paths agree
        let mixed = ExactState::mixture(&[(1.0, singlet())]).unwrap();
        assert_abs_diff_eq!(pair_correlation_sum(&mixed).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn moments() {
        let ss = build_product_state(2, ProductSpec::Shared(Qubit::EXCITED)).unwrap();
        assert_eq!(ns_moments(&ss), (2.0, 0.0));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let ghz = ExactState::Pure {
            n_atoms: 2,
            amplitudes: vec![c(h), c(0.0), c(0.0), c(h)],
        };
        let (m, v) = ns_moments(&ghz);
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);

        let coh = build_product_state(4, ProductSpec::Shared(Qubit::new(c(h), c(h)))).unwrap();
        let (m, v) = ns_moments(&coh);
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn intensity_examples() {
        let p = sample_positions(Geometry::Gaussian2d { fwhm: 5e-6 }, 4, K0, 1).unwrap();
        let w = build_symmetric_dicke(4, 1).unwrap();
        assert_abs_diff_eq!(
            collective_intensity(&w, &p, Vector3::zeros()).unwrap(),
            4.0,
            epsilon = 1e-12
        );

        let ground = build_product_state(4, ProductSpec::Shared(Qubit::GROUND)).unwrap();
        let dk = Vector3::new(1.0e6, 2.0e5, 0.0);
        assert_eq!(collective_intensity(&ground, &p, dk).unwrap(), 0.0);

        let states = [
            build_symmetric_dicke(4, 2).unwrap(),
            build_product_state(
                4,
                ProductSpec::PerAtom(&[
                    Qubit::from_bloch(BlochAngles::new(0.3, 0.1)),
                    Qubit::from_bloch(BlochAngles::new(1.3, -2.0)),
                    Qubit::from_bloch(BlochAngles::new(2.2, 0.7)),
                    Qubit::from_bloch(BlochAngles::new(0.9, 1.9)),
                ]),
            )
            .unwrap(),
        ];
        for s in &states {
            let (m, _) = ns_moments(s);
            let p_sum = pair_correlation_sum(s).unwrap();
            assert_abs_diff_eq!(
                collective_intensity(s, &p, Vector3::zeros()).unwrap(),
                m + p_sum,
                epsilon = 1e-12
            );
            // pure and density-matrix routes agree away from Δk = 0
            let mixed = ExactState::mixture(&[(1.0, s.clone())]).unwrap();
            assert_abs_diff_eq!(
                collective_intensity(s, &p, dk).unwrap(),
                collective_intensity(&mixed, &p, dk).unwrap(),
                epsilon = 1e-12
            );
        }

        let short = sample_positions(Geometry::Gaussian2d { fwhm: 5e-6 }, 3, K0, 1).unwrap();
        assert!(collective_intensity(&w, &short, dk).is_err());
    }

    #[test]
    fn tensor_with_singlet_lowers_total_spin() {
        // singlet ⊗ |D(2, 1)> has J = 1, M = 0 on four atoms: P = 1·2 - 0 - 2 = 0
        let s = singlet()
            .tensor(&build_symmetric_dicke(2, 1).unwrap())
            .unwrap();
        assert_eq!(s.n_atoms(), 4);
        s.validate().unwrap();
        assert_abs_diff_eq!(pair_correlation_sum(&s).unwrap(), 0.0, epsilon = 1e-14);
        let (m, v) = ns_moments(&s);
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mixture_density_matrix_is_valid() {
        let a = build_symmetric_dicke(3, 1).unwrap();
        let b = build_product_state(
            3,
            ProductSpec::Shared(Qubit::from_bloch(BlochAngles::new(1.0, 0.5))),
        )
        .unwrap();
        let m = ExactState::mixture(&[(0.25, a), (0.75, b)]).unwrap();
        m.validate().unwrap();
        assert!(ExactState::mixture(&[(0.5, singlet())]).is_err());
    }

    #[test]
    fn single_spin_decay() {
        let s = build_product_state(1, ProductSpec::Shared(Qubit::EXCITED)).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let traj = lindblad_independent_decay(&s, 1.0, &times).unwrap();
        for (t, r) in times.iter().zip(&traj) {
            assert!((r.populations()[1] - (-t).exp()).abs() < 1e-6);
            r.validate().unwrap();
        }
    }

    #[test]
    fn slow_decay_leaves_state_unchanged() {
        let s = build_symmetric_dicke(3, 2).unwrap();
        let rho0 = s.to_density_matrix().unwrap();
        let traj = lindblad_independent_decay(&s, 1e-12, &[0.0, 1.0, 2.0]).unwrap();
        for r in traj {
            let ExactState::Mixed { rho, .. } = r else {
                panic!()
            };
            assert!((rho - &rho0).iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn decay_matches_amplitude_damping_channel() {
        // Independent decay is a product of single-spin channels; for a
        // product input the output stays a product of damped qubits.
        let q = Qubit::from_bloch(BlochAngles::new(2.0, 0.8));
        let s = build_product_state(3, ProductSpec::Shared(q)).unwrap();
        let t = 0.7;
        let traj = lindblad_independent_decay(&s, 1.3, &[t]).unwrap();
        let e = (-1.3 * t).exp();
        let one = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(q.g.norm_sqr() + (1.0 - e) * q.s.norm_sqr()),
                q.g * q.s.conj() * e.sqrt(),
                q.s * q.g.conj() * e.sqrt(),
                c(e * q.s.norm_sqr()),
            ],
        );
        let expect = one.kronecker(&one).kronecker(&one);
        let ExactState::Mixed { rho, .. } = &traj[0] else {
            panic!()
        };
        assert!((rho - expect).iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn lindblad_input_checks() {
        let s = singlet();
        assert!(lindblad_independent_decay(&s, 0.0, &[1.0]).is_err());
        assert!(lindblad_independent_decay(&s, 1.0, &[1.0, 0.5]).is_err());
        let big = build_product_state(11, ProductSpec::Shared(Qubit::GROUND)).unwrap();
        assert!(lindblad_independent_decay(&big, 1.0, &[1.0]).is_err());
    }
}
