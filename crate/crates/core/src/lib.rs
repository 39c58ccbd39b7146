//! Far-field Stokes-photon diffraction from cold atomic spin ensembles.
//!
//! * [`spin_states`]: sufficient statistics `(N, <N_s>, ΔN_s², P)` of
//!   permutation-symmetric spin states.
//! * [`exact_oracle`]: brute-force state vectors and density matrices for
//!   a handful of spins, including Lindblad evolution under independent
//!   decay.
//! * [`diffraction`]: position sampling, pattern synthesis, ratio
//!   extraction and photon counting.
//! * [`witness`]: pair-correlation sum rules for entanglement detection.
//! * [`metrology`]: field-gradient vectometry and thermometry.

pub mod diffraction;
pub mod error;
pub mod exact_oracle;
pub mod export;
pub mod metrology;
pub mod rng;
pub mod spin_states;
pub mod witness;

pub use error::{Error, ErrorCategory, Result};
pub use spin_states::{HalfInt, StateSummary};

/// `f(0), …, f(n-1)` in index order, in parallel when enabled.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
