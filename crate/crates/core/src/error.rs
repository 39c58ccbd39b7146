use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("invalid {what}: {reason}")]
    Domain { what: &'static str, reason: String },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// The requested system is too large for dense brute-force evaluation.
    #[error("{n_atoms} atoms exceeds the exact-oracle cap of {cap} for {representation} states")]
    TooLarge {
        n_atoms: usize,
        cap: usize,
        representation: &'static str,
    },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("peak fit failed: {0}")]
    Fit(String),

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("insufficient counts: {found} photons, at least {required} required")]
    InsufficientCounts { found: u64, required: u64 },

    /// Atom number above the dilute bound N <= k0 A.
    #[error("N = {n_atoms} exceeds the dilute bound k0*A = {bound:.1}; multiple scattering is no longer perturbative")]
    NotDilute { n_atoms: usize, bound: f64 },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Domain,
    Numerical,
    Io,
}

impl Error {
    pub(crate) fn domain(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            what,
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain { .. }
            | Error::LengthMismatch { .. }
            | Error::TooLarge { .. }
            | Error::NotDilute { .. }
            | Error::InsufficientCounts { .. }
            | Error::DegenerateImage(_) => ErrorCategory::Domain,
            Error::Integration(_) | Error::Fit(_) | Error::Numerical(_) => ErrorCategory::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
