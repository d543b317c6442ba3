//! Exact-diagonalization laboratory for adiabatic dynamics and transport in
//! finite fermion lattices.
//!
//! The crate builds periodic lattice geometries with decaying interaction
//! weights ([`lattice`]), fermionic Fock sectors with exact sign bookkeeping
//! ([`fock`]), local interactions and their twisted/current variants
//! ([`interaction`]), spectral decompositions with gap tracking and the
//! inverse Liouvillian ([`spectral`]), the parallel-transport and
//! superadiabatic generators to second order ([`adiabatic`]), exactly unitary
//! propagators ([`propagate`]), current/Hall response formulas and Chern
//! numbers over twist tori ([`response`]), and quantitative locality checks
//! ([`bounds`]).
//!
//! All numerics are dense complex `f64`; sector dimensions stay small enough
//! (hundreds) that full eigendecompositions dominate the cost everywhere.

pub mod adiabatic;
pub mod bounds;
pub mod fock;
pub mod interaction;
pub mod lattice;
pub mod linalg;
pub mod propagate;
pub mod response;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMat = ndarray::Array2<C64>;
/// Dense complex vector.
pub type CVec = ndarray::Array1<C64>;

/// Crate-wide error type. Numerical failures carry enough context to be
/// reported against the run that produced them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The spectral gap required by a computation closed (or never opened).
    #[error("gap closed{}: gap {gap:.6e} below threshold {min:.6e}", fmt_time(.t))]
    GapClosed {
        t: Option<f64>,
        gap: f64,
        min: f64,
        spectrum: Vec<f64>,
    },
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    /// Finite-difference step in a twist angle hit a singular overlap.
    #[error("twist step error: {0}")]
    TwistStep(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn fmt_time(t: &Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t={t}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a time coordinate to a gap-closed error raised inside a
    /// time-indexed computation.
    pub fn at_time(self, time: f64) -> Self {
        match self {
            Error::GapClosed {
                t: None,
                gap,
                min,
                spectrum,
            } => Error::GapClosed {
                t: Some(time),
                gap,
                min,
                spectrum,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
