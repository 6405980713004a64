//! Synthetic multistatic scattering in a PEC rectangular waveguide and
//! qualitative reconstruction of penetrable obstacles by sampling methods.
//!
//! The library covers the full loop:
//!
//! * [`spectra`] — scalar cross-section eigenpairs (Neumann / Dirichlet
//!   cosine and sine families), axial constants and propagating-mode counts;
//! * [`modes`] — transverse-electric and transverse-magnetic vector modes,
//!   trace coefficients, modal trace norms and the diagonal
//!   Dirichlet-to-Neumann map of the blocked half-guide;
//! * [`greens`] — the modal electric dyadic Green's function of the guide,
//!   its free-space counterpart, and near-plane evaluation helpers;
//! * [`scatterer`] — sphere-union geometry and voxelisation;
//! * [`forward`] — a volume-integral (collocation) forward solver, Born
//!   approximation, transducer arrays, multistatic data synthesis, the
//!   seeded multiplicative noise model and the NFM v1 data file;
//! * [`lsm`] — near-field matrix assembly, truncated-SVD / Tikhonov /
//!   descent-based regularised solvers, indicator scans and exports;
//! * [`cli`] — plain-text run configuration and the `simulate` / `invert` /
//!   `pipeline` entry points used by the `wglsm` binary.
//!
//! Everything is deterministic: identical configuration and seed produce
//! byte-identical output files regardless of thread count.

pub mod cli;
pub mod forward;
pub mod greens;
pub mod linalg;
pub mod lsm;
pub mod modes;
pub mod quad;
pub mod scatterer;
pub mod spectra;

use num_complex::Complex64;

/// Spatial point or direction in guide coordinates (x1, x2, x3).
pub type Point = [f64; 3];

/// Complex 3-vector (field value at a point).
pub type CVec3 = [Complex64; 3];

/// Complex 3x3 dyadic (matrix acting on polarisation vectors).
pub type Dyadic = [[Complex64; 3]; 3];

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or operation received an out-of-domain argument.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The wavenumber is within the cut-off tolerance of a mode eigenvalue,
    /// where axial constants vanish and modal coefficients blow up.
    #[error("mode ({m},{n}) of the {family} family is within the cut-off tolerance of k = {k}")]
    AtCutoff {
        m: u32,
        n: u32,
        family: &'static str,
        k: f64,
    },

    /// Modal evaluation requested below the axial separation floor.
    #[error("axial separation {sep:.6e} is below the evaluation floor {floor:.6e}")]
    SeparationBelowFloor { sep: f64, floor: f64 },

    /// Run-configuration problem (bad key, bad value, inconsistent block).
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    /// Data file does not parse or fails its header contract.
    #[error("malformed data file, line {line}: {message}")]
    MalformedFile { line: usize, message: String },

    /// Loaded data disagrees with the active configuration.
    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),

    /// A numeric routine failed (singular system, non-convergence,
    /// degenerate indicator field).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration/input problems,
    /// 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
