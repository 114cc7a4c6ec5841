//! # qcapacity
//!
//! Numerical toolkit for finite-dimensional quantum channels viewed as
//! wiretap channels: the legitimate receiver holds the channel output `B`,
//! the eavesdropper holds the environment `E` of a Stinespring dilation.
//!
//! - [`qmat`]: dense complex matrices, Hermitian eigensolver, partial traces.
//! - [`channels`]: Kraus channels, dilations, complements, Choi matrices, a gallery.
//! - [`entropic`]: entropies, relative entropy, coherent / private information.
//! - [`optimize`]: single-letter maximizers `Q1`, `Cp1` and the n=1 class probes.
//! - [`orderings`]: degradability checks and the combined class report.
//! - [`cli`]: the command-line surface.
//!
//! All information quantities are in bits.

#![forbid(unsafe_code)]

pub mod channels;
pub mod cli;
pub mod entropic;
pub mod optimize;
pub mod orderings;
pub mod qmat;
pub mod rng;

pub use channels::{gallery, GalleryId, KrausChannel, StinespringIsometry};
pub use entropic::{Ensemble, Gap, InfoValue};
pub use optimize::{OptConfig, OptResult, Verdict, Witness};
pub use orderings::{classify, ClassReport};
pub use qmat::{CMatrix, DensityMatrix, C64};

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("Kraus operators are not trace preserving (residual {0:.3e})")]
    NotTracePreserving(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown channel: {0}")]
    UnknownChannel(String),

    #[error("state is not full rank (min eigenvalue {0:.3e})")]
    NotFullRank(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("indeterminate value: {0}")]
    Indeterminate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
