//! Mixed-state projected ensembles (MSPE) of (1+1)d circuits with lossy
//! measurements, together with the symmetric-group predictions they are
//! compared against.
//!
//! Module layout, bottom to top:
//!
//! - [`linalg`]: dense complex matrices, partial traces, Hermitian
//!   eigendecomposition, Schatten norms.
//! - [`rng`]: per-position seed streams.
//! - [`circuits`]: initial states, gate families and brick-wall evolution.
//! - [`mspe`]: measurement partitions, ensemble construction and moments.
//! - [`permengine`]: replica calculus over S_k.
//! - [`ensembles`]: Monte-Carlo reference ensembles and spectra.
//! - [`metrics`]: moment distances and entropies.
//!
//! Site 0 is the leftmost qudit and the most significant digit of every
//! composite index.

pub mod circuits;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mspe;
pub mod permengine;
pub mod rng;

pub use error::{MspeError, Result};
pub use linalg::{ComplexMatrix, PureState, QuditLayout, C64};

/// Largest moment/operator dimension built densely unless a caller raises it.
pub const DEFAULT_DENSE_BUDGET: usize = 4096;
