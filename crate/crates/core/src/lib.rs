//! Compressed-sensing gradient compression for distributed SGD.
//!
//! Devices compress their stochastic gradients with a fixed subsampled
//! orthogonal sensing matrix ([`sensing`]), the server recovers a sparse update
//! with fast iterative hard thresholding ([`fiht`]) and keeps the compression
//! residue as error feedback ([`fedopt`]). A count-sketch compressor
//! ([`sketch`]) serves as the baseline, and [`synth`] provides the synthetic
//! quadratic test problem used by the experiments in [`experiment`].
//!
//! The `book/` directory at the repository root walks through the concepts;
//! its code listings are compiled and run as doctests of this crate.

pub mod error;
pub mod experiment;
pub mod fedopt;
pub mod fiht;
pub mod rng;
pub mod sensing;
pub mod signal;
pub mod sketch;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
pub use fiht::{fiht, reconstruct, FihtParams, FihtResult, StopReason};
pub use sensing::{Measurement, SensingMatrix};
pub use signal::{best_k, principal_support, project, sparsity_level, DenseSignal, IndexSet, SparseSignal};
pub use transform::{dct_reference, fwht, pad_to_pow2, truncate, BaseTransformKind};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/sensing.md")]
    mod sensing {}
    #[doc = include_str!("../../../book/src/fiht.md")]
    mod fiht {}
    #[doc = include_str!("../../../book/src/sketch.md")]
    mod sketch {}
    #[doc = include_str!("../../../book/src/error_feedback.md")]
    mod error_feedback {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
