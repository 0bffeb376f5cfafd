//! Recursive compressed sensing of a data stream.
//!
//! A window of length `n` slides over the stream in steps of `tau`. Each
//! window is measured with a cyclically rotated copy of one `m x n` matrix,
//! which lets the measurement be updated in `O(m tau)`. Every window is
//! decoded with a warm-started LASSO; entries that enough windows agree on are
//! refit by least squares and the refits are averaged across windows.

pub mod decoder;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod numkernel;
pub mod sensing;
pub mod signal;
pub mod solvers;

pub use decoder::{Detector, Emission, Mode, RcsConfig, RcsDecoder, TailPolicy, VoteLedger};
pub use encoder::{encode_first, EncoderState, NoiseModel};
pub use error::{Error, Result};
pub use numkernel::{DenseMatrix, DenseVector, LinearOperator};
pub use sensing::{Ensemble, PermutationOffset, SensingMatrix};
pub use signal::{gen_stream, SparseStream, StreamConfig};
pub use solvers::{fista, FistaOptions, LassoProblem, SolverReport};
