//! Quantum Max Cut via the level-2 quantum Lasserre relaxation.

pub mod certify;
pub mod cli;
pub mod error;
pub mod exact;
pub mod graph;
pub mod moment;
pub mod pauli;
pub mod product;
pub mod rounding;
pub mod sdp;

pub use error::{QmcError, Result};
