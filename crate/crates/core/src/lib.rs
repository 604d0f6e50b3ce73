//! Code-length objectives for layered Markov sources.
//!
//! The joint state of every layer of an unsupervised network is treated as a
//! Markov chain: the bottom-up recognition transitions form the source and the
//! top-down generative transitions form the model. The objective is the
//! average number of bits needed to code that joint state. Specialising the
//! model to Gaussians gives soft vector quantisers and VQ ladders; routing the
//! posterior through a higher layer gives topographic maps; tree-structured
//! deterministic sources give the summed cluster mutual information of ACE
//! networks; and averaging patch-restricted posteriors gives factorial (PMD)
//! encoders.
//!
//! Every identity the framework relies on is exposed as a checkable function
//! and exercised by the [`verify`] suite.

pub mod ace;
pub mod chain;
pub mod error;
pub mod helmholtz;
pub mod ladder;
pub mod par;
pub mod pmd;
pub mod prob;
pub mod synth;
pub mod topo;
pub mod verify;
pub mod vq;

pub use error::{Error, Result};
pub use prob::{ProbVector, TransitionMatrix, Unit};
