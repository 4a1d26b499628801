//! Semi-streaming graph optimization built on a low-space box-simplex solver.
//!
//! Inputs are replayable streams of edges or matrix rows. Every pipeline reads
//! them in sequential passes and keeps only `O(n)` words of working state,
//! which is measured by a [`stream::ResourceMeter`].
//!
//! The crate is organised bottom up:
//!
//! - [`stream`]: stream sources, text formats and the pass/space meter.
//! - [`boxsimplex`]: the mirror-prox solver with implicit simplex iterates.
//! - [`linkcut`]: link/cut forests and streaming cycle cancelling.
//! - [`matching`]: approximate and exact maximum cardinality matching.
//! - [`weighted`]: weighted matching, optimal transport and maximum weight matching.
//! - [`transshipment`]: approximate transshipment and shortest paths.
//! - [`sampling`]: randomized sparsification of simplex solutions.
//! - [`oracles`]: exact dense baselines used for verification.
//! - [`cli`]: the command line frontend.

pub mod boxsimplex;
pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod linkcut;
pub mod matching;
pub mod oracles;
pub mod sampling;
pub mod stream;
pub mod transshipment;
pub mod weighted;

pub use config::Config;
pub use error::{Error, Result};
pub use flow::SparseFlow;
pub use stream::{ResourceMeter, StreamSource};
