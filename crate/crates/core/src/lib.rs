//! Out-of-core storage and shuffled minibatch loading for observation-by-feature
//! matrices.
//!
//! The pipeline has three stages:
//!
//! 1. [`store`]: write rows into a chunked, sharded on-disk format (dense or CSR).
//! 2. [`preshuffle`]: merge one or more stores into a single store whose rows are
//!    shuffled, using bounded memory and randomized contiguous block reads.
//! 3. [`loader`]: stream minibatches by fetching randomly ordered contiguous
//!    blocks and mixing them in an in-memory shuffle buffer.
//!
//! [`metrics`] measures throughput and randomness; [`cli`] wires everything
//! into the `obsbatch` command.

pub mod rng;
pub mod store;
pub mod preshuffle;
pub mod loader;
pub mod metrics;
pub mod cli;
