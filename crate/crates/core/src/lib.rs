//! Cluster-guided keyword query expansion.
//!
//! Given a conjunctive keyword query, this crate clusters its result set
//! and derives, for each cluster, an expanded query whose results match
//! the cluster as closely as possible under weighted precision, recall,
//! and F-measure. Two refinement strategies do the heavy lifting:
//! greedy single-keyword refinement driven by benefit/cost ratios, and
//! randomized partial-elimination convergence over a percentage grid.
//! Word-scoring baselines, an exhaustive small-instance optimizer, and
//! an end-to-end pipeline with timing harnesses round out the crate.

pub mod baselines;
pub mod bitset;
pub mod cluster;
pub mod corpus;
pub mod error;
pub mod instance;
pub mod iskr;
pub mod metrics;
pub mod oracle;
pub mod pebc;
pub mod pipeline;
pub mod synth;
pub mod universe;

pub use bitset::ResultSet;
pub use corpus::{Document, Keyword, Query};
pub use error::{Error, Result};
pub use universe::{Ranking, ResultUniverse};
