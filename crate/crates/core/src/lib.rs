//! Pairwise learnability testing for surface-height regions.
//!
//! Two regions are treated as sharing a practice when a classifier cannot
//! learn to tell their patches apart better than a coin would. Verdicts
//! over all region pairs form a graph whose communities, and their
//! modularity, describe how heterogeneous the practice is.
//!
//! Module map:
//!
//! - [`heightmap`]: loading, detrending, regions, octagon patches
//! - [`rad`]: exact random-assignment distribution and thresholds
//! - [`discriminator`]: per-fold maximum validation accuracies
//! - [`decision`]: Same/Different rule
//! - [`network`]: practice graph, pruning, Louvain, degree metrics
//! - [`baselines`]: roughness baseline, Wilcoxon test, classification metrics
//! - [`synth`]: synthetic paintings for end-to-end validation
//! - [`pipeline`]: staged, resumable run directory

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod decision;
pub mod discriminator;
pub mod error;
pub mod heightmap;
pub mod network;
pub mod numeric;
pub mod par;
pub mod pipeline;
pub mod rad;
pub mod report;
pub mod seed;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use par::Exec;
