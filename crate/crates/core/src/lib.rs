//! Prevalence-aware optimal classification of two-channel assay data.
//!
//! The crate covers the whole path from raw assay CSV files to labels and
//! prevalence estimates:
//!
//! * [`ingest`] parses measurements and maps them into log space;
//! * [`density`] models positive and negative populations there;
//! * [`classifier`] builds the loss-minimizing binary and ternary rules;
//! * [`prevalence`] estimates prevalence from unlabeled samples and runs the
//!   adaptive classify/estimate loop;
//! * [`harness`] holds the seeded Monte Carlo and optimality experiments;
//! * [`cli`] wires everything into the `seroclass` binary.

// guards are written `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod cli;
pub mod density;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod harness;
pub mod ingest;
pub mod prevalence;
pub mod quadrature;
pub mod simplex;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{DomainSpec, LogPoint};
pub use quadrature::{QuadratureScheme, QuadratureSpec};
