//! Federated learning simulation with Byzantine-robust aggregation.
//!
//! The crate is `no_std` + `alloc`; the default `std` feature only switches the
//! matrix kernels to runtime CPU feature detection. Everything here is pure
//! computation: file formats, configuration files and the command-line runner
//! live in the `fedrad` companion crate.
//!
//! Layout:
//!
//! - [`nn`]: dense matrices, the MLP classifier, losses and SGD.
//! - [`data`]: datasets, IID / Dirichlet partitioning, server distillation sets.
//! - [`attacks`]: faulty (parameter noise) and malicious (label flip) clients.
//! - [`scoring`]: median-owner counting and score normalization.
//! - [`distill`]: mean / median logit pseudolabels and student distillation.
//! - [`aggregate`]: FedAvg, COMED, Multi-Krum, FedDF, FedDFmed, FedRAD, FedRADnoise.
//! - [`sim`]: the round loop, multi-seed runs and Welch's t-test.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod aggregate;
pub mod attacks;
pub mod data;
pub mod distill;
mod error;
pub mod nn;
pub mod rng;
pub mod scoring;
pub mod sim;
mod stats;

pub use error::{Error, Result};
pub use stats::{mean_and_std, student_t_cdf, welch_t_test, WelchResult};
