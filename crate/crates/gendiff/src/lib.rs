//! Characteristics, classification and simulation of one-dimensional
//! general diffusions.
//!
//! A regular diffusion on an interval is determined by a strictly
//! increasing continuous scale function and a locally finite, strictly
//! positive speed measure, together with its boundary behavior. This crate
//! models such characteristics, decides whether the associated
//! semimartingale has the representation property with respect to its
//! Brownian-integral part, and simulates paths through a speed-measure
//! Markov chain approximation with statistical checks against closed-form
//! expectations.

// Negated float comparisons such as `!(a < b)` are the NaN-rejecting form
// of the guards in this crate; rewriting them through `partial_cmp` would
// silently accept NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod error;
pub mod gallery;
pub mod quad;
pub mod rp;
pub mod simulate;
pub mod specfile;
pub mod verify;

pub use error::{Error, Result};
