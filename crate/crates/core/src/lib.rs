//! Reduced-order modeling of time-dependent fields by optimal-transport
//! displacement interpolation.
//!
//! A handful of checkpoint snapshots is connected by entropic transport plans
//! ([`transport`]); intermediate states are McCann interpolants of those plans
//! ([`interpolation`]). A time-to-interpolation-parameter mapping ([`rom`])
//! turns the interpolants into a continuous-time surrogate, optionally
//! corrected by a POD basis of the training residuals ([`pod`]) with one
//! Gaussian process per coefficient ([`gpr`]). [`fomgen`] produces reference
//! trajectories, [`io`] persists them and trained models, and [`cli`] drives
//! the whole pipeline from a TOML run config ([`config`]).

// Negated float comparisons deliberately treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod fomgen;
pub mod gpr;
pub mod interpolation;
pub mod io;
pub mod measure;
pub mod pod;
pub mod rom;
pub mod transport;
