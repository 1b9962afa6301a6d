//! Finite-dimensional quantum measurement toolkit.
//!
//! The operator side (states, effects, channels, instruments) lives in
//! [`linalg`] and [`channels`]; recorded outcomes are plain labelled counts
//! in [`records`]. Between them sit the detector-induced POVM construction,
//! the qubit-pointer sharpness model ([`pointer`]), trace-rule utilities
//! ([`born`]), joint-measurability and joint-instrument feasibility
//! ([`compat`]) and detector tomography ([`tomography`]).

pub mod born;
pub mod channels;
pub mod compat;
pub mod error;
pub mod linalg;
pub mod pointer;
pub mod records;
pub mod tomography;

pub use error::{Error, Result};
