//! Error type shared by every module of the core crate.

use alloc::string::String;
use core::fmt;

/// Errors produced by core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A shape is empty, inconsistent with its data length, or has the wrong rank.
    InvalidShape(String),
    /// A numeric parameter is outside its documented domain.
    InvalidParam(String),
    /// A tensor contains NaN or infinite entries.
    NonFinite(String),
    /// A permutation argument is not a bijection on the index range.
    InvalidPermutation(String),
    /// Training produced a non-finite parameter; the epoch index is 0-based.
    Diverged { epoch: usize },
    /// Input data is malformed (bad label, bad cell, impossible split, ...).
    InvalidData(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidShape(msg) => write!(f, "invalid shape: {msg}"),
            Error::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::InvalidPermutation(msg) => write!(f, "invalid permutation: {msg}"),
            Error::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
