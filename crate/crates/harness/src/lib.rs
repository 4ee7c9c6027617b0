//! Sweep harness: configuration, cached per-cell runs, verification and
//! export.

pub mod cell;
pub mod config;
pub mod error;
pub mod export;
pub mod record;
pub mod selftest;
pub mod sweep;
pub mod verify;

pub use error::{HarnessError, Result};
