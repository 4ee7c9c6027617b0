//! Radial nodal solutions of Hénon-type problems `-Δu = |x|^α f(u)` in the
//! unit ball, the spectra of their linearizations after the change of
//! variables `t = r^{(2+α)/2}`, and Morse index assembly.

pub mod bessel;
pub mod error;
pub mod io;
pub mod morse;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod ode;
pub mod problem;
pub mod profile;
pub mod radial;
pub mod spectrum;

pub use error::{Error, Result};
