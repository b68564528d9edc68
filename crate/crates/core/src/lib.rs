//! Chrestenson-function spread-spectrum toolkit.
//!
//! The crate covers exact p-adic digit arithmetic ([`padic`]), the discrete
//! Chrestenson transform ([`chrestenson`]), temporal chip spreading with
//! robust recovery ([`temporal`]), code-division spreading with Walsh,
//! Chrestenson-row and m-sequence codes ([`spatial`]), impulsive and Gaussian
//! channel impairments ([`channel`]), spectral measurements ([`analysis`]),
//! and the file formats and experiment pipeline behind the `chspread` tool
//! ([`io`], [`pipeline`]).

pub mod analysis;
pub mod channel;
pub mod chrestenson;
pub mod error;
pub mod io;
pub mod padic;
pub mod pipeline;
pub mod signal;
pub mod spatial;
pub mod temporal;

pub use error::{Error, ErrorClass, Result};
pub use padic::{PFraction, Radix};
pub use signal::Signal;
