//! Cyclostationary feature detection of AM signals in noise, with detection
//! thresholds taken from a generalised extreme value (GEV) model of the
//! noise-only α-profile.

pub mod detector;
pub mod error;
pub mod gev;
pub mod harness;
pub mod io;
pub mod scd;
pub mod seed;
pub mod siggen;

pub use error::{Error, ErrorClass, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/scd.md")]
    mod scd {}
    #[doc = include_str!("../../../book/src/gev.md")]
    mod gev {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
