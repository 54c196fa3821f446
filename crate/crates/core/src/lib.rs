//! Numerical toolkit for the groupoid model of the κ-Poincaré group built on
//! the Iwasawa decomposition SO₀(1, n+1) = BC = CB.

pub mod convalg;
pub mod decomp;
pub mod error;
pub mod groupoid;
pub mod groups;
pub mod infgen;
pub mod minkalg;
pub mod relations;
pub mod report;
pub mod suites;
pub mod twist;

pub use error::{Error, Result};
