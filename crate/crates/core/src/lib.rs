// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dense;
pub mod dynamics;
pub mod error;
pub mod filter;
pub mod fit;
pub mod lattice;
pub mod operators;
pub mod quad;
pub mod spectral;
pub mod suite;
pub mod topo;

pub use error::{Error, Result};

// The guide's code blocks run as doc tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattices.md")]
    mod lattices {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/light-cones.md")]
    mod light_cones {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/topology.md")]
    mod topology {}
    #[doc = include_str!("../../../book/src/suite.md")]
    mod suite {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
