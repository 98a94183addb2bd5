//! Thermal random-phase ensembles and Chebyshev propagation for femtosecond
//! two-photon photoassociation of atom pairs.
//!
//! The [`guide`] module carries the book chapters; their code blocks run as
//! doctests.

pub mod config;
pub mod curves;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod observables;
pub mod propagator;
pub mod report;
pub mod runs;
pub mod spectral;
pub mod thermal;
pub mod units;
pub mod validation;

pub use error::{Error, Result};

/// The guide from `book/`, one module per chapter.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    pub mod grids {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    pub mod propagation {}
    #[doc = include_str!("../../../book/src/thermal.md")]
    pub mod thermal {}
    #[doc = include_str!("../../../book/src/pump.md")]
    pub mod pump {}
    #[doc = include_str!("../../../book/src/purity.md")]
    pub mod purity {}
    #[doc = include_str!("../../../book/src/resonances.md")]
    pub mod resonances {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
