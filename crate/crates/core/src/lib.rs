//! Classical simulation of dual transformations of quantum channels.
//!
//! The crate covers
//!
//! * the probabilistic channel transpose by postselected teleportation
//!   ([`transpose`]),
//! * the virtual comb that turns `N` into its complex conjugate `N^*`, with a
//!   quasi-probability Monte Carlo estimator ([`conjugate`]),
//! * an estimator for expectation values of the Petz recovery map of an
//!   unknown channel ([`petz`]),
//! * closed-form primal and dual SDP certificates showing that the sampling
//!   overhead `d_A d_B - d_A + 1` is optimal ([`certificates`]).
//!
//! Everything is dense linear algebra over `Complex64`; see [`linalg`].

pub mod certificates;
pub mod channels;
pub mod conjugate;
pub mod error;
pub mod linalg;
pub mod petz;
pub mod report;
pub mod sampling;
pub mod transpose;

pub use error::{Error, Result};

// Chapters of the guide in book/ are compiled as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/transpose.md")]
    mod transpose {}
    #[doc = include_str!("../../../book/src/virtual-comb.md")]
    mod virtual_comb {}
    #[doc = include_str!("../../../book/src/petz.md")]
    mod petz {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
