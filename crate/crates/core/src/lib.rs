// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod numerics;
pub mod physics;
pub mod plot;
pub mod spectral;
pub mod svr;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectral-kernel.md")]
    mod spectral_kernel {}
    #[doc = include_str!("../../../book/src/psd-repair.md")]
    mod psd_repair {}
    #[doc = include_str!("../../../book/src/svr.md")]
    mod svr {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
