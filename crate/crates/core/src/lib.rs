pub mod checkpoint;
pub mod cli;
pub mod codec;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod imaging;
pub mod nn;
pub mod postproc;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/imaging.md")]
    mod imaging {}
    #[doc = include_str!("../../../book/src/codec.md")]
    mod codec {}
    #[doc = include_str!("../../../book/src/postproc.md")]
    mod postproc {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
