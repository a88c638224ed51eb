pub mod audio;
pub mod audit;
pub mod augment;
pub mod checkpoint;
pub mod cnn7;
pub mod config;
pub mod error;
pub mod frontend;
pub mod nn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/frontends.md")]
    mod frontends {}
    #[doc = include_str!("../../../book/src/architecture.md")]
    mod architecture {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod complexity {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
