//! The guide's chapters, included as documentation so that `cargo test`
//! runs every `rust` snippet in them against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/discrete.md")]
pub mod discrete {}

#[doc = include_str!("../../../book/src/gaussian.md")]
pub mod gaussian {}

#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}

#[doc = include_str!("../../../book/src/numerics.md")]
pub mod numerics {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
