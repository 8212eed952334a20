//! Compiles the guide in `book/src` so that `cargo test` runs every code
//! block in it. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/charges.md")]
pub mod charges {}
#[doc = include_str!("../../../book/src/itebd.md")]
pub mod itebd {}
#[doc = include_str!("../../../book/src/window.md")]
pub mod window {}
#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/circuits.md")]
pub mod circuits {}
#[doc = include_str!("../../../book/src/experiment.md")]
pub mod experiment {}
#[doc = include_str!("../../../book/src/checkpoint-format.md")]
pub mod checkpoint_format {}
