//! Long-time quench dynamics of the spin-1/2 XXZ chain by combining an
//! infinite matrix product state (iTEBD) simulation with light-cone Monte
//! Carlo sampling of boundary Schmidt states.

pub mod error;
pub mod graded;
pub mod mps;
pub mod window;
pub mod reference;
pub mod sampler;
pub mod circuit;
pub mod checkpoint;
pub mod harness;

pub use error::{Error, Result};
