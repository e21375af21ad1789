//! Hand-rolled differentiable building blocks: a reverse-mode tape over
//! `f64` vectors and flat named parameter storage with Adam.

pub mod params;
pub mod tape;

pub use params::{Adam, Params, ParamsManifest};
pub use tape::{BackwardPass, Tape, Var};
