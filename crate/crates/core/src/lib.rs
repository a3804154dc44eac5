pub mod classify;
pub mod error;
pub mod eval;
pub mod features;
pub mod gcm;
pub mod fit;
pub mod hmm;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
