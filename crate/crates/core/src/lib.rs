pub mod analysis;
pub mod circuits;
pub mod error;
pub mod eval;
pub mod model;
pub mod patching;
pub mod prompts;
pub mod reference;
pub mod run;
pub mod seed;

pub use error::{Error, Result};
