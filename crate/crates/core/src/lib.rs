pub mod analysis;
pub mod ap;
pub mod constructions;
pub mod engine;
pub mod error;
pub mod exact;
pub mod ntheory;

pub use error::{Error, Result};
