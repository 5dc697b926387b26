pub mod drift;
pub mod duhamel;
pub mod envelopes;
pub mod error;
pub mod kato;
pub mod quad;
pub mod sde;
pub mod special;
pub mod stable_kernel;

pub use error::{Error, Result};
