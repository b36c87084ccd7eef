pub mod control;
pub mod error;
pub mod levelset;
pub mod linalg;
pub mod pipeline;
pub mod spectral;
pub mod thermal;

pub use error::{Error, Result};
