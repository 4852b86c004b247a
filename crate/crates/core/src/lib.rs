pub mod collision;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod modes;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};
