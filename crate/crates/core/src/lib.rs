pub mod eigensolve;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod oracle;
pub mod shapeopt;
pub mod sparse;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
