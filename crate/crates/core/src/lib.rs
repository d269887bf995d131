pub mod error;
pub mod geometry;
pub mod linalg;
pub mod field;
pub mod bundle;
pub mod presets;
pub mod flow;
pub mod destab;
pub mod series;
pub mod io;
pub mod scenario;
pub mod checks;
pub mod cli;

pub use error::{Error, Result};
