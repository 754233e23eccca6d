//! Path-independent metabasins for reversible Metropolis chains on finite energy landscapes.

pub mod aggregation;
pub mod analysis;
pub mod chain;
pub mod error;
pub mod filtration;
pub mod landscape;
pub mod linalg;
pub mod saddles;
pub mod simulate;
pub mod valleys;

pub use error::{Error, Result};
pub use landscape::{Landscape, State};
