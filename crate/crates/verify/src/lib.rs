//! Reference oracles and the acceptance suite.

pub mod acceptance;
pub mod oracles;
