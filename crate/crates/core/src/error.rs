use thiserror::Error;

use crate::landscape::State;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate state id {0}")]
    DuplicateState(i64),
    #[error("unknown state id {0}")]
    UnknownState(i64),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(i64, i64),
    #[error("self loop at state {0}")]
    SelfLoop(i64),
    #[error("asymmetric adjacency between {0} and {1}")]
    AsymmetricAdjacency(i64, i64),
    #[error("degenerate energies: states {0} and {1} share energy {2}")]
    DegenerateEnergies(i64, i64, f64),
    #[error("landscape is not connected")]
    Disconnected,
    #[error("empty landscape")]
    Empty,
    #[error("unknown canonical landscape {0:?}")]
    UnknownCanonical(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("landscape has no coordinates; scattering needs them")]
    MissingCoordinates,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("singular system at transient state {0}")]
    Singular(State),
    #[error("level {level} out of range 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("enumeration refused: {0} metastable states exceed the cap")]
    TooManyMetastates(usize),
    #[error("did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
