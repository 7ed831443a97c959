use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {bases} bases but {scalars} scalars")]
    LengthMismatch { bases: usize, scalars: usize },

    #[error("polynomial degree {degree} exceeds the degree bound {bound}")]
    DegreeBound { degree: usize, bound: usize },

    #[error("duplicate evaluation point")]
    DuplicatePoint,

    #[error("{requested} opened points exceed the {supported} supported by the verification key")]
    BatchCapability { requested: usize, supported: usize },

    #[error("degree bound must be at least 1")]
    ZeroDegreeBound,

    #[error("test-mode trapdoor derived from seed {0} is zero")]
    ZeroTrapdoor(u64),

    #[error("malformed parameter file: {0}")]
    MalformedParams(String),

    #[error("inconsistent public parameters at power {0}")]
    InconsistentParams(usize),

    #[error("branching factor {0} is invalid (must be even and at least 4)")]
    BranchingFactor(usize),

    #[error("branching factor {q} needs degree bound {q}, parameters only support {bound}")]
    ParamsTooSmall { q: usize, bound: usize },

    #[error("key of {len} bytes exceeds the maximum of {max}")]
    KeyTooLong { len: usize, max: usize },

    #[error("range lower bound is greater than upper bound")]
    InvalidRange,

    #[error("salted keys collide inside one node")]
    SaltCollision,

    #[error("key is not present in the tree")]
    KeyAbsent,

    #[error("key is present in the tree")]
    KeyPresent,

    #[error("malformed encoding: {0}")]
    Decode(String),

    #[error("root {0} not found")]
    RootNotFound(String),

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
