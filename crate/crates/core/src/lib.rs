pub mod algebra;
pub mod authtree;
pub mod bench;
pub mod btree;
pub mod error;
pub mod polycommit;
pub mod proofs;
pub mod store;

pub use error::{Error, Result};
