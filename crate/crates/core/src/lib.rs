pub mod augment;
pub mod corpus;
pub mod decode;
pub mod delex;
pub mod error;
pub mod io;
pub mod metrics;
pub mod policy;
pub mod spans;
pub mod statemap;
pub mod synth;

pub use error::{Error, Result};
