pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod model;
pub mod rnn;
pub mod tensor;
pub mod textprep;
pub mod trainer;

pub use error::{Error, Result};
