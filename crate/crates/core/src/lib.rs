pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod family;
pub mod lti;
pub mod mu;
pub mod optim;
pub mod pipeline;
pub mod synthesis;
pub mod uncertainty;

pub use error::{Error, Result};
