pub mod blanket;
pub mod cli;
pub mod datagen;
pub mod diffcore;
pub mod error;
pub mod flowdiag;
pub mod models;
pub mod rng;
pub mod serve;
pub mod trainer;

pub use error::{Error, Result};
