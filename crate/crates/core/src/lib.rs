pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gpa;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod render;
pub mod seeds;
pub mod shape;
pub mod sim;
pub mod split;
pub mod stats;

pub use error::{Error, Result};
