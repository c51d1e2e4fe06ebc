pub mod classify;
pub mod config;
pub mod error;
pub mod features;
pub mod haralick;
pub mod isomap;
pub mod phantom;
pub mod pipeline;
pub mod special;
pub mod stats;
pub mod svm;
pub mod tscm;
pub mod tsfos;
pub mod tspm;
pub mod volume;

pub use error::{Error, Result};
