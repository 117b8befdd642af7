//! File formats, figures, experiment pipelines and the command-line front end
//! for the Krylov-complexity learning lab.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiments;
pub mod export;
pub mod fsutil;
pub mod kcx;
pub mod svg;

pub use error::{LabError, Result};
