//! Join-relationship prediction for BI models: profile tables, enumerate
//! candidate joins, score them with calibrated local classifiers, pick a
//! precision-oriented backbone with exact arborescence solvers, and grow
//! recall edges greedily on top.

pub mod candidates;
pub mod error;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod pipeline;
pub mod profile;
pub mod recall;
pub mod solver;
pub mod synth;
pub mod table;
pub mod text;

pub mod classifier;

pub use error::{Error, Result};
