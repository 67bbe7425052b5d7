//! Synthesis, auditing and scoring of spatial visual ambiguity benchmarks.
//!
//! Each benchmark instance ("bundle") shows a few labelled images in which a
//! target object sits on one side of a hidden horizontal or vertical line,
//! then asks for the label of a query image. This crate generates such
//! bundles deterministically, renders their images, writes datasets and
//! training plans, certifies with an exact solver that every bundle is
//! solvable, and scores model predictions.

pub mod assets;
pub mod catalog;
pub mod config;
pub mod curriculum;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod oracle;
pub mod prompt;
pub mod render;
pub mod rng;
pub mod sampler;

pub use config::GenerationConfig;
pub use error::{Error, Result};
pub use model::{
    BackgroundSet, DecisionBoundary, ExampleRecord, Label, ObjectInstance, ObjectSet, Pose, PromptBundle, Sign,
    TaskFamilyParams, TextMode,
};
