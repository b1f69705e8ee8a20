// Validations write `!(x > 0.0)` on purpose: it rejects NaN together with
// zero and negatives, which `x <= 0.0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Differentiable silhouette operators for gait recognition.
//!
//! The pipeline runs in stages: decompose a binary silhouette into an edge
//! band and an interior core (`morphology`), recombine the interior with
//! predicted probabilities on the edge band (`synthesis`), crop and resample
//! the body into a canonical frame (`align`), and score gallery/probe
//! retrieval over gait energy images (`eval`). `gradcheck` verifies the
//! analytic backward passes against central finite differences, and
//! `datagen` renders the deterministic synthetic walkers the test harness
//! runs on.

pub mod align;
pub mod config;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod grid;
pub mod io;
pub mod morphology;
pub mod synthesis;

pub use error::{Error, Result};
pub use grid::{
    Condition, ConditionKind, GaitSequence, GradGrid, Grid, GridKind, StructuringElement,
    TargetSize,
};
