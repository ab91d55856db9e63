//! Edge-aware surface normal estimation from depth images.
//!
//! Depth gradients start from an edge-selective finite-difference stencil and
//! are refined by a multi-directional dynamic program that follows smooth
//! pixel paths, extending collinear runs with an O(1) polynomial derivative
//! recurrence. Normals come from either an inverse-depth or a tangent-vector
//! back-end. Numeric code is generic over [`scalar::Real`]; the aliases below
//! fix it to `f64` or `f32`.

pub mod dp;
pub mod error;
pub mod eval;
pub mod grid;
pub mod init;
pub mod io;
pub mod normals;
pub mod pipeline;
pub mod refine;
pub mod scalar;
pub mod synth;

pub use dp::{run_dp, Convergence, DpConfig, DpOutcome, TieBreak};
pub use error::{Error, Result};
pub use eval::{aae, car, evaluate, pgp, MetricReport};
pub use grid::{Axis, CameraIntrinsics, DepthGrid, DepthKind, NormalMap, Offset, Pixel};
pub use init::{CostKind, GradientField};
pub use normals::{BackendChoice, Phi};
pub use pipeline::{run_pipeline, InputSource, IterationCap, PipelineConfig, PipelineReport};
pub use scalar::Real;
pub use synth::{render, SceneKind, SceneSample, SceneSpec};

pub type DepthGridF64 = DepthGrid<f64>;
pub type DepthGridF32 = DepthGrid<f32>;
pub type NormalMapF64 = NormalMap<f64>;
pub type NormalMapF32 = NormalMap<f32>;
pub type GradientFieldF64 = GradientField<f64>;
pub type GradientFieldF32 = GradientField<f32>;
pub type IntrinsicsF64 = CameraIntrinsics<f64>;
pub type IntrinsicsF32 = CameraIntrinsics<f32>;
