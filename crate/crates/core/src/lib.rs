//! Active 3D reconstruction simulator with evidential epistemic uncertainty.
//!
//! The library couples a TSDF voxel map with closed-form Normal-Inverse-Gamma
//! uncertainty grids and a hierarchical exploration planner (region-level
//! coverage tours plus informative local viewpoint selection). Synthetic
//! box-world scenes provide analytic depth rendering and ground-truth SDF
//! oracles for evaluation.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `evexplore` binary for the batch CLI.

pub mod app;
pub mod astar;
pub mod error;
pub mod evidential;
pub mod global_planner;
pub mod grid;
pub mod local_planner;
pub mod mapping;
pub mod metrics;
pub mod special;
pub mod tsp;
pub mod world;

pub use error::Error;

/// Numerically stable log(1 + exp(x)).
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
