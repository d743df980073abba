//! Range-view processing for LiDAR gait sequences.
//!
//! The crate turns per-frame 3D point clouds of a walking subject into
//! depth-map image sequences using either of two projections:
//!
//! * **planar** — the conventional sensor-centric range view
//!   (`atan2(x, y)` horizontally, `asin(z / ‖p‖)` vertically),
//! * **spherical** — projection onto a reference sphere of radius `R`
//!   centered at height `z_r` (`acos(y / R)` horizontally,
//!   `atan2(z − z_r, R)` vertically), which redistributes image area
//!   toward fast-moving body parts.
//!
//! On top of the projections sit:
//!
//! * [`pointcloud`] — XYZ / ASCII-PLY ingestion, sequence statistics, and a
//!   deterministic articulated-walker generator whose points carry
//!   body-part labels (the ground-truth oracle for the analytics layer),
//! * [`projection`] — rasterization, normalization, and PNG output,
//! * [`analytics`] — limb-pixel-fraction and temporal-variance metrics plus
//!   the `(z_r, R)` sweep harness with CSV reporting,
//! * [`net`] — a forward-only implementation of the recognition backbone
//!   (residual stem, dynamic-augmentation blocks, temporal and horizontal
//!   pooling, triplet and cross-entropy losses) verified against
//!   brute-force oracles.
//!
//! All operations are pure functions of their inputs; sharing values across
//! threads is safe.

pub mod analytics;
pub mod error;
pub mod net;
pub mod pointcloud;
pub mod projection;

pub use error::{Error, Result};
