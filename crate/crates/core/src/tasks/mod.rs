//! Perception tasks and their metrics.
//!
//! Everything here consumes rendered (and optionally noise-corrupted) frames
//! and produces the scalar signals the optimizer maximizes: depth accuracy
//! from stereo block matching plus a small trainable refiner, feature
//! match/inlier counts, obstacle visibility along a path, and a linear
//! sliding-window detector scored by average precision.
//!
//! Inference is pure. The two trainable heads ([`stereo::DisparityRefiner`]
//! and [`detect::DetectorModel`]) carry mutable state; gradient updates must
//! be applied by a single owner in a deterministic order while read-only
//! inference on a frozen snapshot may run concurrently.

pub mod detect;
pub mod features;
pub mod obstacles;
pub mod stereo;

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("left and right images have different shapes")]
    ImagesMismatch,
    #[error("training batch is empty")]
    EmptyBatch,
}
