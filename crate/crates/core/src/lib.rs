//! Task-driven camera design engine.
//!
//! Couples a deterministic desk-scale ray caster with lightweight perception
//! tasks and a genetic optimizer so that camera hardware parameters (optics,
//! sensor, placement, stereo geometry) can be searched against the tasks the
//! camera is meant to serve. The crate is organized bottom-up:
//!
//! - [`scene`]: procedural indoor / outdoor test environments and agent paths
//! - [`camera`]: pinhole model, Lambertian ray caster, exposure, stereo rigs
//! - [`noise`]: affine sensor noise model (calibrate / generalize / synthesize)
//! - [`catalog`]: discrete sensor catalog and nearest-entry snapping
//! - [`tasks`]: stereo depth, feature matching, detection, obstacle visibility
//! - [`optimize`]: genetic search interleaved with task-head training
//! - [`config`]: flat key-value experiment configuration
//!
//! Every random decision flows from an explicit seed; renders, evaluations and
//! optimizer histories are bit-reproducible across runs and worker counts.

pub mod camera;
pub mod catalog;
pub mod config;
pub mod img;
pub mod noise;
pub mod optimize;
pub mod scene;
pub mod seed;
pub mod svg;
pub mod tasks;

