//! Obstacle visibility accounting along a captured path.

use std::collections::HashMap;

use crate::camera::Frame;
use crate::scene::{AgentPath, SceneInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObstacleReport {
    pub o_seen: usize,
    pub o_total: usize,
}

impl ObstacleReport {
    /// Fraction of crossed obstacles that were seen beforehand; vacuously 1
    /// when nothing was crossed.
    pub fn ratio(&self) -> f64 {
        if self.o_total == 0 {
            1.0
        } else {
            self.o_seen as f64 / self.o_total as f64
        }
    }
}

/// Count how many of the obstacles the agent steps over were visible before
/// the crossing: an obstacle is "seen" when at least `min_px` pixels of its
/// semantic id appear in any frame strictly before its first crossing step.
/// `frames` must align one-to-one with `path.steps`.
pub fn obstacle_visibility(
    frames: &[Frame],
    path: &AgentPath,
    scene: &SceneInstance,
    min_px: usize,
) -> ObstacleReport {
    assert_eq!(frames.len(), path.steps.len(), "one frame per path step");
    let mut first_crossing: HashMap<usize, usize> = HashMap::new();
    for (i, step) in path.steps.iter().enumerate() {
        if let Some(oi) = step.crossing {
            first_crossing.entry(oi).or_insert(i);
        }
    }
    let mut seen = 0;
    for (&oi, &step_idx) in &first_crossing {
        let id = scene.obstacles[oi].semantic_id;
        let visible = frames[..step_idx].iter().any(|f| {
            f.semantic.iter().filter(|&&s| s == id).count() >= min_px
        });
        if visible {
            seen += 1;
        }
    }
    ObstacleReport { o_seen: seen, o_total: first_crossing.len() }
}
