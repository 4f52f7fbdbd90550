//! Genetic search over camera parameters, interleaved with gradient training
//! of the perception heads.
//!
//! The camera side (field of view, baseline, pitch, sensor choice, ...) is
//! derivative-free: a small generational GA with elitism, uniform crossover
//! and multiplicative mutation. The task side (disparity refiner, window
//! detector) is trained by gradient descent on the frames captured while
//! evaluating each genome. Evaluation always reads a generation-start
//! snapshot of the heads so the result of a generation cannot depend on the
//! order (or thread count) in which its genomes are scored.
//!
//! Sensors are special: the catalog is a finite set of (width, height,
//! pixel-pitch) bundles. Under [`SensorScheme::FullyDiscrete`] a genome
//! carries a catalog index and mutation resamples it. Under
//! [`SensorScheme::QuantizedContinuous`] the genome carries a free
//! continuous triplet that mutates like any other continuous parameter and
//! is snapped to the nearest catalog entry for decoding, so the three
//! dimensions move together instead of jumping independently.

use rayon::prelude::*;

use crate::camera::{
    fov_to_focal, render, render_stereo, CameraDesign, Frame, Pose, RenderSettings,
};
use crate::catalog::SensorCatalog;
use crate::img::Image;
use crate::noise::{synthesize, NoiseModel, SynthesisMode};
use crate::scene::{AgentPath, SceneInstance};
use crate::seed::{derive, seeded_rng, Stream};
use crate::tasks::detect::{
    average_precision, detector_infer, detector_train_step, gt_boxes_in_frame, DetectorModel,
};
use crate::tasks::features::{detect_corners, match_and_ransac, MatchResult};
use crate::tasks::obstacles::{obstacle_visibility, ObstacleReport};
use crate::tasks::stereo::{
    block_match, depth_metrics, disparity_to_depth, DepthMetrics, DisparityRefiner,
};

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    StereoDepth,
    MonoMr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorScheme {
    FullyDiscrete,
    QuantizedContinuous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Continuous { lo: f64, hi: f64, add_range: f64 },
    /// Finite value list; mutation proposes a continuous step and snaps to
    /// the nearest listed value.
    Discrete { values: Vec<f64>, add_range: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
}

/// Names a genome value may bind to on [`CameraDesign`].
pub const KNOWN_PARAMS: &[&str] = &[
    "hfov_deg",
    "focal_mm",
    "baseline_m",
    "pitch_deg",
    "height_m",
    "exposure_ms",
    "gain_db",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SensorParam {
    pub catalog: SensorCatalog,
    pub scheme: SensorScheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub params: Vec<ParamDef>,
    pub sensor: Option<SensorParam>,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("invalid parameter spec: {0}")]
    InvalidSpec(String),
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("evaluation failed for genome slot {slot}: {msg}")]
    EvaluationFailed { slot: usize, msg: String },
    #[error("model file: {0}")]
    BadModelFile(String),
}

impl ParamSpec {
    pub fn new(params: Vec<ParamDef>, sensor: Option<SensorParam>) -> Result<Self, OptimizeError> {
        for def in &params {
            if !KNOWN_PARAMS.contains(&def.name.as_str()) {
                return Err(OptimizeError::InvalidSpec(format!(
                    "unknown parameter {:?} (expected one of {KNOWN_PARAMS:?})",
                    def.name
                )));
            }
            match &def.kind {
                ParamKind::Continuous { lo, hi, add_range } => {
                    if !(lo < hi) {
                        return Err(OptimizeError::InvalidSpec(format!(
                            "{}: lo {lo} must be < hi {hi}",
                            def.name
                        )));
                    }
                    if *add_range < 0.0 {
                        return Err(OptimizeError::InvalidSpec(format!(
                            "{}: negative add_range",
                            def.name
                        )));
                    }
                }
                ParamKind::Discrete { values, add_range } => {
                    if values.is_empty() {
                        return Err(OptimizeError::InvalidSpec(format!(
                            "{}: empty value list",
                            def.name
                        )));
                    }
                    if *add_range < 0.0 {
                        return Err(OptimizeError::InvalidSpec(format!(
                            "{}: negative add_range",
                            def.name
                        )));
                    }
                }
            }
        }
        if let Some(s) = &sensor {
            if s.catalog.is_empty() {
                return Err(OptimizeError::InvalidSpec("empty sensor catalog".into()));
            }
        }
        Ok(ParamSpec { params, sensor })
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.params.iter().any(|d| d.name == name)
    }

    /// Stereo-rig search space: field of view and baseline.
    pub fn stereo_preset() -> Self {
        ParamSpec::new(
            vec![
                ParamDef {
                    name: "hfov_deg".into(),
                    kind: ParamKind::Continuous { lo: 50.0, hi: 120.0, add_range: 5.0 },
                },
                ParamDef {
                    name: "baseline_m".into(),
                    kind: ParamKind::Continuous { lo: 0.01, hi: 3.0, add_range: 0.2 },
                },
            ],
            None,
        )
        .expect("preset is valid")
    }

    /// Monocular search space: pitch, focal length, and the sensor bundle.
    pub fn mono_preset(catalog: SensorCatalog, scheme: SensorScheme) -> Self {
        ParamSpec::new(
            vec![
                ParamDef {
                    name: "pitch_deg".into(),
                    kind: ParamKind::Continuous { lo: -30.0, hi: 30.0, add_range: 3.0 },
                },
                ParamDef {
                    name: "focal_mm".into(),
                    kind: ParamKind::Continuous { lo: 1.0, hi: 20.0, add_range: 3.0 },
                },
            ],
            Some(SensorParam { catalog, scheme }),
        )
        .expect("preset is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensorGene {
    Discrete { index: usize },
    /// Free triplet plus the catalog entry it currently snaps to.
    Quantized { latent: [f64; 3], index: usize },
}

impl SensorGene {
    pub fn index(&self) -> usize {
        match self {
            SensorGene::Discrete { index } | SensorGene::Quantized { index, .. } => *index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    /// One value per entry of `ParamSpec::params`, in order.
    pub values: Vec<f64>,
    pub sensor: Option<SensorGene>,
}

fn apply_param(d: &mut CameraDesign, name: &str, v: f64) {
    match name {
        "hfov_deg" => d.focal_mm = fov_to_focal(v, d.sensor_w_mm),
        "focal_mm" => d.focal_mm = v,
        "baseline_m" => d.baseline_m = v,
        "pitch_deg" => d.pitch_deg = v,
        "height_m" => d.height_m = v,
        "exposure_ms" => d.exposure_ms = v,
        "gain_db" => d.gain_db = v,
        other => unreachable!("parameter {other} passed spec validation"),
    }
}

impl Genome {
    /// Realize the genome as camera hardware. The sensor bundle applies
    /// first so that a field-of-view gene sees the genome's own sensor
    /// width; remaining parameters apply in declaration order.
    pub fn decode(&self, spec: &ParamSpec, base: &CameraDesign) -> CameraDesign {
        let mut d = base.clone();
        if let (Some(sp), Some(g)) = (&spec.sensor, &self.sensor) {
            let e = sp.catalog.get(g.index());
            d.sensor_w_mm = e.sensor_w_mm;
            d.sensor_h_mm = e.sensor_h_mm;
            d.pixel_um = e.pixel_um;
        }
        for (def, &v) in spec.params.iter().zip(&self.values) {
            apply_param(&mut d, &def.name, v);
        }
        d
    }

    /// Genome whose genes read back the given design (sensor snapped to the
    /// nearest catalog entry). Used to score a fixed design through the same
    /// pipeline the GA uses.
    pub fn from_design(spec: &ParamSpec, design: &CameraDesign) -> Genome {
        let values = spec
            .params
            .iter()
            .map(|def| match def.name.as_str() {
                "hfov_deg" => design.hfov_deg(),
                "focal_mm" => design.focal_mm,
                "baseline_m" => design.baseline_m,
                "pitch_deg" => design.pitch_deg,
                "height_m" => design.height_m,
                "exposure_ms" => design.exposure_ms,
                "gain_db" => design.gain_db,
                other => unreachable!("parameter {other} passed spec validation"),
            })
            .collect();
        let sensor = spec.sensor.as_ref().map(|sp| {
            let t = [design.sensor_w_mm, design.sensor_h_mm, design.pixel_um];
            let index = sp.catalog.snap_index(t[0], t[1], t[2], true);
            match sp.scheme {
                SensorScheme::FullyDiscrete => SensorGene::Discrete { index },
                SensorScheme::QuantizedContinuous => SensorGene::Quantized { latent: t, index },
            }
        });
        Genome { values, sensor }
    }

    /// Bound/membership safety for every gene.
    pub fn check(&self, spec: &ParamSpec) -> bool {
        if self.values.len() != spec.params.len() {
            return false;
        }
        for (def, &v) in spec.params.iter().zip(&self.values) {
            let ok = match &def.kind {
                ParamKind::Continuous { lo, hi, .. } => v >= *lo && v <= *hi,
                ParamKind::Discrete { values, .. } => values.iter().any(|&x| x == v),
            };
            if !ok {
                return false;
            }
        }
        match (&spec.sensor, &self.sensor) {
            (None, None) => true,
            (Some(sp), Some(g)) => g.index() < sp.catalog.len(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GAConfig {
    pub pop_size: usize,
    pub n_elites: usize,
    pub n_parents: usize,
    pub n_generations: usize,
    pub mutate_factor_range: (f64, f64),
    pub master_seed: u64,
    /// Path steps captured per evaluation.
    pub frames_per_eval: usize,
}

impl GAConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.pop_size == 0 {
            return Err(OptimizeError::InvalidConfig("pop_size must be positive".into()));
        }
        if !(self.n_elites < self.n_parents && self.n_parents <= self.pop_size) {
            return Err(OptimizeError::InvalidConfig(format!(
                "need n_elites < n_parents <= pop_size, got {}/{}/{}",
                self.n_elites, self.n_parents, self.pop_size
            )));
        }
        let (lo, hi) = self.mutate_factor_range;
        if !(lo <= 1.0 && 1.0 <= hi) {
            return Err(OptimizeError::InvalidConfig(format!(
                "mutation factor range [{lo}, {hi}] must contain 1"
            )));
        }
        if self.n_generations == 0 || self.frames_per_eval == 0 {
            return Err(OptimizeError::InvalidConfig(
                "n_generations and frames_per_eval must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Small stereo search: 5 solutions, keep 2, breed from the top 3.
    pub fn stereo_default(master_seed: u64) -> Self {
        GAConfig {
            pop_size: 5,
            n_elites: 2,
            n_parents: 3,
            n_generations: 10,
            mutate_factor_range: (0.8, 1.2),
            master_seed,
            frames_per_eval: 6,
        }
    }

    /// Monocular search: 10 solutions, keep 3, breed from the top 5.
    pub fn mono_default(master_seed: u64) -> Self {
        GAConfig {
            pop_size: 10,
            n_elites: 3,
            n_parents: 5,
            n_generations: 10,
            mutate_factor_range: (0.8, 1.2),
            master_seed,
            frames_per_eval: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPreset {
    #[default]
    Random,
    AllMin,
    AllMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub genomes: Vec<Genome>,
    /// Cached fitness; elites keep theirs across generations.
    pub reports: Vec<Option<FitnessReport>>,
    pub generation: u64,
}

impl Population {
    /// Slot indices best-first, ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.genomes.len()).collect();
        idx.sort_by(|&a, &b| {
            let fa = self.reports[a].as_ref().map(|r| r.fitness).unwrap_or(f64::NEG_INFINITY);
            let fb = self.reports[b].as_ref().map(|r| r.fitness).unwrap_or(f64::NEG_INFINITY);
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        idx
    }
}

pub fn init_population(spec: &ParamSpec, config: &GAConfig, preset: InitPreset) -> Population {
    let genomes = (0..config.pop_size)
        .map(|slot| {
            let mut rng = crate::seed::rng_for(config.master_seed, 0, slot as u64, Stream::InitPopulation);
            let values = spec
                .params
                .iter()
                .map(|def| match (&def.kind, preset) {
                    (ParamKind::Continuous { lo, hi, .. }, InitPreset::Random) => {
                        rng.gen_range(*lo..=*hi)
                    }
                    (ParamKind::Continuous { lo, .. }, InitPreset::AllMin) => *lo,
                    (ParamKind::Continuous { hi, .. }, InitPreset::AllMax) => *hi,
                    (ParamKind::Discrete { values, .. }, InitPreset::Random) => {
                        values[rng.gen_range(0..values.len())]
                    }
                    (ParamKind::Discrete { values, .. }, InitPreset::AllMin) => {
                        values.iter().copied().fold(f64::INFINITY, f64::min)
                    }
                    (ParamKind::Discrete { values, .. }, InitPreset::AllMax) => {
                        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect();
            let sensor = spec.sensor.as_ref().map(|sp| {
                let ranges = sp.catalog.ranges();
                let latent = match preset {
                    InitPreset::Random => [
                        rng.gen_range(ranges[0].0..=ranges[0].1),
                        rng.gen_range(ranges[1].0..=ranges[1].1),
                        rng.gen_range(ranges[2].0..=ranges[2].1),
                    ],
                    InitPreset::AllMin => [ranges[0].0, ranges[1].0, ranges[2].0],
                    InitPreset::AllMax => [ranges[0].1, ranges[1].1, ranges[2].1],
                };
                match sp.scheme {
                    SensorScheme::FullyDiscrete => {
                        let index = match preset {
                            InitPreset::Random => rng.gen_range(0..sp.catalog.len()),
                            _ => sp.catalog.snap_index(latent[0], latent[1], latent[2], true),
                        };
                        SensorGene::Discrete { index }
                    }
                    SensorScheme::QuantizedContinuous => {
                        let index = sp.catalog.snap_index(latent[0], latent[1], latent[2], true);
                        SensorGene::Quantized { latent, index }
                    }
                }
            });
            Genome { values, sensor }
        })
        .collect();
    Population {
        genomes,
        reports: vec![None; config.pop_size],
        generation: 0,
    }
}

/// Multiplicative-plus-additive mutation, clamped to bounds. Discrete lists
/// take the proposal to the nearest member; fully-discrete sensors resample
/// from the catalog, quantized-continuous sensors mutate the latent triplet
/// and re-snap.
pub fn mutate(genome: &Genome, spec: &ParamSpec, config: &GAConfig, seed: u64) -> Genome {
    let mut rng = seeded_rng(seed);
    let (flo, fhi) = config.mutate_factor_range;
    let mut propose = |x: f64, add_range: f64| {
        let u = rng.gen_range(flo..=fhi);
        let a = if add_range > 0.0 { rng.gen_range(-add_range..=add_range) } else { 0.0 };
        x * u + a
    };
    let values = spec
        .params
        .iter()
        .zip(&genome.values)
        .map(|(def, &x)| match &def.kind {
            ParamKind::Continuous { lo, hi, add_range } => propose(x, *add_range).clamp(*lo, *hi),
            ParamKind::Discrete { values, add_range } => {
                let p = propose(x, *add_range);
                let mut best = values[0];
                for &v in values.iter() {
                    if (v - p).abs() < (best - p).abs() {
                        best = v;
                    }
                }
                best
            }
        })
        .collect();
    let sensor = match (&spec.sensor, &genome.sensor) {
        (Some(sp), Some(SensorGene::Discrete { .. })) => {
            Some(SensorGene::Discrete { index: rng.gen_range(0..sp.catalog.len()) })
        }
        (Some(sp), Some(SensorGene::Quantized { latent, .. })) => {
            let ranges = sp.catalog.ranges();
            let mut next = [0.0; 3];
            for k in 0..3 {
                next[k] = propose(latent[k], 0.0).clamp(ranges[k].0, ranges[k].1);
            }
            // Normalized distance: keeps the µm-scale pixel component
            // competitive with the mm-scale dimensions.
            let index = sp.catalog.snap_index(next[0], next[1], next[2], true);
            Some(SensorGene::Quantized { latent: next, index })
        }
        _ => None,
    };
    Genome { values, sensor }
}

/// Each gene drawn from a uniformly chosen parent; the sensor bundle moves
/// as one gene.
pub fn crossover_uniform(parents: &[&Genome], seed: u64) -> Genome {
    assert!(parents.len() >= 2, "crossover needs at least two parents");
    let mut rng = seeded_rng(seed);
    let n = parents[0].values.len();
    let values = (0..n).map(|i| parents[rng.gen_range(0..parents.len())].values[i]).collect();
    let sensor = parents[rng.gen_range(0..parents.len())].sensor.clone();
    Genome { values, sensor }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub inlier: f64,
    pub ratio: f64,
    pub feature: f64,
    pub od: f64,
    pub obstacle: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas { inlier: 0.0025, ratio: 0.5, feature: 1.0, od: 1.0, obstacle: 1.0 }
    }
}

/// Inverse mean absolute log depth error; the epsilon guards synthetic
/// perfect predictions.
pub fn fitness_stereo(metrics: &DepthMetrics) -> f64 {
    1.0 / (metrics.avg_log_error + 1e-6)
}

/// Weighted sum of feature matching, detection AP and obstacle visibility.
pub fn fitness_mono(
    matching: &MatchResult,
    ap: f64,
    obstacles: &ObstacleReport,
    l: &Lambdas,
) -> f64 {
    fitness_mono_parts(matching.n_inlier as f64, matching.inlier_ratio(), ap, obstacles.ratio(), l)
}

pub fn fitness_mono_parts(
    n_inlier: f64,
    inlier_ratio: f64,
    ap: f64,
    obstacle_ratio: f64,
    l: &Lambdas,
) -> f64 {
    l.feature * (l.inlier * n_inlier + l.ratio * inlier_ratio)
        + l.od * ap
        + l.obstacle * obstacle_ratio
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskMetrics {
    Stereo(DepthMetrics),
    Mono { matching: MatchResult, ap: f64, obstacles: ObstacleReport },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    pub fitness: f64,
    pub metrics: TaskMetrics,
    pub frames: usize,
}

impl FitnessReport {
    /// Rebuild the scalar from the stored metrics (consistency invariant).
    pub fn recompute(&self, l: &Lambdas) -> f64 {
        match &self.metrics {
            TaskMetrics::Stereo(m) => {
                if m.n_px == 0 {
                    0.0
                } else {
                    fitness_stereo(m)
                }
            }
            TaskMetrics::Mono { matching, ap, obstacles } => {
                fitness_mono(matching, *ap, obstacles, l)
            }
        }
    }
}

/// Trainable task heads. One shared instance fine-tunes across the whole
/// run; evaluation reads a frozen clone taken at the start of each
/// generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskModels {
    pub refiner: DisparityRefiner,
    pub detector: DetectorModel,
}

impl TaskModels {
    pub fn new(n_classes: usize) -> Self {
        TaskModels { refiner: DisparityRefiner::untrained(), detector: DetectorModel::new(n_classes) }
    }

    /// Plain-text serialization; floats round-trip exactly.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        format!(
            "refiner.alpha = {}\nrefiner.beta = {}\ndetector.n_classes = {}\ndetector.weights = {}\ndetector.bias = {}\n",
            self.refiner.alpha,
            self.refiner.beta,
            self.detector.n_classes,
            join(&self.detector.weights),
            join(&self.detector.bias),
        )
    }

    pub fn from_text(text: &str) -> Result<Self, OptimizeError> {
        let bad = |msg: String| OptimizeError::BadModelFile(msg);
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing key {k:?}")));
        let f = |k: &str| -> Result<f64, OptimizeError> {
            get(k)?.parse().map_err(|_| bad(format!("bad number for {k:?}")))
        };
        let list = |k: &str| -> Result<Vec<f64>, OptimizeError> {
            get(k)?
                .split(',')
                .map(|v| v.trim().parse().map_err(|_| bad(format!("bad list entry for {k:?}"))))
                .collect()
        };
        let n_classes: usize =
            get("detector.n_classes")?.parse().map_err(|_| bad("bad detector.n_classes".into()))?;
        let mut detector = DetectorModel::new(n_classes);
        let weights = list("detector.weights")?;
        let bias = list("detector.bias")?;
        if weights.len() != detector.weights.len() || bias.len() != detector.bias.len() {
            return Err(bad(format!(
                "detector shape mismatch: {} weights / {} bias for {n_classes} classes",
                weights.len(),
                bias.len()
            )));
        }
        detector.weights = weights;
        detector.bias = bias;
        Ok(TaskModels {
            refiner: DisparityRefiner { alpha: f("refiner.alpha")?, beta: f("refiner.beta")? },
            detector,
        })
    }
}

/// Per-genome training data captured during evaluation.
#[derive(Debug, Clone)]
pub enum TrainBatch {
    Stereo { raw_d: Vec<f64>, gt_d: Vec<f64> },
    Mono { frames: Vec<(Image, Vec<(u32, [f64; 4])>)> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskConfig {
    pub block_window: usize,
    /// Disparity floor when inverting to depth; keeps grossly wrong
    /// near-zero matches finitely (and heavily) penalized.
    pub min_disparity: f64,
    pub max_corners: usize,
    pub ransac_iters: usize,
    pub ransac_inlier_px: f64,
    pub detector_score_thresh: f64,
    pub detector_nms_iou: f64,
    pub obstacle_min_px: usize,
    pub gt_box_min_px: usize,
    pub refiner_lr: f64,
    pub detector_lr: f64,
    /// Gradient steps applied per evaluated genome in joint mode.
    pub train_steps: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            block_window: 9,
            min_disparity: 0.25,
            max_corners: 300,
            ransac_iters: 100,
            ransac_inlier_px: 2.0,
            detector_score_thresh: 0.6,
            detector_nms_iou: 0.3,
            obstacle_min_px: 20,
            gt_box_min_px: 20,
            refiner_lr: 0.1,
            detector_lr: 1.0,
            train_steps: 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub experiment: Experiment,
    pub scene: &'a SceneInstance,
    pub path: &'a AgentPath,
    pub spec: &'a ParamSpec,
    pub base_design: &'a CameraDesign,
    pub noise: Option<&'a NoiseModel>,
    pub render: RenderSettings,
    pub lambdas: Lambdas,
    pub tasks: TaskConfig,
}

fn pose_at(step: &crate::scene::PathStep, design: &CameraDesign, spec: &ParamSpec) -> Pose {
    // The genome owns the mounting height only when the search includes it;
    // otherwise the agent's per-step height applies.
    let z = if spec.has_param("height_m") { design.height_m } else { step.camera_height_m };
    Pose {
        position: [step.position[0], step.position[1], z],
        yaw_deg: step.yaw_deg,
        pitch_deg: design.pitch_deg,
    }
}

fn noisy_exposed(
    frame: &Frame,
    design: &CameraDesign,
    ctx: &EvalContext,
    master: u64,
    generation: u64,
    slot: u64,
    frame_idx: u64,
    eye: u64,
) -> Image {
    match ctx.noise {
        Some(nm) => {
            let m = nm.generalize(design.gain_lin(), design.pixel_area_um2());
            let seed = derive(
                master,
                &[generation, slot, Stream::NoiseSynthesis.tag(), frame_idx, eye],
            );
            synthesize(&frame.exposed, &m, seed, SynthesisMode::Gaussian)
        }
        None => frame.exposed.clone(),
    }
}

/// Score one genome over the whole path against a frozen model snapshot.
/// Pure given (master, generation, slot): repeated calls agree bit-for-bit
/// regardless of scheduling.
pub fn evaluate(
    genome: &Genome,
    ctx: &EvalContext,
    models: &TaskModels,
    master: u64,
    generation: u64,
    slot: u64,
) -> Result<(FitnessReport, TrainBatch), OptimizeError> {
    debug_assert!(genome.check(ctx.spec), "genome out of bounds");
    let design = genome.decode(ctx.spec, ctx.base_design);
    let fail = |msg: String| OptimizeError::EvaluationFailed { slot: slot as usize, msg };
    let steps = &ctx.path.steps;
    assert!(!steps.is_empty(), "evaluation path is empty");

    match ctx.experiment {
        Experiment::StereoDepth => {
            let mut pred_all = Vec::new();
            let mut gt_all = Vec::new();
            let mut valid_all = Vec::new();
            let mut raw_d = Vec::new();
            let mut gt_d = Vec::new();
            for (i, step) in steps.iter().enumerate() {
                let pose = pose_at(step, &design, ctx.spec);
                let (left, right, gt) = render_stereo(ctx.scene, &pose, &design, &ctx.render);
                let nl = noisy_exposed(&left, &design, ctx, master, generation, slot, i as u64, 0);
                let nr = noisy_exposed(&right, &design, ctx, master, generation, slot, i as u64, 1);
                let dm = block_match(&nl, &nr, ctx.render.d_max, ctx.tasks.block_window)
                    .map_err(|e| fail(e.to_string()))?;
                let refined = models.refiner.apply(&dm);
                let f_px = left.intrinsics.f_px;
                let pred_z =
                    disparity_to_depth(&refined.d, f_px, design.baseline_m, ctx.tasks.min_disparity);
                let gt_z = disparity_to_depth(&gt.disparity, f_px, design.baseline_m, 0.0);
                // Scoring is dense: every pixel the matcher could attempt
                // (inside its window margin, with in-range ground truth)
                // counts, confident or not. Abstaining on content the design
                // chose to image must cost as much as matching it wrongly,
                // otherwise a camera can win by looking where it fails.
                // Matcher confidence gates only the refiner's training pairs.
                let half = ctx.tasks.block_window / 2;
                let (w, h) = (dm.width, dm.height);
                for px in 0..dm.d.len() {
                    let (x, y) = (px % w, px / w);
                    let interior = x >= half && x < w - half && y >= half && y < h - half;
                    let scored = interior && gt.valid[px] && !gt.out_of_range[px];
                    valid_all.push(scored);
                    if scored && dm.valid[px] {
                        raw_d.push(dm.d[px]);
                        gt_d.push(gt.disparity[px]);
                    }
                }
                pred_all.extend_from_slice(&pred_z);
                gt_all.extend_from_slice(&gt_z);
            }
            let metrics = depth_metrics(&pred_all, &gt_all, &valid_all);
            let fitness = if metrics.n_px == 0 { 0.0 } else { fitness_stereo(&metrics) };
            assert!(fitness.is_finite());
            Ok((
                FitnessReport { fitness, metrics: TaskMetrics::Stereo(metrics), frames: steps.len() },
                TrainBatch::Stereo { raw_d, gt_d },
            ))
        }
        Experiment::MonoMr => {
            let mut frames = Vec::with_capacity(steps.len());
            let mut noisy = Vec::with_capacity(steps.len());
            for (i, step) in steps.iter().enumerate() {
                let pose = pose_at(step, &design, ctx.spec);
                let frame = render(ctx.scene, &pose, &design, &ctx.render);
                noisy.push(noisy_exposed(&frame, &design, ctx, master, generation, slot, i as u64, 0));
                frames.push(frame);
            }
            let feats: Vec<_> =
                noisy.iter().map(|img| detect_corners(img, ctx.tasks.max_corners)).collect();
            let mut inlier_sum = 0usize;
            let mut total_sum = 0usize;
            let pairs = steps.len().saturating_sub(1);
            for i in 0..pairs {
                let seed = derive(master, &[generation, slot, Stream::Ransac.tag(), i as u64]);
                let mr = match_and_ransac(
                    &feats[i],
                    &feats[i + 1],
                    ctx.tasks.ransac_iters,
                    ctx.tasks.ransac_inlier_px,
                    seed,
                );
                inlier_sum += mr.n_inlier;
                total_sum += mr.n_total;
            }
            let matching = if pairs == 0 {
                MatchResult { n_inlier: 0, n_total: 0 }
            } else {
                MatchResult {
                    n_inlier: (inlier_sum as f64 / pairs as f64).round() as usize,
                    n_total: (total_sum as f64 / pairs as f64).round() as usize,
                }
            };
            let mut batch = Vec::with_capacity(steps.len());
            let mut ap_sum = 0.0;
            let mut ap_frames = 0usize;
            for (frame, img) in frames.iter().zip(&noisy) {
                let gt = gt_boxes_in_frame(ctx.scene, frame, ctx.tasks.gt_box_min_px);
                if !gt.is_empty() {
                    let dets = detector_infer(
                        &models.detector,
                        img,
                        ctx.tasks.detector_score_thresh,
                        ctx.tasks.detector_nms_iou,
                    );
                    ap_sum += average_precision(&dets, &gt, 0.5);
                    ap_frames += 1;
                }
                batch.push((img.clone(), gt));
            }
            let ap = if ap_frames == 0 { 0.0 } else { ap_sum / ap_frames as f64 };
            let obstacles =
                obstacle_visibility(&frames, ctx.path, ctx.scene, ctx.tasks.obstacle_min_px);
            let fitness = fitness_mono(&matching, ap, &obstacles, &ctx.lambdas);
            assert!(fitness.is_finite());
            Ok((
                FitnessReport {
                    fitness,
                    metrics: TaskMetrics::Mono { matching, ap, obstacles },
                    frames: steps.len(),
                },
                TrainBatch::Mono { frames: batch },
            ))
        }
    }
}

/// Elitism + uniform crossover + mutation. Elites keep their cached
/// reports; offspring arrive unevaluated.
pub fn step_generation(pop: &Population, spec: &ParamSpec, config: &GAConfig) -> Population {
    assert!(
        pop.reports.iter().all(|r| r.is_some()),
        "population must be fully evaluated before stepping"
    );
    let order = pop.order();
    let next_gen = pop.generation + 1;
    let n_elites = config.n_elites.min(pop.genomes.len());
    let parents: Vec<&Genome> = order
        .iter()
        .take(config.n_parents.min(pop.genomes.len()))
        .map(|&i| &pop.genomes[i])
        .collect();
    let mut genomes = Vec::with_capacity(pop.genomes.len());
    let mut reports = Vec::with_capacity(pop.genomes.len());
    for &i in order.iter().take(n_elites) {
        genomes.push(pop.genomes[i].clone());
        reports.push(pop.reports[i].clone());
    }
    for slot in n_elites..pop.genomes.len() {
        let cseed = derive(config.master_seed, &[next_gen, slot as u64, Stream::Crossover.tag()]);
        let mseed = derive(config.master_seed, &[next_gen, slot as u64, Stream::Mutation.tag()]);
        let child = if parents.len() >= 2 {
            crossover_uniform(&parents, cseed)
        } else {
            parents[0].clone()
        };
        genomes.push(mutate(&child, spec, config, mseed));
        reports.push(None);
    }
    Population { genomes, reports, generation: next_gen }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub generation: u64,
    pub slot: usize,
    pub report: FitnessReport,
    pub genome: Genome,
    pub design: CameraDesign,
}

pub struct RunSpec {
    pub experiment: Experiment,
    pub scene: SceneInstance,
    pub path: AgentPath,
    pub spec: ParamSpec,
    pub ga: GAConfig,
    pub base_design: CameraDesign,
    pub noise: Option<NoiseModel>,
    pub render: RenderSettings,
    pub lambdas: Lambdas,
    pub tasks: TaskConfig,
    /// Skip head training (optionally after pretraining on the base design).
    pub frozen: bool,
    pub pretrain_steps: usize,
    pub init: InitPreset,
    pub workers: usize,
}

pub struct RunOutcome {
    pub best_genome: Genome,
    pub best_design: CameraDesign,
    pub best_report: FitnessReport,
    pub history: Vec<HistoryRow>,
    pub models: TaskModels,
}

/// A failed run still carries the history accumulated so far so callers can
/// persist a partial record.
#[derive(Debug)]
pub struct RunFailure {
    pub error: OptimizeError,
    pub history: Vec<HistoryRow>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} history rows retained)", self.error, self.history.len())
    }
}

impl std::error::Error for RunFailure {}

fn apply_training(models: &mut TaskModels, batch: &TrainBatch, cfg: &TaskConfig) {
    match batch {
        TrainBatch::Stereo { raw_d, gt_d } => {
            if raw_d.is_empty() {
                return;
            }
            for _ in 0..cfg.train_steps {
                let _ = models.refiner.train_step(raw_d, gt_d, cfg.refiner_lr);
            }
        }
        TrainBatch::Mono { frames } => {
            for _ in 0..cfg.train_steps {
                for (img, gt) in frames {
                    detector_train_step(&mut models.detector, img, gt, cfg.detector_lr);
                }
            }
        }
    }
}

/// Generational loop: snapshot the heads, evaluate the unevaluated genomes
/// (in parallel, each from seeds keyed by generation and slot), log history,
/// fine-tune the heads on the captured batches in fixed slot order, select.
/// The result is a pure function of the run spec — worker count included.
pub fn run_joint(run: &RunSpec) -> Result<RunOutcome, RunFailure> {
    let ga = &run.ga;
    if let Err(e) = ga.validate() {
        return Err(RunFailure { error: e, history: Vec::new() });
    }
    let mut models = TaskModels::new(run.scene.object_class_count.max(1));
    let ctx = EvalContext {
        experiment: run.experiment,
        scene: &run.scene,
        path: &run.path,
        spec: &run.spec,
        base_design: &run.base_design,
        noise: run.noise.as_ref(),
        render: run.render,
        lambdas: run.lambdas,
        tasks: run.tasks,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.workers.max(1))
        .build()
        .expect("thread pool");
    let mut history: Vec<HistoryRow> = Vec::new();

    // Optional pretraining on the base design (only meaningful when the
    // heads are otherwise frozen; joint mode trains as it goes).
    if run.frozen && run.pretrain_steps > 0 {
        let g = Genome::from_design(&run.spec, &run.base_design);
        match evaluate(&g, &ctx, &models, ga.master_seed, u64::MAX, 0) {
            Ok((_, batch)) => {
                let cfg = TaskConfig { train_steps: run.pretrain_steps, ..run.tasks };
                apply_training(&mut models, &batch, &cfg);
            }
            Err(error) => return Err(RunFailure { error, history }),
        }
    }

    let mut pop = init_population(&run.spec, ga, run.init);
    for gen in 0..ga.n_generations as u64 {
        let snapshot = models.clone();
        let todo: Vec<usize> =
            (0..pop.genomes.len()).filter(|&s| pop.reports[s].is_none()).collect();
        let results: Result<Vec<(usize, FitnessReport, TrainBatch)>, OptimizeError> =
            pool.install(|| {
                todo.par_iter()
                    .map(|&s| {
                        evaluate(&pop.genomes[s], &ctx, &snapshot, ga.master_seed, gen, s as u64)
                            .map(|(r, b)| (s, r, b))
                    })
                    .collect()
            });
        let results = match results {
            Ok(r) => r,
            Err(error) => return Err(RunFailure { error, history }),
        };
        let mut batches: Vec<(usize, TrainBatch)> = Vec::with_capacity(results.len());
        for (s, report, batch) in results {
            pop.reports[s] = Some(report);
            batches.push((s, batch));
        }
        for slot in 0..pop.genomes.len() {
            let report = pop.reports[slot].clone().expect("just evaluated");
            history.push(HistoryRow {
                generation: gen,
                slot,
                design: pop.genomes[slot].decode(&run.spec, &run.base_design),
                genome: pop.genomes[slot].clone(),
                report,
            });
        }
        if !run.frozen {
            batches.sort_by_key(|(s, _)| *s);
            for (_, batch) in &batches {
                apply_training(&mut models, batch, &run.tasks);
            }
        }
        if gen + 1 < ga.n_generations as u64 {
            pop = step_generation(&pop, &run.spec, ga);
        }
    }
    let best_slot = pop.order()[0];
    Ok(RunOutcome {
        best_genome: pop.genomes[best_slot].clone(),
        best_design: pop.genomes[best_slot].decode(&run.spec, &run.base_design),
        best_report: pop.reports[best_slot].clone().expect("evaluated"),
        history,
        models,
    })
}

/// Canonical run record: one row per (generation, slot) with the task
/// metrics and the decoded genome.
pub fn history_csv(rows: &[HistoryRow], experiment: Experiment, spec: &ParamSpec) -> String {
    let mut out = String::new();
    out.push_str("generation,slot,fitness");
    match experiment {
        Experiment::StereoDepth => out.push_str(",avg_log_error,rmse_m,n_px"),
        Experiment::MonoMr => out.push_str(",n_inlier,n_total,inlier_ratio,ap,o_seen,o_total"),
    }
    for def in &spec.params {
        out.push(',');
        out.push_str(&def.name);
    }
    if spec.sensor.is_some() {
        out.push_str(",sensor_id,sensor_w_mm,sensor_h_mm,pixel_um");
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{},{}", row.generation, row.slot, row.report.fitness));
        match &row.report.metrics {
            TaskMetrics::Stereo(m) => {
                out.push_str(&format!(",{},{},{}", m.avg_log_error, m.rmse_m, m.n_px));
            }
            TaskMetrics::Mono { matching, ap, obstacles } => {
                out.push_str(&format!(
                    ",{},{},{},{},{},{}",
                    matching.n_inlier,
                    matching.n_total,
                    matching.inlier_ratio(),
                    ap,
                    obstacles.o_seen,
                    obstacles.o_total
                ));
            }
        }
        for v in &row.genome.values {
            out.push_str(&format!(",{v}"));
        }
        if let (Some(sp), Some(g)) = (&spec.sensor, &row.genome.sensor) {
            let e = sp.catalog.get(g.index());
            out.push_str(&format!(
                ",{},{},{},{}",
                e.id, e.sensor_w_mm, e.sensor_h_mm, e.pixel_um
            ));
        }
        out.push('\n');
    }
    out
}
