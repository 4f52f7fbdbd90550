//! Flat key-value run configuration.
//!
//! Syntax: `key = value` lines, `#` full-line comments, optional `[section]`
//! headers that prefix the keys after them as `section.key`. Values are kept
//! as trimmed strings until a typed getter reads them, so unknown keys pass
//! through untouched and an emitted file re-parses to an equal config. Keys
//! carry their unit in the name (`baseline_m`, `exposure_ms`, `pixel_um`).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::camera::{CameraDesign, RenderSettings};
use crate::optimize::{
    Experiment, GAConfig, InitPreset, Lambdas, ParamDef, ParamKind, ParamSpec, SensorParam,
    SensorScheme, TaskConfig,
};
use crate::scene::{Illumination, SceneKind, SceneSpec};
use crate::seed::{derive, Stream};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value` or `[section]`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("key {key:?}: cannot parse {value:?} as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("{0}")]
    Invalid(String),
}

/// Parsed key-value store, sorted by key; later duplicates win.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut prefix = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                prefix = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::BadLine { line: i + 1, text: raw.to_string() });
            };
            let key = if prefix.is_empty() {
                k.trim().to_string()
            } else {
                format!("{prefix}.{}", k.trim())
            };
            if key.is_empty() {
                return Err(ConfigError::BadLine { line: i + 1, text: raw.to_string() });
            }
            entries.insert(key, v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string().trim().to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// Flat canonical emission: one sorted `key = value` line per entry.
    /// `parse(to_text())` always reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    fn typed<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected,
            }),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.typed(key, "a number")?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.typed(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.typed(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected: "true or false",
            }),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Day,
    Night,
}

impl Scenario {
    pub fn illumination(self) -> Illumination {
        match self {
            Scenario::Day => Illumination::day(),
            Scenario::Night => Illumination::night(),
        }
    }
}

/// Search-space entry syntax:
///   continuous  `lo..hi`            e.g. `50..120 +5`
///   discrete    `{v1, v2, ...}`     e.g. `{5, 10, 30, 60} +10`
/// The optional trailing `+a` is the additive mutation half-range.
pub fn parse_param_kind(text: &str) -> Result<ParamKind, String> {
    let mut body = text.trim();
    let mut add_range = 0.0;
    if let Some(pos) = body.rfind('+') {
        // A '+' that starts the last whitespace-separated token is the
        // additive range; '+' inside the range/list (e.g. exponents) is not.
        let (head, tail) = body.split_at(pos);
        if head.is_empty() || head.ends_with(char::is_whitespace) {
            add_range = tail[1..]
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("bad additive range {:?}", &tail[1..]))?;
            if add_range < 0.0 {
                return Err(format!("negative additive range {add_range}"));
            }
            body = head.trim();
        }
    }
    if let Some(list) = body.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad list value {:?}", v.trim())))
            .collect::<Result<Vec<f64>, String>>()?;
        return Ok(ParamKind::Discrete { values, add_range });
    }
    if let Some((lo, hi)) = body.split_once("..") {
        let lo = lo.trim().parse::<f64>().map_err(|_| format!("bad lower bound {:?}", lo.trim()))?;
        let hi = hi.trim().parse::<f64>().map_err(|_| format!("bad upper bound {:?}", hi.trim()))?;
        return Ok(ParamKind::Continuous { lo, hi, add_range });
    }
    Err(format!("expected `lo..hi` or `{{v1, v2, ...}}`, got {body:?}"))
}

pub fn format_param_kind(kind: &ParamKind) -> String {
    match kind {
        ParamKind::Continuous { lo, hi, add_range } => {
            if *add_range > 0.0 {
                format!("{lo}..{hi} +{add_range}")
            } else {
                format!("{lo}..{hi}")
            }
        }
        ParamKind::Discrete { values, add_range } => {
            let list = values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
            if *add_range > 0.0 {
                format!("{{{list}}} +{add_range}")
            } else {
                format!("{{{list}}}")
            }
        }
    }
}

/// Which sensor noise model a run synthesizes with: the built-in reference
/// calibration (default), a calibrated model file, or none (noise-free).
/// Without noise, pixel size and gain lose their physical cost, so "none"
/// is for debugging rather than design runs.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSetting {
    Default,
    None,
    File(PathBuf),
}

/// Fully resolved run description: every knob pinned to a concrete value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub scenario: Scenario,
    pub scene: SceneSpec,
    pub spec: ParamSpec,
    pub ga: GAConfig,
    pub base_design: CameraDesign,
    pub render: RenderSettings,
    pub tasks: TaskConfig,
    pub lambdas: Lambdas,
    /// Sensor noise applied to every synthesized capture.
    pub noise_model: NoiseSetting,
    /// None = compiled-in catalog.
    pub catalog: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub frozen: bool,
    pub pretrain_steps: usize,
    pub init: InitPreset,
    pub workers: usize,
}

fn default_base_design(experiment: Experiment, gain_db: f64) -> CameraDesign {
    match experiment {
        Experiment::StereoDepth => CameraDesign {
            pitch_deg: 0.0,
            height_m: 2.0,
            focal_mm: 3.6,
            sensor_w_mm: 6.2,
            sensor_h_mm: 4.65,
            pixel_um: 3.45,
            exposure_ms: 30.0,
            gain_db,
            baseline_m: 0.12,
            n_cameras: 2,
        },
        Experiment::MonoMr => CameraDesign {
            pitch_deg: 0.0,
            height_m: 1.5,
            focal_mm: 4.0,
            sensor_w_mm: 6.2,
            sensor_h_mm: 4.65,
            pixel_um: 3.45,
            exposure_ms: 30.0,
            gain_db,
            baseline_m: 0.0,
            n_cameras: 1,
        },
    }
}

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let experiment = match cfg.require("experiment")? {
            "stereo_depth" => Experiment::StereoDepth,
            "mono_mr" => Experiment::MonoMr,
            other => {
                return Err(ConfigError::BadValue {
                    key: "experiment".into(),
                    value: other.into(),
                    expected: "stereo_depth or mono_mr",
                })
            }
        };
        let scenario = match cfg.str_or("scenario", "day") {
            "day" => Scenario::Day,
            "night" => Scenario::Night,
            other => {
                return Err(ConfigError::BadValue {
                    key: "scenario".into(),
                    value: other.into(),
                    expected: "day or night",
                })
            }
        };
        let illum = scenario.illumination();
        let master_seed = cfg.u64_or("seed", 0)?;

        let ga_default = match experiment {
            Experiment::StereoDepth => GAConfig::stereo_default(master_seed),
            Experiment::MonoMr => GAConfig::mono_default(master_seed),
        };
        let ga = GAConfig {
            pop_size: cfg.usize_or("ga.pop_size", ga_default.pop_size)?,
            n_elites: cfg.usize_or("ga.n_elites", ga_default.n_elites)?,
            n_parents: cfg.usize_or("ga.n_parents", ga_default.n_parents)?,
            n_generations: cfg.usize_or("ga.n_generations", ga_default.n_generations)?,
            mutate_factor_range: (
                cfg.f64_or("ga.mutate_factor_lo", ga_default.mutate_factor_range.0)?,
                cfg.f64_or("ga.mutate_factor_hi", ga_default.mutate_factor_range.1)?,
            ),
            master_seed,
            frames_per_eval: cfg.usize_or("ga.frames_per_eval", ga_default.frames_per_eval)?,
        };
        ga.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let scene_default = match experiment {
            Experiment::StereoDepth => SceneSpec::outdoor_strip(0),
            Experiment::MonoMr => SceneSpec::indoor(0),
        };
        let kind = match cfg.str_or(
            "scene.kind",
            match scene_default.kind {
                SceneKind::Indoor => "indoor",
                SceneKind::OutdoorStrip => "outdoor_strip",
            },
        ) {
            "indoor" => SceneKind::Indoor,
            "outdoor_strip" => SceneKind::OutdoorStrip,
            other => {
                return Err(ConfigError::BadValue {
                    key: "scene.kind".into(),
                    value: other.into(),
                    expected: "indoor or outdoor_strip",
                })
            }
        };
        let scene = SceneSpec {
            kind,
            extent_m: (
                cfg.f64_or("scene.extent_w_m", scene_default.extent_m.0)?,
                cfg.f64_or("scene.extent_l_m", scene_default.extent_m.1)?,
                cfg.f64_or("scene.extent_h_m", scene_default.extent_m.2)?,
            ),
            min_room_length_m: cfg.f64_or("scene.min_room_length_m", scene_default.min_room_length_m)?,
            object_class_count: cfg.usize_or("scene.object_class_count", scene_default.object_class_count)?,
            obstacle_height_m: cfg.f64_or("scene.obstacle_height_m", scene_default.obstacle_height_m)?,
            illum_lux: cfg.f64_or("scene.illum_lux", illum.lux)?,
            texture_cycles_per_m: cfg.f64_or("scene.texture_cycles_per_m", scene_default.texture_cycles_per_m)?,
            seed: cfg.u64_or("scene.seed", derive(master_seed, &[Stream::Scene.tag()]))?,
        };

        let catalog = match cfg.str_or("catalog", "bundled") {
            "bundled" => None,
            path => Some(PathBuf::from(path)),
        };
        let scheme = match cfg.str_or(
            "sensor",
            match experiment {
                Experiment::StereoDepth => "none",
                Experiment::MonoMr => "quantized",
            },
        ) {
            "none" => None,
            "discrete" => Some(SensorScheme::FullyDiscrete),
            "quantized" => Some(SensorScheme::QuantizedContinuous),
            other => {
                return Err(ConfigError::BadValue {
                    key: "sensor".into(),
                    value: other.into(),
                    expected: "none, discrete, or quantized",
                })
            }
        };
        let sensor = match scheme {
            None => None,
            Some(scheme) => {
                let catalog = match &catalog {
                    None => crate::catalog::SensorCatalog::bundled(),
                    Some(path) => crate::catalog::load_catalog(path)
                        .map_err(|e| ConfigError::Invalid(format!("catalog {}: {e}", path.display())))?,
                };
                Some(SensorParam { catalog, scheme })
            }
        };

        let mut param_defs: Vec<ParamDef> = Vec::new();
        for key in cfg.keys() {
            if let Some(name) = key.strip_prefix("param.") {
                let kind = parse_param_kind(cfg.get(key).unwrap())
                    .map_err(|e| ConfigError::Invalid(format!("param.{name}: {e}")))?;
                param_defs.push(ParamDef { name: name.to_string(), kind });
            }
        }
        if param_defs.is_empty() {
            param_defs = match experiment {
                Experiment::StereoDepth => ParamSpec::stereo_preset().params,
                Experiment::MonoMr => {
                    ParamSpec::mono_preset(crate::catalog::SensorCatalog::bundled(), SensorScheme::QuantizedContinuous)
                        .params
                }
            };
        }
        let spec = ParamSpec::new(param_defs, sensor)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let bd = default_base_design(experiment, illum.gain_db);
        let base_design = CameraDesign {
            pitch_deg: cfg.f64_or("base.pitch_deg", bd.pitch_deg)?,
            height_m: cfg.f64_or("base.height_m", bd.height_m)?,
            focal_mm: cfg.f64_or("base.focal_mm", bd.focal_mm)?,
            sensor_w_mm: cfg.f64_or("base.sensor_w_mm", bd.sensor_w_mm)?,
            sensor_h_mm: cfg.f64_or("base.sensor_h_mm", bd.sensor_h_mm)?,
            pixel_um: cfg.f64_or("base.pixel_um", bd.pixel_um)?,
            exposure_ms: cfg.f64_or("base.exposure_ms", bd.exposure_ms)?,
            gain_db: cfg.f64_or("base.gain_db", bd.gain_db)?,
            baseline_m: cfg.f64_or("base.baseline_m", bd.baseline_m)?,
            n_cameras: bd.n_cameras,
        };
        if experiment == Experiment::StereoDepth {
            if base_design.baseline_m <= 0.0 {
                return Err(ConfigError::Invalid("stereo runs need base.baseline_m > 0".into()));
            }
            for def in &spec.params {
                if def.name == "baseline_m" {
                    if let ParamKind::Continuous { lo, .. } = def.kind {
                        if lo <= 0.0 {
                            return Err(ConfigError::Invalid(
                                "param.baseline_m lower bound must be positive".into(),
                            ));
                        }
                    }
                }
            }
        }

        let rd = RenderSettings::default();
        let render = RenderSettings {
            max_width: cfg.usize_or("render.max_width", rd.max_width)?,
            max_height: cfg.usize_or("render.max_height", rd.max_height)?,
            supersample: cfg.u64_or("render.supersample", rd.supersample as u64)? as u32,
            kappa: match cfg.str_or("render.kappa", "auto") {
                "auto" => None,
                v => Some(v.parse::<f64>().map_err(|_| ConfigError::BadValue {
                    key: "render.kappa".into(),
                    value: v.into(),
                    expected: "auto or a number",
                })?),
            },
            d_max: cfg.f64_or("render.d_max", rd.d_max)?,
        };

        let td = TaskConfig::default();
        let tasks = TaskConfig {
            block_window: cfg.usize_or("tasks.block_window", td.block_window)?,
            min_disparity: cfg.f64_or("tasks.min_disparity", td.min_disparity)?,
            max_corners: cfg.usize_or("tasks.max_corners", td.max_corners)?,
            ransac_iters: cfg.usize_or("tasks.ransac_iters", td.ransac_iters)?,
            ransac_inlier_px: cfg.f64_or("tasks.ransac_inlier_px", td.ransac_inlier_px)?,
            detector_score_thresh: cfg.f64_or("tasks.detector_score_thresh", td.detector_score_thresh)?,
            detector_nms_iou: cfg.f64_or("tasks.detector_nms_iou", td.detector_nms_iou)?,
            obstacle_min_px: cfg.usize_or("tasks.obstacle_min_px", td.obstacle_min_px)?,
            gt_box_min_px: cfg.usize_or("tasks.gt_box_min_px", td.gt_box_min_px)?,
            refiner_lr: cfg.f64_or("tasks.refiner_lr", td.refiner_lr)?,
            detector_lr: cfg.f64_or("tasks.detector_lr", td.detector_lr)?,
            train_steps: cfg.usize_or("tasks.train_steps", td.train_steps)?,
        };

        let ld = Lambdas::default();
        let lambdas = Lambdas {
            inlier: cfg.f64_or("lambda.inlier", ld.inlier)?,
            ratio: cfg.f64_or("lambda.ratio", ld.ratio)?,
            feature: cfg.f64_or("lambda.feature", ld.feature)?,
            od: cfg.f64_or("lambda.od", ld.od)?,
            obstacle: cfg.f64_or("lambda.obstacle", ld.obstacle)?,
        };
        for (name, v) in [
            ("lambda.inlier", lambdas.inlier),
            ("lambda.ratio", lambdas.ratio),
            ("lambda.feature", lambdas.feature),
            ("lambda.od", lambdas.od),
            ("lambda.obstacle", lambdas.obstacle),
        ] {
            if !(v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }

        let noise_model = match cfg.str_or("noise_model", "default") {
            "default" => NoiseSetting::Default,
            "none" => NoiseSetting::None,
            path => NoiseSetting::File(PathBuf::from(path)),
        };
        let init = match cfg.str_or("init", "random") {
            "random" => InitPreset::Random,
            "all_min" => InitPreset::AllMin,
            "all_max" => InitPreset::AllMax,
            other => {
                return Err(ConfigError::BadValue {
                    key: "init".into(),
                    value: other.into(),
                    expected: "random, all_min, or all_max",
                })
            }
        };

        Ok(ExperimentConfig {
            experiment,
            scenario,
            scene,
            spec,
            ga,
            base_design,
            render,
            tasks,
            lambdas,
            noise_model,
            catalog,
            out_dir: PathBuf::from(cfg.str_or("out", "out")),
            frozen: cfg.bool_or("frozen", false)?,
            pretrain_steps: cfg.usize_or("pretrain_steps", 0)?,
            init,
            workers: cfg.usize_or("workers", 1)?,
        })
    }

    /// Every knob written out explicitly; reloading the emitted config
    /// reconstructs this value exactly.
    pub fn resolved(&self) -> Config {
        let mut c = Config::default();
        c.set(
            "experiment",
            match self.experiment {
                Experiment::StereoDepth => "stereo_depth",
                Experiment::MonoMr => "mono_mr",
            },
        );
        c.set("scenario", match self.scenario {
            Scenario::Day => "day",
            Scenario::Night => "night",
        });
        c.set("seed", self.ga.master_seed);
        c.set("out", self.out_dir.display());
        c.set("workers", self.workers);
        c.set("frozen", self.frozen);
        c.set("pretrain_steps", self.pretrain_steps);
        c.set("init", match self.init {
            InitPreset::Random => "random",
            InitPreset::AllMin => "all_min",
            InitPreset::AllMax => "all_max",
        });
        c.set("sensor", match &self.spec.sensor {
            None => "none",
            Some(SensorParam { scheme: SensorScheme::FullyDiscrete, .. }) => "discrete",
            Some(SensorParam { scheme: SensorScheme::QuantizedContinuous, .. }) => "quantized",
        });
        c.set("catalog", self.catalog.as_ref().map_or("bundled".to_string(), |p| p.display().to_string()));
        c.set(
            "noise_model",
            match &self.noise_model {
                NoiseSetting::Default => "default".to_string(),
                NoiseSetting::None => "none".to_string(),
                NoiseSetting::File(p) => p.display().to_string(),
            },
        );
        for def in &self.spec.params {
            c.set(&format!("param.{}", def.name), format_param_kind(&def.kind));
        }

        c.set("ga.pop_size", self.ga.pop_size);
        c.set("ga.n_elites", self.ga.n_elites);
        c.set("ga.n_parents", self.ga.n_parents);
        c.set("ga.n_generations", self.ga.n_generations);
        c.set("ga.mutate_factor_lo", self.ga.mutate_factor_range.0);
        c.set("ga.mutate_factor_hi", self.ga.mutate_factor_range.1);
        c.set("ga.frames_per_eval", self.ga.frames_per_eval);

        c.set("scene.kind", match self.scene.kind {
            SceneKind::Indoor => "indoor",
            SceneKind::OutdoorStrip => "outdoor_strip",
        });
        c.set("scene.extent_w_m", self.scene.extent_m.0);
        c.set("scene.extent_l_m", self.scene.extent_m.1);
        c.set("scene.extent_h_m", self.scene.extent_m.2);
        c.set("scene.min_room_length_m", self.scene.min_room_length_m);
        c.set("scene.object_class_count", self.scene.object_class_count);
        c.set("scene.obstacle_height_m", self.scene.obstacle_height_m);
        c.set("scene.illum_lux", self.scene.illum_lux);
        c.set("scene.texture_cycles_per_m", self.scene.texture_cycles_per_m);
        c.set("scene.seed", self.scene.seed);

        c.set("base.pitch_deg", self.base_design.pitch_deg);
        c.set("base.height_m", self.base_design.height_m);
        c.set("base.focal_mm", self.base_design.focal_mm);
        c.set("base.sensor_w_mm", self.base_design.sensor_w_mm);
        c.set("base.sensor_h_mm", self.base_design.sensor_h_mm);
        c.set("base.pixel_um", self.base_design.pixel_um);
        c.set("base.exposure_ms", self.base_design.exposure_ms);
        c.set("base.gain_db", self.base_design.gain_db);
        c.set("base.baseline_m", self.base_design.baseline_m);

        c.set("render.max_width", self.render.max_width);
        c.set("render.max_height", self.render.max_height);
        c.set("render.supersample", self.render.supersample);
        c.set("render.kappa", self.render.kappa.map_or("auto".to_string(), |k| k.to_string()));
        c.set("render.d_max", self.render.d_max);

        c.set("tasks.block_window", self.tasks.block_window);
        c.set("tasks.min_disparity", self.tasks.min_disparity);
        c.set("tasks.max_corners", self.tasks.max_corners);
        c.set("tasks.ransac_iters", self.tasks.ransac_iters);
        c.set("tasks.ransac_inlier_px", self.tasks.ransac_inlier_px);
        c.set("tasks.detector_score_thresh", self.tasks.detector_score_thresh);
        c.set("tasks.detector_nms_iou", self.tasks.detector_nms_iou);
        c.set("tasks.obstacle_min_px", self.tasks.obstacle_min_px);
        c.set("tasks.gt_box_min_px", self.tasks.gt_box_min_px);
        c.set("tasks.refiner_lr", self.tasks.refiner_lr);
        c.set("tasks.detector_lr", self.tasks.detector_lr);
        c.set("tasks.train_steps", self.tasks.train_steps);

        c.set("lambda.inlier", self.lambdas.inlier);
        c.set("lambda.ratio", self.lambdas.ratio);
        c.set("lambda.feature", self.lambdas.feature);
        c.set("lambda.od", self.lambdas.od);
        c.set("lambda.obstacle", self.lambdas.obstacle);
        c
    }
}
