//! Experiment runner CLI: unattended optimization runs, fixed-design
//! evaluation, noise calibration/validation, catalog tooling, and plot
//! regeneration. Every command is deterministic — identical inputs and seed
//! produce bit-identical outputs — and exits 0 on success, 2 on config
//! errors, 3 on runtime failures. `CAMFORGE_LOG=off|info|debug` controls
//! stderr chatter.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand, ValueEnum};

use camforge::camera::{
    render, write_depth_pgm, write_frame_ppm, write_semantic_pgm, CameraDesign, Pose,
    RenderSettings,
};
use camforge::catalog::{load_catalog, SensorCatalog};
use camforge::config::{Config, ConfigError, ExperimentConfig, NoiseSetting};
use camforge::noise::{
    gain_db_to_lin, read_samples_csv, synthesize, NoiseModel, SynthesisMode, DEFAULT_G0_DB,
    DEFAULT_PIXEL_UM,
};
use camforge::optimize::{
    evaluate, history_csv, run_joint, EvalContext, FitnessReport, Genome, HistoryRow, ParamSpec,
    RunOutcome, RunSpec, SensorGene, SensorScheme, TaskMetrics, TaskModels,
};
use camforge::scene::{generate_scene, make_colorbar_target, plan_path};
use camforge::seed::{derive, Stream};
use camforge::svg::{LinePlot, Series};

#[derive(Parser)]
#[command(name = "camforge", version, about = "Task-driven camera design search")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the optimization described by a config file.
    Design(DesignArgs),
    /// Score a fixed design (genome file) through the evaluation pipeline.
    Eval(EvalArgs),
    /// Fit the affine noise model to (mean, variance) samples.
    Calibrate(CalibrateArgs),
    /// Check synthesized noise against the model on a colorbar target.
    ValidateNoise(ValidateNoiseArgs),
    /// List the sensor catalog or snap a query onto it.
    Catalog(CatalogArgs),
    /// Regenerate the fitness plot from a history CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Discrete,
    Quantized,
}

#[derive(Args)]
struct DesignArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation worker threads (results are identical for any count).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep the task heads fixed instead of training them jointly.
    #[arg(long)]
    frozen: bool,
    /// Sensor handling (overrides the config's `sensor`).
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
}

#[derive(Args)]
struct EvalArgs {
    /// Genome file: `param.<name> = value` lines plus sensor keys.
    genome: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Trained models to evaluate with (default: untrained heads).
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-step PPM/PGM debug frames.
    #[arg(long)]
    dump_frames: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// CSV of `mean,variance` samples.
    #[arg(long)]
    samples: PathBuf,
    /// Gain the samples were captured at.
    #[arg(long, default_value_t = DEFAULT_G0_DB)]
    g0_db: f64,
    /// Pixel pitch the samples were captured at.
    #[arg(long, default_value_t = DEFAULT_PIXEL_UM)]
    pixel_um: f64,
    /// Where to write the fitted model.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateNoiseArgs {
    /// Noise model file (default: built-in default model).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "validate_noise")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of grey bars on the target.
    #[arg(long, default_value_t = 11)]
    levels: usize,
}

#[derive(Args)]
struct CatalogArgs {
    #[command(subcommand)]
    cmd: CatalogCmd,
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// Print every sensor entry.
    List {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Snap a (width, height, pixel) query to the nearest entry.
    Snap {
        #[arg(long)]
        w_mm: f64,
        #[arg(long)]
        h_mm: f64,
        #[arg(long)]
        pixel_um: f64,
        /// Scale each component by its catalog range before measuring
        /// distance.
        #[arg(long)]
        normalized: bool,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// History CSV produced by `design`.
    #[arg(long)]
    history: PathBuf,
    #[arg(long, default_value = "fitness.svg")]
    out: PathBuf,
}

enum CliError {
    /// Bad inputs: config, flags, referenced files. Exit 2.
    Config(String),
    /// Failures after a valid setup: evaluation, output IO. Exit 3.
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn log_level() -> u8 {
    static LEVEL: OnceLock<u8> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("CAMFORGE_LOG").as_deref() {
        Ok("off") | Ok("0") => 0,
        Ok("debug") | Ok("2") => 2,
        _ => 1,
    })
}

fn info(msg: impl AsRef<str>) {
    if log_level() >= 1 {
        eprintln!("camforge: {}", msg.as_ref());
    }
}

fn debug(msg: impl AsRef<str>) {
    if log_level() >= 2 {
        eprintln!("camforge[debug]: {}", msg.as_ref());
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn make_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn load_config(path: &Path, overrides: impl FnOnce(&mut Config)) -> CliResult<ExperimentConfig> {
    let mut cfg = Config::parse(&read_file(path)?)?;
    overrides(&mut cfg);
    Ok(ExperimentConfig::from_config(&cfg)?)
}

/// Scene, path, and noise model shared by `design` and `eval`.
struct RunInputs {
    scene: camforge::scene::SceneInstance,
    path: camforge::scene::AgentPath,
    noise: Option<NoiseModel>,
}

fn prepare_inputs(exp: &ExperimentConfig) -> CliResult<RunInputs> {
    let scene = generate_scene(&exp.scene)
        .map_err(|e| CliError::Config(format!("scene generation: {e}")))?;
    let path = plan_path(&scene, exp.ga.frames_per_eval, derive(exp.ga.master_seed, &[Stream::Path.tag()]))
        .map_err(|e| CliError::Config(format!("path planning: {e}")))?;
    let noise = match &exp.noise_model {
        NoiseSetting::None => None,
        NoiseSetting::Default => Some(NoiseModel::default()),
        NoiseSetting::File(p) => Some(
            NoiseModel::load(p)
                .map_err(|e| CliError::Config(format!("noise model {}: {e}", p.display())))?,
        ),
    };
    Ok(RunInputs { scene, path, noise })
}

fn eval_context<'a>(exp: &'a ExperimentConfig, inputs: &'a RunInputs) -> EvalContext<'a> {
    EvalContext {
        experiment: exp.experiment,
        scene: &inputs.scene,
        path: &inputs.path,
        spec: &exp.spec,
        base_design: &exp.base_design,
        noise: inputs.noise.as_ref(),
        render: exp.render,
        lambdas: exp.lambdas,
        tasks: exp.tasks,
    }
}

fn genome_to_text(genome: &Genome, design: &CameraDesign, report: &FitnessReport, spec: &ParamSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# fitness = {}", report.fitness);
    let _ = writeln!(
        out,
        "# decoded: focal_mm = {}, hfov_deg = {}, pixel_um = {}",
        design.focal_mm,
        design.hfov_deg(),
        design.pixel_um
    );
    for (def, v) in spec.params.iter().zip(&genome.values) {
        let _ = writeln!(out, "param.{} = {v}", def.name);
    }
    if let (Some(sp), Some(g)) = (&spec.sensor, &genome.sensor) {
        let t = match g {
            SensorGene::Discrete { index } => sp.catalog.get(*index).triplet(),
            SensorGene::Quantized { latent, .. } => *latent,
        };
        let _ = writeln!(out, "# sensor_id = {}", sp.catalog.get(g.index()).id);
        let _ = writeln!(out, "sensor_w_mm = {}", t[0]);
        let _ = writeln!(out, "sensor_h_mm = {}", t[1]);
        let _ = writeln!(out, "sensor_pixel_um = {}", t[2]);
    }
    out
}

fn genome_from_text(text: &str, spec: &ParamSpec) -> CliResult<Genome> {
    let cfg = Config::parse(text)?;
    let mut values = Vec::with_capacity(spec.params.len());
    for def in &spec.params {
        let key = format!("param.{}", def.name);
        let v = cfg
            .require(&key)
            .map_err(CliError::from)?
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("bad value for {key}")))?;
        values.push(v);
    }
    let sensor = match &spec.sensor {
        None => None,
        Some(sp) => {
            let t = |k: &str| -> CliResult<f64> {
                cfg.require(k)
                    .map_err(CliError::from)?
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad value for {k}")))
            };
            let (w, h, p) = (t("sensor_w_mm")?, t("sensor_h_mm")?, t("sensor_pixel_um")?);
            let index = sp.catalog.snap_index(w, h, p, true);
            Some(match sp.scheme {
                SensorScheme::FullyDiscrete => SensorGene::Discrete { index },
                SensorScheme::QuantizedContinuous => SensorGene::Quantized { latent: [w, h, p], index },
            })
        }
    };
    let genome = Genome { values, sensor };
    if !genome.check(spec) {
        return Err(CliError::Config(
            "genome violates the configured parameter bounds".into(),
        ));
    }
    Ok(genome)
}

fn fitness_plot(history: &[HistoryRow]) -> LinePlot {
    let rows: Vec<(f64, f64)> = history
        .iter()
        .map(|r| (r.generation as f64, r.report.fitness))
        .collect();
    plot_from_points(&rows)
}

fn plot_from_points(rows: &[(f64, f64)]) -> LinePlot {
    let mut by_gen: Vec<(f64, f64)> = Vec::new();
    for &(g, f) in rows {
        match by_gen.last_mut() {
            Some((last_g, best)) if *last_g == g => *best = best.max(f),
            _ => by_gen.push((g, f)),
        }
    }
    let mut running = Vec::with_capacity(by_gen.len());
    let mut best = f64::NEG_INFINITY;
    for &(g, f) in &by_gen {
        best = best.max(f);
        running.push((g, best));
    }
    LinePlot {
        title: "best fitness per generation".into(),
        x_label: "generation".into(),
        y_label: "fitness".into(),
        series: vec![
            Series { label: "generation best".into(), points: by_gen, markers: true },
            Series { label: "best so far".into(), points: running, markers: false },
        ],
    }
}

fn describe_report(report: &FitnessReport) -> String {
    let mut s = format!("fitness {:.6} over {} frames\n", report.fitness, report.frames);
    match &report.metrics {
        TaskMetrics::Stereo(m) => {
            let _ = writeln!(
                s,
                "  depth: avg |log(pred/gt)| = {:.6}, rmse = {:.4} m, {} px",
                m.avg_log_error, m.rmse_m, m.n_px
            );
        }
        TaskMetrics::Mono { matching, ap, obstacles } => {
            let _ = writeln!(
                s,
                "  matching: {} inliers / {} matches (ratio {:.4})",
                matching.n_inlier,
                matching.n_total,
                matching.inlier_ratio()
            );
            let _ = writeln!(s, "  detection: AP@0.5 = {ap:.4}");
            let _ = writeln!(s, "  obstacles: {} of {} seen", obstacles.o_seen, obstacles.o_total);
        }
    }
    s
}

fn cmd_design(args: &DesignArgs) -> CliResult<()> {
    let exp = load_config(&args.config, |cfg| {
        if let Some(seed) = args.seed {
            cfg.set("seed", seed);
        }
        if let Some(w) = args.workers {
            cfg.set("workers", w);
        }
        if let Some(out) = &args.out {
            cfg.set("out", out.display());
        }
        if args.frozen {
            cfg.set("frozen", "true");
        }
        match args.scheme {
            Some(SchemeArg::Discrete) => cfg.set("sensor", "discrete"),
            Some(SchemeArg::Quantized) => cfg.set("sensor", "quantized"),
            None => {}
        }
    })?;
    let inputs = prepare_inputs(&exp)?;
    make_dir(&exp.out_dir)?;
    write_file(&exp.out_dir.join("resolved.cfg"), &exp.resolved().to_text())?;
    debug(format!("scene: {} primitives, path: {} steps", inputs.scene.primitives.len(), inputs.path.steps.len()));

    let run = RunSpec {
        experiment: exp.experiment,
        scene: inputs.scene,
        path: inputs.path,
        spec: exp.spec.clone(),
        ga: exp.ga.clone(),
        base_design: exp.base_design.clone(),
        noise: inputs.noise,
        render: exp.render,
        lambdas: exp.lambdas,
        tasks: exp.tasks,
        frozen: exp.frozen,
        pretrain_steps: exp.pretrain_steps,
        init: exp.init,
        workers: exp.workers,
    };
    let outcome: RunOutcome = match run_joint(&run) {
        Ok(o) => o,
        Err(failure) => {
            // Keep whatever record exists so the failure can be analyzed.
            let csv = history_csv(&failure.history, exp.experiment, &exp.spec);
            let _ = std::fs::write(exp.out_dir.join("history.csv"), csv);
            return Err(CliError::Runtime(failure.to_string()));
        }
    };
    write_file(
        &exp.out_dir.join("history.csv"),
        &history_csv(&outcome.history, exp.experiment, &exp.spec),
    )?;
    write_file(
        &exp.out_dir.join("best_genome.txt"),
        &genome_to_text(&outcome.best_genome, &outcome.best_design, &outcome.best_report, &exp.spec),
    )?;
    write_file(&exp.out_dir.join("models.txt"), &outcome.models.to_text())?;
    write_file(&exp.out_dir.join("fitness.svg"), &fitness_plot(&outcome.history).to_svg())?;
    info(format!(
        "run complete: best fitness {} -> {}",
        outcome.best_report.fitness,
        exp.out_dir.display()
    ));
    print!("{}", describe_report(&outcome.best_report));
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let exp = load_config(&args.config, |cfg| {
        if let Some(seed) = args.seed {
            cfg.set("seed", seed);
        }
        if let Some(out) = &args.out {
            cfg.set("out", out.display());
        }
    })?;
    let genome = genome_from_text(&read_file(&args.genome)?, &exp.spec)?;
    let models = match &args.models {
        None => TaskModels::new(exp.scene.object_class_count.max(1)),
        Some(p) => TaskModels::from_text(&read_file(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
    };
    let inputs = prepare_inputs(&exp)?;
    let ctx = eval_context(&exp, &inputs);
    let (report, _) = evaluate(&genome, &ctx, &models, exp.ga.master_seed, 0, 0)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("eval"));
    make_dir(&out_dir)?;
    let design = genome.decode(&exp.spec, &exp.base_design);
    let row = HistoryRow {
        generation: 0,
        slot: 0,
        report: report.clone(),
        genome: genome.clone(),
        design: design.clone(),
    };
    write_file(&out_dir.join("metrics.csv"), &history_csv(&[row], exp.experiment, &exp.spec))?;
    if args.dump_frames {
        for (i, step) in inputs.path.steps.iter().enumerate() {
            let z = if exp.spec.has_param("height_m") { design.height_m } else { step.camera_height_m };
            let pose = Pose {
                position: [step.position[0], step.position[1], z],
                yaw_deg: step.yaw_deg,
                pitch_deg: design.pitch_deg,
            };
            let frame = render(ctx.scene, &pose, &design, &exp.render);
            let stem = out_dir.join(format!("frame_{i:03}"));
            let io_err = |e: std::io::Error| CliError::Runtime(format!("frame dump: {e}"));
            write_frame_ppm(&frame, &stem.with_extension("ppm")).map_err(io_err)?;
            write_depth_pgm(&frame, 50.0, &out_dir.join(format!("depth_{i:03}.pgm"))).map_err(io_err)?;
            write_semantic_pgm(&frame, &out_dir.join(format!("semantic_{i:03}.pgm"))).map_err(io_err)?;
        }
        debug(format!("wrote {} debug frames", inputs.path.steps.len()));
    }
    print!("{}", describe_report(&report));
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let samples = read_samples_csv(&read_file(&args.samples)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.samples.display())))?;
    if !(args.g0_db.is_finite() && args.pixel_um > 0.0) {
        return Err(CliError::Config("g0-db must be finite and pixel-um positive".into()));
    }
    let model =
        NoiseModel::calibrate(&samples, gain_db_to_lin(args.g0_db), args.pixel_um * args.pixel_um)
            .map_err(|e| CliError::Config(format!("calibration: {e}")))?;
    model
        .save(&args.out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", args.out.display())))?;
    println!("sigma_p_sq = {}", model.sigma_p_sq);
    println!("sigma_r_sq = {}", model.sigma_r_sq);
    if model.clamped {
        info("a fitted coefficient was negative and clamped to zero");
    }
    Ok(())
}

fn cmd_validate_noise(args: &ValidateNoiseArgs) -> CliResult<()> {
    if args.levels < 2 {
        return Err(CliError::Config("need at least 2 grey levels".into()));
    }
    let model = match &args.model {
        None => NoiseModel::default(),
        Some(p) => NoiseModel::load(p)
            .map_err(|e| CliError::Config(format!("noise model {}: {e}", p.display())))?,
    };
    // Fronto-parallel colorbar wall filling the view; each bar renders to a
    // single exact grey level, so grouping by value recovers the bars.
    let scene = make_colorbar_target(args.levels);
    let design = CameraDesign {
        pitch_deg: 0.0,
        height_m: 1.0,
        focal_mm: 3.6,
        sensor_w_mm: 2.6,
        sensor_h_mm: 2.0,
        pixel_um: 10.0,
        exposure_ms: 30.0,
        gain_db: 15.0,
        baseline_m: 0.0,
        n_cameras: 1,
    };
    let pose = Pose { position: [0.0, -8.0, 1.0], yaw_deg: 90.0, pitch_deg: 0.0 };
    let settings = RenderSettings { max_width: 640, max_height: 480, ..Default::default() };
    let frame = render(&scene, &pose, &design, &settings);
    let clean = frame.exposed.to_gray();
    // Noise is synthesized per channel; statistics must pool channel samples
    // rather than the channel-averaged grey image (averaging would shrink
    // the variance threefold).
    let noisy = synthesize(&frame.exposed, &model, args.seed, SynthesisMode::Gaussian);
    let ch = noisy.channels;

    let mut levels: Vec<f64> = Vec::new();
    for px in 0..clean.data.len() {
        // Only wall pixels; the empty background renders at exactly 0.
        if frame.depth[px].is_finite() && !levels.contains(&clean.data[px]) {
            levels.push(clean.data[px]);
        }
    }
    levels.sort_by(f64::total_cmp);
    make_dir(&args.out)?;
    let mut csv = String::from("level,n_px,mean_noisy,var_empirical,var_model\n");
    let mut emp = Vec::new();
    let mut mod_pts = Vec::new();
    for &level in &levels {
        let vals: Vec<f64> = (0..clean.data.len())
            .filter(|&px| frame.depth[px].is_finite() && clean.data[px] == level)
            .flat_map(|px| noisy.data[px * ch..(px + 1) * ch].iter().copied())
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let model_var = model.variance_at(level);
        let _ = writeln!(csv, "{level},{},{mean},{var},{model_var}", vals.len());
        emp.push((level, var));
        mod_pts.push((level, model_var));
    }
    write_file(&args.out.join("validate_noise.csv"), &csv)?;
    let plot = LinePlot {
        title: "synthesized noise vs model".into(),
        x_label: "grey level".into(),
        y_label: "variance".into(),
        series: vec![
            Series { label: "empirical".into(), points: emp, markers: true },
            Series { label: "model".into(), points: mod_pts, markers: false },
        ],
    };
    write_file(&args.out.join("validate_noise.svg"), &plot.to_svg())?;
    info(format!("validated {} grey levels -> {}", levels.len(), args.out.display()));
    Ok(())
}

fn open_catalog(path: &Option<PathBuf>) -> CliResult<SensorCatalog> {
    match path {
        None => Ok(SensorCatalog::bundled()),
        Some(p) => {
            load_catalog(p).map_err(|e| CliError::Config(format!("catalog {}: {e}", p.display())))
        }
    }
}

fn cmd_catalog(args: &CatalogArgs) -> CliResult<()> {
    match &args.cmd {
        CatalogCmd::List { catalog } => {
            let cat = open_catalog(catalog)?;
            println!("id,manufacturer,sensor_w_mm,sensor_h_mm,pixel_um");
            for e in cat.entries() {
                println!("{},{},{},{},{}", e.id, e.manufacturer, e.sensor_w_mm, e.sensor_h_mm, e.pixel_um);
            }
        }
        CatalogCmd::Snap { w_mm, h_mm, pixel_um, normalized, catalog } => {
            if !(*w_mm > 0.0 && *h_mm > 0.0 && *pixel_um > 0.0) {
                return Err(CliError::Config("query components must be positive".into()));
            }
            let cat = open_catalog(catalog)?;
            let e = cat.snap(*w_mm, *h_mm, *pixel_um, *normalized);
            println!("{} ({}) {} x {} mm @ {} um", e.id, e.manufacturer, e.sensor_w_mm, e.sensor_h_mm, e.pixel_um);
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let text = read_file(&args.history)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Config("empty history CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let gi = cols.iter().position(|c| *c == "generation");
    let fi = cols.iter().position(|c| *c == "fitness");
    let (gi, fi) = match (gi, fi) {
        (Some(g), Some(f)) => (g, f),
        _ => return Err(CliError::Config("history CSV needs generation and fitness columns".into())),
    };
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> CliResult<f64> {
            fields
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("history CSV line {}: bad row", ln + 2)))
        };
        rows.push((parse(gi)?, parse(fi)?));
    }
    if rows.is_empty() {
        return Err(CliError::Config("history CSV has no data rows".into()));
    }
    write_file(&args.out, &plot_from_points(&rows).to_svg())?;
    info(format!("plotted {} rows -> {}", rows.len(), args.out.display()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Design(a) => cmd_design(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Calibrate(a) => cmd_calibrate(a),
        Cmd::ValidateNoise(a) => cmd_validate_noise(a),
        Cmd::Catalog(a) => cmd_catalog(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("camforge: config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("camforge: {msg}");
            ExitCode::from(3)
        }
    }
}
