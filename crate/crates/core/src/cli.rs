//! Command-line front end: `simulate`, `denoise`, `evaluate` and `sweep`.
//!
//! Output directories follow a fixed layout:
//! `events/` (event streams, camera, ground truth), `labels/`, `iwe/`
//! (PGM images) and `metrics/` (JSON, CSV).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{baf_filter, random_downsample, BafConfig};
use crate::cmax::{MotionEstimate, OptimizerConfig};
use crate::denoise::{joint_estimate, ScoreKind};
use crate::event::{CameraModel, Event, EventSlice, LabelSet};
use crate::io;
use crate::iwe::{accumulate_masked, Objective};
use crate::metrics::{angvel_rms, flow_epe, fwl, precision_recall, roc_auc, FlowField};
use crate::sim::{generate_scene, inject_ba_noise, noise_rate_for_fraction, LabeledSlice, Pattern, SceneSpec};
use crate::warp::{warp_events, MotionParams, TileFlow, DEFAULT_TILE_SIZE};

#[derive(Debug, Parser)]
#[command(name = "cmax-denoise", version, about = "Joint event denoising and motion estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic event stream.
    Simulate(SimulateArgs),
    /// Label events as signal or noise, estimating motion along the way.
    Denoise(DenoiseArgs),
    /// Score a label file against ground truth.
    Evaluate(EvaluateArgs),
    /// Run the joint method over a grid of signal ratios and noise rates.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternArg {
    Bar,
    Star,
    TwoDepth,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SceneArgs {
    #[arg(long, value_enum, default_value = "star")]
    pub pattern: PatternArg,
    /// Star arm count.
    #[arg(long, default_value_t = 8)]
    pub arms: u32,
    #[arg(long, default_value_t = 1.0)]
    pub near_density: f64,
    #[arg(long, default_value_t = 0.2)]
    pub far_density: f64,
    /// Ground-truth angular velocity `wx,wy,wz` in rad/s.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_negative_numbers = true, default_values_t = [0.0, 0.0, 2.0])]
    pub omega: Vec<f64>,
    /// Uniform ground-truth flow `vx,vy` in px/s; replaces the rotation.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    pub flow: Option<Vec<f64>>,
    /// Tile size of the ground-truth flow grid, px.
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    pub gt_tile_size: u32,
    /// Seconds.
    #[arg(long, default_value_t = 0.2)]
    pub duration: f64,
    /// Event rate of an edge pixel, Hz.
    #[arg(long, default_value_t = 400.0)]
    pub edge_rate: f64,
    #[arg(long, default_value_t = 200)]
    pub width: u32,
    #[arg(long, default_value_t = 200)]
    pub height: u32,
    #[arg(long, default_value_t = 200.0)]
    pub focal: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the noise generator, defaults to `seed + 1`.
    #[arg(long)]
    pub noise_seed: Option<u64>,
}

impl SceneArgs {
    fn spec(&self) -> Result<SceneSpec> {
        let sensor = CameraModel::centered(self.width, self.height, self.focal)?;
        let pattern = match self.pattern {
            PatternArg::Bar => Pattern::Bar,
            PatternArg::Star => Pattern::Star { arms: self.arms },
            PatternArg::TwoDepth => Pattern::TwoDepth { near_density: self.near_density, far_density: self.far_density },
        };
        let motion = match &self.flow {
            Some(v) => MotionParams::TileFlow(TileFlow::uniform(self.width, self.height, self.gt_tile_size, [v[0], v[1]])?),
            None => MotionParams::angular(self.omega[0], self.omega[1], self.omega[2]),
        };
        Ok(SceneSpec { pattern, motion, duration: self.duration, events_per_edge_pixel: self.edge_rate, sensor, seed: self.seed })
    }

    fn resolve(&mut self) {
        self.noise_seed.get_or_insert(self.seed.wrapping_add(1));
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Background-activity noise rate, Hz per pixel.
    #[arg(long, conflicts_with = "noise_fraction")]
    pub noise_hz: Option<f64>,
    /// Target expected noise share of the output stream, in [0, 1).
    #[arg(long)]
    pub noise_fraction: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    #[serde(skip)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Joint,
    Baf,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionArg {
    Rotation,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreArg {
    LocalContrast,
    SignalRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    GradientMagnitude,
    Variance,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimationArgs {
    /// Target signal ratio in (0, 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// IWE kernel width, px.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "local-contrast")]
    pub score: ScoreArg,
    #[arg(long, value_enum, default_value = "rotation")]
    pub motion: MotionArg,
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    pub tile_size: u32,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "gradient-magnitude")]
    pub objective: ObjectiveArg,
}

impl EstimationArgs {
    fn optimizer(&self, sensor: &CameraModel) -> Result<OptimizerConfig> {
        let initial_params = match self.motion {
            MotionArg::Rotation => MotionParams::angular(0.0, 0.0, 0.0),
            MotionArg::Flow => MotionParams::TileFlow(TileFlow::for_sensor(sensor, self.tile_size)?),
        };
        let objective = match self.objective {
            ObjectiveArg::GradientMagnitude => Objective::GradientMagnitude,
            ObjectiveArg::Variance => Objective::Variance,
        };
        let cfg = OptimizerConfig { max_iters: self.max_iters, epsilon: self.epsilon, objective, initial_params, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    fn score_kind(&self) -> ScoreKind {
        match self.score {
            ScoreArg::LocalContrast => ScoreKind::LocalContrast,
            ScoreArg::SignalRatio => ScoreKind::SignalRatio,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Camera file. Without one the sensor is sized from the events, which only suits flow and baselines.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "joint")]
    pub method: Method,
    /// Seed of the initial random split (joint) or of the sample (random).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// BAF support window, seconds.
    #[arg(long, default_value_t = 5e-3)]
    pub baf_window: f64,
    /// BAF Chebyshev radius, px.
    #[arg(long, default_value_t = 1)]
    pub baf_radius: u32,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    /// Ground-truth sidecar written by `simulate`.
    #[arg(long)]
    pub gt: PathBuf,
    /// Motion estimate JSON written by `denoise`.
    #[arg(long)]
    pub motion: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.8, 0.7, 0.6, 0.5])]
    pub taus: Vec<f64>,
    /// Noise rates, Hz per pixel.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0])]
    pub rates: Vec<f64>,
    /// Record wall time per run; otherwise the runtime column is `nan` and the CSV is reproducible.
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub dump_config: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn dump<T: Serialize>(cfg: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(cfg)?);
    Ok(())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn gt_info(ls: &LabeledSlice) -> io::GroundTruthInfo {
    io::GroundTruthInfo { motion: ls.gt_motion.clone(), noise_hz: ls.injected_noise_rate, duration: ls.duration }
}

pub fn cmd_simulate(mut a: SimulateArgs) -> Result<()> {
    a.scene.resolve();
    if a.dump_config {
        return dump(&a);
    }
    let clean = generate_scene(&a.scene.spec()?)?;
    let rate = match (a.noise_hz, a.noise_fraction) {
        (Some(hz), _) => hz,
        (None, Some(eta)) => {
            if !(0.0..1.0).contains(&eta) {
                bail!("--noise-fraction must lie in [0, 1)");
            }
            noise_rate_for_fraction(eta, clean.signal_count(), clean.duration, &clean.slice.sensor)
        }
        (None, None) => 0.0,
    };
    let ls = inject_ba_noise(&clean, rate, a.scene.noise_seed.expect("resolved"))?;
    write(&a.out.join("events/events.txt"), io::write_events(&ls.slice.events))?;
    write(&a.out.join("events/camera.txt"), io::write_camera(&ls.slice.sensor))?;
    write(&a.out.join("events/gt.txt"), io::write_ground_truth(&gt_info(&ls), &ls.gt_labels))?;
    let n = ls.slice.len();
    println!(
        "events: {n}\nnoise events: {}\nnoise fraction: {:.4}\nnoise rate: {rate} Hz/px",
        ls.noise_count(),
        if n == 0 { 0.0 } else { ls.noise_count() as f64 / n as f64 }
    );
    Ok(())
}

fn load_slice(events: &Path, camera: Option<&Path>) -> Result<EventSlice> {
    let events = io::parse_events(&read(events)?).with_context(|| format!("parsing {}", events.display()))?;
    let sensor = match camera {
        Some(p) => io::parse_camera(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => inferred_camera(&events)?,
    };
    Ok(EventSlice::new(events, sensor)?)
}

fn inferred_camera(events: &[Event]) -> Result<CameraModel> {
    let w = events.iter().map(|e| e.x + 1).max().unwrap_or(1);
    let h = events.iter().map(|e| e.y + 1).max().unwrap_or(1);
    Ok(CameraModel::centered(w, h, w.max(h) as f64)?)
}

fn require_tau(tau: Option<f64>) -> Result<f64> {
    match tau {
        Some(t) if t > 0.0 && t <= 1.0 => Ok(t),
        Some(t) => bail!("--tau must lie in (0, 1], got {t}"),
        None => bail!("--tau is required for this method"),
    }
}

fn write_iwes(out: &Path, slice: &EventSlice, motion: &MotionParams, labels: &LabelSet, epsilon: f64) -> Result<()> {
    let identity = warp_events(slice, &MotionParams::Identity)?;
    let warped = warp_events(slice, motion)?;
    let mask = labels.signal_mask();
    let images = [
        ("identity.pgm", accumulate_masked(&identity, None, &slice.sensor, epsilon)?),
        ("warped_all.pgm", accumulate_masked(&warped, None, &slice.sensor, epsilon)?),
        ("warped_signal.pgm", accumulate_masked(&warped, Some(&mask), &slice.sensor, epsilon)?),
    ];
    for (name, iwe) in images {
        write(&out.join("iwe").join(name), iwe.to_pgm())?;
    }
    Ok(())
}

pub fn cmd_denoise(mut a: DenoiseArgs) -> Result<()> {
    if a.method != Method::Baf {
        a.estimation.tau = Some(require_tau(a.estimation.tau)?);
    }
    if a.dump_config {
        return dump(&a);
    }
    if a.method == Method::Joint && a.estimation.motion == MotionArg::Rotation && a.camera.is_none() {
        bail!("rotational motion needs --camera");
    }
    let slice = load_slice(&a.events, a.camera.as_deref())?;
    let est = &a.estimation;
    let (labels, motion) = match a.method {
        Method::Joint => {
            let cfg = est.optimizer(&slice.sensor)?;
            let r = joint_estimate(&slice, est.tau.expect("checked"), est.score_kind(), &cfg, a.seed)?;
            write(&a.out.join("metrics/history.csv"), io::history_csv(&r.history))?;
            write(&a.out.join("metrics/motion.json"), format!("{}\n", serde_json::to_string_pretty(&r.motion)?))?;
            (r.labels, Some(r.motion))
        }
        Method::Baf => {
            let cfg = BafConfig { time_window: a.baf_window, neighborhood_radius: a.baf_radius };
            if !cfg.is_valid() {
                bail!("BAF needs a positive window and radius >= 1");
            }
            (baf_filter(&slice, &cfg), None)
        }
        Method::Random => (random_downsample(&slice, est.tau.expect("checked"), a.seed), None),
    };
    write(&a.out.join("labels/labels.txt"), io::write_labels(&labels))?;
    write(&a.out.join("events/denoised.txt"), io::write_events(&slice.select(&labels.signal_mask())))?;
    let params = motion.as_ref().map_or(MotionParams::Identity, |m| m.params.clone());
    write_iwes(&a.out, &slice, &params, &labels, est.epsilon)?;
    println!("events: {}\nsignal: {}", slice.len(), labels.signal_count());
    if let Some(m) = &motion {
        println!("iterations: {}\nconverged: {}", m.iterations_used, m.converged);
        if let Some(w) = m.params.angular_velocity() {
            println!("omega: {} {} {}", w[0], w[1], w[2]);
        }
    }
    Ok(())
}

/// Motion-error metrics against the ground truth, keyed by name.
fn motion_errors(gt: &MotionParams, est: &MotionParams, duration: f64) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    match (gt.angular_velocity(), est.angular_velocity(), gt, est) {
        (Some(g), Some(e), _, _) => {
            out.insert("angvel_rms_deg".into(), angvel_rms(&[e], &[g])?);
        }
        (_, _, MotionParams::TileFlow(g), MotionParams::TileFlow(e)) => {
            let mask = vec![true; (g.width * g.height) as usize];
            let (epe, outliers) = flow_epe(e, &FlowField::Tile(g.clone()), &mask, duration)?;
            out.insert("epe_px".into(), epe);
            out.insert("outlier_pct".into(), outliers);
        }
        _ => {}
    }
    Ok(out)
}

pub fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    if a.dump_config {
        return dump(&a);
    }
    let gt = io::parse_ground_truth(&read(&a.gt)?).with_context(|| format!("parsing {}", a.gt.display()))?;
    let labels = io::parse_labels(&read(&a.labels)?).with_context(|| format!("parsing {}", a.labels.display()))?;
    let slice = load_slice(&a.events, a.camera.as_deref())?;
    if labels.len() != gt.labels.len() || labels.len() != slice.len() {
        bail!(
            "index mismatch: {} labels, {} ground-truth labels, {} events",
            labels.len(),
            gt.labels.len(),
            slice.len()
        );
    }
    let estimate: Option<MotionEstimate> = match &a.motion {
        Some(p) => Some(serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?),
        None => None,
    };
    let roc = roc_auc(&labels.scores, &gt.labels)?;
    let (precision, recall) = precision_recall(&labels, &gt.labels)?;
    let mut m = BTreeMap::new();
    m.insert("auc".to_string(), roc.auc);
    m.insert("precision".to_string(), precision);
    m.insert("recall".to_string(), recall);
    m.insert("signal_fraction".to_string(), labels.signal_count() as f64 / labels.len().max(1) as f64);
    let mask = labels.signal_mask();
    if mask.iter().any(|&s| s) {
        let params = estimate.as_ref().map_or(&gt.info.motion, |e| &e.params);
        m.insert("fwl".to_string(), fwl(&slice, params, &mask, a.epsilon)?);
    }
    if let Some(e) = &estimate {
        m.extend(motion_errors(&gt.info.motion, &e.params, gt.info.duration)?);
    }
    write(&a.out.join("metrics/metrics.json"), io::metrics_json(&m))?;
    write(&a.out.join("metrics/roc.csv"), io::roc_csv(&roc))?;
    for (k, v) in &m {
        println!("{k}: {v}");
    }
    Ok(())
}

fn fmt_csv(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

pub fn cmd_sweep(mut a: SweepArgs) -> Result<()> {
    a.scene.resolve();
    for &t in &a.taus {
        require_tau(Some(t))?;
    }
    if a.dump_config {
        return dump(&a);
    }
    let mut csv = String::from("# sweep v1\ntau,noise_hz,auc,fwl,rms,runtime\n");
    let clean = generate_scene(&a.scene.spec()?)?;
    for &rate in &a.rates {
        let ls = inject_ba_noise(&clean, rate, a.scene.noise_seed.expect("resolved"))?;
        let cfg = a.estimation.optimizer(&ls.slice.sensor)?;
        for &tau in &a.taus {
            let start = Instant::now();
            let r = joint_estimate(&ls.slice, tau, a.estimation.score_kind(), &cfg, a.scene.seed)?;
            let runtime = if a.timing { start.elapsed().as_secs_f64() } else { f64::NAN };
            let auc = roc_auc(&r.labels.scores, &ls.gt_labels).map_or(f64::NAN, |roc| roc.auc);
            let sharp = fwl(&ls.slice, &r.motion.params, &r.labels.signal_mask(), cfg.epsilon).unwrap_or(f64::NAN);
            let errors = motion_errors(&ls.gt_motion, &r.motion.params, ls.duration)?;
            let rms = errors.get("angvel_rms_deg").or(errors.get("epe_px")).copied().unwrap_or(f64::NAN);
            csv.push_str(&format!(
                "{tau},{rate},{},{},{},{}\n",
                fmt_csv(auc),
                fmt_csv(sharp),
                fmt_csv(rms),
                fmt_csv(runtime)
            ));
        }
    }
    write(&a.out.join("metrics/sweep.csv"), &csv)?;
    println!("runs: {}", a.taus.len() * a.rates.len());
    Ok(())
}
