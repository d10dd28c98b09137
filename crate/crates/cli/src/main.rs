//! `gazehead`: generate synthetic trials, train and evaluate head
//! controllers, replay gaze through the exoskeleton loop, summarize results.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use gazehead::checkpoint::{load_controller, save_controller};
use gazehead::dataset::{self, load_trajectories, save_trajectory, synth::generate_participant, TaskConfig};
use gazehead::exosim::{eye_stream, simulate, write_pose_csv, ExoConfig, ExoLimits};
use gazehead::rollout::{evaluate_suite, precompute_focal_points, rollout};
use gazehead::{seed, ControllerSpec, ModelSpec, RolloutConfig, SplitSpec, Task, TrainConfig, Trajectory};

#[derive(Debug, Parser)]
#[command(name = "gazehead", version, about = "Gaze-driven head movement controllers")]
struct Cli {
    /// Global seed; every random stream is derived from it and a job id.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic trials with the idealized head-follow subject.
    Generate(GenerateArgs),
    /// Train one controller family and write a checkpoint.
    Train(TrainArgs),
    /// Roll one controller over trajectories and keep the imputed paths.
    Rollout(RolloutArgs),
    /// Roll several controllers over a test set and tabulate MSE.
    Evaluate(EvaluateArgs),
    /// Replay a gaze stream through the exoskeleton control loop.
    Exosim(ExosimArgs),
    /// Summarize evaluation outputs into tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Only this task; without it trials cycle through all four.
    #[arg(long)]
    task: Option<Task>,
    #[arg(long, default_value_t = 25)]
    participants: u32,
    /// Trials per participant.
    #[arg(long, default_value_t = dataset::TRIALS_PER_PARTICIPANT)]
    trials: u32,
    /// Trial length, s.
    #[arg(long, default_value_t = 90.0)]
    duration: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = dataset::BASE_RATE_HZ)]
    rate: f64,
    /// Rapid-task approach speed, m/s.
    #[arg(long, default_value_t = 1.0)]
    approach_speed: f64,
    /// Output directory, one `.jsonl` per trial.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Vector,
    Mlp,
    Lstm,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// JSON `{"train_ids": [...], "test_ids": [...]}`. Default: the lowest
    /// 72% of participant ids train, the rest test.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Hidden sizes, comma separated [default: 8; LSTM takes one size].
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Feed the LSTM head-relative gaze only (6 inputs) instead of 9.
    #[arg(long)]
    lstm_six_inputs: bool,
    /// Fit separate vector laws for positive and negative angles.
    #[arg(long)]
    asymmetric: bool,
    /// Trajectory file or directory.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Adam step size for network weights.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Adam step size for vector-law parameters.
    #[arg(long, default_value_t = 0.05)]
    vector_lr: f64,
    /// Stop when train MSE improves by less than this over `patience` epochs.
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    min_improvement: f64,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    /// Train networks on raw targets instead of unit-RMS targets.
    #[arg(long)]
    raw_targets: bool,
    /// Samples per LSTM tick (2 gives 45 Hz on 90 Hz data).
    #[arg(long, default_value_t = 2)]
    lstm_downsample: usize,
    /// Controller name [default: derived from family and sizes].
    #[arg(long)]
    name: Option<String>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Training report path [default: checkpoint path with `.report.json`].
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// Gaze noise scale per eye, degrees.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Truncate every trajectory to this many samples.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct RolloutArgs {
    /// Checkpoint path or `quadrant`.
    #[arg(long)]
    controller: String,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Output directory: `rollouts.json` and `steps.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Checkpoint path or `quadrant`; repeat for several controllers.
    #[arg(long, required = true)]
    controller: Vec<String>,
    #[arg(long)]
    data: PathBuf,
    /// Evaluate only the test participants of this split.
    #[arg(long)]
    split: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Also write per-step errors (`steps.csv`).
    #[arg(long)]
    keep_steps: bool,
    /// Output directory: `suite.json`, `scores.csv`, `steps.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExosimArgs {
    /// Checkpoint path or `quadrant`.
    #[arg(long)]
    controller: String,
    /// Recorded trajectory file; its first trial is replayed.
    #[arg(long, conflicts_with = "task", required_unless_present = "task")]
    data: Option<PathBuf>,
    /// Replay a freshly generated synthetic trial of this task instead.
    #[arg(long)]
    task: Option<Task>,
    /// Synthetic trial length, s.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    /// Flexion limit, degrees.
    #[arg(long, default_value_t = 25.0)]
    flexion_max: f64,
    /// Extension limit, degrees (negative).
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    extension_max: f64,
    /// Yaw limit either side, degrees.
    #[arg(long, default_value_t = 30.0)]
    yaw_max: f64,
    /// Joint speed cap, rad/s.
    #[arg(long, default_value_t = 1.0)]
    max_speed: f64,
    /// Cap each axis separately instead of the joint speed.
    #[arg(long)]
    per_axis: bool,
    /// Eye-angle smoothing factor in (0, 1].
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Eye tracker rate, Hz.
    #[arg(long, default_value_t = 200.0)]
    sensor_rate: f64,
    /// Control loop rate, Hz.
    #[arg(long, default_value_t = 50.0)]
    control_rate: f64,
    /// Pose log CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// `suite.json`, score CSVs or per-step CSVs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory: `summary.csv`, `distribution.csv`, `summary.json`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        log::warn!("thread pool: {e}");
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a, cli.seed),
        Command::Train(a) => train(a, cli.seed),
        Command::Rollout(a) => rollout_cmd(a, cli.seed),
        Command::Evaluate(a) => evaluate(a, cli.seed),
        Command::Exosim(a) => exosim(a, cli.seed),
        Command::Report(a) => report(a),
    }
}

fn require_exists(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<Vec<Trajectory>> {
    require_exists(path)?;
    let trajs = load_trajectories(path).with_context(|| format!("loading {}", path.display()))?;
    if trajs.is_empty() {
        bail!("no trajectories in {}", path.display());
    }
    log::info!("loaded {} trajectories from {}", trajs.len(), path.display());
    Ok(trajs)
}

fn read_split(path: Option<&Path>, trajs: &[Trajectory]) -> Result<SplitSpec> {
    match path {
        Some(p) => {
            require_exists(p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing split {}", p.display()))
        }
        None => Ok(SplitSpec::proportional(trajs.iter().map(|t| t.participant))),
    }
}

fn generate(a: &GenerateArgs, global_seed: u64) -> Result<()> {
    let config = TaskConfig {
        duration: a.duration,
        rate_hz: a.rate,
        approach_speed: a.approach_speed,
        ..TaskConfig::default()
    };
    config.validate()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let written: Vec<usize> = (0..a.participants)
        .into_par_iter()
        .map(|p| -> Result<usize> {
            let trajs = generate_participant(p, a.task, a.trials, &config, global_seed)?;
            for t in &trajs {
                save_trajectory(&a.out.join(t.file_name()), t)?;
            }
            Ok(trajs.len())
        })
        .collect::<Result<_>>()?;
    log::info!("wrote {} trajectories to {}", written.iter().sum::<usize>(), a.out.display());
    Ok(())
}

fn model_spec(a: &TrainArgs) -> Result<ModelSpec> {
    Ok(match a.family {
        FamilyArg::Vector => ModelSpec::Vector {
            symmetric: !a.asymmetric,
        },
        FamilyArg::Mlp => ModelSpec::Mlp {
            hidden: if a.hidden.is_empty() { vec![8] } else { a.hidden.clone() },
        },
        FamilyArg::Lstm => {
            let hidden = match a.hidden.as_slice() {
                [] => 8,
                [h] => *h,
                _ => bail!("the LSTM takes a single hidden size"),
            };
            ModelSpec::Lstm {
                hidden,
                input: if a.lstm_six_inputs { 6 } else { 9 },
            }
        }
    })
}

fn train(a: &TrainArgs, global_seed: u64) -> Result<()> {
    let model = model_spec(a)?;
    let trajs = load(&a.data)?;
    let split = read_split(a.split.split.as_deref(), &trajs)?;
    let (train_set, test_set) = dataset::split(trajs, &split)?;
    if train_set.is_empty() {
        bail!("split leaves no training trajectories");
    }
    let config = TrainConfig {
        model,
        name: a.name.clone(),
        learning_rate: a.lr,
        vector_learning_rate: a.vector_lr,
        epochs: a.epochs,
        seed: global_seed,
        lstm_downsample: a.lstm_downsample,
        min_improvement: a.min_improvement,
        patience: a.patience,
        scale_targets: !a.raw_targets,
    };
    let report_path = a.report.clone().unwrap_or_else(|| a.out.with_extension("report.json"));
    create_parent(&a.out)?;
    create_parent(&report_path)?;
    let (spec, mut report) = gazehead::training::fit(&config, &train_set, &test_set)?;
    save_controller(&a.out, &spec, Some(config))?;
    // Wall time is the one non-reproducible field; keep it out of the file.
    let wall = std::mem::take(&mut report.wall_time_s);
    write_json(&report_path, &report)?;
    log::info!("{} trained in {wall:.1} s", spec.name);
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn load_controllers(args: &[String]) -> Result<Vec<ControllerSpec>> {
    let specs: Vec<ControllerSpec> = args
        .iter()
        .map(|c| load_controller(c).with_context(|| format!("loading controller {c}")))
        .collect::<Result<_>>()?;
    let mut names = BTreeSet::new();
    for s in &specs {
        if !names.insert(s.name.as_str()) {
            bail!("two controllers are named {}; rename one (train --name)", s.name);
        }
    }
    Ok(specs)
}

fn rollout_config(n: &NoiseArgs, global_seed: u64, keep_steps: bool) -> Result<RolloutConfig> {
    if !(n.noise >= 0.0 && n.noise.is_finite()) {
        bail!("--noise must be a non-negative number");
    }
    Ok(RolloutConfig {
        noise_sigma_deg: n.noise,
        seed: global_seed,
        max_steps: n.max_steps,
        keep_steps,
        ..RolloutConfig::default()
    })
}

fn rollout_cmd(a: &RolloutArgs, global_seed: u64) -> Result<()> {
    let spec = load_controller(&a.controller).with_context(|| format!("loading controller {}", a.controller))?;
    let trajs = load(&a.data)?;
    let config = rollout_config(&a.noise, global_seed, true)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let results = trajs
        .par_iter()
        .map(|t| {
            let t = dataset::repair_blinks(t)?;
            let focal = precompute_focal_points(&t)?;
            Ok(rollout(&mut spec.runner(), &t, &focal, &config)?)
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&a.out.join("rollouts.json"), &results)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(a.out.join("steps.csv"))?));
    w.write_record(["trajectory", "step", "ix", "iy", "iz", "tx", "ty", "tz", "error"])?;
    for r in &results {
        for (k, ((i, t), e)) in r.imputed.iter().zip(&r.truth).zip(&r.errors).enumerate() {
            let rec = [i.x, i.y, i.z, t.x, t.y, t.z, *e].map(|v| format!("{v:?}"));
            w.write_field(&r.trajectory)?;
            w.write_field(k.to_string())?;
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    for r in &results {
        if let Some(f) = &r.fault {
            log::warn!("{}: controller fault: {f}", r.trajectory);
        }
        println!("{}\t{}\t{:.6e}", spec.name, r.trajectory, r.mse);
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, global_seed: u64) -> Result<()> {
    let specs = load_controllers(&a.controller)?;
    let mut trajs = load(&a.data)?;
    if let Some(p) = &a.split {
        let split = read_split(Some(p), &trajs)?;
        trajs = dataset::split(trajs, &split)?.1;
        if trajs.is_empty() {
            bail!("split has no test trajectories");
        }
    }
    let config = rollout_config(&a.noise, global_seed, a.keep_steps)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let suite = evaluate_suite(&specs, &trajs, &config)?;
    suite.save(&a.out).with_context(|| format!("writing results to {}", a.out.display()))?;
    let summary = gazehead::report::summarize(&[a.out.join("suite.json")]);
    print!("{}", summary.to_text());
    Ok(())
}

fn exosim(a: &ExosimArgs, global_seed: u64) -> Result<()> {
    let spec = load_controller(&a.controller).with_context(|| format!("loading controller {}", a.controller))?;
    let config = ExoConfig {
        limits: ExoLimits {
            flexion_max: a.flexion_max,
            extension_max: a.extension_max,
            yaw_max: a.yaw_max,
            max_speed: a.max_speed,
            per_axis: a.per_axis,
        },
        alpha: a.alpha,
        sensor_rate_hz: a.sensor_rate,
        control_rate_hz: a.control_rate,
    };
    config.limits.validate().map_err(anyhow::Error::msg)?;
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        bail!("--alpha must be in (0, 1]");
    }
    if !(a.sensor_rate > 0.0 && a.control_rate > 0.0) {
        bail!("rates must be positive");
    }
    let traj = match (&a.data, a.task) {
        (Some(path), _) => load(path)?.swap_remove(0),
        (None, Some(task)) => {
            let cfg = TaskConfig {
                duration: a.duration,
                ..TaskConfig::default()
            };
            let s = seed::derive_seed(global_seed, &format!("exosim/{task}"));
            dataset::generate_task(task, &cfg, s)?.oracle
        }
        (None, None) => unreachable!("clap requires --data or --task"),
    };
    let traj = dataset::repair_blinks(&traj)?;
    let stream = eye_stream(&traj, a.sensor_rate);
    create_parent(&a.out)?;
    let log = simulate(&mut spec.runner(), &stream, &config);
    write_pose_csv(BufWriter::new(File::create(&a.out)?), &log)?;
    let saturated = log.iter().filter(|r| r.sat_pitch || r.sat_yaw).count();
    if log.last().is_some_and(|r| r.fault) {
        log::warn!("controller faulted; pose held from the fault on");
    }
    log::info!("{} ticks, {saturated} saturated", log.len());
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let summary = gazehead::report::summarize(&a.inputs);
    if summary.rows.is_empty() {
        print!("{}", summary.to_text());
        bail!("no usable inputs");
    }
    summary.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{}", summary.to_text());
    Ok(())
}
