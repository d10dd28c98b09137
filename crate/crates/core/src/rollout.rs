//! Closed-loop replay of recorded trials.
//!
//! The recorded binocular gaze is reduced to a sequence of focal points.
//! A virtual head, pinned to the recorded head position, starts at the
//! recorded orientation; each step its simulated eyes fixate the focal point
//! through a little angular noise and the controller turns the head. The
//! score is the squared distance between the virtual and recorded head
//! directions.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerSpec, Family, GazeInput, HeadPolicy};
use crate::dataset::{repair_blinks, Task, Trajectory};
use crate::error::RolloutError;
use crate::geometry::{focal_point, rotate_head, HeadOrientation, Ray, Vec3};
use crate::seed;
use crate::training::{prepare, teacher_forced_set};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    /// Scale of the per-eye angular gaze noise, degrees.
    pub noise_sigma_deg: f64,
    pub seed: u64,
    /// Samples between controller ticks. `None` derives it from the
    /// controller's tick rate (every second sample for a 45 Hz LSTM).
    pub tick_every: Option<usize>,
    /// Truncate every trial to at most this many samples.
    pub max_steps: Option<usize>,
    /// Keep per-step errors in suite reports.
    pub keep_steps: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            noise_sigma_deg: 0.5,
            seed: 0,
            tick_every: None,
            max_steps: None,
            keep_steps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub trajectory: String,
    pub task: Task,
    pub imputed: Vec<Vec3>,
    pub truth: Vec<Vec3>,
    /// `|imputed - truth|^2` per step, in `[0, 4]`.
    pub errors: Vec<f64>,
    pub mse: f64,
    /// Set when the controller faulted; the result stops at that step.
    pub fault: Option<String>,
    /// Steps on which the head hit its pitch limit.
    pub saturated_steps: usize,
}

/// One focal point per sample. Parallel gaze inherits the previous point.
pub fn precompute_focal_points(traj: &Trajectory) -> Result<Vec<Vec3>, RolloutError> {
    let mut out: Vec<Vec3> = Vec::with_capacity(traj.len());
    for s in &traj.samples {
        let fp = focal_point(
            &Ray::new(s.left_origin, s.left_dir),
            &Ray::new(s.right_origin, s.right_dir),
        );
        if fp.degenerate {
            match out.last() {
                Some(&p) => out.push(p),
                None => return Err(RolloutError::DegenerateFirstSample),
            }
        } else {
            out.push(fp.point);
        }
    }
    Ok(out)
}

/// Rotates `dir` by `|N(0, sigma)|` about a uniformly random perpendicular axis.
pub fn perturb<R: Rng>(dir: Vec3, sigma_rad: f64, rng: &mut R) -> Vec3 {
    let spin = rng.random_range(0.0..std::f64::consts::TAU);
    let angle = if sigma_rad > 0.0 {
        Normal::new(0.0, sigma_rad).expect("finite sigma").sample(rng).abs()
    } else {
        0.0
    };
    let axis = dir.any_perpendicular().rotated(dir, spin);
    dir.rotated(axis, angle)
}

/// Samples between ticks for a controller ticking at `tick_rate_hz`.
pub fn tick_every(traj_rate_hz: f64, tick_rate_hz: Option<f64>) -> usize {
    match tick_rate_hz {
        Some(r) if r > 0.0 => ((traj_rate_hz / r).round() as usize).max(1),
        _ => 1,
    }
}

/// Runs one closed-loop rollout. `focal` comes from
/// [`precompute_focal_points`] on the same (blink-repaired) trajectory.
pub fn rollout(
    policy: &mut dyn HeadPolicy,
    traj: &Trajectory,
    focal: &[Vec3],
    config: &RolloutConfig,
) -> Result<RolloutResult, RolloutError> {
    if traj.is_empty() {
        return Err(RolloutError::Empty);
    }
    let n = config.max_steps.map_or(traj.len(), |m| m.min(traj.len()));
    let every = config
        .tick_every
        .unwrap_or_else(|| tick_every(traj.rate_hz, policy.tick_rate_hz()))
        .max(1);
    let dt = every as f64 / traj.rate_hz;
    let sigma = config.noise_sigma_deg.max(0.0).to_radians();
    let mut rng = seed::job_rng(config.seed, &format!("rollout/{}", traj.id()));

    let s0 = &traj.samples[0];
    let head0 = HeadOrientation::from_forward(s0.head_dir);
    let left_off = head0.world_to_head(s0.left_origin - s0.head_pos);
    let right_off = head0.world_to_head(s0.right_origin - s0.head_pos);

    policy.reset();
    let mut head = head0;
    let mut result = RolloutResult {
        trajectory: traj.id(),
        task: traj.task,
        imputed: Vec::with_capacity(n),
        truth: Vec::with_capacity(n),
        errors: Vec::with_capacity(n),
        mse: 0.0,
        fault: None,
        saturated_steps: 0,
    };
    for i in 0..n {
        let s = &traj.samples[i];
        let fwd = head.forward();
        result.imputed.push(fwd);
        result.truth.push(s.head_dir);
        result.errors.push((fwd - s.head_dir).norm_squared());
        if i % every != 0 {
            continue;
        }
        let lo = s.head_pos + head.head_to_world(left_off);
        let ro = s.head_pos + head.head_to_world(right_off);
        let aim = |origin: Vec3, rng: &mut seed::Rng| {
            let d = (focal[i] - origin).try_normalize(1e-12).unwrap_or(fwd);
            perturb(d, sigma, rng)
        };
        let ld = aim(lo, &mut rng);
        let rd = aim(ro, &mut rng);
        let input = GazeInput {
            left: head.world_to_head(ld),
            right: head.world_to_head(rd),
            head: fwd,
        };
        match policy.command(i, &input, dt) {
            Ok(d) => {
                let r = rotate_head(head, d.dpitch, d.dyaw);
                head = r.head;
                result.saturated_steps += r.saturated as usize;
            }
            Err(e) => {
                result.fault = Some(format!("step {i}: {e}"));
                break;
            }
        }
    }
    result.mse = result.errors.iter().sum::<f64>() / result.errors.len() as f64;
    Ok(result)
}

/// Per-trajectory score within a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryScore {
    pub controller: String,
    pub task: Task,
    pub trajectory: String,
    pub steps: usize,
    pub mse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerRow {
    pub name: String,
    pub family: Family,
    /// Teacher-forced rotation MSE on the same trials, rad^2.
    pub teacher_forced_mse: f64,
    /// Step-weighted closed-loop MSE over all trials.
    pub overall: f64,
    pub by_task: BTreeMap<Task, f64>,
    pub faults: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: RolloutConfig,
    pub controllers: Vec<ControllerRow>,
    pub trajectories: Vec<TrajectoryScore>,
}

impl SuiteReport {
    pub fn row(&self, name: &str) -> Option<&ControllerRow> {
        self.controllers.iter().find(|r| r.name == name)
    }

    /// `controller,task,trajectory,mse,steps`, one line per rollout.
    pub fn write_scores_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["controller", "task", "trajectory", "mse", "steps"])?;
        for s in &self.trajectories {
            out.write_record([
                &s.controller,
                s.task.as_str(),
                &s.trajectory,
                &fmt_f64(s.mse),
                &s.steps.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `controller,task,trajectory,step,error`; empty unless the suite ran
    /// with `keep_steps`.
    pub fn write_steps_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["controller", "task", "trajectory", "step", "error"])?;
        for s in &self.trajectories {
            for (i, e) in s.errors.iter().enumerate() {
                out.write_record([&s.controller, s.task.as_str(), &s.trajectory, &i.to_string(), &fmt_f64(*e)])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("suite.json"), json)?;
        self.write_scores_csv(std::fs::File::create(dir.join("scores.csv"))?)?;
        if self.config.keep_steps {
            self.write_steps_csv(std::fs::File::create(dir.join("steps.csv"))?)?;
        }
        Ok(())
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Rolls every controller over every trajectory (in parallel on the current
/// rayon pool) and tabulates step-weighted MSE per controller and task.
/// Output order is controller-major, trajectory order preserved.
pub fn evaluate_suite(
    controllers: &[ControllerSpec],
    test: &[Trajectory],
    config: &RolloutConfig,
) -> Result<SuiteReport, RolloutError> {
    if controllers.is_empty() || test.is_empty() {
        return Err(RolloutError::NothingToEvaluate);
    }
    let prepared: Vec<(Trajectory, Vec<Vec3>)> = test
        .par_iter()
        .map(|t| {
            let t = repair_blinks(t).map_err(|e| RolloutError::Dataset(e.to_string()))?;
            let f = precompute_focal_points(&t)?;
            Ok((t, f))
        })
        .collect::<Result<_, RolloutError>>()?;

    let jobs: Vec<(usize, usize)> = (0..controllers.len())
        .flat_map(|c| (0..prepared.len()).map(move |t| (c, t)))
        .collect();
    let scores: Vec<TrajectoryScore> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let spec = &controllers[c];
            let (traj, focal) = &prepared[t];
            let r = rollout(&mut spec.runner(), traj, focal, config)?;
            Ok(TrajectoryScore {
                controller: spec.name.clone(),
                task: r.task,
                trajectory: r.trajectory,
                steps: r.errors.len(),
                mse: r.mse,
                fault: r.fault,
                errors: if config.keep_steps { r.errors } else { Vec::new() },
            })
        })
        .collect::<Result<_, RolloutError>>()?;

    let rows = controllers
        .par_iter()
        .map(|spec| {
            let every = config
                .tick_every
                .unwrap_or_else(|| tick_every(test[0].rate_hz, Some(spec.tick_rate_hz)));
            let tf_set: Vec<Trajectory> = prepared
                .iter()
                .map(|(t, _)| prepare(t, every))
                .collect::<Result<_, _>>()
                .map_err(|e| RolloutError::Dataset(e.to_string()))?;
            let tf = teacher_forced_set(&mut spec.runner(), &tf_set).map_err(|e| RolloutError::Dataset(e.to_string()))?;
            let mine: Vec<&TrajectoryScore> = scores.iter().filter(|s| s.controller == spec.name).collect();
            let weighted = |it: &mut dyn Iterator<Item = &&TrajectoryScore>| {
                let (sum, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x.mse * x.steps as f64, n + x.steps));
                sum / n as f64
            };
            let mut by_task = BTreeMap::new();
            for task in Task::ALL {
                if mine.iter().any(|s| s.task == task) {
                    by_task.insert(task, weighted(&mut mine.iter().filter(|s| s.task == task)));
                }
            }
            Ok(ControllerRow {
                name: spec.name.clone(),
                family: spec.family(),
                teacher_forced_mse: tf,
                overall: weighted(&mut mine.iter()),
                by_task,
                faults: mine.iter().filter(|s| s.fault.is_some()).count(),
            })
        })
        .collect::<Result<_, RolloutError>>()?;

    Ok(SuiteReport {
        config: config.clone(),
        controllers: rows,
        trajectories: scores,
    })
}
