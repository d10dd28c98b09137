//! Gaze/head trajectories: types, file I/O, blink repair, downsampling,
//! participant splits and the synthetic task generator.

mod io;
pub mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::geometry::{interpolate_blink, Vec3};

pub use io::{load_trajectories, read_trajectories, save_trajectory, write_trajectory};
pub use synth::{generate_task, HeadOracle, TaskConfig, TaskOutput};

/// Nominal capture rate of the recorded trials.
pub const BASE_RATE_HZ: f64 = 90.0;
/// Trials recorded per participant (three per task).
pub const TRIALS_PER_PARTICIPANT: u32 = 12;

/// A direction whose norm falls below this is treated as a lost sample.
const MIN_VALID_DIR_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    LinearPursuit,
    ArcPursuit,
    RapidSearch,
    RapidAvoidance,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::LinearPursuit,
        Task::ArcPursuit,
        Task::RapidSearch,
        Task::RapidAvoidance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::LinearPursuit => "linear-pursuit",
            Task::ArcPursuit => "arc-pursuit",
            Task::RapidSearch => "rapid-search",
            Task::RapidAvoidance => "rapid-avoidance",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task `{s}` (expected one of linear-pursuit, arc-pursuit, rapid-search, rapid-avoidance)"))
    }
}

/// One timestamped binocular gaze and head pose record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    pub head_pos: Vec3,
    pub head_dir: Vec3,
    pub left_origin: Vec3,
    pub left_dir: Vec3,
    pub right_origin: Vec3,
    pub right_dir: Vec3,
    /// `false` marks a blink or tracking loss.
    pub valid: bool,
}

impl GazeSample {
    /// Blink rule: flagged invalid, or either gaze direction is far from unit.
    pub fn is_blink(&self) -> bool {
        !self.valid
            || self.left_dir.norm() < MIN_VALID_DIR_NORM
            || self.right_dir.norm() < MIN_VALID_DIR_NORM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub participant: u32,
    pub task: Task,
    pub trial: u32,
    pub rate_hz: f64,
    pub samples: Vec<GazeSample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stable identifier, also used to derive per-trajectory random streams.
    pub fn id(&self) -> String {
        format!("p{:02}-{}-t{:02}", self.participant, self.task, self.trial)
    }

    pub fn file_name(&self) -> String {
        format!("{}.jsonl", self.id())
    }
}

/// Participant-level train/test split.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ids: BTreeSet<u32>,
    pub test_ids: BTreeSet<u32>,
}

impl SplitSpec {
    /// Puts the `n_train` smallest ids in the train set, the rest in test.
    pub fn first_n(ids: impl IntoIterator<Item = u32>, n_train: usize) -> Self {
        let all: BTreeSet<u32> = ids.into_iter().collect();
        let train_ids: BTreeSet<u32> = all.iter().copied().take(n_train).collect();
        let test_ids = all.difference(&train_ids).copied().collect();
        SplitSpec {
            train_ids,
            test_ids,
        }
    }

    /// The 18-of-25 proportion applied to any participant count.
    pub fn proportional(ids: impl IntoIterator<Item = u32>) -> Self {
        let all: BTreeSet<u32> = ids.into_iter().collect();
        let n = all.len();
        let n_train = ((n as f64) * 18.0 / 25.0).round() as usize;
        Self::first_n(all, n_train.max(1).min(n))
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if let Some(&id) = self.train_ids.intersection(&self.test_ids).next() {
            return Err(DatasetError::OverlappingSplit(id));
        }
        Ok(())
    }
}

/// Partitions trajectories by participant id, never by trial.
pub fn split(
    trajs: Vec<Trajectory>,
    spec: &SplitSpec,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>), DatasetError> {
    spec.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for t in trajs {
        if spec.train_ids.contains(&t.participant) {
            train.push(t);
        } else if spec.test_ids.contains(&t.participant) {
            test.push(t);
        } else {
            return Err(DatasetError::UncoveredParticipant(t.participant));
        }
    }
    Ok((train, test))
}

/// Keeps every `factor`-th sample starting at index 0.
pub fn downsample(traj: &Trajectory, factor: usize) -> Result<Trajectory, DatasetError> {
    if factor == 0 {
        return Err(DatasetError::BadFactor);
    }
    Ok(Trajectory {
        rate_hz: traj.rate_hz / factor as f64,
        samples: traj.samples.iter().step_by(factor).copied().collect(),
        ..traj.clone()
    })
}

/// Fills blink spans by normalized linear interpolation of both gaze
/// directions between the bracketing valid samples. Leading and trailing
/// blinks are trimmed.
pub fn repair_blinks(traj: &Trajectory) -> Result<Trajectory, DatasetError> {
    let s = &traj.samples;
    let first = s
        .iter()
        .position(|x| !x.is_blink())
        .ok_or(DatasetError::AllInvalid)?;
    let last = s.iter().rposition(|x| !x.is_blink()).unwrap();
    let mut out: Vec<GazeSample> = s[first..=last].to_vec();

    let mut i = 0;
    while i < out.len() {
        if !out[i].is_blink() {
            i += 1;
            continue;
        }
        let before = out[i - 1];
        let end = (i..out.len()).find(|&j| !out[j].is_blink()).unwrap();
        let after = out[end];
        let span = after.t - before.t;
        for (k, sample) in out.iter_mut().enumerate().take(end).skip(i) {
            let frac = (sample.t - before.t) / span;
            let fail = |source| DatasetError::Unrecoverable {
                index: first + k,
                source,
            };
            sample.left_dir = interpolate_blink(before.left_dir, after.left_dir, frac).map_err(fail)?;
            sample.right_dir =
                interpolate_blink(before.right_dir, after.right_dir, frac).map_err(fail)?;
            sample.left_origin = before.left_origin * (1.0 - frac) + after.left_origin * frac;
            sample.right_origin = before.right_origin * (1.0 - frac) + after.right_origin * frac;
            sample.valid = true;
        }
        i = end + 1;
    }
    Ok(Trajectory {
        samples: out,
        ..traj.clone()
    })
}
