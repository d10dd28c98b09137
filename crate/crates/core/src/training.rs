//! Teacher-forced fitting and scoring.
//!
//! Targets are the per-sample head rotations `(dpitch, dyaw)` in radians,
//! taken from consecutive ground-truth head directions. Inputs at sample `i`
//! are the eye directions expressed in the frame of `head_dir[i]` plus the
//! world head direction; the model never sees its own output.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::controllers::{
    gaze_angles_deg, AxisLaw, AxisParams, ControllerParams, ControllerSpec, GazeInput, HeadPolicy,
    VectorParams,
};
use crate::dataset::{downsample, repair_blinks, Trajectory};
use crate::error::TrainError;
use crate::geometry::{dir_to_pitch_yaw, wrap_angle, HeadOrientation};
use crate::nn::{Adam, DenseNet, LstmNet, Sequence};
use crate::seed;

/// Model family and architecture to train.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Vector {
        #[serde(default = "yes")]
        symmetric: bool,
    },
    Mlp {
        hidden: Vec<usize>,
    },
    Lstm {
        hidden: usize,
        /// 9 (both eyes + head) or 6 (cyclopean gaze + head).
        #[serde(default = "nine")]
        input: usize,
    },
}

fn yes() -> bool {
    true
}

fn nine() -> usize {
    9
}

impl ModelSpec {
    pub fn mlp() -> Self {
        ModelSpec::Mlp { hidden: vec![8] }
    }

    pub fn mlp_16_16() -> Self {
        ModelSpec::Mlp { hidden: vec![16, 16] }
    }

    pub fn lstm(hidden: usize) -> Self {
        ModelSpec::Lstm { hidden, input: 9 }
    }

    pub fn vector() -> Self {
        ModelSpec::Vector { symmetric: true }
    }

    /// Display name: `MLP`, `MLP-H16_16`, `LSTM`, `LSTM-H128`, `Vector`.
    pub fn default_name(&self) -> String {
        match self {
            ModelSpec::Vector { .. } => "Vector".into(),
            ModelSpec::Mlp { hidden } if hidden == &[8] => "MLP".into(),
            ModelSpec::Mlp { hidden } => {
                let h: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
                format!("MLP-H{}", h.join("_"))
            }
            ModelSpec::Lstm { hidden: 8, input: 9 } => "LSTM".into(),
            ModelSpec::Lstm { hidden, input: 9 } => format!("LSTM-H{hidden}"),
            ModelSpec::Lstm { hidden, input } => format!("LSTM-H{hidden}-I{input}"),
        }
    }

    fn is_lstm(&self) -> bool {
        matches!(self, ModelSpec::Lstm { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelSpec,
    /// Overrides [`ModelSpec::default_name`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Adam step size for network weights.
    pub learning_rate: f64,
    /// Adam step size for the vector law, whose objective is in deg/s.
    pub vector_learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub lstm_downsample: usize,
    /// Stop once the epoch train MSE improved by less than this over
    /// `patience` epochs.
    pub min_improvement: f64,
    pub patience: usize,
    /// Train networks on targets divided by their RMS and fold the scale
    /// back into the read-out layer afterwards.
    pub scale_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelSpec::mlp(),
            name: None,
            learning_rate: 1e-3,
            vector_learning_rate: 0.05,
            epochs: 50,
            seed: 0,
            lstm_downsample: 2,
            min_improvement: 1e-8,
            patience: 5,
            scale_targets: true,
        }
    }
}

impl TrainConfig {
    pub fn for_model(model: ModelSpec) -> Self {
        TrainConfig {
            model,
            ..Self::default()
        }
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.model.default_name())
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.lstm_downsample == 0 {
            return Err(TrainError::Config("lstm_downsample must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.vector_learning_rate > 0.0) {
            return Err(TrainError::Config("learning rates must be positive".into()));
        }
        match &self.model {
            ModelSpec::Mlp { hidden } if hidden.contains(&0) => {
                Err(TrainError::Config("hidden sizes must be positive".into()))
            }
            ModelSpec::Lstm { hidden: 0, .. } => Err(TrainError::Config("hidden size must be positive".into())),
            ModelSpec::Lstm { input, .. } if *input != 9 && *input != 6 => {
                Err(TrainError::Config(format!("lstm input must be 9 or 6, got {input}")))
            }
            _ => Ok(()),
        }
    }

    /// Downsampling applied to trajectories for this model.
    pub fn downsample_factor(&self) -> usize {
        if self.model.is_lstm() {
            self.lstm_downsample
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub name: String,
    /// Mean per-trajectory loss seen during each epoch.
    pub epoch_train_mse: Vec<f64>,
    /// Teacher-forced MSE of the final model on the train set.
    pub train_mse: f64,
    /// Teacher-forced MSE on the held-out set; `None` without test data.
    pub test_mse: Option<f64>,
    /// Zero-output model on the held-out set, for scale.
    pub zero_test_mse: Option<f64>,
    pub wall_time_s: f64,
    pub config: TrainConfig,
}

/// One teacher-forced step: model input and ground-truth head rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub input: GazeInput,
    /// `(dpitch, dyaw)`, radians.
    pub target: (f64, f64),
}

/// Ground-truth head rotation between consecutive samples, radians.
pub fn head_deltas(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples
        .windows(2)
        .map(|w| {
            let (p0, y0) = dir_to_pitch_yaw(w[0].head_dir);
            let (p1, y1) = dir_to_pitch_yaw(w[1].head_dir);
            (wrap_angle(p1 - p0), wrap_angle(y1 - y0))
        })
        .collect()
}

/// Teacher-forced steps of a trajectory (one fewer than its samples).
pub fn steps(traj: &Trajectory) -> Result<Vec<Step>, TrainError> {
    if traj.len() < 2 {
        return Err(TrainError::TooShort(traj.len()));
    }
    let deltas = head_deltas(traj);
    Ok(traj
        .samples
        .iter()
        .zip(deltas)
        .map(|(s, target)| {
            let head = HeadOrientation::from_forward(s.head_dir);
            Step {
                input: GazeInput {
                    left: head.world_to_head(s.left_dir),
                    right: head.world_to_head(s.right_dir),
                    head: s.head_dir,
                },
                target,
            }
        })
        .collect())
}

/// Network training sequence with feature width 9 or 6.
pub fn sequence(traj: &Trajectory, width: usize) -> Result<Sequence, TrainError> {
    let mut seq = Sequence::new(width, 2);
    for s in steps(traj)? {
        seq.push(&s.input.features(width)?, &[s.target.0, s.target.1]);
    }
    Ok(seq)
}

/// Blink repair then downsampling.
pub fn prepare(traj: &Trajectory, factor: usize) -> Result<Trajectory, TrainError> {
    Ok(downsample(&repair_blinks(traj)?, factor)?)
}

/// Total squared residual and residual count for one trajectory.
fn tf_sums(policy: &mut dyn HeadPolicy, traj: &Trajectory) -> Result<(f64, usize), TrainError> {
    let steps = steps(traj)?;
    let dt = 1.0 / traj.rate_hz;
    policy.reset();
    let mut sum = 0.0;
    for (i, s) in steps.iter().enumerate() {
        let d = policy
            .command(i, &s.input, dt)
            .map_err(|e| TrainError::Config(format!("controller fault at step {i}: {e}")))?;
        sum += (d.dpitch - s.target.0).powi(2) + (d.dyaw - s.target.1).powi(2);
    }
    Ok((sum, 2 * steps.len()))
}

/// Mean over steps and both components of the squared rotation residual,
/// radians squared. The trajectory should already be prepared for the model.
pub fn teacher_forced_loss(policy: &mut dyn HeadPolicy, traj: &Trajectory) -> Result<f64, TrainError> {
    let (sum, n) = tf_sums(policy, traj)?;
    Ok(sum / n as f64)
}

/// Step-weighted teacher-forced MSE over a set of prepared trajectories.
pub fn teacher_forced_set(policy: &mut dyn HeadPolicy, trajs: &[Trajectory]) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    let mut n = 0;
    for t in trajs {
        let (s, k) = tf_sums(policy, t)?;
        sum += s;
        n += k;
    }
    if n == 0 {
        return Err(TrainError::EmptyTrainSet);
    }
    Ok(sum / n as f64)
}

/// Fits `config.model` on `train` and scores it on `test`. Deterministic in
/// `config.seed`.
pub fn fit(
    config: &TrainConfig,
    train: &[Trajectory],
    test: &[Trajectory],
) -> Result<(ControllerSpec, TrainReport), TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let started = Instant::now();
    let factor = config.downsample_factor();
    let train: Vec<Trajectory> = train.iter().map(|t| prepare(t, factor)).collect::<Result<_, _>>()?;
    let test: Vec<Trajectory> = test.iter().map(|t| prepare(t, factor)).collect::<Result<_, _>>()?;
    let tick_rate_hz = train[0].rate_hz;
    if let Some(t) = train.iter().chain(&test).find(|t| t.rate_hz != tick_rate_hz) {
        return Err(TrainError::Config(format!(
            "mixed sample rates: {} and {}",
            tick_rate_hz, t.rate_hz
        )));
    }
    let name = config.name();
    log::info!("training {name} on {} trajectories", train.len());

    let (params, epoch_train_mse) = match &config.model {
        ModelSpec::Vector { symmetric } => {
            let (p, hist) = fit_vector(&train, *symmetric, config)?;
            (ControllerParams::Vector(p), hist)
        }
        ModelSpec::Mlp { hidden } => {
            let mut sizes = vec![9];
            sizes.extend(hidden);
            sizes.push(2);
            let mut rng = seed::job_rng(config.seed, "init");
            let mut net = DenseNet::random(&sizes, &mut rng)?;
            let seqs = sequences(&train, 9)?;
            let hist = fit_scaled(&mut NetRef::Dense(&mut net), seqs, config)?;
            (ControllerParams::Mlp(net), hist)
        }
        ModelSpec::Lstm { hidden, input } => {
            let mut rng = seed::job_rng(config.seed, "init");
            let mut net = LstmNet::random(*input, *hidden, 2, &mut rng)?;
            let seqs = sequences(&train, *input)?;
            let hist = fit_scaled(&mut NetRef::Lstm(&mut net), seqs, config)?;
            (ControllerParams::Lstm(net), hist)
        }
    };
    let spec = ControllerSpec {
        name: name.clone(),
        params,
        tick_rate_hz,
    };
    let train_mse = teacher_forced_set(&mut spec.runner(), &train)?;
    let (test_mse, zero_test_mse) = if test.is_empty() {
        (None, None)
    } else {
        (
            Some(teacher_forced_set(&mut spec.runner(), &test)?),
            Some(teacher_forced_set(&mut crate::controllers::ZeroPolicy, &test)?),
        )
    };
    let report = TrainReport {
        name,
        epoch_train_mse,
        train_mse,
        test_mse,
        zero_test_mse,
        wall_time_s: started.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    Ok((spec, report))
}

fn sequences(trajs: &[Trajectory], width: usize) -> Result<Vec<Sequence>, TrainError> {
    trajs.iter().map(|t| sequence(t, width)).collect()
}

enum NetRef<'a> {
    Dense(&'a mut DenseNet),
    Lstm(&'a mut LstmNet),
}

impl NetRef<'_> {
    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            NetRef::Dense(n) => n.params_mut(),
            NetRef::Lstm(n) => n.params_mut(),
        }
    }

    /// Multiplies every network output by `k`.
    fn scale_outputs(&mut self, k: f64) {
        let readout: &mut [f64] = match self {
            NetRef::Dense(n) => {
                let last = n.sizes().len() - 2;
                let (w, b) = n.layer_mut(last);
                w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= k);
                return;
            }
            NetRef::Lstm(n) => n.readout_mut(),
        };
        readout.iter_mut().for_each(|v| *v *= k);
    }

    fn loss_and_grad(&self, seq: &Sequence) -> Result<(f64, Vec<f64>), crate::error::NnError> {
        match self {
            NetRef::Dense(n) => n.loss_and_grad(seq),
            NetRef::Lstm(n) => n.loss_and_grad(seq),
        }
    }
}

/// Whether the best loss of the last `patience` epochs beat the best before
/// them by less than `min_improvement`.
fn stalled(history: &[f64], cfg: &TrainConfig) -> bool {
    let n = history.len();
    if n <= cfg.patience {
        return false;
    }
    let best = |h: &[f64]| h.iter().copied().fold(f64::INFINITY, f64::min);
    let (before, recent) = history.split_at(n - cfg.patience);
    best(before) - best(recent) < cfg.min_improvement
}

/// RMS of every target component; 1 when there is nothing to scale by.
fn target_scale(seqs: &[Sequence]) -> f64 {
    let (sum, n) = seqs
        .iter()
        .flat_map(|s| &s.targets)
        .fold((0.0, 0usize), |(a, n), t| (a + t * t, n + 1));
    let rms = (sum / n.max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        rms
    } else {
        1.0
    }
}

/// [`fit_network`] on unit-RMS targets when `scale_targets` is set. The
/// returned history is in the original units.
fn fit_scaled(net: &mut NetRef<'_>, mut seqs: Vec<Sequence>, cfg: &TrainConfig) -> Result<Vec<f64>, TrainError> {
    if !cfg.scale_targets {
        return fit_network(net, &seqs, cfg, 1.0);
    }
    let k = target_scale(&seqs);
    for s in &mut seqs {
        s.targets.iter_mut().for_each(|t| *t /= k);
    }
    let history = fit_network(net, &seqs, cfg, k * k)?;
    net.scale_outputs(k);
    Ok(history)
}

/// Adam with one full trajectory per step, trajectories shuffled per epoch.
/// Epoch losses are multiplied by `loss_unit` before they are recorded and
/// checked for stalling.
fn fit_network(net: &mut NetRef<'_>, seqs: &[Sequence], cfg: &TrainConfig, loss_unit: f64) -> Result<Vec<f64>, TrainError> {
    let mut adam = Adam::new(net.params_mut().len(), cfg.learning_rate);
    let mut rng = seed::job_rng(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let (loss, grad) = net.loss_and_grad(&seqs[k]).map_err(|_| TrainError::Diverged { epoch })?;
            adam.update(net.params_mut(), &grad)?;
            total += loss;
        }
        let mse = loss_unit * total / seqs.len() as f64;
        if !mse.is_finite() || net.params_mut().iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: train mse {mse:.6e}");
        history.push(mse);
        if stalled(&history, cfg) {
            break;
        }
    }
    Ok(history)
}

// ---------------------------------------------------------------- vector law

/// Per-axis regression data: gaze angle (deg) and head rate (deg/s).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AxisBatch {
    pub x: Vec<f64>,
    pub rate: Vec<f64>,
}

impl AxisBatch {
    pub fn push(&mut self, x: f64, rate: f64) {
        self.x.push(x);
        self.rate.push(rate);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The batch reflected through the origin.
    pub fn mirrored(&self) -> AxisBatch {
        AxisBatch {
            x: self.x.iter().map(|v| -v).collect(),
            rate: self.rate.iter().map(|v| -v).collect(),
        }
    }
}

/// Pitch and yaw regression batches of one prepared trajectory.
pub fn axis_batches(traj: &Trajectory) -> Result<[AxisBatch; 2], TrainError> {
    let mut pitch = AxisBatch::default();
    let mut yaw = AxisBatch::default();
    let rate = traj.rate_hz;
    for s in steps(traj)? {
        let (gp, gy) = gaze_angles_deg(s.input.left, s.input.right);
        pitch.push(gp, s.target.0.to_degrees() * rate);
        yaw.push(gy, s.target.1.to_degrees() * rate);
    }
    Ok([pitch, yaw])
}

/// Starting point of every vector-law fit.
pub const VECTOR_INIT: AxisLaw = AxisLaw {
    v: 1.0,
    a: 0.5,
    b: 5.0,
    c: 0.0,
};

/// Fits one symmetric axis law by Adam on the mean squared rate residual,
/// one step per batch, batches shuffled every epoch. `a` is optimized as
/// `exp(alpha)` so it stays positive.
pub fn fit_vector_axis(
    batches: &[AxisBatch],
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<(AxisLaw, Vec<f64>), TrainError> {
    let batches: Vec<&AxisBatch> = batches.iter().filter(|b| !b.is_empty()).collect();
    if batches.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let cfg = TrainConfig::default();
    let mut theta = [VECTOR_INIT.v, VECTOR_INIT.a.ln(), VECTOR_INIT.b, VECTOR_INIT.c];
    let law = |t: &[f64; 4]| AxisLaw {
        v: t[0],
        a: t[1].exp(),
        b: t[2],
        c: t[3],
    };
    let mut adam = Adam::new(4, learning_rate);
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    let mut best = (f64::INFINITY, theta);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let b = batches[k];
            let l = law(&theta);
            let scale = 1.0 / b.len() as f64;
            let mut loss = 0.0;
            let mut g = [0.0; 4];
            for (&x, &y) in b.x.iter().zip(&b.rate) {
                let (h, dh) = l.h_symmetric_grad(x);
                let r = h - y;
                loss += r * r * scale;
                for j in 0..4 {
                    g[j] += 2.0 * r * scale * dh[j];
                }
            }
            // Chain rule through a = exp(alpha).
            g[1] *= l.a;
            adam.update(&mut theta, &g)?;
            total += loss;
        }
        let mse = total / batches.len() as f64;
        if !mse.is_finite() || theta.iter().any(|t| !t.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        history.push(mse);
        if mse < best.0 {
            best = (mse, theta);
        }
        if stalled(&history, &cfg) {
            break;
        }
    }
    Ok((law(&best.1), history))
}

/// Fits pitch and yaw laws jointly over all trajectories of the train set.
pub fn fit_vector_params(
    train: &[Trajectory],
    symmetric: bool,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<VectorParams, TrainError> {
    let cfg = TrainConfig {
        model: ModelSpec::Vector { symmetric },
        vector_learning_rate: learning_rate,
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let prepared: Vec<Trajectory> = train.iter().map(|t| prepare(t, 1)).collect::<Result<_, _>>()?;
    Ok(fit_vector(&prepared, symmetric, &cfg)?.0)
}

fn fit_vector(train: &[Trajectory], symmetric: bool, cfg: &TrainConfig) -> Result<(VectorParams, Vec<f64>), TrainError> {
    let mut pitch = Vec::with_capacity(train.len());
    let mut yaw = Vec::with_capacity(train.len());
    for t in train {
        let [p, y] = axis_batches(t)?;
        pitch.push(p);
        yaw.push(y);
    }
    let fit_axis = |batches: Vec<AxisBatch>, axis: &str| -> Result<(AxisParams, Vec<f64>), TrainError> {
        let s = seed::derive_seed(cfg.seed, axis);
        if symmetric {
            let (law, hist) = fit_vector_axis(&batches, cfg.vector_learning_rate, cfg.epochs, s)?;
            return Ok((AxisParams::symmetric(law), hist));
        }
        let (pos, neg): (Vec<AxisBatch>, Vec<AxisBatch>) = batches
            .iter()
            .map(|b| {
                let mut p = AxisBatch::default();
                let mut n = AxisBatch::default();
                for (&x, &r) in b.x.iter().zip(&b.rate) {
                    if x >= 0.0 {
                        p.push(x, r);
                    } else {
                        n.push(-x, -r);
                    }
                }
                (p, n)
            })
            .unzip();
        let (positive, hist) = fit_vector_axis(&pos, cfg.vector_learning_rate, cfg.epochs, s)?;
        let negative = match fit_vector_axis(&neg, cfg.vector_learning_rate, cfg.epochs, s ^ 1) {
            Ok((law, _)) => law,
            Err(TrainError::EmptyTrainSet) => positive,
            Err(e) => return Err(e),
        };
        Ok((
            AxisParams {
                positive,
                negative: Some(negative),
            },
            hist,
        ))
    };
    let (p, hp) = fit_axis(pitch, "vector/pitch")?;
    let (y, hy) = fit_axis(yaw, "vector/yaw")?;
    // Loss history in rad^2 per tick, averaged over both axes.
    let rate = train[0].rate_hz;
    let to_rad = (1.0f64.to_radians() / rate).powi(2);
    let n = hp.len().max(hy.len());
    let at = |h: &[f64], i: usize| h[i.min(h.len() - 1)];
    let hist = (0..n).map(|i| 0.5 * (at(&hp, i) + at(&hy, i)) * to_rad).collect();
    Ok((VectorParams { pitch: p, yaw: y }, hist))
}
