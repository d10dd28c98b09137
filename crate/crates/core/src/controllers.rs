//! Gaze-to-head controllers.
//!
//! Every controller maps the head-relative left and right gaze directions
//! plus the world-frame head direction to a per-tick head rotation
//! `(dpitch, dyaw)`. Public step functions for the analytic laws work in
//! degrees; [`HeadPolicy`] commands are in radians.

use serde::{Deserialize, Serialize};

use crate::error::{ControllerFault, NnError};
use crate::geometry::{dir_to_pitch_yaw, Vec3};
use crate::nn::{sigmoid, DenseNet, LstmNet, LstmState};

/// Head-relative gaze plus world head direction at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeInput {
    pub left: Vec3,
    pub right: Vec3,
    pub head: Vec3,
}

impl GazeInput {
    /// Cyclopean gaze angles `(pitch, yaw)` in degrees, from the normalized
    /// sum of both head-relative eye directions.
    pub fn gaze_angles_deg(&self) -> (f64, f64) {
        gaze_angles_deg(self.left, self.right)
    }

    /// Network feature vector: `[left; right; head]` (9 values) or
    /// `[cyclopean; head]` (6 values).
    pub fn features(&self, width: usize) -> Result<Vec<f64>, NnError> {
        let mut v = Vec::with_capacity(width);
        match width {
            9 => {
                v.extend(self.left.to_array());
                v.extend(self.right.to_array());
            }
            6 => v.extend((self.left + self.right).normalize().to_array()),
            other => return Err(NnError::Shape { expected: 9, got: other }),
        }
        v.extend(self.head.to_array());
        Ok(v)
    }
}

pub fn gaze_angles_deg(left: Vec3, right: Vec3) -> (f64, f64) {
    let (p, y) = dir_to_pitch_yaw((left + right).normalize());
    (p.to_degrees(), y.to_degrees())
}

/// Head rotation for one tick, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadDelta {
    pub dpitch: f64,
    pub dyaw: f64,
}

impl HeadDelta {
    pub fn new(dpitch: f64, dyaw: f64) -> Self {
        HeadDelta { dpitch, dyaw }
    }

    pub fn from_degrees((p, y): (f64, f64)) -> Self {
        HeadDelta::new(p.to_radians(), y.to_radians())
    }

    pub fn is_finite(&self) -> bool {
        self.dpitch.is_finite() && self.dyaw.is_finite()
    }
}

// ---------------------------------------------------------------- quadrant

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantParams {
    pub deadzone_diameter_deg: f64,
    pub speed_deg_s: f64,
}

impl Default for QuadrantParams {
    fn default() -> Self {
        QuadrantParams {
            deadzone_diameter_deg: 10.0,
            speed_deg_s: 20.0,
        }
    }
}

/// Four-region controller. Inside the circular deadzone the head holds;
/// otherwise it moves at constant speed along the dominant gaze axis only
/// (ties go to yaw). Returns degrees.
pub fn quadrant_step(p: &QuadrantParams, gaze_pitch: f64, gaze_yaw: f64, dt: f64) -> (f64, f64) {
    let radius = p.deadzone_diameter_deg / 2.0;
    if gaze_pitch.hypot(gaze_yaw) <= radius {
        return (0.0, 0.0);
    }
    let step = p.speed_deg_s * dt;
    if gaze_pitch.abs() > gaze_yaw.abs() {
        (step.copysign(gaze_pitch), 0.0)
    } else {
        (0.0, step.copysign(gaze_yaw))
    }
}

// ------------------------------------------------------------------ vector

/// One `(v, a, b, c)` quadruple of
/// `h(x) = v (x - c) / (1 + exp(a (-(x - c) + b)))`.
///
/// `x`, `b`, `c` in degrees, `a` in 1/degree, `v` in 1/s so `h` is deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisLaw {
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AxisLaw {
    /// The law as written, for any `x`.
    pub fn h(&self, x: f64) -> f64 {
        let u = x - self.c;
        self.v * u * sigmoid(self.a * (u - self.b))
    }

    /// Sign-symmetric extension about `c`:
    /// `sign(x - c) * h(c + |x - c|)`. Equal to [`AxisLaw::h`] for `x >= c`.
    pub fn h_symmetric(&self, x: f64) -> f64 {
        let u = x - self.c;
        self.v * u * sigmoid(self.a * (u.abs() - self.b))
    }

    /// `h_symmetric` and its gradient with respect to `(v, a, b, c)`.
    pub fn h_symmetric_grad(&self, x: f64) -> (f64, [f64; 4]) {
        let u = x - self.c;
        let au = u.abs();
        let s = sigmoid(self.a * (au - self.b));
        let ds = s * (1.0 - s);
        let h = self.v * u * s;
        let dv = u * s;
        let da = self.v * u * ds * (au - self.b);
        let db = -self.v * u * ds * self.a;
        let dc = -(self.v * s + self.v * au * ds * self.a);
        (h, [dv, da, db, dc])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.v, self.a, self.b, self.c]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        AxisLaw {
            v: p[0],
            a: p[1],
            b: p[2],
            c: p[3],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.a > 0.0
    }
}

/// Law for one axis. With `negative` unset the positive law is mirrored
/// about `c`. Otherwise gaze below the positive law's `c` uses the negative
/// quadruple in mirrored coordinates: `rate(x) = -negative(-x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisParams {
    pub positive: AxisLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative: Option<AxisLaw>,
}

impl AxisParams {
    pub fn symmetric(law: AxisLaw) -> Self {
        AxisParams {
            positive: law,
            negative: None,
        }
    }

    /// Head velocity, deg/s.
    pub fn rate(&self, x: f64) -> f64 {
        match self.negative {
            Some(neg) if x < self.positive.c => -neg.h_symmetric(-x),
            _ => self.positive.h_symmetric(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorParams {
    pub pitch: AxisParams,
    pub yaw: AxisParams,
}

impl VectorParams {
    pub fn symmetric(pitch: AxisLaw, yaw: AxisLaw) -> Self {
        VectorParams {
            pitch: AxisParams::symmetric(pitch),
            yaw: AxisParams::symmetric(yaw),
        }
    }
}

/// Per-axis control law; returns `(dpitch, dyaw)` in degrees.
pub fn vector_step(p: &VectorParams, gaze_pitch: f64, gaze_yaw: f64, dt: f64) -> (f64, f64) {
    (p.pitch.rate(gaze_pitch) * dt, p.yaw.rate(gaze_yaw) * dt)
}

// ---------------------------------------------------------------- networks

fn finite_pair(v: &[f64]) -> Result<(f64, f64), ControllerFault> {
    match v {
        [p, y] if p.is_finite() && y.is_finite() => Ok((*p, *y)),
        [_, _] => Err(ControllerFault::NonFinite),
        _ => Err(NnError::Shape {
            expected: 2,
            got: v.len(),
        }
        .into()),
    }
}

/// MLP command: radians per tick at the rate the net was trained on.
pub fn mlp_step(net: &DenseNet, input: &GazeInput) -> Result<(f64, f64), ControllerFault> {
    let x = input.features(net.input_size())?;
    finite_pair(&net.forward(&x)?)
}

/// LSTM command: radians per tick at its (downsampled) training rate.
pub fn lstm_step_ctrl(
    net: &LstmNet,
    state: &LstmState,
    input: &GazeInput,
) -> Result<((f64, f64), LstmState), ControllerFault> {
    let x = input.features(net.input_size())?;
    let (y, next) = net.step(state, &x)?;
    Ok((finite_pair(&y)?, next))
}

// ---------------------------------------------------------- uniform interface

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Quadrant,
    Vector,
    Mlp,
    Lstm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerParams {
    Quadrant(QuadrantParams),
    Vector(VectorParams),
    Mlp(DenseNet),
    Lstm(LstmNet),
}

/// Immutable controller description.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub name: String,
    pub params: ControllerParams,
    /// Rate the controller is meant to tick at. Network outputs are
    /// per-tick deltas at this rate and are rescaled by `dt * tick_rate_hz`
    /// when run at another rate.
    pub tick_rate_hz: f64,
}

impl ControllerSpec {
    pub fn family(&self) -> Family {
        match self.params {
            ControllerParams::Quadrant(_) => Family::Quadrant,
            ControllerParams::Vector(_) => Family::Vector,
            ControllerParams::Mlp(_) => Family::Mlp,
            ControllerParams::Lstm(_) => Family::Lstm,
        }
    }

    pub fn quadrant(params: QuadrantParams) -> Self {
        ControllerSpec {
            name: "Quadrant".into(),
            params: ControllerParams::Quadrant(params),
            tick_rate_hz: crate::dataset::BASE_RATE_HZ,
        }
    }

    pub fn initial_state(&self) -> ControllerState {
        match &self.params {
            ControllerParams::Lstm(net) => ControllerState::Lstm(net.initial_state()),
            _ => ControllerState::Stateless,
        }
    }

    /// One controller tick. `dt` is the time since the previous tick.
    pub fn step(
        &self,
        state: &mut ControllerState,
        input: &GazeInput,
        dt: f64,
    ) -> Result<HeadDelta, ControllerFault> {
        let delta = match (&self.params, state) {
            (ControllerParams::Quadrant(p), _) => {
                let (gp, gy) = input.gaze_angles_deg();
                HeadDelta::from_degrees(quadrant_step(p, gp, gy, dt))
            }
            (ControllerParams::Vector(p), _) => {
                let (gp, gy) = input.gaze_angles_deg();
                HeadDelta::from_degrees(vector_step(p, gp, gy, dt))
            }
            (ControllerParams::Mlp(net), _) => {
                let (p, y) = mlp_step(net, input)?;
                let k = dt * self.tick_rate_hz;
                HeadDelta::new(p * k, y * k)
            }
            (ControllerParams::Lstm(net), ControllerState::Lstm(st)) => {
                let ((p, y), next) = lstm_step_ctrl(net, st, input)?;
                *st = next;
                let k = dt * self.tick_rate_hz;
                HeadDelta::new(p * k, y * k)
            }
            (ControllerParams::Lstm(net), st) => {
                let ((p, y), next) = lstm_step_ctrl(net, &net.initial_state(), input)?;
                *st = ControllerState::Lstm(next);
                let k = dt * self.tick_rate_hz;
                HeadDelta::new(p * k, y * k)
            }
        };
        if delta.is_finite() {
            Ok(delta)
        } else {
            Err(ControllerFault::NonFinite)
        }
    }

    /// A runnable instance with fresh state.
    pub fn runner(&self) -> ControllerRunner<'_> {
        ControllerRunner {
            spec: self,
            state: self.initial_state(),
        }
    }
}

/// Per-rollout mutable controller state.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerState {
    Stateless,
    Lstm(LstmState),
}

/// Anything that can drive a head during rollout or teacher-forced scoring.
pub trait HeadPolicy {
    fn reset(&mut self);
    /// Nominal tick rate; `None` ticks on every sample.
    fn tick_rate_hz(&self) -> Option<f64>;
    /// `step` is the sample index in the trajectory being processed.
    fn command(&mut self, step: usize, input: &GazeInput, dt: f64) -> Result<HeadDelta, ControllerFault>;
}

pub struct ControllerRunner<'a> {
    pub spec: &'a ControllerSpec,
    pub state: ControllerState,
}

impl HeadPolicy for ControllerRunner<'_> {
    fn reset(&mut self) {
        self.state = self.spec.initial_state();
    }

    fn tick_rate_hz(&self) -> Option<f64> {
        Some(self.spec.tick_rate_hz)
    }

    fn command(&mut self, _step: usize, input: &GazeInput, dt: f64) -> Result<HeadDelta, ControllerFault> {
        self.spec.step(&mut self.state, input, dt)
    }
}

/// Emits no motion.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl HeadPolicy for ZeroPolicy {
    fn reset(&mut self) {}

    fn tick_rate_hz(&self) -> Option<f64> {
        None
    }

    fn command(&mut self, _: usize, _: &GazeInput, _: f64) -> Result<HeadDelta, ControllerFault> {
        Ok(HeadDelta::default())
    }
}
