//! Exoskeleton control loop: EMA-filtered eye angles at the sensor rate, one
//! controller tick per control period, a speed cap, then workspace clamping.
//!
//! Poses are `(pitch, yaw)` in degrees with **pitch positive in flexion**
//! (chin down), the opposite sign of [`crate::geometry`] pitch. Roll is
//! always zero.

use serde::{Deserialize, Serialize};

use crate::controllers::{GazeInput, HeadPolicy};
use crate::dataset::Trajectory;
use crate::geometry::{dir_to_pitch_yaw, pitch_yaw_to_dir, HeadOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExoLimits {
    /// Upper pitch bound, degrees of flexion.
    pub flexion_max: f64,
    /// Lower pitch bound, degrees (negative = extension).
    pub extension_max: f64,
    /// Symmetric yaw bound, degrees.
    pub yaw_max: f64,
    /// rad/s.
    pub max_speed: f64,
    /// Cap each axis separately instead of the joint 2-norm.
    pub per_axis: bool,
}

impl Default for ExoLimits {
    fn default() -> Self {
        ExoLimits {
            flexion_max: 25.0,
            extension_max: -3.0,
            yaw_max: 30.0,
            max_speed: 1.0,
            per_axis: false,
        }
    }
}

impl ExoLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.extension_max < self.flexion_max) {
            return Err("extension_max must be below flexion_max".into());
        }
        if !(self.yaw_max > 0.0 && self.max_speed > 0.0) {
            return Err("yaw_max and max_speed must be positive".into());
        }
        Ok(())
    }

    pub fn contains(&self, (pitch, yaw): (f64, f64)) -> bool {
        (self.extension_max..=self.flexion_max).contains(&pitch) && (-self.yaw_max..=self.yaw_max).contains(&yaw)
    }
}

/// Exponential moving average over `N` channels. The first sample seeds the
/// state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ema<const N: usize> {
    pub alpha: f64,
    state: Option<[f64; N]>,
}

impl<const N: usize> Ema<N> {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
        Ema { alpha, state: None }
    }

    pub fn value(&self) -> Option<[f64; N]> {
        self.state
    }

    pub fn update(&mut self, x: [f64; N]) -> [f64; N] {
        let y = match self.state {
            None => x,
            Some(_) if self.alpha == 1.0 => x,
            Some(mut y) => {
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi += self.alpha * (xi - *yi);
                }
                y
            }
        };
        self.state = Some(y);
        y
    }
}

/// Component-wise clamp; an axis inside its range passes through unchanged,
/// so the pose slides along the boundary. Also returns per-axis saturation.
pub fn clamp_with_slide(limits: &ExoLimits, (pitch, yaw): (f64, f64)) -> ((f64, f64), [bool; 2]) {
    let p = pitch.clamp(limits.extension_max, limits.flexion_max);
    let y = yaw.clamp(-limits.yaw_max, limits.yaw_max);
    ((p, y), [p != pitch, y != yaw])
}

/// Caps the step from `prev` toward `cmd` at `max_speed * dt` radians,
/// keeping its direction. A non-finite command yields `prev`.
pub fn limit_velocity(limits: &ExoLimits, prev: (f64, f64), cmd: (f64, f64), dt: f64) -> (f64, f64) {
    let cap = (limits.max_speed * dt).to_degrees();
    let (dp, dy) = (cmd.0 - prev.0, cmd.1 - prev.1);
    let within = |next: (f64, f64)| {
        let (sp, sy) = (next.0 - prev.0, next.1 - prev.1);
        if limits.per_axis {
            sp.abs() <= cap && sy.abs() <= cap
        } else {
            sp.hypot(sy) <= cap
        }
    };
    if within(cmd) {
        return cmd;
    }
    let (mut sp, mut sy) = if limits.per_axis {
        (dp.clamp(-cap, cap), dy.clamp(-cap, cap))
    } else {
        let k = cap / dp.hypot(dy);
        (dp * k, dy * k)
    };
    if !(sp.is_finite() && sy.is_finite()) {
        return prev;
    }
    // `prev + step` can round past the cap by an ulp; shrink until it holds.
    let mut shrink = 1.0 - 1e-12;
    loop {
        let next = (prev.0 + sp, prev.1 + sy);
        if within(next) {
            return next;
        }
        sp *= shrink;
        sy *= shrink;
        shrink *= shrink;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExoConfig {
    pub limits: ExoLimits,
    pub alpha: f64,
    pub sensor_rate_hz: f64,
    pub control_rate_hz: f64,
}

impl Default for ExoConfig {
    fn default() -> Self {
        ExoConfig {
            limits: ExoLimits::default(),
            alpha: 0.1,
            sensor_rate_hz: 200.0,
            control_rate_hz: 50.0,
        }
    }
}

impl ExoConfig {
    /// Sensor samples consumed per control tick.
    pub fn samples_per_tick(&self) -> usize {
        ((self.sensor_rate_hz / self.control_rate_hz).round() as usize).max(1)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate_hz
    }
}

/// Head-relative eye angles from the tracker, degrees (geometry convention:
/// positive pitch is up, positive yaw is right).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EyeAngles {
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExoState {
    /// `(flexion pitch, yaw)`, degrees.
    pub pose: (f64, f64),
    /// Pose change requested by the controller on the last tick, degrees.
    pub last_command: (f64, f64),
    pub tick: u64,
    pub saturated: [bool; 2],
    pub faulted: bool,
    filter: Ema<2>,
}

impl ExoState {
    pub fn new(config: &ExoConfig) -> Self {
        ExoState {
            pose: (0.0, 0.0),
            last_command: (0.0, 0.0),
            tick: 0,
            saturated: [false; 2],
            faulted: false,
            filter: Ema::new(config.alpha),
        }
    }

    /// World head direction in geometry convention.
    pub fn head_dir(&self) -> crate::geometry::Vec3 {
        pitch_yaw_to_dir(-self.pose.0.to_radians(), self.pose.1.to_radians())
    }
}

/// One control tick: filter `samples`, run the controller once on the most
/// recent filtered value, cap the speed, clamp. A controller fault holds
/// the pose.
pub fn exo_tick(state: &mut ExoState, policy: &mut dyn HeadPolicy, samples: &[EyeAngles], config: &ExoConfig) {
    let mut latest = state.filter.value();
    for s in samples {
        latest = Some(state.filter.update([s.pitch, s.yaw]));
    }
    state.tick += 1;
    let Some([gp, gy]) = latest else {
        return;
    };
    let eye = pitch_yaw_to_dir(gp.to_radians(), gy.to_radians());
    let input = GazeInput {
        left: eye,
        right: eye,
        head: state.head_dir(),
    };
    let dt = config.dt();
    let prev = state.pose;
    // Geometry pitch up is extension.
    let command = policy
        .command(state.tick as usize - 1, &input, dt)
        .map(|d| (-d.dpitch.to_degrees(), d.dyaw.to_degrees()));
    match command {
        Ok(cmd_delta) if cmd_delta.0.is_finite() && cmd_delta.1.is_finite() => {
            state.faulted = false;
            state.last_command = cmd_delta;
            let cmd = (prev.0 + cmd_delta.0, prev.1 + cmd_delta.1);
            let limited = limit_velocity(&config.limits, prev, cmd, dt);
            let (pose, sat) = clamp_with_slide(&config.limits, limited);
            state.pose = pose;
            state.saturated = sat;
        }
        _ => {
            state.faulted = true;
            state.last_command = (0.0, 0.0);
        }
    }
}

/// One row of the pose log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub t: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub sat_pitch: bool,
    pub sat_yaw: bool,
    pub fault: bool,
}

/// Replays a sensor-rate stream through the loop. Trailing samples that do
/// not fill a tick are ignored.
pub fn simulate(policy: &mut dyn HeadPolicy, stream: &[EyeAngles], config: &ExoConfig) -> Vec<PoseRecord> {
    policy.reset();
    let mut state = ExoState::new(config);
    stream
        .chunks_exact(config.samples_per_tick())
        .map(|chunk| {
            exo_tick(&mut state, policy, chunk, config);
            PoseRecord {
                t: state.tick as f64 * config.dt(),
                pitch: state.pose.0,
                yaw: state.pose.1,
                sat_pitch: state.saturated[0],
                sat_yaw: state.saturated[1],
                fault: state.faulted,
            }
        })
        .collect()
}

/// Head-relative cyclopean eye angles of a recorded trajectory, linearly
/// resampled to `rate_hz`.
pub fn eye_stream(traj: &Trajectory, rate_hz: f64) -> Vec<EyeAngles> {
    let angles: Vec<(f64, [f64; 2])> = traj
        .samples
        .iter()
        .map(|s| {
            let head = HeadOrientation::from_forward(s.head_dir);
            let g = (head.world_to_head(s.left_dir) + head.world_to_head(s.right_dir)).normalize();
            let (p, y) = dir_to_pitch_yaw(g);
            (s.t, [p.to_degrees(), y.to_degrees()])
        })
        .collect();
    let Some((&(t0, _), &(t1, _))) = angles.first().zip(angles.last()) else {
        return Vec::new();
    };
    let n = ((t1 - t0) * rate_hz).floor() as usize + 1;
    let mut k = 0;
    (0..n)
        .map(|i| {
            let t = t0 + i as f64 / rate_hz;
            while k + 2 < angles.len() && angles[k + 1].0 <= t {
                k += 1;
            }
            let (ta, a) = angles[k];
            let (tb, b) = angles[(k + 1).min(angles.len() - 1)];
            let f = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
            EyeAngles {
                pitch: a[0] + f * (b[0] - a[0]),
                yaw: a[1] + f * (b[1] - a[1]),
            }
        })
        .collect()
}

pub fn write_pose_csv<W: std::io::Write>(w: W, log: &[PoseRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in log {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{ControllerSpec, HeadDelta, ZeroPolicy};
    use crate::error::ControllerFault;
    use proptest::prelude::*;

    #[test]
    fn ema_examples() {
        let mut f = Ema::<1>::new(0.1);
        f.update([0.0]);
        let mut y = 0.0;
        for _ in 0..10 {
            y = f.update([1.0])[0];
        }
        assert!((y - 0.6513216).abs() < 1e-7);

        let mut c = Ema::<1>::new(0.1);
        for _ in 0..100 {
            assert_eq!(c.update([3.25])[0], 3.25);
        }
        let mut id = Ema::<2>::new(1.0);
        id.update([1.0, 2.0]);
        assert_eq!(id.update([-4.0, 0.5]), [-4.0, 0.5]);
    }

    #[test]
    fn clamp_examples() {
        let l = ExoLimits::default();
        assert_eq!(clamp_with_slide(&l, (30.0, 10.0)), ((25.0, 10.0), [true, false]));
        assert_eq!(clamp_with_slide(&l, (0.0, 0.0)), ((0.0, 0.0), [false, false]));
        assert_eq!(clamp_with_slide(&l, (-10.0, -45.0)), ((-3.0, -30.0), [true, true]));
    }

    #[test]
    fn velocity_examples() {
        let l = ExoLimits::default();
        let dt = 0.02;
        assert_eq!(limit_velocity(&l, (1.0, 2.0), (1.5, 2.0), dt), (1.5, 2.0));
        let (p, y) = limit_velocity(&l, (0.0, 0.0), (3.0, 4.0), dt);
        assert!((p.hypot(y) - 1.1459156).abs() < 1e-6);
        assert!((y / p - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(limit_velocity(&l, (1.0, 1.0), (1.0, 1.0), dt), (1.0, 1.0));
        let axis = ExoLimits { per_axis: true, ..l };
        let (p, y) = limit_velocity(&axis, (0.0, 0.0), (3.0, 0.5), dt);
        assert!((p - 0.02f64.to_degrees()).abs() < 1e-12);
        assert_eq!(y, 0.5);
    }

    #[test]
    fn extreme_commands_stay_capped() {
        let l = ExoLimits::default();
        let cap = 0.02f64.to_degrees();
        assert_eq!(limit_velocity(&l, (1.0, 2.0), (f64::INFINITY, 2.0), 0.02), (1.0, 2.0));
        assert_eq!(limit_velocity(&l, (1.0, 2.0), (f64::NAN, 2.0), 0.02), (1.0, 2.0));
        for prev in [(24.999, -29.9), (-2.7, 13.3), (0.1, 0.3)] {
            let next = limit_velocity(&l, prev, (1e300, -1e300), 0.02);
            assert!((next.0 - prev.0).hypot(next.1 - prev.1) <= cap);
        }
    }

    #[test]
    fn zero_controller_holds_pose() {
        let cfg = ExoConfig::default();
        let stream = vec![EyeAngles { pitch: 20.0, yaw: -25.0 }; 4000];
        let log = simulate(&mut ZeroPolicy, &stream, &cfg);
        assert_eq!(log.len(), 1000);
        assert!(log.iter().all(|r| r.pitch == 0.0 && r.yaw == 0.0));
    }

    #[test]
    fn quadrant_turns_right_at_twenty_deg_per_s_then_holds() {
        let cfg = ExoConfig::default();
        let spec = ControllerSpec::quadrant(Default::default());
        let stream = vec![EyeAngles { pitch: 0.0, yaw: 25.0 }; 200 * 3];
        let log = simulate(&mut spec.runner(), &stream, &cfg);
        let mut prev = 0.0;
        for r in &log {
            assert_eq!(r.pitch, 0.0);
            if r.yaw < 30.0 {
                assert!((r.yaw - prev - 0.4).abs() < 1e-9, "{} {}", prev, r.yaw);
            } else {
                assert_eq!(r.yaw, 30.0);
            }
            prev = r.yaw;
        }
        assert_eq!(log.last().unwrap().yaw, 30.0);
        // 30 degrees at 20 deg/s takes 1.5 s.
        let reached = log.iter().position(|r| r.yaw == 30.0).unwrap();
        assert!((reached as f64 + 1.0) * cfg.dt() <= 1.5 + cfg.dt() + 1e-9);
    }

    #[test]
    fn fault_holds_pose() {
        struct Flaky(u32);
        impl HeadPolicy for Flaky {
            fn reset(&mut self) {}
            fn tick_rate_hz(&self) -> Option<f64> {
                None
            }
            fn command(&mut self, _: usize, _: &GazeInput, _: f64) -> Result<HeadDelta, ControllerFault> {
                self.0 += 1;
                if self.0 % 2 == 0 {
                    Err(ControllerFault::NonFinite)
                } else {
                    Ok(HeadDelta::new(0.0, 0.01))
                }
            }
        }
        let log = simulate(&mut Flaky(0), &[EyeAngles::default(); 40], &ExoConfig::default());
        for w in log.windows(2) {
            if w[1].fault {
                assert_eq!((w[1].pitch, w[1].yaw), (w[0].pitch, w[0].yaw));
            }
        }
        assert!(log.iter().any(|r| r.fault));
    }

    #[test]
    fn eye_stream_resamples() {
        let cfg = crate::dataset::TaskConfig {
            duration: 2.0,
            ..Default::default()
        };
        let traj = crate::dataset::generate_task(crate::dataset::Task::ArcPursuit, &cfg, 3).unwrap().oracle;
        let s = eye_stream(&traj, 200.0);
        let span = traj.samples.last().unwrap().t;
        assert_eq!(s.len(), (span * 200.0).floor() as usize + 1);
    }

    proptest! {
        #[test]
        fn ema_contracts(a0 in -50.0..50.0f64, b0 in -50.0..50.0f64, xs in prop::collection::vec(-90.0..90.0f64, 1..50)) {
            let mut a = Ema::<1>::new(0.1);
            let mut b = Ema::<1>::new(0.1);
            a.update([a0]);
            b.update([b0]);
            let mut gap = (a0 - b0).abs();
            for x in xs {
                let d = (a.update([x])[0] - b.update([x])[0]).abs();
                prop_assert!((d - 0.9 * gap).abs() <= 1e-9 * (1.0 + gap));
                gap = d;
            }
        }

        #[test]
        fn limits_always_hold(prev_p in -3.0..25.0f64, prev_y in -30.0..30.0f64, dp in -1e3..1e3f64, dy in -1e3..1e3f64) {
            let l = ExoLimits::default();
            let v = limit_velocity(&l, (prev_p, prev_y), (prev_p + dp, prev_y + dy), 0.02);
            let ((p, y), _) = clamp_with_slide(&l, v);
            prop_assert!(l.contains((p, y)));
            let step = (p - prev_p).to_radians().hypot((y - prev_y).to_radians());
            prop_assert!(step <= 0.02 + 1e-12);
        }
    }
}
