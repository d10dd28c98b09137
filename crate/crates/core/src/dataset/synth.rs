//! Synthetic task trajectories with an idealized subject.
//!
//! The subject sits at the origin facing `+z`. Its eyes aim exactly at the
//! active target every sample. The head follows the cyclopean gaze per axis
//! with a first-order lag gated by a soft deadzone:
//!
//! `rate(x) = gain * x / (1 + exp(sharpness * (deadzone - |x|)))`  (deg/s)
//!
//! where `x` is the head-relative gaze angle on that axis.
//!
//! All target positions stay inside the view frustum: the projected angles
//! `atan2(x, z)` and `atan2(y, z)` are both within `cone_half_angle`. That
//! region is convex, so straight target paths never leave it.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GazeSample, Task, Trajectory};
use crate::controllers::{gaze_angles_deg, AxisLaw, AxisParams, VectorParams};
use crate::error::DatasetError;
use crate::geometry::{rotate_head, HeadOrientation, Vec3};
use crate::seed::{self, Rng as SeedRng};

/// Head-follow behaviour of the idealized subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadOracle {
    /// Lag gain, 1/s.
    pub gain: f64,
    /// Gaze angle at the gate's inflection, degrees.
    pub deadzone_deg: f64,
    /// Gate steepness, 1/degree.
    pub sharpness: f64,
}

impl Default for HeadOracle {
    fn default() -> Self {
        HeadOracle {
            gain: 4.0,
            deadzone_deg: 10.0,
            sharpness: 0.5,
        }
    }
}

impl HeadOracle {
    /// The same law expressed as vector-controller parameters.
    pub fn as_vector_params(&self) -> VectorParams {
        let law = AxisLaw {
            v: self.gain,
            a: self.sharpness,
            b: self.deadzone_deg,
            c: 0.0,
        };
        VectorParams {
            pitch: AxisParams::symmetric(law),
            yaw: AxisParams::symmetric(law),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Half-angle of the 140 x 140 degree target region, per axis.
    pub cone_half_angle: f64,
    /// Linear pursuit speed, m/s.
    pub linear_speed: f64,
    /// Arc pursuit angular speed about the arc center, rad/s.
    pub arc_angular_speed: f64,
    /// Rapid-task spawn distance, m.
    pub spawn_distance: f64,
    /// Continuous fixation that consumes a rapid-task target, s.
    pub fixation_time: f64,
    /// Rapid-task spawn half-angle per axis, degrees.
    pub spawn_cone: f64,
    /// Trial length, s.
    pub duration: f64,
    pub rate_hz: f64,
    /// Rapid-task approach speed, m/s.
    pub approach_speed: f64,
    /// Cube edge, m. A cube closer than this to the subject has reached it.
    pub target_size: f64,
    /// Gaze-to-cube angle that counts as fixating, degrees.
    pub fixation_tolerance: f64,
    /// Half the interpupillary distance, m.
    pub eye_half_ipd: f64,
    pub head: HeadOracle,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            cone_half_angle: 70.0,
            linear_speed: 5.0,
            arc_angular_speed: 1.0,
            spawn_distance: 10.0,
            fixation_time: 0.3,
            spawn_cone: 60.0,
            duration: 90.0,
            rate_hz: super::BASE_RATE_HZ,
            approach_speed: 1.0,
            target_size: 0.5,
            fixation_tolerance: 2.0,
            eye_half_ipd: 0.03,
            head: HeadOracle::default(),
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let positive = [
            ("cone_half_angle", self.cone_half_angle),
            ("linear_speed", self.linear_speed),
            ("arc_angular_speed", self.arc_angular_speed),
            ("spawn_distance", self.spawn_distance),
            ("fixation_time", self.fixation_time),
            ("spawn_cone", self.spawn_cone),
            ("duration", self.duration),
            ("rate_hz", self.rate_hz),
            ("approach_speed", self.approach_speed),
            ("target_size", self.target_size),
            ("fixation_tolerance", self.fixation_tolerance),
            ("eye_half_ipd", self.eye_half_ipd),
            ("head.gain", self.head.gain),
            ("head.sharpness", self.head.sharpness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DatasetError::BadConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cone_half_angle > 89.0 {
            return Err(DatasetError::BadConfig("cone_half_angle must be below 90".into()));
        }
        if self.spawn_cone > self.cone_half_angle {
            return Err(DatasetError::BadConfig("spawn_cone exceeds cone_half_angle".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.rate_hz).round() as usize
    }

    /// Whether `p` lies in the view frustum (projected angles within the cone).
    pub fn in_cone(&self, p: Vec3) -> bool {
        in_frustum(p, self.cone_half_angle)
    }
}

/// `atan2(x, z)` and `atan2(y, z)` in degrees.
pub fn projected_angles(p: Vec3) -> (f64, f64) {
    (p.x.atan2(p.z).to_degrees(), p.y.atan2(p.z).to_degrees())
}

fn in_frustum(p: Vec3, half_angle_deg: f64) -> bool {
    let (a, b) = projected_angles(p);
    p.z > 0.0 && a.abs() <= half_angle_deg && b.abs() <= half_angle_deg
}

/// Point at distance `dist` with projected angles `(yaw, pitch)` degrees.
fn from_projected(yaw_deg: f64, pitch_deg: f64, dist: f64) -> Vec3 {
    Vec3::new(yaw_deg.to_radians().tan(), pitch_deg.to_radians().tan(), 1.0).normalize() * dist
}

/// Geometry of one target path piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line { from: Vec3, to: Vec3 },
    Arc { center: Vec3, radius: f64, start: Vec3, normal: Vec3, sweep: f64 },
    /// Rapid tasks: an active cube was selected.
    Fixation { cube: usize },
}

/// Scene state at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFrame {
    pub t: f64,
    /// Where the subject is looking.
    pub active: Vec3,
    /// Index into [`TaskOutput::segments`].
    pub segment: usize,
    /// Every cube in the scene (targets first, then distractors).
    pub cubes: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RespawnReason {
    Fixated,
    Reached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespawnEvent {
    pub t: f64,
    pub cube: usize,
    pub reason: RespawnReason,
    /// Continuous fixation on the cube before it respawned, s.
    pub fixation: f64,
}

#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub targets: Vec<TargetFrame>,
    pub segments: Vec<Segment>,
    pub respawns: Vec<RespawnEvent>,
    pub oracle: Trajectory,
}

/// Generates one trial. Deterministic in `seed`.
pub fn generate_task(task: Task, config: &TaskConfig, seed: u64) -> Result<TaskOutput, DatasetError> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let mut scene: Box<dyn Scene> = match task {
        Task::LinearPursuit => Box::new(LinearScene::new(config, &mut rng)),
        Task::ArcPursuit => Box::new(ArcScene::new(config, &mut rng)),
        Task::RapidSearch => Box::new(RapidScene::new(config, 0, &mut rng)),
        Task::RapidAvoidance => Box::new(RapidScene::new(config, 3, &mut rng)),
    };
    let n = config.samples();
    let dt = 1.0 / config.rate_hz;
    let head_law = config.head.as_vector_params();
    let head_pos = Vec3::ZERO;
    let eye_offsets = [
        Vec3::new(-config.eye_half_ipd, 0.0, 0.0),
        Vec3::new(config.eye_half_ipd, 0.0, 0.0),
    ];
    let mut head = HeadOrientation::default();
    let mut targets = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let frame = scene.frame(t, &mut rng);
        let lo = head_pos + head.head_to_world(eye_offsets[0]);
        let ro = head_pos + head.head_to_world(eye_offsets[1]);
        let ld = (frame.active - lo).normalize();
        let rd = (frame.active - ro).normalize();
        samples.push(GazeSample {
            t,
            head_pos,
            head_dir: head.forward(),
            left_origin: lo,
            left_dir: ld,
            right_origin: ro,
            right_dir: rd,
            valid: true,
        });
        targets.push(frame);
        let (gp, gy) = gaze_angles_deg(head.world_to_head(ld), head.world_to_head(rd));
        let (dp, dy) = crate::controllers::vector_step(&head_law, gp, gy, dt);
        head = rotate_head(head, dp.to_radians(), dy.to_radians()).head;
    }
    let (segments, respawns) = scene.finish();
    Ok(TaskOutput {
        targets,
        segments,
        respawns,
        oracle: Trajectory {
            participant: 0,
            task,
            trial: 0,
            rate_hz: config.rate_hz,
            samples,
        },
    })
}

/// Generates `trials` trials for one participant. With `task = None` the
/// trials cycle through the four tasks (three each for twelve trials).
pub fn generate_participant(
    participant: u32,
    task: Option<Task>,
    trials: u32,
    config: &TaskConfig,
    global_seed: u64,
) -> Result<Vec<Trajectory>, DatasetError> {
    (0..trials)
        .map(|trial| {
            let task = task.unwrap_or(Task::ALL[(trial as usize) % 4]);
            let job = format!("generate/p{participant}/t{trial}/{task}");
            let mut out = generate_task(task, config, seed::derive_seed(global_seed, &job))?;
            out.oracle.participant = participant;
            out.oracle.trial = trial;
            Ok(out.oracle)
        })
        .collect()
}

trait Scene {
    fn frame(&mut self, t: f64, rng: &mut SeedRng) -> TargetFrame;
    fn finish(self: Box<Self>) -> (Vec<Segment>, Vec<RespawnEvent>);
}

// ------------------------------------------------------------ linear pursuit

struct LinearScene {
    cone: f64,
    speed: f64,
    dist_range: (f64, f64),
    segments: Vec<Segment>,
    t0: f64,
    duration: f64,
}

impl LinearScene {
    fn new(cfg: &TaskConfig, rng: &mut SeedRng) -> Self {
        let mut s = LinearScene {
            cone: cfg.cone_half_angle,
            speed: cfg.linear_speed,
            dist_range: (0.5 * cfg.spawn_distance, 1.5 * cfg.spawn_distance),
            segments: Vec::new(),
            t0: 0.0,
            duration: 0.0,
        };
        s.next_segment(Vec3::new(0.0, 0.0, cfg.spawn_distance), rng);
        s
    }

    fn next_segment(&mut self, from: Vec3, rng: &mut SeedRng) {
        let to = loop {
            let p = from_projected(
                rng.random_range(-self.cone..=self.cone),
                rng.random_range(-self.cone..=self.cone),
                rng.random_range(self.dist_range.0..=self.dist_range.1),
            );
            if p.distance(from) > 1.0 {
                break p;
            }
        };
        self.duration = from.distance(to) / self.speed;
        self.segments.push(Segment::Line { from, to });
    }
}

impl Scene for LinearScene {
    fn frame(&mut self, t: f64, rng: &mut SeedRng) -> TargetFrame {
        while t - self.t0 >= self.duration {
            let Segment::Line { to, .. } = *self.segments.last().unwrap() else { unreachable!() };
            self.t0 += self.duration;
            self.next_segment(to, rng);
        }
        let Segment::Line { from, to } = *self.segments.last().unwrap() else { unreachable!() };
        let dir = (to - from).normalize();
        let active = from + dir * (self.speed * (t - self.t0));
        TargetFrame {
            t,
            active,
            segment: self.segments.len() - 1,
            cubes: vec![active],
        }
    }

    fn finish(self: Box<Self>) -> (Vec<Segment>, Vec<RespawnEvent>) {
        (self.segments, Vec::new())
    }
}

// --------------------------------------------------------------- arc pursuit

struct ArcScene {
    cone: f64,
    omega: f64,
    rate: f64,
    segments: Vec<Segment>,
    t0: f64,
    duration: f64,
}

/// Frustum margin kept by arc samples, degrees.
const ARC_MARGIN: f64 = 1.0;
const ARC_MIN_DEPTH: f64 = 2.0;
const ARC_MAX_RANGE: f64 = 20.0;

fn arc_point(center: Vec3, radius: f64, start: Vec3, normal: Vec3, phi: f64) -> Vec3 {
    // start is the unit vector from the center to the arc's first point.
    let w = normal.cross(start);
    center + (start * phi.cos() + w * phi.sin()) * radius
}

impl ArcScene {
    fn new(cfg: &TaskConfig, rng: &mut SeedRng) -> Self {
        let mut s = ArcScene {
            cone: cfg.cone_half_angle,
            omega: cfg.arc_angular_speed,
            rate: cfg.rate_hz,
            segments: Vec::new(),
            t0: 0.0,
            duration: 0.0,
        };
        s.next_segment(Vec3::new(0.0, 0.0, cfg.spawn_distance), rng);
        s
    }

    fn arc_ok(&self, center: Vec3, radius: f64, start: Vec3, normal: Vec3, sweep: f64) -> bool {
        // Check every sample time the arc will cover, plus its end point.
        let dt = 1.0 / self.rate;
        let first = (self.t0 / dt).ceil() as usize;
        let dur = sweep / self.omega;
        let ok = |p: Vec3| {
            in_frustum(p, self.cone - ARC_MARGIN) && p.z >= ARC_MIN_DEPTH && p.norm() <= ARC_MAX_RANGE
        };
        let mut i = first;
        loop {
            let t = i as f64 * dt - self.t0;
            if t > dur {
                break;
            }
            if !ok(arc_point(center, radius, start, normal, self.omega * t)) {
                return false;
            }
            i += 1;
        }
        ok(arc_point(center, radius, start, normal, sweep))
    }

    fn next_segment(&mut self, from: Vec3, rng: &mut SeedRng) {
        for attempt in 0..1000 {
            let shrink = if attempt < 500 { 1.0 } else { 0.25 };
            let radius = rng.random_range(1.0..4.0) * shrink;
            let sweep = rng.random_range(PI / 3.0..1.5 * PI) * shrink;
            let normal = random_unit(rng);
            let start = normal.any_perpendicular().rotated(normal, rng.random_range(0.0..TAU));
            let center = from - start * radius;
            if self.arc_ok(center, radius, start, normal, sweep) {
                self.push(center, radius, start, normal, sweep);
                return;
            }
        }
        // Tiny arc; the previous end point kept the margin, so this stays in.
        let normal = Vec3::new(0.0, 0.0, 1.0);
        let start = Vec3::new(1.0, 0.0, 0.0);
        let radius = 0.25;
        self.push(from - start * radius, radius, start, normal, 0.05);
    }

    fn push(&mut self, center: Vec3, radius: f64, start: Vec3, normal: Vec3, sweep: f64) {
        self.duration = sweep / self.omega;
        self.segments.push(Segment::Arc {
            center,
            radius,
            start,
            normal,
            sweep,
        });
    }
}

impl Scene for ArcScene {
    fn frame(&mut self, t: f64, rng: &mut SeedRng) -> TargetFrame {
        while t - self.t0 >= self.duration {
            let Segment::Arc { center, radius, start, normal, sweep } = *self.segments.last().unwrap() else {
                unreachable!()
            };
            let end = arc_point(center, radius, start, normal, sweep);
            self.t0 += self.duration;
            self.next_segment(end, rng);
        }
        let Segment::Arc { center, radius, start, normal, .. } = *self.segments.last().unwrap() else {
            unreachable!()
        };
        let active = arc_point(center, radius, start, normal, self.omega * (t - self.t0));
        TargetFrame {
            t,
            active,
            segment: self.segments.len() - 1,
            cubes: vec![active],
        }
    }

    fn finish(self: Box<Self>) -> (Vec<Segment>, Vec<RespawnEvent>) {
        (self.segments, Vec::new())
    }
}

fn random_unit(rng: &mut SeedRng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

// ------------------------------------------------------------- rapid search

struct Cube {
    spawn: Vec3,
    spawned_at: f64,
}

struct RapidScene {
    spawn_cone: f64,
    spawn_distance: f64,
    speed: f64,
    reach: f64,
    fixation_tolerance: f64,
    fixation_samples: usize,
    rate: f64,
    targets: Vec<Cube>,
    distractors: Vec<Cube>,
    active: usize,
    /// Cyclopean gaze direction at the previous sample.
    gaze: Vec3,
    fixated_samples: usize,
    segments: Vec<Segment>,
    respawns: Vec<RespawnEvent>,
}

impl RapidScene {
    fn new(cfg: &TaskConfig, distractors: usize, rng: &mut SeedRng) -> Self {
        let mut s = RapidScene {
            spawn_cone: cfg.spawn_cone,
            spawn_distance: cfg.spawn_distance,
            speed: cfg.approach_speed,
            reach: cfg.target_size,
            fixation_tolerance: cfg.fixation_tolerance,
            // Integer sample count so the 0.3 s threshold is exact.
            fixation_samples: (cfg.fixation_time * cfg.rate_hz - 1e-9).ceil() as usize,
            rate: cfg.rate_hz,
            targets: Vec::new(),
            distractors: Vec::new(),
            active: 0,
            gaze: Vec3::FORWARD,
            fixated_samples: 0,
            segments: Vec::new(),
            respawns: Vec::new(),
        };
        for _ in 0..3 {
            let c = s.spawn(0.0, rng);
            s.targets.push(c);
        }
        for _ in 0..distractors {
            let c = s.spawn(0.0, rng);
            s.distractors.push(c);
        }
        s.select(0.0);
        s
    }

    fn spawn(&self, t: f64, rng: &mut SeedRng) -> Cube {
        Cube {
            spawn: from_projected(
                rng.random_range(-self.spawn_cone..=self.spawn_cone),
                rng.random_range(-self.spawn_cone..=self.spawn_cone),
                self.spawn_distance,
            ),
            spawned_at: t,
        }
    }

    fn position(&self, c: &Cube, t: f64) -> Vec3 {
        let toward = -c.spawn.normalize();
        c.spawn + toward * (self.speed * (t - c.spawned_at))
    }

    /// Looks at the target closest in angle to the current gaze.
    fn select(&mut self, t: f64) {
        let gaze = self.gaze;
        let best = (0..self.targets.len())
            .min_by(|&a, &b| {
                let da = self.position(&self.targets[a], t).normalize().dot(gaze);
                let db = self.position(&self.targets[b], t).normalize().dot(gaze);
                db.total_cmp(&da)
            })
            .unwrap();
        self.active = best;
        self.fixated_samples = 0;
        self.segments.push(Segment::Fixation { cube: best });
    }
}

impl Scene for RapidScene {
    fn frame(&mut self, t: f64, rng: &mut SeedRng) -> TargetFrame {
        let mut reselect = false;
        // Consumed by fixation.
        if self.fixated_samples >= self.fixation_samples {
            self.respawns.push(RespawnEvent {
                t,
                cube: self.active,
                reason: RespawnReason::Fixated,
                fixation: self.fixated_samples as f64 / self.rate,
            });
            self.targets[self.active] = self.spawn(t, rng);
            reselect = true;
        }
        for k in 0..self.targets.len() {
            if self.position(&self.targets[k], t).norm() <= self.reach {
                let fixation = if k == self.active && !reselect {
                    self.fixated_samples as f64 / self.rate
                } else {
                    0.0
                };
                self.respawns.push(RespawnEvent {
                    t,
                    cube: k,
                    reason: RespawnReason::Reached,
                    fixation,
                });
                self.targets[k] = self.spawn(t, rng);
                reselect |= k == self.active;
            }
        }
        for k in 0..self.distractors.len() {
            if self.position(&self.distractors[k], t).norm() <= self.reach {
                self.distractors[k] = self.spawn(t, rng);
            }
        }
        if reselect {
            self.select(t);
        }
        let active = self.position(&self.targets[self.active], t);
        // Fixation continues while the previous gaze already sat on the cube;
        // a saccade to a new cube restarts the count.
        let dir = active.normalize();
        let off = dir.dot(self.gaze).clamp(-1.0, 1.0).acos().to_degrees();
        if off <= self.fixation_tolerance {
            self.fixated_samples += 1;
        } else {
            self.fixated_samples = 0;
        }
        self.gaze = dir;
        let cubes = self
            .targets
            .iter()
            .chain(&self.distractors)
            .map(|c| self.position(c, t))
            .collect();
        TargetFrame {
            t,
            active,
            segment: self.segments.len() - 1,
            cubes,
        }
    }

    fn finish(self: Box<Self>) -> (Vec<Segment>, Vec<RespawnEvent>) {
        (self.segments, self.respawns)
    }
}
