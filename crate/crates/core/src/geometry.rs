//! Vector math, binocular focal points, blink interpolation and head
//! orientation conventions.
//!
//! Frame convention: right-handed, `x` right, `y` up, `z` forward. The
//! direction `(0, 0, 1)` is straight ahead (pitch = yaw = 0). Positive pitch
//! looks up, positive yaw looks right. Head roll is always zero.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Tolerance on `|g_l x g_r|` below which two gaze rays count as parallel.
pub const PARALLEL_EPS: f64 = 1e-9;

/// Head pitch is clamped to this magnitude by [`rotate_head`].
pub const MAX_HEAD_PITCH: f64 = 89.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn try_normalize(self, min_norm: f64) -> Option<Vec3> {
        let n = self.norm();
        if n < min_norm || !n.is_finite() {
            None
        } else {
            Some(self / n)
        }
    }

    /// Unit vector in the same direction. Zero stays zero.
    pub fn normalize(self) -> Vec3 {
        self.try_normalize(f64::MIN_POSITIVE).unwrap_or(Vec3::ZERO)
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Any unit vector perpendicular to `self` (which must be nonzero).
    pub fn any_perpendicular(self) -> Vec3 {
        let a = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            Vec3::new(1.0, 0.0, 0.0)
        } else if self.y.abs() <= self.z.abs() {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(0.0, 0.0, 1.0)
        };
        self.cross(a).normalize()
    }

    /// Rodrigues rotation of `self` about unit `axis` by `angle` radians.
    pub fn rotated(self, axis: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        self * c + axis.cross(self) * s + axis * (axis.dot(self) * (1.0 - c))
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Half-line from an eye origin along a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, s: f64) -> Vec3 {
        self.origin + self.direction * s
    }
}

/// Estimated 3-D fixation point of a binocular gaze.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalPoint {
    /// Midpoint of the shortest segment between the two gaze lines. For a
    /// degenerate (parallel) pair this holds the midpoint of the two origins
    /// and carries no meaning.
    pub point: Vec3,
    /// Length of the shortest segment between the two lines, meters.
    pub gap: f64,
    pub degenerate: bool,
}

/// Solves `A x = rhs` for a 3x3 system by Gaussian elimination with partial
/// pivoting. `cols` are the columns of `A`.
fn solve3(cols: [Vec3; 3], rhs: Vec3) -> Option<[f64; 3]> {
    let mut m = [
        [cols[0].x, cols[1].x, cols[2].x, rhs.x],
        [cols[0].y, cols[1].y, cols[2].y, rhs.y],
        [cols[0].z, cols[1].z, cols[2].z, rhs.z],
    ];
    for k in 0..3 {
        let pivot = (k..3)
            .max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs()))
            .unwrap();
        if m[pivot][k] == 0.0 {
            return None;
        }
        m.swap(k, pivot);
        for r in (k + 1)..3 {
            let f = m[r][k] / m[k][k];
            for c in k..4 {
                m[r][c] -= f * m[k][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut acc = m[k][3];
        for c in (k + 1)..3 {
            acc -= m[k][c] * x[c];
        }
        x[k] = acc / m[k][k];
    }
    Some(x)
}

/// Focal point of two gaze rays: the midpoint of the unique shortest segment
/// between the two (infinite) gaze lines.
///
/// The segment direction is `g_f = g_l x g_r`; the magnitudes come from
/// solving `c_l g_l - c_r g_r + c_f g_f = p_r - p_l`.
pub fn focal_point(left: &Ray, right: &Ray) -> FocalPoint {
    let gl = left.direction;
    let gr = right.direction;
    let gf = gl.cross(gr);
    let midpoint_of_origins = (left.origin + right.origin) * 0.5;
    let parallel = |gap: f64| FocalPoint {
        point: midpoint_of_origins,
        gap,
        degenerate: true,
    };
    let delta = right.origin - left.origin;
    if gf.norm() < PARALLEL_EPS {
        let along = gl * delta.dot(gl);
        return parallel((delta - along).norm());
    }
    match solve3([gl, -gr, gf], delta) {
        Some([cl, cr, cf]) => {
            let on_left = left.at(cl);
            let on_right = right.at(cr);
            FocalPoint {
                point: (on_left + on_right) * 0.5,
                gap: (cf * gf.norm()).abs(),
                degenerate: false,
            }
        }
        None => parallel(delta.norm()),
    }
}

/// Normalized linear interpolation between two gaze directions bracketing a
/// blink. `fraction = 0` gives `before`, `1` gives `after`.
pub fn interpolate_blink(before: Vec3, after: Vec3, fraction: f64) -> Result<Vec3, GeometryError> {
    let mixed = before * (1.0 - fraction) + after * fraction;
    mixed
        .try_normalize(1e-9)
        .ok_or(GeometryError::AntiparallelInterpolation)
}

/// `(pitch, yaw)` in radians of a unit direction. `yaw = atan2(x, z)`,
/// `pitch = asin(y)`. At the poles yaw is reported as 0.
pub fn dir_to_pitch_yaw(d: Vec3) -> (f64, f64) {
    let pitch = d.y.clamp(-1.0, 1.0).asin();
    let yaw = if d.x == 0.0 && d.z == 0.0 {
        0.0
    } else {
        d.x.atan2(d.z)
    };
    (pitch, yaw)
}

/// Inverse of [`dir_to_pitch_yaw`].
pub fn pitch_yaw_to_dir(pitch: f64, yaw: f64) -> Vec3 {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Vec3::new(cp * sy, sp, cp * cy)
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if (-PI..=PI).contains(&a) {
        return a;
    }
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Head orientation as pitch/yaw (radians). Roll is identically zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadOrientation {
    pub pitch: f64,
    pub yaw: f64,
}

impl HeadOrientation {
    pub fn new(pitch: f64, yaw: f64) -> Self {
        HeadOrientation { pitch, yaw }
    }

    pub fn from_forward(forward: Vec3) -> Self {
        let (pitch, yaw) = dir_to_pitch_yaw(forward);
        HeadOrientation { pitch, yaw }
    }

    pub fn forward(&self) -> Vec3 {
        pitch_yaw_to_dir(self.pitch, self.yaw)
    }

    pub fn roll(&self) -> f64 {
        0.0
    }

    /// Orthonormal head basis `(right, up, forward)` in world coordinates.
    pub fn basis(&self) -> [Vec3; 3] {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        [
            Vec3::new(cy, 0.0, -sy),
            Vec3::new(-sp * sy, cp, -sp * cy),
            Vec3::new(cp * sy, sp, cp * cy),
        ]
    }

    /// World-frame vector expressed in head coordinates.
    pub fn world_to_head(&self, v: Vec3) -> Vec3 {
        let [r, u, f] = self.basis();
        Vec3::new(v.dot(r), v.dot(u), v.dot(f))
    }

    /// Head-frame vector expressed in world coordinates.
    pub fn head_to_world(&self, v: Vec3) -> Vec3 {
        let [r, u, f] = self.basis();
        r * v.x + u * v.y + f * v.z
    }
}

/// Result of [`rotate_head`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotated {
    pub head: HeadOrientation,
    /// Pitch hit the +-89 degree clamp.
    pub saturated: bool,
}

/// Adds `(dpitch, dyaw)` radians to a head orientation. Pitch is clamped to
/// +-89 degrees; yaw is wrapped into `(-pi, pi]`.
pub fn rotate_head(h: HeadOrientation, dpitch: f64, dyaw: f64) -> Rotated {
    let raw = h.pitch + dpitch;
    let pitch = raw.clamp(-MAX_HEAD_PITCH, MAX_HEAD_PITCH);
    Rotated {
        head: HeadOrientation {
            pitch,
            yaw: wrap_angle(h.yaw + dyaw),
        },
        saturated: pitch != raw,
    }
}

pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}
