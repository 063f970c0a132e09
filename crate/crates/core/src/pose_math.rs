//! Geometry kernel shared by the planner, the bridge and the recorder.
//!
//! Orientation conventions used throughout the crate:
//!
//! * Quaternions are Hamilton, scalar-first, and always kept in canonical sign
//!   (`w >= 0`, ties broken by the first nonzero vector component).
//! * Roll-pitch-yaw is extrinsic X-Y-Z (fixed axes): roll about X, then pitch
//!   about Y, then yaw about Z, i.e. `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
//! * Angles are wrapped into the half-open interval `[-pi, pi)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance from `pi/2` (in pitch) below which a conversion is reported as gimbal locked.
pub const GIMBAL_LOCK_TOLERANCE: f64 = 1e-6;

const CANONICAL_W_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseMathError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("quaternion has zero norm")]
    ZeroNorm,
    #[error("axis map is singular")]
    SingularAxisMap,
    #[error("axis map scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("unknown axis map preset `{0}`")]
    UnknownPreset(String),
}

/// Maps any finite angle into `[-pi, pi)`.
///
/// `(delta + pi) mod 2pi - pi`, with the modulo taken as a Euclidean remainder
/// so an input of exactly `pi` lands on `-pi`.
pub fn wrap_angle(delta: f64) -> Result<f64, PoseMathError> {
    if !delta.is_finite() {
        return Err(PoseMathError::NonFinite("angle"));
    }
    Ok(wrap_finite(delta))
}

#[inline]
pub(crate) fn wrap_finite(delta: f64) -> f64 {
    let mut r = (delta + PI).rem_euclid(TAU);
    // rem_euclid may round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        r = 0.0;
    }
    r - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
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

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rpy {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Rpy {
    pub const ZERO: Rpy = Rpy { roll: 0.0, pitch: 0.0, yaw: 0.0 };

    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }

    /// Each component wrapped into `[-pi, pi)`.
    pub fn wrapped(&self) -> Rpy {
        Rpy::new(
            wrap_finite(self.roll),
            wrap_finite(self.pitch),
            wrap_finite(self.yaw),
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }
}

impl Add for Rpy {
    type Output = Rpy;
    fn add(self, o: Rpy) -> Rpy {
        Rpy::new(self.roll + o.roll, self.pitch + o.pitch, self.yaw + o.yaw)
    }
}

/// Unit quaternion, scalar first, canonical sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl fmt::Display for Quat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.w, self.x, self.y, self.z)
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes and canonicalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, PoseMathError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(PoseMathError::NonFinite("quaternion"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(PoseMathError::ZeroNorm);
        }
        Ok(Quat { w: w / n, x: x / n, y: y / n, z: z / n }.canonical())
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation of `angle` radians about a (not necessarily unit) axis.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, PoseMathError> {
        let n = axis.norm();
        if n == 0.0 || !n.is_finite() || !angle.is_finite() {
            return Err(PoseMathError::NonFinite("axis-angle"));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Quat::new(c, s * axis.x / n, s * axis.y / n, s * axis.z / n)
    }

    fn canonical(mut self) -> Self {
        // half-turns come out of trig with w ~ 1e-17; treat as exactly zero so
        // the vector tie-break applies
        if self.w.abs() < CANONICAL_W_EPS {
            self.w = 0.0;
        }
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        }
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quat) -> Quat {
        let (a, b) = (self, rhs);
        let raw = Quat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        };
        let n = raw.norm();
        Quat { w: raw.w / n, x: raw.x / n, y: raw.y / n, z: raw.z / n }.canonical()
    }

    /// Rotation angle between two orientations, in `[0, pi]`.
    pub fn geodesic_distance(&self, other: &Quat) -> f64 {
        // conj(self) * other, evaluated with atan2 to stay accurate near zero
        let (a, b) = (self, other);
        let w = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
        let x = a.w * b.x - a.x * b.w - a.y * b.z + a.z * b.y;
        let y = a.w * b.y + a.x * b.z - a.y * b.w - a.z * b.x;
        let z = a.w * b.z - a.x * b.y + a.y * b.x - a.z * b.w;
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
    }

    pub fn to_array_xyzw(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }
}

/// Result of a quaternion to roll-pitch-yaw conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpyConversion {
    pub rpy: Rpy,
    /// Pitch was within [`GIMBAL_LOCK_TOLERANCE`] of +-pi/2; yaw was pinned to zero
    /// and the whole twist assigned to roll.
    pub gimbal_lock: bool,
}

pub fn quat_to_rpy(q: &Quat) -> RpyConversion {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let sinp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
    let pitch = sinp.asin();
    if FRAC_PI_2 - pitch.abs() <= GIMBAL_LOCK_TOLERANCE {
        let pitch = FRAC_PI_2.copysign(sinp);
        let roll = wrap_finite(2.0 * x.atan2(w));
        return RpyConversion { rpy: Rpy::new(roll, pitch, 0.0), gimbal_lock: true };
    }
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    RpyConversion {
        rpy: Rpy::new(wrap_finite(roll), wrap_finite(pitch), wrap_finite(yaw)),
        gimbal_lock: false,
    }
}

pub fn rpy_to_quat(r: &Rpy) -> Result<Quat, PoseMathError> {
    if !r.is_finite() {
        return Err(PoseMathError::NonFinite("rpy"));
    }
    let (sr, cr) = (r.roll / 2.0).sin_cos();
    let (sp, cp) = (r.pitch / 2.0).sin_cos();
    let (sy, cy) = (r.yaw / 2.0).sin_cos();
    Quat::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
}

/// Static phone-to-robot axis alignment plus a scalar gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    m: [[f64; 3]; 3],
    scale: f64,
}

impl Default for AxisMap {
    fn default() -> Self {
        AxisMap { m: IDENTITY3, scale: 1.0 }
    }
}

const IDENTITY3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl AxisMap {
    pub fn new(m: [[f64; 3]; 3], scale: f64) -> Result<Self, PoseMathError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(PoseMathError::InvalidScale(scale));
        }
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PoseMathError::NonFinite("axis map"));
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det.abs() < 1e-12 {
            return Err(PoseMathError::SingularAxisMap);
        }
        Ok(Self { m, scale })
    }

    /// Named axis permutations.
    ///
    /// * `identity`: phone axes are robot axes.
    /// * `landscape`: phone held in landscape with the camera facing away from the
    ///   operator; phone forward (-Z) drives robot +X, phone right (+X) drives
    ///   robot -Y, phone up (+Y) drives robot +Z.
    pub fn preset(name: &str, scale: f64) -> Result<Self, PoseMathError> {
        let m = match name {
            "identity" => IDENTITY3,
            "landscape" => [[0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            other => return Err(PoseMathError::UnknownPreset(other.to_string())),
        };
        Self::new(m, scale)
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let a = v.to_array();
        let row = |r: &[f64; 3]| r[0] * a[0] + r[1] * a[1] + r[2] * a[2];
        Vec3::new(row(&self.m[0]), row(&self.m[1]), row(&self.m[2]))
    }
}

/// `r_initial + M (dp * S)`.
pub fn map_phone_delta(dp: Vec3, map: &AxisMap, r_initial: Vec3) -> Vec3 {
    r_initial + map.apply(dp * map.scale)
}

/// Per-component shortest-path difference `current - reference`.
pub fn rotation_delta(reference: &Rpy, current: &Rpy) -> Rpy {
    Rpy::new(
        wrap_finite(current.roll - reference.roll),
        wrap_finite(current.pitch - reference.pitch),
        wrap_finite(current.yaw - reference.yaw),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force reference: shift by whole turns until inside the interval.
    fn wrap_oracle(mut a: f64) -> f64 {
        while a >= PI {
            a -= TAU;
        }
        while a < -PI {
            a += TAU;
        }
        a
    }

    /// Rotation matrix for extrinsic X-Y-Z angles, built from elementary rotations.
    fn rot_from_rpy(r: f64, p: f64, y: f64) -> [[f64; 3]; 3] {
        let rx = [[1.0, 0.0, 0.0], [0.0, r.cos(), -r.sin()], [0.0, r.sin(), r.cos()]];
        let ry = [[p.cos(), 0.0, p.sin()], [0.0, 1.0, 0.0], [-p.sin(), 0.0, p.cos()]];
        let rz = [[y.cos(), -y.sin(), 0.0], [y.sin(), y.cos(), 0.0], [0.0, 0.0, 1.0]];
        matmul(&rz, &matmul(&ry, &rx))
    }

    fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn rot_from_quat(q: &Quat) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (q.w(), q.x(), q.y(), q.z());
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    fn assert_mat_close(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - b[i][j]).abs() < tol, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        let three_half_pi = 4.712389;
        let expected = wrap_oracle(three_half_pi);
        assert!((wrap_angle(three_half_pi).unwrap() - expected).abs() < 1e-12);
        assert!((expected - -1.570796).abs() < 1e-6);
        assert_eq!(wrap_angle(PI).unwrap(), -PI);
        assert_eq!(wrap_angle(-PI).unwrap(), -PI);
    }

    #[test]
    fn wrap_rejects_non_finite() {
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_tiny_negative_stays_in_range() {
        let w = wrap_angle(-PI - 1e-300).unwrap();
        assert!((-PI..PI).contains(&w));
    }

    #[test]
    fn quat_to_rpy_examples() {
        let c = quat_to_rpy(&Quat::IDENTITY);
        assert_eq!(c.rpy, Rpy::ZERO);
        assert!(!c.gimbal_lock);

        let qz = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2).unwrap();
        let r = quat_to_rpy(&qz).rpy;
        assert!(r.roll.abs() < 1e-12 && r.pitch.abs() < 1e-12);
        assert!((r.yaw - FRAC_PI_2).abs() < 1e-12);
        // matrix oracle agrees
        assert_mat_close(&rot_from_quat(&qz), &rot_from_rpy(0.0, 0.0, FRAC_PI_2), 1e-12);

        let qx = Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), FRAC_PI_2).unwrap();
        let r = quat_to_rpy(&qx).rpy;
        assert!((r.roll - FRAC_PI_2).abs() < 1e-12);
        assert!(r.pitch.abs() < 1e-12 && r.yaw.abs() < 1e-12);
    }

    #[test]
    fn rpy_to_quat_examples() {
        assert_eq!(rpy_to_quat(&Rpy::ZERO).unwrap(), Quat::IDENTITY);
        let q = rpy_to_quat(&Rpy::new(0.0, 0.0, PI)).unwrap();
        assert!(q.w().abs() < 1e-12 && q.w() >= 0.0);
        assert!((q.z() - 1.0).abs() < 1e-12);
        assert_mat_close(&rot_from_quat(&q), &rot_from_rpy(0.0, 0.0, PI), 1e-12);
    }

    #[test]
    fn canonical_sign_tie_break() {
        let q = Quat::new(0.0, 0.0, 0.0, -1.0).unwrap();
        assert_eq!(q.z(), 1.0);
        let q = Quat::new(0.0, -0.6, 0.8, 0.0).unwrap();
        assert!(q.x() > 0.0);
        assert!(Quat::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn gimbal_lock_is_flagged_and_twist_goes_to_roll() {
        for &pitch in &[FRAC_PI_2, -FRAC_PI_2] {
            for &(roll, yaw) in &[(0.3, 0.0), (-1.0, 0.4), (2.5, -2.0)] {
                let q = rpy_to_quat(&Rpy::new(roll, pitch, yaw)).unwrap();
                let c = quat_to_rpy(&q);
                assert!(c.gimbal_lock);
                assert_eq!(c.rpy.yaw, 0.0);
                let back = rpy_to_quat(&c.rpy).unwrap();
                assert!(back.geodesic_distance(&q) < 1e-6, "{pitch} {roll} {yaw}");
            }
        }
    }

    #[test]
    fn map_phone_delta_examples() {
        let r0 = Vec3::new(0.3, 0.1, 0.2);
        assert_eq!(map_phone_delta(Vec3::ZERO, &AxisMap::preset("landscape", 2.0).unwrap(), r0), r0);

        let half = AxisMap::new(IDENTITY3, 0.5).unwrap();
        let out = map_phone_delta(Vec3::new(0.2, 0.0, 0.0), &half, r0);
        assert!((out.x - 0.4).abs() < 1e-15 && out.y == 0.1 && out.z == 0.2);

        let fwd = AxisMap::preset("landscape", 1.0).unwrap();
        let out = map_phone_delta(Vec3::new(0.0, 0.0, -0.1), &fwd, Vec3::ZERO);
        assert_eq!(out, Vec3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn axis_map_validation() {
        assert!(AxisMap::new([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 1.0).is_err());
        assert!(AxisMap::new(IDENTITY3, 0.0).is_err());
        assert!(AxisMap::preset("portrait-upside-down", 1.0).is_err());
    }

    #[test]
    fn rotation_delta_examples() {
        let r = Rpy::new(0.1, -0.2, 0.3);
        assert_eq!(rotation_delta(&r, &r), Rpy::ZERO);
        let d = rotation_delta(&Rpy::new(0.0, 0.0, 3.0), &Rpy::new(0.0, 0.0, -3.0));
        assert!((d.yaw - wrap_oracle(-6.0)).abs() < 1e-12);
        assert!((d.yaw - 0.283185).abs() < 1e-6);
        let d = rotation_delta(&Rpy::ZERO, &r);
        assert!((d.roll - 0.1).abs() < 1e-15 && (d.pitch + 0.2).abs() < 1e-15 && (d.yaw - 0.3).abs() < 1e-15);
    }

    fn unit_quat() -> impl Strategy<Value = Quat> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter_map("zero", |(w, x, y, z)| Quat::new(w, x, y, z).ok())
    }

    proptest! {
        #[test]
        fn wrap_matches_oracle_and_is_periodic(a in -50.0f64..50.0, k in -3i32..=3) {
            let w = wrap_angle(a).unwrap();
            prop_assert!((-PI..PI).contains(&w));
            prop_assert!((w - wrap_oracle(a)).abs() < 1e-12);
            let shifted = wrap_angle(a + TAU * k as f64).unwrap();
            let diff = wrap_finite(shifted - w).abs();
            prop_assert!(diff < 1e-12);
        }

        #[test]
        fn quat_rpy_round_trip(q in unit_quat()) {
            let c = quat_to_rpy(&q);
            prop_assume!(c.rpy.pitch.abs() < FRAC_PI_2 - 0.05);
            let back = rpy_to_quat(&c.rpy).unwrap();
            prop_assert!(back.geodesic_distance(&q) < 1e-9);
            prop_assert!((back.norm() - 1.0).abs() < 1e-9);
            // matrix oracle
            let m = rot_from_rpy(c.rpy.roll, c.rpy.pitch, c.rpy.yaw);
            let mq = rot_from_quat(&q);
            for i in 0..3 { for j in 0..3 { prop_assert!((m[i][j] - mq[i][j]).abs() < 1e-9); } }
        }

        #[test]
        fn rpy_round_trip_reproduces_wrapped_input(r in -10.0f64..10.0, p in -1.5f64..1.5, y in -10.0f64..10.0) {
            let input = Rpy::new(r, p, y);
            let out = quat_to_rpy(&rpy_to_quat(&input).unwrap()).rpy;
            let w = input.wrapped();
            prop_assert!(wrap_finite(out.roll - w.roll).abs() < 1e-9);
            prop_assert!((out.pitch - w.pitch).abs() < 1e-9);
            prop_assert!(wrap_finite(out.yaw - w.yaw).abs() < 1e-9);
        }

        #[test]
        fn map_is_additive(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
                           bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0,
                           s in 0.1f64..3.0) {
            let m = AxisMap::preset("landscape", s).unwrap();
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            let lhs = map_phone_delta(a + b, &m, Vec3::ZERO);
            let rhs = map_phone_delta(a, &m, Vec3::ZERO) + map_phone_delta(b, &m, Vec3::ZERO);
            prop_assert!(lhs.distance(&rhs) < 1e-12);
        }

        #[test]
        fn rotation_delta_of_self_is_zero(r in -PI..PI, p in -PI..PI, y in -PI..PI) {
            let a = Rpy::new(r, p, y);
            prop_assert_eq!(rotation_delta(&a, &a), Rpy::ZERO);
        }
    }
}
