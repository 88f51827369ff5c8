//! Coordinate frames, line-of-sight geometry and relative kinematics.
//!
//! All positions and velocities live on the geocentric axes OX/OY/OZ.
//! Line-of-sight angles are measured in a linearly shifted copy of the
//! pursuer's launch frame (X', Y', Z'), fixed once at launch:
//! `epsilon` is the pitch angle of the LOS above the X'-Z' plane and
//! `eta` its yaw angle, with (0, 0) meaning the target lies along +X'.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cartesian vector on the geocentric axes (meters or meters/second).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoVector<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> GeoVector<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rodrigues rotation of `self` about the unit axis by `angle` radians.
    pub fn rotate_about(&self, axis: GeoVector<T>, angle: T) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        self.scale(c) + axis.cross(self).scale(s) + axis.scale(axis.dot(self) * (T::one() - c))
    }
}

impl<T: Real> std::ops::Add for GeoVector<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Real> std::ops::Sub for GeoVector<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Real> std::ops::Neg for GeoVector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Line-of-sight angles in the launch frame, radians.
///
/// `epsilon` in [-pi/2, pi/2], `eta` in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosAngles<T> {
    pub epsilon: T,
    pub eta: T,
}

impl<T: Real> LosAngles<T> {
    /// Magnitude sqrt(epsilon^2 + eta^2) of the LOS deflection.
    pub fn deflection(&self) -> T {
        (self.epsilon * self.epsilon + self.eta * self.eta).sqrt()
    }
}

/// Relative geometry of the evader with respect to the pursuer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState<T> {
    /// Position difference r_E - r_P, meters.
    pub d_vec: GeoVector<T>,
    /// Velocity difference v_E - v_P, meters/second.
    pub v_rel: GeoVector<T>,
    /// Euclidean norm of `d_vec`, meters.
    pub distance: T,
}

/// Orthonormal launch-frame basis: the geocentric directions of the
/// X', Y', Z' axes. Fixed at scenario start and never recomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaunchFrame<T> {
    pub x_axis: GeoVector<T>,
    pub y_axis: GeoVector<T>,
    pub z_axis: GeoVector<T>,
}

const ORTHONORMALITY_TOL: f64 = 1e-9;

impl<T: Real> LaunchFrame<T> {
    /// Build from explicit axes, checking orthonormality to 1e-9.
    pub fn new(x_axis: GeoVector<T>, y_axis: GeoVector<T>, z_axis: GeoVector<T>) -> Result<Self> {
        let tol = T::of(ORTHONORMALITY_TOL);
        let axes = [x_axis, y_axis, z_axis];
        for (i, a) in axes.iter().enumerate() {
            for (j, b) in axes.iter().enumerate() {
                let want = if i == j { T::one() } else { T::zero() };
                if (a.dot(b) - want).abs() > tol {
                    return Err(Error::InvalidFrame(format!(
                        "axes {i} and {j} violate orthonormality beyond {ORTHONORMALITY_TOL}"
                    )));
                }
            }
        }
        Ok(Self {
            x_axis,
            y_axis,
            z_axis,
        })
    }

    /// Build from a 3x3 matrix whose *columns* are the frame axes
    /// expressed on the geocentric axes (a rotation matrix mapping
    /// frame coordinates to geocentric coordinates).
    pub fn from_columns(m: [[T; 3]; 3]) -> Result<Self> {
        Self::new(
            GeoVector::new(m[0][0], m[1][0], m[2][0]),
            GeoVector::new(m[0][1], m[1][1], m[2][1]),
            GeoVector::new(m[0][2], m[1][2], m[2][2]),
        )
    }

    /// Launch frame at the pursuer's initial position: Y' is the local
    /// up (radial) direction and X' is the initial LOS to the evader
    /// projected onto the local horizontal plane.
    pub fn from_launch(r_pursuer: GeoVector<T>, r_evader: GeoVector<T>) -> Result<Self> {
        let up = r_pursuer
            .normalized()
            .ok_or_else(|| Error::DegenerateGeometry("pursuer at the geocenter".into()))?;
        let los = r_evader - r_pursuer;
        let horiz = los - up.scale(los.dot(&up));
        let x_axis = horiz.normalized().ok_or_else(|| {
            Error::DegenerateGeometry("initial LOS parallel to the local vertical".into())
        })?;
        let z_axis = x_axis.cross(&up);
        Self::new(x_axis, up, z_axis)
    }

    /// Express a geocentric vector on this frame's axes.
    pub fn to_frame(&self, v: GeoVector<T>) -> GeoVector<T> {
        GeoVector::new(
            self.x_axis.dot(&v),
            self.y_axis.dot(&v),
            self.z_axis.dot(&v),
        )
    }
}

/// Evader position relative to the pursuer, expressed in the shifted
/// launch frame.
pub fn launch_frame_offset<T: Real>(
    r_pursuer: GeoVector<T>,
    frame: &LaunchFrame<T>,
    r_evader: GeoVector<T>,
) -> GeoVector<T> {
    frame.to_frame(r_evader - r_pursuer)
}

/// LOS angles of a launch-frame offset vector.
///
/// epsilon = atan2(dy', sqrt(dx'^2 + dz'^2)), eta = atan2(-dz', dx'),
/// so (0, 0) places the target along +X'.
pub fn los_angles<T: Real>(offset_launch: GeoVector<T>) -> Result<LosAngles<T>> {
    if offset_launch.norm() == T::zero() {
        return Err(Error::DegenerateGeometry(
            "zero offset has no line of sight".into(),
        ));
    }
    let horiz = (offset_launch.x * offset_launch.x + offset_launch.z * offset_launch.z).sqrt();
    Ok(LosAngles {
        epsilon: offset_launch.y.atan2(horiz),
        eta: (-offset_launch.z).atan2(offset_launch.x),
    })
}

/// Unit vector reconstructed from LOS angles (inverse of [`los_angles`]
/// up to scale).
pub fn los_direction<T: Real>(angles: LosAngles<T>) -> GeoVector<T> {
    let (se, ce) = (angles.epsilon.sin(), angles.epsilon.cos());
    let (sn, cn) = (angles.eta.sin(), angles.eta.cos());
    GeoVector::new(ce * cn, se, -(ce * sn))
}

/// Relative position, velocity and scalar distance (evader minus pursuer).
pub fn relative_state<T: Real>(
    pos_e: GeoVector<T>,
    vel_e: GeoVector<T>,
    pos_p: GeoVector<T>,
    vel_p: GeoVector<T>,
) -> RelativeState<T> {
    let d_vec = pos_e - pos_p;
    RelativeState {
        d_vec,
        v_rel: vel_e - vel_p,
        distance: d_vec.norm(),
    }
}

/// Wrap an angle difference onto the shortest arc (-pi, pi].
pub fn wrap_angle<T: Real>(x: T) -> T {
    let pi = T::of(std::f64::consts::PI);
    let two_pi = pi + pi;
    let mut r = (x + pi) % two_pi;
    if r <= T::zero() {
        r = r + two_pi;
    }
    r - pi
}

/// Backward finite-difference LOS rates (d epsilon/dt, d eta/dt), with
/// eta differenced on the shortest arc.
pub fn los_rates<T: Real>(prev: LosAngles<T>, curr: LosAngles<T>, dt: T) -> Result<(T, T)> {
    if dt <= T::zero() {
        return Err(Error::InvalidStep(format!("dt = {dt} must be positive")));
    }
    let d_eps = (curr.epsilon - prev.epsilon) / dt;
    let d_eta = wrap_angle(curr.eta - prev.eta) / dt;
    Ok((d_eps, d_eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn v(x: f64, y: f64, z: f64) -> GeoVector<f64> {
        GeoVector::new(x, y, z)
    }

    fn identity_frame() -> LaunchFrame<f64> {
        LaunchFrame::new(v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn offset_coincident_points_is_zero() {
        let f = identity_frame();
        let r = v(1.0e6, 2.0e6, 3.0e6);
        assert_eq!(launch_frame_offset(r, &f, r), v(0.0, 0.0, 0.0));
    }

    #[test]
    fn offset_identity_frame_passes_through() {
        let f = identity_frame();
        let r_p = v(10.0, 20.0, 30.0);
        let r_e = v(11.0, 22.0, 33.0);
        assert_eq!(launch_frame_offset(r_p, &f, r_e), v(1.0, 2.0, 3.0));
    }

    #[test]
    fn offset_rotated_frame_matches_hand_rotation() {
        // Columns of R_z(90 deg) as the frame axes; a unit offset along
        // geocentric X lands on (0, -1, 0) in frame coordinates.
        let f = LaunchFrame::from_columns([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
            .unwrap();
        let got = launch_frame_offset(v(0.0, 0.0, 0.0), &f, v(1.0, 0.0, 0.0));
        assert_relative_eq!(got.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(got.y, -1.0, epsilon = 1e-12);
        assert_relative_eq!(got.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let err = LaunchFrame::new(v(1.0, 0.0, 0.0), v(0.5, 1.0, 0.0), v(0.0, 0.0, 1.0));
        assert!(matches!(err, Err(Error::InvalidFrame(_))));
    }

    #[test]
    fn los_angles_dead_ahead() {
        let a = los_angles(v(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(a.epsilon, 0.0);
        assert_eq!(a.eta, 0.0);
    }

    #[test]
    fn los_angles_directly_above() {
        let a = los_angles(v(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(a.epsilon, FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(a.eta, 0.0);
    }

    #[test]
    fn los_angles_forty_five_up() {
        let a = los_angles(v(1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(a.epsilon, FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(a.eta, 0.0);
    }

    #[test]
    fn los_angles_zero_offset_errors() {
        assert!(matches!(
            los_angles(v(0.0, 0.0, 0.0)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn relative_state_345_triangle() {
        let r = relative_state(
            v(3.0, 4.0, 0.0),
            v(0.0, 0.0, 0.0),
            v(0.0, 0.0, 0.0),
            v(0.0, 0.0, 0.0),
        );
        assert_eq!(r.distance, 5.0);
    }

    #[test]
    fn relative_state_coincident() {
        let p = v(1.0, 2.0, 3.0);
        let r = relative_state(p, v(0.0, 0.0, 0.0), p, v(0.0, 0.0, 0.0));
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn los_rates_stationary() {
        let a = LosAngles {
            epsilon: 0.3,
            eta: -1.2,
        };
        assert_eq!(los_rates(a, a, 0.01).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn los_rates_finite_difference() {
        let prev = LosAngles {
            epsilon: 0.10,
            eta: 0.0,
        };
        let curr = LosAngles {
            epsilon: 0.11,
            eta: 0.0,
        };
        let (de, dn) = los_rates(prev, curr, 0.01).unwrap();
        assert_relative_eq!(de, 1.0, epsilon = 1e-12);
        assert_eq!(dn, 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)] // 3.14 is deliberately not pi here
    fn los_rates_eta_wraps_shortest_arc() {
        let prev = LosAngles {
            epsilon: 0.0,
            eta: 3.14,
        };
        let curr = LosAngles {
            epsilon: 0.0,
            eta: -3.14,
        };
        let (_, dn) = los_rates(prev, curr, 0.01).unwrap();
        // Oracle: the short way across the branch cut is
        // 2*pi - 6.28 = 0.0031853... rad, not -6.28 rad.
        assert_relative_eq!(dn, (2.0 * PI - 6.28) / 0.01, epsilon = 1e-9);
        assert!(dn > 0.0 && dn < 1.0);
    }

    #[test]
    fn los_rates_rejects_bad_dt() {
        let a = LosAngles {
            epsilon: 0.0,
            eta: 0.0,
        };
        assert!(matches!(los_rates(a, a, 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(los_rates(a, a, -0.1), Err(Error::InvalidStep(_))));
    }

    proptest! {
        #[test]
        fn angles_reconstruct_offset(
            x in -1.0e6_f64..1.0e6,
            y in -1.0e6_f64..1.0e6,
            z in -1.0e6_f64..1.0e6,
        ) {
            let off = v(x, y, z);
            prop_assume!(off.norm() > 1.0);
            let a = los_angles(off).unwrap();
            let back = los_direction(a).scale(off.norm());
            prop_assert!((back - off).norm() <= 1e-9 * off.norm());
        }

        #[test]
        fn relative_state_antisymmetry(
            ex in -1.0e7_f64..1.0e7, ey in -1.0e7_f64..1.0e7, ez in -1.0e7_f64..1.0e7,
            px in -1.0e7_f64..1.0e7, py in -1.0e7_f64..1.0e7, pz in -1.0e7_f64..1.0e7,
        ) {
            let (pe, pp) = (v(ex, ey, ez), v(px, py, pz));
            let fwd = relative_state(pe, v(1.0, 0.0, 0.0), pp, v(0.0, 1.0, 0.0));
            let rev = relative_state(pp, v(0.0, 1.0, 0.0), pe, v(1.0, 0.0, 0.0));
            prop_assert_eq!(fwd.d_vec, -rev.d_vec);
            prop_assert_eq!(fwd.distance, rev.distance);
        }

        #[test]
        fn constant_sequence_has_zero_rates(
            eps in -1.5_f64..1.5,
            eta in -3.1_f64..3.1,
            dt in 1e-4_f64..1.0,
        ) {
            let a = LosAngles { epsilon: eps, eta };
            prop_assert_eq!(los_rates(a, a, dt).unwrap(), (0.0, 0.0));
        }

        #[test]
        fn distance_matches_dvec_norm(
            ex in -1.0e7_f64..1.0e7, ey in -1.0e7_f64..1.0e7, ez in -1.0e7_f64..1.0e7,
        ) {
            let r = relative_state(v(ex, ey, ez), GeoVector::zero(), GeoVector::zero(), GeoVector::zero());
            prop_assert!((r.distance - r.d_vec.norm()).abs() <= 1e-9 * r.distance.max(1.0));
        }
    }
}
