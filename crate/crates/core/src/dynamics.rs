//! Point-mass vehicle model: inverse-square gravity, a simplified
//! control/aero force model, composite-angle arithmetic and RK4 time
//! integration.
//!
//! The simplified force model works directly in accelerations: a constant
//! axial term along the velocity (thrust minus trim drag), a lateral term
//! proportional to the commanded incidence angle, and a quadratic axial
//! penalty for flying at incidence. Masses therefore cancel and default
//! to 1 kg.

use crate::error::{Error, Result};
use crate::frames::GeoVector;
use crate::scalar::Real;

/// Gravitational parameter of the Earth, m^3/s^2.
pub const MU_EARTH: f64 = 3.986004418e14;

/// Mean Earth radius used for altitude checks, m.
pub const EARTH_RADIUS: f64 = 6_371_000.0;

/// Translational state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState<T> {
    /// Geocentric position, m.
    pub position: GeoVector<T>,
    /// Velocity on the geocentric axes, m/s.
    pub velocity: GeoVector<T>,
    /// Vehicle mass, kg. Carried for completeness; the simplified force
    /// model is written in accelerations, so it cancels.
    pub mass: T,
}

impl<T: Real> VehicleState<T> {
    pub fn new(position: GeoVector<T>, velocity: GeoVector<T>) -> Self {
        Self {
            position,
            velocity,
            mass: T::one(),
        }
    }

    pub fn speed(&self) -> T {
        self.velocity.norm()
    }

    /// Height above the mean Earth sphere, m.
    pub fn altitude(&self) -> T {
        self.position.norm() - T::of(EARTH_RADIUS)
    }
}

/// Evader guidance command: composite angle of attack and angle of heel,
/// degrees. Ranges [-16, 16] and [-90, 90].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfvCommand<T> {
    composite_aoa: T,
    heel: T,
}

pub const EFV_AOA_LIMIT_DEG: f64 = 16.0;
pub const EFV_HEEL_LIMIT_DEG: f64 = 90.0;

impl<T: Real> EfvCommand<T> {
    pub fn new(composite_aoa: T, heel: T) -> Result<Self> {
        if composite_aoa.abs() > T::of(EFV_AOA_LIMIT_DEG) {
            return Err(Error::CommandOutOfRange(format!(
                "composite angle of attack {composite_aoa} deg outside [-16, 16]"
            )));
        }
        if heel.abs() > T::of(EFV_HEEL_LIMIT_DEG) {
            return Err(Error::CommandOutOfRange(format!(
                "angle of heel {heel} deg outside [-90, 90]"
            )));
        }
        Ok(Self {
            composite_aoa,
            heel,
        })
    }

    pub fn zero() -> Self {
        Self {
            composite_aoa: T::zero(),
            heel: T::zero(),
        }
    }

    pub fn composite_aoa(&self) -> T {
        self.composite_aoa
    }

    pub fn heel(&self) -> T {
        self.heel
    }
}

/// Pursuer guidance command: angle of attack and angle of sideslip,
/// degrees, both in [-20, 20].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfvCommand<T> {
    aoa: T,
    sideslip: T,
}

pub const PFV_ANGLE_LIMIT_DEG: f64 = 20.0;

impl<T: Real> PfvCommand<T> {
    pub fn new(aoa: T, sideslip: T) -> Result<Self> {
        let lim = T::of(PFV_ANGLE_LIMIT_DEG);
        if aoa.abs() > lim || sideslip.abs() > lim {
            return Err(Error::CommandOutOfRange(format!(
                "pursuer command ({aoa}, {sideslip}) deg outside [-20, 20]"
            )));
        }
        Ok(Self { aoa, sideslip })
    }

    pub fn zero() -> Self {
        Self {
            aoa: T::zero(),
            sideslip: T::zero(),
        }
    }

    pub fn aoa(&self) -> T {
        self.aoa
    }

    pub fn sideslip(&self) -> T {
        self.sideslip
    }
}

/// Constant-coefficient stand-in for the control and aerodynamic forces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedAeroModel<T> {
    /// Thrust-minus-drag acceleration along the velocity at zero
    /// incidence, m/s^2.
    pub axial_accel: T,
    /// Lateral acceleration per degree of commanded incidence, m/s^2/deg.
    pub lateral_gain: T,
    /// Axial acceleration lost per squared degree of incidence,
    /// m/s^2/deg^2.
    pub drag_penalty: T,
}

impl<T: Real> SimplifiedAeroModel<T> {
    pub fn new(axial_accel: T, lateral_gain: T, drag_penalty: T) -> Result<Self> {
        if lateral_gain <= T::zero() {
            return Err(Error::CommandOutOfRange(format!(
                "lateral_gain {lateral_gain} must be positive"
            )));
        }
        if drag_penalty < T::zero() {
            return Err(Error::CommandOutOfRange(format!(
                "drag_penalty {drag_penalty} must be nonnegative"
            )));
        }
        Ok(Self {
            axial_accel,
            lateral_gain,
            drag_penalty,
        })
    }

    /// All coefficients zero except a unit lateral gain; useful for
    /// ballistic tests.
    pub fn inert() -> Self {
        Self {
            axial_accel: T::zero(),
            lateral_gain: T::of(f64::MIN_POSITIVE),
            drag_penalty: T::zero(),
        }
    }
}

/// Inverse-square central gravity field, m/s^2.
pub fn gravity<T: Real>(position: GeoVector<T>) -> Result<GeoVector<T>> {
    let r = position.norm();
    if r == T::zero() {
        return Err(Error::Singularity);
    }
    let mu = T::of(MU_EARTH);
    Ok(position.scale(-mu / (r * r * r)))
}

/// Composite incidence angle arccos(cos a * cos b), degrees, with the
/// sign taken from the angle of attack.
pub fn composite_angle<T: Real>(aoa_deg: T, sideslip_deg: T) -> T {
    if sideslip_deg == T::zero() {
        // The formula reduces to |a|; skip the acos round trip so the
        // reduction is exact.
        return aoa_deg;
    }
    let magnitude = (aoa_deg.to_radians().cos() * sideslip_deg.to_radians().cos())
        .min(T::one())
        .max(-T::one())
        .acos()
        .to_degrees();
    if aoa_deg < T::zero() {
        -magnitude
    } else {
        magnitude
    }
}

/// Unit directions spanning the plane normal to the velocity: the local
/// up-normal (radial direction orthogonalized against the velocity) and
/// the side-normal completing the right-handed triad (v, up, side).
///
/// When the velocity is parallel to the radial direction the up-normal is
/// taken from `up_hint` (the launch-frame Y' axis) projected orthogonal
/// to the velocity.
pub fn lateral_axes<T: Real>(
    state: &VehicleState<T>,
    up_hint: GeoVector<T>,
) -> Result<(GeoVector<T>, GeoVector<T>)> {
    let v_hat = state
        .velocity
        .normalized()
        .ok_or_else(|| Error::UndefinedAxes("zero velocity".into()))?;
    let radial = state
        .position
        .normalized()
        .ok_or_else(|| Error::UndefinedAxes("zero position".into()))?;
    let mut up = radial - v_hat.scale(radial.dot(&v_hat));
    if up.norm() < T::of(1e-12) {
        up = up_hint - v_hat.scale(up_hint.dot(&v_hat));
    }
    let up = up
        .normalized()
        .ok_or_else(|| Error::UndefinedAxes("no direction orthogonal to the velocity".into()))?;
    let side = v_hat.cross(&up);
    Ok((up, side))
}

/// Control + aero acceleration of the evader (gravity excluded).
///
/// Axial: (axial_accel - drag_penalty * aoa^2) along the velocity.
/// Lateral: lateral_gain * aoa, in the normal plane, rotated about the
/// velocity axis by the heel angle away from the up-normal.
pub fn efv_control_accel<T: Real>(
    state: &VehicleState<T>,
    cmd: &EfvCommand<T>,
    aero: &SimplifiedAeroModel<T>,
    up_hint: GeoVector<T>,
) -> Result<GeoVector<T>> {
    let v_hat = state
        .velocity
        .normalized()
        .ok_or_else(|| Error::UndefinedAxes("zero velocity".into()))?;
    let (up, side) = lateral_axes(state, up_hint)?;
    let aoa = cmd.composite_aoa();
    let axial = aero.axial_accel - aero.drag_penalty * aoa * aoa;
    let heel = cmd.heel().to_radians();
    let lateral_dir = up.scale(heel.cos()) + side.scale(heel.sin());
    Ok(v_hat.scale(axial) + lateral_dir.scale(aero.lateral_gain * aoa))
}

/// Total evader acceleration: gravity plus [`efv_control_accel`].
pub fn efv_acceleration<T: Real>(
    state: &VehicleState<T>,
    cmd: &EfvCommand<T>,
    aero: &SimplifiedAeroModel<T>,
    up_hint: GeoVector<T>,
) -> Result<GeoVector<T>> {
    Ok(gravity(state.position)? + efv_control_accel(state, cmd, aero, up_hint)?)
}

/// Control + aero acceleration of the pursuer (gravity excluded).
///
/// The angle of attack drives the up-normal channel and the sideslip the
/// side-normal channel; the axial drag penalty uses the composite angle.
pub fn pfv_control_accel<T: Real>(
    state: &VehicleState<T>,
    cmd: &PfvCommand<T>,
    aero: &SimplifiedAeroModel<T>,
    up_hint: GeoVector<T>,
) -> Result<GeoVector<T>> {
    let v_hat = state
        .velocity
        .normalized()
        .ok_or_else(|| Error::UndefinedAxes("zero velocity".into()))?;
    let (up, side) = lateral_axes(state, up_hint)?;
    let total = composite_angle(cmd.aoa(), cmd.sideslip());
    let axial = aero.axial_accel - aero.drag_penalty * total * total;
    let lateral =
        up.scale(aero.lateral_gain * cmd.aoa()) + side.scale(aero.lateral_gain * cmd.sideslip());
    Ok(v_hat.scale(axial) + lateral)
}

/// Total pursuer acceleration: gravity plus [`pfv_control_accel`].
pub fn pfv_acceleration<T: Real>(
    state: &VehicleState<T>,
    cmd: &PfvCommand<T>,
    aero: &SimplifiedAeroModel<T>,
    up_hint: GeoVector<T>,
) -> Result<GeoVector<T>> {
    Ok(gravity(state.position)? + pfv_control_accel(state, cmd, aero, up_hint)?)
}

/// One fourth-order Runge-Kutta step of the translational state, with
/// the guidance command (hence `accel_fn`) held constant over the step.
///
/// `step_index` tags any numeric fault with the offending time index.
pub fn integrate_step<T, F>(
    state: &VehicleState<T>,
    accel_fn: F,
    dt: T,
    step_index: u64,
) -> Result<VehicleState<T>>
where
    T: Real,
    F: Fn(&VehicleState<T>) -> Result<GeoVector<T>>,
{
    if dt <= T::zero() {
        return Err(Error::InvalidStep(format!("dt = {dt} must be positive")));
    }
    let eval = |s: &VehicleState<T>| -> Result<GeoVector<T>> {
        let a = accel_fn(s)?;
        if !a.is_finite() {
            return Err(Error::NumericFault {
                step: step_index,
                detail: format!("non-finite acceleration ({}, {}, {})", a.x, a.y, a.z),
            });
        }
        Ok(a)
    };

    let half = T::half();
    let at = |p: GeoVector<T>, v: GeoVector<T>| VehicleState {
        position: p,
        velocity: v,
        mass: state.mass,
    };

    // k = (dr/dt, dv/dt) evaluated at the four RK4 stages.
    let k1v = state.velocity;
    let k1a = eval(state)?;

    let s2 = at(
        state.position + k1v.scale(dt * half),
        state.velocity + k1a.scale(dt * half),
    );
    let k2v = s2.velocity;
    let k2a = eval(&s2)?;

    let s3 = at(
        state.position + k2v.scale(dt * half),
        state.velocity + k2a.scale(dt * half),
    );
    let k3v = s3.velocity;
    let k3a = eval(&s3)?;

    let s4 = at(
        state.position + k3v.scale(dt),
        state.velocity + k3a.scale(dt),
    );
    let k4v = s4.velocity;
    let k4a = eval(&s4)?;

    let sixth = dt / T::of(6.0);
    let two = T::two();
    let position = state.position + (k1v + k2v.scale(two) + k3v.scale(two) + k4v).scale(sixth);
    let velocity = state.velocity + (k1a + k2a.scale(two) + k3a.scale(two) + k4a).scale(sixth);

    if !position.is_finite() || !velocity.is_finite() {
        return Err(Error::NumericFault {
            step: step_index,
            detail: "non-finite state after integration".into(),
        });
    }
    Ok(at(position, velocity))
}

/// Specific orbital energy v^2/2 - mu/r, J/kg. Conserved by ballistic
/// motion in the central field; used by the integrator checks.
pub fn specific_orbital_energy<T: Real>(state: &VehicleState<T>) -> T {
    let v2 = state.velocity.dot(&state.velocity);
    v2 * T::half() - T::of(MU_EARTH) / state.position.norm()
}
