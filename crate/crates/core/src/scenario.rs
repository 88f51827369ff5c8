//! Engagement scenario description: initial states, command limits,
//! integration step, capture threshold and model coefficients.
//!
//! The default values reproduce the reference engagement: a 2000 m
//! head-on encounter at 10 km altitude, a 0.01 s step, per-step command
//! rate limits of 0.01 degrees and a 30 m capture radius.

use crate::dynamics::SimplifiedAeroModel;
use crate::error::{Error, Result};
use crate::frames::GeoVector;
use crate::guidance::PnConfig;
use crate::scalar::Real;

/// Complete scenario parameterization. The six-DOF initial vectors are
/// normally derived from the scalar embedding below (distance, altitude,
/// speeds, plus an intercept-aiming pass for the pursuer heading); the
/// optional explicit vectors override that derivation entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    /// Simulation step, s.
    pub dt: T,
    /// Hard cap on the number of steps in one episode.
    pub max_steps: u64,
    /// Capture radius, m: the evasion fails at or below this separation.
    pub capture_radius: T,

    /// Initial evader-pursuer separation, m.
    pub initial_distance: T,
    /// Altitude of the encounter above the mean Earth sphere, m.
    pub altitude: T,

    /// Initial evader speed, m/s.
    pub efv_speed: T,
    /// Evader axial acceleration at zero incidence, m/s^2.
    pub efv_axial_accel: T,
    /// Initial evader composite angle of attack, deg.
    pub efv_alpha0: T,
    /// Initial evader angle of heel, deg.
    pub efv_heel0: T,

    /// Initial pursuer speed, m/s.
    pub pfv_speed: T,
    /// Pursuer axial acceleration at zero incidence, m/s^2.
    pub pfv_axial_accel: T,
    /// Initial pursuer angle of attack, deg.
    pub pfv_aoa0: T,
    /// Initial pursuer angle of sideslip, deg.
    pub pfv_sideslip0: T,

    /// Per-step limit on the change of the composite angle of attack, deg.
    pub alpha_step_limit: T,
    /// Per-step limit on the change of the angle of heel, deg.
    pub gamma_step_limit: T,

    /// Lateral acceleration per degree of incidence, m/s^2/deg
    /// (both vehicles).
    pub lateral_gain: T,
    /// Axial acceleration lost per squared degree of incidence,
    /// m/s^2/deg^2 (both vehicles).
    pub drag_penalty: T,

    /// Proportional navigation coefficients of the pursuer.
    pub pn: PnConfig<T>,

    /// Iterations of the pursuer intercept-aiming pass used when the
    /// initial vectors are derived rather than given explicitly.
    pub aim_iterations: u32,

    /// Step-size multiplier of the virtual (frozen-command) rollout.
    pub virtual_stride: u32,
    /// Step cap of the virtual rollout.
    pub virtual_horizon: u64,

    /// Per-episode lateral jitter of the evader's initial position, m
    /// (0 disables).
    pub init_jitter_pos: T,
    /// Per-episode jitter of the evader's initial velocity direction,
    /// deg (0 disables).
    pub init_jitter_vel_deg: T,

    /// Explicit initial vectors; all four must be set together.
    pub efv_position: Option<GeoVector<T>>,
    pub efv_velocity: Option<GeoVector<T>>,
    pub pfv_position: Option<GeoVector<T>>,
    pub pfv_velocity: Option<GeoVector<T>>,
}

impl<T: Real> Default for ScenarioConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::of(0.01),
            max_steps: 200_000,
            capture_radius: T::of(30.0),
            initial_distance: T::of(2000.0),
            altitude: T::of(10_000.0),
            efv_speed: T::of(98.0640),
            efv_axial_accel: T::of(0.9434),
            efv_alpha0: T::of(7.3443),
            efv_heel0: T::of(-0.3755),
            pfv_speed: T::of(72.2426),
            pfv_axial_accel: T::of(0.5792),
            pfv_aoa0: T::of(10.0898),
            pfv_sideslip0: T::of(0.2869),
            alpha_step_limit: T::of(0.01),
            gamma_step_limit: T::of(0.01),
            lateral_gain: T::of(0.35),
            drag_penalty: T::of(0.002),
            pn: PnConfig::default(),
            aim_iterations: 12,
            virtual_stride: 10,
            virtual_horizon: 5_000,
            init_jitter_pos: T::zero(),
            init_jitter_vel_deg: T::zero(),
            efv_position: None,
            efv_velocity: None,
            pfv_position: None,
            pfv_velocity: None,
        }
    }
}

impl<T: Real> ScenarioConfig<T> {
    /// Coarse-step variant for fast training runs: a 0.05 s step with
    /// the per-step command limits rescaled so the physical slew rate
    /// (1 deg/s) is unchanged, plus mild initial-condition jitter so
    /// evaluation episodes differ.
    pub fn coarse_training() -> Self {
        Self {
            dt: T::of(0.05),
            alpha_step_limit: T::of(0.05),
            gamma_step_limit: T::of(0.05),
            max_steps: 40_000,
            init_jitter_pos: T::of(5.0),
            init_jitter_vel_deg: T::of(0.05),
            ..Self::default()
        }
    }

    pub fn aero_efv(&self) -> SimplifiedAeroModel<T> {
        SimplifiedAeroModel {
            axial_accel: self.efv_axial_accel,
            lateral_gain: self.lateral_gain,
            drag_penalty: self.drag_penalty,
        }
    }

    pub fn aero_pfv(&self) -> SimplifiedAeroModel<T> {
        SimplifiedAeroModel {
            axial_accel: self.pfv_axial_accel,
            lateral_gain: self.lateral_gain,
            drag_penalty: self.drag_penalty,
        }
    }

    /// Check every invariant, reporting the offending key path.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: T| {
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::config(
                    format!("scenario.{key}"),
                    format!("must be positive, got {v}"),
                ))
            }
        };
        positive("dt", self.dt)?;
        positive("capture_radius", self.capture_radius)?;
        positive("initial_distance", self.initial_distance)?;
        positive("altitude", self.altitude)?;
        positive("efv_speed", self.efv_speed)?;
        positive("pfv_speed", self.pfv_speed)?;
        positive("alpha_step_limit", self.alpha_step_limit)?;
        positive("gamma_step_limit", self.gamma_step_limit)?;
        positive("lateral_gain", self.lateral_gain)?;
        positive("pn_k1", self.pn.k1)?;
        positive("pn_k2", self.pn.k2)?;
        if self.max_steps == 0 {
            return Err(Error::config("scenario.max_steps", "must be positive"));
        }
        if self.drag_penalty < T::zero() {
            return Err(Error::config(
                "scenario.drag_penalty",
                format!("must be nonnegative, got {}", self.drag_penalty),
            ));
        }
        if self.virtual_stride == 0 {
            return Err(Error::config("scenario.virtual_stride", "must be positive"));
        }
        if self.virtual_horizon == 0 {
            return Err(Error::config(
                "scenario.virtual_horizon",
                "must be positive",
            ));
        }
        if self.init_jitter_pos < T::zero() {
            return Err(Error::config(
                "scenario.init_jitter_pos",
                "must be nonnegative",
            ));
        }
        if self.init_jitter_vel_deg < T::zero() {
            return Err(Error::config(
                "scenario.init_jitter_vel_deg",
                "must be nonnegative",
            ));
        }
        let explicit = [
            self.efv_position.is_some(),
            self.efv_velocity.is_some(),
            self.pfv_position.is_some(),
            self.pfv_velocity.is_some(),
        ];
        if explicit.iter().any(|&b| b) && !explicit.iter().all(|&b| b) {
            return Err(Error::config(
                "scenario.efv_position",
                "explicit initial vectors must be given for all four of \
                 efv_position/efv_velocity/pfv_position/pfv_velocity or none",
            ));
        }
        crate::dynamics::EfvCommand::new(self.efv_alpha0, self.efv_heel0)
            .map_err(|e| Error::config("scenario.efv_alpha0", e.to_string()))?;
        crate::dynamics::PfvCommand::new(self.pfv_aoa0, self.pfv_sideslip0)
            .map_err(|e| Error::config("scenario.pfv_aoa0", e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        ScenarioConfig::<f64>::default().validate().unwrap();
        ScenarioConfig::<f64>::coarse_training().validate().unwrap();
    }

    #[test]
    fn validation_names_the_key() {
        let cfg = ScenarioConfig::<f64> {
            dt: -0.01,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "scenario.dt"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn partial_explicit_vectors_rejected() {
        let cfg = ScenarioConfig::<f64> {
            efv_position: Some(GeoVector::new(1.0, 2.0, 3.0)),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn out_of_range_initial_commands_rejected() {
        let cfg = ScenarioConfig::<f64> {
            efv_alpha0: 17.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
