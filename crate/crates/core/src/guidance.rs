//! Proportional navigation for the pursuer: LOS rates map to overload
//! commands, overloads map to incidence angles, clipped to the command
//! ranges.

use crate::dynamics::{PfvCommand, PFV_ANGLE_LIMIT_DEG};
use crate::error::Result;
use crate::frames::{los_rates, LosAngles};
use crate::scalar::Real;

/// Proportional navigation coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnConfig<T> {
    /// Overload per rad/s of LOS rotation, s.
    pub k1: T,
    /// Degrees of incidence per unit overload.
    pub k2: T,
}

impl<T: Real> Default for PnConfig<T> {
    fn default() -> Self {
        Self {
            k1: T::of(4.0),
            k2: T::of(5.0),
        }
    }
}

/// Normal and lateral overload commands from the LOS rates.
pub fn pn_overloads<T: Real>(eps_rate: T, eta_rate: T, cfg: &PnConfig<T>) -> (T, T) {
    (cfg.k1 * eps_rate, cfg.k1 * eta_rate)
}

/// Convert overloads to a pursuer command, clipping each channel to the
/// admissible +/-20 degrees.
pub fn overloads_to_command<T: Real>(n_y: T, n_z: T, cfg: &PnConfig<T>) -> PfvCommand<T> {
    let lim = T::of(PFV_ANGLE_LIMIT_DEG);
    let clip = |x: T| x.min(lim).max(-lim);
    PfvCommand::new(clip(cfg.k2 * n_y), clip(cfg.k2 * n_z))
        .expect("clipped command is always in range")
}

/// Full PN step: backward-difference LOS rates, overloads, command.
pub fn pn_step<T: Real>(
    prev_los: LosAngles<T>,
    curr_los: LosAngles<T>,
    dt: T,
    cfg: &PnConfig<T>,
) -> Result<PfvCommand<T>> {
    let (eps_rate, eta_rate) = los_rates(prev_los, curr_los, dt)?;
    let (n_y, n_z) = pn_overloads(eps_rate, eta_rate, cfg);
    Ok(overloads_to_command(n_y, n_z, cfg))
}
