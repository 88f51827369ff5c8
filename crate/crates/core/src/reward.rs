//! Reward shaping for the evasion policy.
//!
//! The episode return decomposes into per-step immediate rewards plus a
//! final reward granted when the evasion distance occurs. The final
//! reward pays for residual velocity only when the safe distance was
//! kept; the per-step reward combines the pursuer's LOS-rate energy
//! drain with a prospective-outcome term scored by frozen-command
//! virtual rollouts.

use crate::frames::LosAngles;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig<T> {
    /// Residual-velocity reward coefficient when the evasion succeeded.
    pub kv_on: T,
    /// Safe evasion distance, m.
    pub safe_distance: T,
    /// Weight of the LOS-rate term in the step reward.
    pub pe_weight: T,
    /// Weight of the prospective-outcome term in the step reward.
    pub pv_weight: T,
    /// Velocity normalization of the prospective term, m/s.
    /// Zero means "use the scenario's initial evader speed".
    pub v_ref: T,
}

impl<T: Real> Default for RewardConfig<T> {
    fn default() -> Self {
        Self {
            kv_on: T::of(10.0),
            safe_distance: T::of(30.0),
            pe_weight: T::of(0.01),
            pv_weight: T::of(0.01),
            v_ref: T::zero(),
        }
    }
}

impl<T: Real> RewardConfig<T> {
    /// Step-shaping weights for coarse (~220-step) training episodes.
    /// The defaults keep the accumulated step rewards small relative to
    /// the final reward over ~10^5-step episodes; short episodes allow
    /// proportionally heavier shaping under the same constraint.
    pub fn coarse_training() -> Self {
        Self {
            pe_weight: T::of(0.1),
            pv_weight: T::of(0.1),
            ..Self::default()
        }
    }

    /// Replace a zero `v_ref` with the scenario's initial evader speed.
    pub fn resolved_against(&self, initial_efv_speed: T) -> Self {
        Self {
            v_ref: if self.v_ref > T::zero() {
                self.v_ref
            } else {
                initial_efv_speed
            },
            ..*self
        }
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        if self.safe_distance <= T::zero() {
            return Err(crate::error::Error::config(
                "reward.safe_distance",
                format!("must be positive, got {}", self.safe_distance),
            ));
        }
        if self.v_ref < T::zero() {
            return Err(crate::error::Error::config(
                "reward.v_ref",
                "must be nonnegative (zero selects the scenario speed)",
            ));
        }
        Ok(())
    }
}

fn clip01<T: Real>(x: T) -> T {
    x.min(T::one()).max(T::zero())
}

/// Final reward when the evasion distance occurs:
/// K_v * residual_velocity + K_d * safe_distance, with K_v active only
/// above the safe distance and K_d = clip(d / safe_distance, 0, 1).
pub fn final_reward<T: Real>(evasion_d: T, residual_v: T, cfg: &RewardConfig<T>) -> T {
    let kv = if evasion_d > cfg.safe_distance {
        cfg.kv_on
    } else {
        T::zero()
    };
    let kd = clip01(evasion_d / cfg.safe_distance);
    kv * residual_v + kd * cfg.safe_distance
}

/// Immediate per-step reward.
///
/// The LOS term is the backward difference of sqrt(eps^2 + eta^2) over
/// the step (radians/second): forcing the pursuer's LOS to rotate burns
/// its energy. The prospective term credits the frozen-command rollout
/// outcome `(v_hat, d_hat)`: clip(d_hat / safe, 0, 1) * v_hat / v_ref.
/// `cfg.v_ref` must already be resolved to a positive value.
pub fn step_reward<T: Real>(
    los_prev: LosAngles<T>,
    los_curr: LosAngles<T>,
    dt: T,
    virtual_outcome: (T, T),
    cfg: &RewardConfig<T>,
) -> T {
    debug_assert!(dt > T::zero());
    debug_assert!(cfg.v_ref > T::zero());
    let r_pe = (los_curr.deflection() - los_prev.deflection()) / dt;
    let (v_hat, d_hat) = virtual_outcome;
    let r_pv = clip01(d_hat / cfg.safe_distance) * v_hat / cfg.v_ref;
    cfg.pe_weight * r_pe + cfg.pv_weight * r_pv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> RewardConfig<f64> {
        RewardConfig::default().resolved_against(98.0640)
    }

    fn los(eps: f64, eta: f64) -> LosAngles<f64> {
        LosAngles { epsilon: eps, eta }
    }

    #[test]
    fn final_reward_pays_velocity_above_safe_distance() {
        // 10 * 67.2422 + 1.0 * 30.0
        assert_relative_eq!(
            final_reward(30.8556, 67.2422, &cfg()),
            702.422,
            epsilon = 1e-12
        );
    }

    #[test]
    fn final_reward_scales_distance_below_safe() {
        assert_relative_eq!(final_reward(15.0, 70.0, &cfg()), 15.0, epsilon = 1e-12);
    }

    #[test]
    fn final_reward_zero_at_contact() {
        assert_eq!(final_reward(0.0, 250.0, &cfg()), 0.0);
    }

    #[test]
    fn final_reward_discontinuity_at_safe_distance() {
        let c = cfg();
        let below = final_reward(30.0, 50.0, &c);
        let above = final_reward(30.0 + 1e-12, 50.0, &c);
        assert_relative_eq!(below, 30.0, epsilon = 1e-9);
        assert_relative_eq!(above, 530.0, epsilon = 1e-6);
    }

    #[test]
    fn step_reward_zero_for_constant_los_and_no_virtual_credit() {
        let c = cfg();
        let a = los(0.3, -0.2);
        assert_eq!(step_reward(a, a, 0.01, (0.0, 0.0), &c), 0.0);
    }

    #[test]
    fn step_reward_los_term_finite_difference() {
        let c = cfg();
        // Deflection goes 0.10 -> 0.11 rad over 0.01 s: rate 1.0 rad/s.
        let r = step_reward(los(0.10, 0.0), los(0.11, 0.0), 0.01, (0.0, 0.0), &c);
        assert_relative_eq!(r, c.pe_weight * 1.0, epsilon = 1e-9);
    }

    #[test]
    fn step_reward_virtual_credit_halves_at_half_safe_distance() {
        let c = cfg();
        let a = los(0.0, 0.0);
        let full = step_reward(a, a, 0.01, (80.0, 30.0), &c);
        let half = step_reward(a, a, 0.01, (80.0, 15.0), &c);
        let far = step_reward(a, a, 0.01, (80.0, 300.0), &c);
        assert_relative_eq!(half, 0.5 * full, epsilon = 1e-12);
        // The distance factor clips at 1.
        assert_relative_eq!(far, full, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn final_reward_nonnegative_and_bounded(
            d in 0.0_f64..300.0,
            v in 0.0_f64..500.0,
        ) {
            let r = final_reward(d, v, &cfg());
            prop_assert!(r >= 0.0);
            if d > 30.0 {
                prop_assert!(r >= 10.0 * v);
            } else {
                prop_assert!(r <= 30.0 + 1e-12);
            }
        }

        #[test]
        fn distance_factor_always_clipped(d in -10.0_f64..500.0) {
            let kd = clip01(d / 30.0);
            prop_assert!((0.0..=1.0).contains(&kd));
        }
    }
}
