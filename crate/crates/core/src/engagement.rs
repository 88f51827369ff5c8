//! The per-step engagement loop, episode termination, the agent
//! observation/action contract and the frozen-command virtual rollout.
//!
//! Each step runs four stages: the evader command is supplied externally
//! (stage 1) and the evader integrates under it (stage 2); the pursuer
//! forms its proportional-navigation command from the LOS history of the
//! *previous* instants (stage 3) and integrates (stage 4). An episode
//! ends at the first local minimum of the separation, which defines the
//! evasion distance and the residual velocity.

use crate::dynamics::{
    efv_acceleration, integrate_step, pfv_acceleration, EfvCommand, PfvCommand,
    SimplifiedAeroModel, VehicleState, EARTH_RADIUS, EFV_AOA_LIMIT_DEG, EFV_HEEL_LIMIT_DEG,
};
use crate::error::Result;
use crate::frames::{launch_frame_offset, los_angles, GeoVector, LaunchFrame, LosAngles};
use crate::guidance::{pn_step, PnConfig};
use crate::scalar::Real;
use crate::scenario::ScenarioConfig;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Normalization constant for the relative-position observation entries, m.
pub const OBS_POSITION_SCALE: f64 = 2000.0;
/// Normalization constant for the relative-velocity observation entries, m/s.
pub const OBS_VELOCITY_SCALE: f64 = 100.0;

/// The eight agent inputs: normalized relative position (3), normalized
/// relative velocity (3) and the previous guidance commands scaled by
/// their half-ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T>(pub [T; 8]);

impl<T: Real> Observation<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Requested change of the evader guidance commands, degrees per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDelta<T> {
    pub d_alpha: T,
    pub d_gamma: T,
}

impl<T: Real> ActionDelta<T> {
    pub fn zero() -> Self {
        Self {
            d_alpha: T::zero(),
            d_gamma: T::zero(),
        }
    }
}

/// Result of one finished (or truncated) episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementOutcome<T> {
    /// Separation at the first local minimum d(t_{n-1}), m.
    pub evasion_distance: T,
    /// Evader speed at that instant, m/s.
    pub residual_velocity: T,
    /// Step index t_{n-1} at which the minimum occurred.
    pub termination_index: u64,
    /// Whether the evasion distance is at or below the capture radius.
    pub capture: bool,
    /// Set when the step horizon was reached with the separation still
    /// shrinking; the outcome then reports the last state seen.
    pub truncated: bool,
}

/// Source of evader actions for an episode.
pub trait Policy<T: Real> {
    fn next_delta(&mut self, obs: &Observation<T>, step: u64) -> ActionDelta<T>;
}

/// Always requests zero change: the evader flies its initial trim.
pub struct ZeroPolicy;

impl<T: Real> Policy<T> for ZeroPolicy {
    fn next_delta(&mut self, _obs: &Observation<T>, _step: u64) -> ActionDelta<T> {
        ActionDelta::zero()
    }
}

/// Build the agent observation from the two vehicle states and the
/// previously applied evader command.
pub fn observe<T: Real>(
    state_e: &VehicleState<T>,
    state_p: &VehicleState<T>,
    prev_cmd: &EfvCommand<T>,
) -> Observation<T> {
    let dp = state_e.position - state_p.position;
    let dv = state_e.velocity - state_p.velocity;
    let ps = T::of(OBS_POSITION_SCALE);
    let vs = T::of(OBS_VELOCITY_SCALE);
    Observation([
        dp.x / ps,
        dp.y / ps,
        dp.z / ps,
        dv.x / vs,
        dv.y / vs,
        dv.z / vs,
        prev_cmd.composite_aoa() / T::of(EFV_AOA_LIMIT_DEG),
        prev_cmd.heel() / T::of(EFV_HEEL_LIMIT_DEG),
    ])
}

/// Clip the requested delta to the per-step limits, apply it, and clip
/// the result to the absolute command ranges.
pub fn apply_action<T: Real>(
    prev_cmd: &EfvCommand<T>,
    raw_delta: &ActionDelta<T>,
    limits: (T, T),
) -> EfvCommand<T> {
    let clip = |x: T, lim: T| x.min(lim).max(-lim);
    let alpha = clip(
        prev_cmd.composite_aoa() + clip(raw_delta.d_alpha, limits.0),
        T::of(EFV_AOA_LIMIT_DEG),
    );
    let heel = clip(
        prev_cmd.heel() + clip(raw_delta.d_gamma, limits.1),
        T::of(EFV_HEEL_LIMIT_DEG),
    );
    EfvCommand::new(alpha, heel).expect("clipped command is always in range")
}

/// True at the first local minimum of the separation: the distance
/// stopped shrinking and the previous value was strictly positive.
pub fn detect_termination<T: Real>(d_prev: T, d_curr: T) -> bool {
    d_curr >= d_prev && d_prev > T::zero()
}

/// Concrete initial conditions of one engagement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngagementSetup<T> {
    pub efv: VehicleState<T>,
    pub pfv: VehicleState<T>,
    pub efv_cmd: EfvCommand<T>,
    pub pfv_cmd: PfvCommand<T>,
    pub frame: LaunchFrame<T>,
}

/// Live engagement state. Cloning yields an independent world, which is
/// how the virtual rollout isolates itself from the real episode.
#[derive(Debug, Clone, PartialEq)]
pub struct World<T> {
    pub dt: T,
    step: u64,
    pub efv: VehicleState<T>,
    pub pfv: VehicleState<T>,
    efv_cmd: EfvCommand<T>,
    pfv_cmd: PfvCommand<T>,
    frame: LaunchFrame<T>,
    los_prev: Option<LosAngles<T>>,
    los_curr: LosAngles<T>,
    distance: T,
    aero_efv: SimplifiedAeroModel<T>,
    aero_pfv: SimplifiedAeroModel<T>,
    pn: PnConfig<T>,
    capture_radius: T,
    limits: (T, T),
    virtual_stride: u32,
    virtual_horizon: u64,
}

impl<T: Real> World<T> {
    pub fn from_setup(setup: &EngagementSetup<T>, cfg: &ScenarioConfig<T>) -> Result<Self> {
        let offset = launch_frame_offset(setup.pfv.position, &setup.frame, setup.efv.position);
        let los_curr = los_angles(offset)?;
        Ok(Self {
            dt: cfg.dt,
            step: 0,
            efv: setup.efv,
            pfv: setup.pfv,
            efv_cmd: setup.efv_cmd,
            pfv_cmd: setup.pfv_cmd,
            frame: setup.frame,
            los_prev: None,
            los_curr,
            distance: (setup.efv.position - setup.pfv.position).norm(),
            aero_efv: cfg.aero_efv(),
            aero_pfv: cfg.aero_pfv(),
            pn: cfg.pn,
            capture_radius: cfg.capture_radius,
            limits: (cfg.alpha_step_limit, cfg.gamma_step_limit),
            virtual_stride: cfg.virtual_stride,
            virtual_horizon: cfg.virtual_horizon,
        })
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn distance(&self) -> T {
        self.distance
    }

    pub fn efv_cmd(&self) -> EfvCommand<T> {
        self.efv_cmd
    }

    pub fn pfv_cmd(&self) -> PfvCommand<T> {
        self.pfv_cmd
    }

    pub fn los(&self) -> LosAngles<T> {
        self.los_curr
    }

    pub fn rate_limits(&self) -> (T, T) {
        self.limits
    }

    pub fn capture_radius(&self) -> T {
        self.capture_radius
    }

    pub fn observation(&self) -> Observation<T> {
        observe(&self.efv, &self.pfv, &self.efv_cmd)
    }

    /// Advance one step with the evader command supplied externally.
    ///
    /// The pursuer command is formed from the LOS angles of the two
    /// *previous* instants; on the very first step no LOS rate exists
    /// yet and the pursuer flies a zero command.
    pub fn engagement_step(&mut self, efv_cmd: EfvCommand<T>) -> Result<T> {
        let index = self.step + 1;
        let up_hint = self.frame.y_axis;

        // Stage 2: the evader integrates under the new command.
        let aero_e = self.aero_efv;
        let new_e = integrate_step(
            &self.efv,
            |s| efv_acceleration(s, &efv_cmd, &aero_e, up_hint),
            self.dt,
            index,
        )?;

        // Stage 3: pursuer guidance from the previous-instant geometry.
        let pfv_cmd = match self.los_prev {
            Some(prev) => pn_step(prev, self.los_curr, self.dt, &self.pn)?,
            None => PfvCommand::zero(),
        };

        // Stage 4: the pursuer integrates.
        let aero_p = self.aero_pfv;
        let new_p = integrate_step(
            &self.pfv,
            |s| pfv_acceleration(s, &pfv_cmd, &aero_p, up_hint),
            self.dt,
            index,
        )?;

        self.efv = new_e;
        self.pfv = new_p;
        self.efv_cmd = efv_cmd;
        self.pfv_cmd = pfv_cmd;
        self.los_prev = Some(self.los_curr);
        self.los_curr = los_angles(launch_frame_offset(
            new_p.position,
            &self.frame,
            new_e.position,
        ))?;
        self.distance = (new_e.position - new_p.position).norm();
        self.step = index;
        Ok(self.distance)
    }
}

/// Per-step record of one episode (one row per instant, including t_0).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow<T> {
    pub step: u64,
    pub t_s: T,
    pub efv_pos: GeoVector<T>,
    pub efv_vel: GeoVector<T>,
    pub pfv_pos: GeoVector<T>,
    pub pfv_vel: GeoVector<T>,
    pub alpha_deg: T,
    pub gamma_deg: T,
    pub pfv_aoa_deg: T,
    pub pfv_sideslip_deg: T,
    pub dist_m: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory<T> {
    pub rows: Vec<TrajectoryRow<T>>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "step,t_s,ex,ey,ez,evx,evy,evz,px,py,pz,pvx,pvy,pvz,alpha_deg,gamma_deg,pfv_aoa_deg,pfv_sideslip_deg,dist_m";

impl<T: Real> Trajectory<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    fn push(&mut self, world: &World<T>) {
        self.rows.push(TrajectoryRow {
            step: world.step,
            t_s: T::of(world.step as f64) * world.dt,
            efv_pos: world.efv.position,
            efv_vel: world.efv.velocity,
            pfv_pos: world.pfv.position,
            pfv_vel: world.pfv.velocity,
            alpha_deg: world.efv_cmd.composite_aoa(),
            gamma_deg: world.efv_cmd.heel(),
            pfv_aoa_deg: world.pfv_cmd.aoa(),
            pfv_sideslip_deg: world.pfv_cmd.sideslip(),
            dist_m: world.distance,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRAJECTORY_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.step,
                r.t_s,
                r.efv_pos.x,
                r.efv_pos.y,
                r.efv_pos.z,
                r.efv_vel.x,
                r.efv_vel.y,
                r.efv_vel.z,
                r.pfv_pos.x,
                r.pfv_pos.y,
                r.pfv_pos.z,
                r.pfv_vel.x,
                r.pfv_vel.y,
                r.pfv_vel.z,
                r.alpha_deg,
                r.gamma_deg,
                r.pfv_aoa_deg,
                r.pfv_sideslip_deg,
                r.dist_m
            ));
        }
        s
    }
}

/// Drive a world until termination or until `max_steps` further steps,
/// optionally recording the trajectory.
pub fn run_from_world<T: Real, P: Policy<T>>(
    world: &mut World<T>,
    policy: &mut P,
    max_steps: u64,
    mut trajectory: Option<&mut Trajectory<T>>,
) -> Result<EngagementOutcome<T>> {
    if let Some(t) = trajectory.as_deref_mut() {
        t.push(world);
    }
    let mut d_prev = world.distance();
    let mut speed_prev = world.efv.speed();
    for _ in 0..max_steps {
        let obs = world.observation();
        let delta = policy.next_delta(&obs, world.step_index());
        let cmd = apply_action(&world.efv_cmd, &delta, world.limits);
        let d_curr = world.engagement_step(cmd)?;
        if let Some(t) = trajectory.as_deref_mut() {
            t.push(world);
        }
        if detect_termination(d_prev, d_curr) {
            return Ok(EngagementOutcome {
                evasion_distance: d_prev,
                residual_velocity: speed_prev,
                termination_index: world.step_index() - 1,
                capture: d_prev <= world.capture_radius,
                truncated: false,
            });
        }
        d_prev = d_curr;
        speed_prev = world.efv.speed();
    }
    Ok(EngagementOutcome {
        evasion_distance: d_prev,
        residual_velocity: speed_prev,
        termination_index: world.step_index(),
        capture: d_prev <= world.capture_radius,
        truncated: true,
    })
}

/// Clone the world, hold `frozen_cmd` fixed, and roll forward until
/// termination or the virtual horizon. Returns the prospective residual
/// velocity and prospective evasion distance. The stride (from the
/// scenario) coarsens the virtual step; at stride 1 the rollout is
/// bit-identical to continuing the real episode under a constant command.
pub fn virtual_rollout<T: Real>(world: &World<T>, frozen_cmd: EfvCommand<T>) -> Result<(T, T)> {
    let mut w = world.clone();
    w.efv_cmd = frozen_cmd;
    if w.virtual_stride > 1 {
        w.dt = w.dt * T::of(w.virtual_stride as f64);
        // The LOS history spacing no longer matches the coarse step, so
        // the pursuer warm-starts its rate estimate.
        w.los_prev = None;
    }
    let horizon = w.virtual_horizon;
    let outcome = run_from_world(&mut w, &mut ZeroPolicy, horizon, None)?;
    Ok((outcome.residual_velocity, outcome.evasion_distance))
}

/// Scenario with its initial conditions fully resolved; reuse it to run
/// many episodes without repeating the intercept-aiming pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario<T> {
    pub config: ScenarioConfig<T>,
    pub setup: EngagementSetup<T>,
}

impl<T: Real> ResolvedScenario<T> {
    pub fn resolve(config: &ScenarioConfig<T>) -> Result<Self> {
        config.validate()?;
        let setup = resolve_setup(config)?;
        Ok(Self {
            config: config.clone(),
            setup,
        })
    }

    /// Fresh world at the nominal initial conditions.
    pub fn world(&self) -> Result<World<T>> {
        World::from_setup(&self.setup, &self.config)
    }

    /// Fresh world with seeded initial-condition jitter (no-op when the
    /// jitter magnitudes are zero).
    pub fn jittered_world(&self, seed: u64) -> Result<World<T>> {
        let setup = jitter_setup(&self.setup, &self.config, seed)?;
        World::from_setup(&setup, &self.config)
    }
}

/// Run one episode from scratch: resolve the scenario, apply seeded
/// jitter, and loop to termination.
pub fn run_episode<T: Real, P: Policy<T>>(
    policy: &mut P,
    scenario: &ScenarioConfig<T>,
    seed: u64,
) -> Result<(Trajectory<T>, EngagementOutcome<T>)> {
    let resolved = ResolvedScenario::resolve(scenario)?;
    run_episode_resolved(policy, &resolved, seed)
}

/// [`run_episode`] against an already-resolved scenario.
pub fn run_episode_resolved<T: Real, P: Policy<T>>(
    policy: &mut P,
    resolved: &ResolvedScenario<T>,
    seed: u64,
) -> Result<(Trajectory<T>, EngagementOutcome<T>)> {
    let mut world = resolved.jittered_world(seed)?;
    let mut trajectory = Trajectory::new();
    let outcome = run_from_world(
        &mut world,
        policy,
        resolved.config.max_steps,
        Some(&mut trajectory),
    )?;
    Ok((trajectory, outcome))
}

/// Derive concrete initial conditions from the scenario's scalar
/// embedding, or take the explicit vectors verbatim when given.
///
/// The derived geometry is a head-on encounter: the pursuer sits at
/// `altitude` above the Earth sphere, the evader `initial_distance`
/// away along the local horizontal, flying toward the pursuer. The
/// pursuer heading starts along the LOS and is then refined by a short
/// shooting pass so that the zero-maneuver engagement actually
/// intercepts (both vehicles fly curved, lift-and-gravity-bent paths,
/// so a pure LOS heading would miss by tens of meters).
pub fn resolve_setup<T: Real>(cfg: &ScenarioConfig<T>) -> Result<EngagementSetup<T>> {
    if let (Some(ep), Some(ev), Some(pp), Some(pv)) = (
        cfg.efv_position,
        cfg.efv_velocity,
        cfg.pfv_position,
        cfg.pfv_velocity,
    ) {
        let frame = LaunchFrame::from_launch(pp, ep)?;
        return Ok(EngagementSetup {
            efv: VehicleState::new(ep, ev),
            pfv: VehicleState::new(pp, pv),
            efv_cmd: EfvCommand::new(cfg.efv_alpha0, cfg.efv_heel0)?,
            pfv_cmd: PfvCommand::new(cfg.pfv_aoa0, cfg.pfv_sideslip0)?,
            frame,
        });
    }

    let up = GeoVector::new(T::one(), T::zero(), T::zero());
    let horizontal = GeoVector::new(T::zero(), T::one(), T::zero());
    let radius = T::of(EARTH_RADIUS) + cfg.altitude;
    let pfv_pos = up.scale(radius);
    let efv_pos = pfv_pos + horizontal.scale(cfg.initial_distance);
    let efv_vel = horizontal.scale(-cfg.efv_speed);
    let frame = LaunchFrame::from_launch(pfv_pos, efv_pos)?;
    let efv_cmd = EfvCommand::new(cfg.efv_alpha0, cfg.efv_heel0)?;
    let pfv_cmd = PfvCommand::new(cfg.pfv_aoa0, cfg.pfv_sideslip0)?;

    let build = |aim: GeoVector<T>| EngagementSetup {
        efv: VehicleState::new(efv_pos, efv_vel),
        pfv: VehicleState::new(pfv_pos, aim.scale(cfg.pfv_speed)),
        efv_cmd,
        pfv_cmd,
        frame,
    };

    // Shooting pass: simulate the zero-maneuver engagement and tilt the
    // pursuer heading toward the observed miss vector at closest
    // approach, until the miss is small or the iteration budget runs out.
    let mut aim = horizontal;
    let mut best = (T::infinity(), aim);
    for _ in 0..cfg.aim_iterations {
        let setup = build(aim);
        let mut world = World::from_setup(&setup, cfg)?;
        let mut traj = Trajectory::new();
        let outcome = run_from_world(&mut world, &mut ZeroPolicy, cfg.max_steps, Some(&mut traj))?;
        if outcome.evasion_distance < best.0 {
            best = (outcome.evasion_distance, aim);
        }
        if outcome.truncated || outcome.evasion_distance < T::of(0.25) {
            break;
        }
        let row = &traj.rows[outcome.termination_index as usize];
        let miss = row.efv_pos - row.pfv_pos;
        let t_star = (T::of(outcome.termination_index as f64) * cfg.dt).max(cfg.dt);
        let correction = miss.scale(T::of(0.9) / (cfg.pfv_speed * t_star));
        aim = match (aim + correction).normalized() {
            Some(a) => a,
            None => break,
        };
    }
    Ok(build(best.1))
}

/// Apply seeded lateral position and heading jitter to the evader's
/// initial state. The launch frame is rebuilt from the shifted geometry.
pub fn jitter_setup<T: Real>(
    setup: &EngagementSetup<T>,
    cfg: &ScenarioConfig<T>,
    seed: u64,
) -> Result<EngagementSetup<T>> {
    if cfg.init_jitter_pos == T::zero() && cfg.init_jitter_vel_deg == T::zero() {
        return Ok(*setup);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || T::of(2.0 * rng.random::<f64>() - 1.0);

    let oy = draw() * cfg.init_jitter_pos;
    let oz = draw() * cfg.init_jitter_pos;
    let a1 = (draw() * cfg.init_jitter_vel_deg).to_radians();
    let a2 = (draw() * cfg.init_jitter_vel_deg).to_radians();

    let efv_pos = setup.efv.position + setup.frame.y_axis.scale(oy) + setup.frame.z_axis.scale(oz);
    let efv_vel = setup
        .efv
        .velocity
        .rotate_about(setup.frame.y_axis, a1)
        .rotate_about(setup.frame.z_axis, a2);
    let frame = LaunchFrame::from_launch(setup.pfv.position, efv_pos)?;
    Ok(EngagementSetup {
        efv: VehicleState::new(efv_pos, efv_vel),
        frame,
        ..*setup
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> GeoVector<f64> {
        GeoVector::new(x, y, z)
    }

    fn state(p: GeoVector<f64>, vel: GeoVector<f64>) -> VehicleState<f64> {
        VehicleState::new(p, vel)
    }

    fn quick_scenario() -> ScenarioConfig<f64> {
        // Coarse and close so tests stay fast.
        ScenarioConfig {
            dt: 0.05,
            alpha_step_limit: 0.05,
            gamma_step_limit: 0.05,
            aim_iterations: 8,
            max_steps: 20_000,
            ..Default::default()
        }
    }

    #[test]
    fn observe_coincident_at_rest_is_zero() {
        let s = state(v(1.0e6, 0.0, 0.0), v(0.0, 0.0, 0.0));
        let obs = observe(&s, &s, &EfvCommand::zero());
        assert_eq!(obs.0, [0.0; 8]);
    }

    #[test]
    fn observe_normalizes_position() {
        let e = state(v(2000.0, 0.0, 0.0), v(0.0, 0.0, 0.0));
        let p = state(v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0));
        let obs = observe(&e, &p, &EfvCommand::zero());
        assert_eq!(obs.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn observe_scales_commands_by_half_range() {
        let s = state(v(1.0, 0.0, 0.0), v(0.0, 0.0, 0.0));
        let cmd = EfvCommand::new(16.0, -90.0).unwrap();
        let obs = observe(&s, &s, &cmd);
        assert_eq!(obs.0[6], 1.0);
        assert_eq!(obs.0[7], -1.0);
    }

    #[test]
    fn apply_action_clips_delta_then_adds() {
        let prev = EfvCommand::new(7.3443, 0.0).unwrap();
        let delta = ActionDelta {
            d_alpha: 0.05,
            d_gamma: 0.0,
        };
        // The request exceeds the 0.01 deg per-step limit, so only the
        // limit is applied.
        let next = apply_action(&prev, &delta, (0.01, 0.01));
        assert_relative_eq!(next.composite_aoa(), 7.3543, epsilon = 1e-12);
    }

    #[test]
    fn apply_action_saturates_at_range() {
        let prev = EfvCommand::new(16.0, 0.0).unwrap();
        let delta = ActionDelta {
            d_alpha: 0.01,
            d_gamma: 0.0,
        };
        let next = apply_action(&prev, &delta, (0.01, 0.01));
        assert_eq!(next.composite_aoa(), 16.0);
    }

    #[test]
    fn apply_action_zero_delta_is_identity() {
        let prev = EfvCommand::new(-3.25, 41.0).unwrap();
        let next = apply_action(&prev, &ActionDelta::zero(), (0.01, 0.01));
        assert_eq!(next, prev);
    }

    #[test]
    fn detect_termination_cases() {
        assert!(detect_termination(3.0, 4.0));
        assert!(!detect_termination(4.0, 3.0));
        // d_prev must be strictly positive.
        assert!(!detect_termination(0.0, 1.0));
        assert!(detect_termination(2.0, 2.0));
    }

    #[test]
    fn default_scenario_initial_distance_matches() {
        let resolved = ResolvedScenario::resolve(&quick_scenario()).unwrap();
        let world = resolved.world().unwrap();
        assert_relative_eq!(world.distance(), 2000.0, epsilon = 1e-9);
    }

    #[test]
    fn first_step_closes_distance() {
        let resolved = ResolvedScenario::resolve(&quick_scenario()).unwrap();
        let mut world = resolved.world().unwrap();
        let d0 = world.distance();
        let d1 = world.engagement_step(world.efv_cmd()).unwrap();
        assert!(d1 < d0);
    }

    #[test]
    fn pfv_command_lags_one_instant() {
        // Oracle: hand-step the same scenario and verify that the pursuer
        // command applied during step i comes from the LOS pair
        // (t_{i-2}, t_{i-1}).
        let resolved = ResolvedScenario::resolve(&quick_scenario()).unwrap();
        let mut world = resolved.world().unwrap();
        let cmd = world.efv_cmd();

        let los0 = world.los();
        world.engagement_step(cmd).unwrap();
        // Step 1: no previous LOS pair existed, so the pursuer flew zero.
        assert_eq!(world.pfv_cmd(), PfvCommand::zero());
        let los1 = world.los();

        world.engagement_step(cmd).unwrap();
        let expect = pn_step(los0, los1, world.dt, &resolved.config.pn).unwrap();
        assert_eq!(world.pfv_cmd(), expect);
    }

    #[test]
    fn single_step_richardson_scaling() {
        // With the command held fixed, the gap between one step at dt and
        // two steps at dt/2 is dominated by the O(dt^5) local truncation
        // error, so halving dt shrinks it by roughly 2^5.
        let resolved = ResolvedScenario::resolve(&quick_scenario()).unwrap();
        let state = resolved.setup.efv;
        let cmd = resolved.setup.efv_cmd;
        let aero = resolved.config.aero_efv();
        let up = v(1.0, 0.0, 0.0);
        let accel = |s: &VehicleState<f64>| efv_acceleration(s, &cmd, &aero, up);

        let err_at = |dt: f64| {
            let one = integrate_step(&state, accel, dt, 0).unwrap();
            let half = integrate_step(&state, accel, dt / 2.0, 0).unwrap();
            let two = integrate_step(&half, accel, dt / 2.0, 1).unwrap();
            (one.position - two.position).norm()
        };
        let e1 = err_at(4.0);
        let e2 = err_at(2.0);
        assert!(e1 > 1e-10, "step too small to resolve truncation error");
        let ratio = e1 / e2;
        assert!(
            (12.0..80.0).contains(&ratio),
            "expected ~2^5 error reduction, got {ratio}"
        );
    }

    #[test]
    fn zero_policy_is_captured() {
        let (_, outcome) = run_episode(&mut ZeroPolicy, &quick_scenario(), 0).unwrap();
        assert!(!outcome.truncated);
        assert!(outcome.capture, "evasion {} m", outcome.evasion_distance);
        assert!(outcome.evasion_distance < 30.0);
    }

    /// Slews the composite angle of attack up at the per-step limit.
    struct HardTurnPolicy;

    impl Policy<f64> for HardTurnPolicy {
        fn next_delta(&mut self, _obs: &Observation<f64>, _step: u64) -> ActionDelta<f64> {
            ActionDelta {
                d_alpha: 1.0,
                d_gamma: 0.0,
            }
        }
    }

    #[test]
    fn hard_turn_beats_zero_policy() {
        let scenario = quick_scenario();
        let (_, base) = run_episode(&mut ZeroPolicy, &scenario, 0).unwrap();
        let (_, turn) = run_episode(&mut HardTurnPolicy, &scenario, 0).unwrap();
        assert!(
            turn.evasion_distance > base.evasion_distance,
            "turn {} m vs base {} m",
            turn.evasion_distance,
            base.evasion_distance
        );
    }

    #[test]
    fn termination_index_is_argmin_of_distances() {
        let scenario = quick_scenario();
        let resolved = ResolvedScenario::resolve(&scenario).unwrap();
        let mut world = resolved.world().unwrap();
        let mut traj = Trajectory::new();
        let outcome = run_from_world(
            &mut world,
            &mut ZeroPolicy,
            scenario.max_steps,
            Some(&mut traj),
        )
        .unwrap();
        assert!(!outcome.truncated);
        let argmin = traj
            .rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.dist_m.partial_cmp(&b.1.dist_m).unwrap())
            .unwrap()
            .0 as u64;
        assert_eq!(outcome.termination_index, argmin);
        assert_eq!(outcome.evasion_distance, traj.rows[argmin as usize].dist_m);
    }

    #[test]
    fn trajectory_commands_respect_limits() {
        struct NoisyPolicy(ChaCha8Rng);
        impl Policy<f64> for NoisyPolicy {
            fn next_delta(&mut self, _obs: &Observation<f64>, _step: u64) -> ActionDelta<f64> {
                ActionDelta {
                    d_alpha: 4.0 * self.0.random::<f64>() - 2.0,
                    d_gamma: 4.0 * self.0.random::<f64>() - 2.0,
                }
            }
        }
        let scenario = quick_scenario();
        let mut policy = NoisyPolicy(ChaCha8Rng::seed_from_u64(5));
        let (traj, _) = run_episode(&mut policy, &scenario, 0).unwrap();
        for pair in traj.rows.windows(2) {
            let da = (pair[1].alpha_deg - pair[0].alpha_deg).abs();
            let dg = (pair[1].gamma_deg - pair[0].gamma_deg).abs();
            assert!(da <= scenario.alpha_step_limit + 1e-12);
            assert!(dg <= scenario.gamma_step_limit + 1e-12);
            assert!(pair[1].alpha_deg.abs() <= EFV_AOA_LIMIT_DEG);
            assert!(pair[1].gamma_deg.abs() <= EFV_HEEL_LIMIT_DEG);
        }
    }

    #[test]
    fn episodes_are_deterministic() {
        let scenario = ScenarioConfig {
            init_jitter_pos: 15.0,
            init_jitter_vel_deg: 0.1,
            ..quick_scenario()
        };
        let (t1, o1) = run_episode(&mut ZeroPolicy, &scenario, 7).unwrap();
        let (t2, o2) = run_episode(&mut ZeroPolicy, &scenario, 7).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(t1.to_csv(), t2.to_csv());
        // A different seed moves the jittered start.
        let (t3, _) = run_episode(&mut ZeroPolicy, &scenario, 8).unwrap();
        assert_ne!(t1.to_csv(), t3.to_csv());
    }

    #[test]
    fn virtual_rollout_leaves_world_untouched() {
        let resolved = ResolvedScenario::resolve(&quick_scenario()).unwrap();
        let mut world = resolved.world().unwrap();
        for _ in 0..10 {
            world.engagement_step(world.efv_cmd()).unwrap();
        }
        let before = world.clone();
        virtual_rollout(&world, world.efv_cmd()).unwrap();
        assert_eq!(world, before);
    }

    #[test]
    fn virtual_rollout_matches_constant_policy_continuation() {
        // At stride 1 the rollout must be bit-identical to restarting the
        // episode from the snapshot with a constant-command policy.
        let mut scenario = quick_scenario();
        scenario.virtual_stride = 1;
        let resolved = ResolvedScenario::resolve(&scenario).unwrap();
        let mut world = resolved.world().unwrap();
        for k in [3u64, 17, 55] {
            while world.step_index() < k {
                world.engagement_step(world.efv_cmd()).unwrap();
            }
            let (v_hat, d_hat) = virtual_rollout(&world, world.efv_cmd()).unwrap();
            let mut replay = world.clone();
            let outcome =
                run_from_world(&mut replay, &mut ZeroPolicy, scenario.virtual_horizon, None)
                    .unwrap();
            assert_eq!(v_hat, outcome.residual_velocity);
            assert_eq!(d_hat, outcome.evasion_distance);
        }
    }

    #[test]
    fn virtual_rollout_near_termination_matches_real_outcome() {
        let mut scenario = quick_scenario();
        scenario.virtual_stride = 1;
        let resolved = ResolvedScenario::resolve(&scenario).unwrap();

        // Find the real termination step under the zero policy.
        let mut probe = resolved.world().unwrap();
        let real = run_from_world(&mut probe, &mut ZeroPolicy, scenario.max_steps, None).unwrap();

        // Snapshot one step before the real termination.
        let mut world = resolved.world().unwrap();
        while world.step_index() < real.termination_index {
            world.engagement_step(world.efv_cmd()).unwrap();
        }
        let (v_hat, d_hat) = virtual_rollout(&world, world.efv_cmd()).unwrap();
        assert_eq!(v_hat, real.residual_velocity);
        assert_eq!(d_hat, real.evasion_distance);
    }

    #[test]
    fn truncation_flags_unfinished_episode() {
        let mut scenario = quick_scenario();
        scenario.max_steps = 3;
        let (_, outcome) = run_episode(&mut ZeroPolicy, &scenario, 0).unwrap();
        assert!(outcome.truncated);
    }

    #[test]
    fn trajectory_csv_has_contracted_header() {
        let mut scenario = quick_scenario();
        scenario.max_steps = 2;
        let (traj, _) = run_episode(&mut ZeroPolicy, &scenario, 0).unwrap();
        let csv = traj.to_csv();
        assert!(csv.starts_with(TRAJECTORY_CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + traj.rows.len());
    }

    #[test]
    fn explicit_vectors_override_embedding() {
        let cfg = ScenarioConfig::<f64> {
            efv_position: Some(v(EARTH_RADIUS + 5000.0, 2000.0, 0.0)),
            efv_velocity: Some(v(0.0, -90.0, 0.0)),
            pfv_position: Some(v(EARTH_RADIUS + 5000.0, 0.0, 0.0)),
            pfv_velocity: Some(v(0.0, 70.0, 0.0)),
            ..Default::default()
        };
        let resolved = ResolvedScenario::resolve(&cfg).unwrap();
        assert_eq!(resolved.setup.efv.velocity, v(0.0, -90.0, 0.0));
        assert_relative_eq!(resolved.world().unwrap().distance(), 2000.0, epsilon = 1e-9);
    }
}
