//! PPO training of the evasion policy: rollout collection against the
//! engagement simulator, generalized advantage estimation, the clipped
//! surrogate update with plain gradient descent, the polynomial
//! learning-rate schedule, and the architecture/learning-rate sweep.
//!
//! The actor is a Gaussian policy over pre-squash actions; the applied
//! command delta is tanh(action) scaled to the per-step limits, which
//! keeps every emitted delta inside the contract by construction.
//! Probability ratios are computed on the pre-squash samples. The critic
//! regresses returns divided by a fixed scale (the largest achievable
//! final reward) so its targets stay O(1).

use crate::engagement::{
    apply_action, detect_termination, run_from_world, virtual_rollout, ActionDelta,
    EngagementOutcome, Observation, Policy, ResolvedScenario, World,
};
use crate::error::{Error, Result};
use crate::net::{Architecture, MlpParams, PolicyParameters};
use crate::reward::{final_reward, step_reward, RewardConfig};
use crate::scalar::Real;
use crate::scenario::ScenarioConfig;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// SplitMix64 step; derives independent seeds for the RNG streams.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PPOConfig {
    /// Total environment steps S_T.
    pub total_steps: u64,
    /// Starting learning rate l_B.
    pub base_lr: f64,
    /// Schedule exponent k.
    pub lr_exponent: u32,
    /// Probability-ratio clip.
    pub clip_ratio: f64,
    /// Discount factor.
    pub discount: f64,
    /// GAE lambda.
    pub gae_lambda: f64,
    /// Environment steps collected per update.
    pub rollout_length: usize,
    /// Minibatch size inside an update.
    pub minibatch_size: usize,
    /// Optimization epochs over each rollout.
    pub epochs_per_update: u32,
    /// Critic loss weight.
    pub value_loss_weight: f64,
    /// Entropy bonus weight.
    pub entropy_weight: f64,
    /// Global gradient-norm clip (actor and critic separately).
    pub max_grad_norm: f64,
    /// Recompute the prospective-outcome reward term every this many
    /// real steps, holding it in between.
    pub virtual_cadence: u32,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            total_steps: 3_500_000,
            base_lr: 0.001,
            lr_exponent: 2,
            clip_ratio: 0.2,
            discount: 0.999,
            gae_lambda: 0.95,
            rollout_length: 4096,
            minibatch_size: 256,
            epochs_per_update: 10,
            value_loss_weight: 0.5,
            entropy_weight: 0.0,
            max_grad_norm: 0.5,
            virtual_cadence: 10,
        }
    }
}

impl PPOConfig {
    /// Short-budget setup paired with
    /// [`ScenarioConfig::coarse_training`]: 200k steps instead of 3.5M.
    /// Episodes there run ~220 steps, so returns-to-go carry the terminal
    /// reward all the way back (lambda 1) and the wider clip with more
    /// epochs lets the policy move enough within the small step budget.
    pub fn coarse_training() -> Self {
        Self {
            total_steps: 200_000,
            gae_lambda: 1.0,
            clip_ratio: 0.3,
            epochs_per_update: 30,
            ..Self::default()
        }
    }

    /// Check invariants, reporting the offending key path.
    /// `total_steps == 0` is allowed and makes training a no-op.
    pub fn validate(&self) -> Result<()> {
        if self.base_lr <= 0.0 {
            return Err(Error::config("ppo.base_lr", "must be positive"));
        }
        if self.lr_exponent < 1 {
            return Err(Error::config("ppo.lr_exponent", "must be at least 1"));
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(Error::config("ppo.clip_ratio", "must lie in (0, 1)"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config("ppo.discount", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config("ppo.gae_lambda", "must lie in [0, 1]"));
        }
        if self.rollout_length == 0 {
            return Err(Error::config("ppo.rollout_length", "must be positive"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::config("ppo.minibatch_size", "must be positive"));
        }
        if self.epochs_per_update == 0 {
            return Err(Error::config("ppo.epochs_per_update", "must be positive"));
        }
        if self.value_loss_weight < 0.0 {
            return Err(Error::config(
                "ppo.value_loss_weight",
                "must be nonnegative",
            ));
        }
        if self.entropy_weight < 0.0 {
            return Err(Error::config("ppo.entropy_weight", "must be nonnegative"));
        }
        if self.max_grad_norm <= 0.0 {
            return Err(Error::config("ppo.max_grad_norm", "must be positive"));
        }
        if self.virtual_cadence == 0 {
            return Err(Error::config("ppo.virtual_cadence", "must be positive"));
        }
        Ok(())
    }
}

/// Polynomial learning-rate schedule: l_C = l_B * ((S_T - S_E)/S_T)^k.
///
/// Exactly l_B at zero executed steps and exactly zero when the schedule
/// is spent; the power is an explicit multiplication chain so the
/// endpoints and grid values are bit-exact.
pub fn lr_schedule<T: Real>(
    total_steps: u64,
    executed_steps: u64,
    base_lr: T,
    exponent: u32,
) -> Result<T> {
    if total_steps == 0 {
        return Err(Error::InvalidStep("schedule needs total_steps > 0".into()));
    }
    if executed_steps > total_steps {
        return Err(Error::ScheduleExhausted {
            executed: executed_steps,
            total: total_steps,
        });
    }
    let residual = T::of((total_steps - executed_steps) as f64) / T::of(total_steps as f64);
    let mut factor = T::one();
    for _ in 0..exponent {
        factor = factor * residual;
    }
    Ok(base_lr * factor)
}

/// One environment step as stored in the rollout buffer. `action_raw`
/// is the pre-squash Gaussian sample; the applied delta is
/// tanh(action_raw) scaled by the per-step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub observation: [f64; 8],
    pub action_raw: [f64; 2],
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Generalized advantage estimation.
///
/// Returns raw (unnormalized) advantages and the matching returns
/// (advantage + value); `bootstrap_value` stands in for the value of the
/// state after the last transition when the rollout ends mid-episode.
pub fn compute_gae<T: Real>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    bootstrap_value: T,
    discount: T,
    gae_lambda: T,
) -> Result<(Vec<T>, Vec<T>)> {
    if rewards.len() != values.len() || rewards.len() != dones.len() {
        return Err(Error::ShapeMismatch(format!(
            "gae inputs disagree: {} rewards, {} values, {} dones",
            rewards.len(),
            values.len(),
            dones.len()
        )));
    }
    let n = rewards.len();
    let mut advantages = vec![T::zero(); n];
    let mut carry = T::zero();
    for t in (0..n).rev() {
        let not_done = if dones[t] { T::zero() } else { T::one() };
        let next_value = if t + 1 < n {
            values[t + 1]
        } else {
            bootstrap_value
        };
        let delta = rewards[t] + discount * next_value * not_done - values[t];
        carry = delta + discount * gae_lambda * not_done * carry;
        advantages[t] = carry;
    }
    let returns = advantages
        .iter()
        .zip(values.iter())
        .map(|(a, v)| *a + *v)
        .collect();
    Ok((advantages, returns))
}

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

fn gaussian_log_prob(mean: &[f64], log_std: &[f64; 2], raw: &[f64; 2]) -> f64 {
    let mut lp = -LN_2PI;
    for j in 0..2 {
        let sigma = log_std[j].exp();
        let z = (raw[j] - mean[j]) / sigma;
        lp += -0.5 * z * z - log_std[j];
    }
    lp
}

fn squash(raw: &[f64; 2], limits: (f64, f64)) -> ActionDelta<f64> {
    ActionDelta {
        d_alpha: raw[0].tanh() * limits.0,
        d_gamma: raw[1].tanh() * limits.1,
    }
}

/// Evader action source backed by actor parameters. Deterministic mode
/// emits the squashed mean; stochastic mode samples the Gaussian first.
pub struct NetPolicy<'a> {
    actor: &'a PolicyParameters<f64>,
    limits: (f64, f64),
    sampler: Option<ChaCha8Rng>,
}

impl<'a> NetPolicy<'a> {
    pub fn deterministic(actor: &'a PolicyParameters<f64>, limits: (f64, f64)) -> Self {
        Self {
            actor,
            limits,
            sampler: None,
        }
    }

    pub fn stochastic(actor: &'a PolicyParameters<f64>, limits: (f64, f64), seed: u64) -> Self {
        Self {
            actor,
            limits,
            sampler: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Policy<f64> for NetPolicy<'_> {
    fn next_delta(&mut self, obs: &Observation<f64>, _step: u64) -> ActionDelta<f64> {
        let mean = self
            .actor
            .mlp
            .forward(obs.as_slice())
            .expect("finite 8-entry observation");
        let mut raw = [mean[0], mean[1]];
        if let Some(rng) = self.sampler.as_mut() {
            for (r, ls) in raw.iter_mut().zip(self.actor.log_std.iter()) {
                let z: f64 = StandardNormal.sample(rng);
                *r += ls.exp() * z;
            }
        }
        squash(&raw, self.limits)
    }
}

/// Rollout data prepared for one update pass.
#[derive(Debug, Clone)]
pub struct UpdateBatch {
    pub observations: Vec<[f64; 8]>,
    pub actions_raw: Vec<[f64; 2]>,
    pub old_log_probs: Vec<f64>,
    /// Raw advantages; normalized once per update inside `ppo_update`.
    pub advantages: Vec<f64>,
    /// Critic regression targets, already in the critic's output scale.
    pub value_targets: Vec<f64>,
}

impl UpdateBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn digest(&self) -> String {
        let s: f64 = self
            .observations
            .iter()
            .flat_map(|o| o.iter())
            .chain(self.advantages.iter())
            .sum();
        format!("{} samples, checksum {s}", self.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
}

const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 2.0;

fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = (rng.random::<u64>() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
}

fn clip_gradient(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
}

/// One PPO update over the batch: clipped-surrogate actor loss, squared
/// critic loss, entropy bonus, gradient-norm clipping and a plain
/// gradient-descent step at `lr`. Returns the updated parameters and
/// aggregate statistics; inputs are not mutated.
pub fn ppo_update(
    actor: &PolicyParameters<f64>,
    critic: &MlpParams<f64>,
    batch: &UpdateBatch,
    cfg: &PPOConfig,
    lr: f64,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<(PolicyParameters<f64>, MlpParams<f64>, UpdateStats)> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty update batch".into()));
    }
    if lr < 0.0 {
        return Err(Error::config("ppo.lr", "negative learning rate"));
    }
    let n = batch.len();

    // Normalize advantages once per update batch.
    let mean_adv = batch.advantages.iter().sum::<f64>() / n as f64;
    let var_adv = batch
        .advantages
        .iter()
        .map(|a| (a - mean_adv) * (a - mean_adv))
        .sum::<f64>()
        / n as f64;
    let std_adv = var_adv.sqrt();
    let advantages: Vec<f64> = batch
        .advantages
        .iter()
        .map(|a| (a - mean_adv) / (std_adv + 1e-8))
        .collect();

    let mut actor = actor.clone();
    let mut critic = critic.clone();

    let mut ratio_sum = 0.0;
    let mut clip_count = 0usize;
    let mut actor_loss_sum = 0.0;
    let mut critic_loss_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut pass_count = 0usize;

    let mut indices: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs_per_update {
        shuffle(&mut indices, shuffle_rng);
        for chunk in indices.chunks(cfg.minibatch_size) {
            let m = chunk.len() as f64;
            let mut grad_w = vec![0.0; actor.mlp.weights.len()];
            let mut grad_ls = [0.0; 2];
            let mut grad_c = vec![0.0; critic.weights.len()];

            let entropy: f64 = actor
                .log_std
                .iter()
                .map(|ls| ls + 0.5 * (LN_2PI + 1.0))
                .sum();
            let mut mb_actor_loss = 0.0;
            let mut mb_critic_loss = 0.0;

            for &i in chunk {
                let obs = &batch.observations[i];
                let (mean, cache_a) = actor.mlp.forward_cached(obs)?;
                let lp = gaussian_log_prob(&mean, &actor.log_std, &batch.actions_raw[i]);
                let ratio = (lp - batch.old_log_probs[i]).exp();
                let adv = advantages[i];

                let clipped_ratio = ratio.clamp(1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
                let unclipped = ratio * adv;
                let clipped = clipped_ratio * adv;
                let (surrogate, dsurr_drho) = if unclipped <= clipped {
                    (unclipped, adv)
                } else {
                    (clipped, 0.0)
                };
                mb_actor_loss -= surrogate / m;
                ratio_sum += ratio;
                if (ratio - 1.0).abs() > cfg.clip_ratio {
                    clip_count += 1;
                }

                // d(actor loss)/d(log prob), including the 1/m average.
                let dloss_dlp = -dsurr_drho * ratio / m;
                if dloss_dlp != 0.0 {
                    let mut upstream = [0.0; 2];
                    for j in 0..2 {
                        let sigma = actor.log_std[j].exp();
                        let z = (batch.actions_raw[i][j] - mean[j]) / sigma;
                        // d(log prob)/d(mean_j) = z/sigma; d/d(log_std_j) = z^2 - 1.
                        upstream[j] = dloss_dlp * z / sigma;
                        grad_ls[j] += dloss_dlp * (z * z - 1.0);
                    }
                    let g = actor.mlp.backward(&cache_a, &upstream)?;
                    for (acc, gi) in grad_w.iter_mut().zip(g.iter()) {
                        *acc += gi;
                    }
                }

                let (v_out, cache_c) = critic.forward_cached(obs)?;
                let err = v_out[0] - batch.value_targets[i];
                mb_critic_loss += err * err / m;
                let upstream_c = [2.0 * cfg.value_loss_weight * err / m];
                let gc = critic.backward(&cache_c, &upstream_c)?;
                for (acc, gi) in grad_c.iter_mut().zip(gc.iter()) {
                    *acc += gi;
                }
            }

            // Entropy bonus: loss -= w * H, and dH/d(log_std_j) = 1.
            for g in grad_ls.iter_mut() {
                *g -= cfg.entropy_weight;
            }

            let total_loss = mb_actor_loss + cfg.value_loss_weight * mb_critic_loss
                - cfg.entropy_weight * entropy;
            if !total_loss.is_finite() {
                return Err(Error::NumericFault {
                    step: pass_count as u64,
                    detail: format!("non-finite loss on batch [{}]", batch.digest()),
                });
            }

            // Global-norm clip: actor weights + log-std jointly, critic
            // separately; then the plain gradient-descent step.
            let mut actor_grad: Vec<f64> = grad_w.iter().copied().chain(grad_ls).collect();
            clip_gradient(&mut actor_grad, cfg.max_grad_norm);
            clip_gradient(&mut grad_c, cfg.max_grad_norm);
            for (w, g) in actor.mlp.weights.iter_mut().zip(actor_grad.iter()) {
                *w -= lr * g;
            }
            for j in 0..2 {
                actor.log_std[j] = (actor.log_std[j] - lr * actor_grad[grad_w.len() + j])
                    .clamp(LOG_STD_MIN, LOG_STD_MAX);
            }
            for (w, g) in critic.weights.iter_mut().zip(grad_c.iter()) {
                *w -= lr * g;
            }

            actor_loss_sum += mb_actor_loss;
            critic_loss_sum += mb_critic_loss;
            entropy_sum += entropy;
            pass_count += 1;
        }
    }

    let stats = UpdateStats {
        mean_ratio: ratio_sum / (cfg.epochs_per_update as f64 * n as f64),
        clip_fraction: clip_count as f64 / (cfg.epochs_per_update as f64 * n as f64),
        actor_loss: actor_loss_sum / pass_count as f64,
        critic_loss: critic_loss_sum / pass_count as f64,
        entropy: entropy_sum / pass_count as f64,
    };
    Ok((actor, critic, stats))
}

/// One row of the per-episode training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub steps: u64,
    pub evasion_distance: f64,
    pub residual_velocity: f64,
    /// Episode return: exactly `step_reward_sum + final_reward`.
    pub return_sum: f64,
    /// Learning rate after the steps consumed by this episode.
    pub lr: f64,
    pub step_reward_sum: f64,
    pub final_reward: f64,
    pub truncated: bool,
}

pub const HISTORY_CSV_HEADER: &str =
    "episode,steps,evasion_distance_m,residual_velocity_mps,return,lr";

pub fn history_to_csv(history: &[EpisodeRecord]) -> String {
    let mut s = String::from(HISTORY_CSV_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.episode, r.steps, r.evasion_distance, r.residual_velocity, r.return_sum, r.lr
        ));
    }
    s
}

/// Steps one episode and accumulates the shaped reward, recomputing the
/// prospective-outcome term every `cadence` steps.
struct EpisodeDriver<'a> {
    resolved: &'a ResolvedScenario<f64>,
    reward: RewardConfig<f64>,
    cadence: u64,
    world: World<f64>,
    steps: u64,
    pv_cache: (f64, f64),
    step_reward_sum: f64,
}

struct DriverStep {
    reward: f64,
    terminal: Option<Terminal>,
}

struct Terminal {
    outcome: EngagementOutcome<f64>,
    final_reward: f64,
}

impl<'a> EpisodeDriver<'a> {
    fn start(
        resolved: &'a ResolvedScenario<f64>,
        reward: RewardConfig<f64>,
        cadence: u32,
        jitter_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            resolved,
            reward,
            cadence: cadence as u64,
            world: resolved.jittered_world(jitter_seed)?,
            steps: 0,
            pv_cache: (0.0, 0.0),
            step_reward_sum: 0.0,
        })
    }

    fn observation(&self) -> Observation<f64> {
        self.world.observation()
    }

    fn limits(&self) -> (f64, f64) {
        self.world.rate_limits()
    }

    fn step(&mut self, delta: ActionDelta<f64>) -> Result<DriverStep> {
        let d_prev = self.world.distance();
        let speed_prev = self.world.efv.speed();
        let los_before = self.world.los();
        let cmd = apply_action(&self.world.efv_cmd(), &delta, self.world.rate_limits());
        let d_new = self.world.engagement_step(cmd)?;
        if self.steps.is_multiple_of(self.cadence) {
            self.pv_cache = virtual_rollout(&self.world, cmd)?;
        }
        let r_p = step_reward(
            los_before,
            self.world.los(),
            self.world.dt,
            self.pv_cache,
            &self.reward,
        );
        self.steps += 1;
        self.step_reward_sum += r_p;

        if detect_termination(d_prev, d_new) {
            let outcome = EngagementOutcome {
                evasion_distance: d_prev,
                residual_velocity: speed_prev,
                termination_index: self.world.step_index() - 1,
                capture: d_prev <= self.world.capture_radius(),
                truncated: false,
            };
            let r_f = final_reward(d_prev, speed_prev, &self.reward);
            return Ok(DriverStep {
                reward: r_p + r_f,
                terminal: Some(Terminal {
                    outcome,
                    final_reward: r_f,
                }),
            });
        }
        if self.steps >= self.resolved.config.max_steps {
            // Horizon hit while still closing: no final reward.
            let outcome = EngagementOutcome {
                evasion_distance: d_new,
                residual_velocity: self.world.efv.speed(),
                termination_index: self.world.step_index(),
                capture: d_new <= self.world.capture_radius(),
                truncated: true,
            };
            return Ok(DriverStep {
                reward: r_p,
                terminal: Some(Terminal {
                    outcome,
                    final_reward: 0.0,
                }),
            });
        }
        Ok(DriverStep {
            reward: r_p,
            terminal: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub actor: PolicyParameters<f64>,
    pub critic: MlpParams<f64>,
    pub history: Vec<EpisodeRecord>,
    /// (evasion distance, residual velocity) of the final policy run
    /// deterministically from the nominal start.
    pub deterministic_eval: (f64, f64),
    pub steps_done: u64,
}

fn episode_seed(seed: u64, episode: u64) -> u64 {
    mix_seed(seed, 0x0E91_0000u64 ^ episode)
}

/// Deterministic (mean-action) episode from the nominal start.
pub fn deterministic_outcome(
    actor: &PolicyParameters<f64>,
    resolved: &ResolvedScenario<f64>,
) -> Result<EngagementOutcome<f64>> {
    let mut world = resolved.world()?;
    let limits = world.rate_limits();
    let mut policy = NetPolicy::deterministic(actor, limits);
    run_from_world(&mut world, &mut policy, resolved.config.max_steps, None)
}

/// Train from a fresh initialization. See [`train_with`].
pub fn train(
    scenario: &ScenarioConfig<f64>,
    arch: &Architecture,
    cfg: &PPOConfig,
    reward: &RewardConfig<f64>,
    seed: u64,
) -> Result<TrainResult> {
    train_with(scenario, arch, cfg, reward, seed, |_, _| Ok(()))
}

/// Train with a per-episode observer (used for checkpointing).
///
/// Alternates rollout collection under the stochastic policy with PPO
/// updates, advancing the learning-rate schedule by the steps consumed.
/// The final rollout is truncated so exactly `total_steps` environment
/// steps are taken.
pub fn train_with<F>(
    scenario: &ScenarioConfig<f64>,
    arch: &Architecture,
    cfg: &PPOConfig,
    reward: &RewardConfig<f64>,
    seed: u64,
    mut on_episode: F,
) -> Result<TrainResult>
where
    F: FnMut(&EpisodeRecord, &PolicyParameters<f64>) -> Result<()>,
{
    cfg.validate()?;
    reward.validate()?;
    let resolved = ResolvedScenario::resolve(scenario)?;
    let reward = reward.resolved_against(scenario.efv_speed);

    let mut actor = PolicyParameters::init(arch.clone(), mix_seed(seed, 1))?;
    let critic_arch = Architecture::critic(arch.hidden())?;
    let mut critic = MlpParams::init(critic_arch, mix_seed(seed, 2));

    if cfg.total_steps == 0 {
        let det = deterministic_outcome(&actor, &resolved)?;
        return Ok(TrainResult {
            actor,
            critic,
            history: Vec::new(),
            deterministic_eval: (det.evasion_distance, det.residual_velocity),
            steps_done: 0,
        });
    }

    // Critic works in units of the largest achievable final reward.
    let value_scale = reward.kv_on * reward.v_ref + reward.safe_distance;
    let mut action_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 4));

    let mut history = Vec::new();
    let mut episode_index: u64 = 0;
    let mut steps_done: u64 = 0;
    let mut driver = EpisodeDriver::start(
        &resolved,
        reward,
        cfg.virtual_cadence,
        episode_seed(seed, 0),
    )?;
    let limits = driver.limits();

    while steps_done < cfg.total_steps {
        let take = cfg
            .rollout_length
            .min((cfg.total_steps - steps_done) as usize);
        let mut observations = Vec::with_capacity(take);
        let mut actions_raw = Vec::with_capacity(take);
        let mut log_probs = Vec::with_capacity(take);
        let mut values = Vec::with_capacity(take);
        let mut rewards = Vec::with_capacity(take);
        let mut dones = Vec::with_capacity(take);

        for _ in 0..take {
            let obs = driver.observation();
            let mean = actor.mlp.forward(obs.as_slice())?;
            let value = critic.forward(obs.as_slice())?[0] * value_scale;
            let mut raw = [0.0f64; 2];
            for j in 0..2 {
                let z: f64 = StandardNormal.sample(&mut action_rng);
                raw[j] = mean[j] + actor.log_std[j].exp() * z;
            }
            let log_prob = gaussian_log_prob(&mean, &actor.log_std, &raw);
            let step = driver.step(squash(&raw, limits))?;
            steps_done += 1;

            observations.push(obs.0);
            actions_raw.push(raw);
            log_probs.push(log_prob);
            values.push(value);
            rewards.push(step.reward);
            dones.push(step.terminal.is_some());

            if let Some(term) = step.terminal {
                let record = EpisodeRecord {
                    episode: episode_index,
                    steps: driver.steps,
                    evasion_distance: term.outcome.evasion_distance,
                    residual_velocity: term.outcome.residual_velocity,
                    return_sum: driver.step_reward_sum + term.final_reward,
                    lr: lr_schedule(cfg.total_steps, steps_done, cfg.base_lr, cfg.lr_exponent)?,
                    step_reward_sum: driver.step_reward_sum,
                    final_reward: term.final_reward,
                    truncated: term.outcome.truncated,
                };
                on_episode(&record, &actor)?;
                history.push(record);
                episode_index += 1;
                driver = EpisodeDriver::start(
                    &resolved,
                    reward,
                    cfg.virtual_cadence,
                    episode_seed(seed, episode_index),
                )?;
            }
        }

        let bootstrap = if *dones.last().unwrap() {
            0.0
        } else {
            critic.forward(driver.observation().as_slice())?[0] * value_scale
        };
        let (advantages, returns) = compute_gae(
            &rewards,
            &values,
            &dones,
            bootstrap,
            cfg.discount,
            cfg.gae_lambda,
        )?;
        let batch = UpdateBatch {
            observations,
            actions_raw,
            old_log_probs: log_probs,
            advantages,
            value_targets: returns.iter().map(|r| r / value_scale).collect(),
        };
        let lr = lr_schedule(cfg.total_steps, steps_done, cfg.base_lr, cfg.lr_exponent)?;
        let (a2, c2, _stats) = ppo_update(&actor, &critic, &batch, cfg, lr, &mut shuffle_rng)?;
        actor = a2;
        critic = c2;
    }

    let det = deterministic_outcome(&actor, &resolved)?;
    Ok(TrainResult {
        actor,
        critic,
        history,
        deterministic_eval: (det.evasion_distance, det.residual_velocity),
        steps_done,
    })
}

/// Outcome and shaped return of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalEpisode {
    pub outcome: EngagementOutcome<f64>,
    pub episode_return: f64,
}

/// Run `episodes` deterministic (mean-action) episodes with seeded
/// initial-condition jitter, scoring each under the shaped reward.
pub fn evaluate(
    actor: &PolicyParameters<f64>,
    resolved: &ResolvedScenario<f64>,
    reward: &RewardConfig<f64>,
    cadence: u32,
    episodes: u32,
    seed: u64,
) -> Result<Vec<EvalEpisode>> {
    let reward = reward.resolved_against(resolved.config.efv_speed);
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut driver = EpisodeDriver::start(
                resolved,
                reward,
                cadence,
                mix_seed(seed, 0x0E7A_0000u64 ^ i as u64),
            )?;
            let limits = driver.limits();
            loop {
                let obs = driver.observation();
                let mean = actor.mlp.forward(obs.as_slice())?;
                let step = driver.step(squash(&[mean[0], mean[1]], limits))?;
                if let Some(term) = step.terminal {
                    return Ok(EvalEpisode {
                        outcome: term.outcome,
                        episode_return: driver.step_reward_sum + term.final_reward,
                    });
                }
            }
        })
        .collect()
}

/// Architecture x learning-rate sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub architectures: Vec<Architecture>,
    pub ks: Vec<u32>,
    pub base_lrs: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let hidden: [&[usize]; 6] = [
            &[64, 64],
            &[128, 128],
            &[256, 256],
            &[64, 64, 64],
            &[128, 128, 128],
            &[256, 256, 256],
        ];
        Self {
            architectures: hidden
                .iter()
                .map(|h| Architecture::actor(h).unwrap())
                .collect(),
            ks: vec![2, 3],
            base_lrs: vec![0.001, 0.0001],
        }
    }
}

impl SweepGrid {
    pub fn cell_count(&self) -> usize {
        self.architectures.len() * self.ks.len() * self.base_lrs.len()
    }
}

/// One sweep row, mirroring the training-configuration table: index,
/// architecture, activation, k, l_B, steps, evasion distance, residual
/// velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub architecture: String,
    pub activation: String,
    pub k: u32,
    pub base_lr: f64,
    pub steps: u64,
    pub evasion_distance: f64,
    pub residual_velocity: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Position (into `rows`) of the best cell, if any qualifies.
    pub best: Option<usize>,
    /// Full per-cell training artifacts, aligned with `rows`;
    /// `None` for failed cells.
    pub results: Vec<Option<TrainResult>>,
}

pub fn cell_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed, 0x5EED_0000u64 ^ index as u64)
}

/// Best row: largest residual velocity among rows whose evasion distance
/// exceeds the safe distance. Failed rows never qualify.
pub fn mark_best(rows: &[SweepRow], safe_distance: f64) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.error.is_none() && r.evasion_distance > safe_distance)
        .max_by(|a, b| {
            a.1.residual_velocity
                .partial_cmp(&b.1.residual_velocity)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
}

/// Run `train` for every grid cell (k outer, l_B middle, architecture
/// inner, matching the reference table's row order). Cells run in
/// parallel; failures are recorded per cell without aborting the sweep.
pub fn sweep(
    grid: &SweepGrid,
    scenario: &ScenarioConfig<f64>,
    cfg: &PPOConfig,
    reward: &RewardConfig<f64>,
    seed: u64,
) -> Result<SweepResult> {
    if grid.cell_count() == 0 {
        return Err(Error::ShapeMismatch("empty sweep grid".into()));
    }
    let mut cells = Vec::new();
    for &k in &grid.ks {
        for &lb in &grid.base_lrs {
            for arch in &grid.architectures {
                cells.push((k, lb, arch.clone()));
            }
        }
    }

    let outputs: Vec<(SweepRow, Option<TrainResult>)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, (k, lb, arch))| {
            let cell_cfg = PPOConfig {
                lr_exponent: *k,
                base_lr: *lb,
                ..cfg.clone()
            };
            let mut row = SweepRow {
                index: i + 1,
                architecture: arch.label(),
                activation: "ReLU".to_string(),
                k: *k,
                base_lr: *lb,
                steps: cell_cfg.total_steps,
                evasion_distance: f64::NAN,
                residual_velocity: f64::NAN,
                error: None,
            };
            match train(scenario, arch, &cell_cfg, reward, cell_seed(seed, i)) {
                Ok(result) => {
                    row.evasion_distance = result.deterministic_eval.0;
                    row.residual_velocity = result.deterministic_eval.1;
                    (row, Some(result))
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    (row, None)
                }
            }
        })
        .collect();

    let (rows, results): (Vec<_>, Vec<_>) = outputs.into_iter().unzip();
    let best = mark_best(&rows, reward.safe_distance);
    Ok(SweepResult {
        rows,
        best,
        results,
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "index,architecture,activation,k,l_B,steps,evasion_distance_m,residual_velocity_mps,best";

pub fn sweep_to_csv(result: &SweepResult) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for (i, r) in result.rows.iter().enumerate() {
        let best = if result.best == Some(i) { "*" } else { "" };
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.index,
            r.architecture,
            r.activation,
            r.k,
            r.base_lr,
            r.steps,
            r.evasion_distance,
            r.residual_velocity,
            best
        ));
    }
    s
}
