//! Evolution-strategy refinement of a trained policy: Gaussian weight
//! perturbation around the current incumbent, deterministic candidate
//! evaluation, and strict-improvement acceptance under the safe-distance
//! constraint. Every accepted attempt is appended to an evolution record
//! whose residual velocities are strictly increasing.

use crate::engagement::ResolvedScenario;
use crate::error::{Error, Result};
use crate::net::PolicyParameters;
use crate::ppo::deterministic_outcome;
use crate::scenario::ScenarioConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Perturbation scales used in the reference experiments.
pub const SIGMA_GRID: [f64; 3] = [0.01, 0.1, 1.0];
/// Generation budgets used in the reference experiments.
pub const GENERATION_GRID: [u32; 4] = [50, 100, 150, 200];
/// Per-generation seed budgets used in the reference experiments.
pub const SEED_COUNT_GRID: [u32; 4] = [50, 100, 150, 200];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsConfig {
    /// Maximum number of generations.
    pub g_max: u32,
    /// Seeds (candidates) per generation.
    pub s_max: u32,
    /// Mean of the weight perturbation.
    pub mu: f64,
    /// Standard deviation of the weight perturbation.
    pub sigma: f64,
    /// Constraint: accepted candidates must evade beyond this distance, m.
    pub safe_distance: f64,
    pub rng_seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            g_max: 50,
            s_max: 50,
            mu: 0.0,
            sigma: 0.1,
            safe_distance: 30.0,
            rng_seed: 0,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g_max == 0 {
            return Err(Error::config("es.g_max", "must be at least 1"));
        }
        if self.s_max == 0 {
            return Err(Error::config("es.s_max", "must be at least 1"));
        }
        if self.sigma < 0.0 {
            return Err(Error::config("es.sigma", "must be nonnegative"));
        }
        if self.safe_distance <= 0.0 {
            return Err(Error::config("es.safe_distance", "must be positive"));
        }
        Ok(())
    }
}

/// Add independent Normal(mu, sigma^2) noise to every network weight.
/// The action log-standard-deviations are left untouched (candidate
/// evaluation is deterministic, so they do not affect the outcome).
pub fn perturb(
    params: &PolicyParameters<f64>,
    mu: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> PolicyParameters<f64> {
    let mut out = params.clone();
    if sigma == 0.0 && mu == 0.0 {
        return out;
    }
    let normal = Normal::new(mu, sigma).expect("finite perturbation parameters");
    for w in out.mlp.weights.iter_mut() {
        *w += normal.sample(rng);
    }
    out
}

/// Deterministic candidate score: one mean-action episode from the
/// nominal start, returning (evasion distance, residual velocity).
pub fn evaluate_candidate(
    params: &PolicyParameters<f64>,
    scenario: &ScenarioConfig<f64>,
) -> Result<(f64, f64)> {
    let resolved = ResolvedScenario::resolve(scenario)?;
    evaluate_candidate_resolved(params, &resolved)
}

/// [`evaluate_candidate`] against an already-resolved scenario.
pub fn evaluate_candidate_resolved(
    params: &PolicyParameters<f64>,
    resolved: &ResolvedScenario<f64>,
) -> Result<(f64, f64)> {
    let outcome = deterministic_outcome(params, resolved)?;
    Ok((outcome.evasion_distance, outcome.residual_velocity))
}

/// Accept a candidate only on strict residual-velocity improvement while
/// keeping the evasion distance above the safe threshold.
pub fn accept(candidate: (f64, f64), incumbent: (f64, f64), safe_distance: f64) -> bool {
    candidate.1 > incumbent.1 && candidate.0 > safe_distance
}

/// One accepted attempt (row 0 is the initial incumbent).
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRow {
    pub attempt: u64,
    pub evasion_distance: f64,
    pub residual_velocity: f64,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionRecord {
    pub rows: Vec<EvolutionRow>,
}

pub const EVOLUTION_CSV_HEADER: &str = "attempt,evasion_distance_m,residual_velocity_mps,note";

impl EvolutionRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EVOLUTION_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.attempt, r.evasion_distance, r.residual_velocity, r.note
            ));
        }
        s
    }

    /// Residual velocities strictly increase down the rows.
    pub fn velocities_strictly_increasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].residual_velocity > w[0].residual_velocity)
    }
}

#[derive(Debug, Clone)]
pub struct RefineResult {
    pub best: PolicyParameters<f64>,
    pub record: EvolutionRecord,
    /// Candidate evaluations performed: exactly g_max * s_max (the
    /// initial incumbent evaluation is not counted here).
    pub candidate_evaluations: u64,
    /// Whether the initial incumbent already satisfied the constraint.
    pub initial_feasible: bool,
}

/// Greedy (1+lambda)-style refinement: every generation draws `s_max`
/// perturbations of the *current* incumbent and adopts an accepted
/// candidate immediately. Failed evaluations count as rejected attempts.
/// The returned incumbent is never worse than the input under the
/// acceptance ordering.
pub fn refine(
    initial: &PolicyParameters<f64>,
    cfg: &EsConfig,
    scenario: &ScenarioConfig<f64>,
) -> Result<RefineResult> {
    cfg.validate()?;
    let resolved = ResolvedScenario::resolve(scenario)?;
    let mut incumbent = initial.clone();
    let mut score = evaluate_candidate_resolved(&incumbent, &resolved)?;
    let initial_feasible = score.0 > cfg.safe_distance;

    let mut record = EvolutionRecord::default();
    record.rows.push(EvolutionRow {
        attempt: 0,
        evasion_distance: score.0,
        residual_velocity: score.1,
        note: if initial_feasible {
            "initial incumbent".to_string()
        } else {
            "initial incumbent (violates the safe-distance constraint)".to_string()
        },
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut attempt: u64 = 0;
    let mut evaluations: u64 = 0;
    for _generation in 0..cfg.g_max {
        for _seed in 0..cfg.s_max {
            attempt += 1;
            let candidate = perturb(&incumbent, cfg.mu, cfg.sigma, &mut rng);
            evaluations += 1;
            match evaluate_candidate_resolved(&candidate, &resolved) {
                Ok(candidate_score) => {
                    if accept(candidate_score, score, cfg.safe_distance) {
                        incumbent = candidate;
                        score = candidate_score;
                        record.rows.push(EvolutionRow {
                            attempt,
                            evasion_distance: score.0,
                            residual_velocity: score.1,
                            note: String::new(),
                        });
                    }
                }
                Err(_) => {
                    // Rejected; the attempt still consumes budget.
                }
            }
        }
    }

    Ok(RefineResult {
        best: incumbent,
        record,
        candidate_evaluations: evaluations,
        initial_feasible,
    })
}
