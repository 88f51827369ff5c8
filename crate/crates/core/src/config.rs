//! Run configuration: a human-readable `key = value` file with one
//! section per subsystem, strict unknown-key rejection, and a canonical
//! echo format whose parse/emit round trip is byte-stable.

use crate::engagement::ResolvedScenario;
use crate::error::{Error, Result};
use crate::es::EsConfig;
use crate::frames::GeoVector;
use crate::net::Architecture;
use crate::ppo::{PPOConfig, SweepGrid};
use crate::reward::RewardConfig;
use crate::scenario::ScenarioConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Write a training checkpoint every N episodes (0 = final only).
    pub checkpoint_every: u64,
    pub scenario: ScenarioConfig<f64>,
    pub reward: RewardConfig<f64>,
    pub ppo: PPOConfig,
    /// Actor architecture used by `train` and `refine`.
    pub architecture: Architecture,
    pub es: EsConfig,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            checkpoint_every: 0,
            scenario: ScenarioConfig::default(),
            reward: RewardConfig::default(),
            ppo: PPOConfig::default(),
            architecture: Architecture::actor(&[256, 256, 256]).unwrap(),
            es: EsConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.reward.validate()?;
        self.ppo.validate()?;
        self.es.validate()?;
        if self.architecture.input_width() != 8 || self.architecture.output_width() != 2 {
            return Err(Error::config(
                "ppo.architecture",
                format!(
                    "actor must map 8 inputs to 2 outputs, got {}",
                    self.architecture.label()
                ),
            ));
        }
        if self.sweep.architectures.is_empty()
            || self.sweep.ks.is_empty()
            || self.sweep.base_lrs.is_empty()
        {
            return Err(Error::config("sweep.architectures", "sweep grid is empty"));
        }
        Ok(())
    }

    /// Resolve the scenario once, for reuse across episodes.
    pub fn resolved_scenario(&self) -> Result<ResolvedScenario<f64>> {
        ResolvedScenario::resolve(&self.scenario)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| Error::config_at(key, line, format!("cannot parse `{raw}`: {e}")))
}

fn parse_vector(key: &str, line: usize, raw: &str) -> Result<Option<GeoVector<f64>>> {
    let raw = raw.trim();
    if raw == "auto" {
        return Ok(None);
    }
    let parts: Vec<&str> = raw.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::config_at(
            key,
            line,
            format!("expected `auto` or three components, got `{raw}`"),
        ));
    }
    Ok(Some(GeoVector::new(
        parse_num(key, line, parts[0])?,
        parse_num(key, line, parts[1])?,
        parse_num(key, line, parts[2])?,
    )))
}

fn vector_to_string(v: &Option<GeoVector<f64>>) -> String {
    match v {
        None => "auto".to_string(),
        Some(v) => format!("{} {} {}", v.x, v.y, v.z),
    }
}

fn parse_arch(key: &str, line: usize, raw: &str) -> Result<Architecture> {
    Architecture::parse_label(raw.trim()).map_err(|e| Error::config_at(key, line, e.to_string()))
}

/// Parse configuration text. An empty file yields every documented
/// default; unknown sections or keys are rejected with their line
/// number.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    let mut key_lines: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::config_at("<section>", line_no, format!("malformed section `{line}`"))
            })?;
            section = name.trim().to_string();
            match section.as_str() {
                "run" | "scenario" | "reward" | "ppo" | "es" | "sweep" => {}
                other => {
                    return Err(Error::config_at(
                        other,
                        line_no,
                        "unknown section (expected run, scenario, reward, ppo, es, sweep)",
                    ))
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config_at(
                format!("{section}.<line>"),
                line_no,
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        let key = key.trim();
        let value = value.trim();
        let path = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        key_lines.insert(path.clone(), line_no);
        set_key(&mut cfg, &section, key, &path, line_no, value)?;
    }

    cfg.validate().map_err(|e| match e {
        // Attach the source line to invariant violations when the key
        // was explicitly set.
        Error::Config {
            key,
            line: None,
            message,
        } => {
            let line = key_lines.get(&key).copied();
            Error::Config { key, line, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

fn set_key(
    cfg: &mut RunConfig,
    section: &str,
    key: &str,
    path: &str,
    line: usize,
    value: &str,
) -> Result<()> {
    let unknown = || Err(Error::config_at(path, line, "unknown key"));
    match section {
        "run" => match key {
            "seed" => cfg.seed = parse_num(path, line, value)?,
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            "checkpoint_every" => cfg.checkpoint_every = parse_num(path, line, value)?,
            _ => return unknown(),
        },
        "scenario" => {
            let s = &mut cfg.scenario;
            match key {
                "dt" => s.dt = parse_num(path, line, value)?,
                "max_steps" => s.max_steps = parse_num(path, line, value)?,
                "capture_radius" => s.capture_radius = parse_num(path, line, value)?,
                "initial_distance" => s.initial_distance = parse_num(path, line, value)?,
                "altitude" => s.altitude = parse_num(path, line, value)?,
                "efv_speed" => s.efv_speed = parse_num(path, line, value)?,
                "efv_axial_accel" => s.efv_axial_accel = parse_num(path, line, value)?,
                "efv_alpha0" => s.efv_alpha0 = parse_num(path, line, value)?,
                "efv_heel0" => s.efv_heel0 = parse_num(path, line, value)?,
                "pfv_speed" => s.pfv_speed = parse_num(path, line, value)?,
                "pfv_axial_accel" => s.pfv_axial_accel = parse_num(path, line, value)?,
                "pfv_aoa0" => s.pfv_aoa0 = parse_num(path, line, value)?,
                "pfv_sideslip0" => s.pfv_sideslip0 = parse_num(path, line, value)?,
                "alpha_step_limit" => s.alpha_step_limit = parse_num(path, line, value)?,
                "gamma_step_limit" => s.gamma_step_limit = parse_num(path, line, value)?,
                "lateral_gain" => s.lateral_gain = parse_num(path, line, value)?,
                "drag_penalty" => s.drag_penalty = parse_num(path, line, value)?,
                "pn_k1" => s.pn.k1 = parse_num(path, line, value)?,
                "pn_k2" => s.pn.k2 = parse_num(path, line, value)?,
                "aim_iterations" => s.aim_iterations = parse_num(path, line, value)?,
                "virtual_stride" => s.virtual_stride = parse_num(path, line, value)?,
                "virtual_horizon" => s.virtual_horizon = parse_num(path, line, value)?,
                "init_jitter_pos" => s.init_jitter_pos = parse_num(path, line, value)?,
                "init_jitter_vel_deg" => s.init_jitter_vel_deg = parse_num(path, line, value)?,
                "efv_position" => s.efv_position = parse_vector(path, line, value)?,
                "efv_velocity" => s.efv_velocity = parse_vector(path, line, value)?,
                "pfv_position" => s.pfv_position = parse_vector(path, line, value)?,
                "pfv_velocity" => s.pfv_velocity = parse_vector(path, line, value)?,
                _ => return unknown(),
            }
        }
        "reward" => {
            let r = &mut cfg.reward;
            match key {
                "kv_on" => r.kv_on = parse_num(path, line, value)?,
                "safe_distance" => r.safe_distance = parse_num(path, line, value)?,
                "pe_weight" => r.pe_weight = parse_num(path, line, value)?,
                "pv_weight" => r.pv_weight = parse_num(path, line, value)?,
                "v_ref" => r.v_ref = parse_num(path, line, value)?,
                _ => return unknown(),
            }
        }
        "ppo" => {
            let p = &mut cfg.ppo;
            match key {
                "architecture" => cfg.architecture = parse_arch(path, line, value)?,
                "total_steps" => p.total_steps = parse_num(path, line, value)?,
                "base_lr" => p.base_lr = parse_num(path, line, value)?,
                "lr_exponent" => p.lr_exponent = parse_num(path, line, value)?,
                "clip_ratio" => p.clip_ratio = parse_num(path, line, value)?,
                "discount" => p.discount = parse_num(path, line, value)?,
                "gae_lambda" => p.gae_lambda = parse_num(path, line, value)?,
                "rollout_length" => p.rollout_length = parse_num(path, line, value)?,
                "minibatch_size" => p.minibatch_size = parse_num(path, line, value)?,
                "epochs_per_update" => p.epochs_per_update = parse_num(path, line, value)?,
                "value_loss_weight" => p.value_loss_weight = parse_num(path, line, value)?,
                "entropy_weight" => p.entropy_weight = parse_num(path, line, value)?,
                "max_grad_norm" => p.max_grad_norm = parse_num(path, line, value)?,
                "virtual_cadence" => p.virtual_cadence = parse_num(path, line, value)?,
                _ => return unknown(),
            }
        }
        "es" => {
            let e = &mut cfg.es;
            match key {
                "g_max" => e.g_max = parse_num(path, line, value)?,
                "s_max" => e.s_max = parse_num(path, line, value)?,
                "mu" => e.mu = parse_num(path, line, value)?,
                "sigma" => e.sigma = parse_num(path, line, value)?,
                "safe_distance" => e.safe_distance = parse_num(path, line, value)?,
                "rng_seed" => e.rng_seed = parse_num(path, line, value)?,
                _ => return unknown(),
            }
        }
        "sweep" => match key {
            "architectures" => {
                let mut archs = Vec::new();
                for label in value.split_whitespace() {
                    archs.push(parse_arch(path, line, label)?);
                }
                cfg.sweep.architectures = archs;
            }
            "ks" => {
                let mut ks = Vec::new();
                for t in value.split_whitespace() {
                    ks.push(parse_num(path, line, t)?);
                }
                cfg.sweep.ks = ks;
            }
            "base_lrs" => {
                let mut lbs = Vec::new();
                for t in value.split_whitespace() {
                    lbs.push(parse_num(path, line, t)?);
                }
                cfg.sweep.base_lrs = lbs;
            }
            _ => return unknown(),
        },
        "" => return Err(Error::config_at(path, line, "key outside of any [section]")),
        _ => return unknown(),
    }
    Ok(())
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        key: path.display().to_string(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse_config_str(&text)
}

/// Canonical full listing of every key at its effective value. Parsing
/// the echo reproduces the same configuration, and echoing again is
/// byte-identical.
pub fn echo_config(cfg: &RunConfig) -> String {
    let s = &cfg.scenario;
    let r = &cfg.reward;
    let p = &cfg.ppo;
    let e = &cfg.es;
    let sweep_archs = cfg
        .sweep
        .architectures
        .iter()
        .map(|a| a.label())
        .collect::<Vec<_>>()
        .join(" ");
    let sweep_ks = cfg
        .sweep
        .ks
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let sweep_lbs = cfg
        .sweep
        .base_lrs
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "# efvlab run configuration (effective values)\n\
         \n\
         [run]\n\
         seed = {seed}\n\
         output_dir = {out}\n\
         checkpoint_every = {ckpt}\n\
         \n\
         [scenario]\n\
         dt = {dt}\n\
         max_steps = {max_steps}\n\
         capture_radius = {capture_radius}\n\
         initial_distance = {initial_distance}\n\
         altitude = {altitude}\n\
         efv_speed = {efv_speed}\n\
         efv_axial_accel = {efv_axial_accel}\n\
         efv_alpha0 = {efv_alpha0}\n\
         efv_heel0 = {efv_heel0}\n\
         pfv_speed = {pfv_speed}\n\
         pfv_axial_accel = {pfv_axial_accel}\n\
         pfv_aoa0 = {pfv_aoa0}\n\
         pfv_sideslip0 = {pfv_sideslip0}\n\
         alpha_step_limit = {alpha_step_limit}\n\
         gamma_step_limit = {gamma_step_limit}\n\
         lateral_gain = {lateral_gain}\n\
         drag_penalty = {drag_penalty}\n\
         pn_k1 = {pn_k1}\n\
         pn_k2 = {pn_k2}\n\
         aim_iterations = {aim_iterations}\n\
         virtual_stride = {virtual_stride}\n\
         virtual_horizon = {virtual_horizon}\n\
         init_jitter_pos = {init_jitter_pos}\n\
         init_jitter_vel_deg = {init_jitter_vel_deg}\n\
         efv_position = {efv_position}\n\
         efv_velocity = {efv_velocity}\n\
         pfv_position = {pfv_position}\n\
         pfv_velocity = {pfv_velocity}\n\
         \n\
         [reward]\n\
         kv_on = {kv_on}\n\
         safe_distance = {safe_distance}\n\
         pe_weight = {pe_weight}\n\
         pv_weight = {pv_weight}\n\
         v_ref = {v_ref}\n\
         \n\
         [ppo]\n\
         architecture = {arch}\n\
         total_steps = {total_steps}\n\
         base_lr = {base_lr}\n\
         lr_exponent = {lr_exponent}\n\
         clip_ratio = {clip_ratio}\n\
         discount = {discount}\n\
         gae_lambda = {gae_lambda}\n\
         rollout_length = {rollout_length}\n\
         minibatch_size = {minibatch_size}\n\
         epochs_per_update = {epochs_per_update}\n\
         value_loss_weight = {value_loss_weight}\n\
         entropy_weight = {entropy_weight}\n\
         max_grad_norm = {max_grad_norm}\n\
         virtual_cadence = {virtual_cadence}\n\
         \n\
         [es]\n\
         g_max = {g_max}\n\
         s_max = {s_max}\n\
         mu = {mu}\n\
         sigma = {sigma}\n\
         safe_distance = {es_safe_distance}\n\
         rng_seed = {rng_seed}\n\
         \n\
         [sweep]\n\
         architectures = {sweep_archs}\n\
         ks = {sweep_ks}\n\
         base_lrs = {sweep_lbs}\n",
        seed = cfg.seed,
        out = cfg.output_dir.display(),
        ckpt = cfg.checkpoint_every,
        dt = s.dt,
        max_steps = s.max_steps,
        capture_radius = s.capture_radius,
        initial_distance = s.initial_distance,
        altitude = s.altitude,
        efv_speed = s.efv_speed,
        efv_axial_accel = s.efv_axial_accel,
        efv_alpha0 = s.efv_alpha0,
        efv_heel0 = s.efv_heel0,
        pfv_speed = s.pfv_speed,
        pfv_axial_accel = s.pfv_axial_accel,
        pfv_aoa0 = s.pfv_aoa0,
        pfv_sideslip0 = s.pfv_sideslip0,
        alpha_step_limit = s.alpha_step_limit,
        gamma_step_limit = s.gamma_step_limit,
        lateral_gain = s.lateral_gain,
        drag_penalty = s.drag_penalty,
        pn_k1 = s.pn.k1,
        pn_k2 = s.pn.k2,
        aim_iterations = s.aim_iterations,
        virtual_stride = s.virtual_stride,
        virtual_horizon = s.virtual_horizon,
        init_jitter_pos = s.init_jitter_pos,
        init_jitter_vel_deg = s.init_jitter_vel_deg,
        efv_position = vector_to_string(&s.efv_position),
        efv_velocity = vector_to_string(&s.efv_velocity),
        pfv_position = vector_to_string(&s.pfv_position),
        pfv_velocity = vector_to_string(&s.pfv_velocity),
        kv_on = r.kv_on,
        safe_distance = r.safe_distance,
        pe_weight = r.pe_weight,
        pv_weight = r.pv_weight,
        v_ref = r.v_ref,
        arch = cfg.architecture.label(),
        total_steps = p.total_steps,
        base_lr = p.base_lr,
        lr_exponent = p.lr_exponent,
        clip_ratio = p.clip_ratio,
        discount = p.discount,
        gae_lambda = p.gae_lambda,
        rollout_length = p.rollout_length,
        minibatch_size = p.minibatch_size,
        epochs_per_update = p.epochs_per_update,
        value_loss_weight = p.value_loss_weight,
        entropy_weight = p.entropy_weight,
        max_grad_norm = p.max_grad_norm,
        virtual_cadence = p.virtual_cadence,
        g_max = e.g_max,
        s_max = e.s_max,
        mu = e.mu,
        sigma = e.sigma,
        es_safe_distance = e.safe_distance,
        rng_seed = e.rng_seed,
        sweep_archs = sweep_archs,
        sweep_ks = sweep_ks,
        sweep_lbs = sweep_lbs,
    )
}
