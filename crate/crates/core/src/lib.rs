//! Pursuit-evasion guidance laboratory.
//!
//! An escape flight vehicle (EFV) flies against a proportional-navigation
//! pursuit flight vehicle (PFV). The EFV's guidance policy — per-step
//! changes of its composite angle of attack and angle of heel — is
//! trained with PPO under a shaped reward and then refined with a
//! Gaussian-perturbation evolution strategy, maximizing residual velocity
//! subject to a 30 m evasion-distance constraint.
//!
//! The simulation and network math are generic over the scalar type (see
//! [`scalar::Real`]); the training pipeline and CLI run on `f64` via the
//! aliases at the crate root.

pub mod config;
pub mod dynamics;
pub mod engagement;
pub mod error;
pub mod es;
pub mod frames;
pub mod guidance;
pub mod net;
pub mod ppo;
pub mod reward;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;

/// Geocentric vector at the default `f64` precision.
pub type Vec3 = frames::GeoVector<f64>;
/// LOS angle pair at the default precision.
pub type Los = frames::LosAngles<f64>;
/// Vehicle translational state at the default precision.
pub type State = dynamics::VehicleState<f64>;
/// Scenario description at the default precision.
pub type Scenario = scenario::ScenarioConfig<f64>;
/// Engagement world at the default precision.
pub type World = engagement::World<f64>;
/// Episode outcome at the default precision.
pub type Outcome = engagement::EngagementOutcome<f64>;
/// Actor parameters at the default precision.
pub type Actor = net::PolicyParameters<f64>;
