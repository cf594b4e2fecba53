//! Dynamic job-shop scheduling on a colored-timed Petri net.
//!
//! The crate is organized bottom-up:
//!
//! * [`petri`] is a small generic colored-timed Petri net (places, transitions,
//!   FIFO token queues, guards, forced transition states).
//! * [`env`] builds the job-shop net for an instance and drives the decision
//!   loop, including breakdown pauses and dynamic operation releases.
//! * [`disruptions`] materializes seeded breakdown and arrival scenarios.
//! * [`heuristics`] holds the twelve dispatching rules.
//! * [`policy`] and [`ppo`] implement the maskable actor-critic agent.
//! * [`bench`] ties everything together into the seeded comparison protocol.
//!
//! Neural-network code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common concrete choices.

pub mod bench;
pub mod disruptions;
pub mod env;
pub mod heuristics;
pub mod petri;
pub mod policy;
pub mod ppo;
mod scalar;

pub use scalar::Scalar;

pub use disruptions::{ScenarioConfig, ScenarioTrace};
pub use env::{JobShopEnv, JsspInstance};
pub use heuristics::RuleId;

/// Double-precision policy parameters (used for checkpoints and gradient checks).
pub type PolicyParams64 = policy::PolicyParams<f64>;
/// Single-precision policy parameters.
pub type PolicyParams32 = policy::PolicyParams<f32>;
pub type MaskedDistribution64 = policy::MaskedDistribution<f64>;
pub type RolloutBatch64 = ppo::RolloutBatch<f64>;
pub type TrainOutcome64 = ppo::TrainOutcome<f64>;
pub type TrainOutcome32 = ppo::TrainOutcome<f32>;
