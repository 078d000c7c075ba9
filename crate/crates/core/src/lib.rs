//! Single-intersection traffic-signal-control laboratory.
//!
//! The crate bundles a deterministic microscopic simulator of one 4-way
//! intersection with mixed connected/non-connected fleets, rule-based
//! baseline controllers (Max Pressure, SOTL, fixed-time, random), the
//! partial DTSE state encoder, the total-squared-delay reward, a
//! from-scratch convolutional dueling Q-network with exact backprop, the
//! dueling double DQN training loop, and the evaluation harness used to
//! compare controllers under full and partial detection.

pub mod agent;
pub mod controllers;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod neural;
pub mod reward;
pub mod rng;
pub mod sim;

pub use agent::{epsilon_at, train, PcvMode, TrainConfig, TrainOutcome};
pub use controllers::{Controller, ControllerKind, Decision};
pub use encoder::{encode, state_shape, DtseConfig, PartialDtse};
pub use error::{Error, Result};
pub use harness::{run_episode, EpisodeStats};
pub use neural::{QNetwork, Tensor};
pub use reward::RewardState;
pub use rng::RngStream;
pub use sim::{build_scenario, DemandConfig, Intersection, ScenarioTag, Simulation};
