//! Deterministic multi-agent, multi-objective gridworld benchmarks.
//!
//! Nine environments share one engine ([`world::WorldState`]) configured by
//! [`envs::EnvConfig`]. Each step returns one [`scoring::ScoreVector`] per
//! agent. [`harness`] runs baseline policies over seeded episodes and writes
//! reports, and [`protocol`] exposes the engine to external agents.

pub mod agents;
pub mod envs;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod render;
pub mod rng;
pub mod scoring;
pub mod world;

pub use agents::{Policy, PolicyKind};
pub use envs::{env_registry, registry_config, EnvConfig, EnvId};
pub use error::{Error, Result};
pub use harness::{
    derive_seed, run_benchmark, run_episode, BenchmarkReport, EpisodeRecord, Phase, SeedSpec,
};
pub use scoring::{ScoreDimension, ScoreVector};
pub use world::{Action, Observation, Position, TileKind, WorldState};
