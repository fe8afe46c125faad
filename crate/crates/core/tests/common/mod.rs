//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use biogrid_core::agents::{Policy, PolicyKind};
use biogrid_core::envs::{registry_config, EnvConfig, EnvId};
use biogrid_core::harness::{derive_seed, policy_rng, Phase, SeedSpec};
use biogrid_core::scoring::ScoreVector;
use biogrid_core::world::{Action, WorldState};

pub fn world(id: EnvId, seed: u64) -> WorldState {
    WorldState::new(Arc::new(registry_config(id)), seed).unwrap()
}

pub fn spec(id: EnvId, index: u64) -> SeedSpec {
    SeedSpec::new(id.name(), Phase::Test, index)
}

/// One recorded transition: the state before the step and what the step produced.
pub struct Frame {
    pub before: WorldState,
    pub actions: Vec<Action>,
    pub scores: Vec<ScoreVector>,
}

/// Steps an episode by hand, keeping every intermediate state.
pub fn simulate(
    config: EnvConfig,
    policy: PolicyKind,
    spec: &SeedSpec,
) -> (Vec<Frame>, WorldState) {
    let config = Arc::new(config);
    let seed = derive_seed(spec);
    let mut state = WorldState::new(Arc::clone(&config), seed).unwrap();
    let mut policies: Vec<Policy> = (0..config.n_agents)
        .map(|i| Policy::new(policy, &config, policy_rng(seed, i)))
        .collect();
    let mut frames = Vec::with_capacity(config.episode_length as usize);
    let mut obs = state.observe_all();
    while !state.is_done() {
        let actions: Vec<Action> = policies
            .iter_mut()
            .zip(&obs)
            .map(|(p, o)| p.act(o))
            .collect();
        let before = state.clone();
        let outcome = state.step(&actions).unwrap();
        obs = outcome.observations;
        frames.push(Frame {
            before,
            actions,
            scores: outcome.scores,
        });
    }
    (frames, state)
}

pub fn simulate_registry(id: EnvId, policy: PolicyKind, index: u64) -> (Vec<Frame>, WorldState) {
    simulate(registry_config(id), policy, &spec(id, index))
}

pub mod oracles;
pub mod remote;
