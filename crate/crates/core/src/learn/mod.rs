//! Safe multi-agent actor-critic training: replay buffer, per-agent
//! actors and centralized critics, intrinsic novelty reward, the
//! return-conditioned Q predictor, and the episode loop with its three
//! variants.

mod avft;
mod maddpg;
mod replay;
mod rnd;

pub use avft::{AvftModel, AvftSpec, AvftStep};
pub use maddpg::{
    actor_update_batch, critic_update_batch, global_features, scenario_tag, train, ActorNet,
    AgentNets, CriticNet, EpisodeStats, NullSink, RunSink, TrainConfig, Trainer, Variant,
};
pub use replay::{ReplayBuffer, SampledTransition, StoredStep};
pub use rnd::RndPair;

/// Exploration-augmented reward: external plus scaled intrinsic.
#[inline]
pub fn combined_reward(external: f64, intrinsic: f64, eta: f64) -> f64 {
    external + eta * intrinsic
}

/// Initial return-to-go for an episode.
#[inline]
pub fn rtg_init(target: f64) -> f64 {
    target
}

/// Return-to-go decrement after receiving reward `r`.
#[inline]
pub fn rtg_update(rtg: f64, r: f64) -> f64 {
    rtg - r
}
