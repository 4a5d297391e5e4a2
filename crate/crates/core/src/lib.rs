//! Core simulation and learning stack for warehouse incident response.
//!
//! Everything in this crate is pure computation over owned values: the
//! grid world, incident dynamics, constraint checking and the safety
//! filter, the constrained multi-agent environment, a small f64 neural
//! kernel, the Safe-MADDPG learners, the constraint extractor, and the
//! evaluation metrics. File formats, logging, and the CLI live in the
//! companion `warden-cli` crate.
//!
//! The crate is `no_std` (with `alloc`) so the simulation core stays free
//! of IO and host dependencies; all float math goes through `libm`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod constraint;
pub mod env;
pub mod extractor;
pub mod graph;
pub mod incident;
pub mod learn;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use env::{Action, CmdpEnv, EnvState, MoveDir, Observation, RespondKind, RewardWeights};
pub use graph::{OperationGraph, PhysicalGraph, Scenario, Task};
pub use rng::DetRng;
