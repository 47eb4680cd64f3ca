//! Deterministic network-defence game and hierarchical RL defender.
//!
//! The crate is split along the natural seams of the problem:
//!
//! - [`netsim`]: the turn-based blue/red game over a 13-host, 3-subnet
//!   network, with stochastic action outcomes and the defender's 52-bit
//!   observation encoding.
//! - [`adversaries`]: the scripted red agents (B_line, Meander, Sleep).
//! - [`nn`], [`ppo`], [`icm`]: a small self-contained actor-critic stack
//!   with manual backpropagation, PPO with a clipped surrogate objective,
//!   GAE, and an intrinsic curiosity module.
//! - [`hierarchy`]: per-adversary sub-agent training and the controller
//!   that delegates to one frozen specialist each timestep.
//! - [`eval`]: episode runner, the 9-scenario score grid, and the
//!   specialist/hierarchical/baseline ablation.
//!
//! Everything here is `no_std` + `alloc`; all IO, file formats and the
//! CLI live in the companion `netdef` crate. All randomness flows from
//! per-instance seeded ChaCha generators, so identical seeds produce
//! bit-identical trajectories.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversaries;
pub mod eval;
pub mod hierarchy;
pub mod icm;
pub mod netsim;
pub mod nn;
pub mod ppo;

pub use netsim::{
    AccessLevel, BlueAction, HostId, HostRole, NetworkState, Observation, RedAction, SimConfig,
    StepEvents, Subnet,
};
