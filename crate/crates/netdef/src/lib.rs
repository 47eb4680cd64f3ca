//! IO and tooling around `netdef-core`: checkpoint files, run
//! configuration, episode logs, parallel evaluation and the command
//! implementations behind the `netdef` binary.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod episode_log;
pub mod parallel;
