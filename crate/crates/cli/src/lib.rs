// SPDX-License-Identifier: Apache-2.0

//! Library side of the `fallcascade` command: config loading, commands and
//! report files.

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;

/// Environment variable read when `--out` is not given.
pub const OUT_ENV: &str = "FALLCASCADE_OUT";
pub const DEFAULT_OUT: &str = "fallcascade-out";
