//! Runtime around `cants-core`: dataset ingestion and synthetic series, the
//! threaded coordinator/worker search, replay traces, parameter sweeps and
//! the `cants` command line.

pub mod app;
pub mod config;
pub mod dataio;
pub mod search;
pub mod sweep;
pub mod trace;

pub use cants_core as core;
