//! Scenario files, figure presets and CSV output around [`tfqss_core`].

// `!(x >= lo)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod scenario;

pub use config::{
    parse_config, resolve, serialize, Layer, Mode, Origin, Resolved, ScenarioConfig, KEYS,
};
pub use scenario::{compare_paths, preset, run_scenario, Outcome, PresetRun, PRESETS};
