//! Key-rate modelling for twin-field differential-phase-shift quantum secret
//! sharing with independently chosen source intensities.
//!
//! * [`model`]: transmittance, interference, click probabilities, gain and QBER.
//! * [`finite_key`]: sampling bound, failure budget, collision bound, key rate.
//! * [`sim`]: slot-level Monte Carlo used to check the model empirically.
//! * [`optimizer`]: intensity search, distance sweeps, baseline comparison.
//! * [`report`]: the CSV schema all of the above are written in.

// `!(x >= lo)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod finite_key;
pub mod model;
pub mod optimizer;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
pub use finite_key::{
    asymptotic_rate, collision_probability, epsilon_total, evaluate, gamma_serfling, gamma_upper,
    key_rate, leakage_fractions, Leakage, RateBreakdown, RateFlag, SamplingBound, SecurityParams,
    TestBits, COLLISION_BOUND_LIMIT, DEFAULT_EPS, DEFAULT_F_E, DEFAULT_TEST_FRACTION,
};
pub use model::{
    analytic_point, binary_entropy, click_probabilities, gain_and_qber, port_intensities,
    transmittance, ChannelParams, GainError, Phase, PortIntensities, SourceParams, DEFAULT_ALPHA,
    DEFAULT_ETA_D, DEFAULT_E_D, DEFAULT_P_D,
};
pub use optimizer::{
    compare_protocols, distance_grid, optimize_rate, sweep_distance, Comparison, OptimResult,
    OptimizerConfig, Sweep, SweepRow,
};
pub use report::{read_csv, write_csv, CsvRow, CSV_COLUMNS, FLAG_SIMULATED, FLAG_UNEVALUABLE};
pub use sim::{
    charlie_bit, empirical_vs_analytic, qber_sampling_experiment, run_detailed, run_simulation,
    sift_and_xor_check, ClickKind, CoverageReport, Detection, Detector, SamplingPlan, SimConfig,
    SimResult, SimRun, SlotTally, ValidationReport, DEFAULT_CHUNK_SIZE, DEFAULT_SIGMA_THRESHOLD,
};
