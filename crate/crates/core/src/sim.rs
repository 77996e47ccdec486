//! Slot-level Monte Carlo of the protocol.
//!
//! Every slot Alice and Bob pick a phase bit each, the pulses interfere at
//! Charlie, each threshold detector clicks independently, and Charlie turns
//! the recorded detector and the slot parity into a bit. The tallies are an
//! empirical check on [`crate::model::analytic_point`].
//!
//! Slots are processed in fixed-size chunks. Chunk `i` draws from ChaCha8
//! keyed by the run seed with stream `i`, so a run is reproducible no matter
//! how many threads execute it.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_range, Error, Result};
use crate::finite_key::gamma_upper;
use crate::model::{
    analytic_point, click_probability, port_intensities, ChannelParams, GainError, Phase,
    SourceParams,
};

pub const DEFAULT_CHUNK_SIZE: u64 = 1 << 16;
pub const DEFAULT_SIGMA_THRESHOLD: f64 = 4.0;

/// Stream reserved for choosing the test subset of a run.
const TEST_SUBSET_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub source: SourceParams,
    pub n_slots: u64,
    /// Share of detected slots disclosed for QBER estimation.
    pub test_fraction: f64,
    pub rng_seed: u64,
    pub chunk_size: u64,
}

impl SimConfig {
    pub fn new(channel: ChannelParams, source: SourceParams, n_slots: u64, rng_seed: u64) -> Self {
        Self {
            channel,
            source,
            n_slots,
            test_fraction: 0.1,
            rng_seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.source.validate()?;
        if self.n_slots == 0 {
            return Err(Error::Config("n_slots must be at least 1".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Domain {
                name: "test_fraction",
                value: self.test_fraction,
                expected: "0 < test_fraction < 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    D1,
    D2,
}

impl Detector {
    fn other(self) -> Self {
        match self {
            Detector::D1 => Detector::D2,
            Detector::D2 => Detector::D1,
        }
    }
}

/// Which detectors fired in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClickKind {
    LoneD1,
    LoneD2,
    Double,
}

/// One recorded detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub slot: u64,
    pub alice: bool,
    pub bob: bool,
    pub kind: ClickKind,
    /// A lone click was moved to the other detector by misalignment.
    pub misaligned: bool,
    pub recorded: Detector,
    pub charlie: bool,
}

impl Detection {
    pub fn is_error(&self) -> bool {
        self.charlie != (self.alice ^ self.bob)
    }
}

/// Charlie's bit for a click on `det` in slot `slot`.
///
/// Even slots: D1 → 0, D2 → 1. Odd slots swap the assignment, because the
/// delay interferometer swaps which port is constructive for phase 0.
pub fn charlie_bit(det: Detector, slot: u64) -> bool {
    (det == Detector::D2) ^ (slot & 1 == 1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotTally {
    pub n_slots: u64,
    pub n_click: u64,
    pub n_lone_d1: u64,
    pub n_lone_d2: u64,
    pub n_double: u64,
    pub n_error: u64,
    pub n_test: u64,
    pub n_test_error: u64,
}

impl SlotTally {
    fn add(&mut self, d: &Detection) {
        self.n_click += 1;
        match d.kind {
            ClickKind::LoneD1 => self.n_lone_d1 += 1,
            ClickKind::LoneD2 => self.n_lone_d2 += 1,
            ClickKind::Double => self.n_double += 1,
        }
        if d.is_error() {
            self.n_error += 1;
        }
    }

    fn merge(mut self, other: &SlotTally) -> Self {
        self.n_slots += other.n_slots;
        self.n_click += other.n_click;
        self.n_lone_d1 += other.n_lone_d1;
        self.n_lone_d2 += other.n_lone_d2;
        self.n_double += other.n_double;
        self.n_error += other.n_error;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub tally: SlotTally,
    pub q_emp: f64,
    /// Error rate over all detections; ½ when nothing was detected.
    pub e_emp: f64,
    /// Error rate over the disclosed test subset; ½ when the subset is empty.
    pub e_sample: f64,
    pub stderr_q: f64,
    pub stderr_e: f64,
}

/// Full output of a run, including every detection in slot order.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub result: SimResult,
    pub detections: Vec<Detection>,
}

impl SimRun {
    pub fn alice_bits(&self) -> Vec<bool> {
        self.detections.iter().map(|d| d.alice).collect()
    }

    pub fn bob_bits(&self) -> Vec<bool> {
        self.detections.iter().map(|d| d.bob).collect()
    }

    pub fn charlie_bits(&self) -> Vec<bool> {
        self.detections.iter().map(|d| d.charlie).collect()
    }

    pub fn detected_slots(&self) -> Vec<u64> {
        self.detections.iter().map(|d| d.slot).collect()
    }
}

/// Per-slot detection physics shared by the plain and the conditioned samplers.
#[derive(Debug, Clone, Copy)]
struct SlotModel {
    /// Click probability of the port the light should exit.
    q_bright: f64,
    /// Click probability of the other port.
    q_dim: f64,
    e_d: f64,
    /// Cumulative probabilities of (bright only, bright only + dim only)
    /// given at least one click.
    cond_bright: f64,
    cond_dim: f64,
}

impl SlotModel {
    fn new(ch: &ChannelParams, src: &SourceParams) -> Result<Self> {
        ch.validate()?;
        let ports = port_intensities(src, ch.eta_a()?, ch.eta_b()?, Phase::Zero)?;
        let q_bright = click_probability(ports.d1, ch.p_d);
        let q_dim = click_probability(ports.d2, ch.p_d);
        let bright_only = q_bright * (1.0 - q_dim);
        let dim_only = q_dim * (1.0 - q_bright);
        let any = bright_only + dim_only + q_bright * q_dim;
        Ok(Self {
            q_bright,
            q_dim,
            e_d: ch.e_d,
            cond_bright: bright_only / any,
            cond_dim: (bright_only + dim_only) / any,
        })
    }

    /// Simulates slot `slot`; `None` when neither detector fires.
    fn slot<R: Rng>(&self, rng: &mut R, slot: u64) -> Option<Detection> {
        let bits: u32 = rng.random();
        let (alice, bob) = (bits & 1 == 1, bits & 2 == 2);
        let bright = self.bright_port(alice, bob, slot);
        let c_bright = rng.random::<f64>() < self.q_bright;
        let c_dim = rng.random::<f64>() < self.q_dim;
        let clicks = match (c_bright, c_dim) {
            (false, false) => return None,
            (true, false) => Clicks::Bright,
            (false, true) => Clicks::Dim,
            (true, true) => Clicks::Both,
        };
        Some(self.record(rng, slot, alice, bob, bright, clicks))
    }

    /// Simulates a slot conditioned on at least one click.
    fn detected_slot<R: Rng>(&self, rng: &mut R, slot: u64) -> Detection {
        let bits: u32 = rng.random();
        let (alice, bob) = (bits & 1 == 1, bits & 2 == 2);
        let bright = self.bright_port(alice, bob, slot);
        let u: f64 = rng.random();
        let clicks = if u < self.cond_bright {
            Clicks::Bright
        } else if u < self.cond_dim {
            Clicks::Dim
        } else {
            Clicks::Both
        };
        self.record(rng, slot, alice, bob, bright, clicks)
    }

    fn bright_port(&self, alice: bool, bob: bool, slot: u64) -> Detector {
        let theta = Phase::from_bits(alice, bob);
        let effective = if slot & 1 == 1 {
            theta.flipped()
        } else {
            theta
        };
        match effective {
            Phase::Zero => Detector::D1,
            Phase::Pi => Detector::D2,
        }
    }

    fn record<R: Rng>(
        &self,
        rng: &mut R,
        slot: u64,
        alice: bool,
        bob: bool,
        bright: Detector,
        clicks: Clicks,
    ) -> Detection {
        let (physical, kind) = match clicks {
            Clicks::Bright => (bright, lone(bright)),
            Clicks::Dim => (bright.other(), lone(bright.other())),
            Clicks::Both => {
                let pick = if rng.random::<bool>() {
                    Detector::D1
                } else {
                    Detector::D2
                };
                (pick, ClickKind::Double)
            }
        };
        let misaligned =
            kind != ClickKind::Double && self.e_d > 0.0 && rng.random::<f64>() < self.e_d;
        let recorded = if misaligned {
            physical.other()
        } else {
            physical
        };
        Detection {
            slot,
            alice,
            bob,
            kind,
            misaligned,
            recorded,
            charlie: charlie_bit(recorded, slot),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Clicks {
    Bright,
    Dim,
    Both,
}

fn lone(det: Detector) -> ClickKind {
    match det {
        Detector::D1 => ClickKind::LoneD1,
        Detector::D2 => ClickKind::LoneD2,
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        f64::INFINITY
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Runs the simulation and keeps every detection.
pub fn run_detailed(cfg: &SimConfig) -> Result<SimRun> {
    cfg.validate()?;
    let model = SlotModel::new(&cfg.channel, &cfg.source)?;
    let n_chunks = cfg.n_slots.div_ceil(cfg.chunk_size);

    let chunks: Vec<(SlotTally, Vec<Detection>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(cfg.rng_seed, chunk);
            let start = chunk * cfg.chunk_size;
            let end = (start + cfg.chunk_size).min(cfg.n_slots);
            let mut tally = SlotTally {
                n_slots: end - start,
                ..SlotTally::default()
            };
            let mut found = Vec::new();
            for slot in start..end {
                if let Some(d) = model.slot(&mut rng, slot) {
                    tally.add(&d);
                    found.push(d);
                }
            }
            (tally, found)
        })
        .collect();

    let mut tally = SlotTally::default();
    let mut detections = Vec::with_capacity(chunks.iter().map(|c| c.1.len()).sum());
    for (t, d) in &chunks {
        tally = tally.merge(t);
        detections.extend_from_slice(d);
    }

    let n_test = (cfg.test_fraction * tally.n_click as f64).round() as usize;
    let mut subset_rng = stream_rng(cfg.rng_seed, TEST_SUBSET_STREAM);
    let test = index::sample(&mut subset_rng, detections.len(), n_test);
    tally.n_test = n_test as u64;
    tally.n_test_error = test.iter().filter(|&i| detections[i].is_error()).count() as u64;

    let q_emp = tally.n_click as f64 / tally.n_slots as f64;
    let e_emp = ratio_or_background(tally.n_error, tally.n_click);
    let result = SimResult {
        tally,
        q_emp,
        e_emp,
        e_sample: ratio_or_background(tally.n_test_error, tally.n_test),
        stderr_q: binomial_stderr(q_emp, tally.n_slots),
        stderr_e: binomial_stderr(e_emp, tally.n_click),
    };
    Ok(SimRun { result, detections })
}

fn ratio_or_background(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.5
    } else {
        num as f64 / den as f64
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult> {
    run_detailed(cfg).map(|run| run.result)
}

/// Counts detected slots whose Charlie bit is not the XOR of the sender bits.
pub fn sift_and_xor_check(
    alice: &[bool],
    bob: &[bool],
    charlie: &[bool],
    detected_slots: &[u64],
) -> Result<usize> {
    for (what, len) in [
        ("bob vs alice", bob.len()),
        ("charlie vs alice", charlie.len()),
        ("detected slots vs alice", detected_slots.len()),
    ] {
        if len != alice.len() {
            return Err(Error::LengthMismatch {
                what,
                left: alice.len(),
                right: len,
            });
        }
    }
    Ok(alice
        .iter()
        .zip(bob)
        .zip(charlie)
        .filter(|((&a, &b), &c)| c != (a ^ b))
        .count())
}

/// Simulation vs closed-form comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub analytic: GainError,
    pub sim: SimResult,
    pub dev_q: f64,
    pub dev_e: f64,
    /// Binomial σ at the analytic values.
    pub sigma_q: f64,
    pub sigma_e: f64,
    pub z_q: f64,
    pub z_e: f64,
    pub threshold: f64,
    pub pass: bool,
    /// The confidence interval at `threshold` σ is wider than half the
    /// analytic value; the run is too short to say much.
    pub wide_interval: bool,
}

pub fn empirical_vs_analytic(cfg: &SimConfig, sigma_threshold: f64) -> Result<ValidationReport> {
    let sim = run_simulation(cfg)?;
    let analytic = analytic_point(&cfg.channel, &cfg.source)?;
    let sigma_q = binomial_stderr(analytic.q_mu, sim.tally.n_slots);
    let sigma_e = binomial_stderr(analytic.e_mu, sim.tally.n_click);
    let dev_q = sim.q_emp - analytic.q_mu;
    let dev_e = sim.e_emp - analytic.e_mu;
    let z = |dev: f64, sigma: f64| {
        if sigma.is_finite() && sigma > 0.0 {
            dev / sigma
        } else if dev == 0.0 || !sigma.is_finite() {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let z_q = z(dev_q, sigma_q);
    let z_e = z(dev_e, sigma_e);
    let wide_interval = !(sigma_threshold * sigma_q <= 0.5 * analytic.q_mu
        && sigma_threshold * sigma_e <= 0.5 * analytic.e_mu.max(1e-3));
    Ok(ValidationReport {
        analytic,
        sim,
        dev_q,
        dev_e,
        sigma_q,
        sigma_e,
        z_q,
        z_e,
        threshold: sigma_threshold,
        pass: z_q.abs() <= sigma_threshold && z_e.abs() <= sigma_threshold,
        wide_interval,
    })
}

/// Parameters of the repeated test-sampling experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    /// Detected bits per repeat.
    pub n_detected: usize,
    /// Of which disclosed as test bits.
    pub k_test: usize,
    pub eps_rs: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageReport {
    pub repeats: usize,
    /// Repeats where the untested error rate exceeded the bound.
    pub exceedances: usize,
    /// Repeats where the bound could not be evaluated.
    pub inapplicable: usize,
    /// `exceedances / repeats`.
    pub frequency: f64,
    pub mean_sample_error: f64,
    pub mean_remainder_error: f64,
    pub mean_bound: f64,
}

/// Checks empirically that `e_sample + gamma_upper(n - k, k, e_sample, eps_rs)`
/// bounds the error rate of the untested bits.
///
/// Each repeat draws `n_detected` detections of the configured channel (slots
/// conditioned on at least one click, keyed by stream `repeat`), discloses a
/// uniformly chosen `k_test` of them, and compares.
pub fn qber_sampling_experiment(cfg: &SimConfig, plan: &SamplingPlan) -> Result<CoverageReport> {
    cfg.validate()?;
    if plan.repeats == 0 || plan.n_detected == 0 {
        return Err(Error::Config(
            "repeats and n_detected must be at least 1".into(),
        ));
    }
    if plan.k_test == 0 || plan.k_test > plan.n_detected {
        return Err(Error::Config(format!(
            "k_test must lie in [1, {}], got {}",
            plan.n_detected, plan.k_test
        )));
    }
    check_range(
        "eps_rs",
        plan.eps_rs,
        f64::MIN_POSITIVE,
        1.0 - f64::EPSILON,
        "0 < eps_rs < 1",
    )?;
    let model = SlotModel::new(&cfg.channel, &cfg.source)?;
    let n = plan.n_detected;
    let k = plan.k_test;

    #[derive(Default, Clone, Copy)]
    struct Outcome {
        exceeded: bool,
        inapplicable: bool,
        e_sample: f64,
        e_rem: f64,
        bound: f64,
    }

    let outcomes: Vec<Outcome> = (0..plan.repeats as u64)
        .into_par_iter()
        .map(|repeat| {
            let mut rng = stream_rng(cfg.rng_seed, repeat);
            let errors: Vec<bool> = (0..n as u64)
                .map(|slot| model.detected_slot(&mut rng, slot).is_error())
                .collect();
            let total_errors = errors.iter().filter(|&&e| e).count();
            let test_errors = index::sample(&mut rng, n, k)
                .iter()
                .filter(|&i| errors[i])
                .count();
            let e_sample = test_errors as f64 / k as f64;
            if k == n {
                return Outcome {
                    e_sample,
                    e_rem: 0.0,
                    bound: e_sample,
                    ..Outcome::default()
                };
            }
            let e_rem = (total_errors - test_errors) as f64 / (n - k) as f64;
            match gamma_upper((n - k) as f64, k as f64, e_sample, plan.eps_rs) {
                Ok(gamma) => Outcome {
                    exceeded: e_rem > e_sample + gamma,
                    inapplicable: false,
                    e_sample,
                    e_rem,
                    bound: e_sample + gamma,
                },
                Err(_) => Outcome {
                    exceeded: false,
                    inapplicable: true,
                    e_sample,
                    e_rem,
                    bound: f64::NAN,
                },
            }
        })
        .collect();

    let repeats = outcomes.len();
    let exceedances = outcomes.iter().filter(|o| o.exceeded).count();
    let inapplicable = outcomes.iter().filter(|o| o.inapplicable).count();
    let applicable: Vec<&Outcome> = outcomes.iter().filter(|o| !o.inapplicable).collect();
    let mean = |f: &dyn Fn(&Outcome) -> f64, set: &[&Outcome]| {
        if set.is_empty() {
            f64::NAN
        } else {
            set.iter().map(|o| f(o)).sum::<f64>() / set.len() as f64
        }
    };
    let all: Vec<&Outcome> = outcomes.iter().collect();
    Ok(CoverageReport {
        repeats,
        exceedances,
        inapplicable,
        frequency: exceedances as f64 / repeats as f64,
        mean_sample_error: mean(&|o| o.e_sample, &all),
        mean_remainder_error: mean(&|o| o.e_rem, &all),
        mean_bound: mean(&|o| o.bound, &applicable),
    })
}
