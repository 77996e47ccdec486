//! Flat key-value scenario files.
//!
//! A scenario is resolved from layers (config file, preset, command line),
//! later layers overriding earlier ones, with defaults filling the rest. The
//! origin of every resolved key is kept so `--print-config` can annotate it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use tfqss_core::{
    ChannelParams, OptimizerConfig, SecurityParams, SimConfig, SourceParams, TestBits,
    DEFAULT_ALPHA, DEFAULT_EPS, DEFAULT_ETA_D, DEFAULT_E_D, DEFAULT_F_E, DEFAULT_P_D,
    DEFAULT_TEST_FRACTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rate,
    Sweep,
    Optimize,
    Simulate,
    Compare,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Rate => "rate",
            Mode::Sweep => "sweep",
            Mode::Optimize => "optimize",
            Mode::Simulate => "simulate",
            Mode::Compare => "compare",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully resolved scenario. Keys without a default stay `None` until a
/// mode needs them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_b: Option<f64>,
    pub alpha: f64,
    pub eta_d: f64,
    pub p_d: f64,
    pub e_d: f64,
    pub f_e: f64,
    pub eps_rs: f64,
    pub eps_bar: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    pub n_pulses: f64,
    pub test_fraction: f64,
    pub optimize_test_fraction: bool,
    pub delta_km: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub l_step: f64,
    pub n_slots: u64,
    pub rng_seed: u64,
    pub population: usize,
    pub generations: usize,
    pub out: PathBuf,
}

/// Every key a scenario file may contain, in output order.
pub const KEYS: [&str; 26] = [
    "mode",
    "l_a",
    "l_b",
    "mu_a",
    "mu_b",
    "alpha",
    "eta_d",
    "p_d",
    "e_d",
    "f_e",
    "eps_rs",
    "eps_bar",
    "eps_ec",
    "eps_pa",
    "n_pulses",
    "test_fraction",
    "optimize_test_fraction",
    "delta_km",
    "l_min",
    "l_max",
    "l_step",
    "n_slots",
    "rng_seed",
    "population",
    "generations",
    "out",
];

/// Same keys as [`ScenarioConfig`], all optional; one layer of settings.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Partial {
    mode: Option<Mode>,
    l_a: Option<f64>,
    l_b: Option<f64>,
    mu_a: Option<f64>,
    mu_b: Option<f64>,
    alpha: Option<f64>,
    eta_d: Option<f64>,
    p_d: Option<f64>,
    e_d: Option<f64>,
    f_e: Option<f64>,
    eps_rs: Option<f64>,
    eps_bar: Option<f64>,
    eps_ec: Option<f64>,
    eps_pa: Option<f64>,
    n_pulses: Option<f64>,
    test_fraction: Option<f64>,
    optimize_test_fraction: Option<bool>,
    delta_km: Option<f64>,
    l_min: Option<f64>,
    l_max: Option<f64>,
    l_step: Option<f64>,
    n_slots: Option<u64>,
    rng_seed: Option<u64>,
    population: Option<usize>,
    generations: Option<usize>,
    out: Option<PathBuf>,
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    ConfigFile,
    Preset,
    CommandLine,
    /// Default taken from the published simulation parameters.
    PublishedDefault,
    /// Default chosen for this tool.
    DesignDefault,
    /// Default derived from another key.
    DerivedDefault(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::ConfigFile => f.write_str("config file"),
            Origin::Preset => f.write_str("preset"),
            Origin::CommandLine => f.write_str("command line"),
            Origin::PublishedDefault => f.write_str("default: published simulation parameter"),
            Origin::DesignDefault => f.write_str("default: design choice"),
            Origin::DerivedDefault(from) => write!(f, "default: derived from {from}"),
        }
    }
}

/// One layer of settings and its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub origin: Origin,
    pub table: toml::Table,
}

impl Layer {
    pub fn new(origin: Origin) -> Self {
        Self {
            origin,
            table: toml::Table::new(),
        }
    }

    /// Parses a scenario document, rejecting unknown keys and mistyped values.
    pub fn parse(text: &str, origin: Origin) -> Result<Self> {
        toml::from_str::<Partial>(text).context("malformed scenario")?;
        let table: toml::Table = toml::from_str(text).context("malformed scenario")?;
        Ok(Self { origin, table })
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) -> &mut Self {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.table.insert(key.to_string(), value.into());
        self
    }

    pub fn set_opt<V: Into<toml::Value>>(&mut self, key: &str, value: Option<V>) -> &mut Self {
        if let Some(v) = value {
            self.set(key, v);
        }
        self
    }
}

fn published(key: &str) -> bool {
    matches!(
        key,
        "alpha" | "eta_d" | "p_d" | "f_e" | "eps_rs" | "eps_bar" | "eps_ec" | "eps_pa"
    )
}

/// A resolved scenario together with each key's origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub origins: BTreeMap<&'static str, Origin>,
}

impl Resolved {
    /// The scenario as a parseable document, each line annotated with its origin.
    pub fn annotated(&self) -> Result<String> {
        let table = toml::Table::try_from(&self.config)?;
        let mut out = String::new();
        for key in KEYS {
            match table.get(key) {
                Some(v) => {
                    let mut one = toml::Table::new();
                    one.insert(key.to_string(), v.clone());
                    let line = toml::to_string(&one)?;
                    out.push_str(&format!(
                        "{:<40} # {}\n",
                        line.trim_end(),
                        self.origins[key]
                    ));
                }
                None => out.push_str(&format!("# {key} is unset\n")),
            }
        }
        Ok(out)
    }
}

/// Merges `layers` in order, applies defaults and validates the result.
pub fn resolve(layers: &[Layer]) -> Result<Resolved> {
    let mut merged = toml::Table::new();
    let mut origins: BTreeMap<&'static str, Origin> = BTreeMap::new();
    for layer in layers {
        for (k, v) in &layer.table {
            let key = KEYS
                .iter()
                .find(|&&known| known == k)
                .ok_or_else(|| anyhow!("unknown key `{k}`"))?;
            merged.insert(k.clone(), v.clone());
            origins.insert(key, layer.origin);
        }
    }
    let p: Partial = merged.try_into().context("malformed scenario")?;
    let mode = p.mode.ok_or_else(|| {
        anyhow!("missing key `mode` (one of rate, sweep, optimize, simulate, compare)")
    })?;
    let delta_km = p.delta_km.unwrap_or(0.0);
    let config = ScenarioConfig {
        mode,
        l_a: p.l_a,
        l_b: p.l_b,
        mu_a: p.mu_a,
        mu_b: p.mu_b,
        alpha: p.alpha.unwrap_or(DEFAULT_ALPHA),
        eta_d: p.eta_d.unwrap_or(DEFAULT_ETA_D),
        p_d: p.p_d.unwrap_or(DEFAULT_P_D),
        e_d: p.e_d.unwrap_or(DEFAULT_E_D),
        f_e: p.f_e.unwrap_or(DEFAULT_F_E),
        eps_rs: p.eps_rs.unwrap_or(DEFAULT_EPS),
        eps_bar: p.eps_bar.unwrap_or(DEFAULT_EPS),
        eps_ec: p.eps_ec.unwrap_or(DEFAULT_EPS),
        eps_pa: p.eps_pa.unwrap_or(DEFAULT_EPS),
        n_pulses: p.n_pulses.unwrap_or(1e12),
        test_fraction: p.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
        optimize_test_fraction: p.optimize_test_fraction.unwrap_or(false),
        delta_km,
        l_min: p.l_min.unwrap_or(delta_km.abs()),
        l_max: p.l_max.unwrap_or(400.0),
        l_step: p.l_step.unwrap_or(2.0),
        n_slots: p.n_slots.unwrap_or(10_000_000),
        rng_seed: p.rng_seed.unwrap_or(0),
        population: p
            .population
            .unwrap_or(OptimizerConfig::default().population),
        generations: p
            .generations
            .unwrap_or(OptimizerConfig::default().generations),
        out: p
            .out
            .unwrap_or_else(|| PathBuf::from(format!("{mode}.csv"))),
    };
    for key in KEYS {
        if origins.contains_key(key) || matches!(key, "l_a" | "l_b" | "mu_a" | "mu_b") {
            continue;
        }
        let origin = match key {
            "l_min" => Origin::DerivedDefault("delta_km"),
            "out" => Origin::DerivedDefault("mode"),
            k if published(k) => Origin::PublishedDefault,
            _ => Origin::DesignDefault,
        };
        origins.insert(key, origin);
    }
    config.validate()?;
    Ok(Resolved { config, origins })
}

/// Parses a single scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    Ok(resolve(&[Layer::parse(text, Origin::ConfigFile)?])?.config)
}

/// The fully resolved document; `serialize(parse(x))` is the normal form of `x`.
pub fn serialize(cfg: &ScenarioConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

fn with_key(e: tfqss_core::Error) -> anyhow::Error {
    match &e {
        tfqss_core::Error::Domain { name, .. } => anyhow!("invalid `{name}`: {e}"),
        _ => anyhow!(e),
    }
}

impl ScenarioConfig {
    fn require(&self, key: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| anyhow!("mode {} requires key `{key}`", self.mode))
    }

    /// Checks every range and the keys the mode needs.
    pub fn validate(&self) -> Result<()> {
        let ch = ChannelParams {
            l_a: self.l_a.unwrap_or(0.0),
            l_b: self.l_b.unwrap_or(0.0),
            ..self.channel_template()
        };
        ch.validate().map_err(with_key)?;
        SourceParams {
            mu_a: self.mu_a.unwrap_or(0.0),
            mu_b: self.mu_b.unwrap_or(0.0),
        }
        .validate()
        .map_err(with_key)?;
        self.security().validate().map_err(with_key)?;
        self.optimizer().validate().map_err(with_key)?;
        if !(self.delta_km.is_finite()) {
            bail!("invalid `delta_km`: must be finite, got {}", self.delta_km);
        }
        if !(self.l_step > 0.0 && self.l_step.is_finite()) {
            bail!("invalid `l_step`: must be positive, got {}", self.l_step);
        }
        if !(self.l_min >= 0.0 && self.l_max >= self.l_min && self.l_max.is_finite()) {
            bail!(
                "invalid `l_max`: need 0 <= l_min <= l_max, got l_min = {}, l_max = {}",
                self.l_min,
                self.l_max
            );
        }
        if self.n_slots == 0 {
            bail!("invalid `n_slots`: must be at least 1");
        }
        if self.generations == 0 {
            bail!("invalid `generations`: must be at least 1");
        }
        match self.mode {
            Mode::Rate | Mode::Simulate => {
                self.source()?;
                self.channel()?;
            }
            Mode::Optimize => {
                self.channel()?;
            }
            Mode::Sweep | Mode::Compare => {}
        }
        Ok(())
    }

    /// Channel parameters with both lengths zero.
    pub fn channel_template(&self) -> ChannelParams {
        ChannelParams {
            l_a: 0.0,
            l_b: 0.0,
            alpha: self.alpha,
            eta_d: self.eta_d,
            p_d: self.p_d,
            e_d: self.e_d,
        }
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        Ok(ChannelParams {
            l_a: self.require("l_a", self.l_a)?,
            l_b: self.require("l_b", self.l_b)?,
            ..self.channel_template()
        })
    }

    pub fn source(&self) -> Result<SourceParams> {
        Ok(SourceParams {
            mu_a: self.require("mu_a", self.mu_a)?,
            mu_b: self.require("mu_b", self.mu_b)?,
        })
    }

    pub fn security(&self) -> SecurityParams {
        SecurityParams {
            eps_rs: self.eps_rs,
            eps_bar: self.eps_bar,
            eps_ec: self.eps_ec,
            eps_pa: self.eps_pa,
            f_e: self.f_e,
            n_pulses: self.n_pulses,
            test_bits: TestBits::Fraction(self.test_fraction),
            ..SecurityParams::default()
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            optimize_test_fraction: self.optimize_test_fraction,
            population: self.population,
            generations: self.generations,
            rng_seed: self.rng_seed,
            ..OptimizerConfig::default()
        }
    }

    pub fn simulation(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            test_fraction: self.test_fraction,
            ..SimConfig::new(self.channel()?, self.source()?, self.n_slots, self.rng_seed)
        })
    }
}
