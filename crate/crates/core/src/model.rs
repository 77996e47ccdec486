//! Analytic channel and detection model.
//!
//! Alice and Bob each send a weak coherent pulse through fiber of length
//! `l_a` (`l_b`) to Charlie, whose 50:50 beam splitter interferes the two
//! pulses onto detectors D1 and D2. With a relative phase of 0 the light
//! exits the D1 port, with π it exits D2; any amplitude mismatch between the
//! two arriving pulses leaks intensity into the wrong port and shows up as
//! bit errors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Detector efficiency used by the reference simulations.
pub const DEFAULT_ETA_D: f64 = 0.55;
/// Dark-count probability per detector per slot used by the reference simulations.
pub const DEFAULT_P_D: f64 = 1e-8;
/// Ultra-low-loss fiber attenuation in dB/km used by the reference simulations.
pub const DEFAULT_ALPHA: f64 = 0.165;
/// Misalignment error probability. Not published alongside the other values; assumed.
pub const DEFAULT_E_D: f64 = 0.02;

/// Fiber and detector parameters for both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Alice–Charlie fiber length in km.
    pub l_a: f64,
    /// Bob–Charlie fiber length in km.
    pub l_b: f64,
    /// Attenuation in dB/km.
    pub alpha: f64,
    /// Detector efficiency in (0, 1].
    pub eta_d: f64,
    /// Dark-count probability per detector per slot, in [0, 1).
    pub p_d: f64,
    /// Misalignment error probability, in [0, 0.5].
    pub e_d: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            l_a: 0.0,
            l_b: 0.0,
            alpha: DEFAULT_ALPHA,
            eta_d: DEFAULT_ETA_D,
            p_d: DEFAULT_P_D,
            e_d: DEFAULT_E_D,
        }
    }
}

impl ChannelParams {
    /// Default detector and fiber parameters with the given arm lengths.
    pub fn with_lengths(l_a: f64, l_b: f64) -> Self {
        Self {
            l_a,
            l_b,
            ..Self::default()
        }
    }

    /// Splits a total Alice–Bob distance into arms with `l_b - l_a = delta`.
    pub fn with_total(total_km: f64, delta_km: f64) -> Self {
        Self::with_lengths((total_km - delta_km) / 2.0, (total_km + delta_km) / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("l_a", self.l_a, 0.0, f64::INFINITY, "l_a >= 0")?;
        check_range("l_b", self.l_b, 0.0, f64::INFINITY, "l_b >= 0")?;
        check_range("alpha", self.alpha, 0.0, f64::INFINITY, "alpha >= 0")?;
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::Domain {
                name: "eta_d",
                value: self.eta_d,
                expected: "0 < eta_d <= 1",
            });
        }
        if !(self.p_d >= 0.0 && self.p_d < 1.0) {
            return Err(Error::Domain {
                name: "p_d",
                value: self.p_d,
                expected: "0 <= p_d < 1",
            });
        }
        check_range("e_d", self.e_d, 0.0, 0.5, "0 <= e_d <= 0.5")
    }

    /// Overall transmittance of Alice's arm including detector efficiency.
    pub fn eta_a(&self) -> Result<f64> {
        transmittance(self.l_a, self.alpha, self.eta_d)
    }

    /// Overall transmittance of Bob's arm including detector efficiency.
    pub fn eta_b(&self) -> Result<f64> {
        transmittance(self.l_b, self.alpha, self.eta_d)
    }

    /// Same channel with the roles of Alice and Bob exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            l_a: self.l_b,
            l_b: self.l_a,
            ..*self
        }
    }
}

/// Per-sender mean photon numbers.
///
/// Zero intensities are accepted as the vacuum limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub mu_a: f64,
    pub mu_b: f64,
}

impl SourceParams {
    pub fn new(mu_a: f64, mu_b: f64) -> Result<Self> {
        let src = Self { mu_a, mu_b };
        src.validate()?;
        Ok(src)
    }

    pub fn symmetric(mu: f64) -> Result<Self> {
        Self::new(mu, mu)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [("mu_a", self.mu_a), ("mu_b", self.mu_b)] {
            if !(0.0..1.0).contains(&mu) {
                return Err(Error::Domain {
                    name,
                    value: mu,
                    expected: "0 <= mu < 1",
                });
            }
        }
        Ok(())
    }

    /// `max(mu_a, mu_b)`; the internal leakage fraction is twice this.
    pub fn mu_max(&self) -> f64 {
        self.mu_a.max(self.mu_b)
    }

    pub fn swapped(&self) -> Self {
        Self {
            mu_a: self.mu_b,
            mu_b: self.mu_a,
        }
    }
}

/// Relative phase between Alice's and Bob's pulse in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Zero,
    Pi,
}

impl Phase {
    /// Accepts only 0 or π (to within 1e-9 rad).
    pub fn from_radians(theta: f64) -> Result<Self> {
        if theta.abs() <= 1e-9 {
            Ok(Phase::Zero)
        } else if (theta - PI).abs() <= 1e-9 {
            Ok(Phase::Pi)
        } else {
            Err(Error::Domain {
                name: "theta",
                value: theta,
                expected: "theta in {0, pi}",
            })
        }
    }

    /// Phase difference of two phase-modulation bits (false = 0, true = π).
    pub fn from_bits(a: bool, b: bool) -> Self {
        if a == b {
            Phase::Zero
        } else {
            Phase::Pi
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Phase::Zero => Phase::Pi,
            Phase::Pi => Phase::Zero,
        }
    }

    fn cos(self) -> f64 {
        match self {
            Phase::Zero => 1.0,
            Phase::Pi => -1.0,
        }
    }
}

/// Mean photon numbers arriving at the two detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortIntensities {
    pub d1: f64,
    pub d2: f64,
}

/// Gain and QBER of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainError {
    pub q_mu: f64,
    pub e_mu: f64,
}

/// `eta_d * 10^(-alpha * length / 10)`.
pub fn transmittance(length_km: f64, alpha: f64, eta_d: f64) -> Result<f64> {
    check_range("length", length_km, 0.0, f64::INFINITY, "length >= 0")?;
    check_range("alpha", alpha, 0.0, f64::INFINITY, "alpha >= 0")?;
    if !(eta_d > 0.0 && eta_d <= 1.0) {
        return Err(Error::Domain {
            name: "eta_d",
            value: eta_d,
            expected: "0 < eta_d <= 1",
        });
    }
    Ok(eta_d * 10f64.powf(-alpha * length_km / 10.0))
}

pub fn port_intensities(
    src: &SourceParams,
    eta_a: f64,
    eta_b: f64,
    theta: Phase,
) -> Result<PortIntensities> {
    src.validate()?;
    check_range("eta_a", eta_a, 0.0, 1.0, "0 <= eta_a <= 1")?;
    check_range("eta_b", eta_b, 0.0, 1.0, "0 <= eta_b <= 1")?;
    let amp_a = 0.5 * (src.mu_a * eta_a).sqrt();
    let amp_b = 0.5 * (src.mu_b * eta_b).sqrt() * theta.cos();
    let sum = amp_a + amp_b;
    let diff = amp_a - amp_b;
    Ok(PortIntensities {
        d1: sum * sum,
        d2: diff * diff,
    })
}

/// Click probability `1 - (1 - p_d) e^{-d}` of a threshold detector fed a
/// coherent state of mean photon number `d`.
#[inline]
pub fn click_probability(d: f64, p_d: f64) -> f64 {
    // p_d + (1 - p_d)(1 - e^{-d}) without cancellation at small d
    p_d + (1.0 - p_d) * -(-d).exp_m1()
}

pub fn click_probabilities(ports: &PortIntensities, p_d: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&p_d) {
        return Err(Error::Domain {
            name: "p_d",
            value: p_d,
            expected: "0 <= p_d < 1",
        });
    }
    check_range("d1", ports.d1, 0.0, f64::INFINITY, "d1 >= 0")?;
    check_range("d2", ports.d2, 0.0, f64::INFINITY, "d2 >= 0")?;
    Ok((
        click_probability(ports.d1, p_d),
        click_probability(ports.d2, p_d),
    ))
}

/// Gain and error rate given the click probability of the correct port
/// (`q1`) and of the wrong port (`q2`).
///
/// Double clicks are kept with a random detector, so they carry error ½.
/// A point with zero gain reports the background error ½.
pub fn gain_and_qber(q1: f64, q2: f64, e_d: f64) -> Result<GainError> {
    check_range("q1", q1, 0.0, 1.0, "0 <= q1 <= 1")?;
    check_range("q2", q2, 0.0, 1.0, "0 <= q2 <= 1")?;
    check_range("e_d", e_d, 0.0, 0.5, "0 <= e_d <= 0.5")?;
    let only_1 = q1 * (1.0 - q2);
    let only_2 = q2 * (1.0 - q1);
    let both = q1 * q2;
    let q_mu = only_1 + only_2 + both;
    if q_mu == 0.0 {
        return Ok(GainError { q_mu, e_mu: 0.5 });
    }
    let errors = e_d * only_1 + (1.0 - e_d) * only_2 + 0.5 * both;
    Ok(GainError {
        q_mu,
        e_mu: (errors / q_mu).clamp(0.0, 1.0),
    })
}

/// End-to-end gain and QBER for a channel and source setting.
///
/// Evaluated for relative phase 0; the π configuration mirrors the port
/// roles and yields the same pair.
pub fn analytic_point(ch: &ChannelParams, src: &SourceParams) -> Result<GainError> {
    ch.validate()?;
    let ports = port_intensities(src, ch.eta_a()?, ch.eta_b()?, Phase::Zero)?;
    let (q1, q2) = click_probabilities(&ports, ch.p_d)?;
    gain_and_qber(q1, q2, ch.e_d)
}

/// Shannon binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, 0.0, 1.0, "0 <= x <= 1")?;
    // Evaluate on the lower half so that h(x) and h(1 - x) share one code path.
    let p = if x <= 0.5 { x } else { 1.0 - x };
    if p == 0.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    Ok(-p * p.log2() - q * q.log2())
}
