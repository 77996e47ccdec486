//! Finite-key bookkeeping: the random-sampling bound on the untested error
//! rate, the composable failure budget, the collision-probability bound and
//! the per-slot secret key rate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::model::{analytic_point, binary_entropy, ChannelParams, GainError, SourceParams};

/// Error-correction inefficiency used by the reference simulations.
pub const DEFAULT_F_E: f64 = 1.15;
/// Per-component failure probability used by the reference simulations.
pub const DEFAULT_EPS: f64 = 1e-10;
/// Default share of the sifted bits consumed by parameter estimation.
pub const DEFAULT_TEST_FRACTION: f64 = 0.1;

/// Error rate at which the collision bound `1 - e^2 - (1 - 6e)^2 / 2` peaks.
///
/// Above it the bound falls again (and goes below ½, then 0), which would
/// award more secrecy to noisier data. Bounded error rates at or past this
/// point are treated as insecure.
pub const COLLISION_BOUND_LIMIT: f64 = 3.0 / 19.0;

/// How many sifted bits are disclosed for QBER estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestBits {
    /// `k = round(fraction * n_mu)`.
    Fraction(f64),
    /// Absolute count.
    Count(f64),
}

impl TestBits {
    pub fn resolve(&self, n_sifted: f64) -> f64 {
        match *self {
            TestBits::Fraction(f) => (f * n_sifted).round(),
            TestBits::Count(k) => k,
        }
    }
}

/// Which closed form bounds the untested-bit error rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SamplingBound {
    /// Random sampling without replacement, hypergeometric tail.
    #[default]
    RandomSampling,
    /// Serfling-type bound; looser, used as a cross-check.
    Serfling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub eps_rs: f64,
    pub eps_bar: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    pub f_e: f64,
    /// Number of slots `N`. Kept as `f64` since the asymptotic checks use 1e20.
    pub n_pulses: f64,
    pub test_bits: TestBits,
    pub sampling_bound: SamplingBound,
    /// Shorten the key by the disclosed test bits. Off by default.
    pub subtract_test_bits: bool,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_rs: DEFAULT_EPS,
            eps_bar: DEFAULT_EPS,
            eps_ec: DEFAULT_EPS,
            eps_pa: DEFAULT_EPS,
            f_e: DEFAULT_F_E,
            n_pulses: 1e12,
            test_bits: TestBits::Fraction(DEFAULT_TEST_FRACTION),
            sampling_bound: SamplingBound::RandomSampling,
            subtract_test_bits: false,
        }
    }
}

impl SecurityParams {
    pub fn with_pulses(n_pulses: f64) -> Self {
        Self {
            n_pulses,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eps) in [
            ("eps_rs", self.eps_rs),
            ("eps_bar", self.eps_bar),
            ("eps_ec", self.eps_ec),
            ("eps_pa", self.eps_pa),
        ] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Domain {
                    name,
                    value: eps,
                    expected: "0 < eps < 1",
                });
            }
        }
        check_range("f_e", self.f_e, 1.0, f64::INFINITY, "f_e >= 1")?;
        check_range(
            "n_pulses",
            self.n_pulses,
            1.0,
            f64::INFINITY,
            "n_pulses >= 1",
        )?;
        match self.test_bits {
            TestBits::Fraction(f) if !(f > 0.0 && f < 1.0) => Err(Error::Domain {
                name: "test_fraction",
                value: f,
                expected: "0 < test_fraction < 1",
            }),
            TestBits::Count(k) if !(k >= 1.0) => Err(Error::Domain {
                name: "k_test",
                value: k,
                expected: "k_test >= 1",
            }),
            _ => Ok(()),
        }
    }
}

/// Outcome classification of a key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateFlag {
    Ok,
    /// The rate expression is not positive.
    NonPositive,
    /// The bounded error rate is beyond what the collision bound covers.
    ThresholdExceeded,
}

impl RateFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateFlag::Ok => "ok",
            RateFlag::NonPositive => "non_positive",
            RateFlag::ThresholdExceeded => "threshold",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RateFlag::Ok),
            "non_positive" => Some(RateFlag::NonPositive),
            "threshold" => Some(RateFlag::ThresholdExceeded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub q_mu: f64,
    pub e_mu: f64,
    /// Upper bound on the error rate of the untested bits.
    pub e_mu_upper: f64,
    pub p_co: f64,
    pub leak_internal: f64,
    /// Beam-splitting leakage, known only when the channel was supplied.
    pub leak_external: Option<f64>,
    pub pen_smooth: f64,
    pub pen_ec: f64,
    pub pen_pa: f64,
    /// Sifted bits `N * q_mu`.
    pub n_sifted: f64,
    pub k_test: f64,
    /// Secret bits per slot, never negative.
    pub rate: f64,
    pub flag: RateFlag,
}

/// Upper bound γ on how far the error rate of `n` untested bits can exceed
/// the rate `lambda` observed on `k` test bits, except with probability `eps`.
///
/// `lambda` is floored at `1 / (2k)` so that an error-free sample still
/// yields a finite bound.
pub fn gamma_upper(n: f64, k: f64, lambda: f64, eps: f64) -> Result<f64> {
    check_range("n", n, 1.0, f64::INFINITY, "n >= 1")?;
    check_range("k", k, 1.0, f64::INFINITY, "k >= 1")?;
    if !(0.0..0.5).contains(&lambda) {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            expected: "0 <= lambda < 0.5",
        });
    }
    check_eps(eps)?;
    let lambda = lambda.max(0.5 / k);
    let total = n + k;
    let var = lambda * (1.0 - lambda);
    let g = total / (n * k) * (total / (2.0 * PI * n * k * var * eps * eps)).ln();
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::BoundInapplicable { n, k, lambda, eps });
    }
    let a = n.max(k);
    let ag = a * g / total;
    let a2g = a * a * g / (total * total);
    let numer = (1.0 - 2.0 * lambda) * ag + (ag * ag + 4.0 * var * g).sqrt();
    Ok(numer / (2.0 + 2.0 * a2g))
}

/// Serfling-type deviation `sqrt((n + k)(k + 1) ln(1/eps) / (2 n k^2))`.
pub fn gamma_serfling(n: f64, k: f64, eps: f64) -> Result<f64> {
    check_range("n", n, 1.0, f64::INFINITY, "n >= 1")?;
    check_range("k", k, 1.0, f64::INFINITY, "k >= 1")?;
    check_eps(eps)?;
    Ok(((n + k) * (k + 1.0) * (1.0 / eps).ln() / (2.0 * n * k * k)).sqrt())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "eps",
            value: eps,
            expected: "0 < eps < 1",
        })
    }
}

/// Total failure probability of the composed protocol.
pub fn epsilon_total(sp: &SecurityParams) -> f64 {
    sp.eps_rs + sp.eps_bar + sp.eps_ec + sp.eps_pa
}

/// Collision-probability bound for individual attacks. May be negative.
pub fn collision_probability(e_upper: f64) -> f64 {
    let t = 1.0 - 6.0 * e_upper;
    1.0 - e_upper * e_upper - 0.5 * t * t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leakage {
    /// Beam-splitting leakage to an outside eavesdropper.
    pub external: f64,
    /// Worst case for a dishonest sender, `2 max(mu_a, mu_b)`.
    pub internal: f64,
}

pub fn leakage_fractions(src: &SourceParams, eta_a: f64, eta_b: f64) -> Leakage {
    Leakage {
        external: src.mu_a * (1.0 - eta_a) + src.mu_b * (1.0 - eta_b),
        internal: 2.0 * src.mu_max(),
    }
}

/// Finite-key secret bits per slot for a given gain and QBER.
///
/// Only the internal leakage enters the rate; `leak_external` is left empty
/// here and filled in by [`evaluate`].
pub fn key_rate(ge: &GainError, src: &SourceParams, sp: &SecurityParams) -> Result<RateBreakdown> {
    sp.validate()?;
    src.validate()?;
    check_range("q_mu", ge.q_mu, 0.0, 1.0, "0 <= q_mu <= 1")?;
    check_range("e_mu", ge.e_mu, 0.0, 1.0, "0 <= e_mu <= 1")?;

    let n = sp.n_pulses;
    let n_sifted = n * ge.q_mu;
    let k = sp.test_bits.resolve(n_sifted);
    if !(k >= 1.0 && k < n_sifted) {
        return Err(Error::InsufficientSiftedBits {
            k_test: k,
            n_sifted,
        });
    }

    let leak_internal = 2.0 * src.mu_max();
    let pen_smooth = 7.0 / n * (n_sifted * (2.0 / sp.eps_bar).log2()).sqrt();
    let pen_ec = (2.0 / sp.eps_ec).log2() / n;
    let pen_pa = 2.0 / n * (1.0 / sp.eps_pa).log2();

    let e_mu_upper = if ge.e_mu >= COLLISION_BOUND_LIMIT {
        ge.e_mu
    } else {
        let gamma = match sp.sampling_bound {
            SamplingBound::RandomSampling => gamma_upper(n_sifted - k, k, ge.e_mu, sp.eps_rs)?,
            SamplingBound::Serfling => gamma_serfling(n_sifted - k, k, sp.eps_rs)?,
        };
        ge.e_mu + gamma
    };
    let p_co = collision_probability(e_mu_upper);

    let mut out = RateBreakdown {
        q_mu: ge.q_mu,
        e_mu: ge.e_mu,
        e_mu_upper,
        p_co,
        leak_internal,
        leak_external: None,
        pen_smooth,
        pen_ec,
        pen_pa,
        n_sifted,
        k_test: k,
        rate: 0.0,
        flag: RateFlag::ThresholdExceeded,
    };
    if e_mu_upper >= COLLISION_BOUND_LIMIT || p_co <= 0.0 {
        return Ok(out);
    }

    let kept = if sp.subtract_test_bits {
        (n_sifted - k) / n_sifted
    } else {
        1.0
    };
    let per_bit = -(1.0 - leak_internal) * p_co.log2() - sp.f_e * binary_entropy(ge.e_mu)?;
    let raw = ge.q_mu * kept * per_bit - pen_smooth - pen_ec - pen_pa;
    if raw > 0.0 {
        out.rate = raw;
        out.flag = RateFlag::Ok;
    } else {
        out.flag = RateFlag::NonPositive;
    }
    Ok(out)
}

/// Infinite-`N` limit of [`key_rate`]: no penalties and no sampling slack.
pub fn asymptotic_rate(ge: &GainError, src: &SourceParams, f_e: f64) -> Result<f64> {
    src.validate()?;
    check_range("f_e", f_e, 1.0, f64::INFINITY, "f_e >= 1")?;
    check_range("q_mu", ge.q_mu, 0.0, 1.0, "0 <= q_mu <= 1")?;
    check_range("e_mu", ge.e_mu, 0.0, 1.0, "0 <= e_mu <= 1")?;
    if ge.e_mu >= COLLISION_BOUND_LIMIT {
        return Ok(0.0);
    }
    let p_co = collision_probability(ge.e_mu);
    let per_bit = -(1.0 - 2.0 * src.mu_max()) * p_co.log2() - f_e * binary_entropy(ge.e_mu)?;
    Ok((ge.q_mu * per_bit).max(0.0))
}

/// Analytic gain and QBER followed by [`key_rate`], with the external
/// leakage filled in.
pub fn evaluate(
    ch: &ChannelParams,
    src: &SourceParams,
    sp: &SecurityParams,
) -> Result<RateBreakdown> {
    let ge = analytic_point(ch, src)?;
    let mut out = key_rate(&ge, src, sp)?;
    out.leak_external = Some(leakage_fractions(src, ch.eta_a()?, ch.eta_b()?).external);
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // reference values keep the oracle's digits
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_reference_values() {
        // 50-digit evaluations of the closed form.
        let g = gamma_upper(1e6, 1e5, 0.02, 1e-10).unwrap();
        assert!(rel(g, 0.002_995_291_958_455_685_2) < 1e-12, "{g}");
        let g = gamma_upper(1e4, 1e4, 0.1, 1e-10).unwrap();
        assert!(rel(g, 0.027_729_917_219_895_991) < 1e-12, "{g}");

        assert!(
            rel(
                gamma_serfling(1e6, 1e5, 1e-10).unwrap(),
                0.011_253_597_048_787_275
            ) < 1e-12
        );
        assert!(
            rel(
                gamma_serfling(1e4, 1e4, 1e-10).unwrap(),
                0.047_987_658_324_858_331
            ) < 1e-12
        );
    }

    #[test]
    fn gamma_zero_lambda_is_clamped() {
        let k = 2000.0;
        assert_eq!(
            gamma_upper(1e5, k, 0.0, 1e-10).unwrap(),
            gamma_upper(1e5, k, 0.5 / k, 1e-10).unwrap()
        );
    }

    #[test]
    fn gamma_inapplicable_is_an_error() {
        assert!(matches!(
            gamma_upper(9900.0, 100.0, 0.02, 0.5),
            Err(Error::BoundInapplicable { .. })
        ));
    }

    #[test]
    fn gamma_rejects_bad_inputs() {
        assert!(gamma_upper(0.0, 10.0, 0.1, 1e-3).is_err());
        assert!(gamma_upper(10.0, 0.5, 0.1, 1e-3).is_err());
        assert!(gamma_upper(10.0, 10.0, 0.5, 1e-3).is_err());
        assert!(gamma_upper(10.0, 10.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn epsilon_budget() {
        let sp = SecurityParams::default();
        assert!(rel(epsilon_total(&sp), 4e-10) < 1e-15);
        let a = SecurityParams {
            eps_rs: 1e-3,
            eps_bar: 2e-5,
            eps_ec: 3e-7,
            eps_pa: 4e-9,
            ..sp
        };
        let b = SecurityParams {
            eps_rs: 4e-9,
            eps_bar: 3e-7,
            eps_ec: 1e-3,
            eps_pa: 2e-5,
            ..sp
        };
        assert!((epsilon_total(&a) - epsilon_total(&b)).abs() < 1e-18);
        let tiny = SecurityParams {
            eps_rs: 1e-300,
            eps_bar: 1e-300,
            eps_ec: 1e-300,
            eps_pa: 1e-300,
            ..sp
        };
        assert!(epsilon_total(&tiny) < 1e-299);
    }

    #[test]
    fn collision_examples() {
        assert_eq!(collision_probability(0.0), 0.5);
        assert!((collision_probability(1.0 / 6.0) - 35.0 / 36.0).abs() < 1e-15);
        assert!((collision_probability(0.05) - 0.7525).abs() < 1e-15);
        assert!(collision_probability(0.45) < 0.0);
    }

    #[test]
    fn leakage_examples() {
        let src = SourceParams::symmetric(0.2).unwrap();
        assert_eq!(leakage_fractions(&src, 1.0, 1.0).external, 0.0);
        let src = SourceParams::new(0.1, 0.04).unwrap();
        assert_eq!(leakage_fractions(&src, 0.3, 0.2).internal, 0.2);
        let src = SourceParams::symmetric(0.05).unwrap();
        assert!((leakage_fractions(&src, 0.01, 0.001).external - 0.09945).abs() < 1e-15);
    }

    fn reference_point() -> (ChannelParams, SourceParams, SecurityParams) {
        (
            ChannelParams::with_lengths(50.0, 50.0),
            SourceParams::symmetric(0.05).unwrap(),
            SecurityParams::default(),
        )
    }

    #[test]
    fn key_rate_reference_breakdown() {
        let (ch, src, sp) = reference_point();
        let rb = evaluate(&ch, &src, &sp).unwrap();
        assert_eq!(rb.k_test, 410_621_441.0);
        assert!(rel(rb.e_mu_upper, 0.020_041_191_079_451_257) < 1e-10);
        assert!(rel(rb.p_co, 0.612_615_809_018_929_09) < 1e-11);
        assert!(rel(rb.pen_smooth, 2.623_942_361_380_787e-6) < 1e-11);
        assert!(rel(rb.pen_ec, 3.421_928_094_887_362_3e-11) < 1e-12);
        assert!(rel(rb.pen_pa, 6.643_856_189_774_724_7e-11) < 1e-12);
        assert!(rel(rb.rate, 0.001_941_993_934_481_377_7) < 1e-9);
        assert!(rel(rb.leak_external.unwrap(), 0.091_770_703_891_480_616) < 1e-13);
        assert_eq!(rb.leak_internal, 0.1);
        assert_eq!(rb.flag, RateFlag::Ok);

        let ge = analytic_point(&ch, &src).unwrap();
        let asym = asymptotic_rate(&ge, &src, sp.f_e).unwrap();
        assert!(rel(asym, 0.001_946_390_065_882_370_5) < 1e-11);
    }

    #[test]
    fn half_error_rate_gives_zero() {
        let src = SourceParams::symmetric(0.1).unwrap();
        let ge = GainError {
            q_mu: 1e-3,
            e_mu: 0.5,
        };
        let rb = key_rate(&ge, &src, &SecurityParams::default()).unwrap();
        assert_eq!(rb.rate, 0.0);
        assert_eq!(rb.flag, RateFlag::ThresholdExceeded);
        assert_eq!(asymptotic_rate(&ge, &src, 1.15).unwrap(), 0.0);
    }

    #[test]
    fn noisy_branch_of_collision_bound_is_rejected() {
        // p_co is small but positive here; -log2(p_co) would report several bits per slot.
        let e = 0.38;
        assert!(collision_probability(e) > 0.0 && collision_probability(e) < 0.1);
        let src = SourceParams::symmetric(0.05).unwrap();
        let rb = key_rate(
            &GainError {
                q_mu: 0.03,
                e_mu: e,
            },
            &src,
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(rb.rate, 0.0);
        assert_eq!(rb.flag, RateFlag::ThresholdExceeded);
    }

    #[test]
    fn insufficient_sifted_bits() {
        let src = SourceParams::symmetric(0.1).unwrap();
        let sp = SecurityParams {
            n_pulses: 1e6,
            test_bits: TestBits::Count(5_000.0),
            ..SecurityParams::default()
        };
        let ge = GainError {
            q_mu: 1e-3,
            e_mu: 0.02,
        };
        assert!(matches!(
            key_rate(&ge, &src, &sp),
            Err(Error::InsufficientSiftedBits { .. })
        ));
    }

    #[test]
    fn zero_error_zero_intensity_limit() {
        let src = SourceParams {
            mu_a: 0.0,
            mu_b: 0.0,
        };
        let r = asymptotic_rate(
            &GainError {
                q_mu: 0.25,
                e_mu: 0.0,
            },
            &src,
            1.15,
        )
        .unwrap();
        assert_eq!(r, 0.25);
    }

    #[test]
    fn subtracting_test_bits_lowers_the_rate() {
        let (ch, src, sp) = reference_point();
        let base = evaluate(&ch, &src, &sp).unwrap();
        let sub = evaluate(
            &ch,
            &src,
            &SecurityParams {
                subtract_test_bits: true,
                ..sp
            },
        )
        .unwrap();
        assert!(sub.rate < base.rate);
        assert!(sub.rate > 0.85 * base.rate);
    }

    #[test]
    fn serfling_switch_is_more_conservative() {
        let (ch, src, sp) = reference_point();
        let rs = evaluate(&ch, &src, &sp).unwrap();
        let sf = evaluate(
            &ch,
            &src,
            &SecurityParams {
                sampling_bound: SamplingBound::Serfling,
                ..sp
            },
        )
        .unwrap();
        assert!(sf.e_mu_upper > rs.e_mu_upper);
        assert!(sf.rate < rs.rate);
    }

    #[test]
    fn security_params_validation() {
        let bad = SecurityParams {
            f_e: 0.9,
            ..SecurityParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::Domain { name: "f_e", .. })
        ));
        let bad = SecurityParams {
            eps_pa: 0.0,
            ..SecurityParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SecurityParams {
            test_bits: TestBits::Fraction(1.0),
            ..SecurityParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
