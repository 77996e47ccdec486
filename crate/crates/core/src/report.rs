//! Flat CSV schema shared by every mode.
//!
//! One header line, one row per evaluated point. Floats are written in
//! shortest round-trip form, so feeding a row's inputs back through
//! [`CsvRow::rederive`] reproduces its outputs bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_key::{evaluate, key_rate, RateBreakdown, SecurityParams, TestBits};
use crate::model::{ChannelParams, GainError, SourceParams};
use crate::optimizer::SweepRow;
use crate::sim::{SimConfig, SimResult};

pub const CSV_COLUMNS: [&str; 29] = [
    "mode",
    "L_km",
    "delta_km",
    "l_a_km",
    "l_b_km",
    "mu_a",
    "mu_b",
    "test_fraction",
    "N",
    "eta_d",
    "p_d",
    "alpha",
    "e_d",
    "f_e",
    "eps_rs",
    "eps_bar",
    "eps_ec",
    "eps_pa",
    "Q_mu",
    "E_mu",
    "E_mu_upper",
    "P_co",
    "leak_internal",
    "leak_external",
    "pen_smooth",
    "pen_ec",
    "pen_pa",
    "rate",
    "flag",
];

/// Flag written for rows whose optimum could not be evaluated.
pub const FLAG_UNEVALUABLE: &str = "unevaluable";
/// Flag written for Monte Carlo rows; their Q/E columns are empirical.
pub const FLAG_SIMULATED: &str = "simulated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub mode: String,
    #[serde(rename = "L_km")]
    pub total_km: f64,
    pub delta_km: f64,
    pub l_a_km: f64,
    pub l_b_km: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub test_fraction: f64,
    #[serde(rename = "N")]
    pub n_pulses: f64,
    pub eta_d: f64,
    pub p_d: f64,
    pub alpha: f64,
    pub e_d: f64,
    pub f_e: f64,
    pub eps_rs: f64,
    pub eps_bar: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    #[serde(rename = "Q_mu")]
    pub q_mu: f64,
    #[serde(rename = "E_mu")]
    pub e_mu: f64,
    #[serde(rename = "E_mu_upper")]
    pub e_mu_upper: f64,
    #[serde(rename = "P_co")]
    pub p_co: f64,
    pub leak_internal: f64,
    pub leak_external: Option<f64>,
    pub pen_smooth: f64,
    pub pen_ec: f64,
    pub pen_pa: f64,
    pub rate: f64,
    pub flag: String,
}

impl CsvRow {
    /// A row for one evaluated operating point.
    pub fn from_breakdown(
        mode: &str,
        ch: &ChannelParams,
        src: &SourceParams,
        sp: &SecurityParams,
        rb: Option<&RateBreakdown>,
    ) -> Self {
        let nan = f64::NAN;
        Self {
            mode: mode.to_string(),
            total_km: ch.l_a + ch.l_b,
            delta_km: ch.l_b - ch.l_a,
            l_a_km: ch.l_a,
            l_b_km: ch.l_b,
            mu_a: src.mu_a,
            mu_b: src.mu_b,
            test_fraction: match sp.test_bits {
                TestBits::Fraction(f) => f,
                TestBits::Count(_) => nan,
            },
            n_pulses: sp.n_pulses,
            eta_d: ch.eta_d,
            p_d: ch.p_d,
            alpha: ch.alpha,
            e_d: ch.e_d,
            f_e: sp.f_e,
            eps_rs: sp.eps_rs,
            eps_bar: sp.eps_bar,
            eps_ec: sp.eps_ec,
            eps_pa: sp.eps_pa,
            q_mu: rb.map_or(nan, |r| r.q_mu),
            e_mu: rb.map_or(nan, |r| r.e_mu),
            e_mu_upper: rb.map_or(nan, |r| r.e_mu_upper),
            p_co: rb.map_or(nan, |r| r.p_co),
            leak_internal: rb.map_or(2.0 * src.mu_max(), |r| r.leak_internal),
            leak_external: rb.and_then(|r| r.leak_external),
            pen_smooth: rb.map_or(nan, |r| r.pen_smooth),
            pen_ec: rb.map_or(nan, |r| r.pen_ec),
            pen_pa: rb.map_or(nan, |r| r.pen_pa),
            rate: rb.map_or(0.0, |r| r.rate),
            flag: rb.map_or(FLAG_UNEVALUABLE, |r| r.flag.as_str()).to_string(),
        }
    }

    /// A row for an optimized sweep point. `L_km` and `delta_km` come from
    /// the sweep grid.
    pub fn from_sweep(mode: &str, row: &SweepRow, sp: &SecurityParams) -> Self {
        let src = SourceParams {
            mu_a: row.result.best_mu_a,
            mu_b: row.result.best_mu_b,
        };
        let sp = SecurityParams {
            test_bits: row
                .result
                .best_test_fraction
                .map_or(sp.test_bits, TestBits::Fraction),
            ..*sp
        };
        let mut out =
            Self::from_breakdown(mode, &row.channel, &src, &sp, row.result.breakdown.as_ref());
        out.total_km = row.total_km;
        out.delta_km = row.delta_km;
        out
    }

    /// A Monte Carlo summary row. Q/E are the empirical estimates and the
    /// finite-key columns are evaluated on them.
    pub fn from_simulation(cfg: &SimConfig, sp: &SecurityParams, sim: &SimResult) -> Self {
        let ge = GainError {
            q_mu: sim.q_emp,
            e_mu: sim.e_emp,
        };
        let rb = key_rate(&ge, &cfg.source, sp).ok();
        let mut out = Self::from_breakdown("simulate", &cfg.channel, &cfg.source, sp, rb.as_ref());
        out.q_mu = sim.q_emp;
        out.e_mu = sim.e_emp;
        out.flag = FLAG_SIMULATED.to_string();
        out
    }

    /// Inputs encoded in the row; the switches not in the schema take their defaults.
    pub fn inputs(&self) -> (ChannelParams, SourceParams, SecurityParams) {
        let ch = ChannelParams {
            l_a: self.l_a_km,
            l_b: self.l_b_km,
            alpha: self.alpha,
            eta_d: self.eta_d,
            p_d: self.p_d,
            e_d: self.e_d,
        };
        let src = SourceParams {
            mu_a: self.mu_a,
            mu_b: self.mu_b,
        };
        let sp = SecurityParams {
            eps_rs: self.eps_rs,
            eps_bar: self.eps_bar,
            eps_ec: self.eps_ec,
            eps_pa: self.eps_pa,
            f_e: self.f_e,
            n_pulses: self.n_pulses,
            test_bits: TestBits::Fraction(self.test_fraction),
            ..SecurityParams::default()
        };
        (ch, src, sp)
    }

    /// Recomputes the row from its input columns alone, as `rate` mode would.
    pub fn rederive(&self) -> Result<CsvRow> {
        let (ch, src, sp) = self.inputs();
        let rb = evaluate(&ch, &src, &sp).ok();
        let mut out = Self::from_breakdown(&self.mode, &ch, &src, &sp, rb.as_ref());
        out.total_km = self.total_km;
        out.delta_km = self.delta_km;
        Ok(out)
    }

    /// Bitwise equality of every column, with NaN equal to NaN.
    pub fn same_bits(&self, other: &CsvRow) -> bool {
        let a = self.floats();
        let b = other.floats();
        self.mode == other.mode
            && self.flag == other.flag
            && self.leak_external.map(f64::to_bits) == other.leak_external.map(f64::to_bits)
            && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
    }

    fn floats(&self) -> [f64; 26] {
        [
            self.total_km,
            self.delta_km,
            self.l_a_km,
            self.l_b_km,
            self.mu_a,
            self.mu_b,
            self.test_fraction,
            self.n_pulses,
            self.eta_d,
            self.p_d,
            self.alpha,
            self.e_d,
            self.f_e,
            self.eps_rs,
            self.eps_bar,
            self.eps_ec,
            self.eps_pa,
            self.q_mu,
            self.e_mu,
            self.e_mu_upper,
            self.p_co,
            self.leak_internal,
            self.pen_smooth,
            self.pen_ec,
            self.pen_pa,
            self.rate,
        ]
    }
}

/// Writes the header and all rows. The header is written even with no rows.
pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Reads rows written by [`write_csv`], insisting on the exact header.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Csv(format!(
            "unexpected header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
