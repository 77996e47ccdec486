use thiserror::Error;

/// Errors reported by the model, finite-key, simulation and optimizer routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the formula.
    #[error("{name} = {value} is out of range: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// The random-sampling bound does not bind (its log argument is at most one).
    #[error("sampling bound inapplicable for n = {n}, k = {k}, lambda = {lambda}, eps = {eps}")]
    BoundInapplicable {
        n: f64,
        k: f64,
        lambda: f64,
        eps: f64,
    },
    /// The test sample would consume every sifted bit.
    #[error("insufficient sifted bits: k = {k_test} but only {n_sifted} bits were observed")]
    InsufficientSiftedBits { k_test: f64, n_sifted: f64 },
    /// Aligned sequences have different lengths.
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("infeasible bounds for {name}: [{lo}, {hi}]")]
    InfeasibleBounds {
        name: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Checks `lo <= value <= hi`, rejecting NaN.
pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected,
        })
    }
}
