//! Exact arithmetic for weakly holomorphic modular forms.
//!
//! The crate builds canonical bases for the spaces of weight-0 and weight-2
//! forms of levels 1, 2, 3, 4, 5, 7, 13 that are holomorphic away from the
//! cusp at infinity, and verifies divisibility and duality properties of
//! their Fourier coefficients over finite grids.
//!
//! Module layout:
//! - [`qseries`]: truncated Laurent series over arbitrary-precision rationals
//!   with a tracked reliable-precision window
//! - [`eta`]: Dedekind eta quotients, Hauptmoduls, Eisenstein series, Δ and j
//! - [`basis`]: canonical basis elements `f_{k,m}` by exact elimination over
//!   Hauptmodul powers, plus an on-disk expansion cache
//! - [`operators`]: the U_p, V_p, T_p and θ operators
//! - [`congruence`]: p-adic valuation grids and theorem verifiers
//! - [`cli`]: the `qforms` command line

pub mod basis;
pub mod cli;
pub mod congruence;
pub mod eta;
pub mod operators;
pub mod qseries;



pub use basis::{BasisBuilder, BasisElement, ExpansionCache, Weight};
pub use congruence::{TheoremReport, Valuation, ValuationGrid};
pub use eta::{EtaQuotient, Level};
pub use qseries::QSeries;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient precision: coefficient of q^{requested} requested, series reliable through q^{available}")]
    InsufficientPrecision { requested: i64, available: i64 },
    #[error("non-invertible series (zero to the available precision)")]
    NonInvertible,
    #[error("fractional leading exponent {twentyfourths}/24 in eta quotient")]
    FractionalLeadingExponent { twentyfourths: i64 },
    #[error("unsupported level {0}; supported levels are 1, 2, 3, 4, 5, 7, 13")]
    UnsupportedLevel(u32),
    #[error("basis obstruction at exponent {exponent} (level {level}, weight {weight}, pole order {m})")]
    BasisObstruction {
        level: u32,
        weight: u32,
        m: u32,
        exponent: i64,
    },
    #[error("non-integral coefficient {value} at q^{exponent}")]
    NonIntegral { exponent: i64, value: String },
    #[error("theorem precondition violated: {0}")]
    TheoremPrecondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precision budget overflow: needs precision {needed}, limit is {limit}")]
    BudgetExceeded { needed: i64, limit: i64 },
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache format: {0}")]
    CacheFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
