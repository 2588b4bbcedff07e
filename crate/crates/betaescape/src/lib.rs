//! Escape rates of greedy β-expansions with a hole.
//!
//! For a base 1 < β ≤ 2, a point of [0, 1/(β−1)] has a unique binary
//! β-expansion exactly when its greedy orbit never visits the switch
//! region Δ_β = (1/β, 1/(β(β−1))), where both digits are admissible.
//! Treating Δ_β as a hole turns the question into an open dynamical
//! system: Lebesgue measure leaks into the hole at an exponential rate
//! e_β, and the normalised rate E_β = e_β / log β complements the
//! Hausdorff dimension of the survivor (univoque) set: dim + E = 1.
//!
//! The crate computes E_β by two independent routes and checks them
//! against each other:
//!
//! * exact interval bookkeeping of the survivor sets W_n followed by a
//!   log-linear regression ([`survivor`]);
//! * the Perron root of the transition matrix of a finite Markov
//!   partition built from the hole-endpoint orbits, whenever those
//!   orbits resolve ([`markov_escape`]).
//!
//! Supporting modules: [`beta_core`] (bases, maps, codings, hole
//! geometry), [`sft_tools`] (lexicographic window subshifts and their
//! entropy), [`constants`] (golden ratio, multinacci roots,
//! Komornik–Loreti constant), and [`cli`] (the `betaescape` binary).

pub mod beta_core;
pub mod cli;
pub mod constants;
pub mod markov_escape;
pub mod real;
pub mod sft_tools;
pub mod survivor;

pub use beta_core::{make_beta, BetaParam, BetaSpec, DigitWord, HoleGeometry};
pub use markov_escape::{decide_escape, AnalysisReport, AnalyzeConfig, Classification};
pub use real::{Ctx, Real, DEFAULT_PRECISION};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("beta descriptor {0:?}: value outside (1, 2]")]
    BetaOutOfRange(String),
    #[error("malformed descriptor {0:?}: {1}")]
    BadDescriptor(String, String),
    #[error("polynomial has no sign change on ({lo}, {hi})")]
    NoRootInInterval { lo: String, hi: String },
    #[error("{what} = {value} outside {domain}")]
    OutOfDomain {
        what: &'static str,
        value: String,
        domain: &'static str,
    },
    #[error("undetermined at step {step}: {hint}")]
    Undetermined { step: usize, hint: String },
    #[error("power iteration did not converge (Collatz-Wielandt gap {gap:.3e})")]
    NonConvergence { gap: f64 },
    #[error("no decay to fit: {0}")]
    NoDecay(String),
    #[error("window length {got} does not match block length {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("exhaustive count capped at n = {cap} (2^{cap} candidates); use the transfer matrix for n = {n}")]
    CountCap { n: usize, cap: usize },
    #[error("escape rate {0} outside [0, 1]: block and beta are incompatible")]
    BlockBetaMismatch(f64),
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
