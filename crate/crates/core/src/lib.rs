//! Numerical laboratory for one-dimensional coined quantum walks whose coins
//! follow a substitution sequence.
//!
//! - [`substitution`]: Thue–Morse and Fibonacci words, legality, coin windows
//! - [`walk`]: exact evolution of `U = SC`, time-averaged profiles, moments,
//!   transport-exponent proxies
//! - [`transfer`]: transfer matrices, norm scans at and near `z = i`
//! - [`resolvent`]: banded resolvent solves, the exponentially damped Parseval
//!   identity, and the moment lower-bound certificate
//! - [`export`]: CSV and JSON writers shared by the command-line tool

// `!(x > 0.0)` rejects NaN along with the bad values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod export;
pub mod linalg;
pub mod resolvent;
pub mod substitution;
pub mod transfer;
pub mod walk;

pub use error::{Error, Result};
pub use linalg::{Mat2, C64};
pub use substitution::{CoinAngles, CoinSequence, SubshiftWindow, SubstitutionRule, Word};
pub use transfer::{SpectralParameter, TransferMatrix};
pub use walk::{CoinBank, WalkModel, WalkState};
