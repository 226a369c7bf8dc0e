//! The four experiment commands. Each one receives the resolved
//! configuration and an already-created run directory, writes
//! `results.csv` and `summary.json`, prints a terse report to stdout, and
//! returns whether any mathematical violation was found (which drives exit
//! code 1).

pub mod embed;
pub mod extremal;
pub mod ks;
pub mod verify;

use anyhow::Result;
use nct::NctError;

use crate::config::{retry_seed, RETRY_CAP};

/// Evaluate one sample with deterministic resampling: attempt `j` reseeds at
/// [`retry_seed`]`(base_seed, j)`. Positivity rejections are counted and
/// retried up to [`RETRY_CAP`] times; any other error propagates.
pub fn with_positivity_retry<T>(
    base_seed: u64,
    mut attempt: impl FnMut(u64) -> nct::Result<T>,
) -> Result<(T, usize)> {
    let mut rejections = 0usize;
    for j in 0..RETRY_CAP {
        match attempt(retry_seed(base_seed, j as u64)) {
            Ok(value) => return Ok((value, rejections)),
            Err(NctError::PositivityFailure(_)) => rejections += 1,
            Err(other) => return Err(other.into()),
        }
    }
    Err(anyhow::anyhow!(
        "sample rejected by the positivity gate {RETRY_CAP} times in a row"
    ))
}

/// Violation test for a two-sided identity: the slack must vanish up to the
/// relative tolerance. A non-finite slack always counts as a violation.
pub fn identity_violated(slack: f64, rhs: f64, tol: f64) -> bool {
    !slack.is_finite() || slack.abs() > tol * (1.0 + rhs.abs())
}
