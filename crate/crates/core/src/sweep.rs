//! Bisection search for a qualitative boundary along one scalar parameter.
//!
//! The engine is generic over the predicate: anything that maps a parameter
//! value to a stable/unstable verdict (or fails) can be swept. Every
//! evaluation is recorded so callers can emit the full search trail.

use thiserror::Error;

/// Hard cap on bisection steps; 2^200 halvings exhaust any f64 bracket long
/// before this binds.
pub const SWEEP_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError<E: std::error::Error> {
    #[error("sweep range invalid: lo = {lo}, hi = {hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("bisection tolerance must be positive and finite, got {tol}")]
    BadTolerance { tol: f64 },
    #[error("both range endpoints share one verdict (stable = {stable}); no boundary bracketed")]
    SameVerdictAtEnds { stable: bool },
    #[error("verdict evaluation failed at parameter = {at}")]
    Eval {
        at: f64,
        #[source]
        source: E,
    },
}

/// One evaluated sweep point, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub value: f64,
    pub stable: bool,
}

/// Result of a completed bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Midpoint of the final bracket.
    pub boundary: f64,
    /// Final bracket endpoints (differing verdicts), ascending.
    pub lower: f64,
    pub upper: f64,
    /// Every evaluation, endpoints first.
    pub records: Vec<SweepRecord>,
    pub iterations: usize,
}

/// Bisects `[lo, hi]` down to width `tol` on the verdict returned by `eval`.
///
/// The endpoint verdicts must differ. Stops early if the bracket collapses
/// to adjacent floats (possible when `tol` underflows the local ulp).
pub fn bisect_boundary<E: std::error::Error>(
    lo: f64,
    hi: f64,
    tol: f64,
    mut eval: impl FnMut(f64) -> Result<bool, E>,
) -> Result<SweepOutcome, SweepError<E>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(SweepError::InvalidRange { lo, hi });
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SweepError::BadTolerance { tol });
    }

    let mut probe = |at: f64, records: &mut Vec<SweepRecord>| -> Result<bool, SweepError<E>> {
        let stable = eval(at).map_err(|source| SweepError::Eval { at, source })?;
        records.push(SweepRecord { value: at, stable });
        Ok(stable)
    };

    let mut records = Vec::new();
    let mut a = lo;
    let mut b = hi;
    let stable_a = probe(a, &mut records)?;
    let stable_b = probe(b, &mut records)?;
    if stable_a == stable_b {
        return Err(SweepError::SameVerdictAtEnds { stable: stable_a });
    }

    let mut iterations = 0;
    while b - a > tol && iterations < SWEEP_MAX_STEPS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        iterations += 1;
        let stable_mid = probe(mid, &mut records)?;
        if stable_mid == stable_a {
            a = mid;
        } else {
            b = mid;
        }
    }

    Ok(SweepOutcome {
        boundary: 0.5 * (a + b),
        lower: a,
        upper: b,
        records,
        iterations,
    })
}
