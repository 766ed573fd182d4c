//! Adaptive tracing of open-loop frequency responses.
//!
//! The sweep runs ω from −ω_max up through 0 to +ω_max (s = jω), seeded
//! log-uniformly per side, then refines by bisection until every consecutive
//! pair of samples satisfies two resolution criteria relative to the critical
//! point (−1, j0):
//!
//! * the angle subtended at (−1, j0) stays below π/2, so no winding step can
//!   alias, and
//! * the chord stays below a tenth of the distance to (−1, j0), so the
//!   polyline hugs the true curve where it matters.
//!
//! When the loop has a pole at s = 0 the sweep replaces the origin sample
//! with a small semicircular detour into Re(s) > 0; detour samples keep
//! ω = Im(s) as their key, which stays strictly monotone along the arc.

use num_complex::Complex64;
use rayon::prelude::*;

use super::StabilityError;

/// Distances to (−1, j0) below this refuse the verdict: the trace runs
/// through the critical point and the winding count is meaningless.
pub const CRITICAL_DISTANCE_MIN: f64 = 1e-6;
/// Largest allowed angle subtended at (−1, j0) by one polyline step.
pub const ANGLE_STEP_MAX: f64 = std::f64::consts::FRAC_PI_2;
/// Largest allowed chord length as a fraction of the distance to (−1, j0).
pub const CHORD_FRACTION_MAX: f64 = 0.1;
/// Radius of the right-half-plane detour around a pole at s = 0.
pub const INDENT_RADIUS: f64 = 1e-6;
/// Seed samples on the detour arc (interior points, endpoints come from ±ω
/// samples at the arc radius).
pub const INDENT_ARC_POINTS: usize = 64;
/// Hard cap on samples per branch; hitting it means the trace cannot be
/// resolved and the refinement reports exhaustion.
const MAX_TRACE_POINTS: usize = 400_000;

/// Options shared by every contour trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourOptions {
    /// Smallest strictly positive sweep frequency (rad per time unit).
    pub omega_min: f64,
    /// Largest sweep frequency.
    pub omega_max: f64,
    /// Seed density of the log grid, per decade per side.
    pub points_per_decade: f64,
    /// Bisection passes before the trace gives up.
    pub max_refinement_passes: usize,
    /// Scalar gain multiplying the agent transfer function in the loop
    /// (the µ/Δr flux factor; 1 when the agent footprint is not modelled).
    pub flux_gain: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            omega_min: 1e-6,
            omega_max: 1e6,
            // 400 seed points per side over the default 12 decades.
            points_per_decade: 100.0 / 3.0,
            max_refinement_passes: 20,
            flux_gain: 1.0,
        }
    }
}

/// One traced sample: the sweep key ω and the mapped loop value.
///
/// On the right-half-plane detour arc, `omega` is Im(s) of the detour point
/// (still strictly increasing through the arc); everywhere else s = jω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub omega: f64,
    pub value: Complex64,
}

/// Result of a trace: samples in sweep order plus resolution bookkeeping.
#[derive(Debug, Clone)]
pub struct TraceOutcome {
    pub points: Vec<ContourPoint>,
    /// Refinement passes actually used.
    pub passes: usize,
    /// Smallest sampled distance to (−1, j0).
    pub min_dist: f64,
    /// Consecutive pairs still violating the criteria when tracing stopped
    /// (0 on a fully resolved trace).
    pub violations: usize,
}

/// Maps a sweep key to the Laplace point it samples.
fn s_of_omega(omega: f64, indent: bool) -> Complex64 {
    if indent && omega.abs() < INDENT_RADIUS {
        // Right-half-plane semicircle: Re > 0, Im = ω.
        Complex64::new(
            (INDENT_RADIUS * INDENT_RADIUS - omega * omega).sqrt(),
            omega,
        )
    } else {
        Complex64::new(0.0, omega)
    }
}

/// Midpoint of two sweep keys: geometric within one side of ω = 0 (matching
/// the log seed grid), arithmetic for the pair straddling or touching zero.
fn midpoint_key(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        a.signum() * (a * b).sqrt()
    } else {
        0.5 * (a + b)
    }
}

fn violates(a: Complex64, b: Complex64) -> bool {
    let center = Complex64::new(-1.0, 0.0);
    let ra = a - center;
    let rb = b - center;
    let da = ra.norm();
    let db = rb.norm();
    // Angle at the critical point between the two radius vectors.
    let cross = ra.re * rb.im - ra.im * rb.re;
    let dot = ra.re * rb.re + ra.im * rb.im;
    let angle = cross.atan2(dot).abs();
    if angle > ANGLE_STEP_MAX {
        return true;
    }
    (b - a).norm() > CHORD_FRACTION_MAX * da.min(db)
}

/// Seed keys for the full sweep, ascending: −ω_max … −ω_min, the origin
/// region, +ω_min … +ω_max. With a detour the origin region carries the arc
/// interior; otherwise it is the single key 0.
fn seed_keys(opts: &ContourOptions, indent: bool) -> Vec<f64> {
    let decades = (opts.omega_max / opts.omega_min).log10();
    let per_side = ((decades * opts.points_per_decade).ceil() as usize).max(2);
    let mut positive: Vec<f64> = (0..=per_side)
        .map(|k| {
            let frac = k as f64 / per_side as f64;
            opts.omega_min * (opts.omega_max / opts.omega_min).powf(frac)
        })
        .collect();
    // Pin the endpoints exactly.
    positive[0] = opts.omega_min;
    *positive.last_mut().unwrap() = opts.omega_max;

    let mut keys: Vec<f64> = positive.iter().rev().map(|w| -w).collect();
    if indent {
        // Interior arc keys ω = r·sin(θ), θ uniform in (−π/2, π/2); the arc
        // endpoints coincide with the ±ω_min samples when ω_min = radius.
        for k in 1..=INDENT_ARC_POINTS {
            let theta = std::f64::consts::PI * (k as f64 / (INDENT_ARC_POINTS + 1) as f64 - 0.5);
            let omega = INDENT_RADIUS * theta.sin();
            if omega.abs() < opts.omega_min {
                keys.push(omega);
            }
        }
    } else {
        keys.push(0.0);
    }
    keys.extend(positive);
    keys
}

/// Traces a loop evaluation over the sweep, refining until resolved.
///
/// `indent` routes the sweep around a pole at s = 0 through the
/// right-half-plane detour. The returned samples are in ascending sweep
/// order; the closure back to the origin is left to the caller.
pub fn trace_curve(
    loop_eval: &(dyn Fn(Complex64) -> Result<Complex64, StabilityError> + Sync),
    opts: &ContourOptions,
    indent: bool,
) -> Result<TraceOutcome, StabilityError> {
    assert!(
        opts.omega_min > 0.0 && opts.omega_max > opts.omega_min,
        "sweep range must satisfy 0 < omega_min < omega_max"
    );
    let keys = seed_keys(opts, indent);
    let mut points: Vec<ContourPoint> = keys
        .par_iter()
        .map(|&omega| {
            let value = loop_eval(s_of_omega(omega, indent))?;
            Ok(ContourPoint { omega, value })
        })
        .collect::<Result<_, StabilityError>>()?;

    let mut passes = 0;
    let mut violations;
    loop {
        let flagged: Vec<usize> = (0..points.len() - 1)
            .filter(|&k| violates(points[k].value, points[k + 1].value))
            .collect();
        violations = flagged.len();
        if violations == 0 || passes >= opts.max_refinement_passes {
            break;
        }
        if points.len() + violations > MAX_TRACE_POINTS {
            break;
        }
        passes += 1;
        let inserted: Vec<(usize, ContourPoint)> = flagged
            .par_iter()
            .map(|&k| {
                let omega = midpoint_key(points[k].omega, points[k + 1].omega);
                let value = loop_eval(s_of_omega(omega, indent))?;
                Ok((k, ContourPoint { omega, value }))
            })
            .collect::<Result<_, StabilityError>>()?;
        // Splice from the back so earlier indices stay valid.
        for &(k, point) in inserted.iter().rev() {
            points.insert(k + 1, point);
        }
    }

    let center = Complex64::new(-1.0, 0.0);
    let min_dist = points
        .iter()
        .map(|p| (p.value - center).norm())
        .fold(f64::INFINITY, f64::min);

    Ok(TraceOutcome {
        points,
        passes,
        min_dist,
        violations,
    })
}
