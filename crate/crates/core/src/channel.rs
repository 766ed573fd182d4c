//! Transfer functions of 1-D diffusion segments and their assembly into the
//! coupling matrix G(s) for a chain or ring of agents.
//!
//! Working variable: ŝ = √(s/μ) with the principal square root. Every
//! function here is even in ŝ, so the branch choice cannot change a value;
//! we still pin the principal branch for determinism.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::ComplexMatrix;

/// Switch to Taylor series below this |L·ŝ| to avoid 0/0 cancellation at the
/// removable singularity s = 0.
pub const SERIES_THRESHOLD: f64 = 1e-3;

/// Switch to exponential asymptotics above this Re(L·ŝ) so cosh/sinh cannot
/// overflow.
pub const ASYMPTOTIC_THRESHOLD: f64 = 350.0;

/// Pole guard: evaluation fails when |s − s_pole| < this · μ/L², i.e. when
/// |(Lŝ)² + (kπ)²| < this, for any pole index k ≥ 1.
pub const POLE_PROXIMITY_THRESHOLD: f64 = 1e-12;

/// Time base the Laplace variable `s` (and every rate constant) is declared
/// in. The diffusion coefficient is always configured in µm²·s⁻¹ and gets
/// reconciled internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Minutes,
    Seconds,
}

impl TimeUnit {
    /// Factor converting µm²·s⁻¹ to µm² per declared time unit.
    pub fn seconds_per_unit(self) -> f64 {
        match self {
            TimeUnit::Minutes => 60.0,
            TimeUnit::Seconds => 1.0,
        }
    }
}

/// Outer boundary treatment of the agent chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Ring: the last agent couples back to the first through one more segment.
    Periodic,
    /// Open chain whose two outermost segments end on zero-concentration walls.
    DirichletZeroEnds,
}

/// Errors from channel evaluation and assembly.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("at least one agent is required")]
    EmptyRing,
    #[error("{boundary:?} topology with {n} agents needs {expected} segment lengths, got {got}")]
    WrongLengthCount {
        n: usize,
        boundary: BoundaryKind,
        expected: usize,
        got: usize,
    },
    #[error("segment length {value} at index {index} must be positive and finite")]
    BadLength { index: usize, value: f64 },
    #[error("diffusion coefficient {value} must be positive and finite")]
    BadDiffusivity { value: f64 },
    #[error("non-finite frequency argument s = {re} + {im}j")]
    NonFiniteFrequency { re: f64, im: f64 },
    #[error(
        "s = {s_re:.6e}+{s_im:.6e}j is within {threshold:.0e}·μ/L² of the diffusion pole at \
         {nearest_pole:.6e} (segment length {segment_length} µm)"
    )]
    PoleProximity {
        s_re: f64,
        s_im: f64,
        nearest_pole: f64,
        segment_length: f64,
        threshold: f64,
    },
    #[error("while assembling G(s) at segment {segment}: {source}")]
    AtSegment {
        segment: usize,
        #[source]
        source: Box<ChannelError>,
    },
}

/// Geometry and medium of the diffusion coupling between agents.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTopology {
    n: usize,
    lengths: Vec<f64>,
    mu_um2_per_s: f64,
    boundary: BoundaryKind,
    time_unit: TimeUnit,
}

/// One end of a diffusion segment: an agent index or a zero-concentration wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEnd {
    Robot(usize),
    Wall,
}

impl ChannelTopology {
    /// Validated constructor.
    ///
    /// `lengths` is indexed so that segment `j` ends at agent `j`: on a ring,
    /// `lengths[0]` closes the loop from the last agent back to agent 0; on an
    /// open chain there are `n + 1` entries and the outermost segments touch
    /// the walls.
    pub fn new(
        n: usize,
        lengths: Vec<f64>,
        mu_um2_per_s: f64,
        boundary: BoundaryKind,
        time_unit: TimeUnit,
    ) -> Result<Self, ChannelError> {
        if n == 0 {
            return Err(ChannelError::EmptyRing);
        }
        let expected = match boundary {
            BoundaryKind::Periodic => n,
            BoundaryKind::DirichletZeroEnds => n + 1,
        };
        if lengths.len() != expected {
            return Err(ChannelError::WrongLengthCount {
                n,
                boundary,
                expected,
                got: lengths.len(),
            });
        }
        for (index, &value) in lengths.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ChannelError::BadLength { index, value });
            }
        }
        if !(mu_um2_per_s.is_finite() && mu_um2_per_s > 0.0) {
            return Err(ChannelError::BadDiffusivity {
                value: mu_um2_per_s,
            });
        }
        Ok(Self {
            n,
            lengths,
            mu_um2_per_s,
            boundary,
            time_unit,
        })
    }

    /// Ring of `n` agents with equal segment lengths.
    pub fn ring_uniform(
        n: usize,
        length: f64,
        mu_um2_per_s: f64,
        time_unit: TimeUnit,
    ) -> Result<Self, ChannelError> {
        Self::new(
            n,
            vec![length; n],
            mu_um2_per_s,
            BoundaryKind::Periodic,
            time_unit,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn mu_um2_per_s(&self) -> f64 {
        self.mu_um2_per_s
    }

    /// Diffusion coefficient in µm² per declared time unit.
    pub fn mu_eff(&self) -> f64 {
        self.mu_um2_per_s * self.time_unit.seconds_per_unit()
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn time_unit(&self) -> TimeUnit {
        self.time_unit
    }

    /// True for a ring with exactly equal segment lengths (the only shape the
    /// spectral decomposition applies to).
    pub fn is_circulant(&self) -> bool {
        self.boundary == BoundaryKind::Periodic
            && self.lengths.iter().all(|&l| l == self.lengths[0])
    }

    /// Number of diffusion segments.
    pub fn segment_count(&self) -> usize {
        self.lengths.len()
    }

    /// The two ends of segment `j`, ordered (start at r = 0, end at r = L).
    ///
    /// Segment `j` ends at agent `j`; its start is agent `j − 1` on a ring
    /// (wrapping) and a wall / agent `j − 1` / on an open chain, with segment
    /// `n` ending on the far wall.
    pub fn segment_ends(&self, j: usize) -> (SegmentEnd, SegmentEnd) {
        match self.boundary {
            BoundaryKind::Periodic => (
                SegmentEnd::Robot((j + self.n - 1) % self.n),
                SegmentEnd::Robot(j),
            ),
            BoundaryKind::DirichletZeroEnds => {
                let start = if j == 0 {
                    SegmentEnd::Wall
                } else {
                    SegmentEnd::Robot(j - 1)
                };
                let end = if j == self.n {
                    SegmentEnd::Wall
                } else {
                    SegmentEnd::Robot(j)
                };
                (start, end)
            }
        }
    }

    /// Assembles the n×n coupling matrix G(s): each segment loads its two end
    /// agents' diagonals with −ŝ·coth(Lŝ) and couples them with +ŝ/sinh(Lŝ);
    /// wall ends contribute only the diagonal load.
    pub fn transfer_matrix(&self, s: Complex64) -> Result<ChannelSample, ChannelError> {
        let mu = self.mu_eff();
        let mut matrix = ComplexMatrix::zeros(self.n, self.n);
        for j in 0..self.segment_count() {
            let l = self.lengths[j];
            let at = |source| ChannelError::AtSegment {
                segment: j,
                source: Box::new(source),
            };
            let load = coth_load(s, l, mu).map_err(at)?;
            let (start, end) = self.segment_ends(j);
            for endpoint in [start, end] {
                if let SegmentEnd::Robot(i) = endpoint {
                    let v = matrix.get(i, i) - load;
                    matrix.set(i, i, v);
                }
            }
            if let (SegmentEnd::Robot(a), SegmentEnd::Robot(b)) = (start, end) {
                let transfer = g_transfer(s, l, mu).map_err(at)?;
                if a == b {
                    // Single-agent ring: both ends of the loop segment feed the
                    // same diagonal.
                    let v = matrix.get(a, a) + 2.0 * transfer;
                    matrix.set(a, a, v);
                } else {
                    let v = matrix.get(a, b) + transfer;
                    matrix.set(a, b, v);
                    let v = matrix.get(b, a) + transfer;
                    matrix.set(b, a, v);
                }
            }
        }
        Ok(ChannelSample { s, matrix })
    }
}

/// G(s) evaluated at one complex frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub s: Complex64,
    pub matrix: ComplexMatrix,
}

/// Self-coupling of an agent flanked by segments of lengths `l_left` and
/// `l_right`: −[ŝ·coth(l_left·ŝ) + ŝ·coth(l_right·ŝ)].
///
/// `mu_eff` must already be reconciled to the declared time unit.
/// At s = 0 the series path yields exactly −(1/l_left + 1/l_right).
pub fn g_self(
    s: Complex64,
    l_left: f64,
    l_right: f64,
    mu_eff: f64,
) -> Result<Complex64, ChannelError> {
    let a = coth_load(s, l_left, mu_eff)?;
    let b = coth_load(s, l_right, mu_eff)?;
    Ok(-(a + b))
}

/// End-to-end transfer of one segment: ŝ/sinh(Lŝ). At s = 0 the series path
/// yields exactly 1/L; deep in the asymptotic regime the value underflows to
/// an exact 0, which is documented behavior rather than an error.
pub fn g_transfer(s: Complex64, l: f64, mu_eff: f64) -> Result<Complex64, ChannelError> {
    let shat = diffusion_root(s, mu_eff)?;
    g_transfer_from_root(shat, l, mu_eff)
}

/// ŝ·coth(Lŝ) — the diagonal loading each segment puts on an end agent.
fn coth_load(s: Complex64, l: f64, mu_eff: f64) -> Result<Complex64, ChannelError> {
    let shat = diffusion_root(s, mu_eff)?;
    coth_load_from_root(shat, l, mu_eff)
}

/// Principal branch of √(s/μ).
fn diffusion_root(s: Complex64, mu_eff: f64) -> Result<Complex64, ChannelError> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(ChannelError::NonFiniteFrequency { re: s.re, im: s.im });
    }
    Ok((s / mu_eff).sqrt())
}

/// ŝ·coth(Lŝ) from a given root ŝ. Exposed for branch-invariance tests: the
/// evaluation normalizes Re(Lŝ) ≥ 0 first, so ±ŝ give bitwise-equal results.
#[doc(hidden)]
pub fn coth_load_from_root(
    shat: Complex64,
    l: f64,
    mu_eff: f64,
) -> Result<Complex64, ChannelError> {
    let (z, shat_n) = normalize_even(l * shat, shat);
    check_pole_proximity(z, l, mu_eff)?;
    if z.norm() < SERIES_THRESHOLD {
        // ŝ·coth(Lŝ) = (1/L)(1 + z²/3 − z⁴/45 + 2z⁶/945 + O(z⁸)), z = Lŝ.
        let z2 = z * z;
        let z4 = z2 * z2;
        let z6 = z4 * z2;
        return Ok((1.0 + z2 / 3.0 - z4 / 45.0 + 2.0 * z6 / 945.0) / l);
    }
    if z.re > ASYMPTOTIC_THRESHOLD {
        // coth(z) = 1 + 2e^{−2z}/(1 − e^{−2z}); the correction is below 1e−300.
        return Ok(shat_n);
    }
    let e = (-2.0 * z).exp();
    Ok(shat_n * (1.0 + e) / (1.0 - e))
}

/// ŝ/sinh(Lŝ) from a given root ŝ; same normalization contract as
/// [`coth_load_from_root`].
#[doc(hidden)]
pub fn g_transfer_from_root(
    shat: Complex64,
    l: f64,
    mu_eff: f64,
) -> Result<Complex64, ChannelError> {
    let (z, shat_n) = normalize_even(l * shat, shat);
    check_pole_proximity(z, l, mu_eff)?;
    if z.norm() < SERIES_THRESHOLD {
        // ŝ/sinh(Lŝ) = (1/L)(1 − z²/6 + 7z⁴/360 − 31z⁶/15120 + O(z⁸)).
        let z2 = z * z;
        let z4 = z2 * z2;
        let z6 = z4 * z2;
        return Ok((1.0 - z2 / 6.0 + 7.0 * z4 / 360.0 - 31.0 * z6 / 15120.0) / l);
    }
    // 1/sinh(z) = 2e^{−z}/(1 − e^{−2z}); for Re(z) beyond ~709 the numerator
    // underflows and the attenuation is reported as an exact 0.
    let e1 = (-z).exp();
    let e2 = e1 * e1;
    Ok(shat_n * 2.0 * e1 / (1.0 - e2))
}

/// Flip ŝ (and z = Lŝ with it) so that Re(z) ≥ 0; with Re(z) = 0, pick the
/// sign with Im(z) ≥ 0. All channel functions are even in ŝ, so this is a
/// no-op mathematically and makes the ± branch agreement exact.
fn normalize_even(z: Complex64, shat: Complex64) -> (Complex64, Complex64) {
    if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) {
        (-z, -shat)
    } else {
        (z, shat)
    }
}

/// Rejects evaluation within the guard distance of a diffusion pole
/// s = −μ(kπ/L)², k ≥ 1. Identity used: s − s_pole = (μ/L²)(z² + (kπ)²).
fn check_pole_proximity(z: Complex64, l: f64, mu_eff: f64) -> Result<(), ChannelError> {
    let k = (z.im.abs() / std::f64::consts::PI).round();
    if k >= 1.0 {
        let kpi = k * std::f64::consts::PI;
        let d = z * z + kpi * kpi;
        if d.norm() < POLE_PROXIMITY_THRESHOLD {
            let scale = mu_eff / (l * l);
            let s = z * z * scale;
            return Err(ChannelError::PoleProximity {
                s_re: s.re,
                s_im: s.im,
                nearest_pole: -(kpi / l) * (kpi / l) * mu_eff,
                segment_length: l,
                threshold: POLE_PROXIMITY_THRESHOLD,
            });
        }
    }
    Ok(())
}
