//! Frequency-domain stability verdicts for circulant rings.
//!
//! The n×n closed loop det(I − H(s)G(s)) of a uniform ring splits into n
//! scalar loops 1 − h(s)λ_i(s), one per circulant eigenvalue
//! λ_i(s) = g_self(s) + 2cos(2π(i−1)/n)·g_transfer(s). Each scalar loop gets
//! a Nyquist test: Z_i = N_i + P, with N_i the clockwise encirclements of
//! (−1, j0) by the open-loop trace −h(jω)λ_i(jω) and P the number of
//! closed-right-half-plane poles of h. The ring is stable iff every Z_i = 0.
//!
//! The determinant form is kept alive as an independent cross-check: the
//! product of the scalar characteristic functions must reproduce
//! det(I − h·G) at every probed frequency.

mod contour;
mod winding;

pub use contour::{
    trace_curve, ContourOptions, ContourPoint, TraceOutcome, ANGLE_STEP_MAX, CHORD_FRACTION_MAX,
    CRITICAL_DISTANCE_MIN, INDENT_ARC_POINTS, INDENT_RADIUS,
};
pub use winding::{winding_number, VERTEX_DISTANCE_MIN, WINDING_RESIDUE_MAX};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ChannelError, ChannelSample, ChannelTopology};
use crate::numerics::{determinant, eig_real, ComplexMatrix, NumericsError, RealMatrix};
use crate::reaction::{
    find_equilibria, find_equilibrium, robot_tf, Equilibrium, NewtonOptions, ReactionError,
    ReactionModel,
};
use thiserror::Error;

/// Eigenvalues of the agent Jacobian closer to the imaginary axis than this
/// make the open-loop pole count ill-posed; the verdict is refused instead.
pub const RHP_BOUNDARY_TOL: f64 = 1e-9;

/// Number of positive frequencies probed by the determinant-vs-product
/// cross-check inside [`analyze`].
const CROSS_CHECK_POINTS: usize = 32;

/// Errors and refusals from the stability machinery.
///
/// "Refusals" ([`StabilityError::is_refusal`]) are cases where the method
/// itself is inapplicable or under-resolved (marginal dynamics, unresolved
/// winding) rather than misconfigured inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("the spectral decomposition needs a ring with equal segment lengths")]
    NotCirculant,
    #[error("branch index {i} out of range 1..={n}")]
    BranchIndex { i: usize, n: usize },
    #[error(
        "branch {branch}: open-loop trajectory passes within {min_dist:.3e} of (−1, 0j) — \
         marginal loop, verdict refused"
    )]
    ThroughCriticalPoint { branch: usize, min_dist: f64 },
    #[error(
        "branch {branch}: contour refinement exhausted after {passes} passes with \
         {violations} segments still violating the resolution criteria"
    )]
    RefinementExhausted {
        branch: usize,
        passes: usize,
        violations: usize,
    },
    #[error("winding sum is {residue:.3e} turns away from an integer — contour under-resolved")]
    UnderResolved { residue: f64 },
    #[error("contour vertex {index} is within {dist:.3e} of the winding center")]
    VertexAtCenter { index: usize, dist: f64 },
    #[error(
        "agent Jacobian eigenvalue with real part {real_part:.3e} sits on the verdict \
         boundary (|Re| < {tol:.0e}) — marginal open loop, verdict refused"
    )]
    BoundaryAmbiguous { real_part: f64, tol: f64 },
    #[error(
        "branch {branch}: computed encirclement count {n_enc} with P = {p} implies a negative \
         closed-loop zero count — contour inconsistent, verdict refused"
    )]
    InconsistentWinding { branch: usize, n_enc: i32, p: usize },
    #[error("no equilibrium found from the seed grid")]
    NoEquilibrium,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl StabilityError {
    /// True when the verdict is refused (method inapplicable or marginal)
    /// rather than failed on bad input.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Self::ThroughCriticalPoint { .. }
                | Self::RefinementExhausted { .. }
                | Self::UnderResolved { .. }
                | Self::VertexAtCenter { .. }
                | Self::BoundaryAmbiguous { .. }
                | Self::InconsistentWinding { .. }
        )
    }
}

/// Real coupling factor 2·cos(2π(i−1)/n) of branch `i` (1-based).
///
/// Exact at the quarter angles: branches with (i−1)/n ∈ {0, ¼, ½, ¾} get
/// exactly 2, 0, −2, 0, so zero-coupling branches reduce to g_self alone with
/// no cosine roundoff. Panics if `i` is out of range.
pub fn coupling_factor(n: usize, i: usize) -> f64 {
    assert!(i >= 1 && i <= n, "branch index {i} out of range 1..={n}");
    let r = i - 1;
    if (4 * r).is_multiple_of(n) {
        match 4 * r / n {
            0 => return 2.0,
            1 | 3 => return 0.0,
            2 => return -2.0,
            _ => unreachable!(),
        }
    }
    2.0 * (2.0 * std::f64::consts::PI * r as f64 / n as f64).cos()
}

/// Index of the branch sharing branch `i`'s coupling factor (conjugate-pair
/// degeneracy): i ↔ n − i + 2 for i ≥ 2, identity for i = 1.
pub fn degenerate_partner(n: usize, i: usize) -> usize {
    if i == 1 {
        1
    } else {
        n - i + 2
    }
}

/// Number of distinct coupling factors on a ring of `n` agents: ⌊n/2⌋ + 1.
pub fn distinct_branch_count(n: usize) -> usize {
    n / 2 + 1
}

/// The i-th circulant eigenvalue λ_i(s) of the ring coupling matrix.
pub fn circulant_eigenvalue(
    topo: &ChannelTopology,
    i: usize,
    s: Complex64,
) -> Result<Complex64, StabilityError> {
    if !topo.is_circulant() {
        return Err(StabilityError::NotCirculant);
    }
    let n = topo.n();
    if i < 1 || i > n {
        return Err(StabilityError::BranchIndex { i, n });
    }
    let l = topo.lengths()[0];
    let mu = topo.mu_eff();
    let gt = crate::channel::g_self(s, l, l, mu)?;
    let gs = crate::channel::g_transfer(s, l, mu)?;
    Ok(gt + coupling_factor(n, i) * gs)
}

/// Unitary DFT matrix F with entries α^{(row)(col)}/√n, α = e^{−j2π/n}.
///
/// Powers are taken modulo n through a precomputed root table, so large
/// index products cost no trigonometric accuracy.
pub fn dft_matrix(n: usize) -> ComplexMatrix {
    assert!(n >= 1, "DFT matrix needs n >= 1");
    let roots: Vec<Complex64> = (0..n)
        .map(|r| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * r as f64 / n as f64))
        .collect();
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |j, k| roots[(j * k) % n] * scale).expect("unit roots are finite")
}

/// det(I − diag(h)·G) for a per-agent diagonal `h_diag` against an assembled
/// channel sample. Any loop gain must already be folded into `h_diag`.
pub fn char_det(h_diag: &[Complex64], sample: &ChannelSample) -> Result<Complex64, StabilityError> {
    let n = sample.matrix.rows();
    assert_eq!(h_diag.len(), n, "need one h value per agent");
    let mut m = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut v = -h_diag[r] * sample.matrix.get(r, c);
            if r == c {
                v += 1.0;
            }
            m.set(r, c, v);
        }
    }
    Ok(determinant(&m)?)
}

/// Π_i (1 − h·λ_i(s)) — the spectral form of the characteristic function,
/// implemented independently of the determinant path.
pub fn char_product(
    h: Complex64,
    topo: &ChannelTopology,
    s: Complex64,
) -> Result<Complex64, StabilityError> {
    let mut product = Complex64::new(1.0, 0.0);
    for i in 1..=topo.n() {
        product *= 1.0 - h * circulant_eigenvalue(topo, i, s)?;
    }
    Ok(product)
}

/// Counts eigenvalues of the agent Jacobian with Re ≥ +[`RHP_BOUNDARY_TOL`];
/// any eigenvalue with |Re| below the tolerance refuses the verdict.
///
/// The channel factors contribute no closed-right-half-plane poles (all
/// diffusion poles sit at s = −μ(kπ/L)² < 0), so this Jacobian count is the
/// whole open-loop P.
pub fn count_rhp_poles(a: &RealMatrix) -> Result<usize, StabilityError> {
    let spectrum = eig_real(a)?;
    let mut count = 0;
    for lambda in &spectrum.eigenvalues {
        if lambda.re.abs() < RHP_BOUNDARY_TOL {
            return Err(StabilityError::BoundaryAmbiguous {
                real_part: lambda.re,
                tol: RHP_BOUNDARY_TOL,
            });
        }
        if lambda.re > 0.0 {
            count += 1;
        }
    }
    Ok(count)
}

/// One traced spectral branch: the open-loop samples −κ·h(jω)·λ_i(jω) in
/// sweep order (ω ascending from −ω_max through 0 to +ω_max).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBranch {
    /// 1-based branch index.
    pub index: usize,
    pub coupling: f64,
    pub contour: Vec<ContourPoint>,
    pub min_dist_to_minus1: f64,
    pub refinement_passes: usize,
}

impl SpectralBranch {
    /// The closed polyline fed to the winding count: the sweep samples plus
    /// the high-frequency closure at the origin (h rolls off as 1/s while λ
    /// grows only like √s, so the closure arc pins to 0).
    pub fn closed_polyline(&self) -> Vec<Complex64> {
        let mut points: Vec<Complex64> = self.contour.iter().map(|p| p.value).collect();
        points.push(Complex64::new(0.0, 0.0));
        points
    }
}

/// Traces branch `i` of the ring for a given agent transfer function.
///
/// `h` is the agent's scalar transfer function; `flux_gain` scales the loop
/// (the µ/Δr flux factor). If `h` has a pole at s = 0 the contour indents
/// into the right half-plane with a semicircle of radius [`INDENT_RADIUS`].
pub fn nyquist_branch(
    h: &(dyn Fn(Complex64) -> Result<Complex64, StabilityError> + Sync),
    topo: &ChannelTopology,
    i: usize,
    opts: &ContourOptions,
) -> Result<SpectralBranch, StabilityError> {
    if !topo.is_circulant() {
        return Err(StabilityError::NotCirculant);
    }
    let n = topo.n();
    if i < 1 || i > n {
        return Err(StabilityError::BranchIndex { i, n });
    }

    let indent = match h(Complex64::new(0.0, 0.0)) {
        Ok(_) => false,
        Err(StabilityError::Reaction(ReactionError::ResolventSingular { .. })) => true,
        Err(e) => return Err(e),
    };

    let loop_eval = |s: Complex64| -> Result<Complex64, StabilityError> {
        Ok(-opts.flux_gain * h(s)? * circulant_eigenvalue(topo, i, s)?)
    };
    let outcome = trace_curve(&loop_eval, opts, indent)?;

    let branch = SpectralBranch {
        index: i,
        coupling: coupling_factor(n, i),
        contour: outcome.points,
        min_dist_to_minus1: outcome.min_dist,
        refinement_passes: outcome.passes,
    };
    if outcome.violations > 0 {
        return Err(StabilityError::RefinementExhausted {
            branch: i,
            passes: outcome.passes,
            violations: outcome.violations,
        });
    }
    if branch.min_dist_to_minus1 < CRITICAL_DISTANCE_MIN {
        return Err(StabilityError::ThroughCriticalPoint {
            branch: i,
            min_dist: branch.min_dist_to_minus1,
        });
    }
    Ok(branch)
}

/// Per-branch summary inside a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchVerdict {
    /// 1-based branch index.
    pub index: usize,
    pub coupling: f64,
    /// Clockwise-positive encirclements of (−1, j0).
    pub n_enc: i32,
    /// Closed-loop zero count Z = N + P for this branch.
    pub z: i32,
    pub min_dist_to_minus1: f64,
}

/// Resolution bookkeeping aggregated over the traced branches.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictDiagnostics {
    /// Total contour samples across distinct branches.
    pub contour_points: usize,
    /// Largest refinement pass count over branches.
    pub refinement_passes: usize,
    /// Smallest distance of any branch trace to (−1, j0).
    pub min_dist_to_minus1: f64,
    /// Count of distinct equilibria located when no seed was supplied (1 when
    /// the caller pinned the equilibrium with a seed).
    pub equilibria_found: usize,
}

/// The aggregate stability decision.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    /// True iff every branch has Z = 0.
    pub stable: bool,
    /// Open-loop poles with Re ≥ 0 (identical across branches).
    pub p_count: usize,
    /// One record per branch, 1..=n; degenerate partners share results.
    pub branches: Vec<BranchVerdict>,
    pub diagnostics: VerdictDiagnostics,
}

/// Verdict plus everything needed to audit it.
#[derive(Debug, Clone)]
pub struct StabilityAnalysis {
    pub equilibrium: Equilibrium,
    pub verdict: StabilityVerdict,
    /// Traces of the distinct branches (indices 1..=⌊n/2⌋+1).
    pub distinct_branches: Vec<SpectralBranch>,
    /// max over probe frequencies of |det(I−hG) − Π(1−hλ_i)|/(1+|det|).
    pub det_product_residual: f64,
}

/// Options for [`verdict`]/[`analyze`].
#[derive(Debug, Clone, Default)]
pub struct VerdictOptions {
    pub contour: ContourOptions,
    pub newton: NewtonOptions,
    /// Newton seed selecting the equilibrium to analyze. When absent, a seed
    /// grid runs and the equilibrium with the largest ∞-norm wins (the most
    /// active state), deterministically.
    pub x0: Option<Vec<f64>>,
}

/// Deterministic equilibrium selection shared by the verdict pipeline and
/// front ends: an explicit seed pins the equilibrium; otherwise a seed grid
/// runs and the largest-∞-norm solution (the most active state) wins. Also
/// returns how many equilibria the search saw.
pub fn select_equilibrium(
    model: &dyn ReactionModel,
    opts: &VerdictOptions,
) -> Result<(Equilibrium, usize), StabilityError> {
    match &opts.x0 {
        Some(seed) => Ok((find_equilibrium(model, seed, &opts.newton)?, 1)),
        None => {
            let all = find_equilibria(model, &opts.newton);
            let found = all.len();
            let best = all
                .into_iter()
                .max_by(|a, b| {
                    let na = a.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    let nb = b.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    na.total_cmp(&nb)
                })
                .ok_or(StabilityError::NoEquilibrium)?;
            Ok((best, found))
        }
    }
}

/// Full analysis: equilibrium, pole count, distinct branch traces, winding
/// counts, Z = N + P per branch, and the determinant-vs-product cross-check.
pub fn analyze(
    model: &dyn ReactionModel,
    topo: &ChannelTopology,
    opts: &VerdictOptions,
) -> Result<StabilityAnalysis, StabilityError> {
    if !topo.is_circulant() {
        return Err(StabilityError::NotCirculant);
    }
    let (equilibrium, equilibria_found) = select_equilibrium(model, opts)?;
    let p_count = count_rhp_poles(&equilibrium.jacobian)?;

    let jacobian = equilibrium.jacobian.clone();
    let h =
        move |s: Complex64| -> Result<Complex64, StabilityError> { Ok(robot_tf(&jacobian, s)?) };

    let n = topo.n();
    let distinct: Vec<usize> = (1..=distinct_branch_count(n)).collect();
    let traced: Vec<Result<(SpectralBranch, i32), StabilityError>> = distinct
        .par_iter()
        .map(|&i| {
            let branch = nyquist_branch(&h, topo, i, &opts.contour)?;
            let n_enc = winding_number(&branch.closed_polyline(), Complex64::new(-1.0, 0.0))?;
            Ok((branch, n_enc))
        })
        .collect();

    let mut distinct_branches = Vec::with_capacity(distinct.len());
    let mut distinct_n = Vec::with_capacity(distinct.len());
    for result in traced {
        let (branch, n_enc) = result?;
        let z = n_enc + p_count as i32;
        if z < 0 {
            return Err(StabilityError::InconsistentWinding {
                branch: branch.index,
                n_enc,
                p: p_count,
            });
        }
        distinct_n.push(n_enc);
        distinct_branches.push(branch);
    }

    let mut branches = Vec::with_capacity(n);
    for j in 1..=n {
        let source = if j <= distinct_branch_count(n) {
            j
        } else {
            degenerate_partner(n, j)
        };
        let idx = source - 1;
        let n_enc = distinct_n[idx];
        branches.push(BranchVerdict {
            index: j,
            coupling: coupling_factor(n, j),
            n_enc,
            z: n_enc + p_count as i32,
            min_dist_to_minus1: distinct_branches[idx].min_dist_to_minus1,
        });
    }

    let stable = branches.iter().all(|b| b.z == 0);
    let diagnostics = VerdictDiagnostics {
        contour_points: distinct_branches.iter().map(|b| b.contour.len()).sum(),
        refinement_passes: distinct_branches
            .iter()
            .map(|b| b.refinement_passes)
            .max()
            .unwrap_or(0),
        min_dist_to_minus1: distinct_branches
            .iter()
            .map(|b| b.min_dist_to_minus1)
            .fold(f64::INFINITY, f64::min),
        equilibria_found,
    };

    let det_product_residual = cross_check_residual(&equilibrium.jacobian, topo, &opts.contour)?;

    Ok(StabilityAnalysis {
        equilibrium,
        verdict: StabilityVerdict {
            stable,
            p_count,
            branches,
            diagnostics,
        },
        distinct_branches,
        det_product_residual,
    })
}

/// Convenience wrapper returning only the verdict.
pub fn verdict(
    model: &dyn ReactionModel,
    topo: &ChannelTopology,
    opts: &VerdictOptions,
) -> Result<StabilityVerdict, StabilityError> {
    Ok(analyze(model, topo, opts)?.verdict)
}

/// max over a fixed log grid of positive frequencies of the relative gap
/// between the determinant and spectral-product characteristic functions.
fn cross_check_residual(
    a: &RealMatrix,
    topo: &ChannelTopology,
    contour: &ContourOptions,
) -> Result<f64, StabilityError> {
    let lo = contour.omega_min.max(1e-12);
    let hi = contour.omega_max;
    let mut worst = 0.0_f64;
    for idx in 0..CROSS_CHECK_POINTS {
        let frac = idx as f64 / (CROSS_CHECK_POINTS - 1) as f64;
        let omega = lo * (hi / lo).powf(frac);
        let s = Complex64::new(0.0, omega);
        let h = match robot_tf(a, s) {
            Ok(h) => h * contour.flux_gain,
            // A pole exactly on the probe grid: skip the point, the
            // remaining probes still certify the identity.
            Err(ReactionError::ResolventSingular { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let sample = topo.transfer_matrix(s)?;
        let det = char_det(&vec![h; topo.n()], &sample)?;
        let product = char_product(h, topo, s)?;
        let gap = (det - product).norm() / (1.0 + det.norm());
        worst = worst.max(gap);
    }
    Ok(worst)
}
