//! Nonlinear reaction models hosted by each agent: vector fields, equilibria
//! via damped Newton iteration, Jacobians, and the scalar transfer function
//! h(s) = C(sI−A)⁻¹B of the linearized agent.
//!
//! Convention: the last state component is the signal concentration exchanged
//! with the channels, so B = (0,…,0,1)ᵀ and C = (0,…,0,1) are implicit.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{lu_solve, NumericsError, RealMatrix};

/// Central-difference step scale for the fallback Jacobian.
pub const FD_STEP_SCALE: f64 = 1e-6;

/// A converged equilibrium must beat this ‖f(x*)‖∞.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-9;

/// Newton keeps polishing below the acceptance tolerance down to this target.
const NEWTON_POLISH_TARGET: f64 = 1e-13;

/// Abort when the damped step shrinks below this ∞-norm.
const NEWTON_STEP_FLOOR: f64 = 1e-14;

/// Minimum damping factor 2⁻²⁰.
const NEWTON_MIN_DAMPING: f64 = 1.0 / (1 << 20) as f64;

/// Errors from model construction, equilibrium search, and h(s) evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReactionError {
    #[error("unknown reaction model '{name}'")]
    UnknownModel { name: String },
    #[error("model '{model}' is missing parameter '{key}'")]
    MissingParam { model: String, key: String },
    #[error("model '{model}' does not accept parameter '{key}'")]
    UnknownParam { model: String, key: String },
    #[error("model '{model}' parameter '{key}' must be positive and finite, got {value}")]
    BadParam {
        model: String,
        key: String,
        value: f64,
    },
    #[error("initial guess component {index} is negative: {value}")]
    InvalidStart { index: usize, value: f64 },
    #[error("Jacobian became singular at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error(
        "Newton iteration did not converge after {iterations} iterations \
         (best residual {best_residual:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
    },
    #[error("converged state component {index} is negative: {value:.3e}")]
    NegativeState { index: usize, value: f64 },
    #[error("s = {s_re:.6e}+{s_im:.6e}j is a pole of the agent resolvent")]
    ResolventSingular { s_re: f64, s_im: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A nonlinear vector field x ↦ f(x) with named dimension and an optional
/// analytic Jacobian.
pub trait ReactionModel: Send + Sync {
    /// State dimension m.
    fn dim(&self) -> usize;
    /// Registry-style identifier, used in diagnostics.
    fn name(&self) -> &str;
    /// Writes f(x) into `out`; both slices must have length `dim()`.
    fn vector_field(&self, x: &[f64], out: &mut [f64]);
    /// Analytic ∂f/∂x at `x`, when the model provides one.
    fn analytic_jacobian(&self, _x: &[f64]) -> Option<RealMatrix> {
        None
    }

    /// Convenience allocation wrapper around [`ReactionModel::vector_field`].
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.vector_field(x, &mut out);
        out
    }
}

/// Rate constants of the four-state activator–repressor–diffuser circuit.
///
/// Units: degradation/transport rates in inverse time, production rates in
/// µM per time, Michaelis constants in µM; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArdParams {
    pub delta_a: f64,
    pub delta_r: f64,
    pub delta_d: f64,
    pub gamma_a: f64,
    pub gamma_r: f64,
    pub gamma_d: f64,
    pub k_a: f64,
    pub k_r: f64,
    pub k_d: f64,
    /// Membrane exchange rate between the internal and external signal pools;
    /// conventionally 0.05 min⁻¹.
    pub k: f64,
}

/// Conventional membrane exchange rate used when a config omits `k`.
pub const ARD_DEFAULT_K: f64 = 0.05;

impl ArdParams {
    pub fn validate(&self) -> Result<(), ReactionError> {
        let fields = [
            ("delta_a", self.delta_a),
            ("delta_r", self.delta_r),
            ("delta_d", self.delta_d),
            ("gamma_a", self.gamma_a),
            ("gamma_r", self.gamma_r),
            ("gamma_d", self.gamma_d),
            ("K_a", self.k_a),
            ("K_r", self.k_r),
            ("K_d", self.k_d),
            ("k", self.k),
        ];
        for (key, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ReactionError::BadParam {
                    model: "ard".to_string(),
                    key: key.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Hill activation x²/(K²+x²).
#[inline]
fn hill_up(x: f64, k: f64) -> f64 {
    let k2 = k * k;
    x * x / (k2 + x * x)
}

/// Hill repression K²/(K²+x²).
#[inline]
fn hill_down(x: f64, k: f64) -> f64 {
    let k2 = k * k;
    k2 / (k2 + x * x)
}

/// d/dx of [`hill_up`]: 2K²x/(K²+x²)².
#[inline]
fn hill_up_prime(x: f64, k: f64) -> f64 {
    let k2 = k * k;
    let den = k2 + x * x;
    2.0 * k2 * x / (den * den)
}

/// d/dx of [`hill_down`]: −2K²x/(K²+x²)².
#[inline]
fn hill_down_prime(x: f64, k: f64) -> f64 {
    -hill_up_prime(x, k)
}

/// Four-state activator–repressor–diffuser circuit.
///
/// States: (x_a, x_r, x_d, x_e) = activator, repressor, internal signal,
/// external signal. The external pool exchanges with the channels.
#[derive(Debug, Clone)]
pub struct ArdModel {
    params: ArdParams,
}

impl ArdModel {
    pub fn new(params: ArdParams) -> Result<Self, ReactionError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &ArdParams {
        &self.params
    }
}

impl ReactionModel for ArdModel {
    fn dim(&self) -> usize {
        4
    }

    fn name(&self) -> &str {
        "ard"
    }

    fn vector_field(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), 4);
        debug_assert_eq!(out.len(), 4);
        let p = &self.params;
        let (xa, xr, xd, xe) = (x[0], x[1], x[2], x[3]);
        out[0] = -p.delta_a * xa + p.gamma_a * hill_up(xa, p.k_a) * hill_down(xr, p.k_r);
        out[1] = -p.delta_r * xr + p.gamma_r * hill_up(xa, p.k_a) * hill_down(xd, p.k_d);
        out[2] = -p.delta_d * xd + p.gamma_d * hill_down(xr, p.k_r) + p.k * (xe - xd);
        out[3] = p.k * (xd - xe);
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<RealMatrix> {
        let p = &self.params;
        let (xa, xr, xd, xe) = (x[0], x[1], x[2], x[3]);
        let _ = xe;
        let mut j = RealMatrix::zeros(4, 4);
        j.set(
            0,
            0,
            -p.delta_a + p.gamma_a * hill_up_prime(xa, p.k_a) * hill_down(xr, p.k_r),
        );
        j.set(
            0,
            1,
            p.gamma_a * hill_up(xa, p.k_a) * hill_down_prime(xr, p.k_r),
        );
        j.set(
            1,
            0,
            p.gamma_r * hill_up_prime(xa, p.k_a) * hill_down(xd, p.k_d),
        );
        j.set(1, 1, -p.delta_r);
        j.set(
            1,
            2,
            p.gamma_r * hill_up(xa, p.k_a) * hill_down_prime(xd, p.k_d),
        );
        j.set(2, 1, p.gamma_d * hill_down_prime(xr, p.k_r));
        j.set(2, 2, -p.delta_d - p.k);
        j.set(2, 3, p.k);
        j.set(3, 2, p.k);
        j.set(3, 3, -p.k);
        Some(j)
    }
}

/// One-state pure decay f(x) = −δx; the analytically solvable test model.
#[derive(Debug, Clone)]
pub struct LinearDecayModel {
    delta: f64,
}

impl LinearDecayModel {
    pub fn new(delta: f64) -> Result<Self, ReactionError> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(ReactionError::BadParam {
                model: "linear_decay".to_string(),
                key: "delta".to_string(),
                value: delta,
            });
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl ReactionModel for LinearDecayModel {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "linear_decay"
    }

    fn vector_field(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.delta * x[0];
    }

    fn analytic_jacobian(&self, _x: &[f64]) -> Option<RealMatrix> {
        RealMatrix::new(1, 1, vec![-self.delta]).ok()
    }
}

/// Affine field f(x) = A·x + b. Not exposed through the config registry;
/// exists so tests and batteries can construct arbitrary linearly coupled
/// agents with known spectra.
#[derive(Debug, Clone)]
pub struct AffineModel {
    a: RealMatrix,
    b: Vec<f64>,
    name: String,
}

impl AffineModel {
    /// Panics if `a` is not square or `b` has the wrong length.
    pub fn new(a: RealMatrix, b: Vec<f64>) -> Self {
        assert!(a.is_square(), "affine model needs a square matrix");
        assert_eq!(a.rows(), b.len(), "offset length must match dimension");
        Self {
            a,
            b,
            name: "affine".to_string(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.a
    }
}

impl ReactionModel for AffineModel {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn vector_field(&self, x: &[f64], out: &mut [f64]) {
        let n = self.a.rows();
        for r in 0..n {
            let mut acc = self.b[r];
            for c in 0..n {
                acc += self.a.get(r, c) * x[c];
            }
            out[r] = acc;
        }
    }

    fn analytic_jacobian(&self, _x: &[f64]) -> Option<RealMatrix> {
        Some(self.a.clone())
    }
}

/// Builds a model from its registry name and a parameter map; unknown names,
/// unknown keys, missing keys, and non-positive values are all rejected.
pub fn model_from_config(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Box<dyn ReactionModel>, ReactionError> {
    match name {
        "ard" => {
            let allowed = [
                "delta_a", "delta_r", "delta_d", "gamma_a", "gamma_r", "gamma_d", "K_a", "K_r",
                "K_d", "k",
            ];
            for key in params.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(ReactionError::UnknownParam {
                        model: name.to_string(),
                        key: key.clone(),
                    });
                }
            }
            let get = |key: &str| -> Result<f64, ReactionError> {
                params
                    .get(key)
                    .copied()
                    .ok_or_else(|| ReactionError::MissingParam {
                        model: name.to_string(),
                        key: key.to_string(),
                    })
            };
            let p = ArdParams {
                delta_a: get("delta_a")?,
                delta_r: get("delta_r")?,
                delta_d: get("delta_d")?,
                gamma_a: get("gamma_a")?,
                gamma_r: get("gamma_r")?,
                gamma_d: get("gamma_d")?,
                k_a: get("K_a")?,
                k_r: get("K_r")?,
                k_d: get("K_d")?,
                k: params.get("k").copied().unwrap_or(ARD_DEFAULT_K),
            };
            Ok(Box::new(ArdModel::new(p)?))
        }
        "linear_decay" => {
            for key in params.keys() {
                if key != "delta" {
                    return Err(ReactionError::UnknownParam {
                        model: name.to_string(),
                        key: key.clone(),
                    });
                }
            }
            let delta =
                params
                    .get("delta")
                    .copied()
                    .ok_or_else(|| ReactionError::MissingParam {
                        model: name.to_string(),
                        key: "delta".to_string(),
                    })?;
            Ok(Box::new(LinearDecayModel::new(delta)?))
        }
        _ => Err(ReactionError::UnknownModel {
            name: name.to_string(),
        }),
    }
}

/// Central finite-difference Jacobian with step 1e−6·(1+|x_j|) per column.
pub fn fd_jacobian(model: &dyn ReactionModel, x: &[f64]) -> RealMatrix {
    let m = model.dim();
    let mut j = RealMatrix::zeros(m, m);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let mut fp = vec![0.0; m];
    let mut fm = vec![0.0; m];
    for col in 0..m {
        let h = FD_STEP_SCALE * (1.0 + x[col].abs());
        xp[col] = x[col] + h;
        xm[col] = x[col] - h;
        model.vector_field(&xp, &mut fp);
        model.vector_field(&xm, &mut fm);
        for row in 0..m {
            j.set(row, col, (fp[row] - fm[row]) / (2.0 * h));
        }
        xp[col] = x[col];
        xm[col] = x[col];
    }
    j
}

/// ∂f/∂x at `x`: the model's analytic Jacobian when available, otherwise
/// central finite differences.
pub fn jacobian(model: &dyn ReactionModel, x: &[f64]) -> RealMatrix {
    model
        .analytic_jacobian(x)
        .unwrap_or_else(|| fd_jacobian(model, x))
}

/// An equilibrium point with its certification data.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// The state x* with ‖f(x*)‖∞ = `residual`.
    pub x: Vec<f64>,
    pub residual: f64,
    /// ∂f/∂x evaluated at x*.
    pub jacobian: RealMatrix,
}

/// Knobs of the damped Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Acceptance tolerance on ‖f(x*)‖∞.
    pub residual_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            residual_tol: EQUILIBRIUM_RESIDUAL_TOL,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Damped Newton iteration on f(x) = 0 from `x0`.
///
/// Steps solve J·Δ = −f; the step is halved (down to 2⁻²⁰) while the residual
/// increases. Converged points are checked for nonnegativity: components
/// below −1e−9 are rejected, and tiny negative roundoff is clamped to zero.
pub fn find_equilibrium(
    model: &dyn ReactionModel,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<Equilibrium, ReactionError> {
    const NEGATIVITY_TOL: f64 = 1e-9;
    for (index, &value) in x0.iter().enumerate() {
        if value < 0.0 {
            return Err(ReactionError::InvalidStart { index, value });
        }
    }
    let m = model.dim();
    assert_eq!(
        x0.len(),
        m,
        "initial guess length must match model dimension"
    );

    let mut x = x0.to_vec();
    let mut f = vec![0.0; m];
    model.vector_field(&x, &mut f);
    let mut residual = inf_norm(&f);
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        if residual <= NEWTON_POLISH_TARGET {
            break;
        }
        iterations = iter + 1;
        let j = jacobian(model, &x).to_complex();
        let rhs: Vec<Complex64> = f.iter().map(|&v| Complex64::new(-v, 0.0)).collect();
        let step = match lu_solve(&j, &rhs) {
            Ok(step) => step,
            Err(NumericsError::SingularMatrix { .. }) => {
                return Err(ReactionError::SingularJacobian { iteration: iter })
            }
            Err(e) => return Err(e.into()),
        };
        let step: Vec<f64> = step.iter().map(|z| z.re).collect();

        let mut damping = 1.0;
        let mut candidate = vec![0.0; m];
        let mut f_candidate = vec![0.0; m];
        loop {
            for i in 0..m {
                candidate[i] = x[i] + damping * step[i];
            }
            model.vector_field(&candidate, &mut f_candidate);
            let r_candidate = inf_norm(&f_candidate);
            if r_candidate.is_finite() && (r_candidate <= residual || damping <= NEWTON_MIN_DAMPING)
            {
                x.copy_from_slice(&candidate);
                f.copy_from_slice(&f_candidate);
                residual = r_candidate;
                break;
            }
            damping *= 0.5;
        }
        if damping * inf_norm(&step) < NEWTON_STEP_FLOOR {
            break;
        }
    }

    if residual.is_nan() || residual > opts.residual_tol {
        return Err(ReactionError::NoConvergence {
            iterations,
            best_residual: residual,
        });
    }
    for (index, value) in x.iter_mut().enumerate() {
        if *value < -NEGATIVITY_TOL {
            return Err(ReactionError::NegativeState {
                index,
                value: *value,
            });
        }
        if *value < 0.0 {
            *value = 0.0;
        }
    }
    let jac = jacobian(model, &x);
    Ok(Equilibrium {
        x,
        residual,
        jacobian: jac,
    })
}

/// Grid values used to seed the multi-equilibrium search.
pub const SEED_GRID_VALUES: [f64; 5] = [0.1, 1.0, 5.0, 10.0, 20.0];

/// Cap on the number of seeds the grid search will run.
pub const SEED_GRID_CAP: usize = 625;

/// Runs [`find_equilibrium`] from a coarse grid of seeds ({0.1, 1, 5, 10, 20}
/// per coordinate, strided down to at most 625 seeds), deduplicating results
/// within 1e−6 ∞-norm. Failed seeds are skipped; the returned order is
/// deterministic (first hit in seed order wins).
pub fn find_equilibria(model: &dyn ReactionModel, opts: &NewtonOptions) -> Vec<Equilibrium> {
    const DEDUP_TOL: f64 = 1e-6;
    let m = model.dim();
    let total: usize = SEED_GRID_VALUES.len().pow(m as u32);
    let stride = total.div_ceil(SEED_GRID_CAP);
    let seeds: Vec<Vec<f64>> = (0..total)
        .step_by(stride)
        .map(|mut idx| {
            let mut seed = vec![0.0; m];
            for slot in seed.iter_mut() {
                *slot = SEED_GRID_VALUES[idx % SEED_GRID_VALUES.len()];
                idx /= SEED_GRID_VALUES.len();
            }
            seed
        })
        .collect();

    let found: Vec<Option<Equilibrium>> = seeds
        .par_iter()
        .map(|seed| find_equilibrium(model, seed, opts).ok())
        .collect();

    let mut distinct: Vec<Equilibrium> = Vec::new();
    for eq in found.into_iter().flatten() {
        let duplicate = distinct.iter().any(|kept| {
            kept.x
                .iter()
                .zip(eq.x.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < DEDUP_TOL
        });
        if !duplicate {
            distinct.push(eq);
        }
    }
    distinct
}

/// h(s) = C(sI−A)⁻¹B with B = e_m, C = e_mᵀ: the last component of the
/// resolvent solve against the unit input.
pub fn robot_tf(a: &RealMatrix, s: Complex64) -> Result<Complex64, ReactionError> {
    assert!(a.is_square(), "transfer function needs a square Jacobian");
    let m = a.rows();
    let pencil = a.resolvent_pencil(s);
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    rhs[m - 1] = Complex64::new(1.0, 0.0);
    match lu_solve(&pencil, &rhs) {
        Ok(x) => Ok(x[m - 1]),
        Err(NumericsError::SingularMatrix { .. }) => Err(ReactionError::ResolventSingular {
            s_re: s.re,
            s_im: s.im,
        }),
        Err(e) => Err(e.into()),
    }
}
