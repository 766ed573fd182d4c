//! Method-of-lines co-simulation of agents coupled by diffusive channels.
//!
//! Each channel segment is discretized into M cells of width Δr_g = L/M; the
//! M−1 interior nodes evolve under the standard 3-point Laplacian while the
//! two boundary nodes are pinned to the adjacent agents' transported state
//! (or to zero at an absorbing wall). Each agent integrates its reaction
//! vector field plus a flux input assembled from one-sided differences at the
//! adjacent channel ends, scaled by µ_eff/Δr. Time stepping is classic RK4
//! with a fixed step under an explicit-scheme CFL bound.
//!
//! Runs end with a qualitative classification of the perturbation response:
//! the log-slope of the peak envelope of ‖x(t) − x*‖∞ over the trailing
//! window decides Decaying / Oscillating / Diverging, with Undecided as the
//! honest fallback.

use crate::channel::{ChannelError, ChannelTopology, SegmentEnd};
use crate::reaction::ReactionModel;
use thiserror::Error;

/// Minimum cells per segment; coarser grids distort the flux stencil.
pub const MIN_GRID_CELLS: usize = 8;
/// Safety factor applied to the 0.5·Δr_g²/µ explicit diffusion limit.
pub const CFL_SAFETY: f64 = 0.4;
/// Envelope log-slopes below this classify as Decaying (per declared time unit).
pub const DECAY_SLOPE_THRESHOLD: f64 = -1e-4;
/// Envelope log-slopes above this classify as Diverging.
pub const GROWTH_SLOPE_THRESHOLD: f64 = 1e-4;
/// Sustained peaks required before a flat envelope counts as Oscillating.
pub const MIN_OSCILLATION_PEAKS: usize = 3;
/// Fewer recorded samples than this refuse to classify (→ Undecided).
pub const MIN_CLASSIFY_SAMPLES: usize = 100;
/// Window deviations below `floor·(1+‖x*‖∞)` count as converged.
pub const CONVERGENCE_FLOOR: f64 = 1e-12;
/// States beyond this magnitude abort the run as numerically divergent.
pub const OVERFLOW_GUARD: f64 = 1e150;
/// Positive floor applied before taking logs of envelope values.
const ENVELOPE_FLOOR: f64 = 1e-300;

/// Offsets added to the equilibrium when initializing agent states.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// The same offset on every state of every agent.
    Scalar(f64),
    /// One offset per state, applied to every agent (length m).
    Uniform(Vec<f64>),
    /// One offset vector per agent (n rows of length m).
    PerRobot(Vec<Vec<f64>>),
}

impl Default for Perturbation {
    /// +0.1 µM on every state of every agent.
    fn default() -> Self {
        Self::Scalar(0.1)
    }
}

/// How channel cells start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelInit {
    /// Spatially uniform at the equilibrium's transported value, matching
    /// the linearization the frequency-domain verdict tests.
    #[default]
    Equilibrium,
    /// Empty channels, c ≡ 0 everywhere; the transients then include the
    /// initial fill of the medium.
    Zero,
}

/// Time-domain run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Cells per channel segment (M ≥ [`MIN_GRID_CELLS`]).
    pub grid_cells_per_segment: usize,
    /// Fixed RK4 step in the declared time unit.
    pub dt: f64,
    /// Integration horizon.
    pub t_final: f64,
    pub perturbation: Perturbation,
    /// Agent footprint Δr in µm; `None` uses the grid spacing of the first
    /// segment. Sets the flux scale µ_eff/Δr.
    pub robot_width: Option<f64>,
    /// Trailing fraction of the trace used for classification.
    pub window_fraction: f64,
    /// Cap on recorded samples (the run thins its recording to fit).
    pub max_samples: usize,
    /// Number of evenly spaced channel-profile snapshots kept (0 = none).
    pub profile_snapshots: usize,
    /// Initial channel condition.
    pub channel_init: ChannelInit,
}

impl SimConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            grid_cells_per_segment: 32,
            dt,
            t_final,
            perturbation: Perturbation::default(),
            robot_width: None,
            window_fraction: 0.5,
            max_samples: 4000,
            profile_snapshots: 9,
            channel_init: ChannelInit::default(),
        }
    }
}

/// Qualitative verdict on the recorded response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Decaying,
    Oscillating,
    Diverging,
    Undecided,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Decaying => "Decaying",
            Self::Oscillating => "Oscillating",
            Self::Diverging => "Diverging",
            Self::Undecided => "Undecided",
        };
        f.write_str(name)
    }
}

/// Recorded run.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub times: Vec<f64>,
    /// Equilibrium the deviations are measured against.
    pub x_star: Vec<f64>,
    /// `robot_states[sample][robot][state]`.
    pub robot_states: Vec<Vec<Vec<f64>>>,
    /// `(t, profile[segment][interior cell])` snapshots.
    pub channel_profiles: Vec<(f64, Vec<Vec<f64>>)>,
    /// Transported mass per sample: Σ cells·Δr_g + Σ agents (x_d + x_e)·Δr.
    pub mass: Vec<f64>,
    pub classification: Classification,
    /// Fitted envelope log-slope, when a fit was possible.
    pub envelope_rate: Option<f64>,
}

impl SimTrace {
    /// Wraps a scalar series as a single-agent trace with x* = 0, for
    /// exercising the classifier on synthetic signals.
    pub fn from_scalar_series(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "times and values must align");
        let robot_states = values.iter().map(|&v| vec![vec![v]]).collect();
        Self {
            times,
            x_star: vec![0.0],
            robot_states,
            channel_profiles: Vec::new(),
            mass: Vec::new(),
            classification: Classification::Undecided,
            envelope_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("grid needs at least {min} cells per segment, got {m}")]
    TooFewCells { m: usize, min: usize },
    #[error("dt = {dt:.6e} violates the diffusion CFL bound {limit:.6e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("time step must be positive and finite, got {dt}")]
    BadTimeStep { dt: f64 },
    #[error("t_final must be at least one step, got {t_final}")]
    BadDuration { t_final: f64 },
    #[error("window fraction must lie in (0, 1], got {value}")]
    BadWindowFraction { value: f64 },
    #[error("agent width must be positive and finite, got {value}")]
    BadRobotWidth { value: f64 },
    #[error("equilibrium state has {got} entries, model needs {expected}")]
    BadStateDim { expected: usize, got: usize },
    #[error("perturbation vector has {got} entries, expected {expected}")]
    PerturbationLength { expected: usize, got: usize },
    #[error("per-agent perturbation has {got} rows, expected {expected}")]
    PerturbationRobots { expected: usize, got: usize },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("state magnitude {max_abs:.3e} exceeded the overflow guard at t = {t}")]
    StateOverflow { t: f64, max_abs: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// A segment boundary as seen by the diffusion stencil.
#[derive(Debug, Clone, Copy)]
enum BoundaryValue {
    /// Pinned to agent i's transported state.
    Robot(usize),
    /// Absorbing wall, value 0.
    Zero,
}

impl BoundaryValue {
    fn from_end(end: SegmentEnd) -> Self {
        match end {
            SegmentEnd::Robot(i) => Self::Robot(i),
            SegmentEnd::Wall => Self::Zero,
        }
    }
}

/// Precomputed layout and coefficients for one run.
struct SimSystem<'a> {
    model: &'a dyn ReactionModel,
    n: usize,
    m: usize,
    interior: usize,
    mu_eff: f64,
    /// µ_eff/Δr, the flux gain.
    kappa: f64,
    /// Δr in µm.
    robot_width: f64,
    /// Per segment: grid spacing.
    drg: Vec<f64>,
    /// Per segment: (left boundary, right boundary).
    bounds: Vec<(BoundaryValue, BoundaryValue)>,
    /// Per agent: (global cell index, 1/Δr_g) pairs feeding its flux input.
    taps: Vec<Vec<(usize, f64)>>,
}

impl<'a> SimSystem<'a> {
    fn cells_base(&self) -> usize {
        self.n * self.m
    }

    fn boundary_value(&self, b: BoundaryValue, y: &[f64]) -> f64 {
        match b {
            BoundaryValue::Robot(i) => y[i * self.m + self.m - 1],
            BoundaryValue::Zero => 0.0,
        }
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let m = self.m;
        let base = self.cells_base();

        for i in 0..self.n {
            let (robot, rest) = (&y[i * m..i * m + m], &mut out[i * m..i * m + m]);
            self.model.vector_field(robot, rest);
            let y_i = robot[m - 1];
            let mut flux = 0.0;
            for &(cell, inv_drg) in &self.taps[i] {
                flux += (y[cell] - y_i) * inv_drg;
            }
            rest[m - 1] += self.kappa * flux;
        }

        for (j, (&drg, &(left, right))) in self.drg.iter().zip(&self.bounds).enumerate() {
            let coeff = self.mu_eff / (drg * drg);
            let c0 = self.boundary_value(left, y);
            let cm = self.boundary_value(right, y);
            let start = base + j * self.interior;
            for k in 0..self.interior {
                let prev = if k == 0 { c0 } else { y[start + k - 1] };
                let next = if k == self.interior - 1 {
                    cm
                } else {
                    y[start + k + 1]
                };
                out[start + k] = coeff * (prev - 2.0 * y[start + k] + next);
            }
        }
    }

    /// Σ cells·Δr_g + Σ agents (transport states)·Δr. The transported agent
    /// states are the last two (x_d, x_e), or just x_e for 1-state models.
    fn mass(&self, y: &[f64]) -> f64 {
        let base = self.cells_base();
        let mut total = 0.0;
        for (j, &drg) in self.drg.iter().enumerate() {
            let start = base + j * self.interior;
            let cells: f64 = y[start..start + self.interior].iter().sum();
            total += cells * drg;
        }
        let transport_states = self.m.min(2);
        for i in 0..self.n {
            let robot = &y[i * self.m..(i + 1) * self.m];
            let carried: f64 = robot[self.m - transport_states..].iter().sum();
            total += carried * self.robot_width;
        }
        total
    }
}

fn resolve_perturbation(
    perturbation: &Perturbation,
    n: usize,
    m: usize,
) -> Result<Vec<Vec<f64>>, SimError> {
    match perturbation {
        Perturbation::Scalar(v) => Ok(vec![vec![*v; m]; n]),
        Perturbation::Uniform(v) => {
            if v.len() != m {
                return Err(SimError::PerturbationLength {
                    expected: m,
                    got: v.len(),
                });
            }
            Ok(vec![v.clone(); n])
        }
        Perturbation::PerRobot(rows) => {
            if rows.len() != n {
                return Err(SimError::PerturbationRobots {
                    expected: n,
                    got: rows.len(),
                });
            }
            for row in rows {
                if row.len() != m {
                    return Err(SimError::PerturbationLength {
                        expected: m,
                        got: row.len(),
                    });
                }
            }
            Ok(rows.clone())
        }
    }
}

/// Integrates the coupled system from `x_star` + perturbation and classifies
/// the response. Channels start per [`SimConfig::channel_init`]: spatially
/// uniform at the equilibrium's transported value by default, or empty.
pub fn run(
    model: &dyn ReactionModel,
    topo: &ChannelTopology,
    x_star: &[f64],
    cfg: &SimConfig,
) -> Result<SimTrace, SimError> {
    let n = topo.n();
    let m = model.dim();
    if x_star.len() != m {
        return Err(SimError::BadStateDim {
            expected: m,
            got: x_star.len(),
        });
    }
    let cells = cfg.grid_cells_per_segment;
    if cells < MIN_GRID_CELLS {
        return Err(SimError::TooFewCells {
            m: cells,
            min: MIN_GRID_CELLS,
        });
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(SimError::BadTimeStep { dt: cfg.dt });
    }
    if !(cfg.t_final.is_finite() && cfg.t_final >= cfg.dt) {
        return Err(SimError::BadDuration {
            t_final: cfg.t_final,
        });
    }
    if !(cfg.window_fraction > 0.0 && cfg.window_fraction <= 1.0) {
        return Err(SimError::BadWindowFraction {
            value: cfg.window_fraction,
        });
    }

    let mu_eff = topo.mu_eff();
    let drg: Vec<f64> = topo.lengths().iter().map(|&l| l / cells as f64).collect();
    let cfl_limit = drg
        .iter()
        .map(|&d| CFL_SAFETY * d * d / mu_eff)
        .fold(f64::INFINITY, f64::min);
    if cfg.dt > cfl_limit {
        return Err(SimError::CflViolation {
            dt: cfg.dt,
            limit: cfl_limit,
        });
    }

    let robot_width = match cfg.robot_width {
        Some(w) if w.is_finite() && w > 0.0 => w,
        Some(w) => return Err(SimError::BadRobotWidth { value: w }),
        None => drg[0],
    };

    let seg_count = topo.segment_count();
    let mut bounds = Vec::with_capacity(seg_count);
    let mut taps: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let interior = cells - 1;
    let base = n * m;
    for j in 0..seg_count {
        let (start, end) = topo.segment_ends(j);
        bounds.push((BoundaryValue::from_end(start), BoundaryValue::from_end(end)));
        let first_cell = base + j * interior;
        let last_cell = first_cell + interior - 1;
        if let SegmentEnd::Robot(i) = start {
            taps[i].push((first_cell, 1.0 / drg[j]));
        }
        if let SegmentEnd::Robot(i) = end {
            taps[i].push((last_cell, 1.0 / drg[j]));
        }
    }

    let system = SimSystem {
        model,
        n,
        m,
        interior,
        mu_eff,
        kappa: mu_eff / robot_width,
        robot_width,
        drg,
        bounds,
        taps,
    };

    let offsets = resolve_perturbation(&cfg.perturbation, n, m)?;
    let dim = base + seg_count * interior;
    let mut y = vec![0.0; dim];
    for i in 0..n {
        for s in 0..m {
            y[i * m + s] = x_star[s] + offsets[i][s];
        }
    }
    let transported = match cfg.channel_init {
        ChannelInit::Equilibrium => x_star[m - 1],
        ChannelInit::Zero => 0.0,
    };
    for v in &mut y[base..] {
        *v = transported;
    }

    let steps = (cfg.t_final / cfg.dt).ceil() as usize;
    let stride = (steps + 1).div_ceil(cfg.max_samples.max(2)).max(1);
    let snapshot_steps: Vec<usize> = match cfg.profile_snapshots {
        0 => Vec::new(),
        1 => vec![steps],
        k => (0..k)
            .map(|i| ((i as f64 / (k - 1) as f64) * steps as f64).round() as usize)
            .collect(),
    };

    let mut trace = SimTrace {
        times: Vec::new(),
        x_star: x_star.to_vec(),
        robot_states: Vec::new(),
        channel_profiles: Vec::new(),
        mass: Vec::new(),
        classification: Classification::Undecided,
        envelope_rate: None,
    };

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];

    let record = |trace: &mut SimTrace, step: usize, y: &[f64]| -> Result<(), SimError> {
        let t = step as f64 * cfg.dt;
        let mut max_abs = 0.0_f64;
        for &v in y {
            if !v.is_finite() {
                return Err(SimError::NonFiniteState { t });
            }
            max_abs = max_abs.max(v.abs());
        }
        if max_abs > OVERFLOW_GUARD {
            return Err(SimError::StateOverflow { t, max_abs });
        }
        trace.times.push(t);
        trace
            .robot_states
            .push((0..n).map(|i| y[i * m..(i + 1) * m].to_vec()).collect());
        trace.mass.push(system.mass(y));
        if snapshot_steps.contains(&step) {
            let profile = (0..seg_count)
                .map(|j| {
                    let start = base + j * interior;
                    y[start..start + interior].to_vec()
                })
                .collect();
            trace.channel_profiles.push((t, profile));
        }
        Ok(())
    };

    record(&mut trace, 0, &y)?;
    for step in 1..=steps {
        system.rhs(&y, &mut k1);
        for i in 0..dim {
            scratch[i] = y[i] + 0.5 * cfg.dt * k1[i];
        }
        system.rhs(&scratch, &mut k2);
        for i in 0..dim {
            scratch[i] = y[i] + 0.5 * cfg.dt * k2[i];
        }
        system.rhs(&scratch, &mut k3);
        for i in 0..dim {
            scratch[i] = y[i] + cfg.dt * k3[i];
        }
        system.rhs(&scratch, &mut k4);
        let w = cfg.dt / 6.0;
        for i in 0..dim {
            y[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if step % stride == 0 || step == steps {
            record(&mut trace, step, &y)?;
        }
    }

    let (classification, rate) = classify(&trace, cfg.window_fraction);
    trace.classification = classification;
    trace.envelope_rate = rate;
    Ok(trace)
}

/// Classifies the trailing window of a trace by the log-slope of the peak
/// envelope of ‖x(t) − x*‖∞.
///
/// Returns Undecided (never an error) when the trace is too short or the
/// evidence is ambiguous. The second value is the fitted slope when a fit
/// was possible.
pub fn classify(trace: &SimTrace, window_fraction: f64) -> (Classification, Option<f64>) {
    let times = &trace.times;
    if times.len() < 2 {
        return (Classification::Undecided, None);
    }
    let deviations: Vec<f64> = trace
        .robot_states
        .iter()
        .map(|robots| {
            robots
                .iter()
                .flat_map(|x| x.iter().zip(&trace.x_star))
                .map(|(v, star)| (v - star).abs())
                .fold(0.0_f64, f64::max)
        })
        .collect();
    if deviations.iter().any(|d| !d.is_finite()) {
        return (Classification::Diverging, None);
    }

    let t_end = *times.last().unwrap();
    let t_start = t_end - window_fraction.clamp(0.0, 1.0) * (t_end - times[0]);
    let from = times.partition_point(|&t| t < t_start);
    let wt = &times[from..];
    let wd = &deviations[from..];

    let scale = 1.0 + trace.x_star.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let peak_dev = wd.iter().fold(0.0_f64, |a, &d| a.max(d));
    if peak_dev <= CONVERGENCE_FLOOR * scale {
        return (Classification::Decaying, None);
    }
    if times.len() < MIN_CLASSIFY_SAMPLES || wt.len() < 3 {
        return (Classification::Undecided, None);
    }

    // Local maxima of the deviation series (plateau-tolerant on the right).
    let mut peak_t = Vec::new();
    let mut peak_v = Vec::new();
    for k in 1..wd.len() - 1 {
        if wd[k] > wd[k - 1] && wd[k] >= wd[k + 1] {
            peak_t.push(wt[k]);
            peak_v.push(wd[k]);
        }
    }

    let (slope, peaks) = if peak_t.len() >= 2 {
        (log_slope(&peak_t, &peak_v), peak_t.len())
    } else {
        (log_slope(wt, wd), peak_t.len())
    };

    let classification = if slope < DECAY_SLOPE_THRESHOLD {
        Classification::Decaying
    } else if slope > GROWTH_SLOPE_THRESHOLD {
        Classification::Diverging
    } else if peaks >= MIN_OSCILLATION_PEAKS {
        Classification::Oscillating
    } else {
        Classification::Undecided
    };
    (classification, Some(slope))
}

/// Least-squares slope of ln(values) against times.
fn log_slope(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|&v| v.max(ENVELOPE_FLOOR).ln()).collect();
    let t_mean = times.iter().sum::<f64>() / n;
    let l_mean = logs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &l) in times.iter().zip(&logs) {
        num += (t - t_mean) * (l - l_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
