//! Stability analysis and time-domain co-simulation of rings of chemical
//! reaction agents coupled by 1-D diffusion channels.

// Matrix kernels and grid stencils throughout this crate address several
// buffers by one shared index; iterator rewrites would obscure the math.
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod numerics;
pub mod reaction;
pub mod simulator;
pub mod stability;
pub mod sweep;

pub use channel::{BoundaryKind, ChannelSample, ChannelTopology, TimeUnit};
pub use numerics::{ComplexMatrix, RealMatrix, Spectrum};
pub use reaction::{ArdParams, Equilibrium, NewtonOptions, ReactionModel};
pub use simulator::{ChannelInit, Classification, Perturbation, SimConfig, SimError, SimTrace};
pub use stability::{
    analyze, verdict, ContourOptions, SpectralBranch, StabilityAnalysis, StabilityError,
    StabilityVerdict, VerdictOptions,
};
pub use sweep::{SweepError, SweepOutcome, SweepRecord};
