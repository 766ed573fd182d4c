//! Shared fixtures for the benchmark suite: rings, agents, and traced
//! polylines sized like real verdict workloads, so the numbers track what
//! the batch commands actually spend their time on.

use mc_core::channel::{ChannelTopology, TimeUnit};
use mc_core::reaction::{AffineModel, ArdModel, ArdParams};
use mc_core::RealMatrix;

/// Ring of `n` agents joined by 50 µm segments at gut-like diffusivity,
/// the geometry scale of the reference circuit experiments.
pub fn bench_ring(n: usize) -> ChannelTopology {
    ChannelTopology::ring_uniform(n, 50.0, 83.0, TimeUnit::Minutes).unwrap()
}

/// A saturating four-state circuit with a well-conditioned equilibrium;
/// exercises the Newton solve, the eigensolver, and all four Hill-term
/// derivative paths in one verdict.
pub fn bench_circuit() -> ArdModel {
    ArdModel::new(ArdParams {
        delta_a: 0.03,
        delta_r: 0.02,
        delta_d: 0.025,
        gamma_a: 2.2,
        gamma_r: 3.1,
        gamma_d: 1.4,
        k_a: 9.0,
        k_r: 11.0,
        k_d: 10.0,
        k: 0.05,
    })
    .unwrap()
}

/// A leaky exchange pair (eigenvalues −0.1 and −1.1) whose slow mode drains
/// through the channel; the standard probe for simulator stepping cost.
pub fn bench_exchange_pair() -> AffineModel {
    AffineModel::new(
        RealMatrix::new(2, 2, vec![-0.6, 0.5, 0.5, -0.6]).unwrap(),
        vec![0.0, 0.0],
    )
    .with_name("exchange-pair")
}
