//! Independent checks of closed-loop equilibria: KKT residuals against the
//! centralized problem, a centralized reference solver, initial load
//! balancing and economic reporting.

mod economics;
mod kkt;

pub use economics::{economic_report, EconomicSample};
pub use kkt::{
    kkt_from_input, kkt_residuals, solve_centralized, solve_centralized_input, CentralizedSolution, KktInput, KktReport,
};

use crate::netmodel::{Network, NodeKind};
use crate::physics::Grid;
use crate::scalar::Real;

/// Loads that make `(θ₀, U₀)` a power-flow solution with zero generation:
/// `p_ℓ = -p` everywhere and `q_ℓ = -q` at load nodes (zero elsewhere).
pub fn balance_initial_loads<T: Real>(net: &Network<T>, theta: &[T], voltage: &[T]) -> (Vec<T>, Vec<T>) {
    let grid = Grid::new(net);
    let (p, q) = grid.injections(theta, voltage);
    let p_load = p.iter().map(|&v| -v).collect();
    let q_load = net
        .nodes
        .iter()
        .zip(&q)
        .map(|(n, &v)| if n.kind == NodeKind::L { -v } else { T::zero() })
        .collect();
    (p_load, q_load)
}
