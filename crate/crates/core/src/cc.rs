//! Cell-coordinator price and consensus dynamics over the extended,
//! weighted communication graph.

use ndarray::Array2;

use crate::error::Result;
use crate::netmodel::{boundary_weight, check_kappa, Gains, Network};
use crate::scalar::Real;

/// Sparse weighted incidence `D_c⁺`: edge `e = (i, j)` has `+1` at `i` and
/// `-w_e` at `j`, with `w_e = 1` inside cells and `η_ij` across them.
#[derive(Clone, Debug, PartialEq)]
pub struct CommGraph<T> {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<T>,
    n_intra: usize,
    boundary_cells: Vec<(usize, usize)>,
}

impl<T: Real> CommGraph<T> {
    pub fn new(net: &Network<T>, kappa: &[T]) -> Result<Self> {
        let mut g = Self {
            n_nodes: net.n_nodes(),
            edges: net.all_comm_edges(),
            weights: vec![T::one(); net.comm_edges.len() + net.boundary_edges.len()],
            n_intra: net.comm_edges.len(),
            boundary_cells: net
                .boundary_edges
                .iter()
                .map(|&(i, j)| (net.nodes[i].cell, net.nodes[j].cell))
                .collect(),
        };
        check_kappa(kappa, net.n_cells)?;
        g.rebuild_boundary_weights(kappa);
        Ok(g)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Refreshes boundary weights from the current participation factors.
    /// Caller guarantees `κ > 0`.
    pub fn rebuild_boundary_weights(&mut self, kappa: &[T]) {
        for (e, &(ci, cj)) in self.boundary_cells.iter().enumerate() {
            self.weights[self.n_intra + e] = boundary_weight(kappa, ci, cj);
        }
    }

    /// `out = D_c⁺ ν`.
    pub fn apply(&self, nu: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            out[i] += nu[e];
            out[j] -= self.weights[e] * nu[e];
        }
    }

    /// `out = (D_c⁺)ᵀ λ`.
    pub fn apply_transpose(&self, lambda: &[T], out: &mut [T]) {
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            out[e] = lambda[i] - self.weights[e] * lambda[j];
        }
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut d = Array2::zeros((self.n_nodes, self.edges.len()));
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            d[[i, e]] += T::one();
            d[[j, e]] -= self.weights[e];
        }
        d
    }
}

/// Cell-coordinator right-hand side:
/// `τ_λ λ̇ = -p_g + φ + p_ℓ - D_c⁺ ν` and `τ_ν ν̇ = (D_c⁺)ᵀ λ`.
/// `p_gen` is indexed by node (zero at load nodes).
#[allow(clippy::too_many_arguments)]
pub fn cc_rhs<T: Real>(
    graph: &CommGraph<T>,
    lambda: &[T],
    nu: &[T],
    p_gen: &[T],
    phi: &[T],
    p_load: &[T],
    gains: &Gains<T>,
    dlambda: &mut [T],
    dnu: &mut [T],
) {
    graph.apply(nu, dlambda);
    for i in 0..lambda.len() {
        dlambda[i] = (-p_gen[i] + phi[i] + p_load[i] - dlambda[i]) / gains.tau_lambda;
    }
    graph.apply_transpose(lambda, dnu);
    for v in dnu.iter_mut() {
        *v /= gains.tau_nu;
    }
}
