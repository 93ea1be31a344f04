//! Producer (PPO) primal-dual controller: generation setpoints, excitation
//! and inverter voltages, and projected multipliers for their box limits.

use serde::{Deserialize, Serialize};

use crate::netmodel::{Bounds, Gains, Network, NodeKind};
use crate::scalar::Real;

/// `⟨x⟩⁺_μ`: `x` unless the multiplier sits at zero and `x` would push it negative.
#[inline]
pub fn proj_plus<T: Real>(x: T, mu: T) -> T {
    if mu > T::zero() || x >= T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn proj_plus_vec<T: Real>(x: &[T], mu: &[T]) -> Vec<T> {
    x.iter().zip(mu).map(|(&x, &m)| proj_plus(x, m)).collect()
}

/// Separable convex generation cost; `k` indexes generating nodes.
pub trait ConvexCost<T: Real> {
    fn value(&self, k: usize, p: T) -> T;
    /// Must be nondecreasing in `p`.
    fn gradient(&self, k: usize, p: T) -> T;
}

/// `C_k(p) = p² / (2 w_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost<T> {
    pub weights: Vec<T>,
}

impl<T: Real> ConvexCost<T> for QuadraticCost<T> {
    fn value(&self, k: usize, p: T) -> T {
        p * p / (T::lit(2.0) * self.weights[k])
    }

    fn gradient(&self, k: usize, p: T) -> T {
        p / self.weights[k]
    }
}

pub fn cost_gradient<T: Real, C: ConvexCost<T>>(cost: &C, p_g: &[T]) -> Vec<T> {
    p_g.iter().enumerate().map(|(k, &p)| cost.gradient(k, p)).collect()
}

/// Controller state of all producers. `p_g` and its multipliers are indexed
/// by generating node (ascending node order), `u_exc` by `G` node and `u_inv`
/// by `I` node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoState<T> {
    pub p_g: Vec<T>,
    pub u_exc: Vec<T>,
    pub u_inv: Vec<T>,
    pub mu_g_lo: Vec<T>,
    pub mu_g_hi: Vec<T>,
    pub mu_exc_lo: Vec<T>,
    pub mu_exc_hi: Vec<T>,
    pub mu_inv_lo: Vec<T>,
    pub mu_inv_hi: Vec<T>,
}

impl<T: Real> PpoState<T> {
    pub fn zeros(n_gen: usize, n_g: usize, n_i: usize) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            p_g: z(n_gen),
            u_exc: z(n_g),
            u_inv: z(n_i),
            mu_g_lo: z(n_gen),
            mu_g_hi: z(n_gen),
            mu_exc_lo: z(n_g),
            mu_exc_hi: z(n_g),
            mu_inv_lo: z(n_i),
            mu_inv_hi: z(n_i),
        }
    }

    pub fn as_view(&self) -> PpoView<'_, T> {
        PpoView {
            p_g: &self.p_g,
            u_exc: &self.u_exc,
            u_inv: &self.u_inv,
            mu_g_lo: &self.mu_g_lo,
            mu_g_hi: &self.mu_g_hi,
            mu_exc_lo: &self.mu_exc_lo,
            mu_exc_hi: &self.mu_exc_hi,
            mu_inv_lo: &self.mu_inv_lo,
            mu_inv_hi: &self.mu_inv_hi,
        }
    }

    pub fn as_view_mut(&mut self) -> PpoViewMut<'_, T> {
        PpoViewMut {
            p_g: &mut self.p_g,
            u_exc: &mut self.u_exc,
            u_inv: &mut self.u_inv,
            mu_g_lo: &mut self.mu_g_lo,
            mu_g_hi: &mut self.mu_g_hi,
            mu_exc_lo: &mut self.mu_exc_lo,
            mu_exc_hi: &mut self.mu_exc_hi,
            mu_inv_lo: &mut self.mu_inv_lo,
            mu_inv_hi: &mut self.mu_inv_hi,
        }
    }
}

/// Borrowed PPO state, typically slices of the flat simulator state.
#[derive(Clone, Copy, Debug)]
pub struct PpoView<'a, T> {
    pub p_g: &'a [T],
    pub u_exc: &'a [T],
    pub u_inv: &'a [T],
    pub mu_g_lo: &'a [T],
    pub mu_g_hi: &'a [T],
    pub mu_exc_lo: &'a [T],
    pub mu_exc_hi: &'a [T],
    pub mu_inv_lo: &'a [T],
    pub mu_inv_hi: &'a [T],
}

#[derive(Debug)]
pub struct PpoViewMut<'a, T> {
    pub p_g: &'a mut [T],
    pub u_exc: &'a mut [T],
    pub u_inv: &'a mut [T],
    pub mu_g_lo: &'a mut [T],
    pub mu_g_hi: &'a mut [T],
    pub mu_exc_lo: &'a mut [T],
    pub mu_exc_hi: &'a mut [T],
    pub mu_inv_lo: &'a mut [T],
    pub mu_inv_hi: &'a mut [T],
}

/// Static data of all producers: which nodes they control and their limits.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoBlock<T, C = QuadraticCost<T>> {
    /// Node index of each generating node.
    pub gen_nodes: Vec<usize>,
    pub g_nodes: Vec<usize>,
    pub i_nodes: Vec<usize>,
    /// Owning producer of each generating node.
    pub owner: Vec<usize>,
    pub pg_bounds: Vec<Bounds<T>>,
    pub exc_bounds: Vec<Bounds<T>>,
    pub inv_bounds: Vec<Bounds<T>>,
    pub cost: C,
}

impl<T: Real> PpoBlock<T> {
    /// Producer data with the quadratic costs stored in the network.
    pub fn from_network(net: &Network<T>) -> Self {
        let gen_nodes = net.generating_nodes();
        let g_nodes = net.nodes_of_kind(NodeKind::G);
        let i_nodes = net.nodes_of_kind(NodeKind::I);
        let unbounded = Bounds::new(T::neg_infinity(), T::infinity());
        let vb = |i: usize| net.nodes[i].voltage_bounds.unwrap_or(unbounded);
        Self {
            owner: gen_nodes.iter().map(|&i| net.nodes[i].ppo.unwrap_or(0)).collect(),
            pg_bounds: gen_nodes
                .iter()
                .map(|&i| net.nodes[i].pg_bounds.unwrap_or(unbounded))
                .collect(),
            exc_bounds: g_nodes.iter().map(|&i| vb(i)).collect(),
            inv_bounds: i_nodes.iter().map(|&i| vb(i)).collect(),
            cost: QuadraticCost {
                weights: gen_nodes
                    .iter()
                    .map(|&i| net.nodes[i].cost_weight.unwrap_or_else(T::one))
                    .collect(),
            },
            gen_nodes,
            g_nodes,
            i_nodes,
        }
    }
}

impl<T: Real, C: ConvexCost<T>> PpoBlock<T, C> {
    /// Controller right-hand side. `lambda` and `omega` are indexed by node.
    pub fn rhs(
        &self,
        s: &PpoView<'_, T>,
        lambda: &[T],
        omega: &[T],
        gains: &Gains<T>,
        out: &mut PpoViewMut<'_, T>,
    ) {
        for (k, &i) in self.gen_nodes.iter().enumerate() {
            let p = s.p_g[k];
            let b = self.pg_bounds[k];
            out.p_g[k] = (-self.cost.gradient(k, p) + lambda[i] - omega[i] + s.mu_g_lo[k]
                - s.mu_g_hi[k])
                / gains.tau_g;
            out.mu_g_lo[k] = proj_plus(b.lo - p, s.mu_g_lo[k]) / gains.tau_mu;
            out.mu_g_hi[k] = proj_plus(p - b.hi, s.mu_g_hi[k]) / gains.tau_mu;
        }
        for k in 0..self.g_nodes.len() {
            let u = s.u_exc[k];
            let b = self.exc_bounds[k];
            out.u_exc[k] = (s.mu_exc_lo[k] - s.mu_exc_hi[k]) / gains.tau_uf;
            out.mu_exc_lo[k] = proj_plus(b.lo - u, s.mu_exc_lo[k]) / gains.tau_mu;
            out.mu_exc_hi[k] = proj_plus(u - b.hi, s.mu_exc_hi[k]) / gains.tau_mu;
        }
        for k in 0..self.i_nodes.len() {
            let u = s.u_inv[k];
            let b = self.inv_bounds[k];
            // Descent direction of the Lagrangian, same orientation as U_f.
            out.u_inv[k] = (s.mu_inv_lo[k] - s.mu_inv_hi[k]) / gains.tau_ui;
            out.mu_inv_lo[k] = proj_plus(b.lo - u, s.mu_inv_lo[k]) / gains.tau_mu;
            out.mu_inv_hi[k] = proj_plus(u - b.hi, s.mu_inv_hi[k]) / gains.tau_mu;
        }
    }

    /// Total cost of each producer.
    pub fn producer_costs(&self, p_g: &[T], n_ppos: usize) -> Vec<T> {
        let mut c = vec![T::zero(); n_ppos];
        for (k, &p) in p_g.iter().enumerate() {
            c[self.owner[k]] += self.cost.value(k, p);
        }
        c
    }
}

/// Sets every negative entry to zero.
pub fn clamp_nonnegative<T: Real>(mu: &mut [T]) {
    for m in mu {
        if *m < T::zero() {
            *m = T::zero();
        }
    }
}
