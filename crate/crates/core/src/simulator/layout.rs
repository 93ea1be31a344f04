use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::netmodel::{Network, NodeKind};
use crate::ppo::{PpoView, PpoViewMut};
use crate::scalar::Real;

/// Index map of the flat differential state. Every scalar belongs to
/// exactly one block; blocks are contiguous and in the order listed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_nodes: usize,
    pub gen_nodes: Vec<usize>,
    pub g_nodes: Vec<usize>,
    pub i_nodes: Vec<usize>,
    pub load_nodes: Vec<usize>,
    pub n_cells: usize,
    pub n_comm: usize,
    /// Angle of every node.
    pub theta: Range<usize>,
    /// Angular momentum of every generating node.
    pub momentum: Range<usize>,
    /// Terminal voltage of every `G` node.
    pub u_g: Range<usize>,
    pub p_g: Range<usize>,
    pub u_exc: Range<usize>,
    pub u_inv: Range<usize>,
    pub mu_g_lo: Range<usize>,
    pub mu_g_hi: Range<usize>,
    pub mu_exc_lo: Range<usize>,
    pub mu_exc_hi: Range<usize>,
    pub mu_inv_lo: Range<usize>,
    pub mu_inv_hi: Range<usize>,
    pub lambda: Range<usize>,
    pub nu: Range<usize>,
    /// Log participation factor of every cell.
    pub phi: Range<usize>,
    pub len: usize,
}

impl Layout {
    pub fn new<T: Real>(net: &Network<T>) -> Self {
        let n = net.n_nodes();
        let gen_nodes = net.generating_nodes();
        let g_nodes = net.nodes_of_kind(NodeKind::G);
        let i_nodes = net.nodes_of_kind(NodeKind::I);
        let load_nodes = net.nodes_of_kind(NodeKind::L);
        let n_comm = net.comm_edges.len() + net.boundary_edges.len();
        let (ngen, ng, ni) = (gen_nodes.len(), g_nodes.len(), i_nodes.len());
        let mut at = 0;
        let mut next = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let theta = next(n);
        let momentum = next(ngen);
        let u_g = next(ng);
        let p_g = next(ngen);
        let u_exc = next(ng);
        let u_inv = next(ni);
        let mu_g_lo = next(ngen);
        let mu_g_hi = next(ngen);
        let mu_exc_lo = next(ng);
        let mu_exc_hi = next(ng);
        let mu_inv_lo = next(ni);
        let mu_inv_hi = next(ni);
        let lambda = next(n);
        let nu = next(n_comm);
        let phi = next(net.n_cells);
        let len = phi.end;
        Self {
            n_nodes: n,
            gen_nodes,
            g_nodes,
            i_nodes,
            load_nodes,
            n_cells: net.n_cells,
            n_comm,
            theta,
            momentum,
            u_g,
            p_g,
            u_exc,
            u_inv,
            mu_g_lo,
            mu_g_hi,
            mu_exc_lo,
            mu_exc_hi,
            mu_inv_lo,
            mu_inv_hi,
            lambda,
            nu,
            phi,
            len,
        }
    }

    /// Named blocks in storage order.
    pub fn blocks(&self) -> Vec<(&'static str, Range<usize>)> {
        vec![
            ("theta", self.theta.clone()),
            ("momentum", self.momentum.clone()),
            ("u_g", self.u_g.clone()),
            ("p_g", self.p_g.clone()),
            ("u_exc", self.u_exc.clone()),
            ("u_inv", self.u_inv.clone()),
            ("mu_g_lo", self.mu_g_lo.clone()),
            ("mu_g_hi", self.mu_g_hi.clone()),
            ("mu_exc_lo", self.mu_exc_lo.clone()),
            ("mu_exc_hi", self.mu_exc_hi.clone()),
            ("mu_inv_lo", self.mu_inv_lo.clone()),
            ("mu_inv_hi", self.mu_inv_hi.clone()),
            ("lambda", self.lambda.clone()),
            ("nu", self.nu.clone()),
            ("phi", self.phi.clone()),
        ]
    }

    /// All six multiplier blocks, which are adjacent.
    pub fn multipliers(&self) -> Range<usize> {
        self.mu_g_lo.start..self.mu_inv_hi.end
    }

    pub fn ppo_view<'a, T>(&self, x: &'a [T]) -> PpoView<'a, T> {
        PpoView {
            p_g: &x[self.p_g.clone()],
            u_exc: &x[self.u_exc.clone()],
            u_inv: &x[self.u_inv.clone()],
            mu_g_lo: &x[self.mu_g_lo.clone()],
            mu_g_hi: &x[self.mu_g_hi.clone()],
            mu_exc_lo: &x[self.mu_exc_lo.clone()],
            mu_exc_hi: &x[self.mu_exc_hi.clone()],
            mu_inv_lo: &x[self.mu_inv_lo.clone()],
            mu_inv_hi: &x[self.mu_inv_hi.clone()],
        }
    }

    pub fn ppo_view_mut<'a, T>(&self, x: &'a mut [T]) -> PpoViewMut<'a, T> {
        let s = &mut x[self.p_g.start..self.mu_inv_hi.end];
        let (p_g, s) = s.split_at_mut(self.p_g.len());
        let (u_exc, s) = s.split_at_mut(self.u_exc.len());
        let (u_inv, s) = s.split_at_mut(self.u_inv.len());
        let (mu_g_lo, s) = s.split_at_mut(self.mu_g_lo.len());
        let (mu_g_hi, s) = s.split_at_mut(self.mu_g_hi.len());
        let (mu_exc_lo, s) = s.split_at_mut(self.mu_exc_lo.len());
        let (mu_exc_hi, s) = s.split_at_mut(self.mu_exc_hi.len());
        let (mu_inv_lo, mu_inv_hi) = s.split_at_mut(self.mu_inv_lo.len());
        PpoViewMut {
            p_g,
            u_exc,
            u_inv,
            mu_g_lo,
            mu_g_hi,
            mu_exc_lo,
            mu_exc_hi,
            mu_inv_lo,
            mu_inv_hi,
        }
    }

    /// Position of a node among generating nodes.
    pub fn gen_index(&self, node: usize) -> Option<usize> {
        self.gen_nodes.iter().position(|&i| i == node)
    }
}
