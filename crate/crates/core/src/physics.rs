//! Lossy AC power flow, the swing/voltage dynamics and the algebraic load
//! constraints.
//!
//! Lines use the bus-admittance convention: for series admittance `g - jb`
//! (`g = R/|Z|²`, `b = X/|Z|²`) the sending-end flow is
//! `P_ij = g U_i² + U_i U_j (-g cos θ_ij + b sin θ_ij)`, and the flat state
//! with zero shunts has zero injections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::netmodel::{Network, NodeKind};
use crate::scalar::Real;

/// Per-node physical state. `momentum` is zero at load nodes and `omega`
/// equals `momentum / M` at generating nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysState<T> {
    pub theta: Vec<T>,
    pub omega: Vec<T>,
    pub voltage: Vec<T>,
    pub momentum: Vec<T>,
}

impl<T: Real> PhysState<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            theta: vec![T::zero(); n],
            omega: vec![T::zero(); n],
            voltage: vec![T::one(); n],
            momentum: vec![T::zero(); n],
        }
    }
}

/// Exogenous and controller inputs, all indexed by node. `p_gen` is ignored
/// at load nodes and `u_exc` outside `G` nodes.
#[derive(Clone, Copy, Debug)]
pub struct PhysInputs<'a, T> {
    pub p_gen: &'a [T],
    pub u_exc: &'a [T],
    pub p_load: &'a [T],
    pub q_load: &'a [T],
}

/// Time derivatives of the differential states and residuals of the
/// algebraic constraints, plus the injections they were computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysRates<T> {
    pub dtheta: Vec<T>,
    pub dmomentum: Vec<T>,
    pub dvoltage: Vec<T>,
    pub res_p: Vec<T>,
    pub res_q: Vec<T>,
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> PhysRates<T> {
    pub fn zeros(n: usize) -> Self {
        let z = vec![T::zero(); n];
        Self {
            dtheta: z.clone(),
            dmomentum: z.clone(),
            dvoltage: z.clone(),
            res_p: z.clone(),
            res_q: z.clone(),
            p: z.clone(),
            q: z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Branch<T> {
    i: usize,
    j: usize,
    g: T,
    b: T,
}

/// Precomputed view of a network for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct Grid<T> {
    n: usize,
    kind: Vec<NodeKind>,
    branches: Vec<Branch<T>>,
    /// `Σg + g_sh`: coefficient of `U_i²` in `p_i`.
    self_p: Vec<T>,
    /// `Σb - b_sh`: coefficient of `U_i²` in `q_i`.
    self_q: Vec<T>,
    shunt_g: Vec<T>,
    damping: Vec<T>,
    inertia: Vec<T>,
    reactance: Vec<T>,
    tau_d: Vec<T>,
    load_nodes: Vec<usize>,
    load_pos: Vec<Option<usize>>,
    incident: Vec<Vec<usize>>,
}

impl<T: Real> Grid<T> {
    pub fn new(net: &Network<T>) -> Self {
        let n = net.n_nodes();
        let mut self_p: Vec<T> = net.nodes.iter().map(|nd| nd.shunt_conductance).collect();
        let mut self_q: Vec<T> = net.nodes.iter().map(|nd| -nd.shunt_susceptance).collect();
        let mut incident = vec![Vec::new(); n];
        let branches: Vec<Branch<T>> = net
            .lines
            .iter()
            .enumerate()
            .map(|(m, l)| {
                self_p[l.from] += l.conductance;
                self_p[l.to] += l.conductance;
                self_q[l.from] += l.susceptance;
                self_q[l.to] += l.susceptance;
                incident[l.from].push(m);
                incident[l.to].push(m);
                Branch { i: l.from, j: l.to, g: l.conductance, b: l.susceptance }
            })
            .collect();
        let load_nodes = net.nodes_of_kind(NodeKind::L);
        let mut load_pos = vec![None; n];
        for (k, &i) in load_nodes.iter().enumerate() {
            load_pos[i] = Some(k);
        }
        let opt = |v: Option<T>| v.unwrap_or_else(T::zero);
        Self {
            n,
            kind: net.nodes.iter().map(|nd| nd.kind).collect(),
            branches,
            self_p,
            self_q,
            shunt_g: net.nodes.iter().map(|nd| nd.shunt_conductance).collect(),
            damping: net.nodes.iter().map(|nd| nd.damping).collect(),
            inertia: net.nodes.iter().map(|nd| opt(nd.inertia)).collect(),
            reactance: net.nodes.iter().map(|nd| opt(nd.reactance_diff)).collect(),
            tau_d: net.nodes.iter().map(|nd| opt(nd.tau_voltage)).collect(),
            load_nodes,
            load_pos,
            incident,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn load_nodes(&self) -> &[usize] {
        &self.load_nodes
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kind[i]
    }

    pub fn inertia(&self, i: usize) -> T {
        self.inertia[i]
    }

    pub fn damping(&self, i: usize) -> T {
        self.damping[i]
    }

    /// `(sin θ_ij, cos θ_ij)` of every line, oriented `from → to`.
    pub fn line_trig(&self, theta: &[T], trig: &mut [(T, T)]) {
        for (t, br) in trig.iter_mut().zip(&self.branches) {
            *t = (theta[br.i] - theta[br.j]).sin_cos();
        }
    }

    fn trig_vec(&self, theta: &[T]) -> Vec<(T, T)> {
        let mut trig = vec![(T::zero(), T::one()); self.branches.len()];
        self.line_trig(theta, &mut trig);
        trig
    }

    /// Active and reactive injections from cached line trigonometry.
    pub fn injections_trig(&self, trig: &[(T, T)], u: &[T], p: &mut [T], q: &mut [T]) {
        for i in 0..self.n {
            let u2 = u[i] * u[i];
            p[i] = self.self_p[i] * u2;
            q[i] = self.self_q[i] * u2;
        }
        for (br, &(s, c)) in self.branches.iter().zip(trig) {
            let uu = u[br.i] * u[br.j];
            let gc = br.g * c;
            let bs = br.b * s;
            let gs = br.g * s;
            let bc = br.b * c;
            p[br.i] += uu * (bs - gc);
            p[br.j] -= uu * (bs + gc);
            q[br.i] -= uu * (gs + bc);
            q[br.j] += uu * (gs - bc);
        }
    }

    pub fn injections_into(&self, theta: &[T], u: &[T], p: &mut [T], q: &mut [T]) {
        let trig = self.trig_vec(theta);
        self.injections_trig(&trig, u, p, q);
    }

    pub fn injections(&self, theta: &[T], u: &[T]) -> (Vec<T>, Vec<T>) {
        let mut p = vec![T::zero(); self.n];
        let mut q = vec![T::zero(); self.n];
        self.injections_into(theta, u, &mut p, &mut q);
        (p, q)
    }

    /// Directional active flows `(P_ij, P_ji)` per line from cached trigonometry.
    pub fn line_flows_trig(&self, trig: &[(T, T)], u: &[T], flows: &mut [(T, T)]) {
        for ((f, br), &(s, c)) in flows.iter_mut().zip(&self.branches).zip(trig) {
            let uu = u[br.i] * u[br.j];
            let pij = br.g * u[br.i] * u[br.i] + uu * (br.b * s - br.g * c);
            let pji = br.g * u[br.j] * u[br.j] - uu * (br.b * s + br.g * c);
            *f = (pij, pji);
        }
    }

    pub fn line_flows(&self, theta: &[T], u: &[T]) -> Vec<(T, T)> {
        let trig = self.trig_vec(theta);
        let mut flows = vec![(T::zero(), T::zero()); self.branches.len()];
        self.line_flows_trig(&trig, u, &mut flows);
        flows
    }

    /// Per-node resistive loss terms `φ_i` from cached trigonometry.
    pub fn node_losses_trig(&self, trig: &[(T, T)], u: &[T], phi: &mut [T]) {
        for i in 0..self.n {
            phi[i] = self.shunt_g[i] * u[i] * u[i];
        }
        for (br, &(_, c)) in self.branches.iter().zip(trig) {
            let uu = u[br.i] * u[br.j] * c;
            phi[br.i] += br.g * (u[br.i] * u[br.i] - uu);
            phi[br.j] += br.g * (u[br.j] * u[br.j] - uu);
        }
    }

    /// Per-node resistive loss terms `φ_i`; they sum to `Σ p_i`.
    pub fn node_losses(&self, theta: &[T], u: &[T]) -> Vec<T> {
        let trig = self.trig_vec(theta);
        let mut phi = vec![T::zero(); self.n];
        self.node_losses_trig(&trig, u, &mut phi);
        phi
    }

    /// Physical right-hand side. `state.omega` at generating nodes must equal
    /// `momentum / M`; at load nodes it is read as the algebraic value.
    pub fn dae_rhs(
        &self,
        state: &PhysState<T>,
        inputs: &PhysInputs<'_, T>,
        out: &mut PhysRates<T>,
    ) -> Result<()> {
        let trig = self.trig_vec(&state.theta);
        self.dae_rhs_trig(&trig, &state.omega, &state.voltage, inputs, out)
    }

    /// [`Grid::dae_rhs`] with cached line trigonometry and borrowed state.
    pub fn dae_rhs_trig(
        &self,
        trig: &[(T, T)],
        omega: &[T],
        voltage: &[T],
        inputs: &PhysInputs<'_, T>,
        out: &mut PhysRates<T>,
    ) -> Result<()> {
        self.injections_trig(trig, voltage, &mut out.p, &mut out.q);
        for i in 0..self.n {
            let w = omega[i];
            out.dtheta[i] = w;
            out.dmomentum[i] = T::zero();
            out.dvoltage[i] = T::zero();
            out.res_p[i] = T::zero();
            out.res_q[i] = T::zero();
            match self.kind[i] {
                NodeKind::G | NodeKind::I => {
                    out.dmomentum[i] =
                        -self.damping[i] * w + inputs.p_gen[i] - inputs.p_load[i] - out.p[i];
                    if self.kind[i] == NodeKind::G {
                        let u = voltage[i];
                        if u == T::zero() {
                            return Err(Error::SingularVoltage { node: i });
                        }
                        out.dvoltage[i] = (inputs.u_exc[i] - u - self.reactance[i] * out.q[i] / u)
                            / self.tau_d[i];
                    }
                }
                NodeKind::L => {
                    out.res_p[i] = -self.damping[i] * w - inputs.p_load[i] - out.p[i];
                    out.res_q[i] = -inputs.q_load[i] - out.q[i];
                }
            }
        }
        Ok(())
    }

    /// Trigonometry of line `m` seen from its endpoint `i`.
    #[inline]
    fn oriented(&self, m: usize, i: usize, trig: &[(T, T)]) -> (usize, T, T) {
        let br = &self.branches[m];
        let (s, c) = trig[m];
        if br.i == i {
            (br.j, s, c)
        } else {
            (br.i, -s, c)
        }
    }

    /// Reactive residual `q_i + q_ℓ,i` at load nodes and its Jacobian with
    /// respect to the load-node voltages.
    fn load_q_system(
        &self,
        trig: &[(T, T)],
        u: &[T],
        q_load: &[T],
        res: &mut [T],
        jac: &mut DenseMatrix<T>,
    ) {
        jac.fill_zero();
        for (k, &i) in self.load_nodes.iter().enumerate() {
            let mut q = self.self_q[i] * u[i] * u[i];
            let mut d = T::lit(2.0) * self.self_q[i] * u[i];
            for &m in &self.incident[i] {
                let (j, s, c) = self.oriented(m, i, trig);
                let br = &self.branches[m];
                let coeff = -(br.g * s + br.b * c);
                q += u[i] * u[j] * coeff;
                d += u[j] * coeff;
                if let Some(kj) = self.load_pos[j] {
                    jac.add(k, kj, u[i] * coeff);
                }
            }
            jac.add(k, k, d);
            res[k] = q + q_load[i];
        }
    }

    /// Solves the algebraic constraints at load nodes: Newton on the
    /// reactive balance for `U_L` (warm-started from `voltage`), then the
    /// explicit active balance for `ω_L`. Returns the Newton iteration count.
    pub fn solve_load_algebraic(
        &self,
        theta: &[T],
        voltage: &mut [T],
        omega: &mut [T],
        p_load: &[T],
        q_load: &[T],
        ws: &mut AlgebraicWorkspace<T>,
    ) -> Result<usize> {
        let trig = self.trig_vec(theta);
        self.solve_load_algebraic_trig(&trig, voltage, omega, p_load, q_load, ws)
    }

    pub fn solve_load_algebraic_trig(
        &self,
        trig: &[(T, T)],
        voltage: &mut [T],
        omega: &mut [T],
        p_load: &[T],
        q_load: &[T],
        ws: &mut AlgebraicWorkspace<T>,
    ) -> Result<usize> {
        let nl = self.load_nodes.len();
        let tol = algebraic_tolerance::<T>();
        let mut iters = 0;
        if nl > 0 {
            ws.ensure(nl);
            loop {
                self.load_q_system(trig, voltage, q_load, &mut ws.res, &mut ws.jac);
                let norm = ws.res.iter().fold(T::zero(), |m, r| m.max(r.abs()));
                if !norm.is_finite() {
                    return Err(Error::AlgebraicSolve { iterations: iters, residual: f64::NAN });
                }
                if norm <= tol {
                    break;
                }
                if iters >= MAX_NEWTON {
                    return Err(Error::AlgebraicSolve {
                        iterations: iters,
                        residual: norm.to_f64_lossy(),
                    });
                }
                for r in ws.res.iter_mut() {
                    *r = -*r;
                }
                ws.jac.solve_in_place(&mut ws.res).map_err(|_| Error::AlgebraicSolve {
                    iterations: iters,
                    residual: norm.to_f64_lossy(),
                })?;
                for (k, &i) in self.load_nodes.iter().enumerate() {
                    // Keep voltages positive: never remove more than half.
                    let half = voltage[i] * T::lit(0.5);
                    voltage[i] += ws.res[k].max(-half);
                }
                iters += 1;
            }
        }
        self.load_frequencies_trig(trig, voltage, omega, p_load);
        Ok(iters)
    }

    /// `ω_L = -(p_ℓ + p) / A` at every load node.
    pub fn load_frequencies_trig(&self, trig: &[(T, T)], voltage: &[T], omega: &mut [T], p_load: &[T]) {
        for &i in &self.load_nodes {
            let mut p = self.self_p[i] * voltage[i] * voltage[i];
            for &m in &self.incident[i] {
                let (j, s, c) = self.oriented(m, i, trig);
                let br = &self.branches[m];
                p += voltage[i] * voltage[j] * (br.b * s - br.g * c);
            }
            omega[i] = -(p_load[i] + p) / self.damping[i];
        }
    }

    pub fn n_lines(&self) -> usize {
        self.branches.len()
    }
}

pub const MAX_NEWTON: usize = 50;

/// Residual bound for the algebraic load constraints.
pub fn algebraic_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Scratch buffers reused across algebraic solves.
#[derive(Clone, Debug)]
pub struct AlgebraicWorkspace<T> {
    res: Vec<T>,
    jac: DenseMatrix<T>,
}

impl<T: Real> Default for AlgebraicWorkspace<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> AlgebraicWorkspace<T> {
    pub fn new() -> Self {
        Self { res: Vec::new(), jac: DenseMatrix::zeros(0) }
    }

    fn ensure(&mut self, n: usize) {
        if self.res.len() != n {
            self.res = vec![T::zero(); n];
            self.jac = DenseMatrix::zeros(n);
        }
    }
}

/// Dominant directional flow of a lossy line: the larger-magnitude end,
/// signed in the `i → j` direction.
pub fn dominant_flow<T: Real>(p_ij: T, p_ji: T) -> T {
    if p_ij.abs() >= p_ji.abs() {
        p_ij
    } else {
        -p_ji
    }
}

pub fn congestion_rate<T: Real>(p_m: T, p_max: T) -> T {
    p_m / p_max
}
