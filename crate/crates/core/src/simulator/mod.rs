//! Closed-loop integration of grid physics and all controllers.
//!
//! The differential states live in one flat vector described by [`Layout`];
//! load-node voltages and frequencies are algebraic and re-solved at every
//! stage. Integration is fixed-step classical Runge-Kutta with load events
//! snapped to step boundaries.

mod export;
mod layout;
mod trajectory;

pub use export::{scenario_digest, write_csv, write_manifest, Manifest};
pub use layout::Layout;
pub use trajectory::{steady_state, Derived, SteadyState, Trajectory};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cc::{cc_rhs, CommGraph};
use crate::congestion::{congestion_snapshot, kappa_rhs, monitored_lines, CongestedLine};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::netmodel::{KappaPolicy, LoadEvent, Scenario};
use crate::physics::{AlgebraicWorkspace, Grid, PhysInputs, PhysRates};
use crate::ppo::{clamp_nonnegative, PpoBlock};
use crate::scalar::Real;

/// Steady-state threshold on `max |ẋ|`.
pub const STEADY_TOLERANCE: f64 = 1e-6;
/// Any state magnitude beyond this is treated as numerical divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions<T> {
    /// Integration step, seconds.
    pub dt: T,
    /// Overrides the scenario's output step.
    pub output_step: Option<T>,
    /// Overrides the scenario's horizon.
    pub horizon: Option<T>,
    /// Turn a capped barrier (flow at its limit) into an error.
    pub strict_congestion: bool,
    /// Keep full states in the trajectory, not only derived series.
    pub record_states: bool,
}

impl<T: Real> Default for SimOptions<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            output_step: None,
            horizon: None,
            strict_congestion: false,
            record_states: true,
        }
    }
}

/// Full closed-loop state at one time: the flat differential vector, the
/// algebraic load-node values and the current (piecewise-constant) loads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState<T> {
    pub time: T,
    pub x: Vec<T>,
    /// Voltages at load nodes, in load-node order.
    pub u_load: Vec<T>,
    /// Frequency deviations at load nodes, in load-node order.
    pub omega_load: Vec<T>,
    pub p_load: Vec<T>,
    pub q_load: Vec<T>,
}

/// Static part of the closed loop, shared by all stage evaluations.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub layout: Layout,
    pub grid: Grid<T>,
    pub ppo: PpoBlock<T>,
    pub monitored: Vec<CongestedLine<T>>,
    pub kappa_controlled: bool,
    pub gains: crate::netmodel::Gains<T>,
    cell: Vec<usize>,
    n_cells: usize,
    comm: CommGraph<T>,
}

/// Scratch space for one stage evaluation.
#[derive(Clone, Debug)]
struct Workspace<T> {
    trig: Vec<(T, T)>,
    voltage: Vec<T>,
    omega: Vec<T>,
    p_gen: Vec<T>,
    u_exc: Vec<T>,
    phi: Vec<T>,
    flows: Vec<(T, T)>,
    kappa: Vec<T>,
    phys: PhysRates<T>,
    alg: AlgebraicWorkspace<T>,
    comm: CommGraph<T>,
}

/// Per-evaluation side information.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageInfo {
    pub newton_iterations: usize,
    /// Index into the monitored lines of a capped barrier, if any.
    pub flagged_line: Option<usize>,
}

impl<T: Real> Model<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        scenario.validate()?;
        let net = &scenario.network;
        let kappa = scenario.initial_kappa();
        Ok(Self {
            layout: Layout::new(net),
            grid: Grid::new(net),
            ppo: PpoBlock::from_network(net),
            monitored: monitored_lines(net),
            kappa_controlled: scenario.kappa.is_controlled(),
            gains: net.gains,
            cell: net.nodes.iter().map(|n| n.cell).collect(),
            n_cells: net.n_cells,
            comm: CommGraph::new(net, &kappa)?,
        })
    }

    fn workspace(&self) -> Workspace<T> {
        let n = self.layout.n_nodes;
        Workspace {
            trig: vec![(T::zero(), T::one()); self.grid.n_lines()],
            voltage: vec![T::one(); n],
            omega: vec![T::zero(); n],
            p_gen: vec![T::zero(); n],
            u_exc: vec![T::zero(); n],
            phi: vec![T::zero(); n],
            flows: vec![(T::zero(), T::zero()); self.grid.n_lines()],
            kappa: vec![T::one(); self.n_cells],
            phys: PhysRates::zeros(n),
            alg: AlgebraicWorkspace::new(),
            comm: self.comm.clone(),
        }
    }

    pub fn cell_of(&self, node: usize) -> usize {
        self.cell[node]
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn comm(&self) -> &CommGraph<T> {
        &self.comm
    }

    /// Communication edges, intra-cell first, then boundary edges.
    pub fn comm_edges(&self) -> &[(usize, usize)] {
        self.comm.edges()
    }

    /// Participation factors encoded in a state vector.
    pub fn kappa(&self, x: &[T]) -> Vec<T> {
        x[self.layout.phi.clone()].iter().map(|p| p.exp()).collect()
    }

    /// Node voltages from a state, with load-node values from `u_load`.
    pub fn node_voltages(&self, x: &[T], u_load: &[T], out: &mut [T]) {
        let l = &self.layout;
        for (k, &i) in l.g_nodes.iter().enumerate() {
            out[i] = x[l.u_g.start + k];
        }
        for (k, &i) in l.i_nodes.iter().enumerate() {
            out[i] = x[l.u_inv.start + k];
        }
        for (k, &i) in l.load_nodes.iter().enumerate() {
            out[i] = u_load[k];
        }
    }

    /// Node frequencies from a state, with load-node values from `omega_load`.
    pub fn node_frequencies(&self, x: &[T], omega_load: &[T], out: &mut [T]) {
        let l = &self.layout;
        for (k, &i) in l.gen_nodes.iter().enumerate() {
            out[i] = x[l.momentum.start + k] / self.grid.inertia(i);
        }
        for (k, &i) in l.load_nodes.iter().enumerate() {
            out[i] = omega_load[k];
        }
    }

    /// Evaluates `ẋ = f(x)`. `u_load` is the Newton warm start on entry and
    /// the consistent load-node voltage on exit; `omega_load` is overwritten.
    #[allow(clippy::too_many_arguments)]
    fn eval(
        &self,
        x: &[T],
        p_load: &[T],
        q_load: &[T],
        u_load: &mut [T],
        omega_load: &mut [T],
        ws: &mut Workspace<T>,
        dx: &mut [T],
    ) -> Result<StageInfo> {
        let l = &self.layout;
        let theta = &x[l.theta.clone()];
        self.grid.line_trig(theta, &mut ws.trig);
        self.node_voltages(x, u_load, &mut ws.voltage);
        let iters = self.grid.solve_load_algebraic_trig(
            &ws.trig,
            &mut ws.voltage,
            &mut ws.omega,
            p_load,
            q_load,
            &mut ws.alg,
        )?;
        for (k, &i) in l.load_nodes.iter().enumerate() {
            u_load[k] = ws.voltage[i];
            omega_load[k] = ws.omega[i];
        }
        for (k, &i) in l.gen_nodes.iter().enumerate() {
            ws.omega[i] = x[l.momentum.start + k] / self.grid.inertia(i);
            ws.p_gen[i] = x[l.p_g.start + k];
        }
        for (k, &i) in l.g_nodes.iter().enumerate() {
            ws.u_exc[i] = x[l.u_exc.start + k];
        }
        let inputs = PhysInputs { p_gen: &ws.p_gen, u_exc: &ws.u_exc, p_load, q_load };
        self.grid
            .dae_rhs_trig(&ws.trig, &ws.omega, &ws.voltage, &inputs, &mut ws.phys)?;
        dx[l.theta.clone()].copy_from_slice(&ws.phys.dtheta);
        for (k, &i) in l.gen_nodes.iter().enumerate() {
            dx[l.momentum.start + k] = ws.phys.dmomentum[i];
        }
        for (k, &i) in l.g_nodes.iter().enumerate() {
            dx[l.u_g.start + k] = ws.phys.dvoltage[i];
        }
        self.grid.node_losses_trig(&ws.trig, &ws.voltage, &mut ws.phi);

        let lambda = &x[l.lambda.clone()];
        {
            let view = l.ppo_view(x);
            let mut out = l.ppo_view_mut(dx);
            self.ppo.rhs(&view, lambda, &ws.omega, &self.gains, &mut out);
        }
        if self.kappa_controlled {
            for (k, p) in x[l.phi.clone()].iter().enumerate() {
                ws.kappa[k] = p.exp();
            }
            ws.comm.rebuild_boundary_weights(&ws.kappa);
        }
        {
            let (dlambda, rest) = dx[l.lambda.start..].split_at_mut(l.lambda.len());
            let dnu = &mut rest[..l.nu.len()];
            cc_rhs(
                &ws.comm,
                lambda,
                &x[l.nu.clone()],
                &ws.p_gen,
                &ws.phi,
                p_load,
                &self.gains,
                dlambda,
                dnu,
            );
        }
        let mut flagged_line = None;
        if self.kappa_controlled {
            self.grid.line_flows_trig(&ws.trig, &ws.voltage, &mut ws.flows);
            let snap = congestion_snapshot(&self.monitored, &ws.flows);
            flagged_line = snap.flagged.iter().position(|&f| f);
            kappa_rhs(
                &self.monitored,
                &x[l.phi.clone()],
                &snap.gamma,
                self.gains.tau_phi,
                &mut dx[l.phi.clone()],
            );
        } else {
            dx[l.phi.clone()].iter_mut().for_each(|v| *v = T::zero());
        }
        Ok(StageInfo { newton_iterations: iters, flagged_line })
    }

    /// Right-hand side at a stored state, re-solving the algebraic part
    /// from the stored load-node voltages.
    pub fn rhs_at(&self, state: &SimState<T>) -> Result<Vec<T>> {
        let mut ws = self.workspace();
        let mut u = state.u_load.clone();
        let mut w = state.omega_load.clone();
        let mut dx = vec![T::zero(); self.layout.len];
        self.eval(&state.x, &state.p_load, &state.q_load, &mut u, &mut w, &mut ws, &mut dx)?;
        Ok(dx)
    }

    /// Node-level snapshot quantities of a stored state.
    pub fn derive(&self, state: &SimState<T>, nominal_hz: T) -> Derived<T> {
        trajectory::derive(self, state, nominal_hz)
    }
}

/// Cell-coordinator multipliers `ν` for which the price dynamics start at
/// rest: the minimum-norm solution of `D_c⁺ ν = r` after projecting `r`
/// onto the range of `D_c⁺`. Returns the residual that could not be matched.
pub fn initial_nu<T: Real>(comm: &CommGraph<T>, cell: &[usize], kappa: &[T], r: &[T]) -> (Vec<T>, T) {
    let n = r.len();
    let edges = comm.edges();
    let comp = crate::graph::components(n, edges);
    let n_comp = comp.iter().max().map_or(0, |m| m + 1);
    let v: Vec<T> = (0..n).map(|i| kappa[cell[i]]).collect();
    let mut r_proj = r.to_vec();
    for c in 0..n_comp {
        let (mut vr, mut vv) = (T::zero(), T::zero());
        for i in (0..n).filter(|&i| comp[i] == c) {
            vr += v[i] * r[i];
            vv += v[i] * v[i];
        }
        for i in (0..n).filter(|&i| comp[i] == c) {
            r_proj[i] -= vr / vv * v[i];
        }
    }
    let unmatched = crate::scalar::max_abs_diff(&r_proj, r);
    // (D Dᵀ + Σ_c v_c v_cᵀ) y = r_proj, then ν = Dᵀ y.
    let w = comm.weights();
    let mut m = DenseMatrix::zeros(n);
    for (e, &(i, j)) in edges.iter().enumerate() {
        m.add(i, i, T::one());
        m.add(j, j, w[e] * w[e]);
        m.add(i, j, -w[e]);
        m.add(j, i, -w[e]);
    }
    for i in 0..n {
        for j in 0..n {
            if comp[i] == comp[j] {
                m.add(i, j, v[i] * v[j]);
            }
        }
    }
    let mut y = r_proj;
    if m.solve_in_place(&mut y).is_err() {
        return (vec![T::zero(); edges.len()], unmatched);
    }
    let mut nu = vec![T::zero(); edges.len()];
    comm.apply_transpose(&y, &mut nu);
    (nu, unmatched)
}

/// Closed-loop simulator for one scenario.
#[derive(Clone, Debug)]
pub struct Simulator<T> {
    scenario: Scenario<T>,
    model: Model<T>,
    options: SimOptions<T>,
    ws: Workspace<T>,
    state: SimState<T>,
    deriv: Vec<T>,
    info: StageInfo,
    steps: usize,
    p_load0: Vec<T>,
    q_load0: Vec<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(scenario: Scenario<T>, options: SimOptions<T>) -> Result<Self> {
        if !(options.dt > T::zero()) {
            return Err(Error::Parameter("integration step must be positive".into()));
        }
        let model = Model::new(&scenario)?;
        let mut ws = model.workspace();
        let state = Self::initial_state(&scenario, &model)?;
        let mut deriv = vec![T::zero(); model.layout.len];
        let mut st = state.clone();
        let info = model.eval(
            &st.x,
            &st.p_load,
            &st.q_load,
            &mut st.u_load,
            &mut st.omega_load,
            &mut ws,
            &mut deriv,
        )?;
        Ok(Self {
            p_load0: scenario.initial.p_load.clone(),
            q_load0: scenario.initial.q_load.clone(),
            scenario,
            model,
            options,
            ws,
            state: st,
            deriv,
            info,
            steps: 0,
        })
    }

    fn initial_state(sc: &Scenario<T>, model: &Model<T>) -> Result<SimState<T>> {
        let net = &sc.network;
        let l = &model.layout;
        let init = &sc.initial;
        let mut x = vec![T::zero(); l.len];
        x[l.theta.clone()].copy_from_slice(&init.theta);
        let (_, q) = model.grid.injections(&init.theta, &init.voltage);
        for (k, &i) in l.g_nodes.iter().enumerate() {
            let u = init.voltage[i];
            let xd = net.nodes[i].reactance_diff.unwrap_or_else(T::zero);
            x[l.u_g.start + k] = u;
            x[l.u_exc.start + k] = u + xd * q[i] / u;
        }
        for (k, &i) in l.i_nodes.iter().enumerate() {
            x[l.u_inv.start + k] = init.voltage[i];
        }
        let kappa = sc.initial_kappa();
        for (k, kap) in kappa.iter().enumerate() {
            x[l.phi.start + k] = match &sc.kappa {
                KappaPolicy::Fixed(_) => kap.ln(),
                KappaPolicy::Controlled { phi0 } => phi0[k],
            };
        }
        let u_load: Vec<T> = l.load_nodes.iter().map(|&i| init.voltage[i]).collect();
        let phi = model.grid.node_losses(&init.theta, &init.voltage);
        let r: Vec<T> = (0..l.n_nodes).map(|i| phi[i] + init.p_load[i]).collect();
        let (nu, _) = initial_nu(&model.comm, &model.cell, &kappa, &r);
        x[l.nu.clone()].copy_from_slice(&nu);
        Ok(SimState {
            time: T::zero(),
            x,
            u_load,
            omega_load: vec![T::zero(); l.load_nodes.len()],
            p_load: init.p_load.clone(),
            q_load: init.q_load.clone(),
        })
    }

    pub fn state(&self) -> &SimState<T> {
        &self.state
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    pub fn layout(&self) -> &Layout {
        &self.model.layout
    }

    pub fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }

    /// `ẋ` at the current state.
    pub fn derivative(&self) -> &[T] {
        &self.deriv
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    fn refresh_derivative(&mut self) -> Result<()> {
        let st = &mut self.state;
        self.info = self.model.eval(
            &st.x,
            &st.p_load,
            &st.q_load,
            &mut st.u_load,
            &mut st.omega_load,
            &mut self.ws,
            &mut self.deriv,
        )?;
        Ok(())
    }

    /// Applies one load event to the current state (controllers untouched).
    pub fn apply_event(&mut self, ev: &LoadEvent<T>) -> Result<()> {
        let i = ev.node;
        let (p, q) = ev.apply(
            self.state.p_load[i],
            self.state.q_load[i],
            self.p_load0[i],
            self.q_load0[i],
        );
        self.state.p_load[i] = p;
        self.state.q_load[i] = q;
        self.refresh_derivative()
    }

    /// One Runge-Kutta step of length `h`; multipliers are clamped at zero
    /// afterwards and the algebraic part is re-solved at the new point.
    pub fn step(&mut self, h: T) -> Result<()> {
        let len = self.model.layout.len;
        let x0 = self.state.x.clone();
        let k1 = self.deriv.clone();
        let mut k2 = vec![T::zero(); len];
        let mut k3 = vec![T::zero(); len];
        let mut k4 = vec![T::zero(); len];
        let mut xt = vec![T::zero(); len];
        let mut u = self.state.u_load.clone();
        let mut w = self.state.omega_load.clone();
        let half = h * T::lit(0.5);
        let (pl, ql) = (&self.state.p_load, &self.state.q_load);

        axpy(&x0, half, &k1, &mut xt);
        self.model.eval(&xt, pl, ql, &mut u, &mut w, &mut self.ws, &mut k2)?;
        axpy(&x0, half, &k2, &mut xt);
        self.model.eval(&xt, pl, ql, &mut u, &mut w, &mut self.ws, &mut k3)?;
        axpy(&x0, h, &k3, &mut xt);
        self.model.eval(&xt, pl, ql, &mut u, &mut w, &mut self.ws, &mut k4)?;

        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..len {
            self.state.x[i] = x0[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
        }
        clamp_nonnegative(&mut self.state.x[self.model.layout.multipliers()]);
        // An explicit step outside its stability region grows by orders of
        // magnitude per step; stop before the garbage reaches the output.
        if self.state.x.iter().any(|v| !(v.abs() < T::lit(DIVERGENCE_BOUND))) {
            return Err(Error::Diverged { time: (self.state.time + h).to_f64_lossy() });
        }
        self.state.u_load = u;
        self.steps += 1;
        self.refresh_derivative()
    }

    /// Integrates over the scenario horizon and records a trajectory.
    pub fn integrate(self) -> Result<Trajectory<T>> {
        self.run(false)
    }

    /// Like [`Simulator::integrate`], but a failure after the start (strict
    /// congestion, algebraic non-convergence, divergence) ends the run early:
    /// the samples so far are returned with [`Trajectory::stopped`] set.
    pub fn integrate_partial(self) -> Result<Trajectory<T>> {
        self.run(true)
    }

    fn run(mut self, keep_partial: bool) -> Result<Trajectory<T>> {
        let dt = self.options.dt;
        let horizon = self.options.horizon.unwrap_or(self.scenario.horizon);
        let out_step = self.options.output_step.unwrap_or(self.scenario.output_step);
        if !(out_step > T::zero()) {
            return Err(Error::Parameter("output step must be positive".into()));
        }
        let nominal = T::lit(self.scenario.network.bases.nominal_frequency_hz);
        let mut traj = Trajectory::new(&self.scenario, &self.model, dt);
        if !(horizon > T::zero()) {
            return Ok(traj);
        }
        let n_steps = steps_in(horizon, dt);
        let every = steps_in(out_step, dt).max(1);
        let events = self.scenario.events.clone();
        let ev_steps: Vec<usize> = events.iter().map(|e| steps_in(e.time, dt)).collect();
        let mut next_ev = 0;
        for e in ev_steps.iter().copied().filter(|&s| s <= n_steps) {
            let t = T::from_count(e) * dt;
            if traj.event_times.last() != Some(&t) {
                traj.event_times.push(t);
            }
        }
        for n in 0..=n_steps {
            if let Err(e) = self.advance(n, dt, every, n_steps, &events, &ev_steps, &mut next_ev, &mut traj, nominal) {
                if !keep_partial {
                    return Err(e);
                }
                traj.stopped = Some(e.to_string());
                break;
            }
        }
        traj.final_state = Some(self.state.clone());
        Ok(traj)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance(
        &mut self,
        n: usize,
        dt: T,
        every: usize,
        n_steps: usize,
        events: &[LoadEvent<T>],
        ev_steps: &[usize],
        next_ev: &mut usize,
        traj: &mut Trajectory<T>,
        nominal: T,
    ) -> Result<()> {
        let t = T::from_count(n) * dt;
        self.state.time = t;
        while *next_ev < events.len() && ev_steps[*next_ev] <= n {
            self.apply_event(&events[*next_ev])?;
            *next_ev += 1;
        }
        if let Some(line) = self.info.flagged_line {
            traj.note_flag(t);
            if self.options.strict_congestion {
                return Err(Error::CongestionViolation {
                    line: self.model.monitored[line].line,
                    time: t.to_f64_lossy(),
                });
            }
        }
        if n % every == 0 {
            let norm = crate::scalar::max_abs(&self.deriv);
            traj.push(
                &self.model,
                &self.state,
                norm,
                self.info.flagged_line.is_some(),
                nominal,
                self.options.record_states,
            );
        }
        if n < n_steps {
            self.step(dt)?;
        }
        Ok(())
    }
}

/// Number of whole steps of length `dt` closest to `t`.
pub fn steps_in<T: Real>(t: T, dt: T) -> usize {
    let r = (t / dt).round();
    if r > T::zero() {
        r.to_usize().unwrap_or(usize::MAX)
    } else {
        0
    }
}

fn axpy<T: Real>(x: &[T], a: T, k: &[T], out: &mut [T]) {
    for ((o, &xi), &ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// Runs one scenario with the given options.
pub fn integrate<T: Real>(scenario: Scenario<T>, options: SimOptions<T>) -> Result<Trajectory<T>> {
    Simulator::new(scenario, options)?.integrate()
}

/// Runs one scenario, keeping the samples recorded before any failure.
pub fn integrate_partial<T: Real>(scenario: Scenario<T>, options: SimOptions<T>) -> Result<Trajectory<T>> {
    Simulator::new(scenario, options)?.integrate_partial()
}

/// Runs independent scenarios in parallel.
pub fn integrate_many<T: Real>(
    scenarios: Vec<Scenario<T>>,
    options: &SimOptions<T>,
) -> Vec<Result<Trajectory<T>>> {
    scenarios
        .into_par_iter()
        .map(|sc| integrate(sc, options.clone()))
        .collect()
}
