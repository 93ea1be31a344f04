use serde::{Deserialize, Serialize};

use crate::netmodel::{Mode, Scenario};
use crate::scalar::Real;

use super::{Layout, Model, SimState, STEADY_TOLERANCE};

/// Reporting quantities of one sample, computed from a [`SimState`] only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived<T> {
    pub time: T,
    /// Angles relative to the lowest-indexed `G` node (or node 0).
    pub theta: Vec<T>,
    pub omega: Vec<T>,
    /// `nominal + ω`.
    pub frequency_hz: Vec<T>,
    pub voltage: Vec<T>,
    pub lambda: Vec<T>,
    /// Per generating node.
    pub p_g: Vec<T>,
    pub u_exc: Vec<T>,
    pub u_inv: Vec<T>,
    pub kappa: Vec<T>,
    /// Mean nodal price of each cell.
    pub zonal_price: Vec<T>,
    /// Per-cell loss `Φ_k = Σ φ_i`.
    pub cell_losses: Vec<T>,
    pub cell_load: Vec<T>,
    pub cell_generation: Vec<T>,
    /// Dominant flow, congestion rate and barrier value per inter-cell line.
    pub line_flow: Vec<T>,
    pub congestion_rate: Vec<T>,
    pub gamma: Vec<T>,
}

pub(super) fn derive<T: Real>(model: &Model<T>, st: &SimState<T>, nominal_hz: T) -> Derived<T> {
    let l = &model.layout;
    let n = l.n_nodes;
    let x = &st.x;
    let mut voltage = vec![T::zero(); n];
    let mut omega = vec![T::zero(); n];
    model.node_voltages(x, &st.u_load, &mut voltage);
    model.node_frequencies(x, &st.omega_load, &mut omega);
    let theta_raw = &x[l.theta.clone()];
    let reference = l.g_nodes.first().copied().unwrap_or(0);
    let theta: Vec<T> = theta_raw.iter().map(|&t| t - theta_raw[reference]).collect();
    let frequency_hz = omega.iter().map(|&w| nominal_hz + w).collect();
    let kappa = model.kappa(x);
    let nc = model.n_cells();
    let mut zonal_price = vec![T::zero(); nc];
    let mut count = vec![0usize; nc];
    let lambda = x[l.lambda.clone()].to_vec();
    let phi = model.grid.node_losses(theta_raw, &voltage);
    let mut cell_losses = vec![T::zero(); nc];
    let mut cell_load = vec![T::zero(); nc];
    for i in 0..n {
        let k = model.cell_of(i);
        zonal_price[k] += lambda[i];
        count[k] += 1;
        cell_losses[k] += phi[i];
        cell_load[k] += st.p_load[i];
    }
    for k in 0..nc {
        if count[k] > 0 {
            zonal_price[k] /= T::from_count(count[k]);
        }
    }
    let p_g = x[l.p_g.clone()].to_vec();
    let mut cell_generation = vec![T::zero(); nc];
    for (k, &i) in l.gen_nodes.iter().enumerate() {
        cell_generation[model.cell_of(i)] += p_g[k];
    }
    let flows = model.grid.line_flows(theta_raw, &voltage);
    let snap = crate::congestion::congestion_snapshot(&model.monitored, &flows);
    Derived {
        time: st.time,
        theta,
        omega,
        frequency_hz,
        voltage,
        lambda,
        p_g,
        u_exc: x[l.u_exc.clone()].to_vec(),
        u_inv: x[l.u_inv.clone()].to_vec(),
        kappa,
        zonal_price,
        cell_losses,
        cell_load,
        cell_generation,
        line_flow: snap.flow,
        congestion_rate: snap.rate,
        gamma: if model.kappa_controlled {
            snap.gamma
        } else {
            vec![T::zero(); model.monitored.len()]
        },
    }
}

/// Sampled closed-loop run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub name: String,
    pub mode: Mode,
    pub dt: T,
    pub nominal_hz: T,
    pub layout: Layout,
    /// External bus number of every node.
    pub node_ids: Vec<usize>,
    pub node_cells: Vec<usize>,
    /// Bus numbers `(from, to)` of every monitored inter-cell line.
    pub monitored: Vec<(usize, usize)>,
    pub times: Vec<T>,
    pub derived: Vec<Derived<T>>,
    /// Full states; empty unless states were recorded.
    pub states: Vec<SimState<T>>,
    /// `max |ẋ|` at every sample.
    pub deriv_norm: Vec<T>,
    /// Whether a barrier was capped at the sample.
    pub flagged: Vec<bool>,
    /// Event times after snapping to step boundaries.
    pub event_times: Vec<T>,
    pub first_flag: Option<T>,
    pub final_state: Option<SimState<T>>,
    /// Why integration ended before the horizon, if it did.
    pub stopped: Option<String>,
}

impl<T: Real> Trajectory<T> {
    pub(super) fn new(sc: &Scenario<T>, model: &Model<T>, dt: T) -> Self {
        let net = &sc.network;
        Self {
            name: sc.name.clone(),
            mode: sc.mode,
            dt,
            nominal_hz: T::lit(net.bases.nominal_frequency_hz),
            layout: model.layout.clone(),
            node_ids: net.nodes.iter().map(|n| n.id).collect(),
            node_cells: net.nodes.iter().map(|n| n.cell).collect(),
            monitored: model
                .monitored
                .iter()
                .map(|m| {
                    let l = &net.lines[m.line];
                    (net.nodes[l.from].id, net.nodes[l.to].id)
                })
                .collect(),
            times: Vec::new(),
            derived: Vec::new(),
            states: Vec::new(),
            deriv_norm: Vec::new(),
            flagged: Vec::new(),
            event_times: Vec::new(),
            first_flag: None,
            final_state: None,
            stopped: None,
        }
    }

    pub(super) fn push(
        &mut self,
        model: &Model<T>,
        st: &SimState<T>,
        deriv_norm: T,
        flagged: bool,
        nominal: T,
        keep_state: bool,
    ) {
        self.times.push(st.time);
        self.derived.push(derive(model, st, nominal));
        if keep_state {
            self.states.push(st.clone());
        }
        self.deriv_norm.push(deriv_norm);
        self.flagged.push(flagged);
    }

    pub(super) fn note_flag(&mut self, t: T) {
        if self.first_flag.is_none() {
            self.first_flag = Some(t);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> T {
        self.times.last().copied().unwrap_or_else(T::zero)
    }

    /// Inter-event windows `[start, end)`; the last one ends at the horizon
    /// and includes its end point.
    pub fn windows(&self) -> Vec<(T, T)> {
        let mut cuts = vec![T::zero()];
        for &t in &self.event_times {
            if t > *cuts.last().unwrap() && t < self.end_time() {
                cuts.push(t);
            }
        }
        cuts.push(self.end_time());
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Sample indices inside `[start, end)`, or `[start, end]` when `end` is
    /// the final time.
    pub fn indices_in(&self, start: T, end: T) -> Vec<usize> {
        let last = end >= self.end_time();
        (0..self.times.len())
            .filter(|&k| {
                let t = self.times[k];
                t >= start && (t < end || (last && t <= end))
            })
            .collect()
    }

    /// Index of the sample closest to `t`.
    pub fn index_at(&self, t: T) -> Option<usize> {
        (0..self.times.len()).min_by(|&a, &b| {
            let da = (self.times[a] - t).abs();
            let db = (self.times[b] - t).abs();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

/// Equilibrium estimate over the tail of a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState<T> {
    pub start: T,
    pub end: T,
    /// Last sample of the window.
    pub last_index: usize,
    /// Largest `max |ẋ|` over the tail.
    pub max_derivative: T,
    pub converged: bool,
    /// Time-averaged state over the tail, if states were recorded.
    pub estimate: Option<Vec<T>>,
}

/// Steady-state check over the last `tail` seconds of `[start, end)`.
/// Returns `None` for a window without samples.
pub fn steady_state<T: Real>(traj: &Trajectory<T>, start: T, end: T, tail: T) -> Option<SteadyState<T>> {
    let idx = traj.indices_in(start, end);
    let &last = idx.last()?;
    let from = traj.times[last] - tail;
    let tail_idx: Vec<usize> = idx.into_iter().filter(|&k| traj.times[k] >= from).collect();
    let max_derivative = tail_idx
        .iter()
        .map(|&k| traj.deriv_norm[k])
        .fold(T::zero(), |m, v| m.max(v));
    let estimate = if traj.states.is_empty() {
        None
    } else {
        let len = traj.states[last].x.len();
        let mut acc = vec![T::zero(); len];
        for &k in &tail_idx {
            for (a, &v) in acc.iter_mut().zip(&traj.states[k].x) {
                *a += v;
            }
        }
        let c = T::from_count(tail_idx.len());
        Some(acc.into_iter().map(|v| v / c).collect())
    };
    Some(SteadyState {
        start,
        end,
        last_index: last,
        max_derivative,
        converged: max_derivative < T::lit(STEADY_TOLERANCE),
        estimate,
    })
}
