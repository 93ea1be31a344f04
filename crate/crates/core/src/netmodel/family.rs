use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;

use super::{assemble_scenario, LoadEvent, Mode, Network, Scenario};

/// A network with all tie lines plus a shared initial grid point and event
/// schedule, from which the four topological scenario variants are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFamily<T> {
    pub name: String,
    pub network: Network<T>,
    pub theta: Vec<T>,
    pub voltage: Vec<T>,
    pub events: Vec<LoadEvent<T>>,
    pub seed: u64,
    pub horizon: T,
    pub output_step: T,
}

impl<T: Real> ScenarioFamily<T> {
    /// The network of one variant: tie lines dropped in `I`, boundary
    /// communication dropped in `I` and `II`.
    pub fn network_for(&self, mode: Mode) -> Network<T> {
        let mut net = self.network.clone();
        if !mode.has_tie_lines() {
            let nodes = &net.nodes;
            net.lines.retain(|l| nodes[l.from].cell == nodes[l.to].cell);
        }
        if !mode.has_boundary_comm() {
            net.boundary_edges.clear();
        }
        net
    }

    pub fn scenario(&self, mode: Mode) -> Result<Scenario<T>> {
        assemble_scenario(
            format!("{}-{}", self.name, mode.label()),
            self.network_for(mode),
            mode,
            self.theta.clone(),
            self.voltage.clone(),
            self.events.clone(),
            self.seed,
            self.horizon,
            self.output_step,
        )
    }
}

/// Fills `comm_edges` with one edge per intra-cell line (parallel lines
/// merged) and `boundary_edges` with one edge per inter-cell line.
pub fn derive_comm_edges<T: Real>(net: &mut Network<T>) {
    let mut intra: Vec<(usize, usize)> = Vec::new();
    let mut boundary = Vec::new();
    for l in &net.lines {
        if net.nodes[l.from].cell == net.nodes[l.to].cell {
            let e = (l.from.min(l.to), l.from.max(l.to));
            if !intra.contains(&e) {
                intra.push(e);
            }
        } else {
            boundary.push((l.from, l.to));
        }
    }
    net.comm_edges = intra;
    net.boundary_edges = boundary;
}

/// Angle difference `δ = θ_i - θ_j` such that a line with equal end voltages
/// `u` carries `P_ij = target`.
pub(crate) fn preload_angle<T: Real>(g: T, b: T, u: T, target: T) -> T {
    let rhs = target / (u * u);
    let mut d = if b > T::zero() { rhs / b } else { T::zero() };
    for _ in 0..50 {
        let f = g * (T::one() - d.cos()) + b * d.sin() - rhs;
        let df = g * d.sin() + b * d.cos();
        if df == T::zero() {
            break;
        }
        let step = f / df;
        d -= step;
        if step.abs() <= T::epsilon() * (T::one() + d.abs()) {
            break;
        }
    }
    d
}

/// Adjusts the initial point so that inter-cell lines carry prescribed flows.
///
/// Tie lines are visited breadth-first; the far endpoint of each tree edge
/// takes the voltage of the near endpoint and an angle that produces the
/// requested flow (zero unless listed in `preload` as `(line, P_from_to)`).
pub(crate) fn shape_tie_flows<T: Real>(
    net: &Network<T>,
    theta: &mut [T],
    voltage: &mut [T],
    preload: &[(usize, T)],
) {
    let n = net.n_nodes();
    let ties = net.inter_cell_lines();
    let mut visited = vec![false; n];
    let mut roots: Vec<usize> = ties
        .iter()
        .flat_map(|&m| [net.lines[m].from, net.lines[m].to])
        .collect();
    roots.sort_unstable();
    roots.dedup();
    for root in roots {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(p) = queue.pop_front() {
            for &m in &ties {
                let l = &net.lines[m];
                let c = if l.from == p {
                    l.to
                } else if l.to == p {
                    l.from
                } else {
                    continue;
                };
                if visited[c] {
                    continue;
                }
                visited[c] = true;
                let target = preload
                    .iter()
                    .find(|(k, _)| *k == m)
                    .map_or(T::zero(), |(_, v)| *v);
                voltage[c] = voltage[p];
                let d = preload_angle(l.conductance, l.susceptance, voltage[p], target);
                theta[c] = if l.from == p { theta[p] - d } else { theta[p] + d };
                queue.push_back(c);
            }
        }
    }
}
