//! Network data model: buses, lines, cells, producers, communication graphs
//! and the scenario description consumed by the simulator.

mod branch_data;
mod family;
mod fixtures;
mod ieee57;
mod scenario;

pub use branch_data::{branch_to_line, parse_branch_data, BranchRecord, IEEE57_BRANCH_DATA};
pub use fixtures::{random_small_instance, toy_2bus, toy_3cell};
pub use family::{derive_comm_edges, ScenarioFamily};
pub use ieee57::{
    generate_ieee57, generate_ieee57_with, ieee57_events, Ieee57Config, CELL_1_BUSES,
    CELL_2_BUSES, DEFAULT_SEED, G_BUSES, I_BUSES,
};
pub use scenario::{
    assemble_scenario, InitialCondition, KappaPolicy, LoadAction, LoadEvent, Mode, Scenario,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;
use crate::scalar::Real;

/// Bus category: synchronous generator, inverter-interfaced source, or pure load.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    G,
    I,
    L,
}

impl NodeKind {
    pub fn is_generating(self) -> bool {
        matches!(self, NodeKind::G | NodeKind::I)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Bounds<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Distance outside the interval, zero inside.
    pub fn excess(&self, x: T) -> T {
        (self.lo - x).max(x - self.hi).max(T::zero())
    }
}

/// One bus of the physical network.
///
/// `voltage_bounds` limits the excitation voltage `U_f` at `G` nodes (already
/// mapped from the terminal-voltage limits) and the voltage `U` at `I` nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec<T> {
    /// External bus number used in reports.
    pub id: usize,
    pub kind: NodeKind,
    pub cell: usize,
    pub ppo: Option<usize>,
    pub damping: T,
    pub inertia: Option<T>,
    pub reactance_diff: Option<T>,
    pub tau_voltage: Option<T>,
    pub shunt_conductance: T,
    pub shunt_susceptance: T,
    pub cost_weight: Option<T>,
    pub pg_bounds: Option<Bounds<T>>,
    pub voltage_bounds: Option<Bounds<T>>,
}

impl<T: Real> NodeSpec<T> {
    /// A load bus with the given damping and no shunts.
    pub fn load(id: usize, cell: usize, damping: T) -> Self {
        Self {
            id,
            kind: NodeKind::L,
            cell,
            ppo: None,
            damping,
            inertia: None,
            reactance_diff: None,
            tau_voltage: None,
            shunt_conductance: T::zero(),
            shunt_susceptance: T::zero(),
            cost_weight: None,
            pg_bounds: None,
            voltage_bounds: None,
        }
    }
}

/// Π-line between two buses. `conductance` and `susceptance` are the series
/// values `R/|Z|²` and `X/|Z|²`, both nonnegative for passive lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec<T> {
    pub from: usize,
    pub to: usize,
    pub conductance: T,
    pub susceptance: T,
    pub flow_limit: Option<T>,
    pub congestion_threshold: Option<T>,
}

impl<T: Real> LineSpec<T> {
    pub fn new(from: usize, to: usize, conductance: T, susceptance: T) -> Self {
        Self {
            from,
            to,
            conductance,
            susceptance,
            flow_limit: None,
            congestion_threshold: None,
        }
    }
}

/// Controller time constants. Each is a uniform diagonal gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains<T> {
    pub tau_g: T,
    pub tau_uf: T,
    pub tau_ui: T,
    pub tau_mu: T,
    pub tau_lambda: T,
    pub tau_nu: T,
    pub tau_phi: T,
}

impl<T: Real> Default for Gains<T> {
    fn default() -> Self {
        let fast = T::lit(0.01);
        Self {
            tau_g: T::lit(0.1),
            tau_uf: fast,
            tau_ui: fast,
            tau_mu: fast,
            tau_lambda: fast,
            tau_nu: fast,
            tau_phi: T::lit(10.0),
        }
    }
}

impl<T: Real> Gains<T> {
    /// Every gain multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            tau_g: self.tau_g * factor,
            tau_uf: self.tau_uf * factor,
            tau_ui: self.tau_ui * factor,
            tau_mu: self.tau_mu * factor,
            tau_lambda: self.tau_lambda * factor,
            tau_nu: self.tau_nu * factor,
            tau_phi: self.tau_phi * factor,
        }
    }

    fn all(&self) -> [T; 7] {
        [
            self.tau_g,
            self.tau_uf,
            self.tau_ui,
            self.tau_mu,
            self.tau_lambda,
            self.tau_nu,
            self.tau_phi,
        ]
    }
}

/// Per-unit bases and the nominal grid frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bases {
    pub voltage_kv: f64,
    pub power_mva: f64,
    /// Monetary units per `power_mva`.
    pub cost_mu: f64,
    pub nominal_frequency_hz: f64,
}

impl Default for Bases {
    fn default() -> Self {
        Self {
            voltage_kv: 135.0,
            power_mva: 100.0,
            cost_mu: 1.0,
            nominal_frequency_hz: 50.0,
        }
    }
}

/// Immutable description of buses, lines, cells, producers and the
/// communication topology.
///
/// `comm_edges` connect nodes of the same cell; `boundary_edges` connect nodes
/// of different cells and carry the participation-factor weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub nodes: Vec<NodeSpec<T>>,
    pub lines: Vec<LineSpec<T>>,
    pub comm_edges: Vec<(usize, usize)>,
    pub boundary_edges: Vec<(usize, usize)>,
    pub n_cells: usize,
    pub gains: Gains<T>,
    pub bases: Bases,
}

impl<T: Real> Network<T> {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_of(&self, node: usize) -> usize {
        self.nodes[node].cell
    }

    pub fn cell_members(&self, cell: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].cell == cell)
            .collect()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind == kind)
            .collect()
    }

    /// Indices of `G` and `I` nodes in ascending order.
    pub fn generating_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].kind.is_generating())
            .collect()
    }

    pub fn n_ppos(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| n.ppo)
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Indices of lines whose endpoints lie in different cells.
    pub fn inter_cell_lines(&self) -> Vec<usize> {
        (0..self.lines.len())
            .filter(|&m| {
                let l = &self.lines[m];
                self.nodes[l.from].cell != self.nodes[l.to].cell
            })
            .collect()
    }

    pub fn line_endpoints(&self) -> Vec<(usize, usize)> {
        self.lines.iter().map(|l| (l.from, l.to)).collect()
    }

    /// Finds a line by external bus numbers, in either orientation.
    pub fn find_line(&self, bus_a: usize, bus_b: usize) -> Option<usize> {
        self.lines.iter().position(|l| {
            let (a, b) = (self.nodes[l.from].id, self.nodes[l.to].id);
            (a == bus_a && b == bus_b) || (a == bus_b && b == bus_a)
        })
    }

    pub fn node_by_id(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Intra-cell edges followed by boundary edges, in `ν` ordering.
    pub fn all_comm_edges(&self) -> Vec<(usize, usize)> {
        self.comm_edges
            .iter()
            .chain(self.boundary_edges.iter())
            .copied()
            .collect()
    }
}

/// Checks every structural invariant of a network and returns one message per
/// violation. An empty list means the network is valid.
pub fn validate_network<T: Real>(net: &Network<T>) -> Vec<String> {
    let mut out = Vec::new();
    let n = net.nodes.len();
    if n == 0 {
        out.push("network has no nodes".to_string());
        return out;
    }
    for node in &net.nodes {
        let id = node.id;
        if node.cell >= net.n_cells {
            out.push(format!("node {id}: cell {} out of range", node.cell + 1));
        }
        if !(node.damping > T::zero()) {
            out.push(format!("node {id}: damping must be positive"));
        }
        match node.kind {
            NodeKind::G | NodeKind::I => {
                if node.ppo.is_none() {
                    out.push(format!("node {id}: generator without PPO"));
                }
                if !node.inertia.is_some_and(|m| m > T::zero()) {
                    out.push(format!("node {id}: inertia must be positive"));
                }
                if !node.cost_weight.is_some_and(|w| w > T::zero()) {
                    out.push(format!("node {id}: cost weight must be positive"));
                }
                match node.pg_bounds {
                    Some(b) if b.lo <= b.hi => {}
                    Some(_) => out.push(format!("node {id}: generation bounds inverted")),
                    None => out.push(format!("node {id}: missing generation bounds")),
                }
                match node.voltage_bounds {
                    Some(b) if b.lo < b.hi => {}
                    Some(_) => out.push(format!("node {id}: voltage bounds inverted")),
                    None => out.push(format!("node {id}: missing voltage bounds")),
                }
                if node.kind == NodeKind::G {
                    if !node.reactance_diff.is_some_and(|x| x >= T::zero()) {
                        out.push(format!("node {id}: missing reactance difference"));
                    }
                    if !node.tau_voltage.is_some_and(|t| t > T::zero()) {
                        out.push(format!("node {id}: voltage time constant must be positive"));
                    }
                }
            }
            NodeKind::L => {
                if node.ppo.is_some()
                    || node.cost_weight.is_some()
                    || node.pg_bounds.is_some()
                    || node.inertia.is_some()
                {
                    out.push(format!("node {id}: load node carries generation fields"));
                }
            }
        }
    }
    for (m, l) in net.lines.iter().enumerate() {
        if l.from >= n || l.to >= n {
            out.push(format!("line {m}: endpoint out of range"));
            continue;
        }
        if l.from == l.to {
            out.push(format!("line {m}: self loop at node {}", net.nodes[l.from].id));
        }
        if let Some(p) = l.flow_limit {
            if !(p > T::zero()) {
                out.push(format!("line {m}: flow limit must be positive"));
            }
        }
        if let Some(c) = l.congestion_threshold {
            if !(c > T::zero() && c < T::one()) {
                out.push(format!("line {m}: congestion threshold must lie in (0, 1)"));
            }
        }
    }
    if out.iter().any(|m| m.contains("out of range")) {
        return out;
    }
    for &(i, j) in &net.comm_edges {
        if i >= n || j >= n {
            out.push(format!("communication edge ({i}, {j}) out of range"));
        } else if net.nodes[i].cell != net.nodes[j].cell {
            out.push(format!(
                "communication edge ({}, {}) crosses a cell boundary",
                net.nodes[i].id, net.nodes[j].id
            ));
        }
    }
    for &(i, j) in &net.boundary_edges {
        if i >= n || j >= n {
            out.push(format!("boundary edge ({i}, {j}) out of range"));
        } else if net.nodes[i].cell == net.nodes[j].cell {
            out.push(format!(
                "boundary edge ({}, {}) lies inside one cell",
                net.nodes[i].id, net.nodes[j].id
            ));
        }
    }
    if out.iter().any(|m| m.contains("out of range")) {
        return out;
    }
    for k in 0..net.n_cells {
        let members = net.cell_members(k);
        if members.is_empty() {
            out.push(format!("cell {} has no nodes", k + 1));
            continue;
        }
        if !graph::induced_connected(&members, &net.comm_edges, n) {
            out.push(format!("cell {} communication graph disconnected", k + 1));
        }
    }
    // The physical graph must be connected, except that fully islanded cells
    // are allowed: every physical island has to be a union of whole cells.
    let phys = net.line_endpoints();
    let comp = graph::components(n, &phys);
    for k in 0..net.n_cells {
        let members = net.cell_members(k);
        if let Some(&first) = members.first() {
            if members.iter().any(|&v| comp[v] != comp[first]) {
                out.push(format!("cell {} physical graph disconnected", k + 1));
            }
        }
    }
    let n_islands = comp.iter().max().map_or(0, |m| m + 1);
    for island in 0..n_islands {
        let has_gen = (0..n).any(|v| comp[v] == island && net.nodes[v].kind.is_generating());
        if !has_gen {
            let first = (0..n).find(|&v| comp[v] == island).unwrap_or(0);
            out.push(format!(
                "physical island containing node {} has no generating node",
                net.nodes[first].id
            ));
        }
    }
    if net.gains.all().iter().any(|t| !(*t > T::zero())) {
        out.push("controller time constants must be positive".to_string());
    }
    out
}

/// Same as [`validate_network`], turned into a `Result`.
pub fn ensure_valid<T: Real>(net: &Network<T>) -> Result<()> {
    let v = validate_network(net);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidNetwork(v))
    }
}

/// Oriented incidence matrix of an edge list (thin wrapper over [`graph::incidence`]).
pub fn incidence<T: Real>(edges: &[(usize, usize)], n_nodes: usize) -> Result<Array2<T>> {
    graph::incidence(edges, n_nodes)
}

/// Boundary weight `η_ij = κ_{k(i)} / κ_{k(j)}` for an edge between cells.
pub fn boundary_weight<T: Real>(kappa: &[T], cell_i: usize, cell_j: usize) -> T {
    kappa[cell_i] / kappa[cell_j]
}

pub(crate) fn check_kappa<T: Real>(kappa: &[T], n_cells: usize) -> Result<()> {
    if kappa.len() != n_cells {
        return Err(Error::Parameter(format!(
            "participation factor vector has {} entries, expected {n_cells}",
            kappa.len()
        )));
    }
    if kappa.iter().any(|k| !(*k > T::zero()) || !k.is_finite()) {
        return Err(Error::Parameter(
            "participation factors must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// Weighted incidence `D_c⁺` of the extended communication graph: intra-cell
/// columns are plain `(+1, -1)`, the boundary column of `(i, j)` is
/// `(+1, -η_ij)`, so that `(D_c⁺)ᵀ λ = 0` enforces `λ_i = η_ij λ_j`.
pub fn extended_comm_incidence<T: Real>(net: &Network<T>, kappa: &[T]) -> Result<Array2<T>> {
    check_kappa(kappa, net.n_cells)?;
    let n = net.n_nodes();
    let edges = net.all_comm_edges();
    let mut d = graph::incidence::<T>(&edges, n)?;
    let n_intra = net.comm_edges.len();
    for (e, &(i, j)) in net.boundary_edges.iter().enumerate() {
        let eta = boundary_weight(kappa, net.nodes[i].cell, net.nodes[j].cell);
        d[[j, n_intra + e]] = -eta;
    }
    Ok(d)
}

/// Incidence `D_z` of the condensed cell graph (one column per inter-cell
/// line, parallel lines kept separate) and its Laplacian `ℬ = D_z D_zᵀ`.
pub fn cell_laplacian<T: Real>(net: &Network<T>) -> Result<(Array2<T>, Array2<T>)> {
    let edges: Vec<(usize, usize)> = net
        .inter_cell_lines()
        .into_iter()
        .map(|m| {
            let l = &net.lines[m];
            (net.nodes[l.from].cell, net.nodes[l.to].cell)
        })
        .collect();
    let dz = graph::incidence::<T>(&edges, net.n_cells)?;
    let b = graph::laplacian_from_incidence(&dz);
    Ok((dz, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus() -> Network<f64> {
        toy_2bus().network
    }

    #[test]
    fn minimal_network_is_valid() {
        assert!(validate_network(&two_bus()).is_empty());
    }

    #[test]
    fn missing_comm_edge_reported() {
        let mut net = two_bus();
        net.comm_edges.clear();
        assert_eq!(
            validate_network(&net),
            vec!["cell 1 communication graph disconnected".to_string()]
        );
    }

    #[test]
    fn generator_without_ppo_reported() {
        let mut net = two_bus();
        let g = net.nodes.iter().position(|n| n.kind == NodeKind::G).unwrap();
        net.nodes[g].ppo = None;
        let id = net.nodes[g].id;
        assert_eq!(
            validate_network(&net),
            vec![format!("node {id}: generator without PPO")]
        );
    }

    #[test]
    fn nonpositive_damping_and_bad_threshold() {
        let mut net = two_bus();
        net.nodes[0].damping = 0.0;
        net.lines[0].congestion_threshold = Some(1.5);
        let v = validate_network(&net);
        assert_eq!(v.len(), 2);
        assert!(v[0].contains("damping"));
        assert!(v[1].contains("threshold"));
    }

    #[test]
    fn boundary_column_weight() {
        let net = toy_3cell::<f64>(1).scenario(Mode::III).unwrap().network;
        let d = extended_comm_incidence(&net, &[2.0, 1.0, 1.0]).unwrap();
        let n_intra = net.comm_edges.len();
        let (i, j) = net.boundary_edges[0];
        let (ci, cj) = (net.nodes[i].cell, net.nodes[j].cell);
        let col = d.column(n_intra);
        let eta = [2.0, 1.0, 1.0][ci] / [2.0, 1.0, 1.0][cj];
        assert_eq!(col[i], 1.0);
        assert_eq!(col[j], -eta);
        let scaled = extended_comm_incidence(&net, &[4.0, 2.0, 2.0]).unwrap();
        assert_eq!(d, scaled);
    }

    #[test]
    fn uniform_kappa_is_plain_incidence() {
        let net = toy_3cell::<f64>(1).scenario(Mode::III).unwrap().network;
        let d = extended_comm_incidence(&net, &[1.0, 1.0, 1.0]).unwrap();
        let plain: Array2<f64> = incidence(&net.all_comm_edges(), net.n_nodes()).unwrap();
        assert_eq!(d, plain);
        assert!(extended_comm_incidence(&net, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn cell_laplacian_with_parallel_lines() {
        let mut net = two_bus();
        net.n_cells = 2;
        net.nodes[1].cell = 1;
        net.nodes[1].ppo = net.nodes[1].ppo.map(|_| 1);
        let (_, b) = cell_laplacian(&net).unwrap();
        assert_eq!(b, ndarray::arr2(&[[1.0, -1.0], [-1.0, 1.0]]));
        net.lines.push(net.lines[0].clone());
        let (dz, b) = cell_laplacian(&net).unwrap();
        assert_eq!(dz.ncols(), 2);
        assert_eq!(b, ndarray::arr2(&[[2.0, -2.0], [-2.0, 2.0]]));
    }

    #[test]
    fn triangle_cell_laplacian_rows_sum_to_zero() {
        let net = toy_3cell::<f64>(3).scenario(Mode::III).unwrap().network;
        let (_, b) = cell_laplacian(&net).unwrap();
        for r in b.rows() {
            assert!(r.sum().abs() < 1e-15);
        }
    }
}
