//! The 57-bus three-cell test system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::family::{derive_comm_edges, shape_tie_flows, ScenarioFamily};
use super::{
    branch_to_line, parse_branch_data, Bases, Bounds, Gains, LoadAction, LoadEvent, Network,
    NodeKind, NodeSpec, IEEE57_BRANCH_DATA,
};

pub const N_BUSES: usize = 57;

pub const G_BUSES: [usize; 19] = [
    2, 3, 6, 8, 9, 10, 19, 21, 29, 30, 32, 34, 37, 39, 40, 41, 44, 48, 55,
];
pub const I_BUSES: [usize; 19] = [
    4, 11, 14, 15, 16, 17, 18, 22, 24, 25, 26, 33, 36, 42, 45, 46, 49, 50, 53,
];

/// Seed used by the CLI and the acceptance runs: the smallest seed whose
/// closed loop is linearly stable at the initial point.
pub const DEFAULT_SEED: u64 = 3;

/// Default membership of cells 1 and 2 (bus numbers); every other bus is in cell 3.
pub const CELL_1_BUSES: [usize; 13] = [22, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 56, 57];
pub const CELL_2_BUSES: [usize; 12] = [10, 11, 12, 13, 14, 17, 46, 47, 48, 49, 50, 51];

/// Bus shunt susceptances (bus, p.u.) of the standard case.
const BUS_SHUNTS: [(usize, f64); 3] = [(18, 0.10), (25, 0.059), (53, 0.063)];

/// Tunable parts of the 57-bus system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ieee57Config {
    /// Zero-based cell of each bus, indexed by bus number minus one.
    pub cell_of_bus: Vec<usize>,
    pub n_cells: usize,
    /// Initial flows `(from_bus, to_bus, P)` imposed on tie lines.
    pub preloads: Vec<(usize, usize, f64)>,
    pub flow_limit: f64,
    pub congestion_threshold: f64,
    pub pg_bounds: (f64, f64),
    pub voltage_bounds: (f64, f64),
    pub horizon: f64,
    pub output_step: f64,
}

impl Default for Ieee57Config {
    fn default() -> Self {
        let mut cell_of_bus = vec![2; N_BUSES];
        for b in CELL_1_BUSES {
            cell_of_bus[b - 1] = 0;
        }
        for b in CELL_2_BUSES {
            cell_of_bus[b - 1] = 1;
        }
        Self {
            cell_of_bus,
            n_cells: 3,
            preloads: vec![(38, 48, 0.0075)],
            flow_limit: 0.01,
            congestion_threshold: 0.8,
            pg_bounds: (-0.002, 0.003),
            voltage_bounds: (0.98, 1.02),
            horizon: 1800.0,
            output_step: 0.1,
        }
    }
}

/// Load-step schedule as `(time s, bus, action)`.
pub fn ieee57_events<T: Real>() -> Vec<LoadEvent<T>> {
    let step = |t: f64, bus: usize, dp: f64, dq: f64| LoadEvent {
        time: T::lit(t),
        node: bus - 1,
        action: LoadAction::Step { dp: T::lit(dp), dq: T::lit(dq) },
    };
    let act = |t: f64, bus: usize, action| LoadEvent { time: T::lit(t), node: bus - 1, action };
    let mut ev = vec![step(300.0, 28, 0.015, 0.0), step(600.0, 28, 0.0, 0.015)];
    for b in [20, 27] {
        ev.push(step(900.0, b, 0.0075, 0.0075));
    }
    for b in [20, 27, 28] {
        ev.push(act(1200.0, b, LoadAction::Reset));
    }
    for b in [12, 13, 43] {
        ev.push(step(1200.0, b, 0.0075, 0.0075));
    }
    for b in [20, 27, 28, 12, 13, 43] {
        ev.push(act(1500.0, b, LoadAction::NegateStep));
    }
    ev
}

/// The 57-bus family with the default configuration.
pub fn generate_ieee57<T: Real>(seed: u64) -> ScenarioFamily<T> {
    generate_ieee57_with(seed, &Ieee57Config::default())
        .expect("default 57-bus configuration is valid")
}

pub fn generate_ieee57_with<T: Real>(seed: u64, cfg: &Ieee57Config) -> Result<ScenarioFamily<T>> {
    if cfg.cell_of_bus.len() != N_BUSES || cfg.cell_of_bus.iter().any(|&c| c >= cfg.n_cells) {
        return Err(Error::Parameter("cell assignment must list 57 buses".into()));
    }
    let branches = parse_branch_data(IEEE57_BRANCH_DATA)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uni = |lo: f64, hi: f64| T::lit(rng.gen_range(lo..=hi));

    let mut nodes = Vec::with_capacity(N_BUSES);
    for bus in 1..=N_BUSES {
        let cell = cfg.cell_of_bus[bus - 1];
        let kind = if G_BUSES.contains(&bus) {
            NodeKind::G
        } else if I_BUSES.contains(&bus) {
            NodeKind::I
        } else {
            NodeKind::L
        };
        let mut node = NodeSpec::load(bus, cell, uni(1.2, 1.7));
        node.kind = kind;
        match kind {
            NodeKind::G => {
                node.inertia = Some(uni(20.0, 27.0));
                node.reactance_diff = Some(uni(0.12, 0.19));
                node.tau_voltage = Some(uni(6.4, 7.7));
            }
            NodeKind::I => node.inertia = Some(uni(4.0, 5.5)),
            NodeKind::L => {}
        }
        if kind.is_generating() {
            node.ppo = Some(cell);
            node.cost_weight = Some(T::lit(1.0 + 0.04 * (bus as f64 - 1.0)));
            node.pg_bounds = Some(Bounds::new(T::lit(cfg.pg_bounds.0), T::lit(cfg.pg_bounds.1)));
            node.voltage_bounds = Some(Bounds::new(
                T::lit(cfg.voltage_bounds.0),
                T::lit(cfg.voltage_bounds.1),
            ));
        }
        nodes.push(node);
    }
    for (bus, bs) in BUS_SHUNTS {
        nodes[bus - 1].shunt_susceptance += T::lit(bs);
    }
    let mut lines = Vec::with_capacity(branches.len());
    for rec in &branches {
        let half = T::lit(rec.b / 2.0);
        nodes[rec.from - 1].shunt_susceptance += half;
        nodes[rec.to - 1].shunt_susceptance += half;
        let mut line = branch_to_line::<T>(rec, rec.from - 1, rec.to - 1);
        if cfg.cell_of_bus[rec.from - 1] != cfg.cell_of_bus[rec.to - 1] {
            line.flow_limit = Some(T::lit(cfg.flow_limit));
            line.congestion_threshold = Some(T::lit(cfg.congestion_threshold));
        }
        lines.push(line);
    }
    let mut network = Network {
        nodes,
        lines,
        comm_edges: Vec::new(),
        boundary_edges: Vec::new(),
        n_cells: cfg.n_cells,
        gains: Gains::default(),
        bases: Bases::default(),
    };
    derive_comm_edges(&mut network);
    super::ensure_valid(&network)?;

    let mut theta: Vec<T> = (0..N_BUSES).map(|_| uni(-0.04, 0.014)).collect();
    let mut voltage: Vec<T> = (0..N_BUSES).map(|_| uni(0.98, 1.02)).collect();
    let mut preload = Vec::new();
    for &(a, b, p) in &cfg.preloads {
        let m = network
            .find_line(a, b)
            .ok_or_else(|| Error::Parameter(format!("no line between buses {a} and {b}")))?;
        let sign = if network.nodes[network.lines[m].from].id == a { 1.0 } else { -1.0 };
        preload.push((m, T::lit(sign * p)));
    }
    shape_tie_flows(&network, &mut theta, &mut voltage, &preload);

    Ok(ScenarioFamily {
        name: "ieee57".into(),
        network,
        theta,
        voltage,
        events: ieee57_events(),
        seed,
        horizon: T::lit(cfg.horizon),
        output_step: T::lit(cfg.output_step),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{validate_network, Mode};

    #[test]
    fn node_kinds_follow_table() {
        let fam = generate_ieee57::<f64>(1);
        let kinds: Vec<NodeKind> = fam.network.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(kinds[1], NodeKind::G);
        assert_eq!(kinds[3], NodeKind::I);
        assert_eq!(kinds[0], NodeKind::L);
        assert_eq!(kinds.iter().filter(|k| **k == NodeKind::G).count(), 19);
        assert_eq!(kinds.iter().filter(|k| **k == NodeKind::I).count(), 19);
        assert_eq!(kinds.iter().filter(|k| **k == NodeKind::L).count(), 19);
    }

    #[test]
    fn parameters_within_ranges() {
        let fam = generate_ieee57::<f64>(7);
        for n in &fam.network.nodes {
            assert!((1.2..=1.7).contains(&n.damping));
            match n.kind {
                NodeKind::G => {
                    assert!((20.0..=27.0).contains(&n.inertia.unwrap()));
                    assert!((0.12..=0.19).contains(&n.reactance_diff.unwrap()));
                    assert!((6.4..=7.7).contains(&n.tau_voltage.unwrap()));
                }
                NodeKind::I => assert!((4.0..=5.5).contains(&n.inertia.unwrap())),
                NodeKind::L => assert!(n.inertia.is_none()),
            }
            if let Some(w) = n.cost_weight {
                assert!((w - (1.0 + 0.04 * (n.id as f64 - 1.0))).abs() < 1e-15);
            }
        }
        for &u in &fam.voltage {
            assert!((0.98..=1.02).contains(&u));
        }
    }

    #[test]
    fn first_event_and_determinism() {
        let a = generate_ieee57::<f64>(3);
        let e = a.events[0];
        assert_eq!((e.time, e.node), (300.0, 27));
        assert_eq!(e.action, LoadAction::Step { dp: 0.015, dq: 0.0 });
        assert_eq!(a, generate_ieee57::<f64>(3));
        assert_ne!(a, generate_ieee57::<f64>(4));
    }

    #[test]
    fn variants_differ_in_topology() {
        let fam = generate_ieee57::<f64>(1);
        let n_ties = fam.network.inter_cell_lines().len();
        assert_eq!(n_ties, 16);
        let one = fam.network_for(Mode::I);
        assert_eq!(one.lines.len(), 80 - n_ties);
        assert!(one.boundary_edges.is_empty());
        assert!(validate_network(&one).is_empty());
        let two = fam.network_for(Mode::II);
        assert_eq!(two.lines.len(), 80);
        assert!(two.boundary_edges.is_empty());
        assert_eq!(fam.network_for(Mode::III).boundary_edges.len(), n_ties);
    }

    #[test]
    fn cells_and_generators() {
        let fam = generate_ieee57::<f64>(1);
        let gens = |k| {
            fam.network
                .cell_members(k)
                .into_iter()
                .filter(|&i| fam.network.nodes[i].kind.is_generating())
                .count()
        };
        assert_eq!((gens(0), gens(1), gens(2)), (9, 8, 21));
    }

    #[test]
    fn bad_partition_rejected() {
        let cfg = Ieee57Config { cell_of_bus: vec![0; 10], ..Default::default() };
        assert!(generate_ieee57_with::<f64>(1, &cfg).is_err());
        let mut cfg = Ieee57Config::default();
        cfg.preloads = vec![(1, 57, 0.01)];
        assert!(generate_ieee57_with::<f64>(1, &cfg).is_err());
    }
}
