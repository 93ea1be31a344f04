//! Small hand-built systems used by tests and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

use super::family::{derive_comm_edges, shape_tie_flows, ScenarioFamily};
use super::{
    assemble_scenario, Bases, Bounds, Gains, KappaPolicy, LoadAction, LoadEvent, LineSpec, Mode,
    Network, NodeKind, NodeSpec, Scenario,
};

fn generating<T: Real>(
    id: usize,
    kind: NodeKind,
    cell: usize,
    damping: f64,
    inertia: f64,
    pg: (f64, f64),
    u: (f64, f64),
) -> NodeSpec<T> {
    let mut n = NodeSpec::load(id, cell, T::lit(damping));
    n.kind = kind;
    n.ppo = Some(cell);
    n.inertia = Some(T::lit(inertia));
    if kind == NodeKind::G {
        n.reactance_diff = Some(T::lit(0.15));
        n.tau_voltage = Some(T::lit(7.0));
    }
    n.cost_weight = Some(T::lit(1.0 + 0.04 * (id as f64 - 1.0)));
    n.pg_bounds = Some(Bounds::new(T::lit(pg.0), T::lit(pg.1)));
    n.voltage_bounds = Some(Bounds::new(T::lit(u.0), T::lit(u.1)));
    n
}

fn network<T: Real>(nodes: Vec<NodeSpec<T>>, lines: Vec<LineSpec<T>>, n_cells: usize) -> Network<T> {
    let mut net = Network {
        nodes,
        lines,
        comm_edges: Vec::new(),
        boundary_edges: Vec::new(),
        n_cells,
        gains: Gains::default(),
        bases: Bases::default(),
    };
    derive_comm_edges(&mut net);
    net
}

/// One generator feeding one load over a single line, one cell. A load step
/// of 0.05 p.u. at the load bus occurs at t = 5 s.
pub fn toy_2bus<T: Real>() -> Scenario<T> {
    let nodes = vec![
        generating(1, NodeKind::G, 0, 1.5, 22.0, (-0.5, 0.5), (0.9, 1.1)),
        NodeSpec::load(2, 0, T::lit(1.4)),
    ];
    let lines = vec![LineSpec::new(0, 1, T::lit(1.0), T::lit(10.0))];
    let net = network(nodes, lines, 1);
    let events = vec![LoadEvent {
        time: T::lit(5.0),
        node: 1,
        action: LoadAction::Step { dp: T::lit(0.05), dq: T::lit(0.0) },
    }];
    assemble_scenario(
        "toy-2bus",
        net,
        Mode::III,
        vec![T::zero(), T::lit(-0.01)],
        vec![T::one(), T::lit(0.99)],
        events,
        0,
        T::lit(30.0),
        T::lit(0.1),
    )
    .expect("2-bus fixture is valid")
}

/// Six buses in three cells of two, tie lines forming a triangle of cells.
/// Line parameters and the initial point are drawn from `seed`.
pub fn toy_3cell<T: Real>(seed: u64) -> ScenarioFamily<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pg = (-0.05, 0.08);
    let u = (0.95, 1.05);
    let mut a = || rng.gen_range(1.2..=1.7);
    let nodes = vec![
        generating(1, NodeKind::G, 0, a(), 22.0, pg, u),
        NodeSpec::load(2, 0, T::lit(a())),
        generating(3, NodeKind::I, 1, a(), 4.5, pg, u),
        generating(4, NodeKind::G, 1, a(), 24.0, pg, u),
        generating(5, NodeKind::I, 2, a(), 5.0, pg, u),
        NodeSpec::load(6, 2, T::lit(a())),
    ];
    let pairs = [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0)];
    let lines = pairs
        .iter()
        .map(|&(i, j)| {
            LineSpec::new(i, j, T::lit(rng.gen_range(1.0..=3.0)), T::lit(rng.gen_range(8.0..=15.0)))
        })
        .map(|mut l| {
            if l.from / 2 != l.to / 2 {
                l.flow_limit = Some(T::lit(0.2));
                l.congestion_threshold = Some(T::lit(0.8));
            }
            l
        })
        .collect();
    let net = network(nodes, lines, 3);
    let mut theta: Vec<T> = (0..6).map(|_| T::lit(rng.gen_range(-0.02..=0.01))).collect();
    let mut voltage: Vec<T> = (0..6).map(|_| T::lit(rng.gen_range(0.98..=1.02))).collect();
    shape_tie_flows(&net, &mut theta, &mut voltage, &[]);
    let events = vec![
        LoadEvent {
            time: T::lit(5.0),
            node: 1,
            action: LoadAction::Step { dp: T::lit(0.03), dq: T::lit(0.01) },
        },
        LoadEvent {
            time: T::lit(5.0),
            node: 5,
            action: LoadAction::Step { dp: T::lit(-0.01), dq: T::lit(0.0) },
        },
    ];
    ScenarioFamily {
        name: "toy-3cell".into(),
        network: net,
        theta,
        voltage,
        events,
        seed,
        horizon: T::lit(400.0),
        output_step: T::lit(0.1),
    }
}

/// A random connected instance with 3 to 6 buses, 1 to 3 cells, at least one
/// generating node per cell, boundary communication on every tie line and
/// uniform fixed participation factors. The horizon leaves room for the
/// slowest draws, whose price modes take well over 400 s to settle.
pub fn random_small_instance<T: Real>(seed: u64) -> Scenario<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=6usize);
    let n_cells = rng.gen_range(1..=3usize.min(n / 2).max(1));
    // Contiguous cell blocks; the first node of each block generates.
    let mut cell = vec![0; n];
    let mut cuts: Vec<usize> = (1..n).collect();
    while cuts.len() > n_cells - 1 {
        let k = rng.gen_range(0..cuts.len());
        cuts.remove(k);
    }
    for (i, c) in cell.iter_mut().enumerate() {
        *c = cuts.iter().filter(|&&x| x <= i).count();
    }
    let pg = (-0.1, 0.1);
    let u = (0.95, 1.05);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let first = i == 0 || cell[i] != cell[i - 1];
        let r: f64 = rng.gen();
        let kind = if first || r < 0.4 {
            if rng.gen_bool(0.5) { NodeKind::G } else { NodeKind::I }
        } else {
            NodeKind::L
        };
        let a = rng.gen_range(1.2..=1.7);
        let node = match kind {
            NodeKind::G => generating(i + 1, kind, cell[i], a, rng.gen_range(20.0..=27.0), pg, u),
            NodeKind::I => generating(i + 1, kind, cell[i], a, rng.gen_range(4.0..=5.5), pg, u),
            NodeKind::L => NodeSpec::load(i + 1, cell[i], T::lit(a)),
        };
        nodes.push(node);
    }
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    if n > 3 && rng.gen_bool(0.5) {
        pairs.push((0, n - 1));
    }
    let lines = pairs
        .iter()
        .map(|&(i, j)| {
            LineSpec::new(i, j, T::lit(rng.gen_range(0.5..=3.0)), T::lit(rng.gen_range(5.0..=15.0)))
        })
        .collect();
    let net = network(nodes, lines, n_cells);
    let theta: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-0.02..=0.01))).collect();
    let voltage: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(0.98..=1.02))).collect();
    let load_bus = rng.gen_range(0..n);
    let events = vec![LoadEvent {
        time: T::lit(2.0),
        node: load_bus,
        action: LoadAction::Step { dp: T::lit(rng.gen_range(-0.05..=0.05)), dq: T::zero() },
    }];
    let mut sc = assemble_scenario(
        format!("random-{seed}"),
        net,
        Mode::III,
        theta,
        voltage,
        events,
        seed,
        T::lit(2000.0),
        T::lit(0.1),
    )
    .expect("random instance is valid by construction");
    sc.kappa = KappaPolicy::Fixed(vec![T::one(); n_cells]);
    sc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::validate_network;

    #[test]
    fn fixtures_are_valid() {
        assert!(validate_network(&toy_2bus::<f64>().network).is_empty());
        let fam = toy_3cell::<f64>(5);
        for m in Mode::ALL {
            fam.scenario(m).unwrap();
        }
        for s in 0..40 {
            let sc = random_small_instance::<f64>(s);
            assert!(sc.network.n_nodes() <= 6);
            sc.validate().unwrap();
        }
    }

    #[test]
    fn fixtures_work_in_single_precision() {
        let sc = toy_2bus::<f32>();
        assert_eq!(sc.network.n_nodes(), 2);
    }
}
