use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use cellprice::netmodel::{random_small_instance, toy_3cell, LineSpec, Mode, Network, NodeKind, NodeSpec};
use cellprice::physics::{dominant_flow, AlgebraicWorkspace, Grid, PhysInputs, PhysRates, PhysState};
use cellprice::Error;

/// Nodal injections `S = V · conj(Y V)` built directly from complex phasors.
fn phasor_injections(net: &Network<f64>, theta: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<Complex64> = theta.iter().zip(u).map(|(&t, &m)| Complex64::from_polar(m, t)).collect();
    let mut current: Vec<Complex64> = net
        .nodes
        .iter()
        .zip(&v)
        .map(|(n, &vi)| Complex64::new(n.shunt_conductance, n.shunt_susceptance) * vi)
        .collect();
    for l in &net.lines {
        let y = Complex64::new(l.conductance, -l.susceptance);
        let i = y * (v[l.from] - v[l.to]);
        current[l.from] += i;
        current[l.to] -= i;
    }
    v.iter().zip(&current).map(|(&vi, &ii)| vi * ii.conj()).map(|s| (s.re, s.im)).unzip()
}

fn two_bus(g: f64, b: f64) -> Network<f64> {
    let mut a = NodeSpec::load(1, 0, 1.0);
    a.kind = NodeKind::G;
    Network {
        nodes: vec![a, NodeSpec::load(2, 0, 1.0)],
        lines: vec![LineSpec::new(0, 1, g, b)],
        comm_edges: vec![],
        boundary_edges: vec![],
        n_cells: 1,
        gains: Default::default(),
        bases: Default::default(),
    }
}

fn random_state(net: &Network<f64>, seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = net.n_nodes();
    let theta = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let u = (0..n).map(|_| rng.gen_range(0.9..1.1)).collect();
    (theta, u)
}

#[test]
fn flat_state_has_zero_injections() {
    let net = toy_3cell::<f64>(2).network;
    let grid = Grid::new(&net);
    let (p, q) = grid.injections(&[0.0; 6], &[1.0; 6]);
    assert!(p.iter().chain(&q).all(|v| v.abs() < 1e-13));
}

#[test]
fn lossless_two_bus_flows() {
    let grid = Grid::new(&two_bus(0.0, 5.0));
    let f = grid.line_flows(&[0.1, 0.0], &[1.0, 1.0])[0];
    assert_abs_diff_eq!(f.0, 5.0 * 0.1f64.sin(), epsilon = 1e-14);
    assert_abs_diff_eq!(f.0, 0.4992, epsilon = 1e-4);
    assert_abs_diff_eq!(f.1, -f.0, epsilon = 1e-14);
    let (_, q) = grid.injections(&[0.1, 0.0], &[1.0, 1.0]);
    assert_abs_diff_eq!(q[0], 5.0 * (1.0 - 0.1f64.cos()), epsilon = 1e-14);
    assert_abs_diff_eq!(q[0], 0.02498, epsilon = 1e-5);
}

#[test]
fn lossy_two_bus_loss_matches_branch_current() {
    let net = two_bus(1.0, 5.0);
    let grid = Grid::new(&net);
    let (theta, u) = ([0.1, 0.0], [1.0, 1.0]);
    let (pij, pji) = grid.line_flows(&theta, &u)[0];
    let v1 = Complex64::from_polar(1.0, 0.1);
    let v2 = Complex64::from_polar(1.0, 0.0);
    let y = Complex64::new(1.0, -5.0);
    let current = y * (v1 - v2);
    let r = (1.0 / y).re;
    let i2r = current.norm_sqr() * r;
    assert!(pij + pji > 0.0);
    assert_abs_diff_eq!(pij + pji, i2r, epsilon = 1e-14);
    let phi = grid.node_losses(&theta, &u);
    assert_abs_diff_eq!(phi.iter().sum::<f64>(), pij + pji, epsilon = 1e-14);
}

#[test]
fn injections_match_phasor_model_on_57_buses() {
    let fam = cellprice::netmodel::generate_ieee57::<f64>(11);
    let grid = Grid::new(&fam.network);
    for seed in 0..5 {
        let (theta, u) = random_state(&fam.network, seed);
        let (p, q) = grid.injections(&theta, &u);
        let (po, qo) = phasor_injections(&fam.network, &theta, &u);
        for i in 0..p.len() {
            assert_abs_diff_eq!(p[i], po[i], epsilon = 1e-9);
            assert_abs_diff_eq!(q[i], qo[i], epsilon = 1e-9);
        }
    }
}

#[test]
fn losses_sum_to_injections_and_to_line_losses() {
    let fam = cellprice::netmodel::generate_ieee57::<f64>(4);
    let net = fam.network_for(Mode::III);
    let grid = Grid::new(&net);
    let (theta, u) = random_state(&net, 9);
    let (p, _) = grid.injections(&theta, &u);
    let phi = grid.node_losses(&theta, &u);
    let total: f64 = p.iter().sum();
    assert_abs_diff_eq!(phi.iter().sum::<f64>(), total, epsilon = 1e-10);
    let lines: f64 = grid.line_flows(&theta, &u).iter().map(|(a, b)| a + b).sum();
    let shunts: f64 = net.nodes.iter().zip(&u).map(|(n, &v)| n.shunt_conductance * v * v).sum();
    assert_abs_diff_eq!(lines + shunts, total, epsilon = 1e-10);
}

#[test]
fn dominant_flow_branches() {
    assert_eq!(dominant_flow(0.5, -0.5), 0.5);
    assert_eq!(dominant_flow(0.52, -0.50), 0.52);
    assert_eq!(dominant_flow(0.50, -0.52), 0.52);
    assert_eq!(dominant_flow(-0.52, 0.50), -0.52);
}

#[test]
fn isolated_generator_accelerates_with_its_setpoint() {
    let mut g = NodeSpec::load(1, 0, 1.5);
    g.kind = NodeKind::G;
    g.inertia = Some(20.0);
    g.reactance_diff = Some(0.15);
    g.tau_voltage = Some(7.0);
    let net = Network {
        nodes: vec![g],
        lines: vec![],
        comm_edges: vec![],
        boundary_edges: vec![],
        n_cells: 1,
        gains: Default::default(),
        bases: Default::default(),
    };
    let grid = Grid::new(&net);
    let st = PhysState::zeros(1);
    let mut out = PhysRates::zeros(1);
    let inputs = PhysInputs { p_gen: &[0.1], u_exc: &[1.0], p_load: &[0.0], q_load: &[0.0] };
    grid.dae_rhs(&st, &inputs, &mut out).unwrap();
    assert_abs_diff_eq!(out.dmomentum[0], 0.1, epsilon = 1e-15);
    assert_eq!(out.dvoltage[0], 0.0);

    let mut st = PhysState::zeros(1);
    st.voltage[0] = 0.0;
    assert!(matches!(grid.dae_rhs(&st, &inputs, &mut out), Err(Error::SingularVoltage { node: 0 })));
}

#[test]
fn dead_load_node_residual_tracks_frequency() {
    let net = Network {
        nodes: vec![NodeSpec::load(1, 0, 1.3)],
        lines: vec![],
        comm_edges: vec![],
        boundary_edges: vec![],
        n_cells: 1,
        gains: Default::default(),
        bases: Default::default(),
    };
    let grid = Grid::new(&net);
    let mut st = PhysState::zeros(1);
    let mut out = PhysRates::zeros(1);
    let inputs = PhysInputs { p_gen: &[0.0], u_exc: &[0.0], p_load: &[0.0], q_load: &[0.0] };
    st.omega[0] = 0.2;
    grid.dae_rhs(&st, &inputs, &mut out).unwrap();
    assert_abs_diff_eq!(out.res_p[0], -1.3 * 0.2, epsilon = 1e-15);
    assert_eq!(out.res_q[0], 0.0);
}

/// G - L - G chain with a load at the middle bus.
fn chain() -> Network<f64> {
    let gen = |id| {
        let mut n = NodeSpec::load(id, 0, 1.5);
        n.kind = NodeKind::G;
        n.inertia = Some(22.0);
        n.reactance_diff = Some(0.15);
        n.tau_voltage = Some(7.0);
        n
    };
    Network {
        nodes: vec![gen(1), NodeSpec::load(2, 0, 1.4), gen(3)],
        lines: vec![LineSpec::new(0, 1, 1.0, 8.0), LineSpec::new(1, 2, 2.0, 12.0)],
        comm_edges: vec![],
        boundary_edges: vec![],
        n_cells: 1,
        gains: Default::default(),
        bases: Default::default(),
    }
}

#[test]
fn load_bus_solve_matches_bisection_on_phasor_model() {
    let net = chain();
    let grid = Grid::new(&net);
    let theta = [0.02, -0.01, 0.015];
    let (p_load, q_load) = ([0.0, 0.05, 0.0], [0.0, 0.03, 0.0]);
    let mut u = vec![1.01, 1.0, 0.99];
    let mut omega = vec![0.0; 3];
    let mut ws = AlgebraicWorkspace::new();
    grid.solve_load_algebraic(&theta, &mut u, &mut omega, &p_load, &q_load, &mut ws).unwrap();

    // Independent root of q_2(U_2) + q_load = 0 on the high-voltage branch.
    let resid = |x: f64| {
        let (_, q) = phasor_injections(&net, &theta, &[1.01, x, 0.99]);
        q[1] + q_load[1]
    };
    let (mut lo, mut hi) = (0.7, 1.3);
    assert!(resid(lo) * resid(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if resid(lo) * resid(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert_abs_diff_eq!(u[1], 0.5 * (lo + hi), epsilon = 1e-8);

    let (p, _) = phasor_injections(&net, &theta, &u);
    assert_abs_diff_eq!(omega[1], (-p_load[1] - p[1]) / 1.4, epsilon = 1e-10);
}

#[test]
fn impossible_load_is_reported() {
    let net = chain();
    let grid = Grid::new(&net);
    let mut u = vec![1.0, 1.0, 1.0];
    let mut omega = vec![0.0; 3];
    let mut ws = AlgebraicWorkspace::new();
    let err = grid
        .solve_load_algebraic(&[0.0; 3], &mut u, &mut omega, &[0.0; 3], &[0.0, 50.0, 0.0], &mut ws)
        .unwrap_err();
    assert!(matches!(err, Error::AlgebraicSolve { .. }));
}

#[test]
fn balanced_state_is_an_equilibrium() {
    let sc = random_small_instance::<f64>(3);
    let grid = Grid::new(&sc.network);
    let ic = &sc.initial;
    let n = grid.n_nodes();
    let st = PhysState { theta: ic.theta.clone(), omega: vec![0.0; n], voltage: ic.voltage.clone(), momentum: vec![0.0; n] };
    // Excitation that holds each G terminal voltage where it is.
    let (_, q) = grid.injections(&ic.theta, &ic.voltage);
    let u_exc: Vec<f64> = (0..n)
        .map(|i| {
            let x = sc.network.nodes[i].reactance_diff.unwrap_or(0.0);
            ic.voltage[i] + x * q[i] / ic.voltage[i]
        })
        .collect();
    let inputs = PhysInputs { p_gen: &vec![0.0; n], u_exc: &u_exc, p_load: &ic.p_load, q_load: &ic.q_load };
    let mut out = PhysRates::zeros(n);
    grid.dae_rhs(&st, &inputs, &mut out).unwrap();
    for v in out.dmomentum.iter().chain(&out.dvoltage).chain(&out.res_p).chain(&out.res_q) {
        assert!(v.abs() < 1e-12, "{v}");
    }
}

#[test]
fn single_precision_injections_agree() {
    let net64 = toy_3cell::<f64>(1).network;
    let net32 = toy_3cell::<f32>(1).network;
    let theta = [0.01, -0.02, 0.005, 0.0, 0.015, -0.01];
    let u = [1.0, 0.99, 1.01, 1.0, 0.98, 1.02];
    let (p64, _) = Grid::new(&net64).injections(&theta, &u);
    let t32: Vec<f32> = theta.iter().map(|&v| v as f32).collect();
    let u32: Vec<f32> = u.iter().map(|&v| v as f32).collect();
    let (p32, _) = Grid::new(&net32).injections(&t32, &u32);
    for (a, b) in p64.iter().zip(&p32) {
        assert_abs_diff_eq!(*a, *b as f64, epsilon = 1e-4);
    }
}

proptest! {
    #[test]
    fn lossless_injections_are_odd_in_angle(seed in 0u64..500) {
        let mut net = random_small_instance::<f64>(seed).network;
        for l in &mut net.lines {
            l.conductance = 0.0;
        }
        for n in &mut net.nodes {
            n.shunt_conductance = 0.0;
        }
        let grid = Grid::new(&net);
        let (theta, u) = random_state(&net, seed);
        let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
        let (p, _) = grid.injections(&theta, &u);
        let (pn, _) = grid.injections(&neg, &u);
        for (a, b) in p.iter().zip(&pn) {
            prop_assert!((a + b).abs() < 1e-12);
        }
        prop_assert!(p.iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(grid.node_losses(&theta, &u).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn loss_identity_on_random_states(seed in 0u64..500) {
        let net = random_small_instance::<f64>(seed).network;
        let grid = Grid::new(&net);
        let (theta, u) = random_state(&net, seed + 1);
        let (p, _) = grid.injections(&theta, &u);
        let phi = grid.node_losses(&theta, &u);
        prop_assert!((p.iter().sum::<f64>() - phi.iter().sum::<f64>()).abs() < 1e-10);
    }
}
