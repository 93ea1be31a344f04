//! Equilibrium checks against the centralized problem and economic identities.

use approx::assert_abs_diff_eq;
use cellprice::netmodel::{
    generate_ieee57, random_small_instance, toy_2bus, toy_3cell, KappaPolicy, Mode, DEFAULT_SEED,
};
use cellprice::oracle::{
    balance_initial_loads, economic_report, kkt_from_input, kkt_residuals, solve_centralized,
    solve_centralized_input, KktInput,
};
use cellprice::simulator::{integrate, steady_state, Model, SimOptions, Simulator};
use cellprice::{Error, Grid, Scenario, SimState, Trajectory};

fn settle(sc: Scenario) -> (Model<f64>, SimState, Trajectory) {
    let model = Model::new(&sc).unwrap();
    let o = SimOptions { record_states: false, ..SimOptions::default() };
    let traj = integrate(sc, o).unwrap();
    let st = traj.final_state.clone().unwrap();
    (model, st, traj)
}

fn toy(kappa: Option<Vec<f64>>) -> Scenario {
    let mut sc = toy_3cell::<f64>(1).scenario(Mode::III).unwrap();
    if let Some(k) = kappa {
        sc.kappa = KappaPolicy::Fixed(k);
    }
    sc
}

/// Lossless two-bus equilibrium: the generator covers the 0.05 load at
/// marginal cost, the single edge multiplier carries the transfer.
fn two_bus_equilibrium() -> (Model<f64>, KktInput<f64>) {
    let sc = toy_2bus::<f64>();
    let model = Model::new(&sc).unwrap();
    let b = model.ppo.exc_bounds[0];
    let inp = KktInput {
        p_g: vec![0.05],
        u_exc: vec![0.5 * (b.lo + b.hi)],
        u_inv: vec![],
        mu: [vec![0.0], vec![0.0], vec![0.0], vec![0.0], vec![], vec![]],
        lambda: vec![0.05, 0.05],
        omega: vec![0.0, 0.0],
        phi: vec![0.0, 0.0],
        p_load: vec![0.0, 0.05],
        kappa: vec![1.0],
        d_nu: vec![-0.05, 0.05],
    };
    (model, inp)
}

#[test]
fn analytic_two_bus_equilibrium_passes() {
    let (model, inp) = two_bus_equilibrium();
    let r = kkt_from_input(&model, &inp, 1e-10);
    assert!(r.pass, "{:?}", r.worst());
    assert!(r.groups().iter().all(|(_, v)| *v < 1e-10));
}

#[test]
fn price_perturbation_shows_up_linearly() {
    let (model, mut inp) = two_bus_equilibrium();
    inp.lambda[0] += 1e-3;
    let r = kkt_from_input(&model, &inp, 1e-6);
    assert!(!r.pass);
    assert_abs_diff_eq!(r.stationarity_pg, 1e-3, epsilon = 1e-12);
    assert_abs_diff_eq!(r.consensus, 1e-3, epsilon = 1e-12);
}

#[test]
fn violated_limit_and_negative_multiplier_reported() {
    let (model, mut inp) = two_bus_equilibrium();
    inp.p_g[0] = model.ppo.pg_bounds[0].hi + 0.01;
    inp.mu[0][0] = -0.2;
    let r = kkt_from_input(&model, &inp, 1e-6);
    assert_abs_diff_eq!(r.primal_bounds, 0.01, epsilon = 1e-12);
    assert_abs_diff_eq!(r.dual_feasibility, 0.2, epsilon = 1e-12);
}

#[test]
fn centralized_two_bus_matches_closed_form() {
    let (model, inp) = two_bus_equilibrium();
    let c = solve_centralized_input(&model, &inp).unwrap();
    assert_abs_diff_eq!(c.p_g[0], 0.05, epsilon = 1e-12);
    assert_abs_diff_eq!(c.price[0], 0.05, epsilon = 1e-12);
}

#[test]
fn identical_generators_share_equally() {
    let mut sc = toy(None);
    for n in &mut sc.network.nodes {
        if n.cost_weight.is_some() {
            n.cost_weight = Some(1.0);
        }
    }
    let model = Model::new(&sc).unwrap();
    let sim = Simulator::new(sc, SimOptions::default()).unwrap();
    let mut inp = KktInput::from_state(&model, sim.state());
    inp.phi.iter_mut().for_each(|v| *v = 0.0);
    inp.p_load = vec![0.0, 0.06, 0.0, 0.0, 0.0, 0.04];
    inp.omega.iter_mut().for_each(|v| *v = 0.0);
    let c = solve_centralized_input(&model, &inp).unwrap();
    assert_eq!(c.p_g.len(), 4);
    for &p in &c.p_g {
        assert_abs_diff_eq!(p, 0.025, epsilon = 1e-12);
    }
    assert!(c.mu_g_hi.iter().chain(&c.mu_g_lo).all(|&m| m == 0.0));

    let mut doubled = inp.clone();
    doubled.kappa = vec![2.0; 3];
    let d = solve_centralized_input(&model, &doubled).unwrap();
    for (a, b) in c.p_g.iter().zip(&d.p_g) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    // one unit capped below its share: it binds with a positive multiplier
    let mut model = model;
    model.ppo.pg_bounds[0].hi = 0.01;
    let c = solve_centralized_input(&model, &inp).unwrap();
    assert_abs_diff_eq!(c.p_g[0], 0.01, epsilon = 1e-12);
    for &p in &c.p_g[1..] {
        assert_abs_diff_eq!(p, 0.03, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(c.mu_g_hi[0], 0.02, epsilon = 1e-12);

    // demand beyond total capacity has no feasible dispatch
    let hi: f64 = model.ppo.pg_bounds.iter().map(|b| b.hi).sum();
    inp.p_load[1] = 2.0 * hi;
    assert!(matches!(solve_centralized_input(&model, &inp), Err(Error::CentralizedSolve { .. })));
}

#[test]
fn converged_toy_matches_centralized_optimum() {
    let (model, st, traj) = settle(toy(None));
    let ss = steady_state(&traj, 5.0, traj.end_time() + 1.0, 10.0).unwrap();
    assert!(ss.converged);
    let r = kkt_residuals(&model, &st, 1e-5);
    assert!(r.pass, "{:?}", r.worst());
    assert!(r.max_frequency < 1e-6);
    let c = solve_centralized(&model, &st).unwrap();
    let p = &st.x[model.layout.p_g.clone()];
    for (a, b) in p.iter().zip(&c.p_g) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-5);
    }

    let mut bad = st.clone();
    bad.x[model.layout.lambda.start] += 1e-3;
    let r = kkt_residuals(&model, &bad, 1e-5);
    assert!(!r.pass);
    assert!(r.consensus > 9e-4);
}

#[test]
fn random_instances_match_centralized_optimum() {
    for seed in 1..=3 {
        let (model, st, _) = settle(random_small_instance(seed));
        let c = solve_centralized(&model, &st).unwrap();
        let p = &st.x[model.layout.p_g.clone()];
        for (a, b) in p.iter().zip(&c.p_g) {
            assert!((a - b).abs() < 1e-5, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn market_clears_at_uniform_price() {
    let (model, _, traj) = settle(toy(None));
    let econ = economic_report(&model, &traj);
    assert_eq!(econ.len(), traj.len());
    let last = econ.last().unwrap();
    assert!(last.total_cell_profit().abs() < 1e-8, "{}", last.total_cell_profit());
    // at t = 0 nothing is generated and prices are zero
    assert!(econ[0].producer_profit.iter().all(|&p| p == 0.0));
}

#[test]
fn frequency_penalty_vanishes_at_nominal_frequency() {
    let (model, _, traj) = settle(toy(None));
    let d = traj.derived.last().unwrap();
    let econ = economic_report(&model, &traj);
    let mut expect = vec![0.0; 3];
    for (k, &i) in model.ppo.gen_nodes.iter().enumerate() {
        let p = d.p_g[k];
        expect[model.ppo.owner[k]] += -p * p / (2.0 * model.ppo.cost.weights[k]) + d.lambda[i] * p;
    }
    for (a, b) in econ.last().unwrap().producer_profit.iter().zip(&expect) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
}

#[test]
fn zonal_prices_follow_participation_factors() {
    let (_, _, scaled) = settle(toy(Some(vec![1.0, 2.0, 1.0])));
    let b = scaled.derived.last().unwrap();
    let ratio = b.zonal_price[1] / b.zonal_price[0];
    assert!((ratio - 2.0).abs() < 1e-6, "{ratio}");
    assert!((b.zonal_price[2] - b.zonal_price[0]).abs() < 1e-6 * b.zonal_price[0].abs());
}

#[test]
fn uniform_scaling_of_kappa_is_invisible() {
    let (m, st1, _) = settle(toy(None));
    let (_, st2, _) = settle(toy(Some(vec![2.0; 3])));
    let l = &m.layout;
    for r in [l.p_g.clone(), l.u_exc.clone(), l.u_inv.clone()] {
        for i in r {
            assert!((st1.x[i] - st2.x[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn slower_controllers_reach_the_same_equilibrium() {
    let (m, st1, _) = settle(toy(None));
    let mut sc = toy(None);
    sc.network.gains = sc.network.gains.scaled(3.0);
    sc.horizon = 1200.0;
    let (_, st2, _) = settle(sc);
    let l = &m.layout;
    for r in [l.p_g.clone(), l.u_exc.clone(), l.u_inv.clone()] {
        for i in r {
            assert!((st1.x[i] - st2.x[i]).abs() < 1e-6, "{} vs {}", st1.x[i], st2.x[i]);
        }
    }
}

#[test]
fn flat_start_needs_no_load() {
    let net = toy_2bus::<f64>().network;
    let (p, q) = balance_initial_loads(&net, &[0.0, 0.0], &[1.0, 1.0]);
    assert!(p.iter().chain(&q).all(|v| v.abs() < 1e-15));
}

#[test]
fn balanced_loads_make_the_start_stationary() {
    for seed in 1..=4 {
        let sc = random_small_instance::<f64>(seed);
        let (p, _) = Grid::new(&sc.network).injections(&sc.initial.theta, &sc.initial.voltage);
        for (pl, pi) in sc.initial.p_load.iter().zip(&p) {
            assert_abs_diff_eq!(*pl, -pi, epsilon = 1e-15);
        }
        let sim = Simulator::new(sc, SimOptions::default()).unwrap();
        let worst = sim.derivative().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-10, "seed {seed}: {worst:e}");
    }
}

#[test]
fn ieee57_system_holds_its_initial_point() {
    let mut sc = generate_ieee57::<f64>(DEFAULT_SEED).scenario(Mode::III).unwrap();
    sc.events.clear();
    sc.horizon = 1.0;
    let sim = Simulator::new(sc, SimOptions::default()).unwrap();
    let x0 = sim.state().x.clone();
    let traj = sim.integrate().unwrap();
    let x1 = traj.final_state.unwrap().x;
    let drift = x0.iter().zip(&x1).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift < 1e-8, "{drift:e}");
}
