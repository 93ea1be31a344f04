use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;
use crate::netmodel::Bounds;
use crate::ppo::ConvexCost;
use crate::scalar::Real;
use crate::simulator::{Model, SimState};

/// Largest absolute residual of every KKT condition group of the
/// centralized problem, evaluated at a closed-loop state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity_pg: f64,
    pub stationarity_uexc: f64,
    pub stationarity_uinv: f64,
    pub complementarity_pg_lo: f64,
    pub complementarity_pg_hi: f64,
    pub complementarity_uexc_lo: f64,
    pub complementarity_uexc_hi: f64,
    pub complementarity_uinv_lo: f64,
    pub complementarity_uinv_hi: f64,
    pub primal_bounds: f64,
    /// `|Σ p_g - Σ p_ℓ - Φ|` per communication component, maximum.
    pub primal_balance: f64,
    pub dual_feasibility: f64,
    /// `(D_c°)ᵀ λ̂` with `λ̂ = λ / κ`.
    pub consensus: f64,
    /// `-p_g + φ + p_ℓ - D_c⁺ ν` of the price dynamics.
    pub cc_stationarity: f64,
    /// Largest frequency deviation (reported, not part of `pass`).
    pub max_frequency: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl KktReport {
    /// Named groups in report order (excluding `max_frequency`).
    pub fn groups(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("stationarity_pg", self.stationarity_pg),
            ("stationarity_uexc", self.stationarity_uexc),
            ("stationarity_uinv", self.stationarity_uinv),
            ("complementarity_pg_lo", self.complementarity_pg_lo),
            ("complementarity_pg_hi", self.complementarity_pg_hi),
            ("complementarity_uexc_lo", self.complementarity_uexc_lo),
            ("complementarity_uexc_hi", self.complementarity_uexc_hi),
            ("complementarity_uinv_lo", self.complementarity_uinv_lo),
            ("complementarity_uinv_hi", self.complementarity_uinv_hi),
            ("primal_bounds", self.primal_bounds),
            ("primal_balance", self.primal_balance),
            ("dual_feasibility", self.dual_feasibility),
            ("consensus", self.consensus),
            ("cc_stationarity", self.cc_stationarity),
        ]
    }

    pub fn worst(&self) -> (&'static str, f64) {
        self.groups()
            .into_iter()
            .fold(("none", 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

/// Equilibrium data extracted from a closed-loop state.
#[derive(Clone, Debug, PartialEq)]
pub struct KktInput<T> {
    pub p_g: Vec<T>,
    pub u_exc: Vec<T>,
    pub u_inv: Vec<T>,
    pub mu: [Vec<T>; 6],
    pub lambda: Vec<T>,
    pub omega: Vec<T>,
    /// Per-node loss terms.
    pub phi: Vec<T>,
    pub p_load: Vec<T>,
    pub kappa: Vec<T>,
    /// `D_c⁺ ν` per node.
    pub d_nu: Vec<T>,
}

impl<T: Real> KktInput<T> {
    pub fn from_state(model: &Model<T>, st: &SimState<T>) -> Self {
        let l = &model.layout;
        let x = &st.x;
        let n = l.n_nodes;
        let mut voltage = vec![T::zero(); n];
        let mut omega = vec![T::zero(); n];
        model.node_voltages(x, &st.u_load, &mut voltage);
        model.node_frequencies(x, &st.omega_load, &mut omega);
        let theta = &x[l.theta.clone()];
        let kappa = model.kappa(x);
        let mut comm = model.comm().clone();
        comm.rebuild_boundary_weights(&kappa);
        let mut d_nu = vec![T::zero(); n];
        comm.apply(&x[l.nu.clone()], &mut d_nu);
        Self {
            p_g: x[l.p_g.clone()].to_vec(),
            u_exc: x[l.u_exc.clone()].to_vec(),
            u_inv: x[l.u_inv.clone()].to_vec(),
            mu: [
                x[l.mu_g_lo.clone()].to_vec(),
                x[l.mu_g_hi.clone()].to_vec(),
                x[l.mu_exc_lo.clone()].to_vec(),
                x[l.mu_exc_hi.clone()].to_vec(),
                x[l.mu_inv_lo.clone()].to_vec(),
                x[l.mu_inv_hi.clone()].to_vec(),
            ],
            lambda: x[l.lambda.clone()].to_vec(),
            omega,
            phi: model.grid.node_losses(theta, &voltage),
            p_load: st.p_load.clone(),
            kappa,
            d_nu,
        }
    }
}

fn max_of<T: Real>(it: impl Iterator<Item = T>) -> f64 {
    it.fold(0.0, |m, v| m.max(v.to_f64_lossy().abs()))
}

/// KKT residuals of the centralized problem with per-cell cost scaling
/// `1/κ_k`, using `λ̂ = λ / κ` and `μ̂_g = μ_g / κ`.
pub fn kkt_residuals<T: Real>(model: &Model<T>, st: &SimState<T>, tolerance: f64) -> KktReport {
    let inp = KktInput::from_state(model, st);
    kkt_from_input(model, &inp, tolerance)
}

pub fn kkt_from_input<T: Real>(model: &Model<T>, inp: &KktInput<T>, tolerance: f64) -> KktReport {
    let l = &model.layout;
    let ppo = &model.ppo;
    let kap = |node: usize| inp.kappa[model.cell_of(node)];
    let [mgl, mgh, mel, meh, mil, mih] = &inp.mu;

    let stationarity_pg = max_of(l.gen_nodes.iter().enumerate().map(|(k, &i)| {
        let kk = kap(i);
        -ppo.cost.gradient(k, inp.p_g[k]) / kk - inp.omega[i] + inp.lambda[i] / kk
            + mgl[k] / kk
            - mgh[k] / kk
    }));
    let stationarity_uexc = max_of((0..l.g_nodes.len()).map(|k| mel[k] - meh[k]));
    let stationarity_uinv = max_of((0..l.i_nodes.len()).map(|k| mil[k] - mih[k]));
    let comp = |mu: &[T], v: &[T], b: &[Bounds<T>], lower: bool| {
        max_of((0..v.len()).map(|k| {
            let slack = if lower { b[k].lo - v[k] } else { v[k] - b[k].hi };
            mu[k] * slack
        }))
    };
    let primal_bounds = max_of(
        (0..inp.p_g.len())
            .map(|k| ppo.pg_bounds[k].excess(inp.p_g[k]))
            .chain((0..inp.u_exc.len()).map(|k| ppo.exc_bounds[k].excess(inp.u_exc[k])))
            .chain((0..inp.u_inv.len()).map(|k| ppo.inv_bounds[k].excess(inp.u_inv[k]))),
    );
    let dual_feasibility = max_of(inp.mu.iter().flatten().map(|&m| m.min(T::zero())));

    let n = l.n_nodes;
    let edges = model.comm_edges();
    let comp_of = graph::components(n, edges);
    let n_comp = comp_of.iter().max().map_or(0, |m| m + 1);
    let mut imbalance = vec![T::zero(); n_comp];
    for i in 0..n {
        imbalance[comp_of[i]] += inp.phi[i] + inp.p_load[i];
    }
    for (k, &i) in l.gen_nodes.iter().enumerate() {
        imbalance[comp_of[i]] -= inp.p_g[k];
    }
    let primal_balance = max_of(imbalance.into_iter());
    let lam_hat: Vec<T> = (0..n).map(|i| inp.lambda[i] / kap(i)).collect();
    let consensus = max_of(edges.iter().map(|&(i, j)| lam_hat[i] - lam_hat[j]));
    let mut pg_node = vec![T::zero(); n];
    for (k, &i) in l.gen_nodes.iter().enumerate() {
        pg_node[i] = inp.p_g[k];
    }
    let cc_stationarity =
        max_of((0..n).map(|i| -pg_node[i] + inp.phi[i] + inp.p_load[i] - inp.d_nu[i]));
    let mut r = KktReport {
        stationarity_pg,
        stationarity_uexc,
        stationarity_uinv,
        complementarity_pg_lo: comp(mgl, &inp.p_g, &ppo.pg_bounds, true),
        complementarity_pg_hi: comp(mgh, &inp.p_g, &ppo.pg_bounds, false),
        complementarity_uexc_lo: comp(mel, &inp.u_exc, &ppo.exc_bounds, true),
        complementarity_uexc_hi: comp(meh, &inp.u_exc, &ppo.exc_bounds, false),
        complementarity_uinv_lo: comp(mil, &inp.u_inv, &ppo.inv_bounds, true),
        complementarity_uinv_hi: comp(mih, &inp.u_inv, &ppo.inv_bounds, false),
        primal_bounds,
        primal_balance,
        dual_feasibility,
        consensus,
        cc_stationarity,
        max_frequency: max_of(inp.omega.iter().copied()),
        tolerance,
        pass: false,
    };
    r.pass = r.groups().iter().all(|(_, v)| *v <= tolerance);
    r
}

/// Optimizer of the centralized problem at a frozen operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralizedSolution<T> {
    pub p_g: Vec<T>,
    pub u_exc: Vec<T>,
    pub u_inv: Vec<T>,
    /// Balance multiplier `λ̂` per communication component.
    pub price: Vec<T>,
    /// Multipliers of the generation limits (scaled problem).
    pub mu_g_lo: Vec<T>,
    pub mu_g_hi: Vec<T>,
    /// Remaining balance violation per component (zero unless infeasible).
    pub balance_residual: Vec<T>,
}

const BISECTION_STEPS: usize = 200;

/// Minimizer over `[lo, hi]` of `C_k(p)/κ + (ω - λ̂) p`, by bisection on the
/// monotone derivative.
fn best_response<T: Real, C: ConvexCost<T>>(cost: &C, k: usize, kappa: T, omega: T, price: T, b: Bounds<T>) -> T {
    let d = |p: T| cost.gradient(k, p) / kappa + omega - price;
    if d(b.lo) >= T::zero() {
        return b.lo;
    }
    if d(b.hi) <= T::zero() {
        return b.hi;
    }
    let (mut a, mut z) = (b.lo, b.hi);
    for _ in 0..BISECTION_STEPS {
        let m = (a + z) * T::lit(0.5);
        if m <= a || m >= z {
            break;
        }
        if d(m) < T::zero() {
            a = m;
        } else {
            z = m;
        }
    }
    (a + z) * T::lit(0.5)
}

/// Solves
/// `min Σ C_i(p_i)/κ_{k_i} + Σ ω_i p_i` s.t. `Σ p_g = Σ p_ℓ + Φ` per
/// communication component and all box limits, with `Φ`, `p_ℓ`, `ω` frozen
/// at the given state. Voltages have no cost; the frozen values projected
/// onto their limits are returned.
pub fn solve_centralized<T: Real>(model: &Model<T>, st: &SimState<T>) -> Result<CentralizedSolution<T>> {
    let inp = KktInput::from_state(model, st);
    solve_centralized_input(model, &inp)
}

pub fn solve_centralized_input<T: Real>(model: &Model<T>, inp: &KktInput<T>) -> Result<CentralizedSolution<T>> {
    let l = &model.layout;
    let ppo = &model.ppo;
    let n = l.n_nodes;
    let edges = model.comm_edges();
    let comp_of = graph::components(n, edges);
    let n_comp = comp_of.iter().max().map_or(0, |m| m + 1);
    let mut demand = vec![T::zero(); n_comp];
    for i in 0..n {
        demand[comp_of[i]] += inp.phi[i] + inp.p_load[i];
    }
    let kap = |node: usize| inp.kappa[model.cell_of(node)];
    let mut p_g = vec![T::zero(); l.gen_nodes.len()];
    let mut price = vec![T::zero(); n_comp];
    let mut residual = vec![T::zero(); n_comp];
    for c in 0..n_comp {
        let members: Vec<(usize, usize)> = l
            .gen_nodes
            .iter()
            .enumerate()
            .filter(|(_, &i)| comp_of[i] == c)
            .map(|(k, &i)| (k, i))
            .collect();
        let supply = |pr: T, out: &mut Vec<T>| {
            let mut s = T::zero();
            for &(k, i) in &members {
                let p = best_response(&ppo.cost, k, kap(i), inp.omega[i], pr, ppo.pg_bounds[k]);
                out[k] = p;
                s += p;
            }
            s
        };
        // Bracket the price, then bisect the monotone total supply.
        let mut lo = -T::one();
        let mut hi = T::one();
        let mut grow = 0;
        while supply(lo, &mut p_g) > demand[c] && grow < 200 {
            lo *= T::lit(2.0);
            grow += 1;
        }
        while supply(hi, &mut p_g) < demand[c] && grow < 400 {
            hi *= T::lit(2.0);
            grow += 1;
        }
        if grow >= 400 {
            return Err(Error::CentralizedSolve {
                iterations: grow,
                residual: (supply(hi, &mut p_g) - demand[c]).to_f64_lossy(),
            });
        }
        for _ in 0..BISECTION_STEPS {
            let m = (lo + hi) * T::lit(0.5);
            if m <= lo || m >= hi {
                break;
            }
            if supply(m, &mut p_g) < demand[c] {
                lo = m;
            } else {
                hi = m;
            }
        }
        price[c] = (lo + hi) * T::lit(0.5);
        residual[c] = supply(price[c], &mut p_g) - demand[c];
    }
    let mut mu_g_lo = vec![T::zero(); p_g.len()];
    let mut mu_g_hi = vec![T::zero(); p_g.len()];
    for (k, &i) in l.gen_nodes.iter().enumerate() {
        let s = -ppo.cost.gradient(k, p_g[k]) / kap(i) - inp.omega[i] + price[comp_of[i]];
        let b = ppo.pg_bounds[k];
        if p_g[k] >= b.hi && s > T::zero() {
            mu_g_hi[k] = s;
        } else if p_g[k] <= b.lo && s < T::zero() {
            mu_g_lo[k] = -s;
        }
    }
    let clamp = |v: T, b: Bounds<T>| v.max(b.lo).min(b.hi);
    Ok(CentralizedSolution {
        u_exc: inp.u_exc.iter().zip(&ppo.exc_bounds).map(|(&v, &b)| clamp(v, b)).collect(),
        u_inv: inp.u_inv.iter().zip(&ppo.inv_bounds).map(|(&v, &b)| clamp(v, b)).collect(),
        p_g,
        price,
        mu_g_lo,
        mu_g_hi,
        balance_residual: residual,
    })
}
