//! Property checks on the states that end each inter-event window.

use anyhow::{Context, Result};
use cellprice::graph;
use cellprice::oracle::{kkt_residuals, solve_centralized};
use cellprice::simulator::{steady_state, Model};
use cellprice::{SimState, Trajectory};
use serde_json::{json, Value};

/// Seconds at the end of a window over which convergence is judged.
pub const TAIL: f64 = 10.0;

/// Absolute floor of the consensus check, for windows with zero price.
const PRICE_FLOOR: f64 = 1e-12;

pub struct WindowEnd {
    pub start: f64,
    pub end: f64,
    pub converged: bool,
    pub max_derivative: f64,
    pub state: SimState,
}

pub fn window_ends(traj: &Trajectory) -> Vec<WindowEnd> {
    let mut out = Vec::new();
    for (a, b) in traj.windows() {
        let Some(ss) = steady_state(traj, a, b, TAIL) else { continue };
        let Some(state) = traj.states.get(ss.last_index) else { continue };
        out.push(WindowEnd {
            start: a,
            end: b,
            converged: ss.converged,
            max_derivative: ss.max_derivative,
            state: state.clone(),
        });
    }
    out
}

pub fn to_json(w: &[WindowEnd]) -> Result<Value> {
    let mut v = Vec::with_capacity(w.len());
    for e in w {
        v.push(json!({
            "start": e.start,
            "end": e.end,
            "converged": e.converged,
            "max_derivative": e.max_derivative,
            "state": serde_json::to_value(&e.state)?,
        }));
    }
    Ok(Value::Array(v))
}

pub fn from_json(v: &Value) -> Result<Vec<WindowEnd>> {
    let arr = v.as_array().context("window file must hold a list")?;
    let num = |e: &Value, k: &str| e[k].as_f64().with_context(|| format!("window field '{k}'"));
    arr.iter()
        .map(|e| {
            Ok(WindowEnd {
                start: num(e, "start")?,
                end: num(e, "end")?,
                converged: e["converged"].as_bool().context("window field 'converged'")?,
                max_derivative: num(e, "max_derivative")?,
                state: serde_json::from_value(e["state"].clone()).context("window state")?,
            })
        })
        .collect()
}

/// Checks every converged window: frequency at nominal, price consensus
/// (`λ_i/κ_k` within `tol` relative of its component mean), KKT residuals and
/// agreement with the centralized optimum. The last two use `10 · tol`.
/// Fails when no window converged.
pub fn check(model: &Model<f64>, windows: &[WindowEnd], nominal_hz: f64, tol: f64) -> (bool, Value) {
    let comp = graph::components(model.layout.n_nodes, model.comm_edges());
    let n_comp = comp.iter().max().map_or(0, |m| m + 1);
    let mut all_ok = true;
    let mut rows = Vec::new();
    let mut n_conv = 0;
    for w in windows {
        if !w.converged {
            rows.push(json!({ "start": w.start, "end": w.end, "converged": false,
                              "max_derivative": w.max_derivative }));
            continue;
        }
        n_conv += 1;
        let d = model.derive(&w.state, nominal_hz);
        let freq = d.omega.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let scaled: Vec<f64> = (0..d.lambda.len()).map(|i| d.lambda[i] / d.kappa[model.cell_of(i)]).collect();
        // worst component by deviation relative to its allowance
        let (mut ratio, mut dev_w, mut price_w) = (0.0f64, 0.0, 0.0);
        for c in 0..n_comp {
            let members: Vec<f64> = (0..scaled.len()).filter(|&i| comp[i] == c).map(|i| scaled[i]).collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            let dev = members.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
            let r = dev / (tol * mean.abs() + PRICE_FLOOR);
            if r >= ratio {
                (ratio, dev_w, price_w) = (r, dev, mean);
            }
        }
        let kkt = kkt_residuals(model, &w.state, 10.0 * tol);
        let oracle_gap = match solve_centralized(model, &w.state) {
            Ok(c) => {
                let p = &w.state.x[model.layout.p_g.clone()];
                p.iter().zip(&c.p_g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            }
            Err(_) => f64::INFINITY,
        };
        let freq_ok = freq < tol;
        let cons_ok = ratio <= 1.0;
        let oracle_ok = oracle_gap < 10.0 * tol;
        all_ok &= freq_ok && cons_ok && kkt.pass && oracle_ok;
        let (worst, worst_v) = kkt.worst();
        rows.push(json!({
            "start": w.start,
            "end": w.end,
            "converged": true,
            "max_derivative": w.max_derivative,
            "frequency": { "max_abs_omega": freq, "pass": freq_ok },
            "consensus": { "max_deviation": dev_w, "price": price_w, "pass": cons_ok },
            "kkt": { "worst_group": worst, "worst_residual": worst_v, "pass": kkt.pass },
            "oracle": { "max_pg_gap": oracle_gap, "pass": oracle_ok },
        }));
    }
    if n_conv == 0 {
        all_ok = false;
    }
    let report = json!({
        "tolerance": tol,
        "converged_windows": n_conv,
        "windows": rows,
        "pass": all_ok,
    });
    (all_ok, report)
}
