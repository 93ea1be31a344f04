//! Real-time congestion management: barrier penalties on inter-cell flows
//! driving the log participation factors `φ = ln κ`.

use serde::{Deserialize, Serialize};

use crate::netmodel::Network;
use crate::physics::dominant_flow;
use crate::scalar::Real;

/// Penalty magnitude used once a line reaches its limit.
pub const BARRIER_CAP: f64 = 1e6;
/// Distance from `|C| = 1` at which the barrier is capped and flagged.
pub const BARRIER_GUARD: f64 = 1e-6;

/// Barrier `γ(C)`: zero below the threshold, growing without bound as
/// `|C| → 1`. Returns `(γ, flagged)`; near or beyond the limit the value is
/// capped at [`BARRIER_CAP`] with the sign of `C` and `flagged` is set.
pub fn barrier<T: Real>(c: T, c_min: T) -> (T, bool) {
    let a = c.abs();
    if a < c_min {
        return (T::zero(), false);
    }
    if a >= T::one() - T::lit(BARRIER_GUARD) {
        return (T::lit(BARRIER_CAP).copysign(c), true);
    }
    let g = c * (a - c_min) / ((T::one() - a) * (T::one() - c_min));
    if g.abs() > T::lit(BARRIER_CAP) {
        (T::lit(BARRIER_CAP).copysign(c), true)
    } else {
        (g, false)
    }
}

/// One monitored inter-cell line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongestedLine<T> {
    pub line: usize,
    pub cell_from: usize,
    pub cell_to: usize,
    pub flow_limit: Option<T>,
    pub threshold: Option<T>,
}

/// Inter-cell lines with their cell endpoints, in line order.
pub fn monitored_lines<T: Real>(net: &Network<T>) -> Vec<CongestedLine<T>> {
    net.inter_cell_lines()
        .into_iter()
        .map(|m| {
            let l = &net.lines[m];
            CongestedLine {
                line: m,
                cell_from: net.nodes[l.from].cell,
                cell_to: net.nodes[l.to].cell,
                flow_limit: l.flow_limit,
                threshold: l.congestion_threshold,
            }
        })
        .collect()
}

/// Flow, congestion rate and barrier value of every monitored line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongestionSnapshot<T> {
    pub flow: Vec<T>,
    pub rate: Vec<T>,
    pub gamma: Vec<T>,
    pub flagged: Vec<bool>,
}

impl<T: Real> CongestionSnapshot<T> {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

/// Evaluates the monitored lines from directional line flows. Lines without
/// a limit report a zero rate; lines without a threshold never penalize.
pub fn congestion_snapshot<T: Real>(
    lines: &[CongestedLine<T>],
    flows: &[(T, T)],
) -> CongestionSnapshot<T> {
    let mut s = CongestionSnapshot {
        flow: Vec::with_capacity(lines.len()),
        rate: Vec::with_capacity(lines.len()),
        gamma: Vec::with_capacity(lines.len()),
        flagged: Vec::with_capacity(lines.len()),
    };
    for l in lines {
        let (pij, pji) = flows[l.line];
        let pm = dominant_flow(pij, pji);
        let rate = l.flow_limit.map_or(T::zero(), |lim| pm / lim);
        let (g, f) = match (l.flow_limit, l.threshold) {
            (Some(_), Some(cmin)) => barrier(rate, cmin),
            _ => (T::zero(), false),
        };
        s.flow.push(pm);
        s.rate.push(rate);
        s.gamma.push(g);
        s.flagged.push(f);
    }
    s
}

/// `τ_φ φ̇ = -ℬ φ - D_z γ`, evaluated edge by edge. Leaves `Σ φ` invariant.
pub fn kappa_rhs<T: Real>(
    lines: &[CongestedLine<T>],
    phi: &[T],
    gamma: &[T],
    tau_phi: T,
    dphi: &mut [T],
) {
    dphi.iter_mut().for_each(|v| *v = T::zero());
    for (l, &g) in lines.iter().zip(gamma) {
        let (a, b) = (l.cell_from, l.cell_to);
        let diff = phi[a] - phi[b];
        dphi[a] -= diff + g;
        dphi[b] += diff + g;
    }
    for v in dphi.iter_mut() {
        *v /= tau_phi;
    }
}
