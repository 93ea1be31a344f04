use serde::{Deserialize, Serialize};

use crate::ppo::ConvexCost;
use crate::scalar::Real;
use crate::simulator::{Model, Trajectory};

/// Profits and costs at one recorded sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EconomicSample<T> {
    pub time: T,
    /// `Σ_{i∈π} (-C_i + λ_i p_i - ω_i p_i)` per producer.
    pub producer_profit: Vec<T>,
    /// `Λ_k (Φ_k + Σ p_ℓ)` per cell.
    pub consumer_cost: Vec<T>,
    /// Consumer payments minus producer payouts per cell.
    pub cell_profit: Vec<T>,
}

impl<T: Real> EconomicSample<T> {
    pub fn total_cell_profit(&self) -> T {
        self.cell_profit.iter().fold(T::zero(), |a, &b| a + b)
    }
}

pub fn economic_report<T: Real>(model: &Model<T>, traj: &Trajectory<T>) -> Vec<EconomicSample<T>> {
    let ppo = &model.ppo;
    let n_ppos = ppo.owner.iter().max().map_or(0, |m| m + 1);
    let nc = model.n_cells();
    traj.derived
        .iter()
        .map(|d| {
            let mut producer_profit = vec![T::zero(); n_ppos];
            let mut payout = vec![T::zero(); nc];
            for (k, &i) in ppo.gen_nodes.iter().enumerate() {
                let p = d.p_g[k];
                producer_profit[ppo.owner[k]] += -ppo.cost.value(k, p) + d.lambda[i] * p - d.omega[i] * p;
                payout[model.cell_of(i)] += d.lambda[i] * p;
            }
            let consumer_cost: Vec<T> = (0..nc)
                .map(|k| d.zonal_price[k] * (d.cell_losses[k] + d.cell_load[k]))
                .collect();
            let cell_profit = (0..nc).map(|k| consumer_cost[k] - payout[k]).collect();
            EconomicSample { time: d.time, producer_profit, consumer_cost, cell_profit }
        })
        .collect()
}
