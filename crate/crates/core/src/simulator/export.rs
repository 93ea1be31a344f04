use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::netmodel::Scenario;
use crate::scalar::Real;

use super::{SimOptions, Trajectory};

/// Hex SHA-256 of the scenario's canonical JSON form.
pub fn scenario_digest<T: Real>(sc: &Scenario<T>) -> Result<String> {
    let bytes = serde_json::to_vec(sc)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn header<T: Real>(traj: &Trajectory<T>) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    let ids = &traj.node_ids;
    h.extend(ids.iter().map(|id| format!("f_{id}")));
    h.extend(ids.iter().map(|id| format!("lambda_{id}")));
    h.extend(traj.layout.gen_nodes.iter().map(|&i| format!("pg_{}", ids[i])));
    h.extend(ids.iter().map(|id| format!("U_{id}")));
    let nc = traj.layout.n_cells;
    h.extend((1..=nc).map(|k| format!("Lambda_{k}")));
    h.extend((1..=nc).map(|k| format!("kappa_{k}")));
    for (a, b) in &traj.monitored {
        h.push(format!("P_{a}_{b}"));
        h.push(format!("C_{a}_{b}"));
    }
    h.extend((1..=nc).map(|k| format!("Phi_{k}")));
    h
}

/// Writes one comma-separated row per sample.
///
/// Column order: `time`; frequency in Hz per node (`f_<bus>`); price per
/// node (`lambda_<bus>`); generation per generating node (`pg_<bus>`);
/// voltage per node (`U_<bus>`); zonal price and participation factor per
/// cell (`Lambda_<k>`, `kappa_<k>`); dominant flow and congestion rate per
/// inter-cell line (`P_<from>_<to>`, `C_<from>_<to>`); loss per cell
/// (`Phi_<k>`).
pub fn write_csv<T: Real, W: Write>(traj: &Trajectory<T>, mut w: W) -> Result<()> {
    writeln!(w, "{}", header(traj).join(","))?;
    for d in &traj.derived {
        let mut row: Vec<String> = vec![d.time.to_string()];
        let mut put = |v: &[T]| row.extend(v.iter().map(|x| x.to_string()));
        put(&d.frequency_hz);
        put(&d.lambda);
        put(&d.p_g);
        put(&d.voltage);
        put(&d.zonal_price);
        put(&d.kappa);
        for (p, c) in d.line_flow.iter().zip(&d.congestion_rate) {
            row.push(p.to_string());
            row.push(c.to_string());
        }
        row.extend(d.cell_losses.iter().map(|x| x.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Machine-readable record of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub scenario_digest: String,
    pub dt: f64,
    pub output_step: f64,
    pub horizon: f64,
    pub strict_congestion: bool,
    pub samples: usize,
    pub csv_digest: String,
    pub first_congestion_flag: Option<f64>,
    /// Why the run ended before its horizon.
    #[serde(default)]
    pub stopped: Option<String>,
}

pub fn write_manifest<T: Real, W: Write>(
    sc: &Scenario<T>,
    opts: &SimOptions<T>,
    traj: &Trajectory<T>,
    csv_bytes: &[u8],
    w: W,
) -> Result<Manifest> {
    let m = Manifest {
        scenario: sc.name.clone(),
        mode: sc.mode.to_string(),
        seed: sc.seed,
        scenario_digest: scenario_digest(sc)?,
        dt: opts.dt.to_f64_lossy(),
        output_step: opts.output_step.unwrap_or(sc.output_step).to_f64_lossy(),
        horizon: opts.horizon.unwrap_or(sc.horizon).to_f64_lossy(),
        strict_congestion: opts.strict_congestion,
        samples: traj.len(),
        csv_digest: hex::encode(Sha256::digest(csv_bytes)),
        first_congestion_flag: traj.first_flag.map(|t| t.to_f64_lossy()),
        stopped: traj.stopped.clone(),
    };
    serde_json::to_writer_pretty(w, &m)?;
    Ok(m)
}
