use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle;
use crate::physics::Grid;
use crate::scalar::Real;

use super::{ensure_valid, Bounds, Network, NodeKind};

/// Physical and communication topology variant.
///
/// * `I`: cells islanded, no tie lines, no inter-cell communication.
/// * `II`: tie lines present, no inter-cell communication.
/// * `III`: tie lines and boundary communication, uniform participation factors.
/// * `IV`: as `III`, with participation factors driven by congestion control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    I,
    II,
    III,
    IV,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::I, Mode::II, Mode::III, Mode::IV];

    pub fn has_tie_lines(self) -> bool {
        self != Mode::I
    }

    pub fn has_boundary_comm(self) -> bool {
        matches!(self, Mode::III | Mode::IV)
    }

    pub fn kappa_controlled(self) -> bool {
        self == Mode::IV
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::I => "I",
            Mode::II => "II",
            Mode::III => "III",
            Mode::IV => "IV",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Mode::I),
            "II" | "2" => Ok(Mode::II),
            "III" | "3" => Ok(Mode::III),
            "IV" | "4" => Ok(Mode::IV),
            _ => Err(Error::Parameter(format!("unknown scenario mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Participation factors: held fixed, or integrated from `φ = ln κ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KappaPolicy<T> {
    Fixed(Vec<T>),
    Controlled { phi0: Vec<T> },
}

impl<T: Real> KappaPolicy<T> {
    pub fn initial_kappa(&self) -> Vec<T> {
        match self {
            KappaPolicy::Fixed(k) => k.clone(),
            KappaPolicy::Controlled { phi0 } => phi0.iter().map(|p| p.exp()).collect(),
        }
    }

    pub fn is_controlled(&self) -> bool {
        matches!(self, KappaPolicy::Controlled { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LoadAction<T> {
    /// Adds to the active and reactive consumption.
    Step { dp: T, dq: T },
    /// Restores the initial consumption.
    Reset,
    /// Flips the sign of the deviation from the initial consumption.
    NegateStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadEvent<T> {
    pub time: T,
    pub node: usize,
    pub action: LoadAction<T>,
}

impl<T: Real> LoadEvent<T> {
    /// New `(p, q)` consumption at the event node.
    pub fn apply(&self, p: T, q: T, p0: T, q0: T) -> (T, T) {
        match self.action {
            LoadAction::Step { dp, dq } => (p + dp, q + dq),
            LoadAction::Reset => (p0, q0),
            LoadAction::NegateStep => (p0 - (p - p0), q0 - (q - q0)),
        }
    }
}

/// Initial grid state with loads that satisfy the flow equations exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition<T> {
    pub theta: Vec<T>,
    pub voltage: Vec<T>,
    pub p_load: Vec<T>,
    pub q_load: Vec<T>,
}

/// Everything needed for one closed-loop run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub name: String,
    pub network: Network<T>,
    pub mode: Mode,
    pub initial: InitialCondition<T>,
    pub events: Vec<LoadEvent<T>>,
    pub kappa: KappaPolicy<T>,
    pub seed: u64,
    pub horizon: T,
    pub output_step: T,
}

impl<T: Real> Scenario<T> {
    /// Structural checks plus consistency of the initial condition.
    pub fn validate(&self) -> Result<()> {
        ensure_valid(&self.network)?;
        let n = self.network.n_nodes();
        let init = &self.initial;
        for (name, v) in [
            ("theta", &init.theta),
            ("voltage", &init.voltage),
            ("p_load", &init.p_load),
            ("q_load", &init.q_load),
        ] {
            if v.len() != n {
                return Err(Error::Parameter(format!(
                    "initial {name} has {} entries, expected {n}",
                    v.len()
                )));
            }
        }
        if init.voltage.iter().any(|u| !(*u > T::zero())) {
            return Err(Error::Parameter("initial voltages must be positive".into()));
        }
        match &self.kappa {
            KappaPolicy::Fixed(k) => super::check_kappa(k, self.network.n_cells)?,
            KappaPolicy::Controlled { phi0 } => {
                if phi0.len() != self.network.n_cells {
                    return Err(Error::Parameter("phi0 length differs from cell count".into()));
                }
            }
        }
        let mut last = T::neg_infinity();
        for e in &self.events {
            if e.node >= n {
                return Err(Error::Parameter(format!("event node {} out of range", e.node)));
            }
            if e.time < last {
                return Err(Error::Parameter("events must be sorted by time".into()));
            }
            last = e.time;
        }
        if !(self.horizon > T::zero() && self.output_step > T::zero()) {
            return Err(Error::Parameter("horizon and output step must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_kappa(&self) -> Vec<T> {
        self.kappa.initial_kappa()
    }
}

/// Builds a scenario from a network and an initial grid point.
///
/// `voltage_bounds` of `G` nodes are read as terminal-voltage limits and
/// replaced by the excitation limits that correspond to them at the initial
/// point, `U_f = U + (X_d - X'_d) q / U`. Loads are balanced so that the
/// initial point is a power-flow solution with zero generation.
#[allow(clippy::too_many_arguments)]
pub fn assemble_scenario<T: Real>(
    name: impl Into<String>,
    mut network: Network<T>,
    mode: Mode,
    theta: Vec<T>,
    voltage: Vec<T>,
    events: Vec<LoadEvent<T>>,
    seed: u64,
    horizon: T,
    output_step: T,
) -> Result<Scenario<T>> {
    ensure_valid(&network)?;
    let grid = Grid::new(&network);
    let (_, q) = grid.injections(&theta, &voltage);
    for (i, node) in network.nodes.iter_mut().enumerate() {
        if node.kind == NodeKind::G {
            let x = node.reactance_diff.unwrap_or_else(T::zero);
            let delta = x * q[i] / voltage[i];
            if let Some(b) = node.voltage_bounds {
                node.voltage_bounds = Some(Bounds::new(b.lo + delta, b.hi + delta));
            }
        }
    }
    let (p_load, q_load) = oracle::balance_initial_loads(&network, &theta, &voltage);
    let n_cells = network.n_cells;
    let kappa = if mode.kappa_controlled() {
        KappaPolicy::Controlled { phi0: vec![T::zero(); n_cells] }
    } else {
        KappaPolicy::Fixed(vec![T::one(); n_cells])
    };
    let sc = Scenario {
        name: name.into(),
        network,
        mode,
        initial: InitialCondition { theta, voltage, p_load, q_load },
        events,
        kappa,
        seed,
        horizon,
        output_step,
    };
    sc.validate()?;
    Ok(sc)
}
