//! Distributed zonal pricing control for lossy AC grids.
//!
//! The crate couples a lossy AC grid (swing dynamics at generator and
//! inverter nodes, algebraic balance at load nodes) with two layers of
//! primal-dual controllers: producers adjusting their setpoints to local
//! prices, and cell coordinators running a consensus on zonal prices. A third
//! loop steers per-cell participation factors to relieve congested tie lines.
//!
//! All numerics are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod cc;
pub mod congestion;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod netmodel;
pub mod oracle;
pub mod physics;
pub mod ppo;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use netmodel::{Mode, NodeKind};
pub use scalar::Real;

pub type Network = netmodel::Network<f64>;
pub type NodeSpec = netmodel::NodeSpec<f64>;
pub type LineSpec = netmodel::LineSpec<f64>;
pub type Scenario = netmodel::Scenario<f64>;
pub type ScenarioFamily = netmodel::ScenarioFamily<f64>;
pub type Grid = physics::Grid<f64>;
pub type PpoState = ppo::PpoState<f64>;
pub type Simulator = simulator::Simulator<f64>;
pub type SimOptions = simulator::SimOptions<f64>;
pub type SimState = simulator::SimState<f64>;
pub type Trajectory = simulator::Trajectory<f64>;
pub type KktReport = oracle::KktReport;
