//! Queue dynamics, parameter identification and one-step MPC for signalized
//! traffic networks.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod identification;
pub mod lp;
pub mod network;
pub mod scenario;

pub use dynamics::{augmented_step_lower, augmented_step_upper, step, DemandVector, QueueState};
pub use error::{Error, Result};
pub use flow::{check_demand_feasible, solve_flow, FeasibilityCertificate, FlowVector};
pub use identification::ParameterBounds;
pub use network::{ControlVector, Network, NetworkConfig, Topology};
