//! Deterministic discrete-event transport for dcnet participants: reliable
//! ordered links with latency and bandwidth, a virtual clock that also charges
//! compute time for group operations, and a coordinator that sets up a group
//! and collects logs and counters.

pub mod cost;
pub mod net;
pub mod sim;

pub use cost::CostModel;
pub use net::{Interface, NetConfig, NS_PER_MS};
pub use sim::{
    coordinator_run, InstanceTiming, NodeReport, Protocol, RunLog, Scenario, SimError, Simulator,
};
