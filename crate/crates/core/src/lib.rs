//! Joint mode selection, power control and RIS phase design for D2D links
//! that share cellular uplink spectrum or an unlicensed mm-wave band.

pub mod channel;
pub mod coalition;
pub mod error;
pub mod grid;
pub mod harness;
pub mod optimizer;
pub mod params;
pub mod phase_search;
pub mod power;
pub mod rate;
pub mod ris;
pub mod scenario;
pub mod units;

pub use channel::{Band, ChannelRealization};
pub use coalition::{form_coalitions, prefers_switch, stability_audit, CoalitionConfig};
pub use error::{Error, Result};
pub use grid::Grid;
pub use harness::{run_sweep, summarize, Axis, ExperimentSpec, OperatingPoint, ResultRecord};
pub use optimizer::{maximize_sum_rate, SchemeId, SolveResult, SolverConfig};
pub use params::{CodebookKind, ReflectionMode, SimParams};
pub use phase_search::optimize_phases;
pub use power::{allocate_power, DcTerms, DualUpdate, PowerConfig};
pub use rate::{compute_sinr, system_sum_rate, Partition, PowerVector, RateModel, Topology};
pub use ris::{effective_gain, Codebook, EffectiveGains, PhaseConfig};
pub use scenario::{generate_scenario, Point3, Scenario};
