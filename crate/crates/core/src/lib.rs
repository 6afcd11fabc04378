//! Clearing of a risk-aware two-stage electricity market with renewable
//! generation.
//!
//! A system operator schedules renewable output `y` and day-ahead energy from
//! quadratic-cost generators before the renewable output `W` is known, then
//! covers any shortfall `[y − W]₊` in real time from the generators'
//! ancillary plants. The operator minimizes day-ahead cost plus
//! `(1 − ε) E + ε CVaR_α` of the real-time cost. This crate
//!
//! - solves that planner problem ([`planner`]),
//! - builds the day-ahead and real-time prices under which price-taking
//!   generators reproduce the planner's allocation ([`equilibrium`]),
//! - runs the bid/clear/settle mechanism ([`mechanism`]),
//! - and carries brute-force references for all of it ([`oracles`]).

pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod mechanism;
pub mod oracles;
pub mod planner;
pub mod quadrature;
pub mod risk;
pub mod scenario;

pub use dist::{DistributionSpec, RenewableDistribution};
pub use equilibrium::{PriceSchedule, SceqReport, SweepPoint};
pub use error::{Error, Result};
pub use market::{GeneratorParams, MarketInstance};
pub use mechanism::{BidSet, ClearedMarket, SettlementRecord, Simulation, SimulationSummary};
pub use oracles::OracleReport;
pub use planner::{KktReport, PlannerSolution};
pub use risk::RiskParams;
pub use scenario::{parse_scenario, ScenarioConfig};
