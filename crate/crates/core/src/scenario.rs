//! Scenario files.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "demand": 2.0,
//!   "alpha": 0.8,
//!   "epsilon": 0.0,
//!   "distribution": { "kind": "uniform", "w_max": 1.0 },
//!   "generators": [ { "a": 1.0, "a_tilde": 3.0 }, { "a": 2.0, "a_tilde": 6.0 } ],
//!   "seed": 7,
//!   "w_grid_points": 1001
//! }
//! ```
//!
//! `distribution.kind` is one of `uniform`, `truncated-normal` (with
//! `location`, `scale`) or `piecewise-linear-pdf` (with `breakpoints`).
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, RenewableDistribution};
use crate::error::{Error, Result};
use crate::market::{GeneratorParams, MarketInstance};
use crate::planner::DEFAULT_GRID_POINTS;
use crate::risk::RiskParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub demand: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub distribution: DistributionSpec,
    pub generators: Vec<GeneratorParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_grid_points: Option<usize>,
    #[serde(skip)]
    instance: Option<MarketInstance>,
}

impl ScenarioConfig {
    /// The validated market described by the scenario.
    pub fn instance(&self) -> &MarketInstance {
        self.instance.as_ref().expect("parse_scenario validates the instance")
    }

    pub fn w_grid_points(&self) -> usize {
        self.w_grid_points.unwrap_or(DEFAULT_GRID_POINTS)
    }

    fn validate(mut self) -> Result<Self> {
        let risk = RiskParams::new(self.alpha, self.epsilon)?;
        let dist = RenewableDistribution::try_from(self.distribution.clone())?;
        if let Some(points) = self.w_grid_points {
            if points < 2 {
                return Err(Error::validation("w_grid_points", "w_grid_points must be >= 2"));
            }
        }
        self.instance = Some(MarketInstance::new(self.generators.clone(), self.demand, risk, dist)?);
        Ok(self)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        if inner.is_data() {
            let path = e.path().to_string();
            Error::validation(if path == "." { "<root>".to_string() } else { path }, inner.to_string())
        } else {
            Error::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        }
    })?;
    config.validate()
}
