//! Generator cost data and the validated market instance shared by every
//! other module.

use serde::{Deserialize, Serialize};

use crate::dist::RenewableDistribution;
use crate::error::{Error, Result};
use crate::risk::RiskParams;

/// Quadratic cost coefficients of one generator: `a x²` day-ahead from the
/// primary plant and `ã z²` in real time from the ancillary plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub a: f64,
    pub a_tilde: f64,
}

impl GeneratorParams {
    pub fn new(a: f64, a_tilde: f64) -> Self {
        Self { a, a_tilde }
    }
}

/// Harmonic aggregate `(Σ 1/cᵢ)⁻¹`: the cost coefficient of the fleet when
/// quantity is split to equalize marginal cost.
pub fn harmonic_aggregate(coeffs: impl IntoIterator<Item = f64>) -> f64 {
    1.0 / coeffs.into_iter().map(|c| 1.0 / c).sum::<f64>()
}

fn check_distinct(values: &[f64], path: &str, rule: &str) -> Result<()> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation(path, rule));
    }
    Ok(())
}

/// Validated market: generators, inelastic demand, risk attitude and the
/// renewable distribution, with the derived aggregates cached.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    generators: Vec<GeneratorParams>,
    demand: f64,
    risk: RiskParams,
    dist: RenewableDistribution,
    agg_a: f64,
    agg_a_tilde: f64,
    tail_quantile: f64,
}

impl MarketInstance {
    pub fn new(
        generators: Vec<GeneratorParams>,
        demand: f64,
        risk: RiskParams,
        dist: RenewableDistribution,
    ) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::validation("generators", "at least one generator required"));
        }
        for (i, g) in generators.iter().enumerate() {
            if !(g.a.is_finite() && g.a > 0.0) {
                return Err(Error::validation(format!("generators[{i}].a"), "a_i must be finite and > 0"));
            }
            if !(g.a_tilde.is_finite() && g.a_tilde > 0.0) {
                return Err(Error::validation(
                    format!("generators[{i}].a_tilde"),
                    "a_tilde_i must be finite and > 0",
                ));
            }
        }
        let a: Vec<f64> = generators.iter().map(|g| g.a).collect();
        let a_tilde: Vec<f64> = generators.iter().map(|g| g.a_tilde).collect();
        check_distinct(&a, "generators", "a_i pairwise distinct")?;
        check_distinct(&a_tilde, "generators", "a_tilde_i pairwise distinct")?;
        let max_a = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_a_tilde = a_tilde.iter().copied().fold(f64::INFINITY, f64::min);
        if max_a.partial_cmp(&min_a_tilde) != Some(std::cmp::Ordering::Less) {
            return Err(Error::validation("generators", "max a_i must be < min a_tilde_i"));
        }
        if !(demand.is_finite() && demand >= 0.0) {
            return Err(Error::validation("demand", "demand must be finite and >= 0"));
        }
        let tail_quantile = dist.quantile(1.0 - risk.alpha())?;
        Ok(Self {
            agg_a: harmonic_aggregate(a),
            agg_a_tilde: harmonic_aggregate(a_tilde),
            generators,
            demand,
            risk,
            dist,
            tail_quantile,
        })
    }

    /// Same market with a different CVaR weight.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let risk = RiskParams::new(self.risk.alpha(), epsilon)?;
        Ok(Self { risk, ..self.clone() })
    }

    /// Same market with a different demand.
    pub fn with_demand(&self, demand: f64) -> Result<Self> {
        Self::new(self.generators.clone(), demand, self.risk, self.dist.clone())
    }

    pub fn generators(&self) -> &[GeneratorParams] {
        &self.generators
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn risk(&self) -> RiskParams {
        self.risk
    }

    pub fn dist(&self) -> &RenewableDistribution {
        &self.dist
    }

    /// Aggregate day-ahead coefficient `a`.
    pub fn agg_a(&self) -> f64 {
        self.agg_a
    }

    /// Aggregate real-time coefficient `ã`.
    pub fn agg_a_tilde(&self) -> f64 {
        self.agg_a_tilde
    }

    /// `F_W⁻¹(1 − α)`: renewable output below which the recourse cost lies
    /// in the CVaR tail.
    pub fn tail_quantile(&self) -> f64 {
        self.tail_quantile
    }

    /// `θ(y) = min{F_W⁻¹(1 − α), y}`.
    pub fn theta(&self, y: f64) -> f64 {
        self.tail_quantile.min(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn risk() -> RiskParams {
        RiskParams::new(0.8, 0.0).unwrap()
    }

    fn uniform() -> RenewableDistribution {
        RenewableDistribution::uniform(1.0).unwrap()
    }

    #[test]
    fn aggregates_for_two_generators() {
        let inst = MarketInstance::new(
            vec![GeneratorParams::new(1.0, 3.0), GeneratorParams::new(2.0, 6.0)],
            2.0,
            risk(),
            uniform(),
        )
        .unwrap();
        assert!((inst.agg_a() - 2.0 / 3.0).abs() < 1e-15);
        assert!((inst.agg_a_tilde() - 2.0).abs() < 1e-15);
        assert!(inst.agg_a() < 1.0 && inst.agg_a_tilde() < 3.0);
        assert!((inst.tail_quantile() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn assumption_violations_are_named() {
        let dup = MarketInstance::new(
            vec![GeneratorParams::new(1.0, 3.0), GeneratorParams::new(1.0, 6.0)],
            1.0,
            risk(),
            uniform(),
        );
        assert_eq!(dup.unwrap_err(), Error::validation("generators", "a_i pairwise distinct"));

        let overlap = MarketInstance::new(
            vec![GeneratorParams::new(1.0, 3.0), GeneratorParams::new(4.0, 6.0)],
            1.0,
            risk(),
            uniform(),
        );
        assert_eq!(
            overlap.unwrap_err(),
            Error::validation("generators", "max a_i must be < min a_tilde_i")
        );

        let neg = MarketInstance::new(vec![GeneratorParams::new(1.0, 3.0)], -1.0, risk(), uniform());
        assert!(matches!(neg, Err(Error::Validation { ref path, .. }) if path == "demand"));
        assert!(MarketInstance::new(vec![], 1.0, risk(), uniform()).is_err());
    }
}
