//! Value-at-risk and conditional value-at-risk.
//!
//! The sample-based forms work on any empirical loss vector. The analytic
//! forms are specialized to the planner's optimal recourse cost
//! `ã [y − W]₊²`, whose CVaR reduces to a partial moment of `W`:
//!
//! ```text
//! CVaR_α = ã/(1−α) ∫₀^θ (y − w)² f(w) dw,   θ = min{F⁻¹(1−α), y}
//! ```

use crate::error::{Error, Result};
use crate::market::MarketInstance;

/// Tail level `alpha` and CVaR weight `epsilon` of the planner's risk
/// functional `(1 − ε) E + ε CVaR_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    alpha: f64,
    epsilon: f64,
}

impl RiskParams {
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::validation("alpha", "alpha in (0,1)"));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::validation("epsilon", "epsilon in [0,1]"));
        }
        Ok(Self { alpha, epsilon })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn sorted_losses(losses: &[f64]) -> Result<Vec<f64>> {
    if losses.is_empty() {
        return Err(Error::domain("loss sample is empty"));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::domain("loss sample contains non-finite values"));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Empirical `VaR_α`: the smallest loss `z` with empirical cdf `≥ α`, i.e. the
/// `⌈αn⌉`-th order statistic.
pub fn var_samples(losses: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let sorted = sorted_losses(losses)?;
    let n = sorted.len() as f64;
    // Smallest k with k/n >= alpha, guarded against rounding in alpha * n.
    let mut k = ((alpha * n).ceil() as usize).clamp(1, sorted.len());
    while k > 1 && ((k - 1) as f64) / n >= alpha {
        k -= 1;
    }
    while k < sorted.len() && (k as f64) / n < alpha {
        k += 1;
    }
    Ok(sorted[k.min(sorted.len()) - 1])
}

/// Empirical `CVaR_α` as the minimum over `ζ` of
/// `ζ + E[(L − ζ)₊]/(1 − α)`.
///
/// The objective is piecewise linear and convex in `ζ` with kinks at the
/// sample points, so it is evaluated exactly at each of them.
pub fn cvar_samples(losses: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let sorted = sorted_losses(losses)?;
    let n = sorted.len();
    let scale = 1.0 / ((1.0 - alpha) * n as f64);
    // Walk from the largest sample down, carrying Σ_{i>j} sᵢ.
    let mut tail_sum = 0.0;
    let mut best = f64::INFINITY;
    for j in (0..n).rev() {
        let zeta = sorted[j];
        let above = (n - 1 - j) as f64;
        let phi = zeta + scale * (tail_sum - above * zeta);
        best = best.min(phi);
        tail_sum += zeta;
    }
    Ok(best)
}

/// Closed-form `VaR_α` of the optimal recourse cost `ã [y − W]₊²`.
pub fn var_recourse(y: f64, inst: &MarketInstance) -> f64 {
    let q = inst.tail_quantile();
    if y < q {
        0.0
    } else {
        inst.agg_a_tilde() * (y - q).powi(2)
    }
}

/// Closed-form `CVaR_α` of the optimal recourse cost `ã [y − W]₊²`.
pub fn cvar_recourse(y: f64, inst: &MarketInstance) -> f64 {
    let y = y.max(0.0);
    let alpha = inst.risk().alpha();
    let moment = inst
        .dist()
        .partial_power_integral(y, inst.theta(y), 2)
        .expect("theta is nonnegative");
    inst.agg_a_tilde() * moment / (1.0 - alpha)
}

/// Derivative of [`cvar_recourse`] with respect to `y`.
///
/// The upper limit `θ(y)` has a kink at `y = F⁻¹(1−α)` but the integrand
/// vanishes there, so the derivative is continuous:
/// `2ã/(1−α) ∫₀^θ (y − w) f(w) dw`.
pub fn cvar_recourse_derivative(y: f64, inst: &MarketInstance) -> f64 {
    let y = y.max(0.0);
    let alpha = inst.risk().alpha();
    let moment = inst
        .dist()
        .partial_power_integral(y, inst.theta(y), 1)
        .expect("theta is nonnegative");
    2.0 * inst.agg_a_tilde() * moment / (1.0 - alpha)
}

/// Expected recourse cost `ã E[[y − W]₊²]`.
pub fn expected_recourse(y: f64, inst: &MarketInstance) -> f64 {
    let y = y.max(0.0);
    inst.agg_a_tilde()
        * inst
            .dist()
            .partial_power_integral(y, y, 2)
            .expect("y is nonnegative")
}

/// Derivative of [`expected_recourse`].
pub fn expected_recourse_derivative(y: f64, inst: &MarketInstance) -> f64 {
    let y = y.max(0.0);
    2.0 * inst.agg_a_tilde()
        * inst
            .dist()
            .partial_power_integral(y, y, 1)
            .expect("y is nonnegative")
}

/// Planner risk functional `(1 − ε) E[c₂] + ε CVaR_α(c₂)` of the recourse cost.
pub fn rho_spp(y: f64, inst: &MarketInstance) -> f64 {
    let eps = inst.risk().epsilon();
    let mut value = 0.0;
    if eps < 1.0 {
        value += (1.0 - eps) * expected_recourse(y, inst);
    }
    if eps > 0.0 {
        value += eps * cvar_recourse(y, inst);
    }
    value
}

/// Derivative of [`rho_spp`] with respect to `y`.
pub fn rho_spp_derivative(y: f64, inst: &MarketInstance) -> f64 {
    let eps = inst.risk().epsilon();
    let mut value = 0.0;
    if eps < 1.0 {
        value += (1.0 - eps) * expected_recourse_derivative(y, inst);
    }
    if eps > 0.0 {
        value += eps * cvar_recourse_derivative(y, inst);
    }
    value
}
