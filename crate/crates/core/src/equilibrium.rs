//! Sequential competitive equilibrium prices and their verification.
//!
//! The day-ahead price is the planner's balance multiplier `λ = 2a(D − y*)`.
//! The real-time price is the recourse multiplier divided by the planner's
//! risk weight, which collapses to `P₂(w) = 2ã[y* − w]₊` for every `ε`; at
//! `ε = 1` the quotient is undefined on `(θ*, y*)` and the collapsed form is
//! used directly as the limit.

use crate::error::Result;
use crate::market::{GeneratorParams, MarketInstance};
use crate::planner::{self, PlannerSolution};

/// Day-ahead price and real-time price schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSchedule {
    pub p1: f64,
    /// Slope `2ã` of the real-time price in the shortfall.
    pub p2_slope: f64,
    /// Renewable level `y*` at which the real-time price reaches zero.
    pub p2_intercept: f64,
    /// Tail boundary `θ*` of the risk-weighted form.
    pub theta: f64,
    /// Planner weight on real-time cost inside and outside the CVaR tail.
    pub tail_weight: f64,
    pub body_weight: f64,
    /// Largest disagreement between the collapsed price and the
    /// multiplier-quotient form on the check grid; `None` at `ε = 1`.
    pub quotient_gap: Option<f64>,
}

impl PriceSchedule {
    /// `P₂(w) = slope · [intercept − w]₊`.
    pub fn p2(&self, w: f64) -> f64 {
        self.p2_slope * (self.p2_intercept - w).max(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            p1: self.p1 * factor,
            p2_slope: self.p2_slope * factor,
            ..self.clone()
        }
    }
}

/// Real-time price in its multiplier-quotient form `μ̂(w)/ĉ(w)`, with three
/// pieces `[0, θ*]`, `(θ*, y*)` and `[y*, ∞)`.
///
/// Returns `None` where the weight vanishes before `y*` (only at `ε = 1`).
pub fn quotient_price(sol: &PlannerSolution, w: f64, inst: &MarketInstance) -> Option<f64> {
    if w >= sol.y_star {
        return Some(0.0);
    }
    let weight = planner::risk_weight(sol, w, inst);
    if weight == 0.0 {
        return None;
    }
    Some(planner::dual_mu(sol, w, inst) / weight)
}

/// Equilibrium prices supported by the planner solution.
pub fn equilibrium_prices(sol: &PlannerSolution, inst: &MarketInstance) -> PriceSchedule {
    let risk = inst.risk();
    let eps = risk.epsilon();
    let mut prices = PriceSchedule {
        p1: sol.lambda_star,
        p2_slope: 2.0 * inst.agg_a_tilde(),
        p2_intercept: sol.y_star,
        theta: sol.theta_star,
        tail_weight: 1.0 - eps + eps / (1.0 - risk.alpha()),
        body_weight: 1.0 - eps,
        quotient_gap: None,
    };
    if eps < 1.0 {
        let grid = planner::default_w_grid(sol, inst, planner::DEFAULT_GRID_POINTS);
        let gap = grid
            .iter()
            .map(|&w| {
                let q = quotient_price(sol, w, inst).expect("weight positive for eps < 1");
                (q - prices.p2(w)).abs()
            })
            .fold(0.0, f64::max);
        debug_assert!(gap <= 1e-10 * prices.p2_slope.max(1.0) * sol.y_star.max(1.0));
        prices.quotient_gap = Some(gap);
    }
    prices
}

/// Price-taking day-ahead output maximizing `p₁x − a x²`.
pub fn gen_stage1_best_response(p1: f64, g: &GeneratorParams) -> f64 {
    p1.max(0.0) / (2.0 * g.a)
}

/// Price-taking real-time output maximizing `p₂z − ã z²`.
pub fn gen_stage2_best_response(p2_at_w: f64, g: &GeneratorParams) -> f64 {
    p2_at_w.max(0.0) / (2.0 * g.a_tilde)
}

pub fn stage1_profit(p1: f64, x: f64, g: &GeneratorParams) -> f64 {
    p1 * x - g.a * x * x
}

pub fn stage2_profit(p2_at_w: f64, z: f64, g: &GeneratorParams) -> f64 {
    p2_at_w * z - g.a_tilde * z * z
}

/// Gaps between generator best responses and the planner allocation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SceqReport {
    /// `maxᵢ |x_i^BR − x*ᵢ|`.
    pub max_stage1_gap: f64,
    /// `max_{i,w} |z_i^BR(w) − z*ᵢ(w)|`.
    pub max_stage2_gap: f64,
    /// `|Σx*ᵢ + y* − D|`.
    pub clearing_gap: f64,
    /// `max_w |Σ z_i^BR(w) − [y* − w]₊|`.
    pub stage2_clearing_gap: f64,
    /// `Σ z_i^BR(w) ≥ y* − w` on every grid point (to 1e-12).
    pub recourse_feasible: bool,
}

impl SceqReport {
    pub fn max_gap(&self) -> f64 {
        self.max_stage1_gap
            .max(self.max_stage2_gap)
            .max(self.clearing_gap)
            .max(self.stage2_clearing_gap)
    }
}

/// Checks that the schedule supports the planner allocation as an
/// equilibrium: best responses reproduce it and both markets clear.
pub fn verify_sceq(sol: &PlannerSolution, prices: &PriceSchedule, inst: &MarketInstance, w_grid: &[f64]) -> SceqReport {
    let mut report = SceqReport {
        recourse_feasible: true,
        ..SceqReport::default()
    };
    for (g, &x) in inst.generators().iter().zip(&sol.x_star) {
        report.max_stage1_gap = report.max_stage1_gap.max((gen_stage1_best_response(prices.p1, g) - x).abs());
    }
    report.clearing_gap = (sol.x_star.iter().sum::<f64>() + sol.y_star - inst.demand()).abs();
    for &w in w_grid {
        let p2 = prices.p2(w);
        let planned = planner::second_stage_dispatch(sol.y_star, w, inst);
        let mut supplied = 0.0;
        for (g, &z) in inst.generators().iter().zip(&planned.quantities) {
            let br = gen_stage2_best_response(p2, g);
            supplied += br;
            report.max_stage2_gap = report.max_stage2_gap.max((br - z).abs());
        }
        let shortfall = (sol.y_star - w).max(0.0);
        report.stage2_clearing_gap = report.stage2_clearing_gap.max((supplied - shortfall).abs());
        if supplied < sol.y_star - w - 1e-12 {
            report.recourse_feasible = false;
        }
    }
    report
}

/// One point of an ε-sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub y_star: f64,
    pub p1: f64,
    pub p2_slope: f64,
    pub p2_intercept: f64,
}

/// Solves and prices the template market at each CVaR weight in `eps_grid`.
pub fn epsilon_sweep(template: &MarketInstance, eps_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    eps_grid
        .iter()
        .map(|&eps| {
            let inst = template.with_epsilon(eps)?;
            let sol = planner::solve_spp(&inst);
            let prices = equilibrium_prices(&sol, &inst);
            Ok(SweepPoint {
                epsilon: eps,
                y_star: sol.y_star,
                p1: prices.p1,
                p2_slope: prices.p2_slope,
                p2_intercept: prices.p2_intercept,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::RenewableDistribution;
    use crate::risk::RiskParams;
    use approx::assert_relative_eq;

    fn s1(epsilon: f64) -> MarketInstance {
        MarketInstance::new(
            vec![GeneratorParams::new(1.0, 3.0), GeneratorParams::new(2.0, 6.0)],
            2.0,
            RiskParams::new(0.8, epsilon).unwrap(),
            RenewableDistribution::uniform(1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn s1_prices() {
        let inst = s1(0.0);
        let sol = planner::solve_spp(&inst);
        let prices = equilibrium_prices(&sol, &inst);
        assert!((prices.p1 - 1.508644).abs() < 1e-6);
        assert!((prices.p2(0.4) - 1.874068).abs() < 1e-6);
        assert_eq!(prices.p2(sol.y_star), 0.0);
        assert_eq!(prices.p2(0.95), 0.0);

        let inst = s1(1.0);
        let sol = planner::solve_spp(&inst);
        let prices = equilibrium_prices(&sol, &inst);
        assert!((prices.p1 - 1.9).abs() < 1e-8);
        assert!((prices.p2(0.1) - 4.0 * (0.575 - 0.1)).abs() < 1e-8);
        assert!(prices.quotient_gap.is_none());
    }

    #[test]
    fn best_responses() {
        let g1 = GeneratorParams::new(1.0, 3.0);
        assert_relative_eq!(gen_stage1_best_response(1.508644, &g1), 0.754322, epsilon = 1e-12);
        assert_eq!(gen_stage1_best_response(0.0, &g1), 0.0);
        assert_relative_eq!(gen_stage2_best_response(2.4, &g1), 0.4, epsilon = 1e-15);
        assert_eq!(gen_stage2_best_response(0.0, &g1), 0.0);
        let x = gen_stage1_best_response(2.0, &g1);
        assert_relative_eq!(stage1_profit(2.0, x, &g1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn quotient_is_undefined_only_in_the_body_at_full_cvar_weight() {
        let inst = s1(1.0);
        let sol = planner::solve_spp(&inst);
        assert!(quotient_price(&sol, 0.1, &inst).is_some());
        assert!(quotient_price(&sol, 0.4, &inst).is_none());
        assert_eq!(quotient_price(&sol, 0.9, &inst), Some(0.0));
    }

    #[test]
    fn verification_passes_and_detects_perturbation() {
        for eps in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let inst = s1(eps);
            let sol = planner::solve_spp(&inst);
            let prices = equilibrium_prices(&sol, &inst);
            let grid = planner::default_w_grid(&sol, &inst, planner::DEFAULT_GRID_POINTS);
            let report = verify_sceq(&sol, &prices, &inst, &grid);
            assert!(report.max_gap() <= 1e-8 && report.recourse_feasible, "eps={eps}: {report:?}");
            let bumped = verify_sceq(&sol, &prices.scaled(1.01), &inst, &grid);
            assert!(bumped.max_stage1_gap > 1e-3 && bumped.max_stage2_gap > 1e-3, "eps={eps}: {bumped:?}");
        }
    }

    #[test]
    fn zero_demand_gives_zero_gaps() {
        let inst = s1(0.5).with_demand(0.0).unwrap();
        let sol = planner::solve_spp(&inst);
        let prices = equilibrium_prices(&sol, &inst);
        let grid = planner::default_w_grid(&sol, &inst, 101);
        assert_eq!(verify_sceq(&sol, &prices, &inst, &grid).max_gap(), 0.0);
        let curve = epsilon_sweep(&inst, &[0.0, 0.5, 1.0]).unwrap();
        assert!(curve.iter().all(|p| p.y_star == 0.0 && p.p1 == 0.0));
    }

    #[test]
    fn sweep_of_s1() {
        let curve = epsilon_sweep(&s1(0.0), &[0.0, 0.5, 1.0]).unwrap();
        assert!((curve[0].y_star - 0.868517).abs() < 1e-6);
        assert!((curve[1].y_star - 0.709137).abs() < 1e-6);
        assert!((curve[2].y_star - 0.575).abs() < 1e-9);
    }
}
