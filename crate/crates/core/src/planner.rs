//! The risk-averse social planner's problem.
//!
//! For a fixed renewable schedule `y` the real-time problem has the
//! closed-form solution `zᵢ(w) = ã[y − w]₊/ãᵢ`, and the day-ahead split of
//! `D − y` equalizes marginal costs, `xᵢ = a(D − y)/aᵢ`. What is left is the
//! strictly convex scalar problem
//!
//! ```text
//! g(y) = a(D − y)² + ρ(y),   ρ(y) = (1 − ε) ã E[[y − W]₊²] + ε CVaR_α(ã[y − W]₊²)
//! ```
//!
//! on `[0, D]`, which is solved by bisection on `g′`.

use crate::error::{Error, Result};
use crate::market::MarketInstance;
use crate::quadrature;
use crate::risk::{rho_spp, rho_spp_derivative};

/// Stopping width of the bisection on `g′`.
pub const BISECTION_TOL: f64 = 1e-10;

/// Default number of equispaced points in functional checks over `[0, w_max]`.
pub const DEFAULT_GRID_POINTS: usize = 1001;

/// Real-time dispatch of the ancillary plants for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseDispatch {
    /// Per-generator ancillary output `zᵢ(w)`.
    pub quantities: Vec<f64>,
    /// Risk-neutral multiplier of the recourse constraint, `2ã[y − w]₊`.
    pub mu: f64,
}

/// Cost-minimizing real-time dispatch covering the shortfall `[y − w]₊`.
pub fn second_stage_dispatch(y: f64, w: f64, inst: &MarketInstance) -> RecourseDispatch {
    let shortfall = (y - w).max(0.0);
    let agg = inst.agg_a_tilde();
    RecourseDispatch {
        quantities: inst
            .generators()
            .iter()
            .map(|g| agg * shortfall / g.a_tilde)
            .collect(),
        mu: 2.0 * agg * shortfall,
    }
}

/// Minimum real-time cost `ã[y − w]₊²`.
pub fn recourse_cost(y: f64, w: f64, inst: &MarketInstance) -> f64 {
    inst.agg_a_tilde() * (y - w).max(0.0).powi(2)
}

/// Day-ahead split of the residual demand `D − y` across generators.
pub fn first_stage_split(y: f64, inst: &MarketInstance) -> Result<Vec<f64>> {
    let demand = inst.demand();
    if !(0.0..=demand).contains(&y) {
        return Err(Error::domain(format!("renewable schedule y = {y} outside [0, D = {demand}]")));
    }
    let residual = demand - y;
    let agg = inst.agg_a();
    Ok(inst.generators().iter().map(|g| agg * residual / g.a).collect())
}

/// Reduced planner objective `g(y)`.
pub fn reduced_objective(y: f64, inst: &MarketInstance) -> f64 {
    inst.agg_a() * (inst.demand() - y).powi(2) + rho_spp(y, inst)
}

/// Derivative `g′(y)` of the reduced objective.
pub fn reduced_gradient(y: f64, inst: &MarketInstance) -> f64 {
    -2.0 * inst.agg_a() * (inst.demand() - y) + rho_spp_derivative(y, inst)
}

/// Optimal planner decisions and the day-ahead multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSolution {
    pub y_star: f64,
    pub x_star: Vec<f64>,
    pub lambda_star: f64,
    pub theta_star: f64,
    pub objective: f64,
}

impl PlannerSolution {
    /// Builds the solution implied by renewable schedule `y`: proportional
    /// day-ahead split, `λ = 2a(D − y)`, `θ = min{F⁻¹(1−α), y}`.
    ///
    /// Only the `y` returned by [`solve_spp`] is optimal; other schedules are
    /// useful to probe the optimality checks.
    pub fn from_schedule(y: f64, inst: &MarketInstance) -> Result<Self> {
        let x_star = first_stage_split(y, inst)?;
        Ok(Self {
            y_star: y,
            x_star,
            lambda_star: 2.0 * inst.agg_a() * (inst.demand() - y),
            theta_star: inst.theta(y),
            objective: reduced_objective(y, inst),
        })
    }
}

/// Solves the planner's problem through its one-dimensional reduction.
pub fn solve_spp(inst: &MarketInstance) -> PlannerSolution {
    let demand = inst.demand();
    let y_star = if demand == 0.0 {
        0.0
    } else if reduced_gradient(demand, inst) <= 0.0 {
        demand
    } else {
        // g′(0) = −2aD < 0 < g′(D): a sign change brackets the root.
        let (mut lo, mut hi) = (0.0, demand);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if reduced_gradient(mid, inst) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let sol = PlannerSolution::from_schedule(y_star, inst).expect("y_star lies in [0, D]");
    debug_assert!((sol.x_star.iter().sum::<f64>() + sol.y_star - demand).abs() <= 1e-12 * demand.max(1.0));
    sol
}

/// Weight `ĉ(w)` that the planner's objective places on real-time cost at
/// realization `w`: `1 − ε + ε/(1 − α)` in the CVaR tail `[0, θ]`, `1 − ε`
/// on `(θ, y)`, and zero once renewables cover the schedule.
pub fn risk_weight(sol: &PlannerSolution, w: f64, inst: &MarketInstance) -> f64 {
    let risk = inst.risk();
    let eps = risk.epsilon();
    if w >= sol.y_star {
        0.0
    } else if w <= sol.theta_star {
        1.0 - eps + eps / (1.0 - risk.alpha())
    } else {
        1.0 - eps
    }
}

/// Multiplier `μ̂(w)` of the recourse constraint in the risk-weighted
/// problem: `ĉ(w) · 2ã[y − w]₊`.
pub fn dual_mu(sol: &PlannerSolution, w: f64, inst: &MarketInstance) -> f64 {
    risk_weight(sol, w, inst) * 2.0 * inst.agg_a_tilde() * (sol.y_star - w).max(0.0)
}

/// `∫ μ̂(w) f(w) dw` by adaptive quadrature, split at the kinks of `μ̂`.
pub fn expected_dual_mu(sol: &PlannerSolution, inst: &MarketInstance) -> f64 {
    let dist = inst.dist();
    let upper = sol.y_star.min(dist.w_max());
    let mut breaks = dist.density_breakpoints();
    breaks.push(sol.theta_star);
    quadrature::integrate_piecewise(
        |w| dual_mu(sol, w, inst) * dist.pdf(w).unwrap_or(0.0),
        0.0,
        upper,
        &breaks,
        1e-12,
    )
}

/// Check grid over the support: equispaced points plus `θ*` and `y*` when
/// they fall strictly inside.
pub fn default_w_grid(sol: &PlannerSolution, inst: &MarketInstance, points: usize) -> Vec<f64> {
    let w_max = inst.dist().w_max();
    let points = points.max(2);
    let mut grid: Vec<f64> = (0..points)
        .map(|i| w_max * i as f64 / (points - 1) as f64)
        .collect();
    for extra in [sol.theta_star, sol.y_star] {
        if extra > 0.0 && extra < w_max {
            grid.push(extra);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Largest violation of each optimality condition of the planner's problem.
///
/// All fields are nonnegative; zero means the condition holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// `2aᵢxᵢ − λ ≥ 0`.
    pub stationarity_x: f64,
    /// `xᵢ(2aᵢxᵢ − λ) = 0`.
    pub complementarity_x: f64,
    /// `−λ + ∫μ̂ f ≥ 0`, tightened to `|λ − ∫μ̂ f|` when `y > 0` since
    /// complementarity then forces equality.
    pub dual_link: f64,
    /// `y(−λ + ∫μ̂ f) = 0`.
    pub complementarity_y: f64,
    /// `2ãᵢ ĉ(w) zᵢ(w) − μ̂(w) ≥ 0`.
    pub stationarity_z: f64,
    /// `zᵢ(w)(2ãᵢ ĉ(w) zᵢ(w) − μ̂(w)) = 0`.
    pub complementarity_z: f64,
    /// `μ̂(w)(y − w − Σzᵢ(w)) = 0`.
    pub complementarity_mu: f64,
    /// `μ̂(w) ≥ 0`.
    pub dual_feasibility: f64,
    /// `|Σxᵢ + y − D|`.
    pub balance: f64,
    /// `Σzᵢ(w) ≥ y − w`.
    pub recourse_feasibility: f64,
    /// Negative parts of `x`, `y`, `z`.
    pub nonnegativity: f64,
    /// Grid size used for the functional conditions.
    pub grid_points: usize,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.stationarity_x,
            self.complementarity_x,
            self.dual_link,
            self.complementarity_y,
            self.stationarity_z,
            self.complementarity_z,
            self.complementarity_mu,
            self.dual_feasibility,
            self.balance,
            self.recourse_feasibility,
            self.nonnegativity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `(name, value)` pairs in a fixed order, for reporting.
    pub fn entries(&self) -> [(&'static str, f64); 11] {
        [
            ("stationarity_x", self.stationarity_x),
            ("complementarity_x", self.complementarity_x),
            ("dual_link", self.dual_link),
            ("complementarity_y", self.complementarity_y),
            ("stationarity_z", self.stationarity_z),
            ("complementarity_z", self.complementarity_z),
            ("complementarity_mu", self.complementarity_mu),
            ("dual_feasibility", self.dual_feasibility),
            ("balance", self.balance),
            ("recourse_feasibility", self.recourse_feasibility),
            ("nonnegativity", self.nonnegativity),
        ]
    }
}

/// Evaluates the planner's optimality conditions at `sol`, with the
/// functional conditions checked on `w_grid`.
///
/// The real-time allocation is the closed-form dispatch for `sol.y_star`.
pub fn kkt_residuals(sol: &PlannerSolution, inst: &MarketInstance, w_grid: &[f64]) -> KktReport {
    let mut r = KktReport {
        grid_points: w_grid.len(),
        ..KktReport::default()
    };
    let lambda = sol.lambda_star;
    for (g, &x) in inst.generators().iter().zip(&sol.x_star) {
        let slack = 2.0 * g.a * x - lambda;
        r.stationarity_x = r.stationarity_x.max(-slack);
        r.complementarity_x = r.complementarity_x.max((x * slack).abs());
        r.nonnegativity = r.nonnegativity.max(-x);
    }
    r.nonnegativity = r.nonnegativity.max(-sol.y_star);
    r.balance = (sol.x_star.iter().sum::<f64>() + sol.y_star - inst.demand()).abs();

    let link = -lambda + expected_dual_mu(sol, inst);
    r.dual_link = if sol.y_star > 0.0 { link.abs() } else { (-link).max(0.0) };
    r.complementarity_y = (sol.y_star * link).abs();

    for &w in w_grid {
        let weight = risk_weight(sol, w, inst);
        let mu = dual_mu(sol, w, inst);
        let dispatch = second_stage_dispatch(sol.y_star, w, inst);
        for (g, &z) in inst.generators().iter().zip(&dispatch.quantities) {
            let slack = 2.0 * g.a_tilde * weight * z - mu;
            r.stationarity_z = r.stationarity_z.max(-slack);
            r.complementarity_z = r.complementarity_z.max((z * slack).abs());
            r.nonnegativity = r.nonnegativity.max(-z);
        }
        let supplied: f64 = dispatch.quantities.iter().sum();
        r.complementarity_mu = r.complementarity_mu.max((mu * (sol.y_star - w - supplied)).abs());
        r.dual_feasibility = r.dual_feasibility.max(-mu);
        r.recourse_feasibility = r.recourse_feasibility.max(sol.y_star - w - supplied);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::RenewableDistribution;
    use crate::market::GeneratorParams;
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
    fn dispatch_examples() {
        let inst = s1(0.0);
        let d = second_stage_dispatch(1.0, 0.4, &inst);
        assert_relative_eq!(d.quantities[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(d.quantities[1], 0.2, epsilon = 1e-15);
        assert_relative_eq!(d.mu, 2.4, epsilon = 1e-15);
        let d = second_stage_dispatch(0.3, 0.4, &inst);
        assert_eq!(d.quantities, vec![0.0, 0.0]);
        assert_eq!(d.mu, 0.0);

        let single = MarketInstance::new(
            vec![GeneratorParams::new(1.0, 5.0)],
            1.0,
            RiskParams::new(0.5, 0.0).unwrap(),
            RenewableDistribution::uniform(1.0).unwrap(),
        )
        .unwrap();
        let d = second_stage_dispatch(0.8, 0.5, &single);
        assert_relative_eq!(d.quantities[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(d.mu, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn recourse_cost_examples() {
        let inst = s1(0.0);
        assert_relative_eq!(recourse_cost(1.0, 0.4, &inst), 0.72, epsilon = 1e-15);
        assert_eq!(recourse_cost(0.4, 0.4, &inst), 0.0);
        assert_eq!(recourse_cost(0.4, 0.9, &inst), 0.0);
    }

    #[test]
    fn split_examples() {
        let inst = s1(0.0);
        let x = first_stage_split(0.8, &inst).unwrap();
        assert_relative_eq!(x[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(x[1], 0.4, epsilon = 1e-15);
        assert_eq!(first_stage_split(2.0, &inst).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(first_stage_split(2.1, &inst), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_at_zero_is_negative() {
        let inst = s1(0.4);
        assert_relative_eq!(reduced_gradient(0.0, &inst), -2.0 * inst.agg_a() * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn s1_solutions() {
        let sol = solve_spp(&s1(0.0));
        let expected = (13f64.sqrt() - 1.0) / 3.0;
        assert!((sol.y_star - expected).abs() < 1e-9);
        assert!((sol.lambda_star - 4.0 / 3.0 * (2.0 - expected)).abs() < 1e-9);
        assert!(reduced_gradient(0.86852, &s1(0.0)).abs() < 1e-4);

        let sol = solve_spp(&s1(1.0));
        assert!((sol.y_star - 0.575).abs() < 1e-9);
        assert!((sol.lambda_star - 1.9).abs() < 1e-9);

        let sol = solve_spp(&s1(0.5));
        let root = (-10.0 / 3.0 + (100.0 / 9.0 + 4.0 * 43.0 / 15.0f64).sqrt()) / 2.0;
        assert!((sol.y_star - root).abs() < 1e-9);
        assert_relative_eq!(sol.theta_star, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn zero_demand() {
        let inst = s1(0.5).with_demand(0.0).unwrap();
        let sol = solve_spp(&inst);
        assert_eq!(sol.y_star, 0.0);
        assert_eq!(sol.x_star, vec![0.0, 0.0]);
        assert_eq!(sol.objective, 0.0);
        let grid = default_w_grid(&sol, &inst, DEFAULT_GRID_POINTS);
        assert_eq!(kkt_residuals(&sol, &inst, &grid).max_residual(), 0.0);
    }

    #[test]
    fn dual_mu_pieces() {
        let inst = s1(0.5);
        let sol = solve_spp(&inst);
        let v = dual_mu(&sol, 0.1, &inst);
        assert!((v - 3.0 * 4.0 * (sol.y_star - 0.1)).abs() < 1e-12);
        assert!((v - 7.3098).abs() < 1e-3);
        assert_eq!(dual_mu(&sol, sol.y_star, &inst), 0.0);
        assert_eq!(dual_mu(&sol, 0.95, &inst), 0.0);
        let inst0 = s1(0.0);
        let sol0 = solve_spp(&inst0);
        assert_relative_eq!(dual_mu(&sol0, 0.3, &inst0), 4.0 * (sol0.y_star - 0.3), epsilon = 1e-15);
    }

    #[test]
    fn kkt_holds_at_optimum_and_detects_perturbation() {
        for eps in [0.0, 0.5, 1.0] {
            let inst = s1(eps);
            let sol = solve_spp(&inst);
            let grid = default_w_grid(&sol, &inst, DEFAULT_GRID_POINTS);
            let report = kkt_residuals(&sol, &inst, &grid);
            assert!(report.max_residual() <= 1e-6, "eps={eps}: {report:?}");
            let off = PlannerSolution::from_schedule(sol.y_star + 0.01, &inst).unwrap();
            let report = kkt_residuals(&off, &inst, &grid);
            assert!(report.dual_link > 1e-3, "eps={eps}: {report:?}");
        }
    }

    #[test]
    fn grid_includes_breakpoints() {
        let inst = s1(0.5);
        let sol = solve_spp(&inst);
        let grid = default_w_grid(&sol, &inst, 11);
        assert!(grid.contains(&sol.y_star));
        assert!(grid.len() >= 12 && grid.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(*grid.last().unwrap(), 1.0);
    }
}
