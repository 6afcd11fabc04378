//! Two-stage settlement mechanism.
//!
//! 1. Generators submit `(aᵢ, ãᵢ)`.
//! 2. The operator solves the planner's problem and announces `P₁` and `P₂(·)`.
//! 3. Each generator picks its day-ahead output and is paid `P₁ xᵢ`.
//! 4. `W = w` is revealed; each generator picks its real-time output and is
//!    paid `P₂(w) zᵢ(w)`.
//! 5. Each generator produces `xᵢ + zᵢ(w)`.
//!
//! Real-time energy is paid to the generator, consistent with the profit
//! `P₁x − ax² + P₂(w)z − ãz²` that generators maximize. Renewable output
//! above the schedule is spilled.

use rand::Rng;

use crate::dist::RenewableDistribution;
use crate::equilibrium::{self, PriceSchedule};
use crate::error::{Error, Result};
use crate::market::{GeneratorParams, MarketInstance};
use crate::planner::{self, PlannerSolution};
use crate::risk::{self, RiskParams};

/// Cost coefficients submitted by the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct BidSet {
    bids: Vec<GeneratorParams>,
}

impl BidSet {
    pub fn new(bids: Vec<GeneratorParams>) -> Self {
        Self { bids }
    }

    pub fn bids(&self) -> &[GeneratorParams] {
        &self.bids
    }
}

/// Settlement of one generator at one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSettlement {
    pub params: GeneratorParams,
    pub stage1_qty: f64,
    pub stage2_qty: f64,
    pub stage1_payment: f64,
    pub stage2_payment: f64,
    pub production_total: f64,
}

/// Outcome of one mechanism run.
#[derive(Debug, Clone, PartialEq)]
pub struct SettlementRecord {
    pub realized_w: f64,
    pub p1: f64,
    pub p2: f64,
    pub y_star: f64,
    /// Renewable energy used, `min{w, y*}`.
    pub renewable_used: f64,
    /// Renewable energy in excess of the schedule, `[w − y*]₊`.
    pub renewable_spilled: f64,
    pub generators: Vec<GeneratorSettlement>,
    /// Total paid out by the operator in both stages.
    pub iso_outlay: f64,
}

impl SettlementRecord {
    pub fn stage2_outlay(&self) -> f64 {
        self.generators.iter().map(|g| g.stage2_payment).sum()
    }
}

/// A market that has been cleared (steps 1-2) and can be settled at any
/// realization.
#[derive(Debug, Clone)]
pub struct ClearedMarket {
    pub instance: MarketInstance,
    pub solution: PlannerSolution,
    pub prices: PriceSchedule,
}

impl ClearedMarket {
    /// Bid intake and clearing. Bids that break the model assumptions are
    /// rejected with the violated rule.
    pub fn clear(bids: &BidSet, demand: f64, risk: RiskParams, dist: &RenewableDistribution) -> Result<Self> {
        let instance = MarketInstance::new(bids.bids.clone(), demand, risk, dist.clone()).map_err(|e| match e {
            Error::Validation { path, rule } => Error::RejectedBid { path, rule },
            other => other,
        })?;
        let solution = planner::solve_spp(&instance);
        let prices = equilibrium::equilibrium_prices(&solution, &instance);
        Ok(Self {
            instance,
            solution,
            prices,
        })
    }

    /// Steps 3-5 at realization `w`.
    pub fn settle(&self, realized_w: f64) -> Result<SettlementRecord> {
        let w_max = self.instance.dist().w_max();
        if !(0.0..=w_max).contains(&realized_w) {
            return Err(Error::domain(format!("realized w = {realized_w} outside [0, {w_max}]")));
        }
        let p1 = self.prices.p1;
        let p2 = self.prices.p2(realized_w);
        let generators: Vec<GeneratorSettlement> = self
            .instance
            .generators()
            .iter()
            .map(|g| {
                let x = equilibrium::gen_stage1_best_response(p1, g);
                let z = equilibrium::gen_stage2_best_response(p2, g);
                GeneratorSettlement {
                    params: *g,
                    stage1_qty: x,
                    stage2_qty: z,
                    stage1_payment: p1 * x,
                    stage2_payment: p2 * z,
                    production_total: x + z,
                }
            })
            .collect();
        let iso_outlay = generators.iter().map(|g| g.stage1_payment + g.stage2_payment).sum();
        let y_star = self.solution.y_star;
        Ok(SettlementRecord {
            realized_w,
            p1,
            p2,
            y_star,
            renewable_used: realized_w.min(y_star),
            renewable_spilled: (realized_w - y_star).max(0.0),
            generators,
            iso_outlay,
        })
    }
}

/// Runs the full mechanism for a single realization `realized_w`.
pub fn run_mechanism(
    bids: &BidSet,
    demand: f64,
    risk: RiskParams,
    dist: &RenewableDistribution,
    realized_w: f64,
) -> Result<SettlementRecord> {
    ClearedMarket::clear(bids, demand, risk, dist)?.settle(realized_w)
}

/// Realized profit of generator `i`: `P₁x − ax² + P₂(w)z − ãz²`.
pub fn generator_realized_profit(record: &SettlementRecord, i: usize) -> Result<f64> {
    let g = record
        .generators
        .get(i)
        .ok_or_else(|| Error::domain(format!("generator index {i} out of range")))?;
    Ok(equilibrium::stage1_profit(record.p1, g.stage1_qty, &g.params)
        + equilibrium::stage2_profit(record.p2, g.stage2_qty, &g.params))
}

/// Aggregates over a batch of mechanism runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub runs: usize,
    pub alpha: f64,
    pub mean_iso_outlay: f64,
    pub cvar_iso_outlay: f64,
    pub mean_stage2_outlay: f64,
    pub mean_generator_profit: Vec<f64>,
    /// `max |Σzᵢ − [y* − w]₊|` over runs.
    pub max_clearing_shortfall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<SettlementRecord>,
    pub summary: SimulationSummary,
}

/// Clears once, then settles `n` independent draws of `W` from `rng`.
pub fn simulate_runs<R: Rng + ?Sized>(
    bids: &BidSet,
    demand: f64,
    risk: RiskParams,
    dist: &RenewableDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Simulation> {
    if n == 0 {
        return Err(Error::domain("number of runs must be >= 1"));
    }
    let market = ClearedMarket::clear(bids, demand, risk, dist)?;
    let records = dist
        .sample(rng, n)
        .into_iter()
        .map(|w| market.settle(w))
        .collect::<Result<Vec<_>>>()?;

    let count = records.len() as f64;
    let outlays: Vec<f64> = records.iter().map(|r| r.iso_outlay).collect();
    let n_gen = market.instance.generators().len();
    let mut mean_profit = vec![0.0; n_gen];
    let mut max_shortfall: f64 = 0.0;
    for r in &records {
        for (i, slot) in mean_profit.iter_mut().enumerate() {
            *slot += generator_realized_profit(r, i)?;
        }
        let supplied: f64 = r.generators.iter().map(|g| g.stage2_qty).sum();
        max_shortfall = max_shortfall.max((supplied - (r.y_star - r.realized_w).max(0.0)).abs());
    }
    mean_profit.iter_mut().for_each(|p| *p /= count);
    let summary = SimulationSummary {
        runs: records.len(),
        alpha: risk.alpha(),
        mean_iso_outlay: outlays.iter().sum::<f64>() / count,
        cvar_iso_outlay: risk::cvar_samples(&outlays, risk.alpha())?,
        mean_stage2_outlay: records.iter().map(SettlementRecord::stage2_outlay).sum::<f64>() / count,
        mean_generator_profit: mean_profit,
        max_clearing_shortfall: max_shortfall,
    };
    Ok(Simulation { records, summary })
}
