//! Brute-force reference computations.
//!
//! Nothing here calls the planner, the analytic risk formulas or the price
//! construction: only the distribution primitives (pdf, quantile, sampling)
//! and the sample CVaR. Recourse risk is evaluated straight from the
//! Rockafellar-Uryasev definition, `ζ + E[(L − ζ)₊]/(1 − α)` with `ζ` the
//! α-quantile of the loss, by fixed-order Gauss-Legendre quadrature.

use rand::Rng;

use crate::error::{Error, Result};
use crate::market::MarketInstance;
use crate::risk::cvar_samples;

/// Analytic value next to its brute-force counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub check: String,
    pub analytic: f64,
    pub oracle: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// Grid points or sample count behind the oracle value.
    pub size: usize,
    pub seed: Option<u64>,
}

impl OracleReport {
    pub fn new(check: impl Into<String>, analytic: f64, oracle: f64, size: usize, seed: Option<u64>) -> Result<Self> {
        if !(analytic.is_finite() && oracle.is_finite()) {
            return Err(Error::domain("oracle comparison needs finite values"));
        }
        let abs_gap = (analytic - oracle).abs();
        let scale = oracle.abs().max(analytic.abs());
        let rel_gap = if scale == 0.0 { 0.0 } else { abs_gap / scale };
        Ok(Self {
            check: check.into(),
            analytic,
            oracle,
            abs_gap,
            rel_gap,
            size,
            seed,
        })
    }
}

// 10-point Gauss-Legendre rule on [-1, 1] (positive half).
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];
const PANELS_PER_PIECE: usize = 16;

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let h = (b - a) / PANELS_PER_PIECE as f64;
    let mut total = 0.0;
    for p in 0..PANELS_PER_PIECE {
        let lo = a + h * p as f64;
        let c = lo + 0.5 * h;
        let r = 0.5 * h;
        let mut s = 0.0;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            s += wt * (f(c - r * x) + f(c + r * x));
        }
        total += s * r;
    }
    total
}

/// `∫ f dW` over the support, cut at `kinks` and at the density breakpoints.
fn expect_over_support<F: Fn(f64) -> f64>(inst: &MarketInstance, kinks: &[f64], f: F) -> f64 {
    let dist = inst.dist();
    let w_max = dist.w_max();
    let mut cuts: Vec<f64> = kinks
        .iter()
        .copied()
        .chain(dist.density_breakpoints())
        .filter(|&c| c > 0.0 && c < w_max)
        .collect();
    cuts.push(0.0);
    cuts.push(w_max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let integrand = |w: f64| f(w) * dist.pdf(w.clamp(0.0, w_max)).expect("clamped into support");
    cuts.windows(2).map(|c| gauss_legendre(&integrand, c[0], c[1])).sum()
}

fn fleet_coefficient(coeffs: impl Iterator<Item = f64>) -> f64 {
    1.0 / coeffs.map(|c| 1.0 / c).sum::<f64>()
}

/// Day-ahead cost of serving `D − y` with the proportional (equal marginal
/// cost) split, summed generator by generator.
fn first_stage_cost(inst: &MarketInstance, y: f64) -> f64 {
    let residual = inst.demand() - y;
    let inv_sum: f64 = inst.generators().iter().map(|g| 1.0 / g.a).sum();
    inst.generators()
        .iter()
        .map(|g| {
            let x = residual / (g.a * inv_sum);
            g.a * x * x
        })
        .sum()
}

/// Planner objective at schedule `y`, with the recourse risk computed from
/// the CVaR definition by quadrature.
pub fn quadrature_objective(inst: &MarketInstance, y: f64) -> f64 {
    let risk = inst.risk();
    let alpha = risk.alpha();
    let eps = risk.epsilon();
    let fleet = fleet_coefficient(inst.generators().iter().map(|g| g.a_tilde));
    let loss = |w: f64| fleet * (y - w).max(0.0).powi(2);

    let expected = expect_over_support(inst, &[y], loss);
    // The loss is nonincreasing in w, so its α-quantile is the loss at the
    // (1 − α)-quantile of W.
    let w_tail = inst.dist().quantile(1.0 - alpha).expect("alpha in (0,1)");
    let zeta = loss(w_tail);
    let crossing = y - (zeta / fleet).sqrt();
    let excess = expect_over_support(inst, &[y, crossing, w_tail], |w| (loss(w) - zeta).max(0.0));
    let cvar = zeta + excess / (1.0 - alpha);

    first_stage_cost(inst, y) + (1.0 - eps) * expected + eps * cvar
}

/// Minimizes [`quadrature_objective`] over the grid `{0, step, …, D}`, then
/// once more at `step/100` around the incumbent.
pub fn grid_search_y(inst: &MarketInstance, step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("grid step {step} must be > 0")));
    }
    let demand = inst.demand();
    if demand == 0.0 {
        return Ok(0.0);
    }
    let scan = |lo: f64, hi: f64, h: f64| {
        let count = ((hi - lo) / h).floor() as usize;
        let mut best = (hi, quadrature_objective(inst, hi));
        for k in 0..=count {
            let y = (lo + h * k as f64).min(hi);
            let v = quadrature_objective(inst, y);
            if v < best.1 {
                best = (y, v);
            }
        }
        best.0
    };
    let coarse = scan(0.0, demand, step);
    let fine = scan((coarse - step).max(0.0), (coarse + step).min(demand), step / 100.0);
    Ok(fine)
}

/// Sample CVaR of `ã[y − W]₊²` from `n` draws of `W`.
pub fn mc_cvar_recourse<R: Rng + ?Sized>(y: f64, inst: &MarketInstance, n: usize, rng: &mut R) -> Result<f64> {
    if n < 1000 {
        return Err(Error::domain(format!("Monte Carlo CVaR needs n >= 1000, got {n}")));
    }
    let fleet = fleet_coefficient(inst.generators().iter().map(|g| g.a_tilde));
    let losses: Vec<f64> = inst
        .dist()
        .sample(rng, n)
        .into_iter()
        .map(|w| fleet * (y - w).max(0.0).powi(2))
        .collect();
    cvar_samples(&losses, inst.risk().alpha())
}

/// Sample-average solution of the single-stage problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SaaSolution {
    pub y: f64,
    pub objective: f64,
    pub scenarios: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Draws `n_scenarios` realizations and minimizes the sampled planner
/// objective by golden-section search on `[0, D]`.
///
/// Each scenario's recourse cost is its own inner minimum `ã[y − wₛ]₊²`,
/// so the two-stage problem is solved as one problem over `y`.
pub fn saa_single_stage<R: Rng + ?Sized>(inst: &MarketInstance, n_scenarios: usize, rng: &mut R) -> Result<SaaSolution> {
    if n_scenarios < 1000 {
        return Err(Error::domain(format!("SAA needs at least 1000 scenarios, got {n_scenarios}")));
    }
    let scenarios = inst.dist().sample(rng, n_scenarios);
    let risk = inst.risk();
    let fleet = fleet_coefficient(inst.generators().iter().map(|g| g.a_tilde));
    let mut losses = vec![0.0; scenarios.len()];
    let mut objective = |y: f64| -> Result<f64> {
        for (l, &w) in losses.iter_mut().zip(&scenarios) {
            *l = fleet * (y - w).max(0.0).powi(2);
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        let cvar = cvar_samples(&losses, risk.alpha())?;
        Ok(first_stage_cost(inst, y) + (1.0 - risk.epsilon()) * mean + risk.epsilon() * cvar)
    };

    let demand = inst.demand();
    let (mut lo, mut hi) = (0.0, demand);
    let tol = 1e-7 * demand.max(1.0);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = objective(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = objective(d)?;
        }
    }
    let y = 0.5 * (lo + hi);
    Ok(SaaSolution {
        y,
        objective: objective(y)?,
        scenarios: n_scenarios,
    })
}
