#![allow(dead_code)]

use rand::Rng;
use riskclear::{GeneratorParams, MarketInstance, RenewableDistribution, RiskParams};

/// Two generators a = (1, 2), ã = (3, 6), D = 2, W ~ U[0, 1], α = 0.8.
pub fn s1(epsilon: f64) -> MarketInstance {
    s1_with_alpha(0.8, epsilon)
}

pub fn s1_with_alpha(alpha: f64, epsilon: f64) -> MarketInstance {
    MarketInstance::new(
        vec![GeneratorParams::new(1.0, 3.0), GeneratorParams::new(2.0, 6.0)],
        2.0,
        RiskParams::new(alpha, epsilon).unwrap(),
        RenewableDistribution::uniform(1.0).unwrap(),
    )
    .unwrap()
}

pub fn random_distribution<R: Rng>(rng: &mut R) -> RenewableDistribution {
    let w_max = rng.random_range(0.5..2.0);
    match rng.random_range(0..3) {
        0 => RenewableDistribution::uniform(w_max).unwrap(),
        1 => RenewableDistribution::truncated_normal(
            w_max,
            rng.random_range(0.0..w_max),
            rng.random_range(0.15..1.0) * w_max,
        )
        .unwrap(),
        _ => {
            let n = rng.random_range(2..=5);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|i| (w_max * i as f64 / (n - 1) as f64, rng.random_range(0.2..2.0)))
                .collect();
            RenewableDistribution::piecewise_linear(&pts).unwrap()
        }
    }
}

/// Random valid market: 1-4 generators with a in (0.5, 2) and ã in (2.5, 6).
pub fn random_instance<R: Rng>(rng: &mut R) -> MarketInstance {
    let n = rng.random_range(1..=4);
    let generators = (0..n)
        .map(|_| GeneratorParams::new(rng.random_range(0.5..2.0), rng.random_range(2.5..6.0)))
        .collect();
    let risk = RiskParams::new(rng.random_range(0.1..0.95), rng.random_range(0.0..=1.0)).unwrap();
    let dist = random_distribution(rng);
    MarketInstance::new(generators, rng.random_range(0.2..2.5), risk, dist).unwrap()
}

/// Composite Simpson rule with `panels` (even) panels on each piece between
/// consecutive `cuts`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, cuts: &[f64], panels: usize) -> f64 {
    let mut total = 0.0;
    for c in cuts.windows(2) {
        let (a, b) = (c[0], c[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels as f64;
        let mut s = f(a) + f(b);
        for i in 1..panels {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        total += s * h / 3.0;
    }
    total
}

/// Breakpoints of `[0, upper]` cut at the density kinks.
pub fn cuts(dist: &RenewableDistribution, upper: f64) -> Vec<f64> {
    let mut c = vec![0.0];
    c.extend(dist.density_breakpoints().into_iter().filter(|&b| b < upper));
    c.push(upper);
    c
}
