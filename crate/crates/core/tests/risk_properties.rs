mod common;

use common::{random_instance, s1, s1_with_alpha};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskclear::risk::{self, cvar_samples, var_samples};

fn losses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cvar_is_coherent(
        x in losses(),
        noise in prop::collection::vec(-5.0..5.0f64, 200),
        alpha in 0.05..0.99f64,
        c in -5.0..5.0f64,
        lam in 0.0..10.0f64,
        bump in prop::collection::vec(0.0..3.0f64, 200),
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let cx = cvar_samples(&x, alpha).unwrap();
        let cy = cvar_samples(&y, alpha).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(cvar_samples(&sum, alpha).unwrap() <= cx + cy + 1e-9);

        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert!((cvar_samples(&shifted, alpha).unwrap() - (cx + c)).abs() <= 1e-9);

        let scaled: Vec<f64> = x.iter().map(|v| lam * v).collect();
        prop_assert!((cvar_samples(&scaled, alpha).unwrap() - lam * cx).abs() <= 1e-9 * (1.0 + lam));

        let larger: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
        prop_assert!(cvar_samples(&larger, alpha).unwrap() >= cx - 1e-9);

        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(cx >= mean - 1e-9 && cx <= max + 1e-9);
        prop_assert!(cx >= var_samples(&x, alpha).unwrap() - 1e-9);
    }

    #[test]
    fn cvar_recourse_midpoint_convex(seed in any::<u64>(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let top = 1.2 * inst.dist().w_max();
        let (y1, y2) = (u * top, v * top);
        let mid = risk::cvar_recourse(0.5 * (y1 + y2), &inst);
        let chord = 0.5 * (risk::cvar_recourse(y1, &inst) + risk::cvar_recourse(y2, &inst));
        prop_assert!(mid <= chord + 1e-12);
    }

    #[test]
    fn recourse_risk_lies_between_mean_and_worst_case(seed in any::<u64>(), u in 0.0..1.2f64) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let y = u * inst.dist().w_max();
        let e = risk::expected_recourse(y, &inst);
        let c = risk::cvar_recourse(y, &inst);
        prop_assert!(c >= e - 1e-12);
        prop_assert!(c <= inst.agg_a_tilde() * y * y + 1e-12);
        prop_assert!(c >= risk::var_recourse(y, &inst) - 1e-12);
        let rho = risk::rho_spp(y, &inst);
        prop_assert!(rho >= e - 1e-12 && rho <= c + 1e-12);
    }
}

#[test]
fn cvar_derivative_matches_central_differences() {
    let h = 1e-5;
    for alpha in [0.5, 0.8, 0.95] {
        let inst = s1_with_alpha(alpha, 0.0);
        for i in 1..50 {
            let y = 1.2 * i as f64 / 50.0;
            let fd = (risk::cvar_recourse(y + h, &inst) - risk::cvar_recourse(y - h, &inst)) / (2.0 * h);
            let d = risk::cvar_recourse_derivative(y, &inst);
            assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-2), "alpha={alpha} y={y}: {d} vs {fd}");
        }
    }
}

#[test]
fn rho_derivative_matches_central_differences_on_random_markets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-4;
    for _ in 0..30 {
        let inst = random_instance(&mut rng);
        let y = rng.random_range(0.05..1.1) * inst.dist().w_max();
        let fd = (risk::rho_spp(y + h, &inst) - risk::rho_spp(y - h, &inst)) / (2.0 * h);
        let d = risk::rho_spp_derivative(y, &inst);
        assert!((fd - d).abs() <= 1e-5 * d.abs().max(1e-1), "y={y}: {d} vs {fd}");
    }
}

#[test]
fn derivative_is_continuous_at_the_tail_quantile() {
    for alpha in [0.3, 0.8, 0.95] {
        let inst = s1_with_alpha(alpha, 1.0);
        let q = inst.tail_quantile();
        let left = risk::cvar_recourse_derivative(q - 1e-9, &inst);
        let right = risk::cvar_recourse_derivative(q + 1e-9, &inst);
        assert!((left - right).abs() < 1e-7, "alpha={alpha}: {left} vs {right}");
    }
}

#[test]
fn closed_forms_on_the_uniform_market() {
    let inst = s1(0.0);
    // θ = min(0.2, y); for y ≥ 0.2 the tail integral is [y³ − (y − 0.2)³]/3.
    for y in [0.25, 0.5, 0.9] {
        let tail = (y * y * y - (y - 0.2f64).powi(3)) / 3.0;
        assert!((risk::cvar_recourse(y, &inst) - 2.0 * tail / 0.2).abs() < 1e-14);
        assert!((risk::expected_recourse(y, &inst) - 2.0 * y * y * y / 3.0).abs() < 1e-14);
    }
    // Below the quantile the whole loss is the tail: CVaR = ã y³/(3(1 − α)).
    assert!((risk::cvar_recourse(0.1, &inst) - 2.0 * 0.001 / 3.0 / 0.2).abs() < 1e-15);
}
