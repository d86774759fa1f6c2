//! Monte Carlo waiting times against the exact two-link chain and the
//! analytic recursion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repeater_core::montecarlo::*;
use repeater_core::rates::{analytic_rate, build_scheme_model, SchemeModel};
use repeater_core::{ChainConfig, LinkParams, PhysicalParams, RateSettings, Scheme};

fn chain(nesting_s: u32) -> ChainConfig {
    ChainConfig {
        total_km: 100.0,
        nesting_s,
        scheme: Scheme::NewSingleRail,
        target_fidelity: 0.9,
        pir_enabled: false,
        fiber_light_speed: 2e8,
    }
}

fn model(p0: f64, p_swap: f64) -> SchemeModel {
    let physical = PhysicalParams {
        gamma: 1.9e8,
        delta: 6e13,
        beta: 0.99,
        omega_p: 2e7,
        omega_c: 6e6,
        length_l: 0.01,
        depth_d: 100.0,
        eta: 0.05,
        n_atoms: 10_000,
    };
    let link = LinkParams {
        l0_km: 50.0,
        latt_km: 20.0,
        q: 0.01,
        eta_d: 0.4,
        eta_f: 0.95,
        n_photons: 20.0,
    };
    let base = build_scheme_model(&chain(1), &physical, &link, &RateSettings::default()).unwrap();
    SchemeModel {
        generation_prob: p0,
        swap_base_prob: 1.0,
        connection_efficiency: p_swap,
        ..base
    }
}

#[test]
fn random_points_agree_with_markov_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..5 {
        let p0 = rng.random_range(0.02..0.9);
        let ps = rng.random_range(0.1..1.0);
        let m = model(p0, ps);
        let sim = SimConfig {
            trials: 20_000,
            seed: 100 + i,
            max_attempt_cap: u64::MAX,
        };
        let est = simulate_chain(&m, &chain(1), &sim).unwrap();
        let exact = exact_two_link_expectation(p0, ps, m.attempt_period).unwrap();
        assert!(
            (est.mean_time_s - exact).abs() < 3.0 * est.std_error_s,
            "p0 = {p0}, p_swap = {ps}: {} vs {exact} ± {}",
            est.mean_time_s,
            est.std_error_s
        );
    }
}

#[test]
fn recursion_stays_within_band_of_simulation() {
    for (p0, ps) in [(0.01, 0.45), (0.001, 0.3), (0.2, 0.9)] {
        let m = model(p0, ps);
        for s in [1, 2] {
            let sim = SimConfig {
                trials: 5_000,
                seed: 7,
                max_attempt_cap: u64::MAX,
            };
            let est = simulate_chain(&m, &chain(s), &sim).unwrap();
            let ratio = analytic_rate(&m, &chain(s)).unwrap() / est.rate_hz;
            assert!(
                (1.0 / 1.5..=1.5).contains(&ratio),
                "p0 = {p0}, ps = {ps}, s = {s}: {ratio}"
            );
        }
    }
}
