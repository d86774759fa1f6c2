//! Distribution rate and fidelity budget of the doubling chain.
//!
//! Rate: T_0 = τ/p0, T_{i+1} = (3/2)·T_i/p_swap, rate = 1/T_s, where τ is
//! the attempt period and p_swap = swap_base_prob·connection_efficiency.
//!
//! Budget: multiexcitation grows with the segment count, mismatch and dark
//! counts add once per swap (new schemes only). Two growth laws are
//! available, see [`LossModel`].

use thiserror::Error;

use crate::model::{ChainConfig, ErrorBudget, LinkParams, LossModel, PhysicalParams, RateResult, RateSettings, Scheme};
use crate::physics::{self, PhysicsError, PirResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(
        "interrupted retrieval infeasible: window [{t_min:e}, {t_max:e}] s cannot host the required duration (margin {margin})"
    )]
    InfeasiblePir { t_min: f64, t_max: f64, margin: f64 },
    #[error("{0} is zero; no entanglement is ever distributed")]
    ZeroProbability(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Per-scheme quantities that drive the rate recursion and the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeModel {
    pub scheme: Scheme,
    /// Efficiency η_c of one entanglement connection.
    pub connection_efficiency: f64,
    /// Heralding probability p0 per attempt (per link pair for dual rail).
    pub generation_prob: f64,
    /// Duration τ of one generation attempt (s).
    pub attempt_period: f64,
    pub swap_base_prob: f64,
    /// Per-link multiexcitation error per unit q.
    pub multi_error_per_q: f64,
    pub pir: Option<PirResult>,
    pub settings: RateSettings,
}

impl SchemeModel {
    pub fn swap_prob(&self) -> f64 {
        self.swap_base_prob * self.connection_efficiency
    }
}

/// Builds the scheme model with the interrupted-retrieval loss fixed at
/// δ = −2 ln η / d.
pub fn build_scheme_model(
    chain: &ChainConfig,
    physical: &PhysicalParams,
    link: &LinkParams,
    settings: &RateSettings,
) -> Result<SchemeModel, RateError> {
    build_scheme_model_with_delta(chain, physical, link, settings, None)
}

/// As [`build_scheme_model`] with an explicit interrupted-retrieval loss.
pub fn build_scheme_model_with_delta(
    chain: &ChainConfig,
    physical: &PhysicalParams,
    link: &LinkParams,
    settings: &RateSettings,
    pir_delta: Option<f64>,
) -> Result<SchemeModel, RateError> {
    if !(link.l0_km > 0.0) || !(chain.fiber_light_speed > 0.0) {
        return Err(RateError::InvalidInput(format!(
            "attempt period needs l0_km > 0 and fiber_light_speed > 0, got {} and {}",
            link.l0_km, chain.fiber_light_speed
        )));
    }
    let attempt_period = link.l0_km * 1e3 / chain.fiber_light_speed;
    let p0 = physics::generation_success_prob(link.q, physical.eta, link.eta_d, link.l0_km, link.latt_km);
    let generation_prob = if chain.scheme.is_dual_rail() { p0 * p0 } else { p0 };

    let (connection_efficiency, swap_base_prob, multi_error_per_q, pir) = if chain.scheme.is_new() {
        let swap_base = physics::swap_success_ideal(physical.n_atoms);
        if chain.pir_enabled {
            let delta = pir_delta.unwrap_or_else(|| physics::pir_cost_for_target(physical.eta, physical.depth_d));
            let pir = physics::pir_operating_point(physical, settings.pir_margin, delta)?;
            if !pir.feasible {
                return Err(RateError::InfeasiblePir {
                    t_min: pir.t_min,
                    t_max: pir.t_max,
                    margin: settings.pir_margin,
                });
            }
            let loss = pir.delta_loss.unwrap_or(0.0);
            let suppression = pir.suppression.unwrap_or(1.0);
            (link.eta_f * (1.0 - loss), swap_base, suppression, Some(pir))
        } else {
            (link.eta_f, swap_base, 1.0, None)
        }
    } else {
        let retrieval = (1.0 - settings.ref_retrieval_const / physical.depth_d.sqrt()).max(0.0);
        (retrieval * settings.ref_detection_eff, 0.5, physical.eta, None)
    };

    Ok(SchemeModel {
        scheme: chain.scheme,
        connection_efficiency,
        generation_prob,
        attempt_period,
        swap_base_prob,
        multi_error_per_q,
        pir,
        settings: *settings,
    })
}

/// End-to-end rate of the bare doubling recursion (1/s).
pub fn analytic_rate(model: &SchemeModel, chain: &ChainConfig) -> Result<f64, RateError> {
    if !(model.generation_prob > 0.0) {
        return Err(RateError::ZeroProbability("generation probability"));
    }
    if !(model.attempt_period > 0.0) {
        return Err(RateError::InvalidInput("attempt_period must be > 0".into()));
    }
    let p_swap = model.swap_prob();
    if chain.nesting_s > 0 && !(p_swap > 0.0) {
        return Err(RateError::ZeroProbability("swap probability"));
    }
    let mut t = model.attempt_period / model.generation_prob;
    for _ in 0..chain.nesting_s {
        t = 1.5 * t / p_swap;
    }
    Ok(1.0 / t)
}

/// Relative vacuum weight ν_k after k levels of lossy connection:
/// ν_0 = 0, ν_{k+1} = (1−η_c) + 2ν_k, so ν_k = (1−η_c)(2^k − 1).
pub fn vacuum_weight(connection_efficiency: f64, level: u32) -> f64 {
    (1.0 - connection_efficiency) * ((1u64 << level) as f64 - 1.0)
}

fn loss_aware_tracks_vacuum(model: &SchemeModel) -> bool {
    model.settings.loss_model == LossModel::LossAware && !model.scheme.is_dual_rail()
}

/// Multiexcitation error after s levels for an effective per-link q_eff.
pub fn multiexcitation_error(model: &SchemeModel, nesting_s: u32, q_eff: f64) -> f64 {
    let segments = (1u64 << nesting_s) as f64;
    let kappa = model.settings.kappa_m;
    match model.settings.loss_model {
        LossModel::Quadratic => kappa * q_eff * segments * segments,
        LossModel::LossAware if model.scheme.is_dual_rail() => kappa * q_eff * segments,
        LossModel::LossAware => {
            let growth: f64 = (0..nesting_s)
                .map(|k| 1.0 + vacuum_weight(model.connection_efficiency, k))
                .product();
            kappa * q_eff * segments * growth
        }
    }
}

/// Fraction of chain completions that survive the final two-chain
/// projection. 1 unless vacuum is tracked.
pub fn final_projection_factor(model: &SchemeModel, nesting_s: u32) -> f64 {
    if !loss_aware_tracks_vacuum(model) {
        return 1.0;
    }
    let eta_c = model.connection_efficiency;
    let nu = vacuum_weight(eta_c, nesting_s);
    (2.0 / 3.0) * (eta_c * eta_c / 2.0) / ((1.0 + nu) * (1.0 + nu))
}

/// Error budget and resulting fidelity at the chain's nesting level.
pub fn fidelity_budget(
    model: &SchemeModel,
    chain: &ChainConfig,
    physical: &PhysicalParams,
    link: &LinkParams,
) -> Result<(ErrorBudget, f64), RateError> {
    let swaps = ((1u64 << chain.nesting_s) - 1) as f64;
    let multiexcitation = multiexcitation_error(model, chain.nesting_s, link.q * model.multi_error_per_q);
    let (mismatch, dark_count) = if chain.scheme.is_new() {
        let eta_prime = physics::link_efficiency(physical.eta, link.eta_d, link.l0_km, link.latt_km);
        let separable = physics::mismatch_separable_prob(physical.beta, eta_prime, physical.n_atoms)?.value;
        let dark = physics::dark_count_expectation(physical, link)?.min(1.0);
        (swaps * separable, swaps * dark)
    } else {
        (0.0, 0.0)
    };
    let budget = ErrorBudget {
        multiexcitation,
        mismatch,
        dark_count,
        pir_loss: model.pir.and_then(|p| p.delta_loss).unwrap_or(0.0),
    };
    Ok((budget, (1.0 - budget.infidelity()).max(0.0)))
}

/// Full evaluation at the given parameters.
pub fn evaluate(
    chain: &ChainConfig,
    physical: &PhysicalParams,
    link: &LinkParams,
    settings: &RateSettings,
) -> Result<RateResult, RateError> {
    evaluate_model(
        &build_scheme_model(chain, physical, link, settings)?,
        chain,
        physical,
        link,
    )
}

pub fn evaluate_model(
    model: &SchemeModel,
    chain: &ChainConfig,
    physical: &PhysicalParams,
    link: &LinkParams,
) -> Result<RateResult, RateError> {
    let chain_rate_hz = analytic_rate(model, chain)?;
    let (error_budget, fidelity) = fidelity_budget(model, chain, physical, link)?;
    Ok(RateResult {
        rate_hz: chain_rate_hz * final_projection_factor(model, chain.nesting_s),
        chain_rate_hz,
        fidelity,
        error_budget,
        chain: *chain,
        link: *link,
        physical: *physical,
    })
}

/// Result of the excitation-probability search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QMax {
    /// Largest admissible q; zero when unreachable.
    pub q: f64,
    /// False when the q-independent errors alone exceed the budget.
    pub reachable: bool,
}

const Q_REL_TOL: f64 = 1e-7;

/// Largest q in (0, q_cap] whose fidelity meets `target_f`, by bisection.
///
/// The returned q always satisfies the target; q·(1 + 1e-6) does not unless
/// q is the cap.
pub fn max_q_for_fidelity(
    model: &SchemeModel,
    chain: &ChainConfig,
    physical: &PhysicalParams,
    link: &LinkParams,
    target_f: f64,
) -> Result<QMax, RateError> {
    if !(target_f > 0.0 && target_f < 1.0) {
        return Err(RateError::InvalidInput(format!(
            "target fidelity must be in (0,1), got {target_f}"
        )));
    }
    let fid = |q: f64| -> Result<f64, RateError> {
        Ok(fidelity_budget(model, chain, physical, &LinkParams { q, ..*link })?.1)
    };
    let unreachable = QMax {
        q: 0.0,
        reachable: false,
    };
    if fid(0.0)? < target_f {
        return Ok(unreachable);
    }
    let cap = model.settings.q_cap;
    if fid(cap)? >= target_f {
        return Ok(QMax {
            q: cap,
            reachable: true,
        });
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > Q_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if fid(mid)? >= target_f {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 {
        Ok(QMax { q: lo, reachable: true })
    } else {
        Ok(unreachable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_config;
    use crate::model::tests::{BENCH_CONFIG, RB_CONFIG};
    use crate::model::Config;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bench() -> Config {
        load_config(BENCH_CONFIG).unwrap()
    }

    fn quadratic(mut cfg: Config) -> Config {
        cfg.settings.loss_model = LossModel::Quadratic;
        cfg
    }

    fn with_scheme(cfg: &Config, scheme: Scheme) -> ChainConfig {
        ChainConfig { scheme, ..cfg.chain }
    }

    fn model(cfg: &Config) -> SchemeModel {
        build_scheme_model(&cfg.chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap()
    }

    fn synthetic(p0: f64, p_swap: f64, period: f64) -> SchemeModel {
        let cfg = bench();
        SchemeModel {
            generation_prob: p0,
            swap_base_prob: 1.0,
            connection_efficiency: p_swap,
            attempt_period: period,
            ..model(&cfg)
        }
    }

    #[test]
    fn new_scheme_connection_efficiency() {
        let cfg = bench();
        let m = model(&cfg);
        assert_relative_eq!(m.connection_efficiency, 0.893_081_086_802_474_2, max_relative = 1e-12);
        let pir = m.pir.unwrap();
        assert!(pir.feasible);
        assert_relative_eq!(pir.delta_loss.unwrap(), 0.059_914_645_471_079_82, max_relative = 1e-12);
        assert_relative_eq!(m.multi_error_per_q, 0.0975, max_relative = 1e-12);
    }

    #[test]
    fn pir_off_keeps_detection_efficiency() {
        let cfg = bench();
        let chain = ChainConfig {
            pir_enabled: false,
            ..cfg.chain
        };
        let m = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        assert_eq!(m.connection_efficiency, cfg.link.eta_f);
        assert_eq!(m.multi_error_per_q, 1.0);
        assert!(m.pir.is_none());
    }

    #[test]
    fn reference_connection_efficiency() {
        let cfg = bench();
        for scheme in [Scheme::RefDlcz, Scheme::RefDualRail] {
            let m = build_scheme_model(&with_scheme(&cfg, scheme), &cfg.physical, &cfg.link, &cfg.settings).unwrap();
            assert_relative_eq!(m.connection_efficiency, 0.9 * 0.4, max_relative = 1e-15);
            assert_eq!(m.swap_base_prob, 0.5);
            assert_eq!(m.multi_error_per_q, cfg.physical.eta);
        }
        assert!(model(&cfg).connection_efficiency > 0.36);
    }

    #[test]
    fn dual_rail_squares_generation() {
        let cfg = bench();
        let single = model(&cfg);
        let dual = build_scheme_model(
            &with_scheme(&cfg, Scheme::NewDualRail),
            &cfg.physical,
            &cfg.link,
            &cfg.settings,
        )
        .unwrap();
        assert_relative_eq!(
            dual.generation_prob,
            single.generation_prob.powi(2),
            max_relative = 1e-15
        );
        assert_eq!(dual.connection_efficiency, single.connection_efficiency);
    }

    #[test]
    fn attempt_period_is_link_flight_time() {
        let cfg = bench();
        assert_relative_eq!(model(&cfg).attempt_period, 125e3 / 2e8, max_relative = 1e-15);
    }

    #[test]
    fn infeasible_window_is_an_error() {
        let cfg = bench();
        let shallow = PhysicalParams {
            depth_d: 5.0,
            ..cfg.physical
        };
        assert!(matches!(
            build_scheme_model(&cfg.chain, &shallow, &cfg.link, &cfg.settings),
            Err(RateError::InfeasiblePir { .. })
        ));
        let chain = ChainConfig {
            pir_enabled: false,
            ..cfg.chain
        };
        assert!(build_scheme_model(&chain, &shallow, &cfg.link, &cfg.settings).is_ok());
    }

    #[test]
    fn rate_without_swaps() {
        let m = synthetic(0.02, 0.4, 1e-3);
        let chain = ChainConfig {
            nesting_s: 0,
            ..bench().chain
        };
        assert_relative_eq!(analytic_rate(&m, &chain).unwrap(), 0.02 / 1e-3, max_relative = 1e-15);
    }

    #[test]
    fn rate_one_level_perfect_swap() {
        let m = synthetic(0.02, 1.0, 1e-3);
        let chain = ChainConfig {
            nesting_s: 1,
            ..bench().chain
        };
        assert_relative_eq!(
            analytic_rate(&m, &chain).unwrap(),
            0.02 / (1.5 * 1e-3),
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_probabilities_are_errors() {
        let chain = ChainConfig {
            nesting_s: 2,
            ..bench().chain
        };
        assert!(matches!(
            analytic_rate(&synthetic(0.0, 0.5, 1e-3), &chain),
            Err(RateError::ZeroProbability(_))
        ));
        assert!(matches!(
            analytic_rate(&synthetic(0.1, 0.0, 1e-3), &chain),
            Err(RateError::ZeroProbability(_))
        ));
        let s0 = ChainConfig { nesting_s: 0, ..chain };
        assert!(analytic_rate(&synthetic(0.1, 0.0, 1e-3), &s0).is_ok());
    }

    #[test]
    fn ideal_limit_has_unit_fidelity() {
        let cfg = quadratic(bench());
        let physical = PhysicalParams {
            beta: 1.0,
            n_atoms: u64::MAX / 4,
            delta: 1e40,
            ..cfg.physical
        };
        let link = LinkParams { q: 0.0, ..cfg.link };
        let m = build_scheme_model(&cfg.chain, &physical, &link, &cfg.settings).unwrap();
        let (_, f) = fidelity_budget(&m, &cfg.chain, &physical, &link).unwrap();
        assert!((1.0 - f) < 1e-12);
    }

    #[test]
    fn pir_divides_multiexcitation_error() {
        let cfg = quadratic(bench());
        let off = ChainConfig {
            pir_enabled: false,
            ..cfg.chain
        };
        let m_on = model(&cfg);
        let m_off = build_scheme_model(&off, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        let (on, _) = fidelity_budget(&m_on, &cfg.chain, &cfg.physical, &cfg.link).unwrap();
        let (no, _) = fidelity_budget(&m_off, &off, &cfg.physical, &cfg.link).unwrap();
        let suppression = m_on.pir.unwrap().suppression.unwrap();
        assert_relative_eq!(
            no.multiexcitation / on.multiexcitation,
            1.0 / suppression,
            max_relative = 1e-12
        );
        assert!((suppression - cfg.physical.eta).abs() < cfg.physical.eta);
    }

    #[test]
    fn quadratic_budget_terms() {
        let cfg = quadratic(bench());
        let m = model(&cfg);
        let (b, f) = fidelity_budget(&m, &cfg.chain, &cfg.physical, &cfg.link).unwrap();
        assert_relative_eq!(b.multiexcitation, 0.01 * 0.0975 * 64.0, max_relative = 1e-12);
        let eta_prime = physics::link_efficiency(0.05, 0.4, 125.0, 20.0);
        let sep = (1.0 - cfg.physical.beta) / (cfg.physical.beta * eta_prime * 1e4);
        assert_relative_eq!(b.mismatch, 7.0 * sep, max_relative = 1e-9);
        let dark = physics::dark_count_expectation(&cfg.physical, &cfg.link).unwrap();
        assert_relative_eq!(b.dark_count, 7.0 * dark, max_relative = 1e-12);
        assert_relative_eq!(f, 1.0 - b.infidelity(), max_relative = 1e-15);
    }

    #[test]
    fn no_swaps_no_per_swap_errors() {
        let cfg = bench();
        let chain = ChainConfig {
            nesting_s: 0,
            ..cfg.chain
        };
        let m = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        let (b, _) = fidelity_budget(&m, &chain, &cfg.physical, &cfg.link).unwrap();
        assert_eq!(b.mismatch, 0.0);
        assert_eq!(b.dark_count, 0.0);
    }

    #[test]
    fn reference_budget_has_only_multiexcitation() {
        let cfg = bench();
        let chain = with_scheme(&cfg, Scheme::RefDlcz);
        let m = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        let (b, _) = fidelity_budget(&m, &chain, &cfg.physical, &cfg.link).unwrap();
        assert_eq!((b.mismatch, b.dark_count, b.pir_loss), (0.0, 0.0, 0.0));
        assert!(b.multiexcitation > 0.0);
    }

    #[test]
    fn vacuum_weight_recursion() {
        let eta_c = 0.83;
        let mut nu = 0.0;
        for k in 0..12 {
            assert_relative_eq!(vacuum_weight(eta_c, k), nu, max_relative = 1e-13, epsilon = 1e-15);
            nu = (1.0 - eta_c) + 2.0 * nu;
        }
    }

    #[test]
    fn loss_aware_error_recursion() {
        let cfg = bench();
        let m = model(&cfg);
        let q_eff = 0.01 * m.multi_error_per_q;
        let mut eps = q_eff;
        for s in 0..10 {
            assert_relative_eq!(multiexcitation_error(&m, s, q_eff), eps, max_relative = 1e-12);
            eps *= 2.0 * (1.0 + vacuum_weight(m.connection_efficiency, s));
        }
        let dual = SchemeModel {
            scheme: Scheme::NewDualRail,
            ..m
        };
        assert_relative_eq!(
            multiexcitation_error(&dual, 5, q_eff),
            32.0 * q_eff,
            max_relative = 1e-15
        );
        assert_eq!(final_projection_factor(&dual, 5), 1.0);
    }

    #[test]
    fn projection_factor_without_loss() {
        let m = SchemeModel {
            connection_efficiency: 1.0,
            ..model(&bench())
        };
        assert_relative_eq!(final_projection_factor(&m, 4), 1.0 / 3.0, max_relative = 1e-15);
        let q = SchemeModel {
            settings: RateSettings::default(),
            ..m
        };
        assert_eq!(final_projection_factor(&q, 4), 1.0);
    }

    #[test]
    fn unreachable_target_is_flagged() {
        let cfg = quadratic(bench());
        let physical = PhysicalParams {
            delta: 1e9,
            ..cfg.physical
        };
        let m = build_scheme_model(&cfg.chain, &physical, &cfg.link, &cfg.settings).unwrap();
        let (floor, _) = fidelity_budget(&m, &cfg.chain, &physical, &LinkParams { q: 0.0, ..cfg.link }).unwrap();
        assert!(floor.dark_count > 0.1);
        let r = max_q_for_fidelity(&m, &cfg.chain, &physical, &cfg.link, 0.999).unwrap();
        assert_eq!(
            r,
            QMax {
                q: 0.0,
                reachable: false
            }
        );
    }

    #[test]
    fn bisection_is_self_consistent() {
        let cfg = bench();
        for scheme in Scheme::ALL {
            let chain = with_scheme(&cfg, scheme);
            let m = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
            let r = max_q_for_fidelity(&m, &chain, &cfg.physical, &cfg.link, 0.9).unwrap();
            assert!(r.reachable && r.q > 0.0 && r.q < cfg.settings.q_cap);
            let f = |q: f64| {
                fidelity_budget(&m, &chain, &cfg.physical, &LinkParams { q, ..cfg.link })
                    .unwrap()
                    .1
            };
            assert!(f(r.q) >= 0.9);
            assert!(f(r.q * 1.01) < 0.9);
            assert!(f(r.q * (1.0 + 1e-6)) < 0.9);
        }
    }

    #[test]
    fn pir_raises_q_max_by_inverse_suppression() {
        let cfg = bench();
        let chain = ChainConfig {
            nesting_s: 0,
            ..cfg.chain
        };
        let off = ChainConfig {
            pir_enabled: false,
            ..chain
        };
        let m_on = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        let m_off = build_scheme_model(&off, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        let on = max_q_for_fidelity(&m_on, &chain, &cfg.physical, &cfg.link, 0.99).unwrap();
        let off = max_q_for_fidelity(&m_off, &off, &cfg.physical, &cfg.link, 0.99).unwrap();
        let suppression = m_on.pir.unwrap().suppression.unwrap();
        assert_relative_eq!(on.q / off.q, 1.0 / suppression, max_relative = 1e-5);
    }

    #[test]
    fn q_cap_returned_when_it_already_meets_target() {
        let cfg = bench();
        let chain = ChainConfig {
            nesting_s: 0,
            ..cfg.chain
        };
        let m = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        let r = max_q_for_fidelity(&m, &chain, &cfg.physical, &cfg.link, 0.01).unwrap();
        assert_eq!(
            r,
            QMax {
                q: cfg.settings.q_cap,
                reachable: true
            }
        );
        assert!(max_q_for_fidelity(&m, &chain, &cfg.physical, &cfg.link, 1.0).is_err());
    }

    #[test]
    fn evaluate_applies_projection_only_when_tracking_vacuum() {
        let cfg = bench();
        let r = evaluate(&cfg.chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        assert!(r.rate_hz < r.chain_rate_hz);
        let q = quadratic(bench());
        let r = evaluate(&q.chain, &q.physical, &q.link, &q.settings).unwrap();
        assert_eq!(r.rate_hz, r.chain_rate_hz);
    }

    #[test]
    fn rb_case_evaluates() {
        let cfg = load_config(RB_CONFIG).unwrap();
        let r = evaluate(&cfg.chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
        assert!(r.rate_hz > 0.0 && r.fidelity > 0.0 && r.fidelity <= 1.0);
    }

    proptest! {
        #[test]
        fn rate_monotone(
            p0 in 1e-4f64..1.0, ps in 0.05f64..1.0, tau in 1e-5f64..1e-2,
            bump in 1.001f64..2.0, s in 0u32..6,
        ) {
            let chain = ChainConfig { nesting_s: s, ..bench().chain };
            let base = analytic_rate(&synthetic(p0, ps, tau), &chain).unwrap();
            prop_assert!(analytic_rate(&synthetic(p0, ps, tau * bump), &chain).unwrap() < base);
            prop_assert!(analytic_rate(&synthetic((p0 * bump).min(1.0), ps, tau), &chain).unwrap() >= base);
            if p0 * bump < 1.0 {
                prop_assert!(analytic_rate(&synthetic(p0 * bump, ps, tau), &chain).unwrap() > base);
            }
            if s > 0 && ps * bump <= 1.0 {
                prop_assert!(analytic_rate(&synthetic(p0, ps * bump, tau), &chain).unwrap() > base);
            }
        }

        #[test]
        fn budget_monotone(
            q in 1e-4f64..0.4, bump in 1.001f64..2.0, s in 0u32..8,
            n in 100u64..100_000, aware in any::<bool>(), scheme_idx in 0usize..4,
        ) {
            let mut cfg = bench();
            if !aware {
                cfg = quadratic(cfg);
            }
            let physical = PhysicalParams { beta: 0.9, n_atoms: n, ..cfg.physical };
            let chain = ChainConfig { nesting_s: s, scheme: Scheme::ALL[scheme_idx], ..cfg.chain };
            let m = build_scheme_model(&chain, &physical, &cfg.link, &cfg.settings).unwrap();
            let f = |q: f64, s: u32, n: u64| {
                let chain = ChainConfig { nesting_s: s, ..chain };
                let physical = PhysicalParams { n_atoms: n, ..physical };
                fidelity_budget(&m, &chain, &physical, &LinkParams { q, ..cfg.link }).unwrap().1
            };
            let base = f(q, s, n);
            prop_assert!(f(q * bump, s, n) <= base);
            prop_assert!(f(q, s + 1, n) <= base);
            prop_assert!(f(q, s, n / 2) <= base);
        }

        #[test]
        fn bisection_never_violates_target(target in 0.5f64..0.99, s in 0u32..6, scheme_idx in 0usize..4) {
            let cfg = bench();
            let chain = ChainConfig { nesting_s: s, scheme: Scheme::ALL[scheme_idx], ..cfg.chain };
            let m = build_scheme_model(&chain, &cfg.physical, &cfg.link, &cfg.settings).unwrap();
            let r = max_q_for_fidelity(&m, &chain, &cfg.physical, &cfg.link, target).unwrap();
            if r.reachable {
                let f = fidelity_budget(&m, &chain, &cfg.physical, &LinkParams { q: r.q, ..cfg.link }).unwrap().1;
                prop_assert!(f >= target);
            }
        }
    }
}
