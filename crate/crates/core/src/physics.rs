//! Closed-form expressions for the protocol. Every other module calls these
//! rather than re-deriving a formula.
//!
//! Units: rates are angular frequencies (rad/s), lengths of the ensemble in
//! metres, fibre lengths in km. All functions are pure.

use thiserror::Error;

use crate::model::{LinkParams, PhysicalParams, ETA_Q_WARN, MISMATCH_PRODUCT_WARN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("{name} must be {requirement}, got {value}")]
    Domain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

fn require(cond: bool, name: &'static str, requirement: &'static str, value: f64) -> Result<(), PhysicsError> {
    if cond {
        Ok(())
    } else {
        Err(PhysicsError::Domain {
            name,
            requirement,
            value,
        })
    }
}

/// A probability-like value that was clamped into [0, 1]. `clamped` is set
/// (and a warning logged) whenever the leading-order formula left the range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl Clamped {
    fn unit(raw: f64, what: &str) -> Self {
        if raw > 1.0 {
            log::warn!("{what} = {raw} exceeds 1; clamped (outside the leading-order regime)");
            Clamped {
                value: 1.0,
                clamped: true,
            }
        } else {
            Clamped {
                value: raw.max(0.0),
                clamped: raw < 0.0,
            }
        }
    }
}

/// Fluorescent scattering rate on the cycling transition,
/// r = γΩ_p² / (γ² + 2Ω_p²).
pub fn fluorescence_rate(gamma: f64, omega_p: f64) -> Result<f64, PhysicsError> {
    require(gamma > 0.0, "gamma", "> 0", gamma)?;
    require(omega_p >= 0.0, "omega_p", ">= 0", omega_p)?;
    let op2 = omega_p * omega_p;
    Ok(gamma * op2 / (gamma * gamma + 2.0 * op2))
}

/// Probe-induced transfer rate from the reservoir into the storage level,
/// r′ = βγΩ_p² / (4Δ²).
pub fn leak_rate(gamma: f64, omega_p: f64, beta: f64, delta: f64) -> Result<f64, PhysicsError> {
    require(delta > 0.0, "delta", "> 0", delta)?;
    Ok(beta * gamma * omega_p * omega_p / (4.0 * delta * delta))
}

/// Expected number of logical dark counts during one fluorescent readout,
/// (nβ/ηη_d)·(γ² + 2Ω_p²)/(4Δ²)·N.
///
/// This is n·r′·N/(η·η_d·r) written without the rates, so it stays finite
/// as Ω_p → 0; that limit is still rejected because the readout time diverges.
pub fn dark_count_expectation(physical: &PhysicalParams, link: &LinkParams) -> Result<f64, PhysicsError> {
    let r = fluorescence_rate(physical.gamma, physical.omega_p)?;
    let denom = physical.eta * link.eta_d * r;
    require(denom > 0.0, "eta·eta_d·r", "> 0", denom)?;
    require(physical.delta > 0.0, "delta", "> 0", physical.delta)?;
    let g2 = physical.gamma * physical.gamma;
    let op2 = physical.omega_p * physical.omega_p;
    let d2 = physical.delta * physical.delta;
    Ok(
        link.n_photons * physical.beta / (physical.eta * link.eta_d) * (g2 + 2.0 * op2) / (4.0 * d2)
            * physical.n_atoms as f64,
    )
}

/// Group velocity of the retrieved field, v_g = Ω²l/(γd).
pub fn group_velocity(omega_c: f64, length_l: f64, gamma: f64, depth_d: f64) -> Result<f64, PhysicsError> {
    require(omega_c > 0.0, "omega_c", "> 0", omega_c)?;
    require(length_l > 0.0, "length_l", "> 0", length_l)?;
    require(gamma > 0.0, "gamma", "> 0", gamma)?;
    require(depth_d > 0.0, "depth_d", "> 0", depth_d)?;
    Ok(omega_c * omega_c * length_l / (gamma * depth_d))
}

/// Timing window and operating point of purification by interrupted
/// retrieval (PIR): the control field is on for a time T with
/// γ/Ω² < T ≪ l/v_g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PirResult {
    /// Lower window bound γ/Ω² (s).
    pub t_min: f64,
    /// Upper window bound l/v_g (s).
    pub t_max: f64,
    /// Chosen control-field duration T (s).
    pub t_chosen: Option<f64>,
    /// Fraction δ of the symmetric spin wave lost.
    pub delta_loss: Option<f64>,
    /// Residual factor on excitations in non-symmetric modes.
    pub suppression: Option<f64>,
    pub feasible: bool,
}

/// Window bounds only. Feasible iff t_max/t_min (which equals d) reaches `margin`.
pub fn pir_window(physical: &PhysicalParams, margin: f64) -> Result<PirResult, PhysicsError> {
    require(margin > 1.0, "margin", "> 1", margin)?;
    let v_g = group_velocity(physical.omega_c, physical.length_l, physical.gamma, physical.depth_d)?;
    let t_min = physical.gamma / (physical.omega_c * physical.omega_c);
    let t_max = physical.length_l / v_g;
    Ok(PirResult {
        t_min,
        t_max,
        t_chosen: None,
        delta_loss: None,
        suppression: None,
        feasible: t_max / t_min >= margin,
    })
}

/// Fills the window with the duration that loses a fraction `delta_target`
/// of the symmetric spin wave. Feasible iff the window is and
/// t_min < T < t_max.
pub fn pir_operating_point(
    physical: &PhysicalParams,
    margin: f64,
    delta_target: f64,
) -> Result<PirResult, PhysicsError> {
    require(delta_target >= 0.0, "delta_target", ">= 0", delta_target)?;
    let window = pir_window(physical, margin)?;
    let v_g = group_velocity(physical.omega_c, physical.length_l, physical.gamma, physical.depth_d)?;
    let t_chosen = delta_target * physical.length_l / (2.0 * v_g);
    let delta_loss = pir_loss(t_chosen, v_g, physical.length_l)?.value;
    let suppression = pir_suppression(physical.eta, delta_loss, physical.depth_d);
    Ok(PirResult {
        t_chosen: Some(t_chosen),
        delta_loss: Some(delta_loss),
        suppression: Some(suppression),
        feasible: window.feasible && window.t_min < t_chosen && t_chosen < window.t_max,
        ..window
    })
}

/// Upper bound on the lost fraction of the symmetric spin wave,
/// δ = 2·v_g·T/l, clamped to [0, 1].
pub fn pir_loss(t_chosen: f64, v_g: f64, length_l: f64) -> Result<Clamped, PhysicsError> {
    require(t_chosen >= 0.0, "t_chosen", ">= 0", t_chosen)?;
    require(v_g > 0.0, "v_g", "> 0", v_g)?;
    require(length_l > 0.0, "length_l", "> 0", length_l)?;
    Ok(Clamped::unit(2.0 * v_g * t_chosen / length_l, "pir loss δ"))
}

/// Factor η + (1−η)·e^{−δd/2} on excitations outside the symmetric mode.
pub fn pir_suppression(eta: f64, delta_loss: f64, depth_d: f64) -> f64 {
    eta + (1.0 - eta) * (-delta_loss * depth_d / 2.0).exp()
}

/// Loss δ = −2·ln(η)/d that brings the suppression factor to η(2−η),
/// i.e. multiexcitation errors back to order ηq.
pub fn pir_cost_for_target(eta: f64, depth_d: f64) -> f64 {
    -2.0 * eta.ln() / depth_d
}

/// Heralding efficiency of one arm, η′ = η·η_d·e^{−L0/(2L_att)}.
pub fn link_efficiency(eta: f64, eta_d: f64, l0_km: f64, latt_km: f64) -> f64 {
    eta * eta_d * (-l0_km / (2.0 * latt_km)).exp()
}

/// Probability that a connection leaves a separable state because atoms
/// took part in only one of the two spin waves, (1−β)/(βη′N).
pub fn mismatch_separable_prob(beta: f64, eta_prime: f64, n_atoms: u64) -> Result<Clamped, PhysicsError> {
    require(beta > 0.0, "beta", "> 0", beta)?;
    require(eta_prime > 0.0, "eta_prime", "> 0", eta_prime)?;
    require(n_atoms >= 1, "n_atoms", ">= 1", n_atoms as f64)?;
    let n = n_atoms as f64;
    if beta * eta_prime * n < MISMATCH_PRODUCT_WARN {
        log::warn!("βη′N = {} is not ≫ 1", beta * eta_prime * n);
    }
    Ok(Clamped::unit(
        (1.0 - beta) / (beta * eta_prime * n),
        "mismatch probability",
    ))
}

/// Mean number of attempts to herald the second link at a node, 1/(βη′q).
pub fn mismatch_expected_attempts(beta: f64, eta_prime: f64, q: f64) -> Result<f64, PhysicsError> {
    require(beta > 0.0, "beta", "> 0", beta)?;
    require(eta_prime > 0.0, "eta_prime", "> 0", eta_prime)?;
    require(q > 0.0, "q", "> 0", q)?;
    Ok(1.0 / (beta * eta_prime * q))
}

/// Probability that exactly one atom of the central ensemble fluoresces
/// after the swap rotation, 2N/(4N−1).
pub fn swap_success_ideal(n_atoms: u64) -> f64 {
    let n = n_atoms.max(1) as f64;
    2.0 * n / (4.0 * n - 1.0)
}

/// Heralded generation probability per attempt, p0 = 2q·η′ (either
/// ensemble can supply the click; O((ηq)²) dropped).
pub fn generation_success_prob(q: f64, eta: f64, eta_d: f64, l0_km: f64, latt_km: f64) -> f64 {
    if eta * q > ETA_Q_WARN {
        log::warn!("ηq = {} is not ≪ 1; p0 is leading order only", eta * q);
    }
    2.0 * q * link_efficiency(eta, eta_d, l0_km, latt_km)
}
