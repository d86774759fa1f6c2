//! Rate maximization under a fidelity constraint.
//!
//! For every nesting level s the excitation probability is pushed to the
//! largest value the budget allows, and the level with the highest rate wins.
//! The search is exhaustive and deterministic.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ChainConfig, Config, LinkParams, RateResult, Scheme};
use crate::physics;
use crate::rates::{self, RateError};

/// Multiples of the default interrupted-retrieval loss tried when
/// co-optimizing it.
pub const PIR_DELTA_MULTIPLIERS: [f64; 7] = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// One evaluated (s, δ) point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub nesting_s: u32,
    pub pir_delta: Option<f64>,
    /// Excitation probability from the bisection; 0 if none admissible.
    pub q: f64,
    /// Objective; 0 when infeasible.
    pub rate_hz: f64,
    pub fidelity: f64,
    pub feasible: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub scheme: Scheme,
    pub total_km: f64,
    pub target_fidelity: f64,
    pub best: Option<RateResult>,
    pub grid_trace: Vec<GridPoint>,
}

impl OptimizationResult {
    pub fn feasible(&self) -> bool {
        self.best.is_some()
    }

    pub fn rate_hz(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.rate_hz)
    }

    pub fn segments(&self) -> Option<u64> {
        self.best.as_ref().map(|b| b.chain.segments())
    }

    pub fn q(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.link.q)
    }
}

fn infeasible(nesting_s: u32, pir_delta: Option<f64>, note: String) -> GridPoint {
    GridPoint {
        nesting_s,
        pir_delta,
        q: 0.0,
        rate_hz: 0.0,
        fidelity: 0.0,
        feasible: false,
        note: Some(note),
    }
}

fn evaluate_point(
    config: &Config,
    chain: &ChainConfig,
    link: &LinkParams,
    pir_delta: Option<f64>,
) -> Result<(GridPoint, Option<RateResult>), RateError> {
    let (physical, settings) = (&config.physical, &config.settings);
    let model = rates::build_scheme_model_with_delta(chain, physical, link, settings, pir_delta)?;
    let q_max = rates::max_q_for_fidelity(&model, chain, physical, link, chain.target_fidelity)?;
    if !q_max.reachable {
        let note = "fixed errors exceed the fidelity budget".to_string();
        return Ok((infeasible(chain.nesting_s, pir_delta, note), None));
    }
    let link = LinkParams { q: q_max.q, ..*link };
    let model = rates::build_scheme_model_with_delta(chain, physical, &link, settings, pir_delta)?;
    let result = rates::evaluate_model(&model, chain, physical, &link)?;
    let point = GridPoint {
        nesting_s: chain.nesting_s,
        pir_delta,
        q: q_max.q,
        rate_hz: result.rate_hz,
        fidelity: result.fidelity,
        feasible: true,
        note: None,
    };
    Ok((point, Some(result)))
}

/// Best rate over nesting levels 0..=max_nesting at one distance.
///
/// Ties go to the smaller nesting level. Points that fail to evaluate are
/// recorded as infeasible with the reason.
pub fn optimize_at_distance(config: &Config, total_km: f64, scheme: Scheme, target_f: f64) -> OptimizationResult {
    let mut grid_trace = Vec::new();
    let mut best: Option<RateResult> = None;
    let uses_pir = scheme.is_new() && config.chain.pir_enabled;
    let deltas: Vec<Option<f64>> = if uses_pir && config.settings.co_optimize_pir {
        let base = physics::pir_cost_for_target(config.physical.eta, config.physical.depth_d);
        PIR_DELTA_MULTIPLIERS.iter().map(|m| Some(m * base)).collect()
    } else {
        vec![None]
    };

    for nesting_s in 0..=config.settings.max_nesting {
        let chain = ChainConfig {
            total_km,
            nesting_s,
            scheme,
            target_fidelity: target_f,
            ..config.chain
        };
        let link = LinkParams {
            l0_km: chain.segment_length_km(),
            ..config.link
        };
        for &delta in &deltas {
            match evaluate_point(config, &chain, &link, delta) {
                Ok((point, result)) => {
                    if let Some(result) = result {
                        if best.as_ref().is_none_or(|b| result.rate_hz > b.rate_hz) {
                            best = Some(result);
                        }
                    }
                    grid_trace.push(point);
                }
                Err(e) => grid_trace.push(infeasible(nesting_s, delta, e.to_string())),
            }
        }
    }

    OptimizationResult {
        scheme,
        total_km,
        target_fidelity: target_f,
        best,
        grid_trace,
    }
}

/// Optimized results of every requested scheme at one distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub distance_km: f64,
    pub results: Vec<OptimizationResult>,
}

impl SweepRow {
    pub fn result(&self, scheme: Scheme) -> Option<&OptimizationResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }

    pub fn rate(&self, scheme: Scheme) -> Option<f64> {
        self.result(scheme).and_then(OptimizationResult::rate_hz)
    }

    /// Rate of a new scheme divided by the rate of its reference.
    pub fn ratio(&self, new_scheme: Scheme) -> Option<f64> {
        Some(self.rate(new_scheme)? / self.rate(new_scheme.reference())?)
    }
}

/// Logarithmically spaced distances from `d_min_km` to `d_max_km` inclusive.
pub fn log_distances(d_min_km: f64, d_max_km: f64, points: usize) -> Result<Vec<f64>, OptimizerError> {
    if !(d_min_km > 0.0) || !d_max_km.is_finite() {
        return Err(OptimizerError::InvalidSweep(format!(
            "distances must be positive and finite, got {d_min_km}..{d_max_km}"
        )));
    }
    match points {
        0 => Err(OptimizerError::InvalidSweep("points must be >= 1".into())),
        1 if d_min_km == d_max_km => Ok(vec![d_min_km]),
        _ if !(d_min_km < d_max_km) || points < 2 => Err(OptimizerError::InvalidSweep(format!(
            "need d_min < d_max and points >= 2, got {d_min_km}..{d_max_km} with {points} points"
        ))),
        _ => {
            let ratio = d_max_km / d_min_km;
            let last = points - 1;
            Ok((0..points)
                .map(|i| match i {
                    0 => d_min_km,
                    i if i == last => d_max_km,
                    i => d_min_km * ratio.powf(i as f64 / last as f64),
                })
                .collect())
        }
    }
}

/// Optimizes every scheme at every distance. Rows are in distance order
/// regardless of how the work is scheduled.
pub fn sweep_distances(
    config: &Config,
    d_min_km: f64,
    d_max_km: f64,
    points: usize,
    schemes: &[Scheme],
) -> Result<Vec<SweepRow>, OptimizerError> {
    let distances = log_distances(d_min_km, d_max_km, points)?;
    let target = config.chain.target_fidelity;
    Ok(distances
        .par_iter()
        .map(|&distance_km| SweepRow {
            distance_km,
            results: schemes
                .iter()
                .map(|&scheme| optimize_at_distance(config, distance_km, scheme, target))
                .collect(),
        })
        .collect())
}
