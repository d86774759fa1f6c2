//! Waiting-time simulation of the doubling chain and an exact Markov-chain
//! expectation for the two-link case.
//!
//! Time is counted in whole attempt periods. Each trial draws from its own
//! ChaCha8 stream `(seed, trial)`, so results do not depend on scheduling.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::ChainConfig;
use crate::rates::SchemeModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("trial {trial} exceeded the cap of {cap} attempt periods")]
    AttemptCap { trial: u64, cap: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Abort a trial once it has run this many attempt periods.
    pub max_attempt_cap: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean_time_s: f64,
    pub std_error_s: f64,
    pub rate_hz: f64,
    /// Fraction of swap attempts that succeeded (1 without swaps).
    pub success_fraction: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialTally {
    periods: u64,
    swaps_ok: u64,
    swaps: u64,
}

struct Trial {
    rng: ChaCha8Rng,
    generation: Geometric,
    p_swap: f64,
    cap: u64,
    trial: u64,
    swaps_ok: u64,
    swaps: u64,
}

impl Trial {
    fn check(&self, periods: u64) -> Result<u64, SimError> {
        if periods > self.cap {
            Err(SimError::AttemptCap {
                trial: self.trial,
                cap: self.cap,
            })
        } else {
            Ok(periods)
        }
    }

    /// Periods until a link spanning 2^level segments exists, starting from
    /// nothing. A failed swap discards both halves.
    fn link(&mut self, level: u32) -> Result<u64, SimError> {
        if level == 0 {
            let failures = self.generation.sample(&mut self.rng);
            return self.check(failures.saturating_add(1));
        }
        let mut elapsed = 0u64;
        loop {
            let left = self.link(level - 1)?;
            let right = self.link(level - 1)?;
            elapsed = self.check(elapsed.saturating_add(left.max(right)))?;
            self.swaps += 1;
            if self.rng.random_bool(self.p_swap) {
                self.swaps_ok += 1;
                return Ok(elapsed);
            }
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<(), SimError> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(SimError::InvalidInput(format!("{name} must be in (0,1], got {p}")))
    }
}

fn run_trial(
    trial: u64,
    seed: u64,
    nesting_s: u32,
    generation: Geometric,
    p_swap: f64,
    cap: u64,
) -> Result<TrialTally, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let mut t = Trial {
        rng,
        generation,
        p_swap,
        cap,
        trial,
        swaps_ok: 0,
        swaps: 0,
    };
    let periods = t.link(nesting_s)?;
    Ok(TrialTally {
        periods,
        swaps_ok: t.swaps_ok,
        swaps: t.swaps,
    })
}

/// Sum by recursive halving; the result depends only on the slice order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Mean and standard error of the mean.
fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1.0);
    (mean, (variance / n).sqrt())
}

/// Monte Carlo estimate of the time to distribute one end-to-end link.
pub fn simulate_chain(model: &SchemeModel, chain: &ChainConfig, sim: &SimConfig) -> Result<SimEstimate, SimError> {
    if sim.trials == 0 || sim.max_attempt_cap == 0 {
        return Err(SimError::InvalidInput("trials and max_attempt_cap must be >= 1".into()));
    }
    if !(model.attempt_period > 0.0) {
        return Err(SimError::InvalidInput("attempt_period must be > 0".into()));
    }
    check_probability("generation probability", model.generation_prob)?;
    let p_swap = model.swap_prob();
    if chain.nesting_s > 0 {
        check_probability("swap probability", p_swap)?;
    }
    let generation = Geometric::new(model.generation_prob)
        .map_err(|e| SimError::InvalidInput(format!("generation probability: {e}")))?;

    let tallies: Vec<Result<TrialTally, SimError>> = (0..sim.trials)
        .into_par_iter()
        .map(|trial| {
            run_trial(
                trial,
                sim.seed,
                chain.nesting_s,
                generation,
                p_swap.min(1.0),
                sim.max_attempt_cap,
            )
        })
        .collect();

    let mut periods = Vec::with_capacity(tallies.len());
    let (mut swaps_ok, mut swaps) = (0u64, 0u64);
    for tally in tallies {
        let tally = tally?;
        periods.push(tally.periods as f64);
        swaps_ok += tally.swaps_ok;
        swaps += tally.swaps;
    }
    let (mean, err) = mean_and_error(&periods);
    let mean_time_s = mean * model.attempt_period;
    Ok(SimEstimate {
        mean_time_s,
        std_error_s: err * model.attempt_period,
        rate_hz: 1.0 / mean_time_s,
        success_fraction: if swaps == 0 {
            1.0
        } else {
            swaps_ok as f64 / swaps as f64
        },
        trials: sim.trials,
    })
}

/// Exact expected completion time of two links and one swap, with both
/// links discarded on a failed swap.
///
/// Transient states per period: no link, left link only, right link only.
/// Solves (I − Q)·E = 1 for the expected number of periods.
pub fn exact_two_link_expectation(p0: f64, p_swap: f64, attempt_period: f64) -> Result<f64, SimError> {
    check_probability("p0", p0)?;
    check_probability("p_swap", p_swap)?;
    let miss = 1.0 - p0;
    let retry = 1.0 - p_swap;
    #[rustfmt::skip]
    let q = Matrix3::new(
        miss * miss + p0 * p0 * retry, p0 * miss, miss * p0,
        p0 * retry, miss, 0.0,
        p0 * retry, 0.0, miss,
    );
    let expected = (Matrix3::identity() - q)
        .lu()
        .solve(&Vector3::repeat(1.0))
        .ok_or_else(|| SimError::InvalidInput("singular transition system".into()))?;
    Ok(expected[0] * attempt_period)
}
