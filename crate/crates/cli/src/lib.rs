//! Command implementations behind the `repeater` binary.
//!
//! Every command returns its report as a string so that output is assembled
//! sequentially and can be compared byte for byte.

// `!(x > 0.0)` rejects NaN as well; that is the intent everywhere.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use num_rational::BigRational;
use repeater_core::montecarlo::{self, SimConfig, SimError};
use repeater_core::optimizer::{self, OptimizationResult, SweepRow};
use repeater_core::physics;
use repeater_core::rates::{self, SchemeModel};
use repeater_core::statesim;
use repeater_core::{load_config, validate, ChainConfig, Config, LinkParams, PhysicalParams, RateResult, Scheme};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ATTEMPT_CAP: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Default abort guard for `simulate`, in attempt periods per trial.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000_000_000_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("fidelity target infeasible: {0}")]
    Infeasible(String),
    #[error("simulation aborted: {0}")]
    AttemptCap(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::AttemptCap(_) => EXIT_ATTEMPT_CAP,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

/// Output of a command: the report for stdout and warnings for stderr.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub warnings: Vec<String>,
}

/// Nine significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        "nan".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Float(x) => f.write_str(&sci(*x)),
            Cell::Int(n) => write!(f, "{n}"),
            Cell::Missing => f.write_str("nan"),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<Option<u64>> for Cell {
    fn from(x: Option<u64>) -> Self {
        x.map_or(Cell::Missing, Cell::Int)
    }
}

/// Comma-separated table with a header row and LF line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), String> {
        if row.len() != self.header.len() {
            return Err(format!(
                "row has {} fields, header has {}",
                row.len(),
                self.header.len()
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn short_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::NewSingleRail => "new_single",
        Scheme::NewDualRail => "new_dual",
        Scheme::RefDlcz => "ref_dlcz",
        Scheme::RefDualRail => "ref_dual",
    }
}

/// Column names of the sweep table.
pub fn sweep_header() -> Vec<String> {
    let mut header = vec!["distance_km".to_string()];
    header.extend(Scheme::ALL.iter().map(|s| format!("rate_{}_hz", short_name(*s))));
    header.push("ratio_single".into());
    header.push("ratio_dual".into());
    for s in Scheme::ALL {
        header.push(format!("opt_segments_{}", short_name(s)));
        header.push(format!("opt_q_{}", short_name(s)));
    }
    header
}

pub fn sweep_table(rows: &[SweepRow]) -> CsvTable {
    let mut table = CsvTable::new(sweep_header());
    for row in rows {
        let mut cells = vec![Cell::Float(row.distance_km)];
        cells.extend(Scheme::ALL.iter().map(|s| Cell::from(row.rate(*s))));
        cells.push(row.ratio(Scheme::NewSingleRail).into());
        cells.push(row.ratio(Scheme::NewDualRail).into());
        for s in Scheme::ALL {
            let result = row.result(s);
            cells.push(result.and_then(OptimizationResult::segments).into());
            cells.push(result.and_then(OptimizationResult::q).into());
        }
        table.push(cells).expect("sweep rows match the header");
    }
    table
}

/// Reads, parses and validates a config file. Regime warnings are returned.
pub fn read_config(path: &Path) -> Result<(Config, Vec<String>), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = load_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let report = validate(&config.physical, &config.link, &config.chain);
    Ok((config, report.warnings))
}

fn push_line(out: &mut String, key: &str, value: impl fmt::Display) {
    writeln!(out, "{key:<22}{value}").expect("writing to a String cannot fail");
}

fn write_result(out: &mut String, r: &RateResult) {
    push_line(out, "scheme", r.chain.scheme);
    push_line(out, "distance_km", sci(r.chain.total_km));
    push_line(out, "target_fidelity", sci(r.chain.target_fidelity));
    push_line(out, "nesting_s", r.chain.nesting_s);
    push_line(out, "segments", r.chain.segments());
    push_line(out, "segment_km", sci(r.link.l0_km));
    push_line(out, "q", sci(r.link.q));
    push_line(out, "rate_hz", sci(r.rate_hz));
    push_line(out, "chain_rate_hz", sci(r.chain_rate_hz));
    push_line(out, "fidelity", sci(r.fidelity));
    out.push_str("error budget\n");
    for (name, value) in r.error_budget.entries() {
        push_line(out, &format!("  {name}"), sci(value));
    }
}

fn infeasible_reason(result: &OptimizationResult) -> String {
    let mut notes: Vec<&str> = result.grid_trace.iter().filter_map(|p| p.note.as_deref()).collect();
    notes.dedup();
    format!(
        "no nesting level reaches fidelity {} for {} at {} km ({})",
        result.target_fidelity,
        result.scheme,
        result.total_km,
        notes.join("; ")
    )
}

/// Optimized operating point at one distance.
pub fn cmd_rates(config_path: &Path, distance_km: Option<f64>, scheme: Option<Scheme>) -> Result<Output, CliError> {
    let (config, warnings) = read_config(config_path)?;
    let distance_km = distance_km.unwrap_or(config.chain.total_km);
    if !(distance_km > 0.0) || !distance_km.is_finite() {
        return Err(CliError::Config(format!(
            "--distance-km must be > 0, got {distance_km}"
        )));
    }
    let scheme = scheme.unwrap_or(config.chain.scheme);
    let result = optimizer::optimize_at_distance(&config, distance_km, scheme, config.chain.target_fidelity);
    let best = result
        .best
        .as_ref()
        .ok_or_else(|| CliError::Infeasible(infeasible_reason(&result)))?;
    let mut stdout = String::new();
    write_result(&mut stdout, best);
    Ok(Output { stdout, warnings })
}

/// Distance sweep for all schemes; CSV goes to `out` or to stdout.
pub fn cmd_sweep(
    config_path: &Path,
    d_min_km: f64,
    d_max_km: f64,
    points: usize,
    out: Option<&Path>,
) -> Result<Output, CliError> {
    let (config, warnings) = read_config(config_path)?;
    let rows = optimizer::sweep_distances(&config, d_min_km, d_max_km, points, &Scheme::ALL)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let csv = sweep_table(&rows).to_csv();
    let stdout = match out {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            format!("wrote {} rows to {}\n", rows.len(), path.display())
        }
        None => csv,
    };
    Ok(Output { stdout, warnings })
}

/// Options of the `simulate` command beyond the config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    pub segments: Option<u64>,
    pub trials: u64,
    pub seed: u64,
    pub max_attempts: u64,
    /// Replaces the heralding probability of the scheme model.
    pub p0: Option<f64>,
    /// Replaces the swap success probability of the scheme model.
    pub p_swap: Option<f64>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            segments: None,
            trials: 10_000,
            seed: 1,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            p0: None,
            p_swap: None,
        }
    }
}

/// Monte Carlo against the analytic recursion at the configured parameters.
///
/// Verdict: with at most one swap level the simulated mean must lie within
/// three standard errors of the exact expectation; deeper chains must stay
/// within a factor 1.5 of the recursion.
pub fn cmd_simulate(config_path: &Path, opts: &SimulateOptions) -> Result<Output, CliError> {
    let (config, warnings) = read_config(config_path)?;
    let segments = opts.segments.unwrap_or(config.chain.segments());
    if segments == 0 || !segments.is_power_of_two() {
        return Err(CliError::Config(format!(
            "--segments must be a power of two, got {segments}"
        )));
    }
    let chain = ChainConfig {
        nesting_s: segments.trailing_zeros(),
        ..config.chain
    };
    let link = LinkParams {
        l0_km: chain.segment_length_km(),
        ..config.link
    };
    let mut model = rates::build_scheme_model(&chain, &config.physical, &link, &config.settings)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(p0) = opts.p0 {
        model.generation_prob = p0;
    }
    if let Some(p_swap) = opts.p_swap {
        model = SchemeModel {
            swap_base_prob: 1.0,
            connection_efficiency: p_swap,
            ..model
        };
    }
    let sim = SimConfig {
        trials: opts.trials,
        seed: opts.seed,
        max_attempt_cap: opts.max_attempts,
    };
    let estimate = montecarlo::simulate_chain(&model, &chain, &sim).map_err(|e| match e {
        SimError::AttemptCap { .. } => CliError::AttemptCap(e.to_string()),
        SimError::InvalidInput(_) => CliError::Config(e.to_string()),
    })?;
    let analytic = rates::analytic_rate(&model, &chain).map_err(|e| CliError::Config(e.to_string()))?;
    let ratio = analytic / estimate.rate_hz;

    let mut out = String::new();
    push_line(&mut out, "scheme", chain.scheme);
    push_line(&mut out, "segments", segments);
    push_line(&mut out, "trials", sim.trials);
    push_line(&mut out, "seed", sim.seed);
    push_line(&mut out, "attempt_period_s", sci(model.attempt_period));
    push_line(&mut out, "p0", sci(model.generation_prob));
    push_line(&mut out, "p_swap", sci(model.swap_prob()));
    push_line(&mut out, "mc_mean_time_s", sci(estimate.mean_time_s));
    push_line(&mut out, "mc_std_error_s", sci(estimate.std_error_s));
    push_line(&mut out, "mc_rate_hz", sci(estimate.rate_hz));
    push_line(&mut out, "mc_success_fraction", sci(estimate.success_fraction));
    push_line(&mut out, "analytic_rate_hz", sci(analytic));
    push_line(&mut out, "ratio_analytic_mc", sci(ratio));

    let pass = match chain.nesting_s {
        0 | 1 => {
            let exact = if chain.nesting_s == 0 {
                model.attempt_period / model.generation_prob
            } else {
                montecarlo::exact_two_link_expectation(model.generation_prob, model.swap_prob(), model.attempt_period)
                    .map_err(|e| CliError::Config(e.to_string()))?
            };
            let deviation = (estimate.mean_time_s - exact).abs();
            push_line(&mut out, "exact_mean_time_s", sci(exact));
            push_line(&mut out, "criterion", "|mc - exact| <= 3 standard errors");
            deviation <= 3.0 * estimate.std_error_s
        }
        _ => {
            push_line(&mut out, "criterion", "analytic/mc within a factor 1.5");
            (1.0 / 1.5..=1.5).contains(&ratio)
        }
    };
    push_line(&mut out, "verdict", if pass { "PASS" } else { "FAIL" });
    Ok(Output { stdout: out, warnings })
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

fn float_check(name: &str, expected: f64, actual: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        expected: format!("{expected}"),
        actual: format!("{actual}"),
        pass: (actual - expected).abs() <= tol,
    }
}

fn state_err(e: statesim::StateError) -> Check {
    Check {
        name: "state engine".into(),
        expected: "no error".into(),
        actual: e.to_string(),
        pass: false,
    }
}

/// Protocol-correctness checks on the exact state engine and the
/// interrupted-retrieval identities.
pub fn verification_checks() -> Vec<Check> {
    let mut checks = Vec::new();

    match statesim::swap_single_count_probability(None, 1.0, 0.0) {
        Ok(p) => checks.push(float_check("swap success (bosonic)", 0.5, p, 1e-12)),
        Err(e) => checks.push(state_err(e)),
    }

    let projection = statesim::swap_outcomes(None, 1.0, 0.0).and_then(|outcomes| {
        let target = statesim::swapped_target(None)?;
        let mut worst = 1.0f64;
        for o in outcomes.iter().filter(|o| o.label.detected_total() == 1) {
            let corrected = statesim::correct_phase(&o.post_state, &o.label, 0)?;
            worst = worst.min(statesim::fidelity(&corrected, &target)?);
        }
        Ok(worst)
    });
    match projection {
        Ok(f) => checks.push(float_check("projection fidelity (phase-corrected)", 1.0, f, 1e-12)),
        Err(e) => checks.push(state_err(e)),
    }

    let involution = statesim::three_node_links(None).and_then(|s| {
        let twice = statesim::swap_rotation(&statesim::swap_rotation(&s, 1)?, 1)?;
        statesim::fidelity(&twice, &s)
    });
    match involution {
        Ok(f) => checks.push(float_check(
            "swap rotation applied twice (overlap with input)",
            1.0,
            f,
            1e-12,
        )),
        Err(e) => checks.push(state_err(e)),
    }

    for n in 1..=4u64 {
        let expected = BigRational::new((2 * n).into(), (4 * n - 1).into());
        let name = format!("2N/(4N−1), N={n}");
        match statesim::brute_force_swap_success(n) {
            Ok(actual) => checks.push(Check {
                name,
                expected: expected.to_string(),
                actual: actual.to_string(),
                pass: actual == expected,
            }),
            Err(e) => checks.push(state_err(e)),
        }
    }

    let (eta, d) = (0.05, 100.0);
    let delta = physics::pir_cost_for_target(eta, d);
    checks.push(Check {
        name: "PIR loss δ = −2 ln η / d (η=0.05, d=100) below 0.1".into(),
        expected: "< 0.1".into(),
        actual: format!("{delta}"),
        pass: delta < 0.1,
    });
    checks.push(float_check(
        "PIR suppression at δ equals η(2−η)",
        eta * (2.0 - eta),
        physics::pir_suppression(eta, delta, d),
        1e-12,
    ));
    let physical = PhysicalParams {
        gamma: 1.9e8,
        delta: 6e13,
        beta: 0.99,
        omega_p: 2e7,
        omega_c: 6e6,
        length_l: 0.01,
        depth_d: d,
        eta,
        n_atoms: 10_000,
    };
    match physics::pir_window(&physical, 10.0).map(|w| w.t_max / w.t_min) {
        Ok(r) => checks.push(float_check("PIR window t_max/t_min equals d", d, r, 1e-9 * d)),
        Err(e) => checks.push(Check {
            name: "PIR window".into(),
            expected: "no error".into(),
            actual: e.to_string(),
            pass: false,
        }),
    }
    checks
}

/// Runs [`verification_checks`]; fails with the first failing check named.
pub fn cmd_verify() -> Result<Output, (Output, CliError)> {
    let checks = verification_checks();
    let mut stdout = String::new();
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        writeln!(
            stdout,
            "{status} {}: expected {}, actual {}",
            c.name, c.expected, c.actual
        )
        .expect("writing to a String cannot fail");
    }
    let output = Output {
        stdout,
        warnings: Vec::new(),
    };
    match checks.iter().find(|c| !c.pass) {
        Some(c) => Err((output, CliError::Verification(c.name.clone()))),
        None => Ok(output),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sci(1234.5678912345), "1.23456789e3");
        assert_eq!(sci(0.0), "0.00000000e0");
        assert_eq!(sci(f64::NAN), "nan");
        assert_eq!(Cell::Int(16).to_string(), "16");
    }

    #[test]
    fn table_arity_is_enforced() {
        let mut t = CsvTable::new(["a", "b"]);
        assert!(t.push(vec![Cell::Int(1)]).is_err());
        t.push(vec![Cell::Int(1), Cell::Float(0.5)]).unwrap();
        assert_eq!(t.to_csv(), "a,b\n1,5.00000000e-1\n");
    }

    #[test]
    fn sweep_header_layout() {
        let h = sweep_header();
        assert_eq!(
            &h[..9],
            [
                "distance_km",
                "rate_new_single_hz",
                "rate_new_dual_hz",
                "rate_ref_dlcz_hz",
                "rate_ref_dual_hz",
                "ratio_single",
                "ratio_dual",
                "opt_segments_new_single",
                "opt_q_new_single",
            ]
        );
        assert_eq!(h.len(), 15);
    }

    #[test]
    fn exit_codes_are_disjoint() {
        let codes = [
            CliError::Config(String::new()).exit_code(),
            CliError::Infeasible(String::new()).exit_code(),
            CliError::AttemptCap(String::new()).exit_code(),
            CliError::Verification(String::new()).exit_code(),
        ];
        assert_eq!(codes, [1, 2, 3, 4]);
        assert!(!codes.contains(&EXIT_OK));
    }

    #[test]
    fn verification_passes() {
        let checks = verification_checks();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert!(cmd_verify().is_ok());
    }
}
