//! Parameter records, validation and the flat `key = value` configuration
//! format.
//!
//! All frequencies are stored as angular frequencies (rad/s). Config files may
//! give them as f/2π (`units.frequencies = "hz_over_2pi"`, the default) and are
//! converted on load. Serialization always writes `rad_per_s`, so a
//! load/serialize/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::physics;

/// Warn when ηq exceeds this (the single-excitation regime needs ηq ≪ 1).
pub const ETA_Q_WARN: f64 = 0.1;
/// Warn when Δ < this multiple of max(γ, Ω_p).
pub const DETUNING_RATIO_WARN: f64 = 10.0;
/// Warn when βη′N falls below this.
pub const MISMATCH_PRODUCT_WARN: f64 = 10.0;
/// Signal velocity in fibre used when the config does not set one (m/s).
pub const DEFAULT_FIBER_LIGHT_SPEED: f64 = 2.0e8;
/// Nesting levels beyond this are rejected (2^s must stay representable).
pub const MAX_NESTING: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    NewSingleRail,
    NewDualRail,
    RefDlcz,
    RefDualRail,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::NewSingleRail,
        Scheme::NewDualRail,
        Scheme::RefDlcz,
        Scheme::RefDualRail,
    ];

    /// Fluorescent-detection scheme (as opposed to a retrieval-based reference).
    pub fn is_new(self) -> bool {
        matches!(self, Scheme::NewSingleRail | Scheme::NewDualRail)
    }

    pub fn is_dual_rail(self) -> bool {
        matches!(self, Scheme::NewDualRail | Scheme::RefDualRail)
    }

    /// The retrieval-based scheme this one is compared against.
    pub fn reference(self) -> Scheme {
        if self.is_dual_rail() {
            Scheme::RefDualRail
        } else {
            Scheme::RefDlcz
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::NewSingleRail => "new_single_rail",
            Scheme::NewDualRail => "new_dual_rail",
            Scheme::RefDlcz => "ref_dlcz",
            Scheme::RefDualRail => "ref_dual_rail",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown scheme '{s}' (expected one of new_single_rail, new_dual_rail, ref_dlcz, ref_dual_rail)"
                )
            })
    }
}

/// How connection losses enter the rate and fidelity models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossModel {
    /// ε_multi = κ_m·q_eff·4^s and the rate is the bare doubling recursion.
    Quadratic,
    /// Connection loss accumulates a vacuum component that amplifies
    /// multiexcitation errors; single-rail rates include the final two-chain
    /// projection.
    LossAware,
}

impl LossModel {
    pub fn as_str(self) -> &'static str {
        match self {
            LossModel::Quadratic => "quadratic",
            LossModel::LossAware => "loss_aware",
        }
    }
}

impl FromStr for LossModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(LossModel::Quadratic),
            "loss_aware" => Ok(LossModel::LossAware),
            other => Err(format!(
                "unknown loss model '{other}' (expected quadratic or loss_aware)"
            )),
        }
    }
}

/// Atomic and optical hardware constants. Rates in rad/s, lengths in m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Excited-state decay rate γ.
    pub gamma: f64,
    /// Probe detuning Δ between the reservoir transition and the cycling transition.
    pub delta: f64,
    /// Branching ratio β for decay into the storage level.
    pub beta: f64,
    /// Probe Rabi frequency Ω_p.
    pub omega_p: f64,
    /// Control Rabi frequency Ω.
    pub omega_c: f64,
    /// Ensemble length l.
    pub length_l: f64,
    /// On-axis optical depth d.
    pub depth_d: f64,
    /// Forward-scattering fraction η.
    pub eta: f64,
    /// Atom number N.
    pub n_atoms: u64,
}

/// Per-segment protocol knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub l0_km: f64,
    pub latt_km: f64,
    /// Excitation probability per attempt.
    pub q: f64,
    /// Single-photon detection efficiency.
    pub eta_d: f64,
    /// Fluorescent detection efficiency.
    pub eta_f: f64,
    /// Target mean number of detected fluorescence photons.
    pub n_photons: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub total_km: f64,
    pub nesting_s: u32,
    pub scheme: Scheme,
    pub target_fidelity: f64,
    pub pir_enabled: bool,
    /// Signal velocity in fibre (m/s).
    pub fiber_light_speed: f64,
}

impl ChainConfig {
    pub fn segments(&self) -> u64 {
        1u64 << self.nesting_s
    }

    pub fn segment_length_km(&self) -> f64 {
        self.total_km / self.segments() as f64
    }
}

/// Model constants that the hardware records do not carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSettings {
    /// Prefactor κ_m of the multiexcitation error.
    pub kappa_m: f64,
    pub loss_model: LossModel,
    /// Required ratio between the upper and lower interrupted-retrieval window bounds.
    pub pir_margin: f64,
    /// Upper limit of the excitation-probability search.
    pub q_cap: f64,
    /// Retrieval constant c_r in the reference efficiency 1 − c_r/√d.
    pub ref_retrieval_const: f64,
    /// Single-photon detection efficiency of the reference schemes.
    pub ref_detection_eff: f64,
    /// Largest nesting level the optimizer tries.
    pub max_nesting: u32,
    /// Also scan the interrupted-retrieval duration instead of fixing it.
    pub co_optimize_pir: bool,
}

impl Default for RateSettings {
    fn default() -> Self {
        RateSettings {
            kappa_m: 1.0,
            loss_model: LossModel::Quadratic,
            pir_margin: 10.0,
            q_cap: 0.5,
            ref_retrieval_const: 1.0,
            ref_detection_eff: 0.4,
            max_nesting: 10,
            co_optimize_pir: false,
        }
    }
}

/// Named error contributions, each a probability.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorBudget {
    pub multiexcitation: f64,
    pub mismatch: f64,
    pub dark_count: f64,
    /// Symmetric spin-wave loss from interrupted retrieval. Enters the rate
    /// through the connection efficiency, not the fidelity.
    pub pir_loss: f64,
}

impl ErrorBudget {
    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("multiexcitation", self.multiexcitation),
            ("mismatch", self.mismatch),
            ("dark_count", self.dark_count),
            ("pir_loss", self.pir_loss),
        ]
    }

    /// Sum of the terms that reduce fidelity.
    pub fn infidelity(&self) -> f64 {
        self.multiexcitation + self.mismatch + self.dark_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    /// Rate of usable end-to-end entanglement (1/s).
    pub rate_hz: f64,
    /// Rate from the bare doubling recursion, before any final projection (1/s).
    pub chain_rate_hz: f64,
    pub fidelity: f64,
    pub error_budget: ErrorBudget,
    pub chain: ChainConfig,
    pub link: LinkParams,
    pub physical: PhysicalParams,
}

/// A complete parameter set as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub physical: PhysicalParams,
    pub link: LinkParams,
    pub chain: ChainConfig,
    pub settings: RateSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<&str> = self.errors.iter().map(String::as_str).collect();
        write!(f, "{}", lines.join("; "))
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

/// Checks every parameter invariant. Errors make the parameter set unusable;
/// warnings flag asymptotic regimes the formulas assume but do not enforce.
pub fn validate(physical: &PhysicalParams, link: &LinkParams, chain: &ChainConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut err = |cond: bool, msg: &str| {
        if !cond {
            report.errors.push(msg.to_string());
        }
    };

    err(physical.gamma > 0.0, "gamma must be > 0");
    err(physical.delta > 0.0, "delta must be > 0");
    err((0.0..=1.0).contains(&physical.beta), "beta must be in [0,1]");
    err(physical.omega_p >= 0.0, "omega_p must be >= 0");
    err(physical.omega_c >= 0.0, "omega_c must be >= 0");
    err(physical.length_l > 0.0, "length_l must be > 0");
    err(physical.depth_d > 0.0, "depth_d must be > 0");
    err(open_unit(physical.eta), "eta must be in (0,1)");
    err(physical.n_atoms >= 1, "n_atoms must be >= 1");

    err(open_unit(link.q), "q must be in (0,1)");
    err(link.eta_d > 0.0 && link.eta_d <= 1.0, "eta_d must be in (0,1]");
    err(link.eta_f > 0.0 && link.eta_f <= 1.0, "eta_f must be in (0,1]");
    err(link.l0_km > 0.0, "l0_km must be > 0");
    err(link.latt_km > 0.0, "latt_km must be > 0");
    err(link.n_photons >= 1.0, "n_photons must be >= 1");

    err(chain.total_km > 0.0, "total_km must be > 0");
    err(chain.nesting_s <= MAX_NESTING, "nesting_s must be <= 40");
    err(open_unit(chain.target_fidelity), "target_fidelity must be in (0,1)");
    err(chain.fiber_light_speed > 0.0, "fiber_light_speed must be > 0");
    if chain.total_km > 0.0 && chain.nesting_s <= MAX_NESTING {
        let derived = chain.segment_length_km();
        err(derived > 0.0, "derived l0_km must be > 0");
        if link.l0_km > 0.0 {
            err(
                (link.l0_km - derived).abs() <= 1e-9 * derived,
                "l0_km inconsistent with total_km / 2^nesting_s",
            );
        }
    }

    if report.errors.is_empty() {
        if physical.eta * link.q > ETA_Q_WARN {
            report.warnings.push("ηq ≪ 1 regime violated".to_string());
        }
        if physical.delta < DETUNING_RATIO_WARN * physical.gamma.max(physical.omega_p) {
            report.warnings.push("Δ ≫ max(γ, Ω_p) regime violated".to_string());
        }
        let eta_prime = physics::link_efficiency(physical.eta, link.eta_d, link.l0_km, link.latt_km);
        if physical.beta * eta_prime * (physical.n_atoms as f64) < MISMATCH_PRODUCT_WARN {
            report.warnings.push("βη′N ≫ 1 regime violated".to_string());
        }
    }
    report
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key '{key}'")]
    MissingKey { key: String },
    #[error("line {line}: invalid value for '{key}': {message}")]
    InvalidValue { line: usize, key: String, message: String },
    #[error("validation failed: {0}")]
    Validation(ValidationReport),
}

const REQUIRED_KEYS: &[&str] = &[
    "physical.gamma",
    "physical.delta",
    "physical.beta",
    "physical.omega_p",
    "physical.omega_c",
    "physical.length_l",
    "physical.depth_d",
    "physical.eta",
    "physical.n_atoms",
    "link.latt_km",
    "link.q",
    "link.eta_d",
    "link.eta_f",
    "link.n_photons",
    "chain.total_km",
    "chain.nesting_s",
    "chain.scheme",
    "chain.target_fidelity",
    "chain.pir_enabled",
    "units.frequencies",
];

const OPTIONAL_KEYS: &[&str] = &[
    "link.l0_km",
    "chain.fiber_light_speed",
    "rates.kappa_m",
    "rates.loss_model",
    "rates.pir_margin",
    "rates.q_cap",
    "reference.retrieval_const",
    "reference.detection_eff",
    "optimizer.max_nesting",
    "optimizer.co_optimize_pir",
];

struct Entries<'a> {
    map: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Entries<'a> {
    fn parse(text: &'a str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            let value = unquote(value.trim());
            if !REQUIRED_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if map.insert(key, (line, value)).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(Entries { map })
    }

    fn raw(&self, key: &str) -> Result<(usize, &'a str), ConfigError> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| ConfigError::MissingKey { key: key.to_string() })
    }

    fn parsed<T, F>(&self, key: &str, parse: F) -> Result<T, ConfigError>
    where
        F: FnOnce(&str) -> Result<T, String>,
    {
        let (line, value) = self.raw(key)?;
        parse(value).map_err(|message| ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            message,
        })
    }

    fn optional<T, F>(&self, key: &str, parse: F) -> Result<Option<T>, ConfigError>
    where
        F: FnOnce(&str) -> Result<T, String>,
    {
        if self.map.contains_key(key) {
            self.parsed(key, parse).map(Some)
        } else {
            Ok(None)
        }
    }

    fn number(&self, key: &str) -> Result<f64, ConfigError> {
        self.parsed(key, parse_number)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(value: &str) -> &str {
    value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value)
}

fn parse_number(value: &str) -> Result<f64, String> {
    let x: f64 = value.parse().map_err(|_| format!("'{value}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{value}' is not finite"))
    }
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("'{other}' is not a boolean (true/false)")),
    }
}

/// Integer-valued number that may be written in scientific notation (`2e3`).
fn parse_integer(value: &str) -> Result<i64, String> {
    let x = parse_number(value)?;
    if x.fract() != 0.0 || x.abs() > 9.0e15 {
        return Err(format!("'{value}' is not an integer"));
    }
    Ok(x as i64)
}

fn negative_integer_error(key: &str) -> ConfigError {
    ConfigError::Validation(ValidationReport {
        errors: vec![format!("{key} must be >= 0")],
        warnings: Vec::new(),
    })
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<Config, ConfigError> {
    let entries = Entries::parse(text)?;

    let frequency_scale = entries.parsed("units.frequencies", |v| match v {
        "hz_over_2pi" => Ok(TAU),
        "rad_per_s" => Ok(1.0),
        other => Err(format!(
            "'{other}' is not a frequency unit (expected hz_over_2pi or rad_per_s)"
        )),
    })?;

    let n_atoms = entries.parsed("physical.n_atoms", parse_integer)?;
    if n_atoms < 0 {
        return Err(negative_integer_error("physical.n_atoms"));
    }
    let physical = PhysicalParams {
        gamma: entries.number("physical.gamma")? * frequency_scale,
        delta: entries.number("physical.delta")? * frequency_scale,
        beta: entries.number("physical.beta")?,
        omega_p: entries.number("physical.omega_p")? * frequency_scale,
        omega_c: entries.number("physical.omega_c")? * frequency_scale,
        length_l: entries.number("physical.length_l")?,
        depth_d: entries.number("physical.depth_d")?,
        eta: entries.number("physical.eta")?,
        n_atoms: n_atoms as u64,
    };

    let nesting = entries.parsed("chain.nesting_s", parse_integer)?;
    if nesting < 0 {
        return Err(negative_integer_error("chain.nesting_s"));
    }
    let chain = ChainConfig {
        total_km: entries.number("chain.total_km")?,
        nesting_s: u32::try_from(nesting).unwrap_or(u32::MAX),
        scheme: entries.parsed("chain.scheme", |v| v.parse())?,
        target_fidelity: entries.number("chain.target_fidelity")?,
        pir_enabled: entries.parsed("chain.pir_enabled", parse_bool)?,
        fiber_light_speed: entries
            .optional("chain.fiber_light_speed", parse_number)?
            .unwrap_or(DEFAULT_FIBER_LIGHT_SPEED),
    };

    let derived_l0 = if chain.nesting_s <= MAX_NESTING {
        chain.segment_length_km()
    } else {
        f64::NAN
    };
    let link = LinkParams {
        l0_km: entries.optional("link.l0_km", parse_number)?.unwrap_or(derived_l0),
        latt_km: entries.number("link.latt_km")?,
        q: entries.number("link.q")?,
        eta_d: entries.number("link.eta_d")?,
        eta_f: entries.number("link.eta_f")?,
        n_photons: entries.number("link.n_photons")?,
    };

    let defaults = RateSettings::default();
    let max_nesting = entries
        .optional("optimizer.max_nesting", parse_integer)?
        .unwrap_or(defaults.max_nesting as i64);
    if !(0..=MAX_NESTING as i64).contains(&max_nesting) {
        return Err(ConfigError::Validation(ValidationReport {
            errors: vec!["optimizer.max_nesting must be in [0, 40]".to_string()],
            warnings: Vec::new(),
        }));
    }
    let settings = RateSettings {
        kappa_m: entries
            .optional("rates.kappa_m", parse_number)?
            .unwrap_or(defaults.kappa_m),
        loss_model: entries
            .optional("rates.loss_model", |v| v.parse())?
            .unwrap_or(defaults.loss_model),
        pir_margin: entries
            .optional("rates.pir_margin", parse_number)?
            .unwrap_or(defaults.pir_margin),
        q_cap: entries.optional("rates.q_cap", parse_number)?.unwrap_or(defaults.q_cap),
        ref_retrieval_const: entries
            .optional("reference.retrieval_const", parse_number)?
            .unwrap_or(defaults.ref_retrieval_const),
        ref_detection_eff: entries
            .optional("reference.detection_eff", parse_number)?
            .unwrap_or(defaults.ref_detection_eff),
        max_nesting: max_nesting as u32,
        co_optimize_pir: entries
            .optional("optimizer.co_optimize_pir", parse_bool)?
            .unwrap_or(defaults.co_optimize_pir),
    };

    let mut report = validate(&physical, &link, &chain);
    let mut setting_err = |cond: bool, msg: &str| {
        if !cond {
            report.errors.push(msg.to_string());
        }
    };
    setting_err(settings.kappa_m > 0.0, "rates.kappa_m must be > 0");
    setting_err(settings.pir_margin > 1.0, "rates.pir_margin must be > 1");
    setting_err(open_unit(settings.q_cap), "rates.q_cap must be in (0,1)");
    setting_err(
        settings.ref_retrieval_const >= 0.0,
        "reference.retrieval_const must be >= 0",
    );
    setting_err(
        settings.ref_detection_eff > 0.0 && settings.ref_detection_eff <= 1.0,
        "reference.detection_eff must be in (0,1]",
    );
    if !report.is_ok() {
        return Err(ConfigError::Validation(report));
    }
    for warning in &report.warnings {
        log::warn!("{warning}");
    }

    Ok(Config {
        physical,
        link,
        chain,
        settings,
    })
}

impl Config {
    /// Serializes to the config format. Frequencies are written in rad/s and
    /// every optional key is spelled out.
    pub fn to_config_string(&self) -> String {
        let p = &self.physical;
        let l = &self.link;
        let c = &self.chain;
        let s = &self.settings;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        put("units.frequencies", "\"rad_per_s\"".to_string());
        put("physical.gamma", format!("{:e}", p.gamma));
        put("physical.delta", format!("{:e}", p.delta));
        put("physical.beta", format!("{:e}", p.beta));
        put("physical.omega_p", format!("{:e}", p.omega_p));
        put("physical.omega_c", format!("{:e}", p.omega_c));
        put("physical.length_l", format!("{:e}", p.length_l));
        put("physical.depth_d", format!("{:e}", p.depth_d));
        put("physical.eta", format!("{:e}", p.eta));
        put("physical.n_atoms", p.n_atoms.to_string());
        put("link.l0_km", format!("{:e}", l.l0_km));
        put("link.latt_km", format!("{:e}", l.latt_km));
        put("link.q", format!("{:e}", l.q));
        put("link.eta_d", format!("{:e}", l.eta_d));
        put("link.eta_f", format!("{:e}", l.eta_f));
        put("link.n_photons", format!("{:e}", l.n_photons));
        put("chain.total_km", format!("{:e}", c.total_km));
        put("chain.nesting_s", c.nesting_s.to_string());
        put("chain.scheme", c.scheme.as_str().to_string());
        put("chain.target_fidelity", format!("{:e}", c.target_fidelity));
        put("chain.pir_enabled", c.pir_enabled.to_string());
        put("chain.fiber_light_speed", format!("{:e}", c.fiber_light_speed));
        put("rates.kappa_m", format!("{:e}", s.kappa_m));
        put("rates.loss_model", s.loss_model.as_str().to_string());
        put("rates.pir_margin", format!("{:e}", s.pir_margin));
        put("rates.q_cap", format!("{:e}", s.q_cap));
        put("reference.retrieval_const", format!("{:e}", s.ref_retrieval_const));
        put("reference.detection_eff", format!("{:e}", s.ref_detection_eff));
        put("optimizer.max_nesting", s.max_nesting.to_string());
        put("optimizer.co_optimize_pir", s.co_optimize_pir.to_string());
        out
    }
}
