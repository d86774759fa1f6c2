//! Exact state vectors over the red/blue storage modes of a few ensembles.
//!
//! Basis states are occupation tuples over `2·num_nodes` modes, mode index
//! `2·node + color` (red = 0, blue = 1), each occupation in `0..=n_max`,
//! laid out in mixed radix with mode 0 fastest. Photonic modes of link
//! generation are integrated out analytically in [`prepare_link_noisy`].
//!
//! With `finite_n = Some(N)` every basis state is the normalized symmetric
//! Dicke-like state of N atoms with `n_r` in |r⟩ and `n_b` in |b⟩, and the
//! collective creation operator acts as
//! ŝ_x†|n_r, n_b⟩ = √((n_x+1)(N−n_r−n_b)/N) |…, n_x+1, …⟩.
//! Without it the modes are bosonic.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

/// Largest basis dimension [`vacuum`] accepts.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;
/// Largest atom number [`brute_force_swap_success`] enumerates.
pub const BRUTE_FORCE_MAX_ATOMS: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    fn offset(self) -> usize {
        match self {
            Color::Red => 0,
            Color::Blue => 1,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Red => "red",
            Color::Blue => "blue",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("occupation of node {node} {color} would exceed the cutoff n_max = {n_max}")]
    Truncation { node: usize, color: Color, n_max: u32 },
    #[error("basis dimension {dimension} exceeds the cap {cap}")]
    Resource { dimension: u128, cap: u128 },
    #[error("node {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("state dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_nodes: usize,
    n_max: u32,
    finite_n: Option<u64>,
    amplitudes: Vec<Complex64>,
}

fn dimension(num_nodes: usize, n_max: u32) -> u128 {
    (n_max as u128 + 1).saturating_pow(2 * num_nodes as u32)
}

impl StateVector {
    /// Builds a state from raw amplitudes. Fails if the length does not match
    /// the basis or if an amplitude violates the atom-number constraint.
    pub fn from_amplitudes(
        num_nodes: usize,
        n_max: u32,
        finite_n: Option<u64>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self, StateError> {
        let template = vacuum(num_nodes, n_max, finite_n)?;
        if amplitudes.len() != template.amplitudes.len() {
            return Err(StateError::DimensionMismatch {
                left: template.amplitudes.len().to_string(),
                right: amplitudes.len().to_string(),
            });
        }
        let state = StateVector { amplitudes, ..template };
        if let Some(n) = finite_n {
            for (idx, amp) in state.amplitudes.iter().enumerate() {
                let occ = state.occupations(idx);
                if *amp != Complex64::zero() && occ.chunks(2).any(|pair| (pair[0] + pair[1]) as u64 > n) {
                    return Err(StateError::InvalidArgument(format!(
                        "amplitude on {occ:?} exceeds N = {n} excitations at a node"
                    )));
                }
            }
        }
        Ok(state)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn finite_n(&self) -> Option<u64> {
        self.finite_n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn radix(&self) -> usize {
        self.n_max as usize + 1
    }

    fn stride(&self, mode: usize) -> usize {
        self.radix().pow(mode as u32)
    }

    /// Occupations of every mode for a basis index.
    pub fn occupations(&self, index: usize) -> Vec<u32> {
        let radix = self.radix();
        let mut rest = index;
        (0..2 * self.num_nodes)
            .map(|_| {
                let occ = (rest % radix) as u32;
                rest /= radix;
                occ
            })
            .collect()
    }

    /// Basis index of an occupation tuple, or `None` if it exceeds the cutoff.
    pub fn index_of(&self, occupations: &[u32]) -> Option<usize> {
        if occupations.len() != 2 * self.num_nodes || occupations.iter().any(|&o| o > self.n_max) {
            return None;
        }
        Some(
            occupations
                .iter()
                .enumerate()
                .map(|(mode, &o)| o as usize * self.stride(mode))
                .sum(),
        )
    }

    fn occupation(&self, index: usize, mode: usize) -> u32 {
        ((index / self.stride(mode)) % self.radix()) as u32
    }

    /// Amplitude of a basis state given by occupations (zero outside the cutoff).
    pub fn amplitude(&self, occupations: &[u32]) -> Complex64 {
        self.index_of(occupations)
            .map_or(Complex64::zero(), |i| self.amplitudes[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn normalized(&self) -> Result<Self, StateError> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(StateError::ZeroNorm);
        }
        Ok(self.with_amplitudes(self.amplitudes.iter().map(|a| a / norm).collect()))
    }

    fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        StateVector {
            num_nodes: self.num_nodes,
            n_max: self.n_max,
            finite_n: self.finite_n,
            amplitudes,
        }
    }

    fn zeros_like(&self) -> Vec<Complex64> {
        vec![Complex64::zero(); self.amplitudes.len()]
    }

    fn check_node(&self, node: usize) -> Result<(), StateError> {
        if node < self.num_nodes {
            Ok(())
        } else {
            Err(StateError::NodeOutOfRange {
                node,
                num_nodes: self.num_nodes,
            })
        }
    }

    fn same_shape(&self, other: &StateVector) -> Result<(), StateError> {
        let shape = |s: &StateVector| format!("{} nodes, n_max {}", s.num_nodes, s.n_max);
        if self.num_nodes == other.num_nodes && self.n_max == other.n_max {
            Ok(())
        } else {
            Err(StateError::DimensionMismatch {
                left: shape(self),
                right: shape(other),
            })
        }
    }

    /// Sum of occupations of both colours at one node.
    pub fn node_excitations(&self, index: usize, node: usize) -> u32 {
        self.occupation(index, 2 * node) + self.occupation(index, 2 * node + 1)
    }

    /// Weight of the all-empty basis state.
    pub fn vacuum_weight(&self) -> f64 {
        self.amplitudes[0].norm_sqr()
    }
}

/// All-empty state with unit amplitude.
pub fn vacuum(num_nodes: usize, n_max: u32, finite_n: Option<u64>) -> Result<StateVector, StateError> {
    vacuum_with_cap(num_nodes, n_max, finite_n, DEFAULT_STATE_CAP)
}

pub fn vacuum_with_cap(
    num_nodes: usize,
    n_max: u32,
    finite_n: Option<u64>,
    cap: usize,
) -> Result<StateVector, StateError> {
    if num_nodes == 0 {
        return Err(StateError::InvalidArgument("num_nodes must be >= 1".into()));
    }
    if n_max == 0 {
        return Err(StateError::InvalidArgument("n_max must be >= 1".into()));
    }
    if finite_n == Some(0) {
        return Err(StateError::InvalidArgument("finite_n must be >= 1".into()));
    }
    let dim = dimension(num_nodes, n_max);
    if dim > cap as u128 {
        return Err(StateError::Resource {
            dimension: dim,
            cap: cap as u128,
        });
    }
    let mut amplitudes = vec![Complex64::zero(); dim as usize];
    amplitudes[0] = Complex64::one();
    Ok(StateVector {
        num_nodes,
        n_max,
        finite_n,
        amplitudes,
    })
}

/// Matrix element of ŝ_x† on |n_r, n_b⟩ raising `n_x`.
fn creation_factor(finite_n: Option<u64>, n_x: u32, n_node: u32) -> f64 {
    let raised = n_x as f64 + 1.0;
    match finite_n {
        None => raised.sqrt(),
        Some(n) if (n_node as u64) >= n => 0.0,
        Some(n) => (raised * (n - n_node as u64) as f64 / n as f64).sqrt(),
    }
}

/// Applies ŝ_{node,color}† without renormalizing.
pub fn create_spin_wave(state: &StateVector, node: usize, color: Color) -> Result<StateVector, StateError> {
    state.check_node(node)?;
    let mode = 2 * node + color.offset();
    let stride = state.stride(mode);
    let mut out = state.zeros_like();
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        if *amp == Complex64::zero() {
            continue;
        }
        let n_x = state.occupation(idx, mode);
        let c = creation_factor(state.finite_n, n_x, state.node_excitations(idx, node));
        if c == 0.0 {
            continue;
        }
        if n_x == state.n_max {
            return Err(StateError::Truncation {
                node,
                color,
                n_max: state.n_max,
            });
        }
        out[idx + stride] += amp * c;
    }
    Ok(state.with_amplitudes(out))
}

/// Applies Σ ŝ† over the listed (node, colour) pairs and renormalizes.
pub fn apply_creation_sum(state: &StateVector, terms: &[(usize, Color)]) -> Result<StateVector, StateError> {
    let mut acc = state.zeros_like();
    for &(node, color) in terms {
        let created = create_spin_wave(state, node, color)?;
        for (a, c) in acc.iter_mut().zip(&created.amplitudes) {
            *a += c;
        }
    }
    state.with_amplitudes(acc).normalized()
}

/// (ŝ_a† + ŝ_b†)|ψ⟩, normalized: one heralded link between two nodes.
pub fn prepare_link_ideal(
    state: &StateVector,
    node_a: usize,
    node_b: usize,
    color: Color,
) -> Result<StateVector, StateError> {
    if node_a == node_b {
        return Err(StateError::InvalidArgument(format!(
            "link endpoints must differ, got {node_a} twice"
        )));
    }
    apply_creation_sum(state, &[(node_a, color), (node_b, color)])
}

/// One weighted member of a post-click ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleComponent {
    pub weight: f64,
    pub state: StateVector,
    /// Number of coherent spin-wave excitations added by this link (1 or 2).
    pub coherent_excitations: u32,
    /// Incoherent excitation in a non-symmetric mode at (node_a, node_b).
    pub incoherent: [bool; 2],
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Post-click ensemble of one link attempt to second order in the pair
/// amplitude.
///
/// Each ensemble emits a Stokes photon with probability `p = ηq` into the
/// collected mode, the two photons meet on a balanced beamsplitter and a
/// threshold detector clicks at one output. Sector k (k coherent excitations)
/// carries the atomic state Σ_{n+m=k} p^{k/2}·2^{−k/2}·√(k!)/(n!m!)·(ŝ_a†)^n(ŝ_b†)^m|ψ⟩.
/// Each node independently carries an incoherent excitation with probability
/// (1−η)q, kept as a label.
pub fn prepare_link_noisy(
    state: &StateVector,
    node_a: usize,
    node_b: usize,
    color: Color,
    q: f64,
    eta: f64,
) -> Result<Vec<EnsembleComponent>, StateError> {
    if node_a == node_b {
        return Err(StateError::InvalidArgument(format!(
            "link endpoints must differ, got {node_a} twice"
        )));
    }
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&eta) {
        return Err(StateError::InvalidArgument(format!(
            "q and eta must lie in [0, 1], got q = {q}, eta = {eta}"
        )));
    }
    let p = eta * q;
    if p >= 0.5 {
        return Err(StateError::InvalidArgument(format!("ηq = {p} must be < 0.5")));
    }

    let mut sectors: Vec<(u32, StateVector)> = Vec::new();
    for k in 1..=2u32 {
        let mut acc = state.zeros_like();
        for n in 0..=k {
            let m = k - n;
            let mut term = state.clone();
            for _ in 0..n {
                term = create_spin_wave(&term, node_a, color)?;
            }
            for _ in 0..m {
                term = create_spin_wave(&term, node_b, color)?;
            }
            let coef = p.powf(k as f64 / 2.0) * 2f64.powf(-(k as f64) / 2.0) * factorial(k).sqrt()
                / (factorial(n) * factorial(m));
            for (a, t) in acc.iter_mut().zip(&term.amplitudes) {
                *a += t * coef;
            }
        }
        sectors.push((k, state.with_amplitudes(acc)));
    }

    let total: f64 = sectors.iter().map(|(_, s)| s.norm_sqr()).sum();
    if total == 0.0 {
        return Err(StateError::ZeroNorm);
    }
    let p_inc = (1.0 - eta) * q;
    let mut out = Vec::new();
    for (k, sector) in sectors {
        let w = sector.norm_sqr() / total;
        if w == 0.0 {
            continue;
        }
        let normalized = sector.normalized()?;
        for inc_a in [false, true] {
            for inc_b in [false, true] {
                let pa = if inc_a { p_inc } else { 1.0 - p_inc };
                let pb = if inc_b { p_inc } else { 1.0 - p_inc };
                if pa * pb == 0.0 {
                    continue;
                }
                out.push(EnsembleComponent {
                    weight: w * pa * pb,
                    state: normalized.clone(),
                    coherent_excitations: k,
                    incoherent: [inc_a, inc_b],
                });
            }
        }
    }
    Ok(out)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficient of |k, n−k⟩ in the rotated image of |a, c⟩ (red, blue), n = a + c.
fn rotation_coefficient(a: u32, c: u32, k: u32) -> f64 {
    let n = a + c;
    let mut krawtchouk = 0.0;
    for i in 0..=a.min(k) {
        let j = k - i;
        if j > c {
            continue;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        krawtchouk += sign * binomial(a, i) * binomial(c, j);
    }
    if krawtchouk == 0.0 {
        return 0.0;
    }
    krawtchouk * 2f64.powf(-(n as f64) / 2.0) * (factorial(k) * factorial(n - k) / (factorial(a) * factorial(c))).sqrt()
}

/// π/2 beamsplitter between the red and blue modes of one node:
/// ŝ_b† → (ŝ_b† + ŝ_r†)/√2, ŝ_r† → (ŝ_b† − ŝ_r†)/√2.
///
/// The map is a single-atom unitary applied to every atom, so it keeps the
/// symmetric subspace and its matrix elements do not depend on N. It is its
/// own inverse.
pub fn swap_rotation(state: &StateVector, node: usize) -> Result<StateVector, StateError> {
    state.check_node(node)?;
    let (red, blue) = (2 * node, 2 * node + 1);
    let (s_red, s_blue) = (state.stride(red), state.stride(blue));
    let mut out = state.zeros_like();
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        if *amp == Complex64::zero() {
            continue;
        }
        let a = state.occupation(idx, red);
        let c = state.occupation(idx, blue);
        let base = idx - a as usize * s_red - c as usize * s_blue;
        for k in 0..=a + c {
            let coef = rotation_coefficient(a, c, k);
            if coef == 0.0 {
                continue;
            }
            let (new_red, new_blue) = (k, a + c - k);
            if new_red > state.n_max || new_blue > state.n_max {
                return Err(StateError::Truncation {
                    node,
                    color: if new_red > state.n_max { Color::Red } else { Color::Blue },
                    n_max: state.n_max,
                });
            }
            out[base + new_red as usize * s_red + new_blue as usize * s_blue] += amp * coef;
        }
    }
    Ok(state.with_amplitudes(out))
}

/// Multiplies every basis state by (−1)^{n_{node,color}}.
pub fn phase_flip(state: &StateVector, node: usize, color: Color) -> Result<StateVector, StateError> {
    state.check_node(node)?;
    let mode = 2 * node + color.offset();
    Ok(state.with_amplitudes(
        state
            .amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| if state.occupation(idx, mode) % 2 == 1 { -a } else { *a })
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementLabel {
    pub detected_red: u32,
    pub detected_blue: u32,
    /// Excitations actually present before the readout.
    pub true_red: u32,
    pub true_blue: u32,
    /// Colour of a false count, if one occurred.
    pub dark: Option<Color>,
    /// Correction bit: set when an odd number of red counts was registered.
    pub phase_flip: bool,
}

impl MeasurementLabel {
    pub fn detected_total(&self) -> u32 {
        self.detected_red + self.detected_blue
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub label: MeasurementLabel,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Fluorescent readout of both levels of one node.
///
/// Projects onto the node's (n_r, n_b) sector. Every true excitation is seen
/// with probability `eta_f`; one false count of random colour occurs with
/// probability min(`dark_lambda`, 1). The node is reset to vacuum in the
/// renormalized post-state. Zero-probability branches are omitted.
pub fn fluorescent_measure(
    state: &StateVector,
    node: usize,
    eta_f: f64,
    dark_lambda: f64,
) -> Result<Vec<MeasurementOutcome>, StateError> {
    state.check_node(node)?;
    if !(eta_f > 0.0 && eta_f <= 1.0) {
        return Err(StateError::InvalidArgument(format!(
            "eta_f must be in (0,1], got {eta_f}"
        )));
    }
    if !(dark_lambda >= 0.0) {
        return Err(StateError::InvalidArgument(format!(
            "dark_lambda must be >= 0, got {dark_lambda}"
        )));
    }
    let (red, blue) = (2 * node, 2 * node + 1);
    let (s_red, s_blue) = (state.stride(red), state.stride(blue));
    let total = state.norm_sqr();
    if total == 0.0 {
        return Err(StateError::ZeroNorm);
    }

    let mut sectors: BTreeMap<(u32, u32), Vec<Complex64>> = BTreeMap::new();
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        if *amp == Complex64::zero() {
            continue;
        }
        let tr = state.occupation(idx, red);
        let tb = state.occupation(idx, blue);
        let reset = idx - tr as usize * s_red - tb as usize * s_blue;
        sectors.entry((tr, tb)).or_insert_with(|| state.zeros_like())[reset] += amp;
    }

    let p_dark = dark_lambda.min(1.0);
    let dark_branches = [
        (None, 1.0 - p_dark),
        (Some(Color::Red), p_dark / 2.0),
        (Some(Color::Blue), p_dark / 2.0),
    ];
    let detect = |n: u32, d: u32| binomial(n, d) * eta_f.powi(d as i32) * (1.0 - eta_f).powi((n - d) as i32);

    let mut outcomes = Vec::new();
    for ((tr, tb), amps) in sectors {
        let post = state.with_amplitudes(amps);
        let weight = post.norm_sqr() / total;
        if weight == 0.0 {
            continue;
        }
        let post = post.normalized()?;
        for dr in 0..=tr {
            for db in 0..=tb {
                let p_det = detect(tr, dr) * detect(tb, db);
                if p_det == 0.0 {
                    continue;
                }
                for (dark, p) in dark_branches {
                    if p == 0.0 {
                        continue;
                    }
                    let detected_red = dr + u32::from(dark == Some(Color::Red));
                    let detected_blue = db + u32::from(dark == Some(Color::Blue));
                    outcomes.push(MeasurementOutcome {
                        label: MeasurementLabel {
                            detected_red,
                            detected_blue,
                            true_red: tr,
                            true_blue: tb,
                            dark,
                            phase_flip: detected_red % 2 == 1,
                        },
                        probability: weight * p_det * p,
                        post_state: post.clone(),
                    });
                }
            }
        }
    }
    Ok(outcomes)
}

/// |⟨target|state⟩|² of the normalized states.
pub fn fidelity(state: &StateVector, target: &StateVector) -> Result<f64, StateError> {
    state.same_shape(target)?;
    let (a, b) = (state.normalized()?, target.normalized()?);
    let overlap: Complex64 = b.amplitudes.iter().zip(&a.amplitudes).map(|(t, s)| t.conj() * s).sum();
    Ok(overlap.norm_sqr().min(1.0))
}

/// Three nodes with a blue link between nodes 0 and 1 and a red link between
/// nodes 1 and 2: (ŝ_b,0† + ŝ_b,1†)(ŝ_r,1† + ŝ_r,2†)|vac⟩, normalized.
pub fn three_node_links(finite_n: Option<u64>) -> Result<StateVector, StateError> {
    let vac = vacuum(3, 2, finite_n)?;
    let blue = prepare_link_ideal(&vac, 0, 1, Color::Blue)?;
    prepare_link_ideal(&blue, 1, 2, Color::Red)
}

/// Target of a successful swap: (ŝ_b,0† + ŝ_r,2†)|vac⟩/√2.
pub fn swapped_target(finite_n: Option<u64>) -> Result<StateVector, StateError> {
    apply_creation_sum(&vacuum(3, 2, finite_n)?, &[(0, Color::Blue), (2, Color::Red)])
}

/// Applies the classical correction carried by a swap outcome to the outer
/// blue node.
pub fn correct_phase(state: &StateVector, label: &MeasurementLabel, node: usize) -> Result<StateVector, StateError> {
    if label.phase_flip {
        phase_flip(state, node, Color::Blue)
    } else {
        Ok(state.clone())
    }
}

/// Outcomes of rotating and reading out the middle node of [`three_node_links`].
pub fn swap_outcomes(
    finite_n: Option<u64>,
    eta_f: f64,
    dark_lambda: f64,
) -> Result<Vec<MeasurementOutcome>, StateError> {
    let rotated = swap_rotation(&three_node_links(finite_n)?, 1)?;
    fluorescent_measure(&rotated, 1, eta_f, dark_lambda)
}

/// Probability that exactly one count is registered in the swap.
pub fn swap_single_count_probability(finite_n: Option<u64>, eta_f: f64, dark_lambda: f64) -> Result<f64, StateError> {
    Ok(swap_outcomes(finite_n, eta_f, dark_lambda)?
        .iter()
        .filter(|o| o.label.detected_total() == 1)
        .map(|o| o.probability)
        .sum())
}

const GROUND: u8 = 0;
const RED: u8 = 1;
const BLUE: u8 = 2;

type AtomState = BTreeMap<Vec<u8>, BigInt>;

/// Adds Σ_i |level⟩_i⟨g| over the atoms of each listed node.
fn excite_atoms(state: &AtomState, n_atoms: usize, nodes: &[usize], level: u8) -> AtomState {
    let mut out = AtomState::new();
    for (config, amp) in state {
        for &node in nodes {
            for atom in node * n_atoms..(node + 1) * n_atoms {
                if config[atom] == GROUND {
                    let mut next = config.clone();
                    next[atom] = level;
                    *out.entry(next).or_insert_with(BigInt::zero) += amp;
                }
            }
        }
    }
    out.retain(|_, a| !a.is_zero());
    out
}

/// Per-atom rotation of one node with the 1/√2 per excited atom left out:
/// |b⟩ → |b⟩ + |r⟩, |r⟩ → |b⟩ − |r⟩.
fn rotate_atoms(state: &AtomState, n_atoms: usize, node: usize) -> AtomState {
    let mut current = state.clone();
    for atom in node * n_atoms..(node + 1) * n_atoms {
        let mut next = AtomState::new();
        for (config, amp) in &current {
            match config[atom] {
                GROUND => *next.entry(config.clone()).or_insert_with(BigInt::zero) += amp,
                level => {
                    let mut to_blue = config.clone();
                    to_blue[atom] = BLUE;
                    *next.entry(to_blue).or_insert_with(BigInt::zero) += amp;
                    let mut to_red = config.clone();
                    to_red[atom] = RED;
                    let signed = if level == BLUE { amp.clone() } else { -amp.clone() };
                    *next.entry(to_red).or_insert_with(BigInt::zero) += signed;
                }
            }
        }
        next.retain(|_, a| !a.is_zero());
        current = next;
    }
    current
}

/// Exact probability that exactly one atom of the middle ensemble is excited
/// after the swap rotation, by enumerating explicit atom configurations of
/// three N-atom ensembles.
///
/// Amplitudes are integers: the collective 1/√N factors are common to all
/// terms, and the rotation's 2^{−k/2} for k excited middle atoms is restored
/// exactly in the weights.
pub fn brute_force_swap_success(n_atoms: u64) -> Result<BigRational, StateError> {
    if n_atoms == 0 {
        return Err(StateError::InvalidArgument("n_atoms must be >= 1".into()));
    }
    if n_atoms > BRUTE_FORCE_MAX_ATOMS {
        return Err(StateError::Resource {
            dimension: 3u128.saturating_pow(3 * n_atoms as u32),
            cap: 3u128.pow(3 * BRUTE_FORCE_MAX_ATOMS as u32),
        });
    }
    let n = n_atoms as usize;
    let mut state = AtomState::new();
    state.insert(vec![GROUND; 3 * n], BigInt::one());
    state = excite_atoms(&state, n, &[0, 1], BLUE);
    state = excite_atoms(&state, n, &[1, 2], RED);
    state = rotate_atoms(&state, n, 1);

    let mut total = BigRational::zero();
    let mut single = BigRational::zero();
    for (config, amp) in &state {
        let k = config[n..2 * n].iter().filter(|&&l| l != GROUND).count();
        let weight = BigRational::new(amp * amp, BigInt::one() << k);
        if k == 1 {
            single += &weight;
        }
        total += weight;
    }
    Ok(single / total)
}
