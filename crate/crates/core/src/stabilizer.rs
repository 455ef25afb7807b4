//! Stabilizer-code threshold Monte Carlo and the concatenation recursion.
//!
//! Once the noise has been reduced to independent per-qubit Pauli errors with
//! rates ε_α, resilience follows from the usual argument: a distance-3 code
//! turns a physical rate p into a logical rate ≈ c p², and concatenation
//! iterates that map. This module provides the [[7,1,3]] Steane code with a
//! minimum-weight lookup decoder, Monte Carlo and exhaustive estimates of the
//! logical rate, and the recursion `p → c p²`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::Channel;
use crate::hypercube::ErrorRates;
use crate::probability::{linear_fit, ln_binomial};
use crate::seed::stream_rng;

/// Largest code accepted; the lookup decoder enumerates all 4ⁿ Paulis.
pub const MAX_QUBITS: usize = 10;
pub const MIN_SAMPLES: u64 = 10_000;
/// Samples per parallel task. Fixed so results do not depend on thread count.
pub const CHUNK: u64 = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilizerError {
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("Pauli acts on {got} qubits, code has {expected}")]
    Length { expected: usize, got: usize },
    #[error("samples must be >= {MIN_SAMPLES}, got {0}")]
    TooFewSamples(u64),
    #[error("invalid rates: {0}")]
    Rates(String),
    #[error("need at least two positive rates to fit, got {0}")]
    Fit(usize),
}

/// Pauli operator in binary symplectic form, phase ignored. Bit `j` of `x`
/// (`z`) is set when qubit `j` carries an X (Z) factor; Y sets both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliOp {
    pub n: usize,
    pub x: u64,
    pub z: u64,
}

impl PauliOp {
    pub fn identity(n: usize) -> Self {
        PauliOp { n, x: 0, z: 0 }
    }

    pub fn single(n: usize, qubit: usize, ch: Channel) -> Self {
        let b = 1u64 << qubit;
        match ch {
            Channel::X => PauliOp { n, x: b, z: 0 },
            Channel::Y => PauliOp { n, x: b, z: b },
            Channel::Z => PauliOp { n, x: 0, z: b },
        }
    }

    /// Parses a string such as `"XIZYIII"`.
    pub fn parse(s: &str) -> Result<Self, StabilizerError> {
        let mut p = PauliOp::identity(s.len());
        for (j, c) in s.chars().enumerate() {
            match c {
                'I' => {}
                'X' => p.x |= 1 << j,
                'Z' => p.z |= 1 << j,
                'Y' => {
                    p.x |= 1 << j;
                    p.z |= 1 << j;
                }
                other => return Err(StabilizerError::InvalidCode(format!("unknown Pauli letter {other:?}"))),
            }
        }
        Ok(p)
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Product up to phase.
    pub fn mul(&self, other: &PauliOp) -> PauliOp {
        PauliOp { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z }
    }

    /// `true` when the symplectic form `x₁·z₂ + z₁·x₂` vanishes mod 2.
    pub fn commutes_with(&self, other: &PauliOp) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Lexicographic tie-break key on the binary representation.
    fn key(&self) -> u128 {
        ((self.x as u128) << self.n) | self.z as u128
    }

    pub fn qubit(&self, j: usize) -> Option<Channel> {
        match ((self.x >> j) & 1, (self.z >> j) & 1) {
            (0, 0) => None,
            (1, 0) => Some(Channel::X),
            (1, 1) => Some(Channel::Y),
            _ => Some(Channel::Z),
        }
    }
}

impl std::fmt::Display for PauliOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for j in 0..self.n {
            let c = match self.qubit(j) {
                None => 'I',
                Some(Channel::X) => 'X',
                Some(Channel::Y) => 'Y',
                Some(Channel::Z) => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalVerdict {
    NoError,
    LogicalX,
    LogicalZ,
    LogicalY,
}

impl LogicalVerdict {
    pub fn is_failure(self) -> bool {
        self != LogicalVerdict::NoError
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerCode {
    pub n: usize,
    pub k: usize,
    pub generators: Vec<PauliOp>,
    pub logical_x: PauliOp,
    pub logical_z: PauliOp,
    /// Correction for each syndrome, indexed by the syndrome bits.
    pub decoder: Vec<PauliOp>,
}

impl StabilizerCode {
    /// Builds a single-logical-qubit code and its minimum-weight lookup
    /// decoder. Ties are broken towards the smallest `(x, z)` bit string.
    pub fn new(generators: Vec<PauliOp>, logical_x: PauliOp, logical_z: PauliOp) -> Result<Self, StabilizerError> {
        let n = logical_x.n;
        if n == 0 || n > MAX_QUBITS {
            return Err(StabilizerError::InvalidCode(format!("n must be in 1..={MAX_QUBITS}, got {n}")));
        }
        if generators.len() + 1 != n {
            return Err(StabilizerError::InvalidCode(format!("need {} generators, got {}", n - 1, generators.len())));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.n != n {
                return Err(StabilizerError::InvalidCode(format!("generator {i} acts on {} qubits", g.n)));
            }
            for (j, h) in generators.iter().enumerate().skip(i + 1) {
                if !g.commutes_with(h) {
                    return Err(StabilizerError::InvalidCode(format!("generators {i} and {j} anticommute")));
                }
            }
            if !g.commutes_with(&logical_x) || !g.commutes_with(&logical_z) {
                return Err(StabilizerError::InvalidCode(format!("generator {i} anticommutes with a logical")));
            }
        }
        if logical_x.commutes_with(&logical_z) {
            return Err(StabilizerError::InvalidCode("logical X and Z must anticommute".into()));
        }
        let mut code = StabilizerCode { n, k: 1, generators, logical_x, logical_z, decoder: Vec::new() };
        let m = code.generators.len();
        let mut best: Vec<Option<PauliOp>> = vec![None; 1 << m];
        let mask = (1u64 << n) - 1;
        for x in 0..=mask {
            for z in 0..=mask {
                let p = PauliOp { n, x, z };
                let s = code.syndrome(&p);
                let better = match &best[s] {
                    None => true,
                    Some(b) => (p.weight(), p.key()) < (b.weight(), b.key()),
                };
                if better {
                    best[s] = Some(p);
                }
            }
        }
        code.decoder = best
            .into_iter()
            .enumerate()
            .map(|(s, b)| b.ok_or_else(|| StabilizerError::InvalidCode(format!("syndrome {s} unreachable: generators dependent"))))
            .collect::<Result<_, _>>()?;
        Ok(code)
    }

    /// Bit `i` is set when `error` anticommutes with generator `i`.
    pub fn syndrome(&self, error: &PauliOp) -> usize {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.commutes_with(error))
            .fold(0, |s, (i, _)| s | (1 << i))
    }

    /// Perfect syndrome extraction followed by lookup correction.
    pub fn decode_cycle(&self, error: &PauliOp) -> Result<LogicalVerdict, StabilizerError> {
        if error.n != self.n {
            return Err(StabilizerError::Length { expected: self.n, got: error.n });
        }
        Ok(self.classify_residual(error))
    }

    fn classify_residual(&self, error: &PauliOp) -> LogicalVerdict {
        let residual = error.mul(&self.decoder[self.syndrome(error)]);
        // residual is in the normalizer; its logical content is read off
        // from anticommutation with the opposite logical
        match (!residual.commutes_with(&self.logical_z), !residual.commutes_with(&self.logical_x)) {
            (false, false) => LogicalVerdict::NoError,
            (true, false) => LogicalVerdict::LogicalX,
            (false, true) => LogicalVerdict::LogicalZ,
            (true, true) => LogicalVerdict::LogicalY,
        }
    }

    /// All Paulis of exactly weight `w` on this code.
    pub fn paulis_of_weight(&self, w: usize) -> Vec<PauliOp> {
        let mut out = Vec::new();
        let n = self.n;
        for support in 0u64..(1 << n) {
            if support.count_ones() as usize != w {
                continue;
            }
            let qubits: Vec<usize> = (0..n).filter(|j| support >> j & 1 == 1).collect();
            for labels in 0..3usize.pow(w as u32) {
                let mut p = PauliOp::identity(n);
                let mut l = labels;
                for &q in &qubits {
                    p = p.mul(&PauliOp::single(n, q, Channel::ALL[l % 3]));
                    l /= 3;
                }
                out.push(p);
            }
        }
        out
    }
}

/// The [[7,1,3]] Steane code. Column `j` of the parity-check matrix is the
/// binary expansion of `j + 1`; generators are ordered X-type then Z-type.
pub fn steane_code() -> StabilizerCode {
    let n = 7;
    let rows: Vec<u64> = (0..3).map(|r| (0..n).filter(|j| (j + 1) >> r & 1 == 1).fold(0u64, |m, j| m | 1 << j)).collect();
    let mut generators: Vec<PauliOp> = rows.iter().map(|&r| PauliOp { n, x: r, z: 0 }).collect();
    generators.extend(rows.iter().map(|&r| PauliOp { n, x: 0, z: r }));
    let all = (1u64 << n) - 1;
    StabilizerCode::new(generators, PauliOp { n, x: all, z: 0 }, PauliOp { n, x: 0, z: all })
        .expect("Steane code is valid")
}

/// Cumulative thresholds `[ε_x, ε_x+ε_y, ε_x+ε_y+ε_z]`.
fn cumulative(eps: &ErrorRates) -> [f64; 3] {
    let (x, y, z) = (eps.get(Channel::X), eps.get(Channel::Y), eps.get(Channel::Z));
    [x, x + y, x + y + z]
}

fn draw_single<R: Rng>(cum: &[f64; 3], rng: &mut R) -> Option<Channel> {
    let u: f64 = rng.random();
    Channel::ALL.into_iter().zip(cum).find(|(_, &c)| u < c).map(|(ch, _)| ch)
}

/// Independent per-qubit X/Y/Z errors with probabilities ε_x, ε_y, ε_z.
pub fn sample_error<R: Rng>(eps: &ErrorRates, n: usize, rng: &mut R) -> PauliOp {
    let cum = cumulative(eps);
    (0..n).fold(PauliOp::identity(n), |p, j| match draw_single(&cum, rng) {
        Some(ch) => p.mul(&PauliOp::single(n, j, ch)),
        None => p,
    })
}

/// Error of weight exactly `w`, drawn from the per-qubit model conditioned on
/// that weight: uniform support, each factor `α` with probability `ε_α / Σε`.
pub fn sample_error_of_weight<R: Rng>(eps: &ErrorRates, n: usize, w: usize, rng: &mut R) -> PauliOp {
    let total = eps.total();
    let cum = cumulative(eps).map(|c| c / total);
    let mut qubits: Vec<usize> = (0..n).collect();
    let mut p = PauliOp::identity(n);
    for i in 0..w {
        let j = rng.random_range(i..n);
        qubits.swap(i, j);
        let u: f64 = rng.random();
        let ch = Channel::ALL.into_iter().zip(&cum).find(|(_, &c)| u < c).map_or(Channel::Z, |(ch, _)| ch);
        p = p.mul(&PauliOp::single(n, qubits[i], ch));
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Plain failure fraction over independently sampled cycles.
    Direct,
    /// Exact weight distribution times Monte Carlo failure fraction within
    /// each weight class, equal samples per class.
    #[default]
    WeightStratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub failures: u64,
    pub estimator: Estimator,
    pub seed: u64,
}

fn check_rates(eps: &ErrorRates) -> Result<(), StabilizerError> {
    let t = eps.total();
    if !(t.is_finite() && (0.0..1.0).contains(&t)) {
        return Err(StabilizerError::Rates(format!("total rate {t} must lie in [0, 1)")));
    }
    Ok(())
}

/// Failures in `count` samples produced by `draw`, split into fixed chunks
/// each on its own stream `stream_base + chunk`. Returns per-chunk
/// `(samples, failures)`.
fn run_chunks<F>(code: &StabilizerCode, count: u64, seed: u64, stream_base: u64, draw: F) -> Vec<(u64, u64)>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> PauliOp + Sync,
{
    let n_chunks = count.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let size = CHUNK.min(count - c * CHUNK);
            let mut rng = stream_rng(seed, stream_base + c);
            let fails = (0..size).filter(|_| code.classify_residual(&draw(&mut rng)).is_failure()).count() as u64;
            (size, fails)
        })
        .collect()
}

/// Monte Carlo logical failure probability per cycle.
pub fn logical_error_rate(
    code: &StabilizerCode,
    eps: &ErrorRates,
    samples: u64,
    seed: u64,
    estimator: Estimator,
) -> Result<RateEstimate, StabilizerError> {
    if samples < MIN_SAMPLES {
        return Err(StabilizerError::TooFewSamples(samples));
    }
    check_rates(eps)?;
    let n = code.n;
    if eps.total() == 0.0 {
        return Ok(RateEstimate { rate: 0.0, stderr: 0.0, samples, failures: 0, estimator, seed });
    }
    match estimator {
        Estimator::Direct => {
            let chunks = run_chunks(code, samples, seed, 0, |rng| sample_error(eps, n, rng));
            let failures: u64 = chunks.iter().map(|c| c.1).sum();
            let rate = failures as f64 / samples as f64;
            // batch means over chunks, weighted by chunk size
            let var: f64 = chunks
                .iter()
                .map(|&(s, f)| (s as f64 / samples as f64).powi(2) * (f as f64 / s as f64 - rate).powi(2))
                .sum();
            let k = chunks.len() as f64;
            let stderr = if chunks.len() > 1 { (var * k / (k - 1.0)).sqrt() } else { 0.0 };
            Ok(RateEstimate { rate, stderr, samples, failures, estimator, seed })
        }
        Estimator::WeightStratified => {
            let q = eps.total();
            let (mut rate, mut var, mut failures) = (0.0, 0.0, 0u64);
            for w in 1..=n {
                let n_w = samples / n as u64 + u64::from((w as u64) <= samples % n as u64);
                let p_w = (ln_binomial(n as u64, w as u64) + w as f64 * q.ln() + (n - w) as f64 * (-q).ln_1p()).exp();
                let chunks = run_chunks(code, n_w, seed, (w as u64) << 32, |rng| sample_error_of_weight(eps, n, w, rng));
                let f: u64 = chunks.iter().map(|c| c.1).sum();
                failures += f;
                let frac = f as f64 / n_w as f64;
                rate += p_w * frac;
                var += p_w * p_w * frac * (1.0 - frac) / n_w as f64;
            }
            Ok(RateEstimate { rate, stderr: var.sqrt(), samples, failures, estimator, seed })
        }
    }
}

/// Probability of one specific error pattern under the per-qubit model.
fn pattern_probability(eps: &ErrorRates, p: &PauliOp) -> f64 {
    let idle = eps.no_error();
    (0..p.n).map(|j| p.qubit(j).map_or(idle, |ch| eps.get(ch))).product()
}

/// Exhaustive second-order prediction: every weight-2 pattern the decoder
/// fails on, weighted by its exact probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight2Oracle {
    pub patterns: usize,
    pub failing: Vec<(PauliOp, LogicalVerdict)>,
    pub rate: f64,
}

impl Weight2Oracle {
    /// Coefficient `c` in `rate ≈ c p²` for depolarizing noise,
    /// `N_fail / 9`.
    pub fn depolarizing_coefficient(&self) -> f64 {
        self.failing.len() as f64 / 9.0
    }
}

pub fn weight2_oracle(code: &StabilizerCode, eps: &ErrorRates) -> Weight2Oracle {
    let all = code.paulis_of_weight(2);
    let failing: Vec<(PauliOp, LogicalVerdict)> = all
        .iter()
        .map(|p| (*p, code.classify_residual(p)))
        .filter(|(_, v)| v.is_failure())
        .collect();
    let rate = failing.iter().map(|(p, _)| pattern_probability(eps, p)).sum();
    Weight2Oracle { patterns: all.len(), failing, rate }
}

/// Logical failure probability summed over all 4ⁿ error patterns.
pub fn exact_logical_error_rate(code: &StabilizerCode, eps: &ErrorRates) -> f64 {
    let mask = (1u64 << code.n) - 1;
    let mut total = 0.0;
    for x in 0..=mask {
        for z in 0..=mask {
            let p = PauliOp { n: code.n, x, z };
            if code.classify_residual(&p).is_failure() {
                total += pattern_probability(eps, &p);
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdVerdict {
    BelowThreshold,
    AtThreshold,
    AboveThreshold,
}

impl std::fmt::Display for ThresholdVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdVerdict::BelowThreshold => "below threshold",
            ThresholdVerdict::AtThreshold => "at threshold",
            ThresholdVerdict::AboveThreshold => "above threshold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concatenation {
    /// `p_0, p_1, …, p_levels`.
    pub rates: Vec<f64>,
    pub threshold: f64,
    pub verdict: ThresholdVerdict,
}

/// Iterates `p_{ℓ+1} = c p_ℓ²`. Verdict from the direction the sequence
/// moves; relative changes below 1e-12 count as the fixed point.
pub fn concatenation_map(p: f64, c: f64, levels: usize) -> Result<Concatenation, StabilizerError> {
    if !(c.is_finite() && c > 0.0) || !(p.is_finite() && p >= 0.0) {
        return Err(StabilizerError::Rates(format!("need c > 0 and p >= 0, got c = {c}, p = {p}")));
    }
    let mut rates = vec![p];
    for _ in 0..levels {
        let last = *rates.last().expect("non-empty");
        rates.push(c * last * last);
    }
    let next = c * p * p;
    let verdict = if p == 0.0 || next < p * (1.0 - 1e-12) {
        ThresholdVerdict::BelowThreshold
    } else if next > p * (1.0 + 1e-12) {
        ThresholdVerdict::AboveThreshold
    } else {
        ThresholdVerdict::AtThreshold
    };
    Ok(Concatenation { rates, threshold: 1.0 / c, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub logical_rate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// Log-log slope of logical vs physical rate.
    pub slope: f64,
    pub slope_stderr: f64,
    /// `c` in `rate = c p²`, geometric mean of `rate / p²`.
    pub coefficient: f64,
    pub pseudo_threshold: f64,
}

pub fn fit_quadratic(points: &[SweepPoint]) -> Result<QuadraticFit, StabilizerError> {
    let usable: Vec<&SweepPoint> = points.iter().filter(|s| s.p > 0.0 && s.logical_rate > 0.0).collect();
    if usable.len() < 2 {
        return Err(StabilizerError::Fit(usable.len()));
    }
    let xs: Vec<f64> = usable.iter().map(|s| s.p.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|s| s.logical_rate.ln()).collect();
    let (slope, slope_stderr, _) = linear_fit(&xs, &ys);
    let ln_c = xs.iter().zip(&ys).map(|(x, y)| y - 2.0 * x).sum::<f64>() / xs.len() as f64;
    let coefficient = ln_c.exp();
    Ok(QuadraticFit { slope, slope_stderr, coefficient, pseudo_threshold: 1.0 / coefficient })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub points: Vec<SweepPoint>,
    pub fit: QuadraticFit,
    /// Exhaustive weight-2 coefficient, see [`quadratic_coefficient`].
    pub oracle_coefficient: f64,
    pub oracle_pseudo_threshold: f64,
    pub seed: u64,
}

/// Coefficient `c` in `rate ≈ c p²` when the channels are mixed in the
/// proportions `mix` (summing to 1): `Σ_failing Π mix`.
pub fn quadratic_coefficient(code: &StabilizerCode, mix: [f64; 3]) -> f64 {
    code.paulis_of_weight(2)
        .iter()
        .filter(|p| code.classify_residual(p).is_failure())
        .map(|p| (0..p.n).filter_map(|j| p.qubit(j)).map(|ch| mix[ch.index()]).product::<f64>())
        .sum()
}

/// Channel proportions of depolarizing noise.
pub const DEPOLARIZING: [f64; 3] = [1.0 / 3.0; 3];

/// Normalized channel proportions `ε_α / Σε`.
pub fn channel_mix(eps: &ErrorRates) -> Result<[f64; 3], StabilizerError> {
    let t = eps.total();
    if !(t > 0.0) {
        return Err(StabilizerError::Rates("channel mix needs a positive total rate".into()));
    }
    Ok(Channel::ALL.map(|ch| eps.get(ch) / t))
}

/// Sweep over total physical rates `probabilities` with channels in the
/// proportions `mix`; point `i` uses [`crate::seed::derive`]`(seed, i)`.
pub fn threshold_sweep(
    code: &StabilizerCode,
    probabilities: &[f64],
    mix: [f64; 3],
    samples: u64,
    seed: u64,
    estimator: Estimator,
) -> Result<ThresholdSweep, StabilizerError> {
    let norm: f64 = mix.iter().sum();
    if !(mix.iter().all(|m| *m >= 0.0) && (norm - 1.0).abs() < 1e-9) {
        return Err(StabilizerError::Rates(format!("channel mix {mix:?} must be non-negative and sum to 1")));
    }
    let mut points = Vec::with_capacity(probabilities.len());
    for (i, &p) in probabilities.iter().enumerate() {
        let rates: Vec<(Channel, f64)> = Channel::ALL.into_iter().map(|ch| (ch, p * mix[ch.index()])).collect();
        let eps = ErrorRates::from_rates(&rates).map_err(|e| StabilizerError::Rates(e.to_string()))?;
        let est = logical_error_rate(code, &eps, samples, crate::seed::derive(seed, i as u64), estimator)?;
        points.push(SweepPoint { p, logical_rate: est.rate, stderr: est.stderr });
    }
    let fit = fit_quadratic(&points)?;
    let c = quadratic_coefficient(code, mix);
    Ok(ThresholdSweep { points, fit, oracle_coefficient: c, oracle_pseudo_threshold: 1.0 / c, seed })
}
