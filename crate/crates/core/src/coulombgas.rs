//! Two-dimensional Coulomb gas on a periodic square lattice.
//!
//! For a D = 1 computer with noise `λ Σ_j cos[δ·φ(j)] σ^z_j`, the m-error
//! probability is the partition function of a neutral gas of ±1 charges in
//! the (x, t) plane: each error insertion creates a charge with fugacity y,
//! and charges interact logarithmically,
//!
//! ```text
//! E = −K Σ_{i<j} q_i q_j ln r_ij,   w(config) = y^{#charges} e^{−E}.
//! ```
//!
//! An isolated ± pair at distance r carries weight `y² r^{−K}`, so `K` is
//! twice the scaling dimension of the charge-creating operator; [`LatticeSpec::from_dimension`]
//! uses `K = 4δ` for an operator of dimension `2δ`. Large `K` binds charges
//! into tight dipoles (irrelevant fugacity), small `K` and large `y` screen
//! and unbind them.
//!
//! The lattice gas is only dilute for small `y`. Neighbouring opposite
//! charges cost no energy (ln 1 = 0) and a checkerboard gains Madelung
//! attraction, so above roughly `y ≈ 0.1` (L = 8) the sampler condenses into
//! a near-full charge crystal and `mean_r2` merely approaches the box average
//! `≈ L²/6`. Binding and screening are read off in the dilute window.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rg::{kt_coordinates, KtPhase};
use crate::seed::stream_rng;

/// Largest side accepted by [`exact_partition`].
pub const MAX_EXACT_SIDE: usize = 6;
pub const MAX_EXACT_PAIRS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoulombError {
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),
    #[error("site {0} is occupied twice")]
    Overlap(usize),
    #[error("site {site} outside a lattice of {sites} sites")]
    OutOfRange { site: usize, sites: usize },
    #[error("configuration has net charge {0}")]
    NotNeutral(i64),
    #[error("exact enumeration limited to side <= {MAX_EXACT_SIDE} and <= {MAX_EXACT_PAIRS} pairs")]
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub side: usize,
    pub coupling: f64,
    pub fugacity: f64,
}

impl LatticeSpec {
    pub fn new(side: usize, coupling: f64, fugacity: f64) -> Result<Self, CoulombError> {
        let s = LatticeSpec { side, coupling, fugacity };
        s.validate()?;
        Ok(s)
    }

    /// Gas for a charge-creating operator of dimension `2δ`: `K = 4δ`.
    pub fn from_dimension(side: usize, delta: f64, fugacity: f64) -> Result<Self, CoulombError> {
        Self::new(side, 4.0 * delta, fugacity)
    }

    pub fn validate(&self) -> Result<(), CoulombError> {
        if !(2..=64).contains(&self.side) {
            return Err(CoulombError::InvalidSpec(format!("side must be in 2..=64, got {}", self.side)));
        }
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(CoulombError::InvalidSpec(format!("coupling must be > 0, got {}", self.coupling)));
        }
        if !(self.fugacity.is_finite() && self.fugacity >= 0.0) {
            return Err(CoulombError::InvalidSpec(format!("fugacity must be >= 0, got {}", self.fugacity)));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.side * self.side
    }

    /// Squared minimum-image distance between two sites.
    pub fn distance_sq(&self, a: usize, b: usize) -> f64 {
        let l = self.side as i64;
        let img = |d: i64| {
            let r = d.rem_euclid(l);
            r.min(l - r)
        };
        let dx = img((a % self.side) as i64 - (b % self.side) as i64);
        let dy = img((a / self.side) as i64 - (b / self.side) as i64);
        (dx * dx + dy * dy) as f64
    }

    /// Reduced KT coordinates `(x, y) = (2 − K/2, y)` of this gas; `K > 4`
    /// binds dilute pairs.
    pub fn kt_coordinates(&self) -> (f64, f64) {
        kt_coordinates(self.coupling / 4.0, self.fugacity)
    }

    /// Phase predicted by the reduced KT flow from this gas's coordinates.
    pub fn kt_phase(&self, ell_max: f64) -> KtPhase {
        let (x, y) = self.kt_coordinates();
        crate::rg::kt_flow(x, y, ell_max, 1e-2).map(|f| f.phase).unwrap_or(KtPhase::Undetermined)
    }

    fn neighbors(&self, site: usize) -> [usize; 4] {
        let (x, y) = (site % self.side, site / self.side);
        let l = self.side;
        [
            y * l + (x + 1) % l,
            y * l + (x + l - 1) % l,
            ((y + 1) % l) * l + x,
            ((y + l - 1) % l) * l + x,
        ]
    }
}

/// Signed unit charges on lattice sites.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChargeConfig {
    pub charges: BTreeMap<usize, i8>,
}

impl ChargeConfig {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Configuration with `+1` on `plus` and `−1` on `minus`.
    pub fn from_sites(plus: &[usize], minus: &[usize]) -> Result<Self, CoulombError> {
        let mut charges = BTreeMap::new();
        for (&s, q) in plus.iter().map(|s| (s, 1)).chain(minus.iter().map(|s| (s, -1))) {
            if charges.insert(s, q).is_some() {
                return Err(CoulombError::Overlap(s));
            }
        }
        Ok(ChargeConfig { charges })
    }

    pub fn net(&self) -> i64 {
        self.charges.values().map(|&q| q as i64).sum()
    }

    /// Number of ± pairs in a neutral configuration.
    pub fn pairs(&self) -> usize {
        self.charges.len() / 2
    }

    pub fn plus_sites(&self) -> Vec<usize> {
        self.charges.iter().filter(|(_, &q)| q > 0).map(|(&s, _)| s).collect()
    }

    pub fn minus_sites(&self) -> Vec<usize> {
        self.charges.iter().filter(|(_, &q)| q < 0).map(|(&s, _)| s).collect()
    }

    /// Global charge conjugation.
    pub fn conjugate(&self) -> Self {
        ChargeConfig { charges: self.charges.iter().map(|(&s, &q)| (s, -q)).collect() }
    }

    fn check(&self, spec: &LatticeSpec) -> Result<(), CoulombError> {
        if let Some(&s) = self.charges.keys().find(|&&s| s >= spec.sites()) {
            return Err(CoulombError::OutOfRange { site: s, sites: spec.sites() });
        }
        match self.net() {
            0 => Ok(()),
            n => Err(CoulombError::NotNeutral(n)),
        }
    }
}

/// `E = −K Σ_{i<j} q_i q_j ln r_ij`.
pub fn energy(spec: &LatticeSpec, config: &ChargeConfig) -> Result<f64, CoulombError> {
    config.check(spec)?;
    let items: Vec<(usize, i8)> = config.charges.iter().map(|(&s, &q)| (s, q)).collect();
    let mut e = 0.0;
    for (i, &(si, qi)) in items.iter().enumerate() {
        for &(sj, qj) in &items[i + 1..] {
            e += (qi * qj) as f64 * 0.5 * spec.distance_sq(si, sj).ln();
        }
    }
    Ok(-spec.coupling * e)
}

/// Boltzmann weight `y^{#charges} e^{−E}`.
pub fn weight(spec: &LatticeSpec, config: &ChargeConfig) -> Result<f64, CoulombError> {
    let e = energy(spec, config)?;
    Ok(spec.fugacity.powi(config.charges.len() as i32) * (-e).exp())
}

/// Mean squared separation over every (+, −) pair; `None` for the vacuum.
pub fn pair_r2(spec: &LatticeSpec, config: &ChargeConfig) -> Option<f64> {
    let (plus, minus) = (config.plus_sites(), config.minus_sites());
    if plus.is_empty() {
        return None;
    }
    let s: f64 = plus.iter().flat_map(|&a| minus.iter().map(move |&b| spec.distance_sq(a, b))).sum();
    Some(s / (plus.len() * minus.len()) as f64)
}

/// Exact partition function of the sector with at most `max_pairs` dipoles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactGas {
    pub partition: f64,
    pub mean_pairs: f64,
    /// `⟨r²⟩` conditional on at least one pair; 0 if no pair has weight.
    pub mean_r2: f64,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn exact_partition(spec: &LatticeSpec, max_pairs: usize) -> Result<ExactGas, CoulombError> {
    spec.validate()?;
    if spec.side > MAX_EXACT_SIDE || max_pairs > MAX_EXACT_PAIRS {
        return Err(CoulombError::Budget);
    }
    let n = spec.sites();
    let (mut z, mut zk, mut zr2, mut zpaired) = (1.0, 0.0, 0.0, 0.0);
    for k in 1..=max_pairs {
        let subsets = combinations(n, k);
        for plus in &subsets {
            for minus in &subsets {
                if minus.iter().any(|m| plus.contains(m)) {
                    continue;
                }
                let cfg = ChargeConfig::from_sites(plus, minus)?;
                let w = weight(spec, &cfg)?;
                z += w;
                zk += w * k as f64;
                zpaired += w;
                zr2 += w * pair_r2(spec, &cfg).unwrap_or(0.0);
            }
        }
    }
    let mean_r2 = if zpaired > 0.0 { zr2 / zpaired } else { 0.0 };
    Ok(ExactGas { partition: z, mean_pairs: zk / z, mean_r2 })
}

/// A neutrality-preserving Metropolis move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Insert { plus: usize, minus: usize },
    Delete { plus: usize, minus: usize },
    Displace { from: usize, to: usize },
}

impl Move {
    /// The move that undoes `self`.
    pub fn reverse(&self) -> Move {
        match *self {
            Move::Insert { plus, minus } => Move::Delete { plus, minus },
            Move::Delete { plus, minus } => Move::Insert { plus, minus },
            Move::Displace { from, to } => Move::Displace { from: to, to: from },
        }
    }
}

/// Each move type is chosen with this probability.
const MOVE_TYPE_PROB: f64 = 1.0 / 3.0;

/// Probability that the sampler proposes `mv` from `config`.
///
/// Insertions pick the + and − sites uniformly among all sites, deletions pick
/// one existing + and one existing − uniformly, displacements pick a charge
/// uniformly and one of its four neighbors.
pub fn proposal_probability(spec: &LatticeSpec, config: &ChargeConfig, mv: &Move) -> f64 {
    let n = spec.sites() as f64;
    let k = config.pairs() as f64;
    match *mv {
        Move::Insert { .. } => MOVE_TYPE_PROB / (n * n),
        Move::Delete { .. } => {
            if k == 0.0 {
                0.0
            } else {
                MOVE_TYPE_PROB / (k * k)
            }
        }
        Move::Displace { from, to } => {
            if config.charges.is_empty() {
                return 0.0;
            }
            let mult = spec.neighbors(from).iter().filter(|&&s| s == to).count() as f64;
            MOVE_TYPE_PROB / (2.0 * k) * mult / 4.0
        }
    }
}

/// Result of applying a move, or `None` if `mv` is not legal from `config`.
pub fn apply(config: &ChargeConfig, mv: &Move) -> Option<ChargeConfig> {
    let mut next = config.clone();
    match *mv {
        Move::Insert { plus, minus } => {
            if plus == minus || config.charges.contains_key(&plus) || config.charges.contains_key(&minus) {
                return None;
            }
            next.charges.insert(plus, 1);
            next.charges.insert(minus, -1);
        }
        Move::Delete { plus, minus } => {
            if config.charges.get(&plus) != Some(&1) || config.charges.get(&minus) != Some(&-1) {
                return None;
            }
            next.charges.remove(&plus);
            next.charges.remove(&minus);
        }
        Move::Displace { from, to } => {
            if config.charges.contains_key(&to) {
                return None;
            }
            let q = next.charges.remove(&from)?;
            next.charges.insert(to, q);
        }
    }
    Some(next)
}

/// Energy of `site` carrying charge `q` against every charge of `config`
/// except those on `skip`.
fn site_energy(spec: &LatticeSpec, config: &ChargeConfig, site: usize, q: i8, skip: &[usize]) -> f64 {
    let mut e = 0.0;
    for (&s, &qs) in &config.charges {
        if s == site || skip.contains(&s) {
            continue;
        }
        e += (q * qs) as f64 * 0.5 * spec.distance_sq(site, s).ln();
    }
    -spec.coupling * e
}

/// `E(after) − E(before)` for a legal move.
fn delta_energy(spec: &LatticeSpec, config: &ChargeConfig, mv: &Move) -> f64 {
    match *mv {
        Move::Insert { plus, minus } => {
            site_energy(spec, config, plus, 1, &[])
                + site_energy(spec, config, minus, -1, &[])
                + spec.coupling * 0.5 * spec.distance_sq(plus, minus).ln()
        }
        Move::Delete { plus, minus } => {
            -(site_energy(spec, config, plus, 1, &[minus])
                + site_energy(spec, config, minus, -1, &[plus])
                + spec.coupling * 0.5 * spec.distance_sq(plus, minus).ln())
        }
        Move::Displace { from, to } => {
            let q = config.charges[&from];
            site_energy(spec, config, to, q, &[from]) - site_energy(spec, config, from, q, &[])
        }
    }
}

/// Metropolis acceptance probability of `mv` from `config`, honoring an
/// optional cap on the number of pairs.
pub fn acceptance(spec: &LatticeSpec, max_pairs: Option<usize>, config: &ChargeConfig, mv: &Move) -> f64 {
    let Some(next) = apply(config, mv) else {
        return 0.0;
    };
    if max_pairs.is_some_and(|m| next.pairs() > m) {
        return 0.0;
    }
    let de = delta_energy(spec, config, mv);
    let ratio = match mv {
        Move::Insert { .. } | Move::Delete { .. } => {
            let fwd = proposal_probability(spec, config, mv);
            let back = proposal_probability(spec, &next, &mv.reverse());
            let y2 = spec.fugacity * spec.fugacity;
            let fug = if matches!(mv, Move::Insert { .. }) { y2 } else { 1.0 / y2 };
            fug * (-de).exp() * back / fwd
        }
        Move::Displace { .. } => (-de).exp(),
    };
    if ratio.is_nan() {
        0.0
    } else {
        ratio.min(1.0)
    }
}

/// Draws one move proposal.
pub fn propose<R: Rng>(spec: &LatticeSpec, config: &ChargeConfig, rng: &mut R) -> Option<Move> {
    let n = spec.sites();
    match rng.random_range(0..3u8) {
        0 => Some(Move::Insert { plus: rng.random_range(0..n), minus: rng.random_range(0..n) }),
        1 => {
            let (plus, minus) = (config.plus_sites(), config.minus_sites());
            if plus.is_empty() {
                return None;
            }
            Some(Move::Delete { plus: plus[rng.random_range(0..plus.len())], minus: minus[rng.random_range(0..minus.len())] })
        }
        _ => {
            if config.charges.is_empty() {
                return None;
            }
            let idx = rng.random_range(0..config.charges.len());
            let from = *config.charges.keys().nth(idx).expect("index in range");
            let to = spec.neighbors(from)[rng.random_range(0..4)];
            Some(Move::Displace { from, to })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Restricted sector: reject insertions beyond this many pairs.
    pub max_pairs: Option<usize>,
    /// Fraction of sweeps discarded before measuring.
    pub burn_in: f64,
    pub n_batches: usize,
    pub initial: ChargeConfig,
    pub keep_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_pairs: None, burn_in: 0.1, n_batches: 20, initial: ChargeConfig::empty(), keep_trace: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: u64,
    pub pairs: usize,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasEstimate {
    pub mean_pairs: f64,
    /// `⟨r²⟩` over sweeps with at least one pair; 0 if none had any.
    pub mean_r2: f64,
    pub stderr_pairs: f64,
    pub stderr_r2: f64,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub sweeps: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<SweepRecord>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Metropolis chain of `sweeps` sweeps (one sweep = one attempted move per
/// site). Deterministic for a fixed seed.
pub fn metropolis_run(spec: &LatticeSpec, sweeps: u64, seed: u64, opts: &RunOptions) -> Result<GasEstimate, CoulombError> {
    spec.validate()?;
    opts.initial.check(spec)?;
    if sweeps == 0 {
        return Err(CoulombError::InvalidSpec("sweeps must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut config = opts.initial.clone();
    let burn = ((sweeps as f64) * opts.burn_in).floor() as u64;
    let mut records = Vec::with_capacity((sweeps - burn) as usize);
    let (mut attempted, mut accepted) = (0u64, 0u64);
    for sweep in 0..sweeps {
        for _ in 0..spec.sites() {
            attempted += 1;
            let Some(mv) = propose(spec, &config, &mut rng) else { continue };
            let a = acceptance(spec, opts.max_pairs, &config, &mv);
            if a > 0.0 && (a >= 1.0 || rng.random::<f64>() < a) {
                config = apply(&config, &mv).expect("accepted moves are legal");
                accepted += 1;
            }
        }
        if sweep >= burn {
            records.push(SweepRecord { sweep, pairs: config.pairs(), r2: pair_r2(spec, &config) });
        }
    }
    let n_batches = opts.n_batches.clamp(1, records.len());
    let per = records.len() / n_batches;
    let mut batch_pairs = Vec::with_capacity(n_batches);
    let mut batch_r2 = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let chunk = &records[b * per..if b + 1 == n_batches { records.len() } else { (b + 1) * per }];
        batch_pairs.push(chunk.iter().map(|r| r.pairs as f64).sum::<f64>() / chunk.len() as f64);
        let with: Vec<f64> = chunk.iter().filter_map(|r| r.r2).collect();
        if !with.is_empty() {
            batch_r2.push(with.iter().sum::<f64>() / with.len() as f64);
        }
    }
    let (mean_pairs, stderr_pairs) = mean_and_stderr(&batch_pairs);
    let all_r2: Vec<f64> = records.iter().filter_map(|r| r.r2).collect();
    let mean_r2 = if all_r2.is_empty() { 0.0 } else { all_r2.iter().sum::<f64>() / all_r2.len() as f64 };
    let (_, stderr_r2) = mean_and_stderr(&batch_r2);
    Ok(GasEstimate {
        mean_pairs,
        mean_r2,
        stderr_pairs,
        stderr_r2,
        acceptance_rate: accepted as f64 / attempted as f64,
        seed,
        sweeps,
        trace: if opts.keep_trace { records } else { Vec::new() },
    })
}

/// Pools independent chains by mean/variance weighting on their sweep
/// counts; order-independent.
pub fn pool(estimates: &[GasEstimate]) -> Option<GasEstimate> {
    let first = estimates.first()?;
    let total: f64 = estimates.iter().map(|e| e.sweeps as f64).sum();
    let wmean = |f: fn(&GasEstimate) -> f64| estimates.iter().map(|e| f(e) * e.sweeps as f64).sum::<f64>() / total;
    let wse = |f: fn(&GasEstimate) -> f64| {
        estimates.iter().map(|e| (f(e) * e.sweeps as f64 / total).powi(2)).sum::<f64>().sqrt()
    };
    Some(GasEstimate {
        mean_pairs: wmean(|e| e.mean_pairs),
        mean_r2: wmean(|e| e.mean_r2),
        stderr_pairs: wse(|e| e.stderr_pairs),
        stderr_r2: wse(|e| e.stderr_r2),
        acceptance_rate: wmean(|e| e.acceptance_rate),
        seed: first.seed,
        sweeps: total as u64,
        trace: Vec::new(),
    })
}
