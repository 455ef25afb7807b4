//! Gaussian environment models.
//!
//! The bath is a non-interacting (Gaussian) field theory with wave velocity
//! `v`, short-time cutoff `Λ⁻¹` and dynamical exponent `z`. Each error channel
//! α couples to a bath operator f_α of scaling dimension δ_α through a
//! coupling λ_α. Two-point functions use the regularized family
//!
//! ```text
//! C(x, t) = (1 + |x|² + |t|^{2/z})^{-δ}
//! ```
//!
//! in cutoff units, which is exactly 1 at the origin and decays as `|x|^{-2δ}`
//! and `|t|^{-2δ/z}`. For `z = 0` (instantaneous interactions) correlators
//! carry no time dependence and only `t = 0` is accepted.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rg::{CubicTable, QuadraticTable};

/// Largest number of Wick pairs enumerated by [`wick_expand`]: (2·6 − 1)!! = 10395.
pub const MAX_WICK_PAIRS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("negative scaling dimension {0}")]
    NegativeDimension(f64),
    #[error("time separation {0} requested from an instantaneous (z = 0) correlator")]
    TimeInInstantaneousMode(f64),
    #[error("non-finite input to correlator")]
    NonFinite,
    #[error("invalid bath parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },
    #[error("Wick expansion needs an even number of points, got {0}")]
    OddPointCount(usize),
    #[error("Wick expansion of {pairs} pairs exceeds the enumeration limit of {max}")]
    TooManyPairs { pairs: usize, max: usize },
}

/// Pauli error channel σ_α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Z,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::X, Channel::Y, Channel::Z];

    pub fn index(self) -> usize {
        match self {
            Channel::X => 0,
            Channel::Y => 1,
            Channel::Z => 2,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Z => "z",
        };
        f.write_str(s)
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Channel::X),
            "y" | "Y" => Ok(Channel::Y),
            "z" | "Z" => Ok(Channel::Z),
            other => Err(format!("unknown channel `{other}` (expected x, y or z)")),
        }
    }
}

fn default_one() -> f64 {
    1.0
}

/// Environment description: dynamics (`z`, `v`, `cutoff`) and per-channel
/// scaling dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "BathSpecRepr", into = "BathSpecRepr")]
pub struct BathSpec {
    pub z: f64,
    pub v: f64,
    pub cutoff: f64,
    pub delta: BTreeMap<Channel, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BathSpecRepr {
    z: f64,
    #[serde(default = "default_one")]
    v: f64,
    #[serde(default = "default_one")]
    cutoff: f64,
    #[serde(default)]
    delta: BTreeMap<Channel, f64>,
}

impl TryFrom<BathSpecRepr> for BathSpec {
    type Error = BathError;

    fn try_from(r: BathSpecRepr) -> Result<Self, Self::Error> {
        BathSpec::new(r.z, r.v, r.cutoff, r.delta)
    }
}

impl From<BathSpec> for BathSpecRepr {
    fn from(b: BathSpec) -> Self {
        BathSpecRepr { z: b.z, v: b.v, cutoff: b.cutoff, delta: b.delta }
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> BathError {
    BathError::InvalidParameter { key: key.into(), reason: reason.into() }
}

impl BathSpec {
    pub fn new(z: f64, v: f64, cutoff: f64, delta: BTreeMap<Channel, f64>) -> Result<Self, BathError> {
        let spec = BathSpec { z, v, cutoff, delta };
        spec.validate()?;
        Ok(spec)
    }

    /// Bath with unit velocity and cutoff.
    pub fn with_dimensions(z: f64, delta: &[(Channel, f64)]) -> Result<Self, BathError> {
        Self::new(z, 1.0, 1.0, delta.iter().copied().collect())
    }

    pub fn validate(&self) -> Result<(), BathError> {
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(invalid("z", format!("must be finite and >= 0, got {}", self.z)));
        }
        if !(self.v.is_finite() && self.v > 0.0) {
            return Err(invalid("v", format!("must be finite and > 0, got {}", self.v)));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return Err(invalid("cutoff", format!("must be finite and > 0, got {}", self.cutoff)));
        }
        for (ch, d) in &self.delta {
            if !(d.is_finite() && *d >= 0.0) {
                return Err(invalid(format!("delta.{ch}"), format!("must be finite and >= 0, got {d}")));
            }
        }
        Ok(())
    }

    /// `z = 0`: instantaneous interactions, no memory between QEC cycles.
    pub fn is_instantaneous(&self) -> bool {
        self.z == 0.0
    }

    pub fn delta_of(&self, ch: Channel) -> Option<f64> {
        self.delta.get(&ch).copied()
    }

    /// Power-law correlator of the bath operator coupled to `ch`.
    pub fn correlator(&self, ch: Channel) -> Option<Correlator> {
        self.delta_of(ch).map(|d| Correlator::power_law(d, self.z))
    }

    /// Converts a physical displacement and time into cutoff units
    /// (`t → Λt`, `x → Λx/v`).
    pub fn to_cutoff_units(&self, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        let xs = x.iter().map(|xi| xi * self.cutoff / self.v).collect();
        (xs, t * self.cutoff)
    }
}

/// Full environment description: bath, bare couplings and the β-function
/// coefficient tables.
///
/// JSON layout is flat:
/// `{"z", "v", "cutoff", "delta": {x,y,z}, "lambda": {x,y,z}, "beta_g", "beta_h"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseModelRepr", into = "NoiseModelRepr")]
pub struct NoiseModel {
    pub bath: BathSpec,
    pub lambda: BTreeMap<Channel, f64>,
    pub beta_g: QuadraticTable,
    pub beta_h: CubicTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseModelRepr {
    z: f64,
    #[serde(default = "default_one")]
    v: f64,
    #[serde(default = "default_one")]
    cutoff: f64,
    #[serde(default)]
    delta: BTreeMap<Channel, f64>,
    #[serde(default)]
    lambda: BTreeMap<Channel, f64>,
    #[serde(default)]
    beta_g: QuadraticTable,
    #[serde(default)]
    beta_h: CubicTable,
}

impl TryFrom<NoiseModelRepr> for NoiseModel {
    type Error = BathError;

    fn try_from(r: NoiseModelRepr) -> Result<Self, Self::Error> {
        let bath = BathSpec::new(r.z, r.v, r.cutoff, r.delta)?;
        NoiseModel::new(bath, r.lambda, r.beta_g, r.beta_h)
    }
}

impl From<NoiseModel> for NoiseModelRepr {
    fn from(m: NoiseModel) -> Self {
        NoiseModelRepr {
            z: m.bath.z,
            v: m.bath.v,
            cutoff: m.bath.cutoff,
            delta: m.bath.delta,
            lambda: m.lambda,
            beta_g: m.beta_g,
            beta_h: m.beta_h,
        }
    }
}

impl NoiseModel {
    pub fn new(
        bath: BathSpec,
        lambda: BTreeMap<Channel, f64>,
        beta_g: QuadraticTable,
        beta_h: CubicTable,
    ) -> Result<Self, BathError> {
        let model = NoiseModel { bath, lambda, beta_g, beta_h };
        model.validate()?;
        Ok(model)
    }

    /// Model without β-function renormalization.
    pub fn unrenormalized(bath: BathSpec, lambda: &[(Channel, f64)]) -> Result<Self, BathError> {
        Self::new(bath, lambda.iter().copied().collect(), QuadraticTable::default(), CubicTable::default())
    }

    pub fn validate(&self) -> Result<(), BathError> {
        self.bath.validate()?;
        for (ch, l) in &self.lambda {
            if !(l.is_finite() && *l >= 0.0) {
                return Err(invalid(format!("lambda.{ch}"), format!("must be finite and >= 0, got {l}")));
            }
            if !self.bath.delta.contains_key(ch) {
                return Err(invalid(format!("lambda.{ch}"), "channel has a coupling but no `delta` entry"));
            }
        }
        self.beta_g.validate(Channel::ALL.len()).map_err(|e| invalid("beta_g", e))?;
        self.beta_h.validate(Channel::ALL.len()).map_err(|e| invalid("beta_h", e))?;
        Ok(())
    }

    /// Bare couplings ordered x, y, z; missing channels are zero.
    pub fn coupling_vector(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (ch, l) in &self.lambda {
            out[ch.index()] = *l;
        }
        out
    }

    /// Channels with a declared scaling dimension.
    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.bath.delta.keys().copied()
    }
}

/// Shape of a two-point function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelatorKind {
    /// `(1 + |x|² + |t|^{2/z})^{-δ}`.
    PowerLaw,
    /// Static, fully correlated noise.
    Constant { value: f64 },
    /// Piecewise-linear table `(ρ, C)` in the effective distance
    /// `ρ = sqrt(|x|² + |t|^{2/z})`, zero beyond the last node. The first node
    /// must sit at ρ = 0.
    UserTable { nodes: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub delta: f64,
    pub z: f64,
    pub kind: CorrelatorKind,
}

impl Correlator {
    pub fn power_law(delta: f64, z: f64) -> Self {
        Correlator { delta, z, kind: CorrelatorKind::PowerLaw }
    }

    pub fn constant(value: f64) -> Self {
        Correlator { delta: 0.0, z: 1.0, kind: CorrelatorKind::Constant { value } }
    }

    pub fn table(z: f64, nodes: Vec<(f64, f64)>) -> Self {
        Correlator { delta: 0.0, z, kind: CorrelatorKind::UserTable { nodes } }
    }

    /// Correlator of the bath operator at the origin only: 1 at zero
    /// separation, 0 at any lattice separation ≥ 1/2.
    pub fn local(z: f64) -> Self {
        Self::table(z, vec![(0.0, 1.0), (0.5, 0.0)])
    }

    /// Same correlator with its scaling dimension replaced; used for the
    /// pulse-shifted dimension δ + n·z.
    pub fn with_delta(&self, delta: f64) -> Self {
        Correlator { delta, ..self.clone() }
    }

    pub fn is_instantaneous(&self) -> bool {
        self.z == 0.0
    }

    /// `|x|² + |t|^{2/z}`.
    fn rho_squared(&self, x: &[f64], t: f64) -> f64 {
        let xs: f64 = x.iter().map(|xi| xi * xi).sum();
        if t == 0.0 {
            xs
        } else {
            xs + t.abs().powf(2.0 / self.z)
        }
    }
}

/// Two-point function `C(x, t)` in cutoff units.
pub fn two_point(c: &Correlator, x: &[f64], t: f64) -> Result<f64, BathError> {
    if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(BathError::NonFinite);
    }
    if c.delta < 0.0 {
        return Err(BathError::NegativeDimension(c.delta));
    }
    if c.is_instantaneous() && t != 0.0 {
        return Err(BathError::TimeInInstantaneousMode(t));
    }
    Ok(match &c.kind {
        CorrelatorKind::PowerLaw => {
            if c.delta == 0.0 {
                1.0
            } else {
                (1.0 + c.rho_squared(x, t)).powf(-c.delta)
            }
        }
        CorrelatorKind::Constant { value } => *value,
        CorrelatorKind::UserTable { nodes } => interpolate_table(nodes, c.rho_squared(x, t).sqrt()),
    })
}

fn interpolate_table(nodes: &[(f64, f64)], rho: f64) -> f64 {
    match nodes {
        [] => 0.0,
        [(_, c0)] => {
            if rho == 0.0 {
                *c0
            } else {
                0.0
            }
        }
        _ => {
            for w in nodes.windows(2) {
                let (r0, c0) = w[0];
                let (r1, c1) = w[1];
                if rho >= r0 && rho <= r1 {
                    if r1 == r0 {
                        return c1;
                    }
                    return c0 + (c1 - c0) * (rho - r0) / (r1 - r0);
                }
            }
            0.0
        }
    }
}

/// A space-time point in cutoff units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpacetimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        SpacetimePoint { x, t }
    }
}

/// `C(a − b)` for two space-time points.
pub fn two_point_between(c: &Correlator, a: &SpacetimePoint, b: &SpacetimePoint) -> Result<f64, BathError> {
    let dx: Vec<f64> = a.x.iter().zip(&b.x).map(|(u, v)| u - v).collect();
    two_point(c, &dx, a.t - b.t)
}

/// Number of perfect matchings of `2n` points, `(2n − 1)!!`.
pub fn pairing_count(n_pairs: usize) -> u64 {
    (1..=n_pairs as u64).map(|k| 2 * k - 1).product()
}

/// All perfect matchings of `0..2n` as lists of index pairs.
pub fn pairings(n_points: usize) -> Result<Vec<Vec<(usize, usize)>>, BathError> {
    check_wick_size(n_points)?;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n_points / 2);
    let remaining: Vec<usize> = (0..n_points).collect();
    collect_pairings(&remaining, &mut current, &mut out);
    Ok(out)
}

fn collect_pairings(remaining: &[usize], current: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
    let Some((&first, rest)) = remaining.split_first() else {
        out.push(current.clone());
        return;
    };
    for k in 0..rest.len() {
        current.push((first, rest[k]));
        let next: Vec<usize> = rest.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v).collect();
        collect_pairings(&next, current, out);
        current.pop();
    }
}

fn check_wick_size(n_points: usize) -> Result<(), BathError> {
    if n_points % 2 != 0 {
        return Err(BathError::OddPointCount(n_points));
    }
    if n_points / 2 > MAX_WICK_PAIRS {
        return Err(BathError::TooManyPairs { pairs: n_points / 2, max: MAX_WICK_PAIRS });
    }
    Ok(())
}

/// Gaussian 2n-point function: the sum over all perfect matchings of the
/// product of pair values.
pub fn wick_expand<P, F>(points: &[P], pair_fn: F) -> Result<f64, BathError>
where
    F: Fn(&P, &P) -> f64,
{
    check_wick_size(points.len())?;
    let idx: Vec<usize> = (0..points.len()).collect();
    Ok(wick_recurse(points, &pair_fn, &idx))
}

fn wick_recurse<P, F>(points: &[P], pair_fn: &F, remaining: &[usize]) -> f64
where
    F: Fn(&P, &P) -> f64,
{
    let Some((&first, rest)) = remaining.split_first() else {
        return 1.0;
    };
    let mut total = 0.0;
    let mut next = Vec::with_capacity(rest.len().saturating_sub(1));
    for k in 0..rest.len() {
        next.clear();
        next.extend(rest.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &v)| v));
        let w = pair_fn(&points[first], &points[rest[k]]);
        if w != 0.0 {
            total += w * wick_recurse(points, pair_fn, &next);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_unity() {
        for d in [0.0, 0.3, 1.0, 2.7] {
            let c = Correlator::power_law(d, 1.0);
            assert_eq!(two_point(&c, &[0.0, 0.0], 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn zero_dimension_is_constant() {
        let c = Correlator::power_law(0.0, 1.5);
        assert_eq!(two_point(&c, &[3.0, -7.0], 11.0).unwrap(), 1.0);
    }

    #[test]
    fn spatial_ratio_approaches_quarter() {
        // frozen from (1+1e4)/(1+4e4): closed form at |x| = 100 and 200
        let c = Correlator::power_law(1.0, 1.0);
        let r = two_point(&c, &[200.0], 0.0).unwrap() / two_point(&c, &[100.0], 0.0).unwrap();
        assert!((r - 10001.0 / 40001.0).abs() < 1e-15);
        assert!((r - 0.25).abs() < 1e-3);
    }

    #[test]
    fn rejects_time_in_instantaneous_mode() {
        let c = Correlator::power_law(1.0, 0.0);
        assert!(two_point(&c, &[1.0], 0.0).is_ok());
        assert_eq!(two_point(&c, &[1.0], 0.5), Err(BathError::TimeInInstantaneousMode(0.5)));
    }

    #[test]
    fn rejects_negative_dimension() {
        let c = Correlator::power_law(-0.1, 1.0);
        assert!(matches!(two_point(&c, &[1.0], 0.0), Err(BathError::NegativeDimension(_))));
    }

    #[test]
    fn local_table_vanishes_off_origin() {
        let c = Correlator::local(1.0);
        assert_eq!(two_point(&c, &[0.0], 0.0).unwrap(), 1.0);
        assert_eq!(two_point(&c, &[1.0], 0.0).unwrap(), 0.0);
        assert_eq!(two_point(&c, &[0.0], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn wick_small_cases() {
        let c = 0.7;
        assert_eq!(wick_expand(&[(); 2], |_, _| c).unwrap(), c);
        assert!((wick_expand(&[(); 4], |_, _| c).unwrap() - 3.0 * c * c).abs() < 1e-15);
        assert_eq!(pairings(6).unwrap().len(), 15);
        assert_eq!(pairing_count(3), 15);
    }

    #[test]
    fn wick_rejects_bad_sizes() {
        assert_eq!(wick_expand(&[(); 3], |_, _| 1.0), Err(BathError::OddPointCount(3)));
        assert!(matches!(wick_expand(&[(); 14], |_, _| 1.0), Err(BathError::TooManyPairs { .. })));
    }

    #[test]
    fn pairings_are_perfect_matchings() {
        for m in pairings(8).unwrap() {
            let mut seen: Vec<usize> = m.iter().flat_map(|&(a, b)| [a, b]).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn noise_model_json_layout() {
        let json = r#"{"z": 1.0, "delta": {"x": 0.4, "z": 1.0}, "lambda": {"z": 0.1}}"#;
        let m: NoiseModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.bath.v, 1.0);
        assert_eq!(m.coupling_vector(), [0.0, 0.0, 0.1]);
        let back: NoiseModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn noise_model_rejects_typos_and_bad_values() {
        let typo = r#"{"z": 1.0, "delat": {"x": 0.4}}"#;
        assert!(serde_json::from_str::<NoiseModel>(typo).is_err());
        let neg = r#"{"z": 1.0, "delta": {"x": -0.4}}"#;
        let err = serde_json::from_str::<NoiseModel>(neg).unwrap_err().to_string();
        assert!(err.contains("delta.x"), "{err}");
        let orphan = r#"{"z": 1.0, "delta": {"x": 0.4}, "lambda": {"y": 0.1}}"#;
        assert!(serde_json::from_str::<NoiseModel>(orphan).is_err());
    }
}
