//! The coarse-grained space-time grid and single-hypercube error rates.
//!
//! One QEC cycle of duration Δ and one spatial cell of linear size
//! `(vΔ)^{1/z}` form a hypercube holding exactly one qubit. Within it the bath
//! produces an error of type α with probability
//!
//! ```text
//! ε_α = (λ*_α)² ∫₀^Δ ∫₀^Δ s(t₁) s(t₂) C(0, t₁ − t₂) dt₁ dt₂
//! ```
//!
//! where `s(t) = ±1` flips at each logical NOT / phase-NOT inserted in the
//! cycle (`s ≡ 1` without pulses). Correlations between different hypercubes
//! are carried by the normal-ordered operator
//! `F_α = (λ*Δ)²/ε_α · :|f_α|²:`, whose pair function is
//! `⟨F F⟩ = [(λ*Δ)²/ε_α]² · 2 C²` for a real Gaussian field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{two_point, BathError, BathSpec, Channel, Correlator};
use crate::quadrature::{integrate_2d, QuadratureError, Settings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypercubeError {
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("error probability {total} >= 1 leaves the perturbative regime")]
    NotPerturbative { total: f64 },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> HypercubeError {
    HypercubeError::Invalid { key: key.into(), reason: reason.into() }
}

/// Raw grid parameters as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub delta_t: f64,
    pub n_cycles: u64,
    pub n_qubits: u64,
    pub comp_dim: u32,
}

/// Coarse-grained grid of `n_cycles × n_qubits` hypercubes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub delta_t: f64,
    pub n_cycles: u64,
    pub n_qubits: u64,
    pub comp_dim: u32,
    /// Cell size `(vΔ)^{1/z}` in cutoff-length units; `None` for `z = 0`,
    /// where every qubit shares one correlation volume.
    pub spacing: Option<f64>,
}

impl GridSpec {
    pub fn new(delta_t: f64, n_cycles: u64, n_qubits: u64, comp_dim: u32, bath: &BathSpec) -> Result<Self, HypercubeError> {
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(invalid("grid.delta_t", format!("must be > 0, got {delta_t}")));
        }
        if n_cycles == 0 {
            return Err(invalid("grid.n_cycles", "must be positive"));
        }
        if n_qubits == 0 {
            return Err(invalid("grid.n_qubits", "must be positive"));
        }
        if comp_dim == 0 {
            return Err(invalid("grid.comp_dim", "must be positive"));
        }
        let spacing = if bath.is_instantaneous() { None } else { Some((bath.v * delta_t).powf(1.0 / bath.z)) };
        let grid = GridSpec { delta_t, n_cycles, n_qubits, comp_dim, spacing };
        grid.spatial_side()?;
        Ok(grid)
    }

    pub fn from_params(p: &GridParams, bath: &BathSpec) -> Result<Self, HypercubeError> {
        Self::new(p.delta_t, p.n_cycles, p.n_qubits, p.comp_dim, bath)
    }

    /// Grid in lattice units (unit spacing, unit cycle) for pure scaling
    /// studies.
    pub fn lattice(n_cycles: u64, n_qubits: u64, comp_dim: u32) -> Result<Self, HypercubeError> {
        let bath = BathSpec::with_dimensions(1.0, &[])?;
        Self::new(1.0, n_cycles, n_qubits, comp_dim, &bath)
    }

    /// Total hypercube count N·R.
    pub fn cells(&self) -> u64 {
        self.n_cycles * self.n_qubits
    }

    /// Linear size of the spatial lattice: the qubits fill a periodic
    /// `side^D` hypercubic lattice.
    pub fn spatial_side(&self) -> Result<u64, HypercubeError> {
        let side = (self.n_qubits as f64).powf(1.0 / self.comp_dim as f64).round() as u64;
        for s in side.saturating_sub(1)..=side + 1 {
            if s > 0 && s.checked_pow(self.comp_dim) == Some(self.n_qubits) {
                return Ok(s);
            }
        }
        Err(invalid(
            "grid.n_qubits",
            format!("{} qubits do not fill a {}-dimensional square lattice", self.n_qubits, self.comp_dim),
        ))
    }
}

/// Logical NOT / phase-NOT insertions within one cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    /// Flip times in `(0, Δ)`, strictly increasing.
    pub schedule: Vec<f64>,
}

impl PulseSequence {
    pub fn none() -> Self {
        PulseSequence::default()
    }

    /// `n` flips at `kΔ/(n+1)`; for `n = 1` this is the mid-cycle echo.
    pub fn equally_spaced(n: u32, delta_t: f64) -> Self {
        let schedule = (1..=n).map(|k| k as f64 * delta_t / (n as f64 + 1.0)).collect();
        PulseSequence { schedule }
    }

    pub fn new(schedule: Vec<f64>, delta_t: f64) -> Result<Self, HypercubeError> {
        let seq = PulseSequence { schedule };
        seq.validate(delta_t)?;
        Ok(seq)
    }

    pub fn n_pulses(&self) -> u32 {
        self.schedule.len() as u32
    }

    pub fn validate(&self, delta_t: f64) -> Result<(), HypercubeError> {
        let mut prev = 0.0;
        for &t in &self.schedule {
            if !(t > prev && t < delta_t) {
                return Err(invalid(
                    "pulses.schedule",
                    format!("flip times must be strictly increasing inside (0, {delta_t}), got {t}"),
                ));
            }
            prev = t;
        }
        Ok(())
    }

    /// Segment boundaries `[0, τ₁, …, τₙ, Δ]` and the sign on each segment.
    fn segments(&self, delta_t: f64) -> Vec<(f64, f64, f64)> {
        let mut edges = Vec::with_capacity(self.schedule.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(&self.schedule);
        edges.push(delta_t);
        edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| (w[0], w[1], if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect()
    }
}

/// Intra-hypercube error probabilities ε_α with the couplings that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub eps: BTreeMap<Channel, f64>,
    pub lambda_star: BTreeMap<Channel, f64>,
}

impl ErrorRates {
    pub fn new(eps: BTreeMap<Channel, f64>, lambda_star: BTreeMap<Channel, f64>) -> Result<Self, HypercubeError> {
        for (ch, e) in &eps {
            if !(e.is_finite() && *e >= 0.0) {
                return Err(invalid(format!("eps.{ch}"), format!("must be finite and >= 0, got {e}")));
            }
        }
        let total: f64 = eps.values().sum();
        if total >= 1.0 {
            return Err(HypercubeError::NotPerturbative { total });
        }
        Ok(ErrorRates { eps, lambda_star })
    }

    /// Rates without recorded couplings.
    pub fn from_rates(rates: &[(Channel, f64)]) -> Result<Self, HypercubeError> {
        Self::new(rates.iter().copied().collect(), BTreeMap::new())
    }

    /// `ε_x = ε_y = ε_z = p/3`.
    pub fn depolarizing(p: f64) -> Result<Self, HypercubeError> {
        Self::from_rates(&[(Channel::X, p / 3.0), (Channel::Y, p / 3.0), (Channel::Z, p / 3.0)])
    }

    pub fn get(&self, ch: Channel) -> f64 {
        self.eps.get(&ch).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.eps.values().sum()
    }

    /// Probability of no error in one hypercube, `1 − Σ ε`.
    pub fn no_error(&self) -> f64 {
        1.0 - self.total()
    }
}

/// `dim[F] = 2(δ + n z)` with `n` decoupling flips per cycle.
pub fn effective_dimension(delta: f64, n_pulses: u32, z: f64) -> f64 {
    2.0 * (delta + n_pulses as f64 * z)
}

/// ε_α without pulses.
pub fn epsilon_alpha(c: &Correlator, lambda_star: f64, delta_t: f64, tol: f64) -> Result<f64, HypercubeError> {
    epsilon_with_pulses(c, lambda_star, delta_t, &PulseSequence::none(), tol)
}

/// ε_α under a pulse sequence, by adaptive nested quadrature over every pair of
/// constant-sign segments. Absolute error ≤ `tol`.
///
/// For `z = 0` the bath is static within a cycle, so `C(0, t) = C(0, 0)`.
pub fn epsilon_with_pulses(
    c: &Correlator,
    lambda_star: f64,
    delta_t: f64,
    seq: &PulseSequence,
    tol: f64,
) -> Result<f64, HypercubeError> {
    if !(lambda_star.is_finite() && lambda_star >= 0.0) {
        return Err(invalid("lambda_star", format!("must be finite and >= 0, got {lambda_star}")));
    }
    if !(delta_t.is_finite() && delta_t > 0.0) {
        return Err(invalid("delta_t", format!("must be > 0, got {delta_t}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    seq.validate(delta_t)?;
    if lambda_star == 0.0 {
        return Ok(0.0);
    }
    let l2 = lambda_star * lambda_star;
    // validate the correlator once so the integrand can unwrap
    two_point(c, &[0.0], 0.0)?;
    let static_mode = c.is_instantaneous();
    let corr = |t1: f64, t2: f64| -> f64 {
        let dt = if static_mode { 0.0 } else { t1 - t2 };
        two_point(c, &[0.0], dt).unwrap_or(f64::NAN)
    };
    let segments = seq.segments(delta_t);
    let n_blocks = segments.len() * (segments.len() + 1) / 2;
    let settings = Settings { tol: (tol / l2).min(tol) / n_blocks as f64, max_depth: 20 };
    let mut integral = 0.0;
    for (i, &(a, b, si)) in segments.iter().enumerate() {
        for &(c0, d0, sj) in &segments[i..] {
            let diagonal = a == c0;
            let block = integrate_2d(corr, (a, b), (c0, d0), diagonal, &settings)?;
            let weight = if diagonal { 1.0 } else { 2.0 };
            integral += weight * si * sj * block;
        }
    }
    let eps = l2 * integral;
    if eps >= 1.0 {
        return Err(HypercubeError::NotPerturbative { total: eps });
    }
    // round-off around an exact echo cancellation
    Ok(eps.max(0.0))
}

/// `(λ*Δ)²/ε_α`, the normalization of F_α.
pub fn f_prefactor(lambda_star: f64, delta_t: f64, eps: f64) -> Result<f64, HypercubeError> {
    if !(eps > 0.0) {
        return Err(invalid("eps", format!("must be > 0 to normalize F, got {eps}")));
    }
    Ok((lambda_star * delta_t).powi(2) / eps)
}

/// `⟨F_α(x_i, t_i) F_α(x_j, t_j)⟩` at separation `(dx, dt)` in cutoff units.
///
/// With `z = 0` different cycles are uncorrelated and any `dt ≠ 0` gives 0.
pub fn pair_correlator_f(
    c: &Correlator,
    lambda_star: f64,
    delta_t: f64,
    eps: f64,
    dx: &[f64],
    dt: f64,
) -> Result<f64, HypercubeError> {
    let pre = f_prefactor(lambda_star, delta_t, eps)?;
    if c.is_instantaneous() && dt != 0.0 {
        return Ok(0.0);
    }
    let cv = two_point(c, dx, dt)?;
    Ok(pre * pre * 2.0 * cv * cv)
}

/// F-pair function on grid cells: converts cell offsets to cutoff units and
/// evaluates [`pair_correlator_f`] with a fixed normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCorrelator {
    pub correlator: Correlator,
    /// `[(λ*Δ)²/ε]²`.
    pub prefactor_sq: f64,
    pub spacing: f64,
    pub delta_t: f64,
}

impl GridCorrelator {
    pub fn new(correlator: Correlator, lambda_star: f64, eps: f64, grid: &GridSpec) -> Result<Self, HypercubeError> {
        let pre = f_prefactor(lambda_star, grid.delta_t, eps)?;
        Ok(GridCorrelator { correlator, prefactor_sq: pre * pre, spacing: grid.spacing.unwrap_or(1.0), delta_t: grid.delta_t })
    }

    /// Unit normalization on a lattice with unit spacing and cycle time:
    /// the pair function is exactly `2 C(dx, dt)²`.
    pub fn unit(correlator: Correlator) -> Self {
        GridCorrelator { correlator, prefactor_sq: 1.0, spacing: 1.0, delta_t: 1.0 }
    }

    pub fn at_cells(&self, dx: &[i64], dt: i64) -> f64 {
        if self.correlator.is_instantaneous() && dt != 0 {
            return 0.0;
        }
        let x: Vec<f64> = dx.iter().map(|&d| d as f64 * self.spacing).collect();
        let t = dt as f64 * self.delta_t;
        let cv = two_point(&self.correlator, &x, t).unwrap_or(f64::NAN);
        self.prefactor_sq * 2.0 * cv * cv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-10;

    #[test]
    fn zero_coupling_gives_zero() {
        assert_eq!(epsilon_alpha(&Correlator::power_law(1.0, 1.0), 0.0, 1.0, TOL).unwrap(), 0.0);
    }

    #[test]
    fn constant_correlator_is_squared_area() {
        let e = epsilon_alpha(&Correlator::constant(1.0), 0.1, 2.0, TOL).unwrap();
        assert!((e - 0.04).abs() < 1e-12);
    }

    #[test]
    fn echo_cancels_static_noise() {
        let seq = PulseSequence::equally_spaced(1, 2.0);
        assert_eq!(seq.schedule, vec![1.0]);
        let e = epsilon_with_pulses(&Correlator::constant(1.0), 0.1, 2.0, &seq, TOL).unwrap();
        assert!(e < 1e-12);
    }

    #[test]
    fn no_pulses_equals_plain_epsilon() {
        let c = Correlator::power_law(0.7, 1.3);
        let a = epsilon_alpha(&c, 0.2, 1.7, TOL).unwrap();
        let b = epsilon_with_pulses(&c, 0.2, 1.7, &PulseSequence::none(), TOL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_large_probabilities() {
        let err = epsilon_alpha(&Correlator::constant(1.0), 1.0, 2.0, TOL).unwrap_err();
        assert!(matches!(err, HypercubeError::NotPerturbative { .. }));
        assert!(ErrorRates::from_rates(&[(Channel::X, 0.6), (Channel::Z, 0.5)]).is_err());
    }

    #[test]
    fn cusped_time_dependence_converges() {
        // z = 4: C(0, t) = (1 + |t|^{1/2})^{-1} has a cusp on the diagonal
        let e = epsilon_alpha(&Correlator::power_law(1.0, 4.0), 0.1, 3.0, 1e-9).unwrap();
        assert!(e > 0.0 && e < 0.09);
    }

    #[test]
    fn effective_dimension_examples() {
        assert_eq!(effective_dimension(1.0, 0, 1.0), 2.0);
        assert_eq!(effective_dimension(1.0, 1, 1.0), 4.0);
        assert!((effective_dimension(0.4, 2, 0.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pulse_schedule_validation() {
        assert!(PulseSequence::new(vec![0.2, 0.1], 1.0).is_err());
        assert!(PulseSequence::new(vec![0.5, 1.0], 1.0).is_err());
        assert!(PulseSequence::new(vec![0.1, 0.9], 1.0).is_ok());
    }

    #[test]
    fn pair_correlator_examples() {
        let local = Correlator::local(1.0);
        assert_eq!(pair_correlator_f(&local, 0.1, 1.0, 0.01, &[1.0], 0.0).unwrap(), 0.0);
        assert_eq!(pair_correlator_f(&local, 0.1, 1.0, 0.01, &[0.0], 3.0).unwrap(), 0.0);
        let c = Correlator::power_law(1.0, 1.0);
        // (λ*Δ)² = ε → unit prefactor
        let v = pair_correlator_f(&c, 0.1, 1.0, 0.01, &[3.0], 4.0).unwrap();
        let cv = two_point(&c, &[3.0], 4.0).unwrap();
        assert!((v - 2.0 * cv * cv).abs() < 1e-15);
        // frozen: [(1 + 400)/(1 + 100)]² = 15.763...
        let r = pair_correlator_f(&c, 0.1, 1.0, 0.01, &[10.0], 0.0).unwrap()
            / pair_correlator_f(&c, 0.1, 1.0, 0.01, &[20.0], 0.0).unwrap();
        assert!((r - (401.0_f64 / 101.0).powi(2)).abs() < 1e-10);
        assert!((r - 16.0).abs() / 16.0 < 0.02);
        assert!(pair_correlator_f(&c, 0.1, 1.0, 0.0, &[1.0], 0.0).is_err());
    }

    #[test]
    fn instantaneous_pairs_do_not_cross_cycles() {
        let c = Correlator::power_law(1.0, 0.0);
        assert_eq!(pair_correlator_f(&c, 0.1, 1.0, 0.01, &[1.0], 1.0).unwrap(), 0.0);
        assert!(pair_correlator_f(&c, 0.1, 1.0, 0.01, &[1.0], 0.0).unwrap() > 0.0);
    }

    #[test]
    fn grid_side_checks() {
        assert_eq!(GridSpec::lattice(4, 16, 2).unwrap().spatial_side().unwrap(), 4);
        assert_eq!(GridSpec::lattice(4, 27, 3).unwrap().spatial_side().unwrap(), 3);
        assert!(GridSpec::lattice(4, 10, 2).is_err());
        let bath = BathSpec::with_dimensions(2.0, &[]).unwrap();
        let g = GridSpec::new(4.0, 2, 2, 1, &bath).unwrap();
        assert_eq!(g.spacing, Some(2.0));
    }
}
