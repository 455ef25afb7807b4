//! Renormalization-group flows and the dimensional criterion.
//!
//! Three flows live here:
//!
//! - the impurity β-function of a single hypercube,
//!   `dλ_α/dℓ = Σ g_βγ λ_β λ_γ + Σ_β h_αβ λ_α λ_β²`, integrated from the
//!   cutoff down to the grid scale to obtain λ*;
//! - the scaling equation `dλ*/dℓ = (D + z − dim[F]) λ*` for the
//!   inter-hypercube operator, whose exponent sign classifies a noise model;
//! - the reduced Kosterlitz-Thouless recursion `dx/dℓ = y²`, `dy/dℓ = x y`
//!   for the Coulomb-gas realization of the D = 1 cosine model.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{Channel, NoiseModel};
use crate::hypercube::effective_dimension;

/// Default |λ| beyond which a flow counts as diverged.
pub const BLOW_UP_BOUND: f64 = 1e3;
/// Default exponent tolerance for a marginal verdict.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Fugacity below which the KT flow is declared bound.
pub const KT_BOUND_FUGACITY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RgError {
    #[error("flow step and length must be positive (step = {step}, ell_max = {ell_max})")]
    BadStep { step: f64, ell_max: f64 },
    #[error("non-finite coupling encountered at ell = {0}")]
    NonFinite(f64),
    #[error("coupling vector has length {got}, coefficient tables expect {expected}")]
    Shape { expected: usize, got: usize },
    #[error("grid scale is not below the cutoff: Λ·v·Δ = {0} must exceed 1")]
    GridBelowCutoff(f64),
    #[error("β-function flow diverged at ell = {ell:.6} before reaching the grid scale ell* = {target:.6}; the perturbative treatment is invalid")]
    Diverged { ell: f64, target: f64 },
}

/// Quadratic β-function coefficients.
///
/// Either one matrix `g_βγ` shared by every channel, or one matrix per channel
/// `g_αβγ` for environments where the quadratic term mixes only the
/// complementary channels. An empty table means all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuadraticTable {
    Shared(Vec<Vec<f64>>),
    PerChannel(Vec<Vec<Vec<f64>>>),
}

impl Default for QuadraticTable {
    fn default() -> Self {
        QuadraticTable::Shared(Vec::new())
    }
}

fn check_matrix(m: &[Vec<f64>], n: usize) -> Result<(), String> {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(format!("expected an empty table or a {n}x{n} matrix"));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err("coefficients must be finite".into());
    }
    Ok(())
}

impl QuadraticTable {
    pub fn is_zero(&self) -> bool {
        match self {
            QuadraticTable::Shared(m) => m.iter().flatten().all(|v| *v == 0.0),
            QuadraticTable::PerChannel(t) => t.iter().flatten().flatten().all(|v| *v == 0.0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            QuadraticTable::Shared(m) if m.is_empty() => Ok(()),
            QuadraticTable::Shared(m) => check_matrix(m, n),
            QuadraticTable::PerChannel(t) if t.is_empty() => Ok(()),
            QuadraticTable::PerChannel(t) => {
                if t.len() != n {
                    return Err(format!("expected {n} per-channel matrices"));
                }
                t.iter().try_for_each(|m| check_matrix(m, n))
            }
        }
    }

    /// Quadratic contribution to dλ_α/dℓ.
    fn apply(&self, alpha: usize, lambda: &[f64]) -> f64 {
        let m = match self {
            QuadraticTable::Shared(m) => m,
            QuadraticTable::PerChannel(t) => match t.get(alpha) {
                Some(m) => m,
                None => return 0.0,
            },
        };
        let mut s = 0.0;
        for (b, row) in m.iter().enumerate() {
            for (c, g) in row.iter().enumerate() {
                s += g * lambda[b] * lambda[c];
            }
        }
        s
    }
}

/// Cubic β-function coefficients `h_αβ`; empty means all zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CubicTable(pub Vec<Vec<f64>>);

impl CubicTable {
    pub fn validate(&self, n: usize) -> Result<(), String> {
        if self.0.is_empty() {
            Ok(())
        } else {
            check_matrix(&self.0, n)
        }
    }

    fn apply(&self, alpha: usize, lambda: &[f64]) -> f64 {
        match self.0.get(alpha) {
            Some(row) => lambda[alpha] * row.iter().zip(lambda).map(|(h, l)| h * l * l).sum::<f64>(),
            None => 0.0,
        }
    }
}

/// Right-hand side of the impurity β-function.
pub fn beta_function(lambda: &[f64], g: &QuadraticTable, h: &CubicTable) -> Vec<f64> {
    (0..lambda.len()).map(|a| g.apply(a, lambda) + h.apply(a, lambda)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub ell: f64,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub samples: Vec<FlowSample>,
    pub terminal: Vec<f64>,
    pub diverged: bool,
}

impl FlowTrajectory {
    pub fn final_ell(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.ell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub blow_up_bound: f64,
    /// Upper bound on `step · |dλ/dℓ| / |λ|` for a single RK4 stage. Nominal
    /// steps that would exceed it are subdivided, so a blow-up is resolved
    /// instead of stepped over.
    pub max_relative_change: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { blow_up_bound: BLOW_UP_BOUND, max_relative_change: 1e-2 }
    }
}

fn rk4_step<F>(rhs: &F, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(u, v)| u + s * v).collect() };
    let k1 = rhs(y);
    let k2 = rhs(&axpy(y, &k1, 0.5 * h));
    let k3 = rhs(&axpy(y, &k2, 0.5 * h));
    let k4 = rhs(&axpy(y, &k3, h));
    (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

enum Stop {
    Finished,
    Diverged,
}

/// Fixed nominal grid `0, step, 2·step, …, ell_max` with RK4 substeps where
/// the relative change per step would exceed `opts.max_relative_change`.
/// `stop` is checked after every substep.
fn integrate_ode<F, S>(
    y0: &[f64],
    rhs: F,
    ell_max: f64,
    step: f64,
    opts: &FlowOptions,
    mut stop: S,
    mut record: impl FnMut(f64, &[f64]),
) -> Result<(Vec<f64>, f64, Stop), RgError>
where
    F: Fn(&[f64]) -> Vec<f64>,
    S: FnMut(&[f64]) -> bool,
{
    if !(step > 0.0 && ell_max > 0.0 && step.is_finite() && ell_max.is_finite()) {
        return Err(RgError::BadStep { step, ell_max });
    }
    let mut y = y0.to_vec();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RgError::NonFinite(0.0));
    }
    record(0.0, &y);
    if stop(&y) {
        return Ok((y, 0.0, Stop::Diverged));
    }
    let n_steps = ((ell_max / step) - 1e-9).ceil().max(1.0) as u64;
    let mut ell = 0.0;
    for k in 1..=n_steps {
        let target = if k == n_steps { ell_max } else { k as f64 * step };
        let mut remaining = target - ell;
        while remaining > 0.0 {
            let d = rhs(&y);
            let scale = max_abs(&y);
            let rate = if scale > 0.0 { max_abs(&d) / scale } else { 0.0 };
            let h = if rate * remaining > opts.max_relative_change {
                opts.max_relative_change / rate
            } else {
                remaining
            };
            y = rk4_step(&rhs, &y, h);
            if h >= remaining {
                ell = target;
                remaining = 0.0;
            } else {
                ell += h;
                remaining = target - ell;
            }
            if y.iter().any(|v| v.is_nan()) {
                return Err(RgError::NonFinite(ell));
            }
            if stop(&y) {
                record(ell, &y);
                return Ok((y, ell, Stop::Diverged));
            }
        }
        record(ell, &y);
    }
    Ok((y, ell, Stop::Finished))
}

/// Integrates the impurity β-function from ℓ = 0 to `ell_max`.
pub fn integrate_beta(
    lambda0: &[f64],
    g: &QuadraticTable,
    h: &CubicTable,
    ell_max: f64,
    step: f64,
) -> Result<FlowTrajectory, RgError> {
    integrate_beta_with(lambda0, g, h, ell_max, step, &FlowOptions::default())
}

pub fn integrate_beta_with(
    lambda0: &[f64],
    g: &QuadraticTable,
    h: &CubicTable,
    ell_max: f64,
    step: f64,
    opts: &FlowOptions,
) -> Result<FlowTrajectory, RgError> {
    let n = lambda0.len();
    g.validate(n).map_err(|_| RgError::Shape { expected: table_len(g), got: n })?;
    h.validate(n).map_err(|_| RgError::Shape { expected: h.0.len(), got: n })?;
    let bound = opts.blow_up_bound;
    let mut samples = Vec::new();
    let (terminal, _, stop) = integrate_ode(
        lambda0,
        |l| beta_function(l, g, h),
        ell_max,
        step,
        opts,
        |l| max_abs(l) > bound,
        |ell, l| samples.push(FlowSample { ell, lambda: l.to_vec() }),
    )?;
    Ok(FlowTrajectory { samples, terminal, diverged: matches!(stop, Stop::Diverged) })
}

fn table_len(g: &QuadraticTable) -> usize {
    match g {
        QuadraticTable::Shared(m) => m.len(),
        QuadraticTable::PerChannel(t) => t.len(),
    }
}

/// Couplings renormalized from the cutoff down to the grid scale
/// `ℓ* = ln(Λ v Δ)`.
pub fn lambda_star(model: &NoiseModel, delta_t: f64, step: f64) -> Result<BTreeMap<Channel, f64>, RgError> {
    let scale = model.bath.cutoff * model.bath.v * delta_t;
    if !(scale >= 1.0) {
        return Err(RgError::GridBelowCutoff(scale));
    }
    let target = scale.ln();
    let lambda0 = model.coupling_vector();
    let terminal = if target == 0.0 || model.beta_g.is_zero() && model.beta_h.0.iter().flatten().all(|v| *v == 0.0) {
        lambda0.to_vec()
    } else {
        let traj = integrate_beta(&lambda0, &model.beta_g, &model.beta_h, target, step.min(target))?;
        if traj.diverged {
            return Err(RgError::Diverged { ell: traj.final_ell(), target });
        }
        traj.terminal
    };
    Ok(model.channels().map(|ch| (ch, terminal[ch.index()])).collect())
}

/// Sign of the scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Relevant,
    Irrelevant,
    Marginal,
}

impl Verdict {
    pub fn from_exponent(exponent: f64, tol: f64) -> Self {
        if exponent > tol {
            Verdict::Relevant
        } else if exponent < -tol {
            Verdict::Irrelevant
        } else {
            Verdict::Marginal
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Relevant => "Relevant",
            Verdict::Irrelevant => "Irrelevant",
            Verdict::Marginal => "Marginal",
        })
    }
}

/// `D + z − dim[F]`.
pub fn flow_exponent(comp_dim: u32, z: f64, dim_f: f64) -> f64 {
    comp_dim as f64 + z - dim_f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub channel: Channel,
    pub dim_f: f64,
    pub exponent: f64,
    pub verdict: Verdict,
}

/// Per-channel classification with `n_pulses` decoupling flips per cycle.
pub fn classify(model: &NoiseModel, comp_dim: u32, n_pulses: u32, tol: f64) -> Vec<Classification> {
    let z = model.bath.z;
    model
        .bath
        .delta
        .iter()
        .map(|(&channel, &delta)| {
            let dim_f = effective_dimension(delta, n_pulses, z);
            let exponent = flow_exponent(comp_dim, z, dim_f);
            Classification { channel, dim_f, exponent, verdict: Verdict::from_exponent(exponent, tol) }
        })
        .collect()
}

/// Minimal pulse count that makes a channel irrelevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseRequirement {
    Pulses(u32),
    /// `z = 0` and `2δ ≤ D`: pulses leave the operator dimension unchanged.
    Impossible,
}

impl fmt::Display for PulseRequirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseRequirement::Pulses(n) => write!(f, "{n}"),
            PulseRequirement::Impossible => f.write_str("impossible"),
        }
    }
}

/// Smallest `n ≥ 0` with `2(δ + n z) > D + z`.
pub fn pulses_needed(comp_dim: u32, z: f64, delta: f64) -> PulseRequirement {
    let target = comp_dim as f64 + z;
    let ok = |n: u32| effective_dimension(delta, n, z) > target;
    if ok(0) {
        return PulseRequirement::Pulses(0);
    }
    if z <= 0.0 {
        return PulseRequirement::Impossible;
    }
    let guess = ((target - 2.0 * delta) / (2.0 * z)).floor().max(0.0) as u32 + 1;
    let mut n = guess;
    while n > 0 && ok(n - 1) {
        n -= 1;
    }
    while !ok(n) {
        n += 1;
    }
    PulseRequirement::Pulses(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KtPhase {
    /// Fugacity flows to zero: charges bind into dipoles.
    Bound,
    /// Fugacity grows past the blow-up bound: free charges.
    Unbound,
    /// Neither termination was reached within `ell_max`.
    Undetermined,
}

impl fmt::Display for KtPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KtPhase::Bound => "Bound",
            KtPhase::Unbound => "Unbound",
            KtPhase::Undetermined => "Undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtSample {
    pub ell: f64,
    pub x: f64,
    pub y: f64,
}

impl KtSample {
    /// `x² − y²`, constant along the exact flow.
    pub fn invariant(&self) -> f64 {
        self.x * self.x - self.y * self.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtFlow {
    pub samples: Vec<KtSample>,
    pub phase: KtPhase,
}

impl KtFlow {
    /// Largest deviation of `x² − y²` from its initial value.
    pub fn invariant_drift(&self) -> f64 {
        let i0 = self.samples[0].invariant();
        self.samples.iter().map(|s| (s.invariant() - i0).abs()).fold(0.0, f64::max)
    }
}

/// Reduced KT recursion `dx/dℓ = y²`, `dy/dℓ = x y` from `(x0, y0)`.
///
/// `x` is the fugacity eigenvalue, so `x < 0` is the irrelevant side; pair
/// screening drives it upward.
pub fn kt_flow(x0: f64, y0: f64, ell_max: f64, step: f64) -> Result<KtFlow, RgError> {
    let opts = FlowOptions { blow_up_bound: BLOW_UP_BOUND, max_relative_change: 1e-3 };
    let mut samples = Vec::new();
    let (state, _, stop) = integrate_ode(
        &[x0, y0],
        |s| vec![s[1] * s[1], s[0] * s[1]],
        ell_max,
        step,
        &opts,
        |s| s[1].abs() > BLOW_UP_BOUND || s[1].abs() < KT_BOUND_FUGACITY,
        |ell, s| samples.push(KtSample { ell, x: s[0], y: s[1] }),
    )?;
    let phase = match stop {
        Stop::Diverged if state[1].abs() < KT_BOUND_FUGACITY => KtPhase::Bound,
        Stop::Diverged => KtPhase::Unbound,
        Stop::Finished => KtPhase::Undetermined,
    };
    Ok(KtFlow { samples, phase })
}

/// Reduced KT coordinates for the D = 1, z = 1 cosine model with pulse-shifted
/// dimension `delta_eff`: `x = D + z − 2δ_eff`, `y` = fugacity λ*.
pub fn kt_coordinates(delta_eff: f64, fugacity: f64) -> (f64, f64) {
    (flow_exponent(1, 1.0, 2.0 * delta_eff), fugacity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;

    #[test]
    fn exponent_examples() {
        assert_eq!(flow_exponent(1, 1.0, 2.0), 0.0);
        assert_eq!(Verdict::from_exponent(flow_exponent(1, 1.0, 2.0), MARGINAL_TOL), Verdict::Marginal);
        assert_eq!(flow_exponent(2, 0.0, 3.0), -1.0);
        assert!((flow_exponent(1, 1.0, 0.8) - 1.2).abs() < 1e-15);
    }

    fn single(z: f64, delta: f64) -> NoiseModel {
        let bath = BathSpec::with_dimensions(z, &[(Channel::Z, delta)]).unwrap();
        NoiseModel::unrenormalized(bath, &[(Channel::Z, 0.1)]).unwrap()
    }

    #[test]
    fn classify_examples() {
        let c = &classify(&single(1.0, 0.4), 1, 0, MARGINAL_TOL)[0];
        assert!((c.exponent - 1.2).abs() < 1e-12 && c.verdict == Verdict::Relevant);
        let c = &classify(&single(1.0, 0.4), 1, 1, MARGINAL_TOL)[0];
        assert!((c.exponent + 0.8).abs() < 1e-12 && c.verdict == Verdict::Irrelevant);
        for n in 0..8 {
            let c = &classify(&single(0.0, 1.01), 2, n, MARGINAL_TOL)[0];
            assert!((c.exponent + 0.02).abs() < 1e-12);
            assert_eq!(c.verdict, Verdict::Irrelevant);
        }
    }

    #[test]
    fn pulses_examples() {
        assert_eq!(pulses_needed(1, 1.0, 0.4), PulseRequirement::Pulses(1));
        assert_eq!(pulses_needed(1, 1.0, 1.5), PulseRequirement::Pulses(0));
        assert_eq!(pulses_needed(3, 0.0, 1.0), PulseRequirement::Impossible);
        // marginal is not enough: 2(1 + 0) = 2 is not > 2
        assert_eq!(pulses_needed(1, 1.0, 1.0), PulseRequirement::Pulses(1));
    }

    #[test]
    fn zero_beta_is_constant() {
        let t = integrate_beta(&[0.1, 0.2, 0.3], &QuadraticTable::default(), &CubicTable::default(), 2.0, 0.1).unwrap();
        assert!(!t.diverged);
        assert_eq!(t.samples.len(), 21);
        assert!(t.samples.iter().all(|s| s.lambda == vec![0.1, 0.2, 0.3]));
        assert_eq!(t.final_ell(), 2.0);
    }

    #[test]
    fn cubic_decay_matches_closed_form() {
        let h = CubicTable(vec![vec![-1.0]]);
        let t = integrate_beta(&[0.5], &QuadraticTable::default(), &h, 4.0, 1e-3).unwrap();
        let exact = 0.5 / (1.0_f64 + 2.0 * 0.25 * 4.0).sqrt();
        assert!(((t.terminal[0] - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn cubic_growth_diverges_before_singularity() {
        let h = CubicTable(vec![vec![1.0]]);
        let t = integrate_beta(&[0.5], &QuadraticTable::default(), &h, 3.0, 1e-3).unwrap();
        assert!(t.diverged);
        assert!(t.final_ell() < 2.0, "{}", t.final_ell());
        assert!(t.terminal[0].abs() > BLOW_UP_BOUND);
    }

    #[test]
    fn quadratic_tables_parse_both_shapes() {
        let shared: QuadraticTable = serde_json::from_str("[[0,1,0],[0,0,0],[0,0,0]]").unwrap();
        assert!(matches!(shared, QuadraticTable::Shared(_)));
        let per: QuadraticTable = serde_json::from_str("[[[0,0,0],[0,0,1],[0,0,0]],[[0,0,0],[0,0,0],[0,0,0]],[[0,0,0],[0,0,0],[0,0,0]]]").unwrap();
        assert!(matches!(per, QuadraticTable::PerChannel(_)));
        // per-channel mixing: dλ_x/dℓ = λ_y λ_z only
        let b = beta_function(&[1.0, 2.0, 3.0], &per, &CubicTable::default());
        assert_eq!(b, vec![6.0, 0.0, 0.0]);
        assert_eq!(beta_function(&[1.0, 2.0, 3.0], &shared, &CubicTable::default()), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn lambda_star_errors() {
        let mut m = single(1.0, 1.0);
        assert!(matches!(lambda_star(&m, 0.5, 1e-3), Err(RgError::GridBelowCutoff(_))));
        m.beta_h = CubicTable(vec![vec![0.0; 3], vec![0.0; 3], vec![0.0, 0.0, 1000.0]]);
        assert!(matches!(lambda_star(&m, 1e3, 1e-3), Err(RgError::Diverged { .. })));
    }

    #[test]
    fn kt_examples() {
        assert_eq!(kt_flow(-0.3, 0.0, 1.0, 1e-3).unwrap().phase, KtPhase::Bound);
        assert_eq!(kt_flow(-0.5, 0.1, 100.0, 1e-3).unwrap().phase, KtPhase::Bound);
        assert_eq!(kt_flow(-0.1, 0.5, 100.0, 1e-3).unwrap().phase, KtPhase::Unbound);
        assert_eq!(kt_flow(-0.5, 0.1, 1.0, 1e-3).unwrap().phase, KtPhase::Undetermined);
    }
}
