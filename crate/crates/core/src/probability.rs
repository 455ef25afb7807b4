//! m-error probabilities on finite grids and the finite-size measurement of
//! the scaling exponent.
//!
//! For `m` errors of one type on an `N × R` grid the probability expands as
//! a stochastic binomial term plus corrections from correlated pairs of error
//! insertions:
//!
//! ```text
//! P_m ≈ p_m [ C(NR, m) + C(NR − 2, m − 2) · S / 2 ],   p_m = ε^m (1 − Σε)^{NR − m}
//! ```
//!
//! where `S` is the sum of the F-pair function over ordered pairs of distinct
//! hypercubes. Only one correlated pair is kept; `F_0` insertions enter only
//! through the `(1 − Σε)` normalization.
//!
//! Under `x → b x`, `t → b^z t` the non-extensive part of `S` scales as
//! `L^{2(D + z − dim F)}`: it grows for a relevant flow, decays for an
//! irrelevant one and accumulates logarithmically at marginality.
//! [`analyze_excess`] measures that exponent from a dyadic scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::Channel;
use crate::hypercube::{ErrorRates, GridSpec, HypercubeError};
use crate::rg::Verdict;

/// Largest grid handled by [`correction_pair_sum`].
pub const MAX_CELLS: u64 = 1_000_000;
/// Largest grid handled by the O(cells²) [`correction_pair_sum_direct`].
pub const MAX_DIRECT_CELLS: u64 = 8192;
/// Separations summed per parallel chunk; fixed so results do not depend on
/// the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("m = {m} is outside 0..={cells}")]
    MOutOfRange { m: u64, cells: u64 },
    #[error("grid of {cells} cells exceeds the summation budget of {max}")]
    CellBudget { cells: u64, max: u64 },
    #[error("evaluate_pm supports m <= 4, got {0}")]
    TooManyErrors(u64),
    #[error("scaling fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("scaling fit needs positive sizes and values, got ({0}, {1})")]
    NonPositive(f64, f64),
    #[error(transparent)]
    Grid(#[from] HypercubeError),
}

/// `ln C(n, k)` by a product of ratios.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `ln p_m = m ln ε_α + (NR − m) ln(1 − Σε)`.
fn ln_weight(eps: &ErrorRates, ch: Channel, cells: u64, m: u64) -> f64 {
    let e = eps.get(ch);
    let ln_e = if m == 0 { 0.0 } else { (m as f64) * e.ln() };
    let rest = (cells - m) as f64;
    let ln_rest = if rest == 0.0 { 0.0 } else { rest * (-eps.total()).ln_1p() };
    ln_e + ln_rest
}

/// Stochastic probability `C(NR, m) ε_α^m (1 − Σ ε)^{NR − m}` of exactly `m`
/// errors of type α and none of any other type.
pub fn stochastic_pm(eps: &ErrorRates, ch: Channel, n_cycles: u64, n_qubits: u64, m: u64) -> Result<f64, ProbabilityError> {
    let cells = n_cycles * n_qubits;
    if m > cells {
        return Err(ProbabilityError::MOutOfRange { m, cells });
    }
    if m > 0 && eps.get(ch) == 0.0 {
        return Ok(0.0);
    }
    Ok((ln_binomial(cells, m) + ln_weight(eps, ch, cells, m)).exp())
}

/// Coordinates of the grid cells: `(cycle, [x_1, …, x_D])`.
struct Lattice {
    cycles: i64,
    side: i64,
    dim: usize,
}

impl Lattice {
    fn new(grid: &GridSpec) -> Result<Self, ProbabilityError> {
        Ok(Lattice { cycles: grid.n_cycles as i64, side: grid.spatial_side()? as i64, dim: grid.comp_dim as usize })
    }

    fn cells(&self) -> usize {
        (self.cycles * self.side.pow(self.dim as u32)) as usize
    }

    /// Decodes a flat index into `(t, x)` with `t` slowest.
    fn coords(&self, mut idx: usize, x: &mut [i64]) -> i64 {
        for xi in x.iter_mut().rev() {
            *xi = (idx % self.side as usize) as i64;
            idx /= self.side as usize;
        }
        idx as i64
    }
}

/// Minimum-image representative of `k mod period` in `(−period/2, period/2]`.
pub fn min_image(k: i64, period: i64) -> i64 {
    let r = k.rem_euclid(period);
    if 2 * r > period {
        r - period
    } else {
        r
    }
}

/// Sum of `fcorr` over all ordered pairs of distinct hypercubes on the
/// periodic grid, one cell = unit volume.
///
/// The summand depends only on the minimum-image separation, so every cell
/// sees the same multiset of separations and the double sum reduces to
/// `cells · Σ_{sep ≠ 0} fcorr(sep)`. Chunks of separations are summed in
/// parallel and combined in a fixed order.
pub fn correction_pair_sum<F>(grid: &GridSpec, fcorr: F) -> Result<f64, ProbabilityError>
where
    F: Fn(&[i64], i64) -> f64 + Sync,
{
    let cells = grid.cells();
    if cells > MAX_CELLS {
        return Err(ProbabilityError::CellBudget { cells, max: MAX_CELLS });
    }
    let lat = Lattice::new(grid)?;
    let n = lat.cells();
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut x = vec![0i64; lat.dim];
            let mut s = 0.0;
            for idx in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                if idx == 0 {
                    continue;
                }
                let t = lat.coords(idx, &mut x);
                let dt = min_image(t, lat.cycles);
                for xi in x.iter_mut() {
                    *xi = min_image(*xi, lat.side);
                }
                s += fcorr(&x, dt);
            }
            s
        })
        .collect();
    Ok(cells as f64 * partials.iter().sum::<f64>())
}

/// Literal double sum over ordered cell pairs; quadratic cost, used to check
/// the reduced form.
pub fn correction_pair_sum_direct<F>(grid: &GridSpec, fcorr: F) -> Result<f64, ProbabilityError>
where
    F: Fn(&[i64], i64) -> f64,
{
    correction_pair_sum_relabeled(grid, fcorr, |i| i)
}

/// Direct double sum with cells visited through a relabeling permutation.
pub fn correction_pair_sum_relabeled<F, P>(grid: &GridSpec, fcorr: F, label: P) -> Result<f64, ProbabilityError>
where
    F: Fn(&[i64], i64) -> f64,
    P: Fn(usize) -> usize,
{
    let cells = grid.cells();
    if cells > MAX_DIRECT_CELLS {
        return Err(ProbabilityError::CellBudget { cells, max: MAX_DIRECT_CELLS });
    }
    let lat = Lattice::new(grid)?;
    let n = lat.cells();
    let mut xi = vec![0i64; lat.dim];
    let mut xj = vec![0i64; lat.dim];
    let mut dx = vec![0i64; lat.dim];
    let mut total = 0.0;
    for i in 0..n {
        let ti = lat.coords(label(i), &mut xi);
        for j in 0..n {
            if i == j {
                continue;
            }
            let tj = lat.coords(label(j), &mut xj);
            for k in 0..lat.dim {
                dx[k] = min_image(xj[k] - xi[k], lat.side);
            }
            total += fcorr(&dx, min_image(tj - ti, lat.cycles));
        }
    }
    Ok(total)
}

/// Stochastic term, leading pair correction and their ratio for `m` errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmBreakdown {
    pub m: u64,
    pub stochastic: f64,
    pub pair_correction: f64,
    pub ratio: f64,
}

impl PmBreakdown {
    pub fn total(&self) -> f64 {
        self.stochastic + self.pair_correction
    }
}

/// Combines [`stochastic_pm`] and [`correction_pair_sum`] for `m ≤ 4`.
pub fn evaluate_pm<F>(grid: &GridSpec, eps: &ErrorRates, ch: Channel, fcorr: F, m: u64) -> Result<PmBreakdown, ProbabilityError>
where
    F: Fn(&[i64], i64) -> f64 + Sync,
{
    if m > 4 {
        return Err(ProbabilityError::TooManyErrors(m));
    }
    let cells = grid.cells();
    let stochastic = stochastic_pm(eps, ch, grid.n_cycles, grid.n_qubits, m)?;
    if m < 2 {
        return Ok(PmBreakdown { m, stochastic, pair_correction: 0.0, ratio: 0.0 });
    }
    let sum = correction_pair_sum(grid, fcorr)?;
    // C(NR−2, m−2)/C(NR, m) = m(m−1)/(NR(NR−1)); each unordered pair is S/2
    let ratio = (m * (m - 1)) as f64 * sum / (2.0 * cells as f64 * (cells - 1) as f64);
    Ok(PmBreakdown { m, stochastic, pair_correction: stochastic * ratio, ratio })
}

/// Least-squares slope of `ln S` against `ln L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y = a + b x`, returning `(b, stderr(b), a)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = xs.len().saturating_sub(2).max(1) as f64;
    (slope, (ssr / dof / sxx).sqrt(), intercept)
}

/// Power-law exponent of `(L, S)` data, discarding the smallest size.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit, ProbabilityError> {
    if points.len() < 4 {
        return Err(ProbabilityError::TooFewPoints { needed: 4, got: points.len() });
    }
    if let Some(&(l, s)) = points.iter().find(|(l, s)| !(*l > 0.0 && *s > 0.0)) {
        return Err(ProbabilityError::NonPositive(l, s));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let kept = &pts[1..];
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let (slope, stderr, intercept) = linear_fit(&xs, &ys);
    Ok(ScalingFit { slope, stderr, intercept })
}

/// One grid of a dyadic scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "L")]
    pub size: u64,
    pub cells: u64,
    /// Ordered pair sum `S(L)`.
    pub sum: f64,
    /// Pair correction over stochastic term for two errors,
    /// `S / (NR (NR − 1))`.
    pub ratio: f64,
}

impl ScanRow {
    pub fn per_cell(&self) -> f64 {
        self.sum / self.cells as f64
    }
}

/// Grid whose linear size is `L` in the scaling sense: `L^D` qubits and
/// `L^z` cycles (one cycle for `z = 0`).
pub fn scaling_grid(size: u64, comp_dim: u32, z: f64) -> Result<GridSpec, ProbabilityError> {
    let cycles = if z == 0.0 { 1 } else { ((size as f64).powf(z).round() as u64).max(1) };
    Ok(GridSpec::lattice(cycles, size.pow(comp_dim), comp_dim)?)
}

/// Pair sums over the grids `scaling_grid(L)` for each `L` in `sizes`.
pub fn scaling_scan<F>(sizes: &[u64], comp_dim: u32, z: f64, fcorr: F) -> Result<Vec<ScanRow>, ProbabilityError>
where
    F: Fn(&[i64], i64) -> f64 + Sync,
{
    sizes
        .iter()
        .map(|&size| {
            let grid = scaling_grid(size, comp_dim, z)?;
            let sum = correction_pair_sum(&grid, &fcorr)?;
            let cells = grid.cells();
            let ratio = if cells > 1 { sum / (cells as f64 * (cells - 1) as f64) } else { 0.0 };
            Ok(ScanRow { size, cells, sum, ratio })
        })
        .collect()
}

/// Growth verdict of the non-extensive part of the pair sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessAnalysis {
    /// `(L, E(L))` with `E(L) = S(L') · cells(L)/cells(L') − S(L)` for the
    /// next size `L'`; zero for a purely extensive sum.
    pub excess: Vec<(f64, f64)>,
    /// Running sum of `E` over the scan: the non-extensive part accumulated
    /// over octaves of scale.
    pub accumulated: Vec<(f64, f64)>,
    /// Power-law fit of `E(L)`.
    pub fit: ScalingFit,
    /// Linear fit of the accumulated excess against `ln L`.
    pub log_slope: f64,
    /// RMS residual of that fit relative to the mean accumulated excess.
    pub log_residual: f64,
    pub verdict: Verdict,
}

/// Measured growth exponents within this band of zero count as marginal.
pub const GROWTH_TOL: f64 = 0.1;

/// Extracts the non-extensive scaling of a dyadic scan.
pub fn analyze_excess(rows: &[ScanRow]) -> Result<ExcessAnalysis, ProbabilityError> {
    if rows.len() < 5 {
        return Err(ProbabilityError::TooFewPoints { needed: 5, got: rows.len() });
    }
    let excess: Vec<(f64, f64)> = rows
        .windows(2)
        .map(|w| (w[0].size as f64, w[1].sum * w[0].cells as f64 / w[1].cells as f64 - w[0].sum))
        .collect();
    let fit = fit_scaling_exponent(&excess)?;
    let mut acc = 0.0;
    let accumulated: Vec<(f64, f64)> = excess
        .iter()
        .map(|&(l, e)| {
            acc += e;
            (l, acc)
        })
        .collect();
    let xs: Vec<f64> = accumulated.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = accumulated.iter().map(|p| p.1).collect();
    let (log_slope, _, a) = linear_fit(&xs, &ys);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - a - log_slope * x).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
    Ok(ExcessAnalysis {
        excess,
        accumulated,
        fit,
        log_slope,
        log_residual: rms / mean.abs(),
        verdict: Verdict::from_exponent(fit.slope, GROWTH_TOL),
    })
}
