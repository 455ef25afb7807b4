//! Adaptive Gauss-Kronrod quadrature in one and two dimensions.

use std::cell::Cell;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance {tol:e} within {max_depth} refinement levels (estimate {estimate:e})")]
    NoConvergence { tol: f64, max_depth: u32, estimate: f64 },
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Absolute error target.
    pub tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { tol: 1e-8, max_depth: 20 }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite(c));
    }
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite(c - dx));
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite(c + dx));
        }
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Upper bound on live subintervals per integral.
const MAX_PIECES: usize = 4096;

// Globally adaptive: always bisect the piece with the largest error estimate
// until the summed estimate meets `tol`.
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, settings: &Settings) -> Result<f64, QuadratureError> {
    let (value, err) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, err, depth: 0 });
    let (mut total, mut total_err) = (value, err);
    while total_err > settings.tol {
        let worst = heap.pop().expect("heap is never empty");
        if worst.depth >= settings.max_depth || heap.len() + 2 > MAX_PIECES {
            return Err(QuadratureError::NoConvergence { tol: settings.tol, max_depth: settings.max_depth, estimate: total });
        }
        let m = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(f, worst.a, m)?;
        let (v2, e2) = gk15(f, m, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: m, value: v1, err: e1, depth: worst.depth + 1 });
        heap.push(Piece { a: m, b: worst.b, value: v2, err: e2, depth: worst.depth + 1 });
        if heap.len() % 64 == 0 {
            // refresh running sums against drift
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

/// `∫_a^b f` to absolute accuracy `settings.tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, settings: &Settings) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    adapt(&f, a, b, settings)
}

/// Nested integral `∫_a^b dx ∫_c^d dy f(x, y)`.
///
/// With `split_diagonal`, the inner integral is broken at `y = x`, which keeps
/// integrands whose only non-smooth locus is the diagonal (functions of
/// `x − y` with a cusp at zero) piecewise smooth.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    split_diagonal: bool,
    settings: &Settings,
) -> Result<f64, QuadratureError> {
    if a == b || c == d {
        return Ok(0.0);
    }
    let inner_settings = Settings { tol: 0.5 * settings.tol / (b - a).abs(), max_depth: settings.max_depth };
    let outer_settings = Settings { tol: 0.5 * settings.tol, ..*settings };
    let failure: Cell<Option<QuadratureError>> = Cell::new(None);
    let inner = |x: f64| -> f64 {
        let g = |y: f64| f(x, y);
        let result = if split_diagonal && x > c.min(d) && x < c.max(d) {
            let s = Settings { tol: 0.5 * inner_settings.tol, ..inner_settings };
            integrate(g, c, x, &s).and_then(|lo| integrate(g, x, d, &s).map(|hi| lo + hi))
        } else {
            integrate(g, c, d, &inner_settings)
        };
        match result {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let value = integrate(inner, a, b, &outer_settings);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    value
}
