//! Commutative (θ = 0) quadrature oracle.
//!
//! At θ = 0 the algebra is the ordinary Fourier algebra of the n-torus: an
//! element is the trigonometric polynomial `f(ξ) = Σ_k x_k e^{i k·ξ}`, the
//! trace is the normalized integral over `[0, 2π)^n`, and every spectral
//! quantity reduces to `τ(g(x)) = (2π)^{-n} ∫ g(f(ξ)) dξ`. This module
//! evaluates those integrals with the uniform-grid (trapezoid) rule, which
//! is *exact* for trigonometric polynomials of degree below the per-axis
//! grid count G. Integrands that are not band-limited (logarithms,
//! fractional powers) are handled by [`quad_trace_adaptive`], which grows G
//! until two successive estimates agree.
//!
//! Everything here is independent of the GNS representation machinery: the
//! only input is the coefficient list. That independence is what lets the
//! rest of the crate use these routines as ground truth on classical tori.

use num_complex::Complex64;

use crate::algebra::{unit_complex, NcElement};
use crate::error::{NctError, Result};

/// Hard cap on total grid points, protecting against runaway refinement.
const MAX_GRID_POINTS: usize = 1 << 26;

/// Sampled values of a trigonometric polynomial on the uniform grid
/// `ξ_j = 2π t_j / G`, `t_j ∈ {0, …, G-1}`, stored row-major over the axes.
pub struct GridFunction {
    n: usize,
    grid: usize,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Points per axis.
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Largest deviation of the sampled values from the real axis.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }
}

fn check_commutative(x: &NcElement) -> Result<()> {
    if !x.theta().is_zero() {
        return Err(NctError::InvalidParameter(
            "quadrature oracle requires theta = 0 (a commutative torus)".into(),
        ));
    }
    Ok(())
}

fn grid_point_count(n: usize, grid: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total
            .checked_mul(grid)
            .filter(|&t| t <= MAX_GRID_POINTS)
            .ok_or_else(|| {
                NctError::InvalidParameter(format!(
                    "grid {grid}^{n} exceeds the {MAX_GRID_POINTS}-point cap"
                ))
            })?;
    }
    Ok(total)
}

/// Evaluate `f(ξ) = Σ_k x_k e^{i k·ξ}` on the uniform G-per-axis grid.
///
/// The grid phases `e^{2πi r/G}` are read from a single precomputed table
/// indexed by `k·t mod G`, so each value is one table lookup and one complex
/// multiply per coefficient.
pub fn synthesize(x: &NcElement, grid: usize) -> Result<GridFunction> {
    check_commutative(x)?;
    if grid == 0 {
        return Err(NctError::InvalidParameter("grid must be positive".into()));
    }
    let n = x.dim();
    let total = grid_point_count(n, grid)?;
    let table: Vec<Complex64> = (0..grid)
        .map(|r| unit_complex(r as f64 / grid as f64))
        .collect();
    let g = grid as i64;
    let mut values = vec![Complex64::new(0.0, 0.0); total];
    let mut point = vec![0_i64; n];
    for value in values.iter_mut() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in x.coeffs() {
            let mut dot: i64 = 0;
            for (kj, tj) in k.components().iter().zip(point.iter()) {
                dot += kj * tj;
            }
            acc += c * table[dot.rem_euclid(g) as usize];
        }
        *value = acc;
        // Row-major odometer over the grid axes.
        for axis in (0..n).rev() {
            point[axis] += 1;
            if point[axis] < g {
                break;
            }
            point[axis] = 0;
        }
    }
    Ok(GridFunction {
        n,
        grid,
        values,
    })
}

/// Recover the Fourier coefficients `x_k`, `|k|_∞ ≤ radius`, of a sampled
/// function by the inverse transform `x_k = G^{-n} Σ_t f(t) e^{-i k·ξ(t)}`.
///
/// Exact (up to rounding) whenever the sampled function is band-limited with
/// degree below `G - radius` per axis; requires `2·radius < G` so distinct
/// recovered frequencies cannot alias.
pub fn analyze(f: &GridFunction, radius: i64) -> Result<NcElement> {
    if radius < 0 {
        return Err(NctError::InvalidParameter(
            "analysis radius must be nonnegative".into(),
        ));
    }
    let g = f.grid as i64;
    if 2 * radius >= g {
        return Err(NctError::BoxTooSmall(format!(
            "grid {} cannot resolve frequencies up to {radius} without aliasing",
            f.grid
        )));
    }
    let table: Vec<Complex64> = (0..f.grid)
        .map(|r| unit_complex(r as f64 / f.grid as f64))
        .collect();
    let norm = 1.0 / f.values.len() as f64;
    let mut coeffs = Vec::new();
    for k in crate::algebra::box_indices(f.n, radius) {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut point = vec![0_i64; f.n];
        for value in f.values.iter() {
            let mut dot: i64 = 0;
            for (kj, tj) in k.components().iter().zip(point.iter()) {
                dot += kj * tj;
            }
            // e^{-i k·ξ} = conj(table entry)
            acc += value * table[dot.rem_euclid(g) as usize].conj();
            for axis in (0..f.n).rev() {
                point[axis] += 1;
                if point[axis] < g {
                    break;
                }
                point[axis] = 0;
            }
        }
        coeffs.push((k, acc * norm));
    }
    // Rounding dust at unsupported frequencies is part of the signal here;
    // keep every coefficient and let callers compare within tolerance.
    NcElement::from_coeffs(crate::algebra::Theta::zero(f.n)?, coeffs)
}

/// Normalized-integral functional `τ(g(f)) ≈ mean_t g(Re f(t))`.
///
/// The sampled values must be essentially real (selfadjoint input); errors
/// if the imaginary part exceeds 1e-9 against the real scale, or if `g`
/// produces a non-finite value on the sampled range.
pub fn quad_trace(f: &GridFunction, g: impl Fn(f64) -> f64) -> Result<f64> {
    let scale = f
        .values
        .iter()
        .map(|v| v.re.abs())
        .fold(0.0, f64::max);
    if f.max_imag() > 1e-9 * (1.0 + scale) {
        return Err(NctError::NotSelfAdjoint(format!(
            "sampled values are not real: max |Im| = {:.3e}",
            f.max_imag()
        )));
    }
    let mut acc = 0.0;
    for v in &f.values {
        let gv = g(v.re);
        if !gv.is_finite() {
            return Err(NctError::DomainViolation(format!(
                "integrand is not finite at sample value {:.6e}",
                v.re
            )));
        }
        acc += gv;
    }
    Ok(acc / f.values.len() as f64)
}

/// Self-refining quadrature for integrands that are not band-limited.
///
/// Starts at `G = 4·support_radius + 17` per axis and grows `G ← 2G + 1`
/// until two successive estimates differ by less than `1e-9·(1 + |estimate|)`
/// or the point cap is reached (a numerical failure).
pub fn quad_trace_adaptive(x: &NcElement, g: impl Fn(f64) -> f64) -> Result<f64> {
    check_commutative(x)?;
    let r = x.support_radius() as usize;
    let mut grid = 4 * r + 17;
    let mut prev: Option<f64> = None;
    loop {
        if grid_point_count(x.dim(), grid).is_err() {
            return Err(NctError::Numerical(format!(
                "quadrature did not converge within the {MAX_GRID_POINTS}-point cap"
            )));
        }
        let f = synthesize(x, grid)?;
        let est = quad_trace(&f, &g)?;
        if let Some(p) = prev {
            if (est - p).abs() < 1e-9 * (1.0 + est.abs()) {
                return Ok(est);
            }
        }
        prev = Some(est);
        grid = 2 * grid + 1;
    }
}

/// Oracle for `τ(x* x) = ‖x‖²_{L_2}`: the mean of `|f|²`, which is
/// band-limited of degree `2·support_radius`, so one exact grid suffices.
pub fn l2_norm_sq(x: &NcElement) -> Result<f64> {
    check_commutative(x)?;
    let grid = (2 * x.support_radius() as usize + 1).max(3);
    let f = synthesize(x, grid)?;
    let mut acc = 0.0;
    for v in &f.values {
        acc += v.norm_sqr();
    }
    Ok(acc / f.values.len() as f64)
}

/// Oracle for `τ(g(x))` with `g(t) = |t|^p` — the L_p norm raised to p.
pub fn lp_power_trace(x: &NcElement, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(NctError::InvalidParameter(format!(
            "p must be at least 1, got {p}"
        )));
    }
    quad_trace_adaptive(x, |t| t.abs().powf(p))
}

/// Oracle for the entropy functional
/// `Ent(x) = τ(x² log(x² / ‖x‖²_{L_2}))` of a strictly positive element.
///
/// Uses the exact band-limited quadrature for `‖x‖²_{L_2}` and the adaptive
/// grid for the logarithmic integrand. Errors if the sampled function dips
/// below `floor` anywhere (the classical function of a positive element is
/// positive, so this indicates the input was not strictly positive).
pub fn entropy(x: &NcElement, floor: f64) -> Result<f64> {
    check_commutative(x)?;
    let c = l2_norm_sq(x)?;
    if !(c > 0.0) {
        return Err(NctError::PositivityFailure(
            "entropy of the zero element is undefined".into(),
        ));
    }
    // Check positivity on a fine grid once, with the adaptive pass re-checking
    // through the domain guard below.
    let probe = synthesize(x, 4 * x.support_radius() as usize + 17)?;
    if probe.min_real() < floor {
        return Err(NctError::PositivityFailure(format!(
            "sampled function reaches {:.3e}, below the floor {floor:.3e}",
            probe.min_real()
        )));
    }
    quad_trace_adaptive(x, move |t| {
        if t < floor {
            f64::NAN // routed to a domain violation by quad_trace
        } else {
            t * t * (t * t / c).ln()
        }
    })
}
