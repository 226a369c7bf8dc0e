//! Truncated left-regular (GNS) representation and spectral functional
//! calculus.
//!
//! The left-regular representation acts on the Fourier basis by
//! `π(x) δ_k = Σ_j x_j λ(j, k) δ_{j+k}`. Compressing to the finite box
//! `[-N, N]^n` gives a matrix whose entry at (row m, column k) is
//! `x_{m-k} · λ(m-k, k)`; for selfadjoint `x` the matrix is Hermitian and a
//! single eigendecomposition yields everything else in the crate:
//!
//! - the discrete spectral measure of `x` in the GNS vector state `δ_0`,
//!   with atoms at the eigenvalues `λ_j` and weights `w_j = |V[0-row, j]|²`
//!   summing to one ([`GnsSpectrum`]);
//! - scalar functionals `τ(g(x)) ≈ Σ_j g(λ_j) w_j` ([`trace_of_function`]);
//! - element-valued functions `g(x)` read off as the coefficient vector
//!   `V g(Λ) V* δ_0` ([`functional_calculus`]).
//!
//! Routing every spectral quantity through this single pathway makes the
//! classical scalar inequalities (Jensen and friends) hold for the computed
//! quantities *by construction* — they are statements about one discrete
//! probability measure — so downstream checks measure the mathematics, not
//! truncation artifacts.

use faer::c64;
use faer::Mat;
use num_complex::Complex64;

use crate::algebra::{box_indices, MultiIndex, NcElement, Theta};
use crate::error::{NctError, Result};

/// Default cap on the truncation matrix side.
pub const DEFAULT_SIDE_CAP: usize = 4096;

/// Default relative margin used by the positivity gate.
pub const DEFAULT_POSITIVITY_MARGIN: f64 = 1e-8;

/// Default floor under logarithms and fractional powers.
pub const DEFAULT_DOMAIN_FLOOR: f64 = 1e-10;

/// Selfadjointness gate, relative to the largest coefficient.
fn check_selfadjoint(x: &NcElement) -> Result<()> {
    let scale = x.coeffs().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    if x.max_coeff_distance(&x.adjoint()) > 1e-12 * (1.0 + scale) {
        return Err(NctError::NotSelfAdjoint(
            "spectral operations require a selfadjoint element".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// TruncationBox
// ---------------------------------------------------------------------------

/// The index box `[-radius, radius]^n` with its fixed lexicographic
/// enumeration; the compression subspace of the GNS truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationBox {
    dimension: usize,
    radius: i64,
    indices: Vec<MultiIndex>,
}

impl TruncationBox {
    /// Build with the default side cap of [`DEFAULT_SIDE_CAP`].
    pub fn new(dimension: usize, radius: i64) -> Result<Self> {
        Self::with_cap(dimension, radius, DEFAULT_SIDE_CAP)
    }

    /// Build with an explicit cap on the matrix side `(2·radius+1)^n`.
    pub fn with_cap(dimension: usize, radius: i64, cap: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(NctError::InvalidParameter(
                "box dimension must be positive".into(),
            ));
        }
        if radius < 0 {
            return Err(NctError::InvalidParameter(format!(
                "box radius must be nonnegative, got {radius}"
            )));
        }
        let per_axis = 2 * radius as u128 + 1;
        let mut side: u128 = 1;
        for _ in 0..dimension {
            side *= per_axis;
            if side > cap as u128 {
                return Err(NctError::SideCapExceeded {
                    side: side.min(usize::MAX as u128) as usize,
                    cap,
                });
            }
        }
        Ok(TruncationBox {
            dimension,
            radius,
            indices: box_indices(dimension, radius),
        })
    }

    /// Default truncation for an element: radius `max(3r, r + 8)` where `r`
    /// is the support radius — enough margin that polynomial functionals up
    /// to degree three are exact and analytic functionals have exponentially
    /// small leakage.
    pub fn default_for(x: &NcElement) -> Result<Self> {
        let r = x.support_radius();
        Self::new(x.dim(), (3 * r).max(r + 8))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Matrix side: the number of box points `(2·radius+1)^n`.
    pub fn side(&self) -> usize {
        self.indices.len()
    }

    /// Box points in the fixed lexicographic enumeration order.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index_at(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    /// Position of `k` in the enumeration, arithmetically.
    pub fn index_of(&self, k: &MultiIndex) -> Option<usize> {
        if k.dim() != self.dimension {
            return None;
        }
        let per_axis = 2 * self.radius + 1;
        let mut idx: usize = 0;
        for &kj in k.components() {
            if kj.abs() > self.radius {
                return None;
            }
            idx = idx * per_axis as usize + (kj + self.radius) as usize;
        }
        Some(idx)
    }

    /// Position of the zero index (the GNS cyclic vector δ_0).
    pub fn center(&self) -> usize {
        self.side() / 2
    }
}

// ---------------------------------------------------------------------------
// GnsOperator
// ---------------------------------------------------------------------------

/// The compression of `π(x)` to a truncation box, with its eigendecomposition
/// once computed.
pub struct GnsOperator {
    bx: TruncationBox,
    matrix: Mat<c64>,
    eigen: Option<EigenPair>,
}

struct EigenPair {
    /// Ascending.
    values: Vec<f64>,
    vectors: Mat<c64>,
}

/// Build the truncated left-regular matrix of `x`: entry
/// `(row m, column k) = x_{m-k} · λ(m-k, k)`.
///
/// Requires the box to contain the support of `x`; a product `x·y` explored
/// through these matrices wanders at most `support_radius` per factor, so
/// callers control truncation error purely through the box margin.
pub fn left_regular_matrix(x: &NcElement, bx: &TruncationBox) -> Result<GnsOperator> {
    if bx.dimension() != x.dim() {
        return Err(NctError::DimensionMismatch(format!(
            "box dimension {} does not match element dimension {}",
            bx.dimension(),
            x.dim()
        )));
    }
    if x.support_radius() > bx.radius() {
        return Err(NctError::BoxTooSmall(format!(
            "support radius {} exceeds box radius {}",
            x.support_radius(),
            bx.radius()
        )));
    }
    let side = bx.side();
    let mut matrix = Mat::<c64>::zeros(side, side);
    let theta = x.theta();
    for (col, k) in bx.indices().iter().enumerate() {
        for (j, &xj) in x.coeffs() {
            let m = j.add(k);
            if let Some(row) = bx.index_of(&m) {
                let phase = theta
                    .structure_phase(j, k)
                    .expect("element indices match theta by construction");
                let v = xj * phase;
                matrix[(row, col)] = c64::new(v.re, v.im);
            }
        }
    }
    Ok(GnsOperator {
        bx: bx.clone(),
        matrix,
        eigen: None,
    })
}

impl GnsOperator {
    pub fn truncation(&self) -> &TruncationBox {
        &self.bx
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        let v = self.matrix[(row, col)];
        Complex64::new(v.re, v.im)
    }

    /// Largest entry magnitude of `A - A†` relative to the largest of `A`.
    pub fn hermitian_defect(&self) -> f64 {
        let side = self.side();
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..side {
            for j in i..side {
                let a = self.matrix[(i, j)];
                let b = self.matrix[(j, i)];
                defect = defect.max((a - b.conj()).norm());
                scale = scale.max(a.norm()).max(b.norm());
            }
        }
        if scale > 0.0 {
            defect / scale
        } else {
            0.0
        }
    }

    /// Hermitian eigendecomposition with eigenvalues sorted ascending.
    ///
    /// Gates on the Hermitian defect (1e-10 relative), then reads the lower
    /// triangle. This is the crate's single dense kernel.
    pub fn eigendecompose(mut self) -> Result<GnsOperator> {
        if self.hermitian_defect() > 1e-10 {
            return Err(NctError::NotSelfAdjoint(format!(
                "matrix is not Hermitian: relative defect {:.3e}",
                self.hermitian_defect()
            )));
        }
        let side = self.side();
        let evd = self
            .matrix
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| NctError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let s = evd.S();
        let u = evd.U();
        let mut order: Vec<usize> = (0..side).collect();
        order.sort_by(|&a, &b| {
            s[a].re
                .partial_cmp(&s[b].re)
                .expect("eigenvalues of a Hermitian matrix are finite")
        });
        let values: Vec<f64> = order.iter().map(|&j| s[j].re).collect();
        let mut vectors = Mat::<c64>::zeros(side, side);
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..side {
                vectors[(row, new_col)] = u[(row, old_col)];
            }
        }
        self.eigen = Some(EigenPair { values, vectors });
        Ok(self)
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigen.as_ref().map(|e| e.values.as_slice())
    }

    pub fn eigenvector_entry(&self, row: usize, col: usize) -> Option<Complex64> {
        self.eigen.as_ref().map(|e| {
            let v = e.vectors[(row, col)];
            Complex64::new(v.re, v.im)
        })
    }
}

// ---------------------------------------------------------------------------
// GnsSpectrum — the single spectral pathway
// ---------------------------------------------------------------------------

/// Eigendata of a selfadjoint element in a truncation box, together with the
/// discrete spectral measure seen by the GNS vector state δ_0.
///
/// Every spectral quantity downstream (traces of functions, L_p norms,
/// entropies, element-valued functional calculus) is computed from this one
/// object, so any two of them are automatically statements about the same
/// discrete probability measure `Σ_j w_j δ_{λ_j}`.
pub struct GnsSpectrum {
    theta: Theta,
    bx: TruncationBox,
    values: Vec<f64>,
    vectors: Mat<c64>,
    weights: Vec<f64>,
}

impl GnsSpectrum {
    /// Decompose a selfadjoint element on the given box.
    pub fn of(x: &NcElement, bx: &TruncationBox) -> Result<Self> {
        check_selfadjoint(x)?;
        let op = left_regular_matrix(x, bx)?.eigendecompose()?;
        let EigenPair { values, vectors } = op.eigen.expect("just decomposed");
        let center = op.bx.center();
        let side = op.bx.side();
        let weights: Vec<f64> = (0..side)
            .map(|j| {
                let v = vectors[(center, j)];
                v.re * v.re + v.im * v.im
            })
            .collect();
        Ok(GnsSpectrum {
            theta: x.theta().clone(),
            bx: op.bx,
            values,
            vectors,
            weights,
        })
    }

    pub fn truncation(&self) -> &TruncationBox {
        &self.bx
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Weights `w_j = |⟨δ_0, v_j⟩|²` of the discrete spectral measure;
    /// nonnegative with `Σ_j w_j = 1` up to roundoff (the δ_0 row of a
    /// unitary matrix has unit norm).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.values.first().expect("boxes are nonempty")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.values.last().expect("boxes are nonempty")
    }

    /// `τ(g(x)) = Σ_j g(λ_j) w_j` under the discrete spectral measure.
    pub fn trace_of(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(self.weights.iter())
            .map(|(&l, &w)| g(l) * w)
            .sum()
    }

    /// The element `g(x)` as seen in this truncation: the coefficient vector
    /// `V g(Λ) V* δ_0`, returned with truncation diagnostics.
    pub fn element_of(&self, g: impl Fn(f64) -> f64) -> Result<(NcElement, TruncationDiagnostics)> {
        let side = self.bx.side();
        let center = self.bx.center();
        // (V* δ_0)_j = conj(V[center, j]); scaled by g(λ_j), recombined.
        let scaled: Vec<Complex64> = (0..side)
            .map(|j| {
                let v = self.vectors[(center, j)];
                let gv = g(self.values[j]);
                Complex64::new(v.re * gv, -v.im * gv)
            })
            .collect();
        let mut coeffs = Vec::with_capacity(side);
        let mut inner_sq = 0.0;
        let mut total_sq = 0.0;
        let half = self.bx.radius() / 2;
        for row in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, s) in scaled.iter().enumerate() {
                let v = self.vectors[(row, j)];
                acc += Complex64::new(v.re, v.im) * s;
            }
            if !acc.re.is_finite() || !acc.im.is_finite() {
                return Err(NctError::Numerical(
                    "functional calculus produced a non-finite coefficient".into(),
                ));
            }
            let k = self.bx.index_at(row);
            total_sq += acc.norm_sqr();
            if k.infinity_norm() <= half {
                inner_sq += acc.norm_sqr();
            }
            coeffs.push((k.clone(), acc));
        }
        let tail_mass = if total_sq > 0.0 {
            ((total_sq - inner_sq).max(0.0) / total_sq).sqrt()
        } else {
            0.0
        };
        let element = NcElement::from_coeffs(self.theta.clone(), coeffs)?;
        Ok((
            element,
            TruncationDiagnostics {
                tail_mass,
                min_eigenvalue: self.min_eigenvalue(),
                max_eigenvalue: self.max_eigenvalue(),
            },
        ))
    }
}

/// Health indicators of a spectral computation.
#[derive(Clone, Copy, Debug)]
pub struct TruncationDiagnostics {
    /// Relative ℓ2 mass of the result's coefficients outside the inner
    /// half-radius box — large values mean the truncation margin was tight.
    pub tail_mass: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

// ---------------------------------------------------------------------------
// SpectralFunction
// ---------------------------------------------------------------------------

/// A scalar function applied through the spectral theorem, with its domain
/// policy.
#[derive(Clone, Debug)]
pub struct SpectralFunction {
    kind: SpectralKind,
    domain_floor: f64,
}

#[derive(Clone, Debug)]
enum SpectralKind {
    Log,
    Exp,
    /// `t^α`; requires positive spectrum unless α is a nonnegative integer.
    Power(f64),
    /// `|t|^p`.
    AbsPower(f64),
}

impl SpectralFunction {
    pub fn log() -> Self {
        SpectralFunction {
            kind: SpectralKind::Log,
            domain_floor: DEFAULT_DOMAIN_FLOOR,
        }
    }

    pub fn exp() -> Self {
        SpectralFunction {
            kind: SpectralKind::Exp,
            domain_floor: DEFAULT_DOMAIN_FLOOR,
        }
    }

    pub fn power(alpha: f64) -> Self {
        SpectralFunction {
            kind: SpectralKind::Power(alpha),
            domain_floor: DEFAULT_DOMAIN_FLOOR,
        }
    }

    pub fn abs_power(p: f64) -> Self {
        SpectralFunction {
            kind: SpectralKind::AbsPower(p),
            domain_floor: DEFAULT_DOMAIN_FLOOR,
        }
    }

    /// Override the positivity floor used by domain checks.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.domain_floor = floor;
        self
    }

    pub fn domain_floor(&self) -> f64 {
        self.domain_floor
    }

    /// Whether the function is only defined on (strictly) positive spectrum.
    pub fn requires_positive(&self) -> bool {
        match &self.kind {
            SpectralKind::Log => true,
            SpectralKind::Exp => false,
            SpectralKind::Power(a) => !(*a >= 0.0 && a.fract() == 0.0),
            SpectralKind::AbsPower(_) => false,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            SpectralKind::Log => t.ln(),
            SpectralKind::Exp => t.exp(),
            SpectralKind::Power(a) => {
                if *a >= 0.0 && a.fract() == 0.0 {
                    t.powi(*a as i32)
                } else {
                    t.powf(*a)
                }
            }
            SpectralKind::AbsPower(p) => t.abs().powf(*p),
        }
    }
}

/// Gate a spectrum against a function's domain policy.
fn check_domain(f: &SpectralFunction, spectrum: &GnsSpectrum) -> Result<()> {
    if f.requires_positive() && spectrum.min_eigenvalue() < f.domain_floor() {
        return Err(NctError::PositivityFailure(format!(
            "spectrum reaches {:.6e}, below the domain floor {:.1e}",
            spectrum.min_eigenvalue(),
            f.domain_floor()
        )));
    }
    Ok(())
}

/// The element `f(x)` computed through the spectral theorem on the box.
pub fn functional_calculus(
    x: &NcElement,
    f: &SpectralFunction,
    bx: &TruncationBox,
) -> Result<(NcElement, TruncationDiagnostics)> {
    let spectrum = GnsSpectrum::of(x, bx)?;
    check_domain(f, &spectrum)?;
    spectrum.element_of(|t| f.eval(t))
}

/// The scalar `τ(f(x))` computed through the spectral theorem on the box.
pub fn trace_of_function(x: &NcElement, f: &SpectralFunction, bx: &TruncationBox) -> Result<f64> {
    let spectrum = GnsSpectrum::of(x, bx)?;
    check_domain(f, &spectrum)?;
    let t = spectrum.trace_of(|t| f.eval(t));
    if !t.is_finite() {
        return Err(NctError::Numerical(
            "trace of function is not finite".into(),
        ));
    }
    Ok(t)
}

/// Outcome of a positivity gate.
#[derive(Clone, Copy, Debug)]
pub struct PositivityReport {
    pub min_eigenvalue: f64,
    pub margin: f64,
    pub passes: bool,
}

/// Check strict positivity of a selfadjoint element by its truncated
/// spectrum: passes when the smallest eigenvalue is at least `margin`.
pub fn strict_positivity_check(
    x: &NcElement,
    bx: &TruncationBox,
    margin: f64,
) -> Result<PositivityReport> {
    let spectrum = GnsSpectrum::of(x, bx)?;
    Ok(PositivityReport {
        min_eigenvalue: spectrum.min_eigenvalue(),
        margin,
        passes: spectrum.min_eigenvalue() >= margin,
    })
}
