//! Twisted Fourier algebra of the noncommutative n-torus.
//!
//! Elements are finitely supported Fourier series `x = Σ_k x_k U^k` indexed
//! by `k ∈ Z^n`, where `U^k = U_1^{k_1} ··· U_n^{k_n}` is the normal-ordered
//! word in unitaries obeying `U_k U_j = e^{2πi θ_{jk}} U_j U_k` for a real
//! skew-symmetric matrix θ. Products reduce to normal order through the
//! structure phase `λ(k, m)` and the involution picks up the adjoint phase
//! `A(k)`; both phases are the exponential of an integer bilinear form
//! contracted with θ, so they are computed in closed form.
//!
//! Numerical conventions:
//!
//! - all phases go through [`unit_complex`], which nudges the computed
//!   `(cos, sin)` pair by at most a few ulps so its squared norm is exactly
//!   `1.0` in f64 arithmetic; conjugate phase pairs then cancel to exactly
//!   `1 + 0i`, and phases at exponent `0` are exactly `1 + 0i`, which keeps
//!   the commutative (θ = 0) reduction of every operation bit-exact;
//! - coefficients are stored sparsely in a `BTreeMap`, so all iteration
//!   orders (hence all floating-point summation orders) are fixed by the
//!   lexicographic order of the indices and results are reproducible bitwise;
//! - elements are immutable after construction and safe to share across
//!   threads.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NctError, Result};

const TAU: f64 = std::f64::consts::TAU;

/// Return `e^{2πi·turns}` as a unit complex number whose stored components
/// satisfy `re² + im² == 1.0` exactly in f64 arithmetic whenever such a pair
/// exists within a few ulps of the true point (all but a thin band of angles
/// near quarter turns; the quarter turns themselves are exact).
///
/// The pair produced by `sin_cos` has squared norm within a few ulps of 1;
/// this routine keeps the smaller component — which carries the fine angular
/// information — and re-solves the dominant one through `sqrt(1 - s²)`,
/// searching a few ulps around it for an exact hit of the rounded sum. When
/// the pair is exactly unit, `conj(p) * p == 1 + 0i` holds bitwise, which
/// collapses the phase cancellations behind involution symmetry and keeps
/// unit-phase products from inflating norms systematically. The result is
/// always within 1e-15 of unit modulus and within 1e-14 of the true point.
pub fn unit_complex(turns: f64) -> Complex64 {
    let angle = TAU * (turns - turns.round());
    unit_complex_radians(angle)
}

/// Same as [`unit_complex`] but with the angle given in radians.
pub fn unit_complex_radians(angle: f64) -> Complex64 {
    let (im, re) = angle.sin_cos();
    if re * re + im * im == 1.0 {
        return Complex64::new(re, im);
    }
    let (big, small, big_is_re) = if re.abs() >= im.abs() {
        (re, im, true)
    } else {
        (im, re, false)
    };
    let assemble = |b: f64, s: f64| {
        if big_is_re {
            Complex64::new(b, s)
        } else {
            Complex64::new(s, b)
        }
    };
    // Forward pass: keep the smaller component, re-solve the dominant one.
    let t = 1.0 - small * small;
    if t > 0.0 && t <= 1.0 {
        let base = t.sqrt().copysign(big);
        for db in [0_i64, 1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6, 7, -7, 8, -8] {
            let b = step_ulps(base, db);
            if b * b + small * small == 1.0 {
                return assemble(b, small);
            }
        }
    }
    // Reverse pass for the parity-locked band where the dominant component's
    // squared grid jumps over the target in 2-ulp steps: re-solve the smaller
    // component instead. Only worthwhile while the accuracy cost ~ulp/(2|s|)
    // stays far below the 1e-14 placement contract.
    if small.abs() >= 0.012 {
        for db in [0_i64, 1, -1, 2, -2] {
            let b = step_ulps(big, db);
            let r = 1.0 - b * b;
            if !(r > 0.0 && r < 1.0) {
                continue;
            }
            let base = r.sqrt().copysign(small);
            for ds in [0_i64, 1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6, 7, -7, 8, -8] {
                let s = step_ulps(base, ds);
                if b * b + s * s == 1.0 {
                    return assemble(b, s);
                }
            }
        }
    }
    // Deep parity-locked corner (tiny minority component): the unadjusted
    // pair, off unit modulus by at most one rounding, is more accurate than
    // any exactly-unit neighbor here.
    Complex64::new(re, im)
}

/// Step a finite f64 by `n` ulps along the monotone ordering of floats.
fn step_ulps(x: f64, n: i64) -> f64 {
    let b = x.to_bits() as i64;
    let ordered = if b < 0 { i64::MIN.wrapping_sub(b) } else { b };
    let stepped = ordered + n;
    let bits = if stepped < 0 {
        i64::MIN.wrapping_sub(stepped)
    } else {
        stepped
    };
    f64::from_bits(bits as u64)
}

// ---------------------------------------------------------------------------
// Theta
// ---------------------------------------------------------------------------

/// Real skew-symmetric twist matrix of a noncommutative n-torus.
///
/// Skew-symmetry is exact as stored: `entry(j, k) == -entry(k, j)` holds with
/// `==` on the f64 values and the diagonal is exactly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThetaWire", into = "ThetaWire")]
pub struct Theta {
    n: usize,
    /// Row-major n×n entries.
    entries: Vec<f64>,
}

impl Theta {
    /// Build from full rows, validating shape and exact skew-symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(NctError::InvalidParameter(format!(
                "torus dimension must be at least 2, got {n}"
            )));
        }
        let mut entries = vec![0.0; n * n];
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(NctError::DimensionMismatch(format!(
                    "theta row {j} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (k, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(NctError::InvalidParameter(format!(
                        "theta entry ({j},{k}) is not finite"
                    )));
                }
                entries[j * n + k] = v;
            }
        }
        for j in 0..n {
            if entries[j * n + j] != 0.0 {
                return Err(NctError::InvalidParameter(format!(
                    "theta diagonal entry ({j},{j}) must be exactly 0"
                )));
            }
            for k in (j + 1)..n {
                if entries[j * n + k] != -entries[k * n + j] {
                    return Err(NctError::InvalidParameter(format!(
                        "theta is not exactly skew-symmetric at ({j},{k})"
                    )));
                }
            }
        }
        Ok(Theta { n, entries })
    }

    /// Build from the strict upper triangle (row-major order); the lower
    /// triangle is the exact negation, so skew-symmetry holds by
    /// construction.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(NctError::InvalidParameter(format!(
                "torus dimension must be at least 2, got {n}"
            )));
        }
        let expected = n * (n - 1) / 2;
        if upper.len() != expected {
            return Err(NctError::DimensionMismatch(format!(
                "expected {expected} strict upper-triangle entries for n = {n}, got {}",
                upper.len()
            )));
        }
        let mut entries = vec![0.0; n * n];
        let mut it = upper.iter();
        for j in 0..n {
            for k in (j + 1)..n {
                let v = *it.next().expect("length checked above");
                if !v.is_finite() {
                    return Err(NctError::InvalidParameter(format!(
                        "theta entry ({j},{k}) is not finite"
                    )));
                }
                entries[j * n + k] = v;
                entries[k * n + j] = -v;
            }
        }
        Ok(Theta { n, entries })
    }

    /// The zero twist: an ordinary commutative n-torus.
    pub fn zero(n: usize) -> Result<Self> {
        Self::from_upper(n, &vec![0.0; n * (n - 1) / 2])
    }

    /// Two-torus with `θ_{12} = theta`.
    pub fn two_torus(theta: f64) -> Result<Self> {
        Self::from_upper(2, &[theta])
    }

    /// Random twist with independent strict-upper entries uniform in (0, 1);
    /// such entries are irrational with probability one.
    pub fn random_skew(n: usize, rng: &mut impl Rng) -> Result<Self> {
        let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.gen::<f64>()).collect();
        Self::from_upper(n, &upper)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Matrix entry `θ_{jk}` with zero-based indices.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        assert!(j < self.n && k < self.n, "theta index out of range");
        self.entries[j * self.n + k]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// Exponent of the structure phase, in turns (units of 2π):
    /// `σ(k, m) = Σ_{j<i} θ_{ji} k_i m_j`.
    ///
    /// This is the integer bilinear form produced by normal-ordering the word
    /// `U^k U^m`: each generator `U_i` of the left factor must cross every
    /// generator `U_j` with `j < i` of the right factor.
    fn ordering_turns(&self, k: &MultiIndex, m: &MultiIndex) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..n {
            for i in (j + 1)..n {
                acc += self.entries[j * n + i] * (k.0[i] as f64) * (m.0[j] as f64);
            }
        }
        acc
    }

    fn check_len(&self, k: &MultiIndex) -> Result<()> {
        if k.dim() != self.n {
            return Err(NctError::DimensionMismatch(format!(
                "index length {} does not match torus dimension {}",
                k.dim(),
                self.n
            )));
        }
        Ok(())
    }

    /// Unit phase `λ(k, m)` in `U^k · U^m = λ(k, m) · U^{k+m}`.
    pub fn structure_phase(&self, k: &MultiIndex, m: &MultiIndex) -> Result<Complex64> {
        self.check_len(k)?;
        self.check_len(m)?;
        Ok(unit_complex(self.ordering_turns(k, m)))
    }

    /// Unit phase `A(k)` in `(U^k)* = A(k) · U^{-k}`.
    ///
    /// Normal-ordering `(U^k)* = U_n^{-k_n} ··· U_1^{-k_1}` into `U^{-k}`
    /// crosses the same generator pairs as `U^k · U^k`, so `A(k)` equals the
    /// structure phase at `(k, k)`. Since the exponent is even in `k`, the
    /// computed `A(-k)` is bitwise equal to `A(k)`, which is exactly the
    /// cancellation that makes the involution an involution.
    pub fn adjoint_phase(&self, k: &MultiIndex) -> Result<Complex64> {
        self.check_len(k)?;
        Ok(unit_complex(self.ordering_turns(k, k)))
    }
}

#[derive(Serialize, Deserialize)]
struct ThetaWire {
    n: usize,
    entries: Vec<Vec<f64>>,
}

impl From<Theta> for ThetaWire {
    fn from(t: Theta) -> Self {
        let rows = (0..t.n)
            .map(|j| t.entries[j * t.n..(j + 1) * t.n].to_vec())
            .collect();
        ThetaWire {
            n: t.n,
            entries: rows,
        }
    }
}

impl TryFrom<ThetaWire> for Theta {
    type Error = NctError;
    fn try_from(w: ThetaWire) -> Result<Self> {
        if w.entries.len() != w.n {
            return Err(NctError::Serialization(format!(
                "theta record declares n = {} but has {} rows",
                w.n,
                w.entries.len()
            )));
        }
        Theta::from_rows(&w.entries)
    }
}

// ---------------------------------------------------------------------------
// MultiIndex
// ---------------------------------------------------------------------------

/// Frequency index `k ∈ Z^n`. Ordering is lexicographic, which fixes all map
/// iteration orders in the crate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<i64>);

impl MultiIndex {
    pub fn new(components: Vec<i64>) -> Self {
        MultiIndex(components)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn component(&self, i: usize) -> i64 {
        self.0[i]
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn neg(&self) -> MultiIndex {
        MultiIndex(self.0.iter().map(|a| -a).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `max_i |k_i|`.
    pub fn infinity_norm(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    /// `|k|² = Σ_i k_i²` as an f64 (exact for all indices in practical range).
    pub fn euclid_sq(&self) -> f64 {
        self.0.iter().map(|&a| (a * a) as f64).sum()
    }

    /// True when the first nonzero component is positive; singles out one
    /// member of each pair `{k, -k}` with `k ≠ 0`.
    pub fn is_lex_positive(&self) -> bool {
        for &a in &self.0 {
            if a != 0 {
                return a > 0;
            }
        }
        false
    }
}

/// All indices of the box `[-radius, radius]^n` in lexicographic order.
pub fn box_indices(n: usize, radius: i64) -> Vec<MultiIndex> {
    assert!(radius >= 0, "box radius must be nonnegative");
    let side = (2 * radius + 1) as usize;
    let count = side.pow(n as u32);
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![-radius; n];
    loop {
        out.push(MultiIndex(cur.clone()));
        // Odometer increment on the last axis, carrying leftward: yields
        // lexicographic order.
        let mut axis = n;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < radius {
                cur[axis] += 1;
                for c in cur.iter_mut().skip(axis + 1) {
                    *c = -radius;
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// ActionVector
// ---------------------------------------------------------------------------

/// Angle vector `s ∈ R^n` of the torus action `α_s(U^k) = e^{i s·k} U^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(components: Vec<f64>) -> Self {
        ActionVector(components)
    }

    pub fn zero(n: usize) -> Self {
        ActionVector(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    /// `s · k` in radians.
    fn dot(&self, k: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(k.components())
            .map(|(s, &ki)| s * ki as f64)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// NcElement
// ---------------------------------------------------------------------------

/// Finitely supported element `x = Σ_k x_k U^k` of the twisted Fourier
/// algebra over a fixed [`Theta`].
///
/// Absent indices mean coefficient zero; exact zeros are pruned on
/// construction so the stored support is the true support. All stored
/// coefficients are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementWire", into = "ElementWire")]
pub struct NcElement {
    theta: Theta,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

impl NcElement {
    pub fn zero(theta: Theta) -> Self {
        NcElement {
            theta,
            coeffs: BTreeMap::new(),
        }
    }

    /// The multiplicative identity `U^0`.
    pub fn one(theta: Theta) -> Self {
        let k = MultiIndex::zero(theta.dim());
        let mut coeffs = BTreeMap::new();
        coeffs.insert(k, Complex64::new(1.0, 0.0));
        NcElement { theta, coeffs }
    }

    /// The single-term element `c · U^k`.
    pub fn monomial(theta: Theta, k: MultiIndex, c: Complex64) -> Result<Self> {
        theta.check_len(&k)?;
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(NctError::InvalidParameter(
                "coefficient must be finite".into(),
            ));
        }
        let mut coeffs = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            coeffs.insert(k, c);
        }
        Ok(NcElement { theta, coeffs })
    }

    /// Build from (index, coefficient) pairs; duplicate indices accumulate.
    pub fn from_coeffs(
        theta: Theta,
        items: impl IntoIterator<Item = (MultiIndex, Complex64)>,
    ) -> Result<Self> {
        let mut coeffs: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (k, c) in items {
            theta.check_len(&k)?;
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(NctError::InvalidParameter(format!(
                    "coefficient at {:?} is not finite",
                    k.components()
                )));
            }
            *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(NcElement { theta, coeffs })
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// Coefficient at `k` (zero when absent).
    pub fn coeff(&self, k: &MultiIndex) -> Complex64 {
        self.coeffs
            .get(k)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Supported (index, coefficient) pairs in lexicographic index order.
    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Maximal infinity norm over supported indices (0 for the zero element).
    pub fn support_radius(&self) -> i64 {
        self.coeffs
            .keys()
            .map(|k| k.infinity_norm())
            .max()
            .unwrap_or(0)
    }

    /// `Σ_k |x_k|`: dominates the operator norm of `x` in every GNS
    /// truncation, which is what makes shifted samplers provably positive.
    pub fn coefficient_l1(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    fn check_same_theta(&self, other: &NcElement) -> Result<()> {
        if self.theta != other.theta {
            return Err(NctError::ThetaMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &NcElement) -> Result<NcElement> {
        self.check_same_theta(other)?;
        let mut coeffs = self.coeffs.clone();
        for (k, &c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(NcElement {
            theta: self.theta.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &NcElement) -> Result<NcElement> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> NcElement {
        let mut coeffs: BTreeMap<MultiIndex, Complex64> = self
            .coeffs
            .iter()
            .map(|(k, &v)| (k.clone(), v * c))
            .collect();
        coeffs.retain(|_, v| *v != Complex64::new(0.0, 0.0));
        NcElement {
            theta: self.theta.clone(),
            coeffs,
        }
    }

    /// Twisted convolution `(x·y)_m = Σ_k x_k y_{m-k} λ(k, m-k)`.
    ///
    /// At θ = 0 every phase is exactly `1 + 0i`, so this reduces bit-exactly
    /// to the ordinary coefficient convolution.
    pub fn multiply(&self, other: &NcElement) -> Result<NcElement> {
        self.check_same_theta(other)?;
        let mut coeffs: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (k, &xk) in &self.coeffs {
            for (l, &yl) in &other.coeffs {
                let phase = unit_complex(self.theta.ordering_turns(k, l));
                let m = k.add(l);
                *coeffs.entry(m).or_insert(Complex64::new(0.0, 0.0)) += xk * yl * phase;
            }
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(NcElement {
            theta: self.theta.clone(),
            coeffs,
        })
    }

    /// The involution `x* = Σ_k conj(x_k) A(k) U^{-k}`, i.e. coefficientwise
    /// `(x*)_{-k} = conj(x_k) · adjoint_phase(k)`.
    ///
    /// Because `A(-k)` is computed bitwise equal to `A(k)` and the phases are
    /// exactly unit, a double involution reproduces each coefficient up to at
    /// most one rounding of the phase product in each component (bit-exact
    /// whenever the phase is exactly `1 + 0i`, in particular at θ = 0 and on
    /// the `k = 0` coefficient).
    pub fn adjoint(&self) -> NcElement {
        let mut coeffs = BTreeMap::new();
        for (k, &c) in &self.coeffs {
            let phase = unit_complex(self.theta.ordering_turns(k, k));
            let v = c.conj() * phase;
            if v != Complex64::new(0.0, 0.0) {
                coeffs.insert(k.neg(), v);
            }
        }
        NcElement {
            theta: self.theta.clone(),
            coeffs,
        }
    }

    /// The tracial state: `τ(x) = x_0`.
    pub fn trace(&self) -> Complex64 {
        self.coeff(&MultiIndex::zero(self.dim()))
    }

    /// GNS inner product `⟨x, y⟩ = τ(x y*) = Σ_k x_k conj(y_k)` (Parseval).
    pub fn inner_product(&self, other: &NcElement) -> Result<Complex64> {
        self.check_same_theta(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        // Iterate the (sparser) support of self in index order.
        for (k, &xk) in &self.coeffs {
            let yk = other.coeff(k);
            acc += xk * yk.conj();
        }
        Ok(acc)
    }

    /// Torus action `α_s(x)_k = e^{i s·k} x_k`.
    pub fn apply_action(&self, s: &ActionVector) -> Result<NcElement> {
        if s.dim() != self.dim() {
            return Err(NctError::DimensionMismatch(format!(
                "action vector length {} does not match torus dimension {}",
                s.dim(),
                self.dim()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(k, &c)| (k.clone(), c * unit_complex_radians(s.dot(k))))
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .collect();
        Ok(NcElement {
            theta: self.theta.clone(),
            coeffs,
        })
    }

    /// Partial derivation `∂_axis(x)_k = i k_axis x_k` (zero-based axis).
    pub fn derivation(&self, axis: usize) -> Result<NcElement> {
        if axis >= self.dim() {
            return Err(NctError::DimensionMismatch(format!(
                "axis {} out of range for torus dimension {}",
                axis,
                self.dim()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|(k, &c)| {
                let v = c * Complex64::new(0.0, k.component(axis) as f64);
                (k.clone(), v)
            })
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .collect();
        Ok(NcElement {
            theta: self.theta.clone(),
            coeffs,
        })
    }

    /// True when `x* = x` within coefficientwise absolute tolerance `tol`.
    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        self.max_coeff_distance(&self.adjoint()) <= tol
    }

    /// Largest coefficientwise absolute difference against `other`
    /// (infinity over the union of supports).
    pub fn max_coeff_distance(&self, other: &NcElement) -> f64 {
        let mut m: f64 = 0.0;
        for (k, &c) in &self.coeffs {
            m = m.max((c - other.coeff(k)).norm());
        }
        for (k, &c) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                m = m.max(c.norm());
            }
        }
        m
    }

    /// Coefficientwise comparison with absolute tolerance.
    pub fn approx_eq(&self, other: &NcElement, tol: f64) -> bool {
        self.theta == other.theta && self.max_coeff_distance(other) <= tol
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("element serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<NcElement> {
        serde_json::from_str(s).map_err(|e| NctError::Serialization(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct ElementWire {
    theta: Theta,
    coeffs: Vec<(Vec<i64>, f64, f64)>,
}

impl From<NcElement> for ElementWire {
    fn from(x: NcElement) -> Self {
        let coeffs = x
            .coeffs
            .iter()
            .map(|(k, c)| (k.components().to_vec(), c.re, c.im))
            .collect();
        ElementWire {
            theta: x.theta,
            coeffs,
        }
    }
}

impl TryFrom<ElementWire> for NcElement {
    type Error = NctError;
    fn try_from(w: ElementWire) -> Result<Self> {
        NcElement::from_coeffs(
            w.theta,
            w.coeffs
                .into_iter()
                .map(|(k, re, im)| (MultiIndex::new(k), Complex64::new(re, im))),
        )
    }
}

// ---------------------------------------------------------------------------
// Random samplers
// ---------------------------------------------------------------------------

/// Uniform sample from the closed unit disk, by rejection from the square.
fn disk_sample(rng: &mut impl Rng) -> Complex64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let v: f64 = rng.gen_range(-1.0..=1.0);
        if u * u + v * v <= 1.0 {
            return Complex64::new(u, v);
        }
    }
}

/// Deterministic selfadjoint sample with rapidly decaying coefficients.
///
/// Free coefficients are drawn uniformly from the unit disk scaled by the
/// decay profile `(1 + |k|²)^{-decay}` on the lexicographically positive half
/// of the box `[-radius, radius]^n` (plus a real coefficient at `k = 0`);
/// partners at `-k` are set to `conj(x_k) · adjoint_phase(k)`, so the result
/// is selfadjoint by construction: the involution reproduces every partner
/// coefficient bitwise and every free coefficient to within one rounding of
/// the unit-phase product.
pub fn random_selfadjoint(theta: &Theta, radius: i64, decay: f64, seed: u64) -> Result<NcElement> {
    if radius < 0 {
        return Err(NctError::InvalidParameter(format!(
            "radius must be nonnegative, got {radius}"
        )));
    }
    if !(decay > 0.0) {
        return Err(NctError::InvalidParameter(format!(
            "decay must be positive, got {decay}"
        )));
    }
    let n = theta.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();

    let c0: f64 = rng.gen_range(-1.0..=1.0);
    if c0 != 0.0 {
        coeffs.insert(MultiIndex::zero(n), Complex64::new(c0, 0.0));
    }
    for k in box_indices(n, radius) {
        if !k.is_lex_positive() {
            continue;
        }
        let profile = (1.0 + k.euclid_sq()).powf(-decay);
        let z = disk_sample(&mut rng) * profile;
        if z == Complex64::new(0.0, 0.0) {
            continue;
        }
        let phase = unit_complex(theta.ordering_turns(&k, &k));
        coeffs.insert(k.neg(), z.conj() * phase);
        coeffs.insert(k, z);
    }
    Ok(NcElement {
        theta: theta.clone(),
        coeffs,
    })
}

/// Deterministic strictly positive sample: a selfadjoint draw shifted by
/// `(Σ_k |h_k| + floor) · U^0`.
///
/// The coefficient ℓ1 norm dominates the operator norm of `h` in the
/// left-regular representation and in every compression of it, so the result
/// has spectrum bounded below by `floor` in every GNS truncation.
pub fn random_strictly_positive(
    theta: &Theta,
    radius: i64,
    decay: f64,
    seed: u64,
    floor: f64,
) -> Result<NcElement> {
    if !(floor > 0.0) {
        return Err(NctError::InvalidParameter(format!(
            "floor must be positive, got {floor}"
        )));
    }
    let h = random_selfadjoint(theta, radius, decay, seed)?;
    let shift = h.coefficient_l1() + floor;
    let one = NcElement::monomial(
        theta.clone(),
        MultiIndex::zero(theta.dim()),
        Complex64::new(shift, 0.0),
    )?;
    h.add(&one)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mi(k: &[i64]) -> MultiIndex {
        MultiIndex::new(k.to_vec())
    }

    fn mono(theta: &Theta, k: &[i64], v: Complex64) -> NcElement {
        NcElement::monomial(theta.clone(), mi(k), v).unwrap()
    }

    // -- unit_complex ------------------------------------------------------

    #[test]
    fn unit_complex_is_exactly_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut exact_hits = 0_u32;
        let total = 10_000_u32;
        for _ in 0..total {
            let turns: f64 = rng.gen_range(-50.0..50.0);
            let p = unit_complex(turns);
            let sq = p.re * p.re + p.im * p.im;
            // Unit modulus within one rounding always.
            assert!((sq - 1.0).abs() <= 3e-16, "off unit at turns = {turns}");
            // Nudging must stay within a hair of the true point.
            let exact = Complex64::new(
                (TAU * (turns - turns.round())).cos(),
                (TAU * (turns - turns.round())).sin(),
            );
            assert!((p - exact).norm() < 1e-14);
            if sq == 1.0 {
                exact_hits += 1;
                // Conjugate pairs collapse to exactly one.
                assert_eq!(p.conj() * p, c(1.0, 0.0));
            }
        }
        // Exactness is achieved except in a thin parity-locked band near
        // quarter turns.
        assert!(
            exact_hits as f64 >= 0.995 * total as f64,
            "only {exact_hits}/{total} draws produced an exactly unit pair"
        );
    }

    #[test]
    fn unit_complex_special_angles() {
        assert_eq!(unit_complex(0.0), c(1.0, 0.0));
        assert_eq!(unit_complex(1.0), c(1.0, 0.0));
        assert_eq!(unit_complex(-3.0), c(1.0, 0.0));
        let i = unit_complex(0.25);
        assert!((i - c(0.0, 1.0)).norm() < 1e-15);
        let m1 = unit_complex(0.5);
        assert!((m1 - c(-1.0, 0.0)).norm() < 1e-15);
    }

    // -- Theta -------------------------------------------------------------

    #[test]
    fn theta_validation() {
        assert!(Theta::from_rows(&[vec![0.0, 0.3], vec![-0.3, 0.0]]).is_ok());
        // Not skew.
        assert!(Theta::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).is_err());
        // Nonzero diagonal.
        assert!(Theta::from_rows(&[vec![0.1, 0.3], vec![-0.3, 0.0]]).is_err());
        // Ragged.
        assert!(Theta::from_rows(&[vec![0.0, 0.3], vec![-0.3]]).is_err());
        // Dimension 1 is not a noncommutative torus.
        assert!(Theta::from_rows(&[vec![0.0]]).is_err());

        let t = Theta::two_torus(0.25).unwrap();
        assert_eq!(t.entry(0, 1), 0.25);
        assert_eq!(t.entry(1, 0), -0.25);
        assert_eq!(t.dim(), 2);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Theta::random_skew(4, &mut rng).unwrap();
        for j in 0..4 {
            assert_eq!(r.entry(j, j), 0.0);
            for k in 0..4 {
                assert_eq!(r.entry(j, k), -r.entry(k, j));
            }
        }
    }

    // -- structure_phase / adjoint_phase ------------------------------------

    #[test]
    fn structure_phase_two_torus_relation() {
        // U_2 U_1 = e^{2πiθ} U_1 U_2: the phase appears when the left factor's
        // generator index exceeds the right factor's.
        let theta = 0.137;
        let t = Theta::two_torus(theta).unwrap();
        let u2u1 = t.structure_phase(&mi(&[0, 1]), &mi(&[1, 0])).unwrap();
        let expect = unit_complex(theta);
        assert!((u2u1 - expect).norm() < 1e-15);
        // The normally ordered direction picks up no phase.
        let u1u2 = t.structure_phase(&mi(&[1, 0]), &mi(&[0, 1])).unwrap();
        assert_eq!(u1u2, c(1.0, 0.0));
        // k = 0 never produces a phase.
        let any = t.structure_phase(&mi(&[0, 0]), &mi(&[3, -2])).unwrap();
        assert_eq!(any, c(1.0, 0.0));
        // (1,1)·(1,1) crosses exactly one pair.
        let d = t.structure_phase(&mi(&[1, 1]), &mi(&[1, 1])).unwrap();
        assert!((d - unit_complex(theta)).norm() < 1e-15);
    }

    #[test]
    fn structure_phase_dimension_mismatch() {
        let t = Theta::two_torus(0.1).unwrap();
        assert!(t.structure_phase(&mi(&[1, 0, 0]), &mi(&[0, 1])).is_err());
        assert!(t.adjoint_phase(&mi(&[1])).is_err());
    }

    #[test]
    fn cocycle_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 2 + (trial % 3) as usize;
            let t = Theta::random_skew(n, &mut rng).unwrap();
            let draw = |rng: &mut ChaCha8Rng| {
                MultiIndex::new((0..n).map(|_| rng.gen_range(-4..=4)).collect())
            };
            let k = draw(&mut rng);
            let m = draw(&mut rng);
            let r = draw(&mut rng);
            let lhs = t.structure_phase(&k, &m).unwrap()
                * t.structure_phase(&k.add(&m), &r).unwrap();
            let rhs = t.structure_phase(&k, &m.add(&r)).unwrap()
                * t.structure_phase(&m, &r).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    // -- Clock-and-shift micro-oracle ---------------------------------------
    //
    // At rational θ = p/q the two-torus relations are realized by concrete
    // q×q matrices: the cyclic shift S (for U_1) and the clock C (for U_2),
    // which satisfy C S = e^{2πip/q} S C. Brute-force matrix products then
    // give the structure and adjoint phases with no reference to the closed
    // forms under test.

    #[derive(Clone)]
    struct SmallMat {
        q: usize,
        a: Vec<Complex64>,
    }

    impl SmallMat {
        fn zeros(q: usize) -> Self {
            SmallMat {
                q,
                a: vec![Complex64::new(0.0, 0.0); q * q],
            }
        }
        fn eye(q: usize) -> Self {
            let mut m = Self::zeros(q);
            for i in 0..q {
                m.a[i * q + i] = Complex64::new(1.0, 0.0);
            }
            m
        }
        fn shift(q: usize) -> Self {
            // S e_j = e_{j+1 mod q}
            let mut m = Self::zeros(q);
            for j in 0..q {
                m.a[((j + 1) % q) * q + j] = Complex64::new(1.0, 0.0);
            }
            m
        }
        fn clock(q: usize, p: i64) -> Self {
            // C e_j = ω^j e_j with ω = e^{2πip/q}
            let mut m = Self::zeros(q);
            for j in 0..q {
                m.a[j * q + j] = unit_complex(p as f64 * j as f64 / q as f64);
            }
            m
        }
        fn mul(&self, o: &SmallMat) -> SmallMat {
            let q = self.q;
            let mut m = SmallMat::zeros(q);
            for i in 0..q {
                for j in 0..q {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in 0..q {
                        acc += self.a[i * q + l] * o.a[l * q + j];
                    }
                    m.a[i * q + j] = acc;
                }
            }
            m
        }
        fn dagger(&self) -> SmallMat {
            let q = self.q;
            let mut m = SmallMat::zeros(q);
            for i in 0..q {
                for j in 0..q {
                    m.a[i * q + j] = self.a[j * q + i].conj();
                }
            }
            m
        }
        fn pow(&self, e: i64) -> SmallMat {
            let base = if e >= 0 { self.clone() } else { self.dagger() };
            let mut out = SmallMat::eye(self.q);
            for _ in 0..e.abs() {
                out = out.mul(&base);
            }
            out
        }
        fn max_abs_entry(&self) -> (usize, f64) {
            let mut best = (0, 0.0);
            for (i, v) in self.a.iter().enumerate() {
                if v.norm() > best.1 {
                    best = (i, v.norm());
                }
            }
            best
        }
    }

    /// Ratio (lhs entry)/(rhs entry) at rhs's largest entry: the unit phase
    /// by which two proportional unitary-word matrices differ.
    fn phase_ratio(lhs: &SmallMat, rhs: &SmallMat) -> Complex64 {
        let (i, mag) = rhs.max_abs_entry();
        assert!(mag > 0.5, "word matrix unexpectedly small");
        lhs.a[i] / rhs.a[i]
    }

    #[test]
    fn clock_shift_oracle_for_phases() {
        for &(p, q) in &[(1_i64, 2_i64), (1, 3), (3, 4), (2, 5)] {
            let t = Theta::two_torus(p as f64 / q as f64).unwrap();
            let s = SmallMat::shift(q as usize);
            let cmat = SmallMat::clock(q as usize, p);
            // Sanity: C S = ω S C.
            let omega = unit_complex(p as f64 / q as f64);
            let cs = cmat.mul(&s);
            let sc = s.mul(&cmat);
            assert!((phase_ratio(&cs, &sc) - omega).norm() < 1e-12);

            let word = |k: &MultiIndex| s.pow(k.component(0)).mul(&cmat.pow(k.component(1)));
            let indices = box_indices(2, 2);
            for k in &indices {
                // Adjoint phase: (U^k)† = A(k) U^{-k}.
                let lhs = word(k).dagger();
                let rhs = word(&k.neg());
                let oracle = phase_ratio(&lhs, &rhs);
                let claimed = t.adjoint_phase(k).unwrap();
                assert!(
                    (oracle - claimed).norm() < 1e-12,
                    "adjoint phase mismatch at p/q = {p}/{q}, k = {:?}",
                    k.components()
                );
                for m in &indices {
                    // Structure phase: U^k U^m = λ(k,m) U^{k+m}.
                    let lhs = word(k).mul(&word(m));
                    let rhs = word(&k.add(m));
                    let oracle = phase_ratio(&lhs, &rhs);
                    let claimed = t.structure_phase(k, m).unwrap();
                    assert!(
                        (oracle - claimed).norm() < 1e-12,
                        "structure phase mismatch at p/q = {p}/{q}, k = {:?}, m = {:?}",
                        k.components(),
                        m.components()
                    );
                }
            }
        }
    }

    // -- multiply ------------------------------------------------------------

    #[test]
    fn multiply_identity_and_monomials() {
        let t = Theta::two_torus(0.377).unwrap();
        let x = mono(&t, &[3, -2], c(0.5, 1.5));
        let one = NcElement::one(t.clone());
        assert_eq!(x.multiply(&one).unwrap(), x);
        assert_eq!(one.multiply(&x).unwrap(), x);

        // Quarter twist: U^{(0,1)} U^{(1,0)} = e^{πi/2} U^{(1,1)} = i U^{(1,1)}.
        let t4 = Theta::two_torus(0.25).unwrap();
        let u01 = mono(&t4, &[0, 1], c(1.0, 0.0));
        let u10 = mono(&t4, &[1, 0], c(1.0, 0.0));
        let prod = u01.multiply(&u10).unwrap();
        assert_eq!(prod.support_len(), 1);
        assert!((prod.coeff(&mi(&[1, 1])) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn multiply_commutative_reduction_is_exact() {
        // θ = 0: twisted convolution degenerates to plain convolution, exactly.
        let t0 = Theta::zero(2).unwrap();
        let x = mono(&t0, &[1, 0], c(1.0, 0.0))
            .add(&mono(&t0, &[-1, 0], c(1.0, 0.0)))
            .unwrap();
        let sq = x.multiply(&x).unwrap();
        let expected = NcElement::from_coeffs(
            t0.clone(),
            [
                (mi(&[2, 0]), c(1.0, 0.0)),
                (mi(&[0, 0]), c(2.0, 0.0)),
                (mi(&[-2, 0]), c(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(sq, expected);

        // Random pair against a hand-rolled commutative convolution.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = random_selfadjoint(&t0, 2, 1.0, 91).unwrap();
        let b = random_selfadjoint(&t0, 2, 1.0, 92).unwrap();
        let mut conv: BTreeMap<MultiIndex, Complex64> = BTreeMap::new();
        for (k, &ak) in a.coeffs() {
            for (l, &bl) in b.coeffs() {
                *conv.entry(k.add(l)).or_insert(c(0.0, 0.0)) += ak * bl;
            }
        }
        let prod = a.multiply(&b).unwrap();
        for (k, &v) in &conv {
            assert_eq!(prod.coeff(k), v, "mismatch at {:?}", k.components());
        }
        let _ = rng.gen::<u64>();
    }

    #[test]
    fn multiply_support_radius_subadditive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let t = Theta::random_skew(2, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 100 + trial).unwrap();
            let y = random_selfadjoint(&t, 3, 1.0, 200 + trial).unwrap();
            let p = x.multiply(&y).unwrap();
            assert!(p.support_radius() <= x.support_radius() + y.support_radius());
        }
    }

    #[test]
    fn associativity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..50 {
            let n = 2 + (trial % 2) as usize;
            let t = Theta::random_skew(n, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 300 + trial).unwrap();
            let y = random_selfadjoint(&t, 2, 1.0, 400 + trial).unwrap();
            let z = random_selfadjoint(&t, 2, 1.0, 500 + trial).unwrap();
            let left = x.multiply(&y).unwrap().multiply(&z).unwrap();
            let right = x.multiply(&y.multiply(&z).unwrap()).unwrap();
            assert!(
                left.max_coeff_distance(&right) < 1e-12,
                "associativity violated at trial {trial}"
            );
        }
    }

    // -- involution ----------------------------------------------------------

    #[test]
    fn involution_examples() {
        let t0 = Theta::zero(2).unwrap();
        let one = NcElement::one(t0.clone());
        assert_eq!(one.adjoint(), one);

        let x = mono(&t0, &[1, 0], c(0.0, 1.0));
        let expected = mono(&t0, &[-1, 0], c(0.0, -1.0));
        assert_eq!(x.adjoint(), expected);

        // Quarter twist: (U^{(1,1)})* = e^{πi/2} U^{(-1,-1)}.
        let t4 = Theta::two_torus(0.25).unwrap();
        let u11 = mono(&t4, &[1, 1], c(1.0, 0.0));
        let adj = u11.adjoint();
        assert_eq!(adj.support_len(), 1);
        assert!((adj.coeff(&mi(&[-1, -1])) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn involution_is_involutive_and_antimultiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for trial in 0..50 {
            let n = 2 + (trial % 3) as usize;
            let t = Theta::random_skew(n, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 600 + trial)
                .unwrap()
                .scale(c(0.7, -0.4));
            let xss = x.adjoint().adjoint();
            // Phases are exactly unit, so a double involution reproduces each
            // coefficient to within one rounding of a unit rotation.
            let scale = x.coeffs().map(|(_, v)| v.norm()).fold(0.0, f64::max);
            assert!(
                xss.max_coeff_distance(&x) <= 1e-15 * scale,
                "involution² drifted at trial {trial}"
            );

            let y = random_selfadjoint(&t, 2, 1.0, 700 + trial)
                .unwrap()
                .scale(c(-0.3, 0.9));
            let lhs = x.multiply(&y).unwrap().adjoint();
            let rhs = y.adjoint().multiply(&x.adjoint()).unwrap();
            assert!(lhs.max_coeff_distance(&rhs) < 1e-12);
        }
    }

    #[test]
    fn involution_is_l2_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..20 {
            let t = Theta::random_skew(3, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 800 + trial)
                .unwrap()
                .scale(c(0.2, 1.1));
            let n2 = |e: &NcElement| -> f64 { e.coeffs().map(|(_, v)| v.norm_sqr()).sum() };
            assert!((n2(&x) - n2(&x.adjoint())).abs() < 1e-12 * (1.0 + n2(&x)));
        }
    }

    // -- trace / inner product ------------------------------------------------

    #[test]
    fn trace_examples_and_traciality() {
        let t = Theta::two_torus(0.3).unwrap();
        assert_eq!(mono(&t, &[1, 0], c(5.0, 0.0)).trace(), c(0.0, 0.0));
        assert_eq!(NcElement::one(t.clone()).trace(), c(1.0, 0.0));
        let x = mono(&t, &[0, 0], c(3.0, 0.0))
            .add(&mono(&t, &[1, 0], c(5.0, 0.0)))
            .unwrap();
        assert_eq!(x.trace(), c(3.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for trial in 0..100 {
            let n = 2 + (trial % 2) as usize;
            let t = Theta::random_skew(n, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 900 + trial).unwrap();
            let y = random_selfadjoint(&t, 2, 1.0, 1000 + trial).unwrap();
            let xy = x.multiply(&y).unwrap().trace();
            let yx = y.multiply(&x).unwrap().trace();
            assert!((xy - yx).norm() < 1e-12, "traciality failed at {trial}");
        }
    }

    #[test]
    fn inner_product_parseval() {
        let t = Theta::two_torus(0.41).unwrap();
        let u_k = mono(&t, &[2, -1], c(1.0, 0.0));
        let u_m = mono(&t, &[1, 1], c(1.0, 0.0));
        assert_eq!(u_k.inner_product(&u_m).unwrap(), c(0.0, 0.0));
        assert_eq!(u_k.inner_product(&u_k).unwrap(), c(1.0, 0.0));

        let x = mono(&t, &[0, 0], c(2.0, 0.0))
            .add(&mono(&t, &[0, 1], c(0.0, 1.0)))
            .unwrap();
        let y = mono(&t, &[0, 1], c(1.0, 0.0));
        assert_eq!(x.inner_product(&y).unwrap(), c(0.0, 1.0));

        // τ(x x*) = Σ |x_k|² through the product, not just by fiat.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for trial in 0..100 {
            let n = 2 + (trial % 2) as usize;
            let t = Theta::random_skew(n, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 1100 + trial)
                .unwrap()
                .scale(c(0.8, 0.3));
            let via_product = x.multiply(&x.adjoint()).unwrap().trace();
            let parseval: f64 = x.coeffs().map(|(_, v)| v.norm_sqr()).sum();
            assert!((via_product - c(parseval, 0.0)).norm() < 1e-12);
            assert!((x.inner_product(&x).unwrap() - c(parseval, 0.0)).norm() < 1e-15);
        }
    }

    // -- action / derivation ---------------------------------------------------

    #[test]
    fn action_examples_and_isometry() {
        let t = Theta::two_torus(0.2).unwrap();
        let x = mono(&t, &[1, 0], c(1.0, 0.0));
        assert_eq!(x.apply_action(&ActionVector::zero(2)).unwrap(), x);

        let rotated = x
            .apply_action(&ActionVector::new(vec![std::f64::consts::PI, 0.0]))
            .unwrap();
        assert!((rotated.coeff(&mi(&[1, 0])) - c(-1.0, 0.0)).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for trial in 0..20 {
            let t = Theta::random_skew(2, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 1200 + trial).unwrap();
            let s = ActionVector::new(vec![rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0)]);
            let y = x.apply_action(&s).unwrap();
            let n2 = |e: &NcElement| -> f64 { e.coeffs().map(|(_, v)| v.norm_sqr()).sum() };
            assert!((n2(&x) - n2(&y)).abs() < 1e-12 * (1.0 + n2(&x)));
        }

        assert!(x.apply_action(&ActionVector::zero(3)).is_err());
    }

    #[test]
    fn derivation_examples_and_leibniz() {
        let t = Theta::two_torus(0.5).unwrap();
        let one = NcElement::one(t.clone());
        assert!(one.derivation(0).unwrap().is_zero());

        let x = mono(&t, &[3, 5], c(1.0, 0.0));
        let d2 = x.derivation(1).unwrap();
        assert_eq!(d2.coeff(&mi(&[3, 5])), c(0.0, 5.0));
        assert!(x.derivation(2).is_err());

        // Monomial Leibniz is exact: each side is a single product of exact
        // integer factors with the same phase.
        let u = mono(&t, &[1, 0], c(1.0, 0.0));
        let v = mono(&t, &[0, 1], c(1.0, 0.0));
        for axis in 0..2 {
            let lhs = u.multiply(&v).unwrap().derivation(axis).unwrap();
            let rhs = u
                .derivation(axis)
                .unwrap()
                .multiply(&v)
                .unwrap()
                .add(&u.multiply(&v.derivation(axis).unwrap()).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }

        // Random Leibniz within rounding.
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for trial in 0..25 {
            let t = Theta::random_skew(3, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.0, 1300 + trial).unwrap();
            let y = random_selfadjoint(&t, 2, 1.0, 1400 + trial).unwrap();
            for axis in 0..3 {
                let lhs = x.multiply(&y).unwrap().derivation(axis).unwrap();
                let rhs = x
                    .derivation(axis)
                    .unwrap()
                    .multiply(&y)
                    .unwrap()
                    .add(&x.multiply(&y.derivation(axis).unwrap()).unwrap())
                    .unwrap();
                assert!(lhs.max_coeff_distance(&rhs) < 1e-13);
            }
            // τ(∂_j x) = 0 exactly: the k = 0 coefficient is annihilated.
            assert_eq!(x.derivation(0).unwrap().trace(), c(0.0, 0.0));
        }
    }

    // -- samplers ---------------------------------------------------------------

    #[test]
    fn random_selfadjoint_contract() {
        let t = Theta::two_torus(0.7183).unwrap();

        // radius 0: a real multiple of U^0.
        let x0 = random_selfadjoint(&t, 0, 2.0, 4).unwrap();
        assert!(x0.support_radius() == 0);
        assert_eq!(x0.coeff(&mi(&[0, 0])).im, 0.0);

        // Determinism.
        let a = random_selfadjoint(&t, 3, 2.0, 99).unwrap();
        let b = random_selfadjoint(&t, 3, 2.0, 99).unwrap();
        assert_eq!(a, b);
        let c2 = random_selfadjoint(&t, 3, 2.0, 100).unwrap();
        assert_ne!(a, c2);

        // Selfadjointness: partner coefficients are reproduced bitwise by the
        // involution; free coefficients to within one unit-phase rounding.
        let adj = a.adjoint();
        assert!(adj.max_coeff_distance(&a) < 1e-15);
        for (k, &v) in a.coeffs() {
            if !k.is_lex_positive() {
                assert_eq!(adj.coeff(k), v, "partner slot not bitwise at {:?}", k);
            }
        }

        // Decay profile bound.
        for (k, v) in a.coeffs() {
            let bound = (1.0 + k.euclid_sq()).powf(-2.0);
            assert!(v.norm() <= bound * (1.0 + 1e-15));
        }
    }

    #[test]
    fn random_strictly_positive_shifts_until_dominant() {
        let t = Theta::two_torus(0.31).unwrap();
        let x = random_strictly_positive(&t, 2, 2.0, 5, 1e-6).unwrap();
        assert!(x.is_selfadjoint(1e-14));
        // The constant coefficient strictly dominates the rest of the ℓ1 mass.
        let rest: f64 = x
            .coeffs()
            .filter(|(k, _)| !k.is_zero())
            .map(|(_, v)| v.norm())
            .sum();
        assert!(x.trace().re > rest);
        assert!(random_strictly_positive(&t, 2, 2.0, 5, 0.0).is_err());
    }

    #[test]
    fn sampler_rejects_bad_parameters() {
        let t = Theta::two_torus(0.1).unwrap();
        assert!(random_selfadjoint(&t, -1, 2.0, 0).is_err());
        assert!(random_selfadjoint(&t, 2, 0.0, 0).is_err());
    }

    // -- serialization -------------------------------------------------------

    #[test]
    fn wire_roundtrip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for trial in 0..10 {
            let n = 2 + (trial % 3) as usize;
            let t = Theta::random_skew(n, &mut rng).unwrap();
            let x = random_selfadjoint(&t, 2, 1.5, 1500 + trial)
                .unwrap()
                .scale(c(1.0 / 3.0, -0.123456789));
            let json = x.to_json();
            let back = NcElement::from_json(&json).unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn wire_rejects_invalid_records() {
        assert!(NcElement::from_json("not json").is_err());
        // Non-skew theta inside the record.
        let bad = r#"{"theta":{"n":2,"entries":[[0.0,0.5],[0.5,0.0]]},"coeffs":[]}"#;
        assert!(NcElement::from_json(bad).is_err());
        // Index length mismatch.
        let bad2 = r#"{"theta":{"n":2,"entries":[[0.0,0.5],[-0.5,0.0]]},"coeffs":[[[1],1.0,0.0]]}"#;
        assert!(NcElement::from_json(bad2).is_err());
        // Non-finite coefficient.
        let bad3 = r#"{"theta":{"n":2,"entries":[[0.0,0.5],[-0.5,0.0]]},"coeffs":[[[1,0],null,0.0]]}"#;
        assert!(NcElement::from_json(bad3).is_err());
    }

    // -- box enumeration ------------------------------------------------------

    #[test]
    fn box_indices_order_and_count() {
        let idx = box_indices(2, 1);
        assert_eq!(idx.len(), 9);
        assert_eq!(idx[0], mi(&[-1, -1]));
        assert_eq!(idx[4], mi(&[0, 0]));
        assert_eq!(idx[8], mi(&[1, 1]));
        // Strictly increasing in lexicographic order.
        for w in idx.windows(2) {
            assert!(w[0] < w[1]);
        }
        // Half-box symmetry: lex-positive and lex-negative halves pair up.
        let pos: Vec<_> = idx.iter().filter(|k| k.is_lex_positive()).collect();
        assert_eq!(pos.len(), 4);
        for k in pos {
            assert!(!k.neg().is_lex_positive());
        }
    }
}
