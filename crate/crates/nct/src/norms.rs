//! Norms on the noncommutative torus and the empirical Sobolev embedding
//! constant.
//!
//! The L2, Sobolev, and homogeneous Sobolev norms are Parseval sums over the
//! coefficient lattice and need no truncation. The Lp norms go through the
//! spectral pathway of [`crate::rep`] (`‖x‖_p = τ(|x|^p)^{1/p}` on the
//! eigenvalues of the truncated left-regular matrix), which narrows them to
//! selfadjoint elements — every element the inequality chain touches is in
//! fact strictly positive.
//!
//! The embedding constant estimator reports a run-scoped empirical supremum,
//! never a certified operator norm: the underlying embedding theorem is
//! nonconstructive, so the estimate's only contracts are determinism,
//! monotonicity in the sample count, and domination of every ratio in its own
//! run.

use crate::algebra::{NcElement, Theta};
use crate::error::{NctError, Result};
use crate::rep::{trace_of_function, SpectralFunction, TruncationBox};

/// The parameter bundle `(n, s, a)` of the inequality together with the
/// derived exponents, computed once so that `s`, `p`, `ε`, and `b` can never
/// drift apart across modules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevParams {
    n: usize,
    s: f64,
    a: f64,
    p: f64,
    epsilon: f64,
    b: f64,
}

impl SobolevParams {
    /// Validate `0 < s < n/2`, `a > 0` and derive `p = 2n/(n-2s)`,
    /// `ε = p/2 - 1`, `b = e·a²`.
    pub fn new(n: usize, s: f64, a: f64) -> Result<Self> {
        if n < 2 {
            return Err(NctError::InvalidParameter(format!(
                "dimension must be at least 2, got {n}"
            )));
        }
        if !s.is_finite() || !(s > 0.0) || !(s < n as f64 / 2.0) {
            return Err(NctError::InvalidParameter(format!(
                "order s must satisfy 0 < s < n/2 = {}, got {s}",
                n as f64 / 2.0
            )));
        }
        if !a.is_finite() || !(a > 0.0) {
            return Err(NctError::InvalidParameter(format!(
                "scale a must be positive, got {a}"
            )));
        }
        let nf = n as f64;
        let p = 2.0 * nf / (nf - 2.0 * s);
        // Dividing by two is exact, so 2ε + 2 == p in floating point.
        let epsilon = p / 2.0 - 1.0;
        let b = std::f64::consts::E * a * a;
        Ok(SobolevParams {
            n,
            s,
            a,
            p,
            epsilon,
            b,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// The embedding exponent `p = 2n/(n-2s)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `ε` with `2ε + 2 = p`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `b = e·a²`.
    pub fn b(&self) -> f64 {
        self.b
    }
}

/// `‖x‖_{L_2} = (Σ_k |x_k|²)^{1/2}` by Parseval.
pub fn l2_norm(x: &NcElement) -> f64 {
    x.coeffs()
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `‖x‖_{W_2^s} = (Σ_k (1+|k|²)^s |x_k|²)^{1/2}` for `s ≥ 0`.
pub fn sobolev_norm(x: &NcElement, s: f64) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(NctError::InvalidParameter(format!(
            "Sobolev order must be nonnegative, got {s}"
        )));
    }
    Ok(x.coeffs()
        .map(|(k, c)| (1.0 + k.euclid_sq()).powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// `‖x‖_{Ẇ_2^s} = (Σ_k |k|^{2s} |x_k|²)^{1/2}` for `s > 0`; the zero mode
/// contributes nothing, so this vanishes exactly on multiples of the
/// identity. Implemented for exploration only — no inequality in this crate
/// uses it.
pub fn homogeneous_sobolev_norm(x: &NcElement, s: f64) -> Result<f64> {
    if !s.is_finite() || !(s > 0.0) {
        return Err(NctError::InvalidParameter(format!(
            "homogeneous Sobolev order must be positive, got {s}"
        )));
    }
    Ok(x.coeffs()
        .map(|(k, c)| {
            if k.is_zero() {
                0.0
            } else {
                k.euclid_sq().powf(s) * c.norm_sqr()
            }
        })
        .sum::<f64>()
        .sqrt())
}

/// `‖x‖_{L_p} = τ(|x|^p)^{1/p}` for selfadjoint `x` and `p ≥ 1`, through the
/// spectral pathway.
pub fn lp_norm(x: &NcElement, p: f64, bx: &TruncationBox) -> Result<f64> {
    if !p.is_finite() || !(p >= 1.0) {
        return Err(NctError::InvalidParameter(format!(
            "p must be at least 1, got {p}"
        )));
    }
    let power = trace_of_function(x, &SpectralFunction::abs_power(p), bx)?;
    Ok(power.max(0.0).powf(1.0 / p))
}

/// `‖x‖_{L_p} / ‖x‖_{W_2^s}` at the exponents of `params`.
pub fn embedding_ratio(
    x: &NcElement,
    params: &SobolevParams,
    bx: &TruncationBox,
) -> Result<f64> {
    if x.is_zero() {
        return Err(NctError::InvalidParameter(
            "embedding ratio of the zero element is undefined".into(),
        ));
    }
    let numerator = lp_norm(x, params.p(), bx)?;
    let denominator = sobolev_norm(x, params.s())?;
    Ok(numerator / denominator)
}

/// Sample plan for the embedding estimator: `count` draws at coefficient
/// `radius` and decay profile `decay`, seeded so that sample `i` depends only
/// on `(seed, i)`.
#[derive(Clone, Copy, Debug)]
pub struct SamplerConfig {
    pub count: usize,
    pub radius: i64,
    pub decay: f64,
    pub seed: u64,
}

/// Enumerate the estimator's sample set: sample 0 is the identity witness
/// `U^0`, samples `1..count` are selfadjoint draws keyed by `seed + i`.
pub fn embedding_samples(
    theta: &Theta,
    config: &SamplerConfig,
) -> Result<Vec<NcElement>> {
    if config.count == 0 {
        return Err(NctError::InvalidParameter(
            "embedding estimation needs at least one sample".into(),
        ));
    }
    let mut samples = Vec::with_capacity(config.count);
    samples.push(NcElement::one(theta.clone()));
    for i in 1..config.count {
        samples.push(crate::algebra::random_selfadjoint(
            theta,
            config.radius,
            config.decay,
            config.seed.wrapping_add(i as u64),
        )?);
    }
    Ok(samples)
}

/// Empirical embedding constant `Ĉ(n,s)`: the squared supremum of
/// [`embedding_ratio`] over the sample set of [`embedding_samples`].
///
/// The square puts the estimate in the squared-norm convention of the final
/// display (`‖x‖²_{L_p} ≤ Ĉ·‖x‖²_{W_2^s}`). The identity witness pins the
/// supremum at ≥ 1, so the squared estimate still dominates every unsquared
/// ratio in the run.
pub fn estimate_embedding_constant(
    theta: &Theta,
    params: &SobolevParams,
    config: &SamplerConfig,
    bx: &TruncationBox,
) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for x in embedding_samples(theta, config)? {
        sup = sup.max(embedding_ratio(&x, params, bx)?);
    }
    Ok(sup * sup)
}
