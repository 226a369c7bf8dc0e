//! Computational algebra on noncommutative n-tori.
//!
//! The crate implements finitely supported twisted Fourier series over the
//! noncommutative n-torus — unitaries `U_1, …, U_n` obeying
//! `U_k U_j = e^{2πi θ_{jk}} U_j U_k` for a real skew-symmetric matrix θ —
//! together with the numerical machinery needed to study entropy functionals
//! and Sobolev-type inequalities on them:
//!
//! - [`algebra`]: elements, twisted product, involution, trace, torus action,
//!   derivations, and deterministic random samplers;
//! - [`rep`]: finite truncations of the left-regular representation and the
//!   spectral functional calculus built on one Hermitian eigendecomposition;
//! - [`norms`]: L_2, Sobolev `W_2^s`, homogeneous Sobolev, and spectral L_p
//!   norms, plus an empirical Sobolev-embedding constant estimator;
//! - [`logsobolev`]: the entropy functional and the chain of inequalities
//!   connecting it to the embedding constant, checked stage by stage;
//! - [`extremal`]: gradient-ascent search for extremizers of the inequality
//!   ratios, yielding empirical lower bounds for the optimal constants;
//! - [`oracle`]: an independent commutative (θ = 0) quadrature oracle used to
//!   cross-validate every spectral quantity on classical tori.
//!
//! All randomness is seeded and all iteration orders are fixed, so every
//! computation in the crate is bitwise reproducible for a given input.

// Guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`, the negated
// form also rejects NaN, which must never slip past a parameter gate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod extremal;
pub mod logsobolev;
pub mod norms;
pub mod oracle;
pub mod rep;

pub use error::{NctError, Result};
