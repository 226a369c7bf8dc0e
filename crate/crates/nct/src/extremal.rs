//! Extremizer search: maximize entropy-to-norm ratios over strictly positive
//! elements to obtain empirical lower bounds for the optimal constants.
//!
//! Positivity is structural, never checked per iterate: the search runs over
//! selfadjoint logarithms `h` and realizes `x = exp(h)`, whose spectrum is
//! `e^{λ_j} > 0` by construction. Every spectral quantity of `x` is read off
//! the one eigendecomposition of `h`'s truncated matrix; only the Sobolev
//! norm — a Fourier-side quantity — uses the reconstructed coefficients of
//! `exp(h)`, whose truncation tail is reported as a diagnostic.
//!
//! The optimizer is deliberately plain: central finite differences on the
//! parameter vector and backtracking line search with monotone acceptance.
//! Every objective evaluation anywhere in a run — accepted iterates, line
//! search rejects, gradient probes — is a genuine ratio of a genuine element,
//! so the search tracks the running maximum over all of them and reports it
//! as the certified lower bound.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{box_indices, random_selfadjoint, MultiIndex, NcElement, Theta};
use crate::error::{NctError, Result};
use crate::norms::{sobolev_norm, SobolevParams};
use crate::rep::{GnsSpectrum, TruncationBox};

// ---------------------------------------------------------------------------
// Parameterization
// ---------------------------------------------------------------------------

/// Real coordinates for a selfadjoint `h` supported in a box: one real
/// coordinate for the zero mode, then (re, im) pairs for each lex-positive
/// index, with the lex-negative partners forced by the involution. The
/// realized element is `x = exp(h)`.
#[derive(Clone, Debug)]
pub struct Parameterization {
    theta: Theta,
    radius: i64,
    half: Vec<MultiIndex>,
}

fn lex_positive(k: &MultiIndex) -> bool {
    for &c in k.components() {
        if c > 0 {
            return true;
        }
        if c < 0 {
            return false;
        }
    }
    false
}

impl Parameterization {
    pub fn new(theta: Theta, radius: i64) -> Result<Self> {
        if radius < 0 {
            return Err(NctError::InvalidParameter(format!(
                "support radius must be nonnegative, got {radius}"
            )));
        }
        let half: Vec<MultiIndex> = box_indices(theta.dim(), radius)
            .into_iter()
            .filter(lex_positive)
            .collect();
        Ok(Parameterization { theta, radius, half })
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Number of real degrees of freedom: `1 + 2·(half-box size)`.
    pub fn dof(&self) -> usize {
        1 + 2 * self.half.len()
    }

    fn check_coords(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dof() {
            return Err(NctError::InvalidParameter(format!(
                "expected {} coordinates, got {}",
                self.dof(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(NctError::InvalidParameter(
                "coordinates must be finite".into(),
            ));
        }
        Ok(())
    }

    /// The selfadjoint logarithm `h` encoded by a coordinate vector.
    pub fn element(&self, coords: &[f64]) -> Result<NcElement> {
        self.check_coords(coords)?;
        let mut items: Vec<(MultiIndex, Complex64)> = Vec::with_capacity(1 + 2 * self.half.len());
        items.push((
            MultiIndex::new(vec![0; self.theta.dim()]),
            Complex64::new(coords[0], 0.0),
        ));
        for (slot, k) in self.half.iter().enumerate() {
            let z = Complex64::new(coords[1 + 2 * slot], coords[2 + 2 * slot]);
            let phase = self.theta.adjoint_phase(k)?;
            items.push((k.clone(), z));
            items.push((k.neg(), z.conj() * phase));
        }
        NcElement::from_coeffs(self.theta.clone(), items)
    }

    /// Invert [`Parameterization::element`]: read the coordinates of a
    /// selfadjoint element supported in the parameter box. Exact round-trip:
    /// the returned coordinates rebuild the input bitwise.
    pub fn coords_of(&self, h: &NcElement) -> Result<Vec<f64>> {
        if h.theta().dim() != self.theta.dim() {
            return Err(NctError::DimensionMismatch(format!(
                "element lives on a {}-torus, parameterization on a {}-torus",
                h.theta().dim(),
                self.theta.dim()
            )));
        }
        if h.support_radius() > self.radius {
            return Err(NctError::InvalidParameter(format!(
                "element support radius {} exceeds the parameter radius {}",
                h.support_radius(),
                self.radius
            )));
        }
        let defect = h.max_coeff_distance(&h.adjoint());
        if defect > 1e-12 * (1.0 + h.coefficient_l1()) {
            return Err(NctError::NotSelfAdjoint(format!(
                "coefficient involution defect {defect:.3e}"
            )));
        }
        let zero = MultiIndex::new(vec![0; self.theta.dim()]);
        let mut coords = vec![0.0; self.dof()];
        coords[0] = h.coeff(&zero).re;
        for (slot, k) in self.half.iter().enumerate() {
            let z = h.coeff(k);
            coords[1 + 2 * slot] = z.re;
            coords[2 + 2 * slot] = z.im;
        }
        Ok(coords)
    }

    /// Realize `x = exp(h)` as an element, with truncation diagnostics.
    pub fn realize(
        &self,
        coords: &[f64],
        bx: &TruncationBox,
    ) -> Result<(NcElement, crate::rep::TruncationDiagnostics)> {
        let h = self.element(coords)?;
        let spectrum = GnsSpectrum::of(&h, bx)?;
        spectrum.element_of(f64::exp)
    }
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// Which ratio the search maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// `entropy(x) / rhs` of the combined constant-free bound — in `[0, 1]`
    /// up to rounding, probing the tightness of the bound.
    CombinedSlackRatio,
    /// `(entropy(x) + (n/s)(ln a + 1)·‖x‖²_{L_2}) / ‖x‖²_{W_2^s}` — its
    /// supremum is the smallest multiplicative constant for which the final
    /// inequality can hold, so every evaluation is a lower bound.
    TheoremRatio,
}

#[derive(Clone, Copy, Debug)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub params: SobolevParams,
}

/// One objective evaluation with the spectral scalars behind it.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveReport {
    pub objective: f64,
    pub entropy: f64,
    pub l2_sq: f64,
    pub lp_sq: f64,
    pub sobolev_sq: f64,
    /// Extremes of the realized spectrum `e^{λ}` — positive by construction.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Coefficient tail of the reconstructed `exp(h)` (Sobolev-norm input).
    pub tail_mass: f64,
}

/// Evaluate the chosen ratio at a coordinate vector.
///
/// Deterministic for fixed inputs, and invariant under the gauge `x ↦ c·x`
/// (a shift of the zero-mode coordinate by `ln c`): numerator and
/// denominator both scale by `c²`.
pub fn evaluate_objective(
    par: &Parameterization,
    coords: &[f64],
    spec: &ObjectiveSpec,
    bx: &TruncationBox,
) -> Result<f64> {
    evaluate_objective_report(par, coords, spec, bx).map(|r| r.objective)
}

/// [`evaluate_objective`] with the full per-evaluation report.
pub fn evaluate_objective_report(
    par: &Parameterization,
    coords: &[f64],
    spec: &ObjectiveSpec,
    bx: &TruncationBox,
) -> Result<ObjectiveReport> {
    let h = par.element(coords)?;
    let spectrum = GnsSpectrum::of(&h, bx)?;
    let params = &spec.params;
    let eps = params.epsilon();

    // All spectral quantities of x = exp(h) through the spectrum of h. The
    // logarithm of x² is written as 2λ directly, which keeps the entropy
    // finite-safe for large |h| (overflow surfaces as a rejected Numerical
    // evaluation rather than NaN arithmetic).
    let c = spectrum.trace_of(|t| (2.0 * t).exp());
    let ln_c = c.ln();
    let ent = spectrum.trace_of(|t| (2.0 * t).exp() * (2.0 * t - ln_c));
    let moment_p = spectrum.trace_of(|t| ((2.0 * eps + 2.0) * t).exp());
    let lp_sq = moment_p.powf(1.0 / (eps + 1.0));

    let (y, diag) = spectrum.element_of(f64::exp)?;
    let w = sobolev_norm(&y, params.s())?;
    let sobolev_sq = w * w;

    let objective = match spec.kind {
        ObjectiveKind::TheoremRatio => {
            let additive = params.n() as f64 / params.s() * (params.a().ln() + 1.0);
            (ent + additive * c) / sobolev_sq
        }
        ObjectiveKind::CombinedSlackRatio => {
            let b = params.b();
            let rhs = (eps + 1.0) / eps * (b * lp_sq - (b.ln() + 1.0) * c);
            if !(rhs > 0.0) {
                return Err(NctError::Numerical(format!(
                    "combined right side degenerate ({rhs:.3e}), ratio undefined"
                )));
            }
            ent / rhs
        }
    };
    if !objective.is_finite() {
        return Err(NctError::Numerical(
            "objective evaluated to a non-finite value".into(),
        ));
    }
    Ok(ObjectiveReport {
        objective,
        entropy: ent,
        l2_sq: c,
        lp_sq,
        sobolev_sq,
        min_eigenvalue: spectrum.min_eigenvalue().exp(),
        max_eigenvalue: spectrum.max_eigenvalue().exp(),
        tail_mass: diag.tail_mass,
    })
}

// ---------------------------------------------------------------------------
// Gradient ascent
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct AscentConfig {
    pub max_iterations: usize,
    /// First trial step; later trials adapt between `min_step` and `max_step`.
    pub initial_step: f64,
    pub max_step: f64,
    /// Step collapse below this level ends the run with `Converged`.
    pub min_step: f64,
    /// Relative central-difference step for the gradient.
    pub gradient_step: f64,
    /// Gradient norm below which the run stops as `Converged`.
    pub gradient_tolerance: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            max_iterations: 40,
            initial_step: 0.5,
            max_step: 1.0,
            min_step: 1e-12,
            gradient_step: 1e-5,
            gradient_tolerance: 1e-9,
        }
    }
}

impl AscentConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(NctError::InvalidParameter(
                "iteration budget must be at least 1".into(),
            ));
        }
        let ordered = self.min_step > 0.0
            && self.min_step <= self.initial_step
            && self.initial_step <= self.max_step;
        if !ordered || !self.max_step.is_finite() {
            return Err(NctError::InvalidParameter(format!(
                "need 0 < min_step ≤ initial_step ≤ max_step, got {:.3e} / {:.3e} / {:.3e}",
                self.min_step, self.initial_step, self.max_step
            )));
        }
        if !(self.gradient_step > 0.0) || !(self.gradient_tolerance >= 0.0) {
            return Err(NctError::InvalidParameter(
                "gradient step must be positive and the tolerance nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted iterate of an ascent run.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub objective: f64,
    /// Step length that produced this iterate (0 for the starting point).
    pub step_size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AscentStatus {
    /// Gradient tolerance reached or step collapsed below `min_step`.
    Converged,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct AscentOutcome {
    /// Final accepted coordinates and their objective.
    pub coords: Vec<f64>,
    pub objective: f64,
    /// Running maximum over *every* evaluation of the run (gradient probes
    /// and rejected trials included — each is a valid ratio), with the
    /// coordinates that attained it. Never below `objective`.
    pub best_seen: f64,
    pub best_seen_coords: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub status: AscentStatus,
    pub evaluations: usize,
}

/// Track the maximum over every successful objective evaluation.
struct BestTracker {
    value: f64,
    coords: Vec<f64>,
    evaluations: usize,
}

impl BestTracker {
    fn new(dof: usize) -> Self {
        BestTracker {
            value: f64::NEG_INFINITY,
            coords: vec![0.0; dof],
            evaluations: 0,
        }
    }

    fn eval(
        &mut self,
        par: &Parameterization,
        coords: &[f64],
        spec: &ObjectiveSpec,
        bx: &TruncationBox,
    ) -> Option<f64> {
        self.evaluations += 1;
        match evaluate_objective(par, coords, spec, bx) {
            Ok(v) => {
                if v > self.value {
                    self.value = v;
                    self.coords.clear();
                    self.coords.extend_from_slice(coords);
                }
                Some(v)
            }
            Err(_) => None,
        }
    }
}

/// Monotone gradient ascent from a starting coordinate vector: central
/// finite differences, backtracking line search, acceptance only on strict
/// improvement, so the trajectory's objective sequence is nondecreasing.
pub fn ascend(
    par: &Parameterization,
    spec: &ObjectiveSpec,
    start: &[f64],
    bx: &TruncationBox,
    config: &AscentConfig,
) -> Result<AscentOutcome> {
    config.validate()?;
    par.check_coords(start)?;
    let dof = par.dof();
    let mut tracker = BestTracker::new(dof);

    let mut coords = start.to_vec();
    let mut objective = tracker
        .eval(par, &coords, spec, bx)
        .ok_or_else(|| match evaluate_objective(par, &coords, spec, bx) {
            Err(e) => e,
            Ok(_) => NctError::Numerical("starting evaluation failed transiently".into()),
        })?;
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        objective,
        step_size: 0.0,
    }];

    let mut step = config.initial_step;
    let mut status = AscentStatus::BudgetExhausted;
    let mut gradient = vec![0.0; dof];
    let mut probe = coords.clone();

    'outer: for iteration in 1..=config.max_iterations {
        // Central differences; a failed probe contributes no slope.
        for i in 0..dof {
            let delta = config.gradient_step * (1.0 + coords[i].abs());
            probe.copy_from_slice(&coords);
            probe[i] = coords[i] + delta;
            let plus = tracker.eval(par, &probe, spec, bx);
            probe[i] = coords[i] - delta;
            let minus = tracker.eval(par, &probe, spec, bx);
            gradient[i] = match (plus, minus) {
                (Some(p), Some(m)) => (p - m) / (2.0 * delta),
                _ => 0.0,
            };
        }
        let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm <= config.gradient_tolerance {
            status = AscentStatus::Converged;
            break;
        }

        // Backtracking from the adaptive step; accept only improvements.
        loop {
            for i in 0..dof {
                probe[i] = coords[i] + step * gradient[i] / norm;
            }
            if let Some(trial) = tracker.eval(par, &probe, spec, bx) {
                if trial > objective {
                    coords.copy_from_slice(&probe);
                    objective = trial;
                    trajectory.push(TrajectoryPoint {
                        iteration,
                        objective,
                        step_size: step,
                    });
                    step = (2.0 * step).min(config.max_step);
                    break;
                }
            }
            step *= 0.5;
            if step < config.min_step {
                status = AscentStatus::Converged;
                break 'outer;
            }
        }
    }

    Ok(AscentOutcome {
        coords,
        objective,
        best_seen: tracker.value,
        best_seen_coords: tracker.coords,
        trajectory,
        status,
        evaluations: tracker.evaluations,
    })
}

// ---------------------------------------------------------------------------
// Multi-start search
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Random logarithms screened before any ascent.
    pub screen_count: usize,
    /// Best screened candidates promoted to full ascents.
    pub restarts: usize,
    /// Support radius of the sampled logarithms.
    pub sample_radius: i64,
    /// Coefficient decay of the sampler.
    pub decay: f64,
    /// Amplitude grid applied to every sampled logarithm.
    pub scales: Vec<f64>,
    pub seed: u64,
    pub ascent: AscentConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            screen_count: 200,
            restarts: 8,
            sample_radius: 2,
            decay: 2.0,
            scales: vec![0.1, 0.5, 1.0],
            seed: 7,
            ascent: AscentConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// `max` over every evaluation of the whole run — screening included —
    /// hence an empirical lower bound for the optimal constant in the chosen
    /// normalization.
    pub bound: f64,
    pub best_coords: Vec<f64>,
    /// Best screened value before any ascent; `bound ≥ screened_max` is
    /// structural because the top candidate is ascended monotonically.
    pub screened_max: f64,
    pub evaluations: usize,
    pub outcomes: Vec<AscentOutcome>,
}

/// Screen `screen_count × |scales|` random starting logarithms, ascend from
/// the best `restarts` of them in parallel, and return the running maximum
/// over every objective evaluation performed anywhere in the run.
///
/// Deterministic for a fixed config: candidate `i` draws from seed
/// `seed + i`, so enlarging `screen_count` or `restarts` keeps all earlier
/// candidates identical and the bound nondecreasing.
pub fn constant_lower_bound(
    theta: &Theta,
    spec: &ObjectiveSpec,
    bx: &TruncationBox,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    config.ascent.validate()?;
    if config.screen_count == 0 || config.restarts == 0 {
        return Err(NctError::InvalidParameter(
            "screen count and restart count must be at least 1".into(),
        ));
    }
    if config.scales.is_empty() || config.scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(NctError::InvalidParameter(
            "the scale grid must be nonempty with positive finite entries".into(),
        ));
    }
    if config.restarts > config.screen_count * config.scales.len() {
        return Err(NctError::InvalidParameter(format!(
            "{} restarts exceed the {} screened candidates",
            config.restarts,
            config.screen_count * config.scales.len()
        )));
    }
    if !(config.decay > 0.0) {
        return Err(NctError::InvalidParameter(
            "sampler decay must be positive".into(),
        ));
    }
    let par = Parameterization::new(theta.clone(), config.sample_radius)?;

    // Deterministic candidate list: draw i uses seed + i, then the scale grid.
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(config.screen_count * config.scales.len());
    for i in 0..config.screen_count {
        let h = random_selfadjoint(
            theta,
            config.sample_radius,
            config.decay,
            config.seed.wrapping_add(i as u64),
        )?;
        let base = par.coords_of(&h)?;
        for scale in &config.scales {
            candidates.push(base.iter().map(|c| c * scale).collect());
        }
    }

    // Screening pass, parallel over candidates; failures simply drop out.
    let screened: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|coords| evaluate_objective(&par, coords, spec, bx).ok())
        .collect();
    let mut ranked: Vec<(usize, f64)> = screened
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if ranked.is_empty() {
        return Err(NctError::Numerical(
            "no screening candidate produced a finite objective".into(),
        ));
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let screened_max = ranked[0].1;
    let screened_evals = screened.len();
    let take = config.restarts.min(ranked.len());

    let outcomes: Vec<AscentOutcome> = ranked[..take]
        .par_iter()
        .map(|(idx, _)| ascend(&par, spec, &candidates[*idx], bx, &config.ascent))
        .collect::<Result<Vec<_>>>()?;

    let mut bound = screened_max;
    let mut best_coords = candidates[ranked[0].0].clone();
    for outcome in &outcomes {
        if outcome.best_seen > bound {
            bound = outcome.best_seen;
            best_coords = outcome.best_seen_coords.clone();
        }
    }
    let evaluations = screened_evals + outcomes.iter().map(|o| o.evaluations).sum::<usize>();
    Ok(SearchOutcome {
        bound,
        best_coords,
        screened_max,
        evaluations,
        outcomes,
    })
}
