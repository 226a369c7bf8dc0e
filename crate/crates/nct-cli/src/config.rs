//! Layered run configuration: built-in defaults, then a TOML config file,
//! then command-line flags, with flags winning field by field. The resolved
//! [`RunConfig`] is validated up front (bad values exit with code 2 before
//! any output directory is created) and echoed verbatim into every run
//! directory as `config.json`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use nct::algebra::Theta;
use nct::norms::SobolevParams;
use nct::rep::TruncationBox;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_N: usize = 2;
pub const DEFAULT_S: f64 = 0.5;
pub const DEFAULT_A: f64 = 1.0;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_RADIUS: i64 = 2;
pub const DEFAULT_DECAY: f64 = 1.5;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_FLOOR: f64 = 0.05;
pub const DEFAULT_SAFETY: f64 = 1.0;
pub const DEFAULT_L: i64 = 1;

/// Attempts per sample before a positivity rejection becomes a run failure.
pub const RETRY_CAP: usize = 8;

// ---------------------------------------------------------------------------
// Error classification
// ---------------------------------------------------------------------------

/// Configuration or usage mistake; the process exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Exit code for a failed run: 2 for configuration and usage mistakes
/// (including library-side parameter rejections), 1 for everything else —
/// numerical breakdowns and mid-run failures.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<nct::NctError>() {
            return if e.is_usage() { 2 } else { 1 };
        }
    }
    1
}

// ---------------------------------------------------------------------------
// Substream conventions
// ---------------------------------------------------------------------------

/// Sample `i` of a run draws from the substream `seed + 1 + i`; the bare
/// `seed` is reserved for the structure matrix when `--theta random`.
/// Prefixes are stable: growing the sample count never reseeds earlier
/// samples.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(1).wrapping_add(index)
}

/// Deterministic resampling after a positivity rejection: attempt `j` shifts
/// the high bits so retries never collide with other samples' substreams.
pub fn retry_seed(base: u64, attempt: u64) -> u64 {
    base.wrapping_add(attempt << 32)
}

// ---------------------------------------------------------------------------
// Layered partial configuration
// ---------------------------------------------------------------------------

/// One layer of settings: every field optional. The TOML config file
/// deserializes into this shape (unknown keys are rejected), and the
/// command-line flags produce another instance layered on top.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub a: Option<f64>,
    pub samples: Option<usize>,
    pub radius: Option<i64>,
    pub decay: Option<f64>,
    pub seed: Option<u64>,
    pub theta: Option<String>,
    pub box_margin: Option<i64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub floor: Option<f64>,
    pub safety: Option<f64>,
    pub threads: Option<usize>,
    pub l: Option<i64>,
    pub a_grid: Option<Vec<f64>>,
    pub restarts: Option<usize>,
    pub budget: Option<usize>,
    pub screen: Option<usize>,
    pub objective: Option<String>,
    pub scales: Option<Vec<f64>>,
}

impl PartialConfig {
    /// Layer `self` over `base`: present fields of `self` win.
    fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            n: self.n.or(base.n),
            s: self.s.or(base.s),
            a: self.a.or(base.a),
            samples: self.samples.or(base.samples),
            radius: self.radius.or(base.radius),
            decay: self.decay.or(base.decay),
            seed: self.seed.or(base.seed),
            theta: self.theta.or(base.theta),
            box_margin: self.box_margin.or(base.box_margin),
            out: self.out.or(base.out),
            tol: self.tol.or(base.tol),
            floor: self.floor.or(base.floor),
            safety: self.safety.or(base.safety),
            threads: self.threads.or(base.threads),
            l: self.l.or(base.l),
            a_grid: self.a_grid.or(base.a_grid),
            restarts: self.restarts.or(base.restarts),
            budget: self.budget.or(base.budget),
            screen: self.screen.or(base.screen),
            objective: self.objective.or(base.objective),
            scales: self.scales.or(base.scales),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Verify,
    Embed,
    Extremal,
    Ks,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Embed => "embed",
            CommandKind::Extremal => "extremal",
            CommandKind::Ks => "ks",
        }
    }
}

/// Fully resolved, validated run configuration. Serialized as `config.json`
/// in the run directory; identical configs (same seed included) reproduce
/// identical `results.csv` bytes.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub schema: u32,
    pub command: CommandKind,
    pub version: String,
    pub n: usize,
    pub s: f64,
    pub a: f64,
    pub samples: usize,
    pub radius: i64,
    pub decay: f64,
    pub seed: u64,
    /// How θ was specified: "zero", "random", or the path that was loaded.
    pub theta_spec: String,
    /// The resolved structure matrix itself.
    pub theta: Theta,
    /// Resolved truncation radius after applying the box policy.
    pub box_radius: i64,
    pub box_margin: Option<i64>,
    pub tol: f64,
    pub floor: f64,
    pub safety: f64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screen: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
}

/// Load the optional config file, layer the flags on top, and validate.
pub fn resolve(
    command: CommandKind,
    config_path: Option<&Path>,
    flags: PartialConfig,
) -> Result<RunConfig> {
    let file = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
            toml::from_str::<PartialConfig>(&text)
                .map_err(|e| usage(format!("config file {}: {e}", path.display())))?
        }
        None => PartialConfig::default(),
    };
    build(command, flags.over(file))
}

fn check_positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v <= 0.0 || !v.is_finite() {
        return Err(usage(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn build(command: CommandKind, m: PartialConfig) -> Result<RunConfig> {
    let n = m.n.unwrap_or(DEFAULT_N);
    let s = m.s.unwrap_or(DEFAULT_S);
    let a = m.a.unwrap_or(DEFAULT_A);
    let samples = m.samples.unwrap_or(DEFAULT_SAMPLES);
    let radius = m.radius.unwrap_or(DEFAULT_RADIUS);
    let decay = m.decay.unwrap_or(match command {
        CommandKind::Extremal => 2.0,
        _ => DEFAULT_DECAY,
    });
    let seed = m.seed.unwrap_or(DEFAULT_SEED);
    let tol = m.tol.unwrap_or(nct::logsobolev::DEFAULT_RELATIVE_TOL);
    let floor = m.floor.unwrap_or(DEFAULT_FLOOR);
    let safety = m.safety.unwrap_or(DEFAULT_SAFETY);
    let out = m.out.unwrap_or_else(|| PathBuf::from("runs"));

    if radius < 0 {
        return Err(usage(format!("radius must be nonnegative, got {radius}")));
    }
    check_positive_finite("decay", decay)?;
    check_positive_finite("tol", tol)?;
    check_positive_finite("floor", floor)?;
    check_positive_finite("safety", safety)?;
    if m.threads == Some(0) {
        return Err(usage("threads must be at least 1"));
    }

    // The Sobolev parameters gate (n, s, a) for every command that uses them;
    // failing here keeps bad runs from creating an output directory.
    if command != CommandKind::Ks {
        SobolevParams::new(n, s, a)?;
    }

    // Command-specific settings.
    let l = match command {
        CommandKind::Ks => {
            if n != 2 {
                return Err(usage(format!(
                    "the special-form family lives on the 2-torus; got n = {n}"
                )));
            }
            let l = m.l.unwrap_or(DEFAULT_L);
            if l == 0 {
                return Err(usage("the winding parameter l must be nonzero"));
            }
            Some(l)
        }
        _ => None,
    };
    if command == CommandKind::Embed && samples == 0 {
        return Err(usage(
            "embed needs at least one sample (sample 0 is the identity witness)",
        ));
    }

    let (a_grid, restarts, budget, screen, objective, scales) =
        if command == CommandKind::Extremal {
            let grid = m.a_grid.unwrap_or_else(|| vec![a]);
            if grid.is_empty() {
                return Err(usage("a_grid must contain at least one value"));
            }
            for &g in &grid {
                // Validates 0 < s < n/2 against each grid point as well.
                SobolevParams::new(n, s, g)?;
            }
            let restarts = m.restarts.unwrap_or(8);
            let budget = m.budget.unwrap_or(40);
            let screen = m.screen.unwrap_or(200);
            if restarts == 0 || budget == 0 || screen == 0 {
                return Err(usage("restarts, budget, and screen must be at least 1"));
            }
            let objective = m.objective.unwrap_or_else(|| "theorem".to_string());
            if objective != "theorem" && objective != "combined" {
                return Err(usage(format!(
                    "objective must be \"theorem\" or \"combined\", got \"{objective}\""
                )));
            }
            let scales = m.scales.unwrap_or_else(|| vec![0.1, 0.5, 1.0]);
            if scales.is_empty() {
                return Err(usage("scales must contain at least one value"));
            }
            for &sc in &scales {
                check_positive_finite("scale", sc)?;
            }
            (
                Some(grid),
                Some(restarts),
                Some(budget),
                Some(screen),
                Some(objective),
                Some(scales),
            )
        } else {
            (None, None, None, None, None, None)
        };

    // Resolve θ after the cheap gates, so file errors surface with the rest
    // of the usage errors.
    let theta_spec = m.theta.unwrap_or_else(|| "random".to_string());
    let theta = resolve_theta(&theta_spec, n, seed)?;

    // Truncation policy: the support radius of what the run decomposes,
    // widened by the explicit margin or by the default rule max(3r, r + 8).
    let support = match command {
        CommandKind::Ks => radius * l.expect("set above").abs().max(1),
        _ => radius,
    };
    let box_radius = match m.box_margin {
        Some(margin) => {
            if margin < 0 {
                return Err(usage(format!(
                    "box_margin must be nonnegative, got {margin}"
                )));
            }
            support + margin
        }
        None => (3 * support).max(support + 8),
    };
    // Fail the side cap now rather than after the run directory exists.
    TruncationBox::new(n, box_radius)?;

    Ok(RunConfig {
        schema: crate::output::SCHEMA_VERSION,
        command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        n,
        s,
        a,
        samples,
        radius,
        decay,
        seed,
        theta_spec,
        theta,
        box_radius,
        box_margin: m.box_margin,
        tol,
        floor,
        safety,
        threads: m.threads,
        out,
        l,
        a_grid,
        restarts,
        budget,
        screen,
        objective,
        scales,
    })
}

fn resolve_theta(spec: &str, n: usize, seed: u64) -> Result<Theta> {
    match spec {
        "zero" => Ok(Theta::zero(n)?),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Theta::random_skew(n, &mut rng)?)
        }
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("theta file {path}: {e}")))?;
            let theta: Theta = serde_json::from_str(&text)
                .map_err(|e| usage(format!("theta file {path}: {e}")))?;
            if theta.dim() != n {
                return Err(usage(format!(
                    "theta file {path} has dimension {}, but n = {n}",
                    theta.dim()
                )));
            }
            Ok(theta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn flags() -> PartialConfig {
        PartialConfig::default()
    }

    #[test]
    fn defaults_fill_every_field() {
        let cfg = resolve(CommandKind::Verify, None, flags()).unwrap();
        assert_eq!(cfg.n, DEFAULT_N);
        assert_eq!(cfg.s, DEFAULT_S);
        assert_eq!(cfg.samples, DEFAULT_SAMPLES);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.theta_spec, "random");
        assert_eq!(cfg.theta.dim(), 2);
        // Default policy for radius 2: max(6, 10).
        assert_eq!(cfg.box_radius, 10);
        assert_eq!(cfg.tol, nct::logsobolev::DEFAULT_RELATIVE_TOL);
        assert!(cfg.l.is_none());
        assert!(cfg.a_grid.is_none());
    }

    #[test]
    fn flags_win_over_file_and_file_over_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        // n = 3 needs a tight box to stay under the matrix side cap.
        writeln!(
            file,
            "n = 3\ns = 0.75\nsamples = 5\nseed = 99\nradius = 1\nbox_margin = 2"
        )
        .unwrap();
        let over = PartialConfig {
            samples: Some(11),
            ..flags()
        };
        let cfg = resolve(CommandKind::Verify, Some(file.path()), over).unwrap();
        assert_eq!(cfg.n, 3, "file beats the default");
        assert_eq!(cfg.s, 0.75);
        assert_eq!(cfg.samples, 11, "flag beats the file");
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "smaples = 5").unwrap();
        let err = resolve(CommandKind::Verify, Some(file.path()), flags()).unwrap_err();
        assert_eq!(exit_code_for(&err), 2);
    }

    #[test]
    fn bad_parameters_exit_with_usage_code() {
        let cases: Vec<PartialConfig> = vec![
            PartialConfig {
                tol: Some(-1.0),
                ..flags()
            },
            PartialConfig {
                s: Some(2.0),
                ..flags()
            }, // needs s < n/2 = 1
            PartialConfig {
                a: Some(0.0),
                ..flags()
            },
            PartialConfig {
                decay: Some(-0.5),
                ..flags()
            },
            PartialConfig {
                radius: Some(-1),
                ..flags()
            },
            PartialConfig {
                floor: Some(0.0),
                ..flags()
            },
            PartialConfig {
                threads: Some(0),
                ..flags()
            },
            PartialConfig {
                box_margin: Some(-3),
                ..flags()
            },
            PartialConfig {
                theta: Some("no-such-file.json".into()),
                ..flags()
            },
        ];
        for partial in cases {
            let err = resolve(CommandKind::Verify, None, partial).unwrap_err();
            assert_eq!(exit_code_for(&err), 2, "expected usage exit: {err:#}");
        }
    }

    #[test]
    fn ks_requires_the_two_torus_and_nonzero_winding() {
        let err = resolve(
            CommandKind::Ks,
            None,
            PartialConfig {
                n: Some(3),
                s: Some(0.5),
                ..flags()
            },
        )
        .unwrap_err();
        assert_eq!(exit_code_for(&err), 2);

        let err = resolve(
            CommandKind::Ks,
            None,
            PartialConfig {
                l: Some(0),
                ..flags()
            },
        )
        .unwrap_err();
        assert_eq!(exit_code_for(&err), 2);

        let cfg = resolve(CommandKind::Ks, None, flags()).unwrap();
        assert_eq!(cfg.l, Some(DEFAULT_L));
        // Support radius for l = 1 equals the coefficient radius.
        assert_eq!(cfg.box_radius, 10);

        let cfg = resolve(
            CommandKind::Ks,
            None,
            PartialConfig {
                l: Some(-3),
                radius: Some(2),
                ..flags()
            },
        )
        .unwrap();
        // Support radius 6 under the lattice line (k, -3k): box max(18, 14).
        assert_eq!(cfg.box_radius, 18);
    }

    #[test]
    fn extremal_grid_and_objective_are_validated() {
        let cfg = resolve(CommandKind::Extremal, None, flags()).unwrap();
        assert_eq!(cfg.a_grid.as_deref(), Some(&[DEFAULT_A][..]));
        assert_eq!(cfg.objective.as_deref(), Some("theorem"));
        assert_eq!(cfg.restarts, Some(8));
        assert_eq!(cfg.budget, Some(40));
        assert_eq!(cfg.screen, Some(200));
        assert_eq!(cfg.decay, 2.0, "extremal default decay follows the search");

        for partial in [
            PartialConfig {
                a_grid: Some(vec![]),
                ..flags()
            },
            PartialConfig {
                a_grid: Some(vec![1.0, -0.5]),
                ..flags()
            },
            PartialConfig {
                objective: Some("steepest".into()),
                ..flags()
            },
            PartialConfig {
                restarts: Some(0),
                ..flags()
            },
            PartialConfig {
                scales: Some(vec![0.0]),
                ..flags()
            },
        ] {
            let err = resolve(CommandKind::Extremal, None, partial).unwrap_err();
            assert_eq!(exit_code_for(&err), 2, "expected usage exit: {err:#}");
        }
    }

    #[test]
    fn theta_file_roundtrip_and_validation() {
        let theta = Theta::two_torus(0.37).unwrap();
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, "{}", serde_json::to_string(&theta).unwrap()).unwrap();
        let path = file.path().to_str().unwrap().to_string();

        let cfg = resolve(
            CommandKind::Verify,
            None,
            PartialConfig {
                theta: Some(path.clone()),
                ..flags()
            },
        )
        .unwrap();
        assert_eq!(cfg.theta, theta);
        assert_eq!(cfg.theta_spec, path);

        // Dimension mismatch against n = 3 is a usage error.
        let err = resolve(
            CommandKind::Verify,
            None,
            PartialConfig {
                n: Some(3),
                s: Some(0.5),
                theta: Some(path),
                ..flags()
            },
        )
        .unwrap_err();
        assert_eq!(exit_code_for(&err), 2);

        // A non-skew matrix is rejected by the wire validation.
        let mut bad = tempfile::NamedTempFile::new().unwrap();
        write!(bad, "{{\"n\":2,\"entries\":[[0.0,0.3],[0.3,0.0]]}}").unwrap();
        let err = resolve(
            CommandKind::Verify,
            None,
            PartialConfig {
                theta: Some(bad.path().to_str().unwrap().into()),
                ..flags()
            },
        )
        .unwrap_err();
        assert_eq!(exit_code_for(&err), 2);
    }

    #[test]
    fn zero_theta_reaches_the_commutative_torus() {
        let cfg = resolve(
            CommandKind::Verify,
            None,
            PartialConfig {
                theta: Some("zero".into()),
                n: Some(3),
                s: Some(0.5),
                radius: Some(1),
                box_margin: Some(2),
                ..flags()
            },
        )
        .unwrap();
        assert_eq!(cfg.theta, Theta::zero(3).unwrap());
    }

    #[test]
    fn substreams_are_prefix_stable() {
        assert_eq!(sample_seed(7, 0), 8);
        assert_eq!(sample_seed(7, 41), 49);
        assert_eq!(retry_seed(8, 0), 8);
        assert_ne!(retry_seed(8, 1), retry_seed(8, 2));
    }
}
