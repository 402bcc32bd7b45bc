//! Experiment configuration: TOML grammar, defaults, and exhaustive
//! validation.
//!
//! Config files are flat TOML key-value documents; every key is
//! optional and falls back to a default, the experiment kind comes from
//! the subcommand, and command-line flags override file values.
//! Validation never stops at the first problem: the caller gets every
//! violation in one list.

use crate::CliError;
use fou_sheet_core::chaos_analysis::MAX_CHAOS_CELLS;
use fou_sheet_core::fbs_sim::GridSpec;
use serde::{Deserialize, Serialize};

/// Grid ceiling for experiments that build dense chaos matrices.
pub const CHAOS_CELL_CAP: usize = MAX_CHAOS_CELLS;
/// Grid ceiling for sampling-only experiments.
pub const SIM_CELL_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Estimate,
    Consistency,
    VarianceScaling,
    DenominatorGrowth,
    NormalityGap,
    LemmaIntegral,
    BesselCheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::VarianceScaling => "variance-scaling",
            ExperimentKind::DenominatorGrowth => "denominator-growth",
            ExperimentKind::NormalityGap => "normality-gap",
            ExperimentKind::LemmaIntegral => "lemma-integral",
            ExperimentKind::BesselCheck => "bessel-check",
        }
    }

    /// Kinds whose statements only hold for exponents in (1/2, 5/8):
    /// running them outside is refused outright.
    fn refuses_outside_regime(&self) -> bool {
        matches!(self, ExperimentKind::Consistency | ExperimentKind::NormalityGap)
    }

    /// Kinds that are regime-sensitive but still meaningful outside it
    /// (divergence scans, biased estimates): a warning is surfaced.
    fn warns_outside_regime(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Estimate
                | ExperimentKind::VarianceScaling
                | ExperimentKind::DenominatorGrowth
                | ExperimentKind::LemmaIntegral
        )
    }

    fn builds_grids(&self) -> bool {
        !matches!(self, ExperimentKind::LemmaIntegral | ExperimentKind::BesselCheck)
    }

    /// Dense kernel-matrix work scales with the cube of the cell count,
    /// so these kinds get the tighter cap.
    fn chaos_exact(&self) -> bool {
        matches!(
            self,
            ExperimentKind::VarianceScaling
                | ExperimentKind::DenominatorGrowth
                | ExperimentKind::NormalityGap
        )
    }

    pub fn cell_cap(&self) -> usize {
        if self.chaos_exact() { CHAOS_CELL_CAP } else { SIM_CELL_CAP }
    }
}

/// A config file as written: every key optional. Unknown keys are
/// parse errors, so typos surface instead of silently using defaults.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<ExperimentKind>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub horizons: Option<Vec<[f64; 2]>>,
    pub cell_step: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub output_path: Option<String>,
    pub epsilon: Option<f64>,
}

/// Command-line overrides; any set field wins over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub horizons: Option<Vec<[f64; 2]>>,
    pub cell_step: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub output_path: Option<String>,
    pub epsilon: Option<f64>,
    pub allow_slow: bool,
}

/// A fully resolved, validated experiment description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub horizons: Vec<[f64; 2]>,
    pub cell_step: f64,
    pub replications: usize,
    pub seed: u64,
    pub output_path: String,
    pub epsilon: f64,
}

/// Parse a TOML config source. Errors carry the line and column of the
/// offending token.
pub fn parse_config(source: &str) -> Result<RawConfig, CliError> {
    toml::from_str(source).map_err(|err| {
        let (line, column) = err
            .span()
            .map(|span| position_of(source, span.start))
            .unwrap_or((0, 0));
        CliError::Parse { line, column, message: err.message().to_string() }
    })
}

fn position_of(source: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(source.len());
    let before = &source[..clamped];
    let line = before.matches('\n').count() + 1;
    let column = clamped - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    /// Merge defaults, file values, and flag overrides for the given
    /// subcommand, then validate every field. Returns the config plus
    /// any regime warnings; the error lists all violations at once.
    pub fn resolve(
        kind: ExperimentKind,
        raw: &RawConfig,
        over: &Overrides,
    ) -> Result<(Self, Vec<String>), CliError> {
        let cfg = ExperimentConfig {
            experiment: kind,
            alpha: over.alpha.or(raw.alpha).unwrap_or(0.55),
            beta: over.beta.or(raw.beta).unwrap_or(0.55),
            theta: over.theta.or(raw.theta).unwrap_or(1.0),
            horizons: over
                .horizons
                .clone()
                .or_else(|| raw.horizons.clone())
                .unwrap_or_else(|| vec![[4.0, 4.0], [8.0, 8.0], [16.0, 16.0]]),
            cell_step: over.cell_step.or(raw.cell_step).unwrap_or(1.0),
            replications: over.replications.or(raw.replications).unwrap_or(200),
            seed: over.seed.or(raw.seed).unwrap_or(1),
            output_path: over
                .output_path
                .clone()
                .or_else(|| raw.output_path.clone())
                .unwrap_or_else(|| "fou-run".to_string()),
            epsilon: over.epsilon.or(raw.epsilon).unwrap_or(0.05),
        };

        let mut violations = Vec::new();
        if let Some(declared) = raw.experiment {
            if declared != kind {
                violations.push(format!(
                    "config declares experiment '{}' but the subcommand is '{}'",
                    declared.as_str(),
                    kind.as_str()
                ));
            }
        }
        for (name, value) in [("alpha", cfg.alpha), ("beta", cfg.beta)] {
            if !(value > 0.5 && value < 1.0) {
                violations.push(format!(
                    "{name} = {value} must lie in the open interval (1/2, 1)"
                ));
            }
        }
        let in_regime = cfg.alpha > 0.5 && cfg.alpha < 0.625 && cfg.beta > 0.5 && cfg.beta < 0.625;
        let mut warnings = Vec::new();
        if !in_regime {
            if kind.refuses_outside_regime() {
                violations.push(format!(
                    "experiment '{}' requires alpha and beta inside the theorem regime (1/2, 5/8); \
                     got alpha = {}, beta = {}",
                    kind.as_str(),
                    cfg.alpha,
                    cfg.beta
                ));
            } else if kind.warns_outside_regime() {
                warnings.push(format!(
                    "alpha = {}, beta = {} sit outside the theorem regime (1/2, 5/8); \
                     results are exploratory",
                    cfg.alpha, cfg.beta
                ));
            }
        }
        if !(cfg.theta > 0.0 && cfg.theta.is_finite()) {
            violations.push(format!("theta = {} must be finite and positive", cfg.theta));
        }
        if !(cfg.cell_step > 0.0 && cfg.cell_step.is_finite()) {
            violations.push(format!(
                "cell_step = {} must be finite and positive",
                cfg.cell_step
            ));
        }
        if cfg.horizons.is_empty() {
            violations.push("horizons must list at least one [T, S] pair".to_string());
        }
        for (idx, [t, s]) in cfg.horizons.iter().enumerate() {
            if !(*t > 0.0 && t.is_finite() && *s > 0.0 && s.is_finite()) {
                violations.push(format!(
                    "horizons[{idx}] = [{t}, {s}] must be finite and positive"
                ));
                continue;
            }
            if cfg.cell_step > 0.0 && cfg.cell_step.is_finite() {
                match cells_along(*t, cfg.cell_step).zip(cells_along(*s, cfg.cell_step)) {
                    None => violations.push(format!(
                        "horizons[{idx}] = [{t}, {s}] is not a whole number of cell_step = {} cells",
                        cfg.cell_step
                    )),
                    Some((ct, cs)) => {
                        let cap = kind.cell_cap();
                        if kind.builds_grids() && ct.max(cs) > cap && !over.allow_slow {
                            violations.push(format!(
                                "horizons[{idx}] needs a {ct}x{cs} grid; '{}' is capped at {cap} \
                                 cells per axis (cost grows like the cube of the cell count). \
                                 Pass --i-know-this-is-slow to run anyway",
                                kind.as_str()
                            ));
                        }
                    }
                }
            }
        }
        if cfg.replications == 0 {
            violations.push("replications must be at least 1".to_string());
        }
        if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
            violations.push(format!(
                "epsilon = {} must be finite and nonnegative",
                cfg.epsilon
            ));
        }
        if cfg.output_path.is_empty() {
            violations.push("output_path must not be empty".to_string());
        }

        if violations.is_empty() {
            Ok((cfg, warnings))
        } else {
            Err(CliError::Validation(violations))
        }
    }

    /// Discretization grids for the configured horizons.
    pub fn grids(&self) -> Result<Vec<GridSpec>, CliError> {
        self.horizons
            .iter()
            .map(|[t, s]| {
                let ct = cells_along(*t, self.cell_step).expect("validated");
                let cs = cells_along(*s, self.cell_step).expect("validated");
                GridSpec::new(*t, *s, ct, cs).map_err(|e| CliError::Runtime {
                    experiment: self.experiment.as_str().to_string(),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

/// Number of cells covering `horizon` at `step`, provided the horizon
/// is a whole number of steps (to within rounding slack).
fn cells_along(horizon: f64, step: f64) -> Option<usize> {
    let exact = horizon / step;
    let rounded = exact.round();
    if rounded >= 1.0 && (exact - rounded).abs() < 1e-9 * exact.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}
