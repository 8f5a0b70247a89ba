//! Experiment configuration: one TOML document per run.

use crate::error::{LabError, Result};
use crate::fields::{
    make_constant_drift, make_hardy_drift, make_hardy_time_drift, make_lps_drift, make_shell_log_drift,
    make_weak_ld_drift, make_zero_drift, sum_fields, DriftField, Modulation,
};
use crate::fields::catalog::LpsParams;
use crate::mollify::{GammaRule, MollifyConfig};
use crate::pde::{SpaceTimeGrid, Weight};
use crate::sde::SimConfig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

use super::criteria::Criterion;

/// Suite size: `quick` uses coarser grids and fewer paths than `full`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    #[default]
    Quick,
    Full,
}

impl FromStr for Level {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            _ => Err(LabError::ConfigInvalid(format!("unknown level {s:?}, expected quick or full"))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Quick => "quick",
            Level::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Formbound,
    Mollify,
    Solve,
    Simulate,
    Verify(Criterion),
}

impl FromStr for ExperimentKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "formbound" => ExperimentKind::Formbound,
            "mollify" => ExperimentKind::Mollify,
            "solve" => ExperimentKind::Solve,
            "simulate" => ExperimentKind::Simulate,
            _ => match s.strip_prefix("verify-").and_then(Criterion::from_name) {
                Some(c) => ExperimentKind::Verify(c),
                None => {
                    return Err(LabError::ConfigInvalid(format!(
                        "unknown kind {s:?}; expected formbound, mollify, solve, simulate or verify-<criterion>"
                    )))
                }
            },
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentKind::Formbound => f.write_str("formbound"),
            ExperimentKind::Mollify => f.write_str("mollify"),
            ExperimentKind::Solve => f.write_str("solve"),
            ExperimentKind::Simulate => f.write_str("simulate"),
            ExperimentKind::Verify(c) => write!(f, "verify-{}", c.name()),
        }
    }
}

impl Serialize for ExperimentKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExperimentKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|e: LabError| serde::de::Error::custom(e.to_string()))
    }
}

fn three() -> usize {
    3
}
fn one() -> f64 {
    1.0
}

/// Drift field by catalog id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero {
        #[serde(default = "three")]
        dim: usize,
    },
    Constant {
        c: Vec<f64>,
    },
    Hardy {
        #[serde(default = "three")]
        dim: usize,
        delta: f64,
        /// +1 attracting, −1 repelling.
        #[serde(default = "one")]
        sign: f64,
        /// κ(t) = amplitude·cos(omega·t); omega = 0 gives a constant.
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        omega: f64,
    },
    HardyTime {
        #[serde(default = "three")]
        dim: usize,
        delta: f64,
        #[serde(default = "one")]
        sign: f64,
        c: f64,
        t0: f64,
        gamma: f64,
    },
    ShellLog {
        #[serde(default = "three")]
        dim: usize,
        coef: f64,
        a: f64,
        c: f64,
    },
    Lps {
        #[serde(default = "three")]
        dim: usize,
        amplitude: f64,
        alpha: f64,
        t0: f64,
        width: f64,
        split: f64,
    },
    WeakLd {
        #[serde(default = "three")]
        dim: usize,
        amplitude: f64,
    },
    Sum {
        left: Box<FieldSpec>,
        right: Box<FieldSpec>,
    },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Zero { dim: 3 }
    }
}

impl FieldSpec {
    pub fn build(&self) -> Result<DriftField> {
        let modulation = |amplitude: f64, omega: f64| {
            if omega == 0.0 {
                Modulation::Constant(amplitude)
            } else {
                Modulation::Cosine { amplitude, omega }
            }
        };
        match self {
            FieldSpec::Zero { dim } => make_zero_drift(*dim),
            FieldSpec::Constant { c } => make_constant_drift(c),
            FieldSpec::Hardy {
                dim,
                delta,
                sign,
                amplitude,
                omega,
            } => make_hardy_drift(*dim, *delta, *sign, modulation(*amplitude, *omega)),
            FieldSpec::HardyTime {
                dim,
                delta,
                sign,
                c,
                t0,
                gamma,
            } => make_hardy_time_drift(*dim, *delta, *sign, Modulation::Constant(1.0), *c, *t0, *gamma),
            FieldSpec::ShellLog { dim, coef, a, c } => make_shell_log_drift(*dim, *coef, *a, *c),
            FieldSpec::Lps {
                dim,
                amplitude,
                alpha,
                t0,
                width,
                split,
            } => make_lps_drift(
                *dim,
                LpsParams {
                    amplitude: *amplitude,
                    alpha: *alpha,
                    t0: *t0,
                    width: *width,
                    split: *split,
                },
            ),
            FieldSpec::WeakLd { dim, amplitude } => make_weak_ld_drift(*dim, *amplitude),
            FieldSpec::Sum { left, right } => sum_fields(&left.build()?, &right.build()?),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldSpec::Constant { c } => c.len(),
            FieldSpec::Sum { left, .. } => left.dim(),
            FieldSpec::Zero { dim }
            | FieldSpec::Hardy { dim, .. }
            | FieldSpec::HardyTime { dim, .. }
            | FieldSpec::ShellLog { dim, .. }
            | FieldSpec::Lps { dim, .. }
            | FieldSpec::WeakLd { dim, .. } => *dim,
        }
    }

    /// Catalog id as used on the command line.
    pub fn catalog_id(&self) -> &'static str {
        match self {
            FieldSpec::Zero { .. } => "zero",
            FieldSpec::Constant { .. } => "constant",
            FieldSpec::Hardy { .. } => "hardy",
            FieldSpec::HardyTime { .. } => "hardy-time",
            FieldSpec::ShellLog { .. } => "shell-log",
            FieldSpec::Lps { .. } => "lps",
            FieldSpec::WeakLd { .. } => "weak-ld",
            FieldSpec::Sum { .. } => "sum",
        }
    }
}

/// Initial (forward) or terminal (backward) datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian { center: Vec<f64>, sigma2: f64 },
    Constant { value: f64 },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Gaussian {
            center: vec![0.0; 3],
            sigma2: 0.25,
        }
    }
}

impl InitialSpec {
    pub fn function(&self) -> Box<dyn Fn(&[f64]) -> f64 + Sync> {
        match self {
            InitialSpec::Gaussian { center, sigma2 } => Box::new(crate::pde::gaussian(center.clone(), *sigma2)),
            InitialSpec::Constant { value } => {
                let v = *value;
                Box::new(move |_: &[f64]| v)
            }
        }
    }
}

/// Mollification levels; an empty list means the raw field is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifySpec {
    pub levels: Vec<u32>,
    pub rule: GammaRule,
    pub lattice: MollifyConfig,
}

impl Default for MollifySpec {
    fn default() -> Self {
        Self {
            levels: Vec::new(),
            rule: GammaRule::default(),
            lattice: MollifyConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    #[default]
    Origin,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormboundSpec {
    pub family: FamilyKind,
    pub budget: usize,
}

impl Default for FormboundSpec {
    fn default() -> Self {
        Self {
            family: FamilyKind::Origin,
            budget: 32,
        }
    }
}

/// Simulation parameters; the seed and field id come from the enclosing config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub h_t: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub substep: u32,
    pub record_every: usize,
    pub zero_noise: bool,
    /// Starting point; empty means the origin.
    pub start: Vec<f64>,
    /// Also write the raw ensemble block.
    pub write_ensemble: bool,
}

impl Default for SimSpec {
    fn default() -> Self {
        let c = SimConfig::default();
        Self {
            h_t: c.h_t,
            horizon: c.horizon,
            n_paths: c.n_paths,
            substep: c.substep,
            record_every: c.record_every,
            zero_noise: c.zero_noise,
            start: Vec::new(),
            write_ensemble: false,
        }
    }
}

impl SimSpec {
    pub fn to_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            h_t: self.h_t,
            horizon: self.horizon,
            n_paths: self.n_paths,
            seed,
            substep: self.substep,
            record_every: self.record_every,
            zero_noise: self.zero_noise,
            field_id: String::new(),
            m: None,
        }
    }
}

/// Extra analysis for `solve` runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSpec {
    /// Energy report exponent; None skips the energy CSV.
    pub q: Option<f64>,
    /// Write the final level as a raw block.
    pub write_solution: bool,
    pub plot: bool,
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Run directory; None means `<output root>/<kind>-<hash prefix>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub level: Level,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub mollify: MollifySpec,
    #[serde(default)]
    pub formbound: FormboundSpec,
    #[serde(default)]
    pub grid: SpaceTimeGrid,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub weight: Weight,
    #[serde(default)]
    pub solve: SolveSpec,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, field: FieldSpec) -> Self {
        Self {
            kind,
            seed: 1,
            output_dir: None,
            level: Level::default(),
            field,
            initial: InitialSpec::default(),
            mollify: MollifySpec::default(),
            formbound: FormboundSpec::default(),
            grid: SpaceTimeGrid::default(),
            sim: SimSpec::default(),
            weight: Weight::default(),
            solve: SolveSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::ConfigInvalid(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            LabError::ConfigInvalid(msg) => LabError::ConfigInvalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Every key, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the materialized config, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(LabError::ConfigInvalid(format!("{field}: {msg}")));
        let d = self.field.dim();
        if d != self.grid.dim {
            return bad("grid.dim", format!("{} differs from the field dimension {d}", self.grid.dim));
        }
        if let InitialSpec::Gaussian { center, sigma2 } = &self.initial {
            if center.len() != d {
                return bad("initial.center", format!("needs {d} coordinates, got {}", center.len()));
            }
            if !(*sigma2 > 0.0) {
                return bad("initial.sigma2", format!("must be > 0, got {sigma2}"));
            }
        }
        if !self.sim.start.is_empty() && self.sim.start.len() != d {
            return bad("sim.start", format!("needs {d} coordinates, got {}", self.sim.start.len()));
        }
        if self.mollify.levels.iter().any(|&m| m == 0) {
            return bad("mollify.levels", "levels must be >= 1".into());
        }
        if self.formbound.budget == 0 {
            return bad("formbound.budget", "must be >= 1".into());
        }
        if let Some(q) = self.solve.q {
            if !(q > 1.0) {
                return bad("solve.q", format!("must be > 1, got {q}"));
            }
        }
        self.grid
            .validate()
            .map_err(|e| LabError::ConfigInvalid(format!("grid: {e}")))?;
        self.sim
            .to_config(self.seed)
            .validate()
            .map_err(|e| LabError::ConfigInvalid(format!("sim: {e}")))?;
        Weight::new(self.weight.kappa, self.weight.theta, d)
            .map_err(|e| LabError::ConfigInvalid(format!("weight: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_materializes_defaults_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "solve"
seed = 7
[field]
id = "hardy"
delta = 0.04
"#,
        )
        .unwrap();
        assert_eq!(cfg.grid, SpaceTimeGrid::default());
        let text = cfg.to_toml();
        assert!(text.contains("cells = 96"), "{text}");
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let err = ExperimentConfig::from_toml("kind = \"solve\"\nseed = 1\n[grid]\ncellz = 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, LabError::ConfigInvalid(_)));
        assert!(msg.contains("cellz") && msg.contains("line 4"), "{msg}");
        assert!(ExperimentConfig::from_toml("kind = \"solve\"\nseed = 1\ncolour = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("kind = \"verify-nothing\"\nseed = 1\n").is_err());
    }

    #[test]
    fn verify_kinds_parse() {
        let cfg = ExperimentConfig::from_toml("kind = \"verify-heat-oracle\"\nseed = 1\nlevel = \"full\"\n").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Verify(Criterion::HeatOracle));
        assert_eq!(cfg.level, Level::Full);
        assert_eq!(cfg.kind.to_string(), "verify-heat-oracle");
    }

    #[test]
    fn validation_names_the_field() {
        let err = ExperimentConfig::from_toml(
            "kind = \"solve\"\nseed = 1\n[initial]\nkind = \"gaussian\"\ncenter = [0.0]\nsigma2 = 0.25\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("initial.center"), "{err}");
        let err = ExperimentConfig::from_toml("kind = \"solve\"\nseed = 1\n[weight]\ntheta = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("weight"), "{err}");
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::new(ExperimentKind::Solve, FieldSpec::default());
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn nested_sum_field_builds() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "formbound"
seed = 3
[field]
id = "sum"
[field.left]
id = "hardy"
delta = 0.04
[field.right]
id = "weak-ld"
amplitude = 0.1
"#,
        )
        .unwrap();
        let b = cfg.field.build().unwrap();
        assert_eq!(b.dim(), 3);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
