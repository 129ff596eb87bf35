//! Experiment configuration, read from TOML with unknown keys rejected.

use std::path::{Path, PathBuf};

use mrt_core::hydrate::Test1Config;
use mrt_core::schemes::MAX_EXTRAPOLATION_ORDER;
use mrt_core::SchemeKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshParams {
    pub t_end: f64,
    /// Micro step, s.
    pub h: f64,
    /// Multirate factors swept by every multirate scheme.
    pub m: Vec<usize>,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self { t_end: 18000.0, h: 60.0, m: vec![1, 2, 5, 10, 20, 30] }
    }
}

/// One scheme of the matrix. `p` applies to the semi-implicit scheme only;
/// `m` replaces the global list when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub kind: SchemeKind,
    #[serde(default)]
    pub p: Vec<usize>,
    #[serde(default)]
    pub m: Option<Vec<usize>>,
}

/// A single run outside the matrix, such as the reference or the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub scheme: SchemeKind,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default)]
    pub p: usize,
}

fn one() -> usize {
    1
}

/// Runs allowed to fail; unset fields match anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedFailure {
    pub scheme: SchemeKind,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
}

/// Overrides of the Newton and fixed-point settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub error_reduction: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub relaxed_error_reduction: Option<f64>,
    pub fixed_point_tol: Option<f64>,
    pub fixed_point_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    pub dir: PathBuf,
    /// Write one trajectory CSV and run summary per run.
    pub trajectories: bool,
    /// Times at which errors are tabulated; each must be a macro point of every run.
    pub error_times: Vec<f64>,
    /// Extrapolation order whose semi-implicit runs enter the speed-up table.
    pub speedup_order: usize,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), trajectories: true, error_times: vec![3600.0, 18000.0], speedup_order: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Recorded in the manifest. Jacobians are built by deterministic
    /// differences, so no run draws random numbers.
    pub seed: u64,
    pub model: Test1Config,
    pub mesh: MeshParams,
    pub solver: SolverParams,
    pub reference: RunSpec,
    pub baseline: RunSpec,
    pub schemes: Vec<SchemeEntry>,
    pub expected_failures: Vec<ExpectedFailure>,
    pub output: OutputParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: Test1Config::default(),
            mesh: MeshParams::default(),
            solver: SolverParams::default(),
            reference: RunSpec { scheme: SchemeKind::FullyImplicit, m: 1, p: 0 },
            baseline: RunSpec { scheme: SchemeKind::IterativeCoupled, m: 1, p: 0 },
            schemes: vec![
                SchemeEntry { kind: SchemeKind::SemiImplicitMrt, p: vec![0, 2], m: None },
                SchemeEntry { kind: SchemeKind::CompoundFastMrt, p: Vec::new(), m: None },
            ],
            expected_failures: Vec::new(),
            output: OutputParams::default(),
        }
    }
}

/// Whether the scheme extrapolates the latent and so takes an order `p`.
pub fn uses_order(kind: SchemeKind) -> bool {
    kind == SchemeKind::SemiImplicitMrt
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    /// Canonical TOML of the resolved configuration, defaults included.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical form, hex encoded. The output directory is
    /// left out so that reruns into fresh directories hash alike.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output.dir = PathBuf::new();
        Sha256::digest(content.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        self.model.validate().map_err(ConfigError::Invalid)?;
        let mesh = &self.mesh;
        if !(mesh.t_end > 0.0 && mesh.h > 0.0) {
            return bad("t_end and h must be positive".into());
        }
        if mesh.m.is_empty() {
            return bad("the m list is empty".into());
        }
        for entry in &self.schemes {
            let ms = entry.m.as_deref().unwrap_or(&mesh.m);
            if ms.is_empty() || ms.contains(&0) {
                return bad(format!("{}: every m must be >= 1 and the list nonempty", entry.kind));
            }
            if !uses_order(entry.kind) && !entry.p.is_empty() {
                return bad(format!("{} takes no extrapolation order", entry.kind));
            }
            if let Some(p) = entry.p.iter().find(|&&p| p > MAX_EXTRAPOLATION_ORDER) {
                return bad(format!("{}: order {p} outside [0, {MAX_EXTRAPOLATION_ORDER}]", entry.kind));
            }
        }
        for spec in [&self.reference, &self.baseline] {
            if spec.m == 0 || spec.p > MAX_EXTRAPOLATION_ORDER {
                return bad(format!("{}: m must be >= 1 and p <= {MAX_EXTRAPOLATION_ORDER}", spec.scheme));
            }
        }
        if let Some(t) = self.output.error_times.iter().find(|&&t| !(t > 0.0 && t <= mesh.t_end)) {
            return bad(format!("error time {t} outside (0, t_end]"));
        }
        Ok(())
    }

    pub fn expects_failure(&self, scheme: SchemeKind, m: usize, p: Option<usize>) -> bool {
        self.expected_failures.iter().any(|f| {
            f.scheme == scheme && f.m.is_none_or(|fm| fm == m) && f.p.is_none_or(|fp| Some(fp) == p)
        })
    }
}
