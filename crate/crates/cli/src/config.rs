//! Run configuration: a TOML manifest plus command-line overrides
//! (flags win). Unknown keys are rejected so experiment manifests stay
//! reproducible.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Sequential,
    Stochastic,
    ZonalExtensive,
    ZonalBenders,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Sequential => "sequential",
            ModelKind::Stochastic => "stochastic",
            ModelKind::ZonalExtensive => "zonal-extensive",
            ModelKind::ZonalBenders => "zonal-benders",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScenarioSection {
    /// "generate" or "file".
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    pub reduce_to: Option<usize>,
    pub file: Option<PathBuf>,
}

fn default_source() -> String {
    "generate".into()
}

fn default_count() -> usize {
    1000
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            source: default_source(),
            count: default_count(),
            seed: 0,
            reduce_to: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolverSection {
    pub gap: Option<f64>,
    /// Benders convergence tolerance.
    pub epsilon: Option<f64>,
    pub node_limit: Option<u64>,
    pub max_iterations: Option<usize>,
    /// Dual bound for complementarity big-Ms; defaults to 10x shed cost.
    pub big_m_dual: Option<f64>,
    pub tol_feas: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ForecastSection {
    #[serde(default = "default_coeffs")]
    pub variance_coeffs: [f64; 3],
    #[serde(default = "default_tau")]
    pub corr_tau: f64,
}

fn default_coeffs() -> [f64; 3] {
    let (a, b, c) = rezone_core::scen::DEFAULT_VARIANCE_COEFFS;
    [a, b, c]
}

fn default_tau() -> f64 {
    rezone_core::scen::DEFAULT_CORR_TAU
}

impl Default for ForecastSection {
    fn default() -> Self {
        ForecastSection {
            variance_coeffs: default_coeffs(),
            corr_tau: default_tau(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct StabilitySection {
    /// Total scenario sets; the first trains, the rest evaluate.
    #[serde(default = "default_omegas")]
    pub omegas: usize,
    #[serde(default = "default_q_grid")]
    pub q_grid: Vec<f64>,
    #[serde(default)]
    pub zonal_zones: Vec<usize>,
}

fn default_omegas() -> usize {
    4
}

fn default_q_grid() -> Vec<f64> {
    vec![0.01, 0.03, 0.05]
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection {
            omegas: default_omegas(),
            q_grid: default_q_grid(),
            zonal_zones: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub case: PathBuf,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_zones")]
    pub zones: usize,
    #[serde(default)]
    pub chi: f64,
    /// Minimum zone size; None picks 10 for systems of 72+ buses, 4 for
    /// 24+, otherwise 1.
    pub y_min: Option<u32>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub scenarios: ScenarioSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub forecast: ForecastSection,
    #[serde(default)]
    pub stability: StabilitySection,
}

fn default_model() -> ModelKind {
    ModelKind::Sequential
}

fn default_q() -> f64 {
    0.03
}

fn default_zones() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(0.0 < self.q && self.q < 0.5) {
            anyhow::bail!("q must lie in (0, 0.5), got {}", self.q);
        }
        if self.zones == 0 {
            anyhow::bail!("zones must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.chi) {
            anyhow::bail!("chi must lie in [0, 1], got {}", self.chi);
        }
        match self.scenarios.source.as_str() {
            "generate" => {
                if self.scenarios.count == 0 {
                    anyhow::bail!("scenario count must be at least 1");
                }
                if let Some(r) = self.scenarios.reduce_to {
                    if r == 0 || r > self.scenarios.count {
                        anyhow::bail!(
                            "reduce-to {} outside 1..={}",
                            r,
                            self.scenarios.count
                        );
                    }
                }
            }
            "file" => {
                if self.scenarios.file.is_none() {
                    anyhow::bail!("scenario source `file` needs scenarios.file");
                }
            }
            other => anyhow::bail!("unknown scenario source `{other}`"),
        }
        if self.stability.omegas < 2 {
            anyhow::bail!("stability needs at least 2 scenario sets");
        }
        Ok(())
    }

    /// Default minimum zone size by system scale.
    pub fn effective_y_min(&self, n_buses: usize) -> u32 {
        self.y_min.unwrap_or(match n_buses {
            n if n >= 72 => 10,
            n if n >= 24 => 4,
            _ => 1,
        })
    }
}
