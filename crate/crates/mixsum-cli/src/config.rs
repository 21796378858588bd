//! Run configuration: a single JSON file with flag overrides (flags win).
//! Unknown keys are rejected so typos fail loudly.

use std::path::Path;

use mixsum::error::{Error, Result};
use mixsum::gibbs::{DpmmConfig, NiwParams};
use mixsum::linalg::SpdMatrix;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Sample size for `simulate`.
    pub n: usize,
    /// Master seed; every stage derives its own streams from it.
    pub seed: u64,
    /// Worker cap for the rayon pool; results do not depend on it.
    pub threads: Option<usize>,
    pub hyper: HyperConfig,
    pub chain: ChainConfig,
    pub metric: MetricConfig,
    pub evaluation: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 200,
            seed: 0,
            threads: None,
            hyper: HyperConfig::default(),
            chain: ChainConfig::default(),
            metric: MetricConfig::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperConfig {
    pub mu0: Vec<f64>,
    pub lambda: f64,
    pub psi_diag: Vec<f64>,
    pub nu: f64,
    pub alpha: f64,
    pub truncation: usize,
}

impl Default for HyperConfig {
    fn default() -> Self {
        Self {
            mu0: vec![0.0, 0.0],
            lambda: 1.0,
            psi_diag: vec![1.0, 1.0],
            nu: 4.0,
            alpha: 1.0,
            truncation: 100,
        }
    }
}

impl HyperConfig {
    pub fn to_dpmm(&self) -> Result<DpmmConfig> {
        if self.mu0.len() != self.psi_diag.len() {
            return Err(Error::InvalidArgument(format!(
                "mu0 has {} entries, psi_diag {}",
                self.mu0.len(),
                self.psi_diag.len()
            )));
        }
        let niw = NiwParams::new(
            DVector::from_column_slice(&self.mu0),
            self.lambda,
            SpdMatrix::from_diagonal(&self.psi_diag)?,
            self.nu,
        )?;
        DpmmConfig::new(niw, self.alpha, self.truncation)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { iterations: 10_000, burn_in: 9_000, thin: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Summary methods: sliced kinds and/or partition losses.
    pub kinds: Vec<String>,
    pub order: f64,
    pub projections: usize,
    pub prune_floor: f64,
    /// `shared` or `fresh` Monte Carlo directions per matrix entry.
    pub directions: String,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kinds: ["sw", "mix_sw", "smix_w", "binder", "vi", "omari"]
                .map(String::from)
                .to_vec(),
            order: 2.0,
            projections: 100,
            prune_floor: 1e-8,
            directions: "shared".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub grid_resolution: usize,
    pub projections: usize,
    pub refresh_iters: usize,
    /// Prune floor for the mixing-measure loss table (0 keeps every atom).
    pub prune_floor: f64,
    pub emit_grids: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 100,
            projections: 1000,
            refresh_iters: 10,
            prune_floor: 0.0,
            emit_grids: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidArgument(format!("{}: {e}", p.display()))
                })?;
                Ok(cfg)
            }
        }
    }

    /// Hash of the fully resolved configuration, embedded in every output.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> String {
        format!("config_hash={} seed={}", self.hash(), self.seed)
    }
}
