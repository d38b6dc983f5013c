use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use malnet_core::pgd::PgdConfig;
use malnet_core::uncertainty::BetaParams;
use malnet_core::LossWeights;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    BarabasiAlbert { n: usize, m: usize },
    WattsStrogatz { n: usize, k: usize, p: f64 },
    /// A fixed network read once and reused by every trial.
    EdgeList { path: PathBuf },
    /// A fresh induced subgraph of `size` nodes per trial.
    InducedSubgraph { path: PathBuf, size: usize },
}

/// How the estimated model and the evaluation model are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Both models are drawn around one ground truth: the estimate from
    /// `benign`/`malicious`, the evaluation model from the `eval_*` pair.
    /// The default evaluation pair is sharper than the estimate pair.
    Synthetic {
        malicious_frac: f64,
        benign: BetaParams,
        malicious: BetaParams,
        eval_benign: BetaParams,
        eval_malicious: BetaParams,
    },
    /// One probability table used for both estimation and evaluation.
    Csv { path: PathBuf },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Synthetic {
            malicious_frac: 0.1,
            benign: BetaParams::new(2.0, 8.0),
            malicious: BetaParams::new(8.0, 2.0),
            eval_benign: BetaParams::new(1.0, 9.0),
            eval_malicious: BetaParams::new(9.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pgd,
    /// Relaxation solved exactly, then projection and `½` threshold.
    Relax,
    /// Relaxation followed by best-of-k hyperplane rounding.
    RelaxRandomized,
    Exact,
    Baseline,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pgd,
        Method::Relax,
        Method::RelaxRandomized,
        Method::Exact,
        Method::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pgd => "pgd",
            Method::Relax => "relax",
            Method::RelaxRandomized => "relax-randomized",
            Method::Exact => "exact",
            Method::Baseline => "baseline",
        }
    }

    /// Index used when deriving the method's random stream.
    pub fn stream_index(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSettings {
    /// Weight on the false-positive rate.
    pub alpha: f64,
    /// Labelled scores drawn from the estimate distributions for fitting.
    pub training_samples: usize,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            training_samples: 1000,
        }
    }
}

fn default_rounding_samples() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    #[serde(default)]
    pub model: ModelSpec,
    /// Weight triples `(α₁, α₂, α₃)`; empty means the default grid.
    #[serde(default)]
    pub weights: Vec<[f64; 3]>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub noise_sigmas: Vec<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub pgd: PgdConfig,
    #[serde(default = "default_rounding_samples")]
    pub rounding_samples: usize,
    #[serde(default)]
    pub baseline: BaselineSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn weight_grid(&self) -> Result<Vec<LossWeights>, BenchError> {
        if self.weights.is_empty() {
            return Ok(LossWeights::default_grid());
        }
        self.weights
            .iter()
            .map(|&[a, b, c]| LossWeights::new(a, b, c).map_err(BenchError::from))
            .collect()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Config("at least one method is required".into()));
        }
        self.weight_grid()?;
        self.pgd.validate()?;
        if self.rounding_samples == 0 {
            return Err(BenchError::Config("rounding_samples must be >= 1".into()));
        }
        let b = &self.baseline;
        if !(0.0..=1.0).contains(&b.alpha) || b.training_samples < 2 {
            return Err(BenchError::Config(
                "baseline needs alpha in [0, 1] and at least two training samples".into(),
            ));
        }
        if let Some(s) = self.noise_sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(BenchError::Config(format!("noise level {s} must be >= 0")));
        }
        if let ModelSpec::Synthetic { malicious_frac, .. } = &self.model {
            if !(0.0..=1.0).contains(malicious_frac) {
                return Err(BenchError::Config(format!("malicious_frac {malicious_frac} outside [0, 1]")));
            }
        }
        Ok(())
    }
}
