//! Experiment configuration.
//!
//! A config is one JSON object; every field has a default, so `{}` is a
//! valid config. [`ExperimentConfig::resolve`] fills the remaining
//! derived values (budget, per-method hyperparameters, random streams) and
//! the result is written next to the outputs as `resolved_config.json`.

use std::path::{Path, PathBuf};

use forgeset::blo::{BloConfig, Direction, Granularity};
use forgeset::models::Scope;
use forgeset::numcore::RngStream;
use forgeset::unlearn::{Method, UnlearnConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{file_err, CliError, CliResult};
use crate::streams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub forget: ForgetSpec,
    pub selection: SelectionSpec,
    pub methods: Vec<MethodSpec>,
    /// One unlearning run per seed for each selected (worst/easiest) mask.
    pub eval_seeds: Vec<u64>,
    pub oracle: OracleSpec,
    pub transfer: TransferSpec,
    pub coreset: CoresetSpec,
    pub mixture: MixtureSpec,
    /// Output location; not part of the serialized form or the hash.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetSpec::default(),
            model: ModelSpec::default(),
            forget: ForgetSpec::default(),
            selection: SelectionSpec::default(),
            methods: Method::ALL.iter().map(|&m| MethodSpec::new(m)).collect(),
            eval_seeds: (0..10).collect(),
            oracle: OracleSpec::default(),
            transfer: TransferSpec::default(),
            coreset: CoresetSpec::default(),
            mixture: MixtureSpec::default(),
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs(BlobsSpec),
    Biased(BiasedSpec),
    Csv(CsvSpec),
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Blobs(BlobsSpec::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsSpec {
    pub n_per_class: usize,
    pub test_per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        Self { n_per_class: 100, test_per_class: 100, classes: 4, dim: 2, spread: 0.6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasedSpec {
    pub n: usize,
    pub test_n: usize,
    pub correlation: f64,
}

impl Default for BiasedSpec {
    fn default() -> Self {
        Self { n: 400, test_n: 400, correlation: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSpec {
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Classifier shape and pretraining schedule. No hidden layers gives a
/// linear softmax model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { hidden: Vec::new(), epochs: 300, lr: 0.5 }
    }
}

impl ModelSpec {
    pub fn sizes(&self, dim: usize, classes: usize) -> Vec<usize> {
        let mut s = vec![dim];
        s.extend(&self.hidden);
        s.push(classes);
        s
    }

    pub fn label(&self) -> String {
        if self.hidden.is_empty() {
            "linear".into()
        } else {
            let h: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
            format!("mlp{}", h.join("x"))
        }
    }
}

/// Forgetting budget: `count` units if set, else `round(ratio * units)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgetSpec {
    pub ratio: f64,
    pub count: Option<usize>,
}

impl Default for ForgetSpec {
    fn default() -> Self {
        Self { ratio: 0.1, count: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSpec {
    pub blo: BloConfig,
    /// Which BLO selections to run.
    pub directions: Vec<Direction>,
    /// One random baseline mask per seed.
    pub random_seeds: Vec<u64>,
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self {
            blo: BloConfig::default(),
            directions: vec![Direction::Worst, Direction::Easiest],
            random_seeds: (0..10).collect(),
        }
    }
}

/// One unlearning method. Unset `lr`/`epochs` resolve to the pretraining
/// schedule for Retrain and to method defaults otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    pub lambda_reg: f64,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub l1_coef: f64,
    pub scope: Scope,
}

impl Default for MethodSpec {
    fn default() -> Self {
        Self::new(Method::Retrain)
    }
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self { method, lambda_reg: 0.0, lr: None, epochs: None, l1_coef: 1e-3, scope: Scope::All }
    }

    fn default_schedule(&self, model: &ModelSpec) -> (f64, usize) {
        match self.method {
            Method::Retrain => (model.lr, model.epochs),
            Method::Ft => (0.1, 30),
            Method::Ga => (0.05, 5),
            Method::Rl => (0.1, 20),
            Method::L1Sparse => (0.1, 30),
        }
    }

    /// Unlearning config for one run.
    pub fn to_config(&self, rng: RngStream) -> UnlearnConfig {
        UnlearnConfig {
            method: self.method,
            lambda_reg: self.lambda_reg,
            lr: self.lr.expect("resolved"),
            epochs: self.epochs.expect("resolved"),
            l1_coef: self.l1_coef,
            scope: self.scope,
            rng,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    /// Run the exhaustive oracle as part of `report`.
    pub enabled: bool,
    /// Refuse to enumerate more subsets than this without `--force-guard`.
    pub max_subsets: u64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { enabled: false, max_subsets: 10_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSpec {
    /// Source and target models; fewer than two disables transfer.
    pub models: Vec<ModelSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoresetSpec {
    pub enabled: bool,
}

impl Default for CoresetSpec {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub enabled: bool,
    /// Fractions of the budget drawn from the worst-case set.
    pub grid: Vec<f64>,
    /// One random filler per seed; empty reuses `selection.random_seeds`.
    pub seeds: Vec<u64>,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self { enabled: true, grid: vec![0.0, 0.25, 0.5, 0.75, 1.0], seeds: Vec::new() }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(file_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        self
    }

    /// Validates the config and fills derived fields. `units` is the number
    /// of selectable units (samples or classes) in the training set.
    pub fn resolve(mut self, units: usize) -> CliResult<Self> {
        let cfg_err = |m: String| Err(CliError::Config(m));
        if !(self.forget.ratio > 0.0 && self.forget.ratio <= 1.0) {
            return cfg_err(format!("forget.ratio must be in (0, 1], got {}", self.forget.ratio));
        }
        let m = match self.forget.count {
            Some(c) => c,
            None => ((self.forget.ratio * units as f64).round() as usize).max(1),
        };
        if m == 0 || m > units {
            return cfg_err(format!("forget budget {m} must be in 1..={units}"));
        }
        self.forget.count = Some(m);
        if self.methods.is_empty() {
            return cfg_err("methods must not be empty".into());
        }
        if self.eval_seeds.is_empty() {
            return cfg_err("eval_seeds must not be empty".into());
        }
        let model = self.model.clone();
        for spec in &mut self.methods {
            let (lr, epochs) = spec.default_schedule(&model);
            spec.lr.get_or_insert(lr);
            spec.epochs.get_or_insert(epochs);
        }
        if self.mixture.seeds.is_empty() {
            self.mixture.seeds = self.selection.random_seeds.clone();
        }
        if self.mixture.grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return cfg_err("mixture.grid values must lie in [0, 1]".into());
        }
        let blo = &mut self.selection.blo;
        if !(blo.alpha > 0.0 && blo.beta > 0.0 && blo.gamma >= 0.0) {
            return cfg_err("selection.blo needs alpha > 0, beta > 0, gamma >= 0".into());
        }
        blo.rng = RngStream::new(self.seed, streams::BLO);
        if let DatasetSpec::Biased(b) = &self.dataset {
            if !(0.0..=1.0).contains(&b.correlation) {
                return cfg_err(format!("dataset.correlation must lie in [0, 1], got {}", b.correlation));
            }
        }
        Ok(self)
    }

    pub fn budget(&self) -> usize {
        self.forget.count.expect("resolved")
    }

    pub fn granularity(&self) -> Granularity {
        self.selection.blo.granularity
    }

    /// The Retrain entry of `methods`, or a Retrain on the pretraining
    /// schedule.
    pub fn retrain_spec(&self) -> MethodSpec {
        self.methods.iter().find(|s| s.method == Method::Retrain).cloned().unwrap_or_else(|| MethodSpec {
            lr: Some(self.model.lr),
            epochs: Some(self.model.epochs),
            ..MethodSpec::new(Method::Retrain)
        })
    }
}
