//! Output directory handling and the shared artifacts of a run: datasets,
//! the pretrained model, selections and random masks.
//!
//! Artifacts already present in the output directory are reused when they
//! were produced under the same resolved config; otherwise they are
//! recomputed and overwritten.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use forgeset::blo::{select, Direction, Granularity, SelectionResult};
use forgeset::data::{
    gen_biased, gen_blobs, load_csv_with_groups, save_csv, save_csv_with_groups, Dataset, ForgetMask, GroupLabels,
    Split,
};
use forgeset::models::ModelParams;
use forgeset::numcore::RngStream;
use forgeset::unlearn::train;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DatasetSpec, ExperimentConfig, ModelSpec};
use crate::error::{file_err, CliError, CliResult};
use crate::streams;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";
pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const MODEL_CKPT: &str = "model.ckpt";

/// Saved form of a BLO selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub direction: Direction,
    pub granularity: Granularity,
    pub budget: usize,
    /// Selected training samples.
    pub sample_mask: Vec<usize>,
    pub result: SelectionResult,
    pub config: forgeset::blo::BloConfig,
}

pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub force_guard: bool,
    pub train: Dataset,
    pub test: Dataset,
    pub groups: Option<GroupLabels>,
    reuse: bool,
    theta: OnceLock<ModelParams>,
    selections: Mutex<Vec<SelectionFile>>,
}

pub fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Worst => "worst",
        Direction::Easiest => "easiest",
    }
}

fn load_datasets(cfg: &ExperimentConfig) -> CliResult<(Dataset, Dataset, Option<GroupLabels>)> {
    let seed = cfg.seed;
    Ok(match &cfg.dataset {
        DatasetSpec::Blobs(b) => {
            let tr = gen_blobs(b.n_per_class, b.classes, b.dim, b.spread, RngStream::new(seed, streams::TRAIN_DATA))?;
            let te = gen_blobs(b.test_per_class, b.classes, b.dim, b.spread, RngStream::new(seed, streams::TEST_DATA))?;
            (tr, te.with_split(Split::Test), None)
        }
        DatasetSpec::Biased(b) => {
            let (tr, g) = gen_biased(b.n, b.correlation, RngStream::new(seed, streams::TRAIN_DATA))?;
            let (te, _) = gen_biased(b.test_n, b.correlation, RngStream::new(seed, streams::TEST_DATA))?;
            (tr, te.with_split(Split::Test), Some(g))
        }
        DatasetSpec::Csv(c) => {
            for p in [&c.train, &c.test] {
                if !p.is_file() {
                    return Err(CliError::Config(format!("dataset file {} does not exist", p.display())));
                }
            }
            let (mut tr, g) = load_csv_with_groups(&c.train)?;
            let (mut te, _) = load_csv_with_groups(&c.test)?;
            if tr.dim() != te.dim() {
                return Err(CliError::Config(format!("train has {} features, test has {}", tr.dim(), te.dim())));
            }
            let classes = tr.classes.max(te.classes);
            tr.classes = classes;
            te.classes = classes;
            (tr, te.with_split(Split::Test), g)
        }
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(file_err(path))
}

impl Run {
    /// Resolves `cfg` against its dataset and prepares the output directory,
    /// which must already exist.
    pub fn open(cfg: ExperimentConfig, force_guard: bool) -> CliResult<Run> {
        let out = cfg
            .out
            .clone()
            .ok_or_else(|| CliError::Config("no output directory (set `out` or pass --out)".into()))?;
        if !out.is_dir() {
            return Err(CliError::File {
                path: out,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
            });
        }
        let (train, test, groups) = load_datasets(&cfg)?;
        let units = match cfg.selection.blo.granularity {
            Granularity::Sample => train.len(),
            Granularity::Class => train.classes,
        };
        let cfg = cfg.resolve(units)?;
        let resolved = cfg.to_json();
        let cfg_path = out.join(RESOLVED_CONFIG);
        let reuse = std::fs::read_to_string(&cfg_path).is_ok_and(|old| old == resolved);
        write(&cfg_path, &resolved)?;
        let run = Run {
            cfg,
            out,
            force_guard,
            train,
            test,
            groups,
            reuse,
            theta: OnceLock::new(),
            selections: Mutex::new(Vec::new()),
        };
        run.write_datasets()?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_datasets(&self) -> CliResult<()> {
        let (tp, sp) = (self.path(TRAIN_CSV), self.path(TEST_CSV));
        match &self.groups {
            Some(g) => save_csv_with_groups(&self.train, g, &tp)?,
            None => save_csv(&self.train, &tp)?,
        }
        save_csv(&self.test, &sp)?;
        Ok(())
    }

    fn cached(&self, name: &str) -> Option<PathBuf> {
        let p = self.path(name);
        (self.reuse && p.is_file()).then_some(p)
    }

    pub fn sizes(&self, spec: &ModelSpec) -> Vec<usize> {
        spec.sizes(self.train.dim(), self.train.classes)
    }

    /// Trains a model of the given shape on `data` with the pretraining
    /// stream.
    pub fn train_model(&self, spec: &ModelSpec, data: &Dataset) -> CliResult<ModelParams> {
        Ok(train(data, &self.sizes(spec), spec.epochs, spec.lr, RngStream::new(self.cfg.seed, streams::PRETRAIN))?)
    }

    /// The pretrained model `θ_o`, loaded from `model.ckpt` when current.
    pub fn pretrained(&self) -> CliResult<ModelParams> {
        if let Some(t) = self.theta.get() {
            return Ok(t.clone());
        }
        let theta = match self.cached(MODEL_CKPT) {
            Some(p) => ModelParams::load(&p)?,
            None => {
                let t = self.train_model(&self.cfg.model, &self.train)?;
                t.save(&self.path(MODEL_CKPT))?;
                t
            }
        };
        Ok(self.theta.get_or_init(|| theta).clone())
    }

    /// BLO selection for `direction` with the configured model.
    pub fn selection(&self, direction: Direction) -> CliResult<SelectionFile> {
        if let Some(s) = self.selections.lock().unwrap().iter().find(|s| s.direction == direction) {
            return Ok(s.clone());
        }
        let sel = self.load_or_select(direction)?;
        self.selections.lock().unwrap().push(sel.clone());
        Ok(sel)
    }

    fn load_or_select(&self, direction: Direction) -> CliResult<SelectionFile> {
        let name = format!("selection_{}.json", direction_name(direction));
        if let Some(p) = self.cached(&name) {
            let text = std::fs::read_to_string(&p).map_err(file_err(&p))?;
            return serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())));
        }
        let theta = self.pretrained()?;
        let sel = self.select_with(&theta, direction)?;
        let mut text = serde_json::to_string_pretty(&sel).expect("selection serializes");
        text.push('\n');
        write(&self.path(&name), &text)?;
        let mask_name = format!("mask_{}.txt", direction_name(direction));
        write(&self.path(&mask_name), &ForgetMask::new(sel.sample_mask.clone(), self.train.len())?.to_file_string())?;
        Ok(sel)
    }

    /// Runs BLO from `theta_o` without touching the output directory.
    pub fn select_with(&self, theta_o: &ModelParams, direction: Direction) -> CliResult<SelectionFile> {
        let mut blo = self.cfg.selection.blo.clone();
        blo.direction = direction;
        let m = self.cfg.budget();
        let result = select(&self.train, m, theta_o, &blo)?;
        let sample_mask = result.sample_mask(&self.train, blo.granularity)?.indices().to_vec();
        Ok(SelectionFile { direction, granularity: blo.granularity, budget: m, sample_mask, result, config: blo })
    }

    /// Random baseline mask for one seed: `m` units drawn uniformly.
    pub fn random_mask(&self, seed: u64) -> CliResult<ForgetMask> {
        let units = match self.cfg.granularity() {
            Granularity::Sample => self.train.len(),
            Granularity::Class => self.train.classes,
        };
        let mut order: Vec<usize> = (0..units).collect();
        order.shuffle(&mut RngStream::new(self.cfg.seed, streams::RANDOM_MASK + seed).rng());
        let chosen = &order[..self.cfg.budget()];
        let idx = match self.cfg.granularity() {
            Granularity::Sample => chosen.to_vec(),
            Granularity::Class => (0..self.train.len()).filter(|&i| chosen.contains(&self.train.y[i])).collect(),
        };
        Ok(ForgetMask::new(idx, self.train.len())?)
    }

    /// All random baseline masks, also written to `masks/random_<seed>.txt`.
    pub fn random_masks(&self) -> CliResult<Vec<(u64, ForgetMask)>> {
        let dir = self.path("masks");
        std::fs::create_dir_all(&dir).map_err(file_err(&dir))?;
        let mut out = Vec::new();
        for &s in &self.cfg.selection.random_seeds {
            let mask = self.random_mask(s)?;
            write(&dir.join(format!("random_{s}.txt")), &mask.to_file_string())?;
            out.push((s, mask));
        }
        Ok(out)
    }

    /// Git-style digest of the run inputs: SHA-256 over the blob digests of
    /// the dataset files and the checkpoint.
    pub fn input_digest(&self) -> CliResult<String> {
        let mut outer = Sha256::new();
        for name in [TRAIN_CSV, TEST_CSV, MODEL_CKPT] {
            let p = self.path(name);
            if !p.is_file() {
                continue;
            }
            let bytes = std::fs::read(&p).map_err(file_err(&p))?;
            let mut h = Sha256::new();
            h.update(format!("blob {}\0", bytes.len()).as_bytes());
            h.update(&bytes);
            outer.update(format!("{} {name}\n", hex::encode(h.finalize())).as_bytes());
        }
        Ok(hex::encode(outer.finalize()))
    }

    pub fn write_file(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        let p = self.path(name);
        write(&p, text)?;
        Ok(p)
    }
}
