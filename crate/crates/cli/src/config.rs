//! `key = value` run configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use amem_core::data::{load_mnist_idx, random_unit_vectors, synth_2d, Dataset, Layout2d};
use amem_core::net::Nonlin;
use amem_core::optim::{InitScheme, Objective, Optimizer, TrainCfg, DEFAULT_LOSS_THRESHOLD, DEFAULT_MAX_EPOCHS};
use amem_core::dynamics::IterConfig;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "dataset",
    "mnist_dir",
    "width",
    "depth",
    "nonlin",
    "objective",
    "optimizer",
    "lr",
    "init",
    "seed",
    "loss_threshold",
    "max_epochs",
    "refine_lr",
    "refine_threshold",
    "conv_tol",
    "recover_tol",
    "max_iter",
    "out",
];

/// Raw pairs before typing; later inserts win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: unknown key {k:?}", n + 1)));
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: Option<String>) {
        debug_assert!(KEYS.contains(&key));
        if let Some(v) = value {
            self.0.insert(key.to_string(), v);
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Usage(format!("bad value for {key}: {s:?} ({e})"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Ring(usize),
    Box(usize),
    Mnist(usize),
    Unit { n: usize, dim: usize },
    /// One example per CSV row, no header.
    File(PathBuf),
}

impl std::str::FromStr for DatasetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<usize, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("{s:?} is missing a count"))?
                .parse()
                .map_err(|e| format!("{s:?}: {e}"))
        };
        match parts[0] {
            "ring" => Ok(DatasetSpec::Ring(num(1)?)),
            "box" => Ok(DatasetSpec::Box(num(1)?)),
            "mnist" => Ok(DatasetSpec::Mnist(num(1)?)),
            "unit" => Ok(DatasetSpec::Unit { n: num(1)?, dim: num(2)? }),
            "file" if parts.len() > 1 => Ok(DatasetSpec::File(PathBuf::from(&s[5..]))),
            _ => Err(format!("unknown dataset {s:?} (ring:N, box:N, mnist:N, unit:N:DIM, file:PATH)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Autoencode,
    Sequence,
    /// Consecutive cycles of the given length.
    MultiSequence(usize),
}

impl std::str::FromStr for ObjectiveSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "autoencode" => Ok(ObjectiveSpec::Autoencode),
            None if s == "sequence" => Ok(ObjectiveSpec::Sequence),
            Some(("multi_sequence", l)) => l
                .parse()
                .map(ObjectiveSpec::MultiSequence)
                .map_err(|e| format!("{s:?}: {e}")),
            _ => Err(format!("unknown objective {s:?} (autoencode, sequence, multi_sequence:L)")),
        }
    }
}

impl std::fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectiveSpec::Autoencode => write!(f, "autoencode"),
            ObjectiveSpec::Sequence => write!(f, "sequence"),
            ObjectiveSpec::MultiSequence(l) => write!(f, "multi_sequence:{l}"),
        }
    }
}

impl ObjectiveSpec {
    pub fn build(&self, n: usize) -> Result<Objective, CliError> {
        match self {
            ObjectiveSpec::Autoencode => Ok(Objective::autoencode(n)),
            ObjectiveSpec::Sequence => Ok(Objective::sequence(n)),
            ObjectiveSpec::MultiSequence(l) => {
                if *l == 0 || n % l != 0 {
                    return Err(CliError::Usage(format!("{n} examples do not split into cycles of {l}")));
                }
                let cycles = (0..n / l).map(|c| (c * l..(c + 1) * l).collect()).collect();
                Objective::multi_sequence(cycles, n).map_err(|e| CliError::Usage(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Uniform(f64),
    /// Needs one unit-norm example and one hidden layer.
    Rank1Equal { u0: f64, v0: f64 },
}

impl std::str::FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("{s:?} is missing a value"))?
                .parse()
                .map_err(|e| format!("{s:?}: {e}"))
        };
        match parts[0] {
            "uniform" => Ok(InitSpec::Uniform(num(1)?)),
            "rank1_equal" => Ok(InitSpec::Rank1Equal { u0: num(1)?, v0: num(2)? }),
            _ => Err(format!("unknown init {s:?} (uniform:A, rank1_equal:U0:V0)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub mnist_dir: PathBuf,
    pub width: usize,
    /// Hidden layers; the network has `depth + 1` weight matrices.
    pub depth: usize,
    pub nonlin: Nonlin,
    pub objective: ObjectiveSpec,
    pub optimizer: Optimizer,
    pub lr: f64,
    pub init: InitSpec,
    pub seed: u64,
    pub loss_threshold: f64,
    pub max_epochs: usize,
    /// When set, a plain gd stage at this rate follows the main optimizer.
    pub refine_lr: Option<f64>,
    pub refine_threshold: f64,
    pub iter: IterConfig,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let it = IterConfig::default();
        let default_mnist = std::env::var_os("AMEM_MNIST_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data/mnist"));
        let cfg = Self {
            dataset: raw.get("dataset", DatasetSpec::Ring(6))?,
            mnist_dir: raw.get("mnist_dir", default_mnist)?,
            width: raw.get("width", 64)?,
            depth: raw.get("depth", 3)?,
            nonlin: raw.get("nonlin", Nonlin::Selu)?,
            objective: raw.get("objective", ObjectiveSpec::Autoencode)?,
            optimizer: raw.get("optimizer", Optimizer::adam())?,
            lr: raw.get("lr", 1e-4)?,
            init: raw.get("init", InitSpec::Uniform(0.1))?,
            seed: raw.get("seed", 0)?,
            loss_threshold: raw.get("loss_threshold", DEFAULT_LOSS_THRESHOLD)?,
            max_epochs: raw.get("max_epochs", DEFAULT_MAX_EPOCHS)?,
            refine_lr: match raw.0.get("refine_lr") {
                None => None,
                Some(_) => Some(raw.get("refine_lr", 0.0)?),
            },
            refine_threshold: raw.get("refine_threshold", 1e-20)?,
            iter: IterConfig {
                conv_tol: raw.get("conv_tol", it.conv_tol)?,
                recover_tol: raw.get("recover_tol", it.recover_tol)?,
                max_iter: raw.get("max_iter", it.max_iter)?,
                history: it.history,
            },
            out: raw.get("out", PathBuf::from("out"))?,
        };
        if cfg.width == 0 || cfg.depth == 0 {
            return Err(CliError::Usage("width and depth must be positive".into()));
        }
        if cfg.refine_lr.is_some_and(|lr| !(lr > 0.0)) || !(cfg.refine_threshold > 0.0) {
            return Err(CliError::Usage("refine_lr and refine_threshold must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn dims(&self, k0: usize) -> Vec<usize> {
        let mut d = vec![k0];
        d.extend(std::iter::repeat_n(self.width, self.depth));
        d.push(k0);
        d
    }

    pub fn load_dataset(&self) -> Result<Dataset, CliError> {
        Ok(match &self.dataset {
            DatasetSpec::Ring(n) => synth_2d(*n, Layout2d::Ring, self.seed),
            DatasetSpec::Box(n) => synth_2d(*n, Layout2d::UniformBox, self.seed),
            DatasetSpec::Unit { n, dim } => Dataset::new(random_unit_vectors(*n, *dim, self.seed))?,
            DatasetSpec::Mnist(n) => {
                let (images, labels) = mnist_files(&self.mnist_dir)?;
                load_mnist_idx(&images, &labels, *n, self.seed)?
            }
            DatasetSpec::File(p) => read_vectors(p)?,
        })
    }

    pub fn train_cfg(&self, data: &Dataset) -> Result<TrainCfg, CliError> {
        let init = match self.init {
            InitSpec::Uniform(a) => InitScheme::Uniform(a),
            InitSpec::Rank1Equal { u0, v0 } => {
                if data.len() != 1 {
                    return Err(CliError::Usage("rank1_equal init needs exactly one example".into()));
                }
                InitScheme::Rank1Equal {
                    x: data.examples()[0].clone(),
                    u0,
                    v0,
                }
            }
        };
        let mut cfg = TrainCfg::new(self.optimizer.clone(), self.lr, init, self.seed);
        cfg.loss_threshold = self.loss_threshold;
        cfg.max_epochs = self.max_epochs;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    /// The optional gd stage that follows `train_cfg`.
    pub fn refine_cfg(&self, main: &TrainCfg) -> Option<TrainCfg> {
        self.refine_lr.map(|lr| TrainCfg {
            optimizer: Optimizer::Gd,
            lr,
            loss_threshold: self.refine_threshold,
            ..main.clone()
        })
    }
}

/// Full training files if present, else the bundled sample.
pub fn mnist_files(dir: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    for (i, l) in [
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("sample-images-idx3-ubyte", "sample-labels-idx1-ubyte"),
    ] {
        let (i, l) = (dir.join(i), dir.join(l));
        if i.exists() && l.exists() {
            return Ok((i, l));
        }
    }
    Err(CliError::Data(format!("no MNIST IDX files in {}", dir.display())))
}

/// Rows of comma- or whitespace-separated reals.
pub fn read_vectors(path: &Path) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Dataset::new(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let raw = RawConfig::parse("# run\nwidth = 32\n\ndataset=box:5 # five\nnonlin = leaky_relu:0.2\n").unwrap();
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.width, 32);
        assert_eq!(cfg.dataset, DatasetSpec::Box(5));
        assert_eq!(cfg.nonlin, Nonlin::LeakyRelu(0.2));
        assert_eq!(cfg.dims(2), vec![2, 32, 32, 32, 2]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        assert!(matches!(RawConfig::parse("widht = 3"), Err(CliError::Usage(_))));
        assert!(matches!(RawConfig::parse("width 3"), Err(CliError::Usage(_))));
        let raw = RawConfig::parse("lr = fast").unwrap();
        assert!(matches!(RunConfig::from_raw(&raw), Err(CliError::Usage(_))));
    }

    #[test]
    fn later_values_override() {
        let mut raw = RawConfig::parse("width = 8\nseed = 1").unwrap();
        raw.set("width", Some("16".into()));
        raw.set("seed", None);
        let cfg = RunConfig::from_raw(&raw).unwrap();
        assert_eq!((cfg.width, cfg.seed), (16, 1));
    }

    #[test]
    fn multi_sequence_splits_consecutively() {
        let o = ObjectiveSpec::MultiSequence(2).build(4).unwrap();
        assert_eq!(o.targets(), &[1, 0, 3, 2]);
        assert!(ObjectiveSpec::MultiSequence(3).build(4).is_err());
    }
}
