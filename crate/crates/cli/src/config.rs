//! Run configuration: an optional INI-style `key = value` file overlaid by
//! command-line flags, validated in one place.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, ParseOption};
use salmap::deletion::{InactiveOrder, DEFAULT_FRACTIONS, DEFAULT_PAIRS};
use salmap::nn::Architecture;
use salmap::{Color, MapKind, ScoreKind, SignMode};

use crate::error::{usage, CliResult};

/// Every key a config file or flag may set. Keys a command does not use are
/// accepted and ignored by it; anything else is rejected.
pub const KEYS: &[&str] = &[
    "arch",
    "batch_size",
    "checkpoint",
    "data",
    "dataset",
    "epochs",
    "fractions",
    "ids",
    "inactive_order",
    "kinds",
    "lr",
    "maps",
    "out",
    "pairs",
    "per_class",
    "score",
    "seed",
    "split",
    "strict_sign",
    "subset",
    "synthetic_classes",
    "synthetic_size",
    "synthetic_test",
    "synthetic_train",
    "weight_decay",
];

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Cifar10 {
        dir: PathBuf,
    },
    Synthetic {
        train: usize,
        test: usize,
        classes: usize,
        size: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Fully resolved settings of one command invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub arch: Architecture,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
    pub weight_decay: f32,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
    pub split: Split,
    pub ids: Vec<u64>,
    pub per_class: bool,
    pub kinds: Vec<MapKind>,
    pub pairs: Vec<(MapKind, Color)>,
    pub fractions: Vec<f64>,
    pub subset: Option<usize>,
    pub score: ScoreKind,
    pub sign_mode: SignMode,
    pub inactive_order: InactiveOrder,
    pub maps: Option<PathBuf>,
}

/// Raw `key → value` settings before validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    /// Reads a config file. Sections are not supported; every entry must sit
    /// at the top level.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage!("cannot read config file {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| usage!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        // backslashes stay literal so Windows paths survive
        let opts = ParseOption {
            enabled_escape: false,
            ..ParseOption::default()
        };
        let doc =
            Ini::load_from_str_opt(text, opts).map_err(|e| usage!("malformed config: {e}"))?;
        let mut settings = Settings::default();
        for (section, props) in doc.iter() {
            if let Some(name) = section {
                return Err(usage!("config sections are not supported, found [{name}]"));
            }
            for (key, value) in props.iter() {
                settings.set(key, value)?;
            }
        }
        Ok(settings)
    }

    /// Sets `key`, accepting `-` in place of `_`.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(usage!("unknown config key {key:?}"));
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    /// Later settings win.
    pub fn overlay(mut self, other: Settings) -> Self {
        self.0.extend(other.0);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| usage!("invalid {key} {v:?}: {e}")),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| usage!("invalid entry {s:?} in {key}: {e}"))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }

    fn flag(&self, key: &str) -> CliResult<bool> {
        match self.get(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(v) => Err(usage!("invalid {key} {v:?}: expected true or false")),
        }
    }

    /// Validates every key and fills in defaults.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let dataset = match self.get("dataset").unwrap_or("cifar10") {
            "cifar10" => DatasetSource::Cifar10 {
                dir: PathBuf::from(self.get("data").unwrap_or("data/cifar-10-batches-bin")),
            },
            "synthetic" => DatasetSource::Synthetic {
                train: self.parsed("synthetic_train", 512)?,
                test: self.parsed("synthetic_test", 128)?,
                classes: self.parsed("synthetic_classes", 10)?,
                size: self.parsed("synthetic_size", 32)?,
            },
            other => {
                return Err(usage!(
                    "unknown dataset {other:?}: expected cifar10 or synthetic"
                ))
            }
        };
        let out = PathBuf::from(self.get("out").unwrap_or("run"));
        let checkpoint = self
            .get("checkpoint")
            .map(PathBuf::from)
            .unwrap_or_else(|| out.join("model.ckpt"));
        let split = match self.get("split").unwrap_or("test") {
            "test" => Split::Test,
            "train" => Split::Train,
            other => return Err(usage!("unknown split {other:?}: expected test or train")),
        };
        let strict = self.flag("strict_sign")?;
        let inactive_default = if strict {
            InactiveOrder::Magnitude
        } else {
            InactiveOrder::Ascending
        };
        let pairs = match self.get("pairs") {
            None => DEFAULT_PAIRS.to_vec(),
            Some(text) => parse_pairs(text)?,
        };
        let fractions = self
            .list("fractions")?
            .unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec());
        salmap::deletion::validate_fractions(&fractions)?;

        let config = RunConfig {
            dataset,
            arch: self.parsed("arch", Architecture::BasicCnn)?,
            seed: self.parsed("seed", 0)?,
            epochs: self.parsed("epochs", 50)?,
            lr: self.parsed("lr", 0.001)?,
            batch_size: self.parsed("batch_size", 128)?,
            weight_decay: self.parsed("weight_decay", 0.01)?,
            out,
            checkpoint,
            split,
            ids: self.list("ids")?.unwrap_or_default(),
            per_class: self.flag("per_class")?,
            kinds: self.list("kinds")?.unwrap_or_else(|| MapKind::ALL.to_vec()),
            pairs,
            fractions,
            subset: self
                .get("subset")
                .map(|_| self.parsed("subset", 0))
                .transpose()?,
            score: self.parsed("score", ScoreKind::Logit)?,
            sign_mode: if strict {
                SignMode::Strict
            } else {
                SignMode::Literal
            },
            inactive_order: self.parsed("inactive_order", inactive_default)?,
            maps: self.get("maps").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_pairs(text: &str) -> CliResult<Vec<(MapKind, Color)>> {
    let pairs = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (kind, color) = item
                .split_once(':')
                .ok_or_else(|| usage!("pair {item:?} must look like kind:color"))?;
            Ok((kind.parse()?, color.parse()?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(usage!("pairs must name at least one kind:color"));
    }
    Ok(pairs)
}

impl RunConfig {
    fn validate(&self) -> CliResult<()> {
        if self.batch_size == 0 {
            return Err(usage!("batch_size must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(usage!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(usage!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        if self.kinds.is_empty() {
            return Err(usage!("kinds must name at least one map kind"));
        }
        if self.subset == Some(0) {
            return Err(usage!("subset must be at least 1"));
        }
        if self.per_class && !self.ids.is_empty() {
            return Err(usage!("ids and per_class are mutually exclusive"));
        }
        if let DatasetSource::Synthetic {
            train,
            classes,
            size,
            ..
        } = self.dataset
        {
            if train == 0 || classes == 0 || size == 0 {
                return Err(usage!(
                    "synthetic_train, synthetic_classes and synthetic_size must be positive"
                ));
            }
        }
        Ok(())
    }

    /// The effective configuration as `key = value` lines, sorted by key.
    pub fn to_ini(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let mut entries: BTreeMap<&str, String> = BTreeMap::new();
        match &self.dataset {
            DatasetSource::Cifar10 { dir } => {
                entries.insert("dataset", "cifar10".into());
                entries.insert("data", dir.display().to_string());
            }
            DatasetSource::Synthetic {
                train,
                test,
                classes,
                size,
            } => {
                entries.insert("dataset", "synthetic".into());
                entries.insert("synthetic_train", train.to_string());
                entries.insert("synthetic_test", test.to_string());
                entries.insert("synthetic_classes", classes.to_string());
                entries.insert("synthetic_size", size.to_string());
            }
        }
        entries.insert("arch", self.arch.name().into());
        entries.insert("seed", self.seed.to_string());
        entries.insert("epochs", self.epochs.to_string());
        entries.insert("lr", self.lr.to_string());
        entries.insert("batch_size", self.batch_size.to_string());
        entries.insert("weight_decay", self.weight_decay.to_string());
        entries.insert("out", self.out.display().to_string());
        entries.insert("checkpoint", self.checkpoint.display().to_string());
        entries.insert("split", self.split.name().into());
        entries.insert("ids", join(self.ids.iter().map(u64::to_string).collect()));
        entries.insert("per_class", self.per_class.to_string());
        entries.insert(
            "kinds",
            join(self.kinds.iter().map(|k| k.name().to_string()).collect()),
        );
        entries.insert(
            "pairs",
            join(self.pairs.iter().map(|(k, c)| format!("{k}:{c}")).collect()),
        );
        entries.insert(
            "fractions",
            join(self.fractions.iter().map(f64::to_string).collect()),
        );
        if let Some(n) = self.subset {
            entries.insert("subset", n.to_string());
        }
        entries.insert("score", self.score.to_string());
        entries.insert(
            "strict_sign",
            (self.sign_mode == SignMode::Strict).to_string(),
        );
        entries.insert("inactive_order", self.inactive_order.to_string());
        if let Some(maps) = &self.maps {
            entries.insert("maps", maps.display().to_string());
        }
        let mut text = String::new();
        for (key, value) in entries {
            writeln!(text, "{key} = {value}").unwrap();
        }
        text
    }
}
