//! Command-line surface. Every flag maps onto a config key, so a config
//! file and flags can be mixed freely (flags win).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "salmap",
    version,
    about = "Signed and multi-class saliency maps for CNN classifiers",
    // a repeated flag takes its last value
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Export images and their five saliency maps.
    Saliency(SaliencyArgs),
    /// Run black/white deletion curves and their AUC summary.
    Benchmark(BenchmarkArgs),
    /// Collate artifacts into report.md with the property checklist.
    Report(ReportArgs),
}

/// Settings every data-consuming command shares.
#[derive(Debug, Args)]
pub struct Common {
    /// INI-style key = value file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// cifar10 or synthetic.
    #[arg(long)]
    pub dataset: Option<String>,
    /// CIFAR-10 binary batch directory.
    #[arg(long, value_name = "DIR")]
    pub data: Option<String>,
    /// basic-cnn, resnet-lite or tiny-cnn.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// Synthetic training images.
    #[arg(long)]
    pub synthetic_train: Option<String>,
    /// Synthetic test images.
    #[arg(long)]
    pub synthetic_test: Option<String>,
    #[arg(long)]
    pub synthetic_classes: Option<String>,
    /// Side length of synthetic images.
    #[arg(long)]
    pub synthetic_size: Option<String>,
}

/// Settings of the gradient-to-map step.
#[derive(Debug, Args)]
pub struct MapArgs {
    /// Checkpoint to load; defaults to <out>/model.ckpt.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<String>,
    /// test or train.
    #[arg(long)]
    pub split: Option<String>,
    /// logit or softmax.
    #[arg(long)]
    pub score: Option<String>,
    /// Keep only the sign each multi-class map is named for.
    #[arg(long)]
    pub strict_sign: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<String>,
    /// Where to write the checkpoint; defaults to <out>/model.ckpt.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub maps: MapArgs,
    /// Comma-separated image ids within the split.
    #[arg(long)]
    pub ids: Option<String>,
    /// One seeded random correctly classified image per class.
    #[arg(long)]
    pub per_class: bool,
    /// Comma-separated map kinds to export (default: all five).
    #[arg(long)]
    pub kinds: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub maps: MapArgs,
    /// Comma-separated sample points, starting at 0.
    #[arg(long)]
    pub fractions: Option<String>,
    /// Comma-separated kind:color pairs.
    #[arg(long)]
    pub pairs: Option<String>,
    /// Seeded sample size drawn from the split.
    #[arg(long)]
    pub subset: Option<String>,
    /// ascending or magnitude.
    #[arg(long)]
    pub inactive_order: Option<String>,
    /// Use archived maps instead of computing them.
    #[arg(long = "maps", value_name = "FILE")]
    pub map_archive: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory that receives report.md; the default input location too.
    #[arg(long, value_name = "DIR", default_value = "run")]
    pub out: PathBuf,
    /// Directory holding metrics.csv.
    #[arg(long, value_name = "DIR")]
    pub train_dir: Option<PathBuf>,
    /// Directory holding the gallery and maps.bin.
    #[arg(long, value_name = "DIR")]
    pub saliency_dir: Option<PathBuf>,
    /// Directory holding the curve CSVs and auc_summary.csv.
    #[arg(long, value_name = "DIR")]
    pub benchmark_dir: Option<PathBuf>,
}

/// Collects `(key, value)` pairs for the flags that were given.
#[derive(Default)]
struct Flags(Vec<(&'static str, String)>);

impl Flags {
    fn opt(&mut self, key: &'static str, value: &Option<String>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.clone()));
        }
        self
    }

    fn switch(&mut self, key: &'static str, on: bool) -> &mut Self {
        if on {
            self.0.push((key, "true".into()));
        }
        self
    }

    fn common(&mut self, c: &Common) -> &mut Self {
        self.opt("dataset", &c.dataset)
            .opt("data", &c.data)
            .opt("arch", &c.arch)
            .opt("seed", &c.seed)
            .opt("out", &c.out)
            .opt("synthetic_train", &c.synthetic_train)
            .opt("synthetic_test", &c.synthetic_test)
            .opt("synthetic_classes", &c.synthetic_classes)
            .opt("synthetic_size", &c.synthetic_size)
    }

    fn maps(&mut self, m: &MapArgs) -> &mut Self {
        self.opt("checkpoint", &m.checkpoint)
            .opt("split", &m.split)
            .opt("score", &m.score)
            .switch("strict_sign", m.strict_sign)
    }

    /// The config file (if any) overlaid with these flags.
    fn settings(&self, config: &Option<PathBuf>) -> CliResult<Settings> {
        let base = match config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        for (key, value) in &self.0 {
            flags.set(key, value.clone())?;
        }
        Ok(base.overlay(flags))
    }
}

impl TrainArgs {
    pub fn settings(&self) -> CliResult<Settings> {
        Flags::default()
            .common(&self.common)
            .opt("epochs", &self.epochs)
            .opt("lr", &self.lr)
            .opt("batch_size", &self.batch_size)
            .opt("weight_decay", &self.weight_decay)
            .opt("checkpoint", &self.checkpoint)
            .settings(&self.common.config)
    }
}

impl SaliencyArgs {
    pub fn settings(&self) -> CliResult<Settings> {
        Flags::default()
            .common(&self.common)
            .maps(&self.maps)
            .opt("ids", &self.ids)
            .switch("per_class", self.per_class)
            .opt("kinds", &self.kinds)
            .settings(&self.common.config)
    }
}

impl BenchmarkArgs {
    pub fn settings(&self) -> CliResult<Settings> {
        Flags::default()
            .common(&self.common)
            .maps(&self.maps)
            .opt("fractions", &self.fractions)
            .opt("pairs", &self.pairs)
            .opt("subset", &self.subset)
            .opt("inactive_order", &self.inactive_order)
            .opt("maps", &self.map_archive)
            .settings(&self.common.config)
    }
}
