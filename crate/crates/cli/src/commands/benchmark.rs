use std::fmt::Write as _;
use std::fs;

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use salmap::deletion::{
    run_benchmark, run_benchmark_on_maps, write_auc_summary, write_curve_csv, BenchOptions,
    BenchmarkResult,
};
use salmap::saliency::read_map_archive;
use salmap::{LabeledImage, MapKind};

use super::{load_dataset, open_classifier, prepare_out};
use crate::config::RunConfig;
use crate::error::{usage, CliResult};

pub const AUC_SUMMARY: &str = "auc_summary.csv";
pub const ELIGIBLE_SUMMARY: &str = "eligible.csv";
pub const ELIGIBLE_HEADER: &str = "kind,mean_eligible_fraction,max_eligible_fraction";

pub fn curve_file_name(kind: MapKind, color: salmap::Color) -> String {
    format!("curve_{kind}_{color}.csv")
}

/// A seeded uniform sample of `n` images without replacement, kept in split
/// order; the whole split when `n` covers it.
pub fn subsample(images: &[LabeledImage], n: Option<usize>, seed: u64) -> Vec<LabeledImage> {
    match n {
        Some(n) if n < images.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = rand::seq::index::sample(&mut rng, images.len(), n).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| images[i].clone()).collect()
        }
        _ => images.to_vec(),
    }
}

pub fn run(config: &RunConfig) -> CliResult<BenchmarkResult> {
    let data = load_dataset(&config.dataset)?;
    let classifier = open_classifier(config, &data)?;
    let images = subsample(data.split(config.split), config.subset, config.seed);
    if images.is_empty() {
        return Err(usage!("the {} split is empty", config.split.name()));
    }
    let archived = match &config.maps {
        Some(path) if !path.is_file() => {
            return Err(usage!("map archive {} not found", path.display()))
        }
        Some(path) => Some(read_map_archive(path)?),
        None => None,
    };
    prepare_out(config, "benchmark")?;

    let result = match archived {
        Some(maps) => run_benchmark_on_maps(
            &classifier,
            &images,
            &maps,
            &config.pairs,
            &config.fractions,
            config.inactive_order,
        )?,
        None => {
            let opts = BenchOptions {
                score: config.score,
                sign_mode: config.sign_mode,
                inactive_order: config.inactive_order,
            };
            run_benchmark(
                &classifier,
                &images,
                &config.pairs,
                &config.fractions,
                &opts,
            )?
        }
    };

    for curve in &result.curves {
        write_curve_csv(
            &config.out.join(curve_file_name(curve.kind, curve.color)),
            curve,
        )?;
    }
    write_auc_summary(&config.out.join(AUC_SUMMARY), &result.curves)?;
    let mut eligible = format!("{ELIGIBLE_HEADER}\n");
    for (kind, _) in &result.eligible_fractions {
        let mean = result.mean_eligible_fraction(*kind).unwrap_or(0.0);
        let max = result.max_eligible_fraction(*kind).unwrap_or(0.0);
        writeln!(eligible, "{kind},{mean:.6},{max:.6}").unwrap();
    }
    let path = config.out.join(ELIGIBLE_SUMMARY);
    fs::write(&path, eligible).with_context(|| format!("writing {}", path.display()))?;
    Ok(result)
}
