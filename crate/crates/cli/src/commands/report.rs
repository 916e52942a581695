//! Collates the artifacts of earlier commands into `report.md` and
//! evaluates the property checklist on them. Missing inputs are listed and
//! the report is written anyway.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use salmap::deletion::{parse_auc_summary, parse_curve_csv, DeletionCurve};
use salmap::saliency::read_map_archive;
use salmap::{Color, MapKind};

use super::benchmark::{curve_file_name, AUC_SUMMARY, ELIGIBLE_SUMMARY};
use super::saliency::{ARCHIVE_NAME, GALLERY_INDEX};
use super::train::METRICS_HEADER;
use crate::error::CliResult;

pub const REPORT_NAME: &str = "report.md";

/// Where each command's artifacts live; all default to the output directory.
#[derive(Clone, Debug)]
pub struct ReportInputs {
    pub out: PathBuf,
    pub train_dir: PathBuf,
    pub saliency_dir: PathBuf,
    pub benchmark_dir: PathBuf,
}

impl ReportInputs {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        Self {
            out: dir.clone(),
            train_dir: dir.clone(),
            saliency_dir: dir.clone(),
            benchmark_dir: dir,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotEvaluated => "NOT EVALUATED",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub text: String,
    pub checks: Vec<Check>,
    /// Sections that could not be filled, with the missing file.
    pub missing: Vec<String>,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run(inputs: &ReportInputs) -> CliResult<Report> {
    let report = build(inputs)?;
    fs::create_dir_all(&inputs.out)
        .with_context(|| format!("creating {}", inputs.out.display()))?;
    let path = inputs.out.join(REPORT_NAME);
    fs::write(&path, &report.text).with_context(|| format!("writing {}", path.display()))?;
    Ok(report)
}

fn read_optional(path: &Path) -> CliResult<Option<String>> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(anyhow::Error::new(e)
            .context(format!("reading {}", path.display()))
            .into()),
    }
}

pub fn build(inputs: &ReportInputs) -> CliResult<Report> {
    let mut text = String::from("# Saliency map report\n");
    let mut missing = Vec::new();
    let mut checks = Vec::new();

    // training
    text.push_str("\n## Training\n\n");
    let metrics_path = inputs.train_dir.join("metrics.csv");
    match read_optional(&metrics_path)? {
        None => {
            writeln!(text, "ABSENT: {} not found.", metrics_path.display()).unwrap();
            missing.push(metrics_path.display().to_string());
        }
        Some(csv) => {
            let rows: Vec<&str> = csv.lines().skip(1).filter(|l| !l.is_empty()).collect();
            writeln!(
                text,
                "Complete: {} epochs in `{}`.",
                rows.len(),
                metrics_path.display()
            )
            .unwrap();
            if let Some(last) = rows.last() {
                writeln!(
                    text,
                    "\n| {} |\n|---|---|---|---|",
                    METRICS_HEADER.replace(',', " | ")
                )
                .unwrap();
                writeln!(text, "| {} |", last.replace(',', " | ")).unwrap();
            }
        }
    }

    // gallery
    text.push_str("\n## Saliency gallery\n\n");
    let gallery_path = inputs.saliency_dir.join(GALLERY_INDEX);
    match read_optional(&gallery_path)? {
        None => {
            writeln!(text, "ABSENT: {} not found.", gallery_path.display()).unwrap();
            missing.push(gallery_path.display().to_string());
        }
        Some(csv) => {
            let rows: Vec<Vec<&str>> = csv
                .lines()
                .skip(1)
                .filter(|l| !l.is_empty())
                .map(|l| l.split(',').collect())
                .collect();
            writeln!(text, "Complete: {} images.\n", rows.len()).unwrap();
            for row in rows {
                let id = row[0];
                let mut files = vec![format!("{id}_image.ppm")];
                files.extend(MapKind::ALL.iter().map(|k| format!("{id}_{k}.pgm")));
                let present: Vec<String> = files
                    .into_iter()
                    .filter(|f| inputs.saliency_dir.join(f).is_file())
                    .collect();
                writeln!(
                    text,
                    "- image {id} (label {}, predicted {}): {}",
                    row[1],
                    row[2],
                    present.join(", ")
                )
                .unwrap();
            }
        }
    }
    checks.push(identity_check(
        &inputs.saliency_dir.join(ARCHIVE_NAME),
        &mut missing,
    )?);

    // benchmark
    text.push_str("\n## Deletion benchmark\n\n");
    let auc_path = inputs.benchmark_dir.join(AUC_SUMMARY);
    let aucs = match read_optional(&auc_path)? {
        None => {
            writeln!(text, "ABSENT: {} not found.", auc_path.display()).unwrap();
            missing.push(auc_path.display().to_string());
            BTreeMap::new()
        }
        Some(csv) => {
            let rows = parse_auc_summary(&csv)?;
            writeln!(
                text,
                "Complete: {} curves.\n\n| kind | color | AUC |\n|---|---|---|",
                rows.len()
            )
            .unwrap();
            for (kind, color, auc) in &rows {
                writeln!(text, "| {kind} | {color} | {auc:.6} |").unwrap();
            }
            rows.into_iter().map(|(k, c, a)| ((k, c), a)).collect()
        }
    };
    let eligible = read_eligible(&inputs.benchmark_dir.join(ELIGIBLE_SUMMARY))?;
    if let Some(rows) = &eligible {
        text.push_str(
            "\n| kind | mean eligible fraction | max eligible fraction |\n|---|---|---|\n",
        );
        for (kind, (mean, max)) in rows {
            writeln!(text, "| {kind} | {mean:.6} | {max:.6} |").unwrap();
        }
    }
    checks.push(ordering_check(
        "black-deletion ordering",
        &aucs,
        Color::Black,
        &[MapKind::Positive, MapKind::Active],
    ));
    checks.push(ordering_check(
        "white-deletion ordering",
        &aucs,
        Color::White,
        &[MapKind::Negative, MapKind::Inactive],
    ));
    checks.push(saturation_check(
        inputs,
        &aucs,
        eligible.as_ref(),
        &mut missing,
    )?);

    text.push_str("\n## Checklist\n\n");
    for c in &checks {
        writeln!(text, "- {}: {} ({})", c.name, c.verdict, c.detail).unwrap();
    }
    text.push_str("\n## Missing inputs\n\n");
    if missing.is_empty() {
        text.push_str("None; all sections complete.\n");
    }
    for m in &missing {
        writeln!(text, "- {m}").unwrap();
    }
    Ok(Report {
        text,
        checks,
        missing,
    })
}

fn identity_check(archive: &Path, missing: &mut Vec<String>) -> CliResult<Check> {
    let name = "map identity max(positive, negative) = original";
    if !archive.is_file() {
        missing.push(archive.display().to_string());
        return Ok(Check {
            name,
            verdict: Verdict::NotEvaluated,
            detail: "map archive absent".into(),
        });
    }
    let maps = read_map_archive(archive)?;
    let find =
        |id: u64, kind: MapKind| maps.iter().find(|m| m.image_id() == id && m.kind() == kind);
    let mut checked = 0;
    let mut violations = 0;
    for orig in maps.iter().filter(|m| m.kind() == MapKind::Original) {
        let (Some(pos), Some(neg)) = (
            find(orig.image_id(), MapKind::Positive),
            find(orig.image_id(), MapKind::Negative),
        ) else {
            continue;
        };
        checked += 1;
        let holds = orig
            .values()
            .iter()
            .zip(pos.values().iter().zip(neg.values()))
            .all(|(o, (p, n))| p.max(*n) == *o);
        if !holds {
            violations += 1;
        }
    }
    Ok(match (checked, violations) {
        (0, _) => Check {
            name,
            verdict: Verdict::NotEvaluated,
            detail: "archive lacks original/positive/negative triples".into(),
        },
        (n, 0) => Check {
            name,
            verdict: Verdict::Pass,
            detail: format!("{n} images, exact"),
        },
        (n, v) => Check {
            name,
            verdict: Verdict::Fail,
            detail: format!("{v} of {n} images violate it"),
        },
    })
}

fn ordering_check(
    name: &'static str,
    aucs: &BTreeMap<(MapKind, Color), f64>,
    color: Color,
    challengers: &[MapKind],
) -> Check {
    let Some(&base) = aucs.get(&(MapKind::Original, color)) else {
        return Check {
            name,
            verdict: Verdict::NotEvaluated,
            detail: format!("no original/{color} AUC"),
        };
    };
    let present: Vec<(MapKind, f64)> = challengers
        .iter()
        .filter_map(|&k| aucs.get(&(k, color)).map(|&a| (k, a)))
        .collect();
    if present.is_empty() {
        return Check {
            name,
            verdict: Verdict::NotEvaluated,
            detail: format!("no signed {color} AUCs"),
        };
    }
    let detail = present
        .iter()
        .map(|(k, a)| format!("{k} {a:.4} vs original {base:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    let verdict = if present.iter().all(|(_, a)| *a < base) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Check {
        name,
        verdict,
        detail,
    }
}

type Eligible = BTreeMap<MapKind, (f64, f64)>;

fn read_eligible(path: &Path) -> CliResult<Option<Eligible>> {
    let Some(csv) = read_optional(path)? else {
        return Ok(None);
    };
    let mut out = BTreeMap::new();
    for line in csv.lines().skip(1).filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = match fields.as_slice() {
            [k, mean, max] => k
                .parse::<MapKind>()
                .ok()
                .zip(mean.parse::<f64>().ok())
                .zip(max.parse::<f64>().ok())
                .map(|((k, mean), max)| (k, (mean, max))),
            _ => None,
        };
        let (kind, values) = parsed
            .ok_or_else(|| anyhow::anyhow!("malformed row {line:?} in {}", path.display()))?;
        out.insert(kind, values);
    }
    Ok(Some(out))
}

/// Active and inactive curves must be exactly flat from the widest eligible
/// set on, and their mean eligible set must be smaller than the image.
fn saturation_check(
    inputs: &ReportInputs,
    aucs: &BTreeMap<(MapKind, Color), f64>,
    eligible: Option<&Eligible>,
    missing: &mut Vec<String>,
) -> CliResult<Check> {
    let name = "saturation";
    let Some(eligible) = eligible else {
        missing.push(
            inputs
                .benchmark_dir
                .join(ELIGIBLE_SUMMARY)
                .display()
                .to_string(),
        );
        return Ok(Check {
            name,
            verdict: Verdict::NotEvaluated,
            detail: "eligible summary absent".into(),
        });
    };
    let mut curves: Vec<DeletionCurve> = Vec::new();
    for &(kind, color) in aucs
        .keys()
        .filter(|(k, _)| matches!(k, MapKind::Active | MapKind::Inactive))
    {
        let path = inputs.benchmark_dir.join(curve_file_name(kind, color));
        match read_optional(&path)? {
            Some(csv) => curves.push(parse_curve_csv(&csv)?),
            None => missing.push(path.display().to_string()),
        }
    }
    if curves.is_empty() {
        return Ok(Check {
            name,
            verdict: Verdict::NotEvaluated,
            detail: "no active or inactive curves".into(),
        });
    }
    let mut verdict = Verdict::Pass;
    let mut notes = Vec::new();
    for curve in &curves {
        let Some(&(mean, max)) = eligible.get(&curve.kind) else {
            verdict = Verdict::NotEvaluated;
            notes.push(format!("{} lacks an eligible fraction", curve.kind));
            continue;
        };
        let tail: Vec<f64> = curve
            .fractions
            .iter()
            .zip(&curve.allegiance)
            .filter(|(f, _)| **f >= max)
            .map(|(_, a)| *a)
            .collect();
        if tail.is_empty() {
            verdict = Verdict::NotEvaluated;
            notes.push(format!(
                "{} {}: no sample at or beyond {max:.3}",
                curve.kind, curve.color
            ));
            continue;
        }
        let flat = tail.iter().all(|a| *a == tail[0]);
        if (!flat || mean >= 1.0) && verdict != Verdict::NotEvaluated {
            verdict = Verdict::Fail;
        }
        notes.push(format!(
            "{} {}: {} flat points from {max:.3}, mean eligible {mean:.3}{}",
            curve.kind,
            curve.color,
            tail.len(),
            if flat { "" } else { ", NOT flat" }
        ));
    }
    Ok(Check {
        name,
        verdict,
        detail: notes.join("; "),
    })
}
