//! End-to-end commands: synthesise, extract, adjust, evaluate, report.
//!
//! Everything lives under one output root:
//!
//! ```text
//! <out>/data/manifest.csv, <out>/data/recordings/*
//! <out>/features/<METHOD>_<CH>.csv
//! <out>/adjusted/<METHOD>_<CH>.csv, <out>/adjusted/<METHOD>_<CH>.model
//! <out>/runs/<METHOD>_<CH>/{accuracy.csv, ocid_error.csv, report.md, run.jsonl, summary.json}
//! <out>/comparison/{accuracy.csv, ocid_error.csv, report.md}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adjust::{adjust_matrix, AdjustmentModel, Provenance};
use crate::config::{ChannelSet, Method, RunConfig};
use crate::error::{Error, Result};
use crate::eval::report::{percent, Metric};
use crate::eval::{evaluate, make_splits, CellResult, EvalOptions, EvalReport};
use crate::features::{Class, FeatureMatrix, RowMeta};
use crate::filter::Butterworth;
use crate::io::{
    read_feature_store, read_manifest, read_recording, write_feature_store, ManifestEntry,
};
use crate::signal::Signal;
use crate::synth::generate_dataset;
use crate::{baseline, harmonic};

/// How k* selection weighs the classes; recorded in every report.
pub const REWEIGHTING: &str = "inverse class frequency (mean of per-class LOO error rates)";

/// File locations under an output root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn manifest(&self) -> PathBuf {
        self.data_dir().join("manifest.csv")
    }

    fn tag(method: Method, channels: ChannelSet) -> String {
        format!("{method}_{channels}")
    }

    pub fn feature_store(&self, method: Method, channels: ChannelSet) -> PathBuf {
        self.root
            .join("features")
            .join(format!("{}.csv", Self::tag(method, channels)))
    }

    pub fn adjusted_store(&self, method: Method, channels: ChannelSet) -> PathBuf {
        self.root
            .join("adjusted")
            .join(format!("{}.csv", Self::tag(method, channels)))
    }

    pub fn model(&self, method: Method, channels: ChannelSet) -> PathBuf {
        self.root
            .join("adjusted")
            .join(format!("{}.model", Self::tag(method, channels)))
    }

    pub fn run_dir(&self, method: Method, channels: ChannelSet) -> PathBuf {
        self.root.join("runs").join(Self::tag(method, channels))
    }

    pub fn comparison_dir(&self) -> PathBuf {
        self.root.join("comparison")
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn hex_prefix(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hash of a file's bytes, used to tie models to the data they saw.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_prefix(&bytes))
}

/// Generates the synthetic dataset; returns the manifest path.
pub fn cmd_synth(cfg: &RunConfig, layout: &Layout) -> Result<PathBuf> {
    cfg.validate()?;
    generate_dataset(
        &cfg.bearings(),
        &cfg.grid(),
        &cfg.physics(),
        cfg.synth.runs_per_cell,
        cfg.seed,
        &layout.data_dir(),
    )
}

/// Low-pass, then pick the configured channels.
fn preprocess(
    cfg: &RunConfig,
    channels: ChannelSet,
    signals: Vec<Signal>,
    path: &Path,
) -> Result<Vec<Signal>> {
    let picked: Vec<Signal> = channels
        .indices()
        .iter()
        .map(|&i| {
            signals.get(i).cloned().ok_or_else(|| {
                Error::format(
                    path,
                    format!(
                        "channel set {channels} needs channel {}, file has {}",
                        i + 1,
                        signals.len()
                    ),
                )
            })
        })
        .collect::<Result<_>>()?;
    if cfg.preprocess.cutoff_hz <= 0.0 {
        return Ok(picked);
    }
    picked
        .into_iter()
        .map(|s| {
            let filter =
                Butterworth::lowpass(cfg.preprocess.order, cfg.preprocess.cutoff_hz, s.fs())
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Signal::new(filter.filtfilt(s.samples())?, s.fs())
        })
        .collect()
}

fn entry_features(
    cfg: &RunConfig,
    method: Method,
    channels: ChannelSet,
    base: &Path,
    entry: &ManifestEntry,
) -> Result<(ndarray::Array2<f64>, Vec<String>)> {
    let path = base.join(&entry.path);
    let signals = preprocess(cfg, channels, read_recording(&path)?, &path)?;
    let fs = signals[0].fs();
    let hilbert = method.uses_hilbert();
    let rows = if method.is_harmonic() {
        let hc = cfg.harmonic_config(fs, hilbert);
        hc.validate()?;
        (
            harmonic::recording_features(&signals, entry.condition().fo_hz(), &hc)?,
            hc.column_labels(),
        )
    } else {
        let bc = cfg.baseline_config(hilbert);
        (
            baseline::recording_features(&signals, &bc)?,
            bc.column_labels(fs),
        )
    };
    Ok(rows)
}

/// Feature matrix of every manifest recording, in manifest order.
pub fn extract_features(
    cfg: &RunConfig,
    method: Method,
    channels: ChannelSet,
    manifest: &Path,
) -> Result<FeatureMatrix> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::format(manifest, "manifest lists no recordings"));
    }
    let base = manifest.parent().unwrap_or(Path::new("."));
    let blocks = entries
        .par_iter()
        .map(|entry| {
            let (rows, columns) = entry_features(cfg, method, channels, base, entry)?;
            let meta = (0..rows.nrows())
                .map(|s| RowMeta {
                    bearing_id: entry.bearing_id.clone(),
                    class: entry.class,
                    condition: entry.condition(),
                    run: entry.run,
                    segment: s as u32,
                })
                .collect();
            FeatureMatrix::new(rows, meta, columns)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::concat(blocks)
}

/// Extracts the configured method and channel set; returns the store path.
pub fn cmd_extract(cfg: &RunConfig, layout: &Layout) -> Result<PathBuf> {
    let matrix = extract_features(cfg, cfg.method, cfg.channels, &layout.manifest())?;
    let path = layout.feature_store(cfg.method, cfg.channels);
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    write_feature_store(&path, &matrix)?;
    Ok(path)
}

/// Rows used to fit an adjustment: healthy rows outside the held-out
/// conditions and, if given, outside the test bearing.
pub fn adjustment_rows(
    meta: &[RowMeta],
    cfg: &RunConfig,
    test_bearing: Option<&str>,
    allow_mixed_training: bool,
) -> Result<(Vec<usize>, bool)> {
    let held_out = cfg.test_conditions();
    let train: Vec<usize> = (0..meta.len())
        .filter(|&i| {
            !held_out.contains(&meta[i].condition)
                && Some(meta[i].bearing_id.as_str()) != test_bearing
        })
        .collect();
    if allow_mixed_training {
        let healthy_only = train.iter().all(|&i| meta[i].class == Class::Healthy);
        return Ok((train, healthy_only));
    }
    let healthy: Vec<usize> = train
        .into_iter()
        .filter(|&i| meta[i].class == Class::Healthy)
        .collect();
    if healthy.is_empty() {
        return Err(Error::InvalidSplit(
            "no healthy training rows; refusing to fit on faulty data (pass --allow-mixed-training to override)".into(),
        ));
    }
    Ok((healthy, true))
}

#[derive(Debug, Clone)]
pub struct AdjustOutcome {
    pub model: AdjustmentModel,
    pub model_path: PathBuf,
    pub store_path: PathBuf,
}

/// Fits the adjustment on training rows of the extracted store and writes
/// the model and the adjusted store (every row adjusted).
pub fn cmd_adjust(
    cfg: &RunConfig,
    layout: &Layout,
    test_bearing: Option<&str>,
    allow_mixed_training: bool,
) -> Result<AdjustOutcome> {
    let store = layout.feature_store(cfg.method, cfg.channels);
    let matrix = read_feature_store(&store)?;
    let (rows, healthy_only) =
        adjustment_rows(matrix.meta(), cfg, test_bearing, allow_mixed_training)?;
    let manifest_hash = match layout.manifest().exists() {
        true => file_hash(&layout.manifest())?,
        false => file_hash(&store)?,
    };
    let model = AdjustmentModel::fit(&matrix.select_rows(&rows))?.with_provenance(Provenance {
        manifest_hash,
        healthy_only,
    });
    let adjusted = adjust_matrix(&matrix, &model)?;
    let model_path = layout.model(cfg.method, cfg.channels);
    let store_path = layout.adjusted_store(cfg.method, cfg.channels);
    if let Some(parent) = model_path.parent() {
        create_dir(parent)?;
    }
    model.save(&model_path)?;
    write_feature_store(&store_path, &adjusted)?;
    Ok(AdjustOutcome {
        model,
        model_path,
        store_path,
    })
}

/// Runs every split of `matrix`. Harmonic methods fit the adjustment per
/// split on that split's healthy training rows.
pub fn evaluate_matrix(
    cfg: &RunConfig,
    method: Method,
    channels: ChannelSet,
    matrix: &FeatureMatrix,
    allow_mixed_training: bool,
) -> Result<EvalReport> {
    let plans = make_splits(matrix.meta(), &cfg.test_conditions())?;
    let opts = EvalOptions {
        adjust: cfg.adjusts(method),
        pca_components: cfg.eval.pca_components,
        allow_mixed_training,
    };
    let cells = evaluate(matrix, &plans, &opts)?;
    Ok(EvalReport::new(
        method.as_str(),
        channels.as_str(),
        cfg.seed,
        cfg.hash(),
        REWEIGHTING,
        cells,
    ))
}

#[derive(Serialize)]
struct RunHeader<'a> {
    kind: &'a str,
    method: &'a str,
    channels: &'a str,
    seed: u64,
    config_hash: &'a str,
    reweighting: &'a str,
    adjusted: bool,
    pca_components: usize,
}

#[derive(Serialize)]
struct RunCell<'a> {
    kind: &'a str,
    seed: u64,
    config_hash: &'a str,
    #[serde(flatten)]
    cell: &'a CellResult,
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report values serialise")
}

/// Writes the per-metric CSVs, the markdown report, the JSON-lines run log
/// and `summary.json` into `dir`.
pub fn write_run(cfg: &RunConfig, report: &EvalReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for metric in [Metric::Accuracy, Metric::OcidError] {
        write_file(
            &dir.join(format!("{}.csv", metric.file_stem())),
            &report.to_csv(metric),
        )?;
    }
    write_file(&dir.join("report.md"), &report.to_markdown())?;

    let method: Method = report.method.parse()?;
    let mut log = json(&RunHeader {
        kind: "run",
        method: &report.method,
        channels: &report.channels,
        seed: report.seed,
        config_hash: &report.config_hash,
        reweighting: &report.reweighting,
        adjusted: cfg.adjusts(method),
        pca_components: cfg.eval.pca_components,
    });
    log.push('\n');
    for cell in &report.cells {
        log.push_str(&json(&RunCell {
            kind: "cell",
            seed: report.seed,
            config_hash: &report.config_hash,
            cell,
        }));
        log.push('\n');
    }
    write_file(&dir.join("run.jsonl"), &log)?;
    let mut summary = serde_json::to_string_pretty(report).expect("report serialises");
    summary.push('\n');
    write_file(&dir.join("summary.json"), &summary)
}

/// Evaluates the configured method and channel set. Uses the extracted
/// store; writes the run directory and returns its report.
pub fn cmd_eval(
    cfg: &RunConfig,
    layout: &Layout,
    allow_mixed_training: bool,
) -> Result<EvalReport> {
    let matrix = read_feature_store(&layout.feature_store(cfg.method, cfg.channels))?;
    let report = evaluate_matrix(cfg, cfg.method, cfg.channels, &matrix, allow_mixed_training)?;
    write_run(cfg, &report, &layout.run_dir(cfg.method, cfg.channels))?;
    Ok(report)
}

/// Methods x channel-set comparison of finished runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
    /// Set when the runs disagree on seed or configuration.
    pub warning: Option<String>,
}

impl Comparison {
    fn lookup(&self) -> BTreeMap<(&str, &str), &EvalReport> {
        self.reports
            .iter()
            .map(|r| ((r.channels.as_str(), r.method.as_str()), r))
            .collect()
    }

    fn axes(&self) -> (Vec<&str>, Vec<&str>) {
        let methods: Vec<&'static str> = Method::ALL.iter().map(|m| m.as_str()).collect();
        let sets: Vec<&'static str> = ChannelSet::ALL.iter().map(|c| c.as_str()).collect();
        (
            known_first(
                &sets,
                self.reports.iter().map(|r| r.channels.as_str()).collect(),
            ),
            known_first(
                &methods,
                self.reports.iter().map(|r| r.method.as_str()).collect(),
            ),
        )
    }

    fn value(r: &EvalReport, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => r.aggregate.accuracy,
            Metric::OcidError => r.aggregate.ocid_error,
        }
    }

    /// Rows are channel sets, columns methods.
    pub fn to_csv(&self, metric: Metric) -> String {
        let (sets, methods) = self.axes();
        let lookup = self.lookup();
        let mut out = String::from("channels");
        for m in &methods {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for s in &sets {
            out.push_str(s);
            for m in &methods {
                match lookup.get(&(*s, *m)) {
                    Some(r) => {
                        let _ = write!(out, ",{:.6}", Self::value(r, metric));
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let (sets, methods) = self.axes();
        let lookup = self.lookup();
        let mut out = String::from("# Method comparison\n\n");
        if let Some(w) = &self.warning {
            let _ = writeln!(out, "> **WARNING:** {w}\n");
        }
        let mut seeds: Vec<u64> = self.reports.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut hashes: Vec<&str> = self
            .reports
            .iter()
            .map(|r| r.config_hash.as_str())
            .collect();
        hashes.sort_unstable();
        hashes.dedup();
        let list = |v: Vec<String>| v.join(", ");
        let _ = writeln!(
            out,
            "seed: {} | config: {}",
            list(seeds.iter().map(u64::to_string).collect()),
            list(hashes.iter().map(|h| h.to_string()).collect())
        );
        for metric in [Metric::Accuracy, Metric::OcidError] {
            let _ = write!(out, "\n## {}\n\n| |", metric.title());
            for m in &methods {
                let _ = write!(out, " {m} |");
            }
            out.push_str("\n|---|");
            for _ in &methods {
                out.push_str("---|");
            }
            out.push('\n');
            for s in &sets {
                let _ = write!(out, "| {s} |");
                for m in &methods {
                    match lookup.get(&(*s, *m)) {
                        Some(r) => {
                            let _ = write!(out, " {} |", percent(Self::value(r, metric)));
                        }
                        None => out.push_str(" - |"),
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Names in canonical order, unknown ones after them alphabetically.
fn known_first<'a>(known: &[&'static str], seen: BTreeSet<&'a str>) -> Vec<&'a str> {
    let mut v: Vec<&'a str> = known.iter().copied().filter(|k| seen.contains(k)).collect();
    v.extend(seen.into_iter().filter(|s| !known.contains(s)));
    v
}

/// Loads `summary.json`and both metric files from each run directory.
pub fn load_run(dir: &Path) -> Result<EvalReport> {
    for metric in [Metric::Accuracy, Metric::OcidError] {
        let p = dir.join(format!("{}.csv", metric.file_stem()));
        if !p.is_file() {
            return Err(Error::format(
                &p,
                format!("missing {} file", metric.file_stem()),
            ));
        }
    }
    let p = dir.join("summary.json");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&p, e.to_string()))
}

pub fn compare(reports: Vec<EvalReport>) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no runs to compare".into()));
    }
    let seeds: BTreeSet<u64> = reports.iter().map(|r| r.seed).collect();
    let warning = (seeds.len() > 1).then(|| {
        format!(
            "runs use different seeds ({}); results are not directly comparable",
            seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        )
    });
    Ok(Comparison { reports, warning })
}

/// Builds the comparison from `run_dirs` and writes it under `out`.
pub fn cmd_report(run_dirs: &[PathBuf], out: &Path) -> Result<Comparison> {
    let reports = run_dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>>>()?;
    let comparison = compare(reports)?;
    create_dir(out)?;
    for metric in [Metric::Accuracy, Metric::OcidError] {
        write_file(
            &out.join(format!("{}.csv", metric.file_stem())),
            &comparison.to_csv(metric),
        )?;
    }
    write_file(&out.join("report.md"), &comparison.to_markdown())?;
    Ok(comparison)
}

/// Run directories present under the layout, in method/channel order.
pub fn finished_runs(layout: &Layout) -> Vec<PathBuf> {
    ChannelSet::ALL
        .iter()
        .flat_map(|&c| Method::ALL.iter().map(move |&m| layout.run_dir(m, c)))
        .filter(|d| d.join("summary.json").is_file())
        .collect()
}
