//! Experiment orchestration: run grids over (method x label count x split
//! seed), hyperparameter sweeps, the ablation grid, and rank-accuracy
//! traces, all emitted as CSV.
//!
//! Determinism contract: a run is a pure function of (records, method,
//! label count, split seed, train config). Runs may execute in parallel
//! (bounded by `jobs`), but rows are ordered by the configured method and
//! label order and then by split seed before anything is written, so
//! repeated invocations emit byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    generate_synthetic, load_manifest, make_split, NormalizationSpec, SplitData, SyntheticSpec,
    VideoRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, median, EvalResult};
use crate::qmodel::AugmentationSpec;
use crate::rng::mix;
use crate::ssl::{train, Method, TrainConfig, TrainReport};

fn default_labels() -> Vec<usize> {
    vec![30, 60, 120]
}
fn default_methods() -> Vec<Method> {
    vec![Method::Supervised, Method::Lpr]
}
fn default_splits() -> usize {
    10
}

/// Top-level experiment description, loadable from JSON with CLI overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Dataset manifest to load; mutually exclusive with `synthetic`.
    pub manifest: Option<PathBuf>,
    /// Synthetic dataset to generate in memory.
    pub synthetic: Option<SyntheticSpec>,
    /// Name used in result rows; defaults to the manifest stem or "synthetic".
    pub dataset_name: Option<String>,
    pub methods: Vec<Method>,
    pub labels: Vec<usize>,
    /// Number of train/test splits; split seeds are `base_split_seed..+num_splits`.
    pub num_splits: usize,
    pub base_split_seed: u64,
    pub train: TrainConfig,
    /// Worker threads for run-level parallelism; 0 uses all cores.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            manifest: None,
            synthetic: None,
            dataset_name: None,
            methods: default_methods(),
            labels: default_labels(),
            num_splits: default_splits(),
            base_split_seed: 0,
            train: TrainConfig::default(),
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.labels.is_empty() {
            return Err(Error::Config("no label counts requested".into()));
        }
        if self.num_splits == 0 {
            return Err(Error::Config("num_splits must be at least 1".into()));
        }
        if self.manifest.is_some() && self.synthetic.is_some() {
            return Err(Error::Config(
                "give either a manifest or a synthetic spec, not both".into(),
            ));
        }
        if self.manifest.is_none() && self.synthetic.is_none() {
            return Err(Error::Config(
                "need a dataset: set `manifest` or `synthetic`".into(),
            ));
        }
        self.train.validate()
    }

    pub fn split_seeds(&self) -> Vec<u64> {
        (0..self.num_splits as u64)
            .map(|i| self.base_split_seed + i)
            .collect()
    }

    pub fn load_records(&self) -> Result<(String, Vec<VideoRecord>)> {
        if let Some(path) = &self.manifest {
            let name = self.dataset_name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            Ok((name, load_manifest(path)?))
        } else {
            let spec = self.synthetic.as_ref().expect("validated config");
            let name = self.dataset_name.clone().unwrap_or_else(|| "synthetic".into());
            Ok((name, generate_synthetic(spec)?))
        }
    }
}

/// One results-table row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub dataset: String,
    pub method: Method,
    pub labels: usize,
    pub split_seed: u64,
    pub srocc: Option<f64>,
    pub plcc: Option<f64>,
}

/// Output of one (method, labels, split) training run.
pub struct RunOutcome {
    pub row: RunRow,
    pub report: TrainReport,
    pub eval: EvalResult,
}

/// Builds the split, fits normalization on the labelled subset, applies it
/// to every record, trains, and evaluates on the held-out test set.
pub fn run_single(
    records: &[VideoRecord],
    dataset: &str,
    method: Method,
    labels: usize,
    split_seed: u64,
    base: &TrainConfig,
) -> Result<RunOutcome> {
    let split = make_split(records, labels, split_seed)?;
    let labelled_refs: Vec<&VideoRecord> = {
        let data = SplitData::resolve(records, &split)?;
        data.labelled.iter().map(|&(r, _)| r).collect()
    };
    let norm = NormalizationSpec::fit(&labelled_refs)?;
    let normalized = norm.apply_all(records);

    let cfg = TrainConfig {
        method,
        seed: mix(&[base.seed, split_seed, labels as u64]),
        ..base.clone()
    };
    let report = train(&normalized, &split, &cfg)?;

    let data = SplitData::resolve(&normalized, &split)?;
    let aspec = AugmentationSpec {
        strong_fps: cfg.strong_fps,
        weak_divisor: cfg.weak_divisor,
    };
    let eval = evaluate_model(&report.student, &data.test, &aspec)?;
    Ok(RunOutcome {
        row: RunRow {
            dataset: dataset.into(),
            method,
            labels,
            split_seed,
            srocc: eval.srocc,
            plcc: eval.plcc,
        },
        report,
        eval,
    })
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs one (method, labels) group across all split seeds in parallel.
pub fn run_group(
    records: &[VideoRecord],
    dataset: &str,
    method: Method,
    labels: usize,
    seeds: &[u64],
    base: &TrainConfig,
    jobs: usize,
) -> Result<Vec<RunOutcome>> {
    with_pool(jobs, || {
        seeds
            .par_iter()
            .map(|&s| run_single(records, dataset, method, labels, s, base))
            .collect::<Result<Vec<RunOutcome>>>()
    })?
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_record(header)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    Ok(w)
}

fn write_row(w: &mut csv::Writer<fs::File>, path: &Path, row: &[String]) -> Result<()> {
    w.write_record(row)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Runs the full grid and writes `results.csv`, `medians.csv`, and one
/// TrainReport JSON per run under `out_dir/reports/`. Completed groups are
/// flushed before any later failure aborts the command.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<RunRow>> {
    cfg.validate()?;
    let (dataset, records) = cfg.load_records()?;
    let seeds = cfg.split_seeds();

    let results_path = out_dir.join("results.csv");
    let mut results = open_csv(
        &results_path,
        &["dataset", "method", "labels", "split_seed", "srocc", "plcc"],
    )?;
    let reports_dir = out_dir.join("reports");
    fs::create_dir_all(&reports_dir).map_err(|e| Error::io(&reports_dir, e))?;

    let mut rows = Vec::new();
    let mut medians: Vec<(Method, usize, Option<f64>, Option<f64>)> = Vec::new();
    for &method in &cfg.methods {
        for &labels in &cfg.labels {
            let outcomes =
                run_group(&records, &dataset, method, labels, &seeds, &cfg.train, cfg.jobs)?;
            let sroccs: Vec<f64> = outcomes.iter().filter_map(|o| o.row.srocc).collect();
            let plccs: Vec<f64> = outcomes.iter().filter_map(|o| o.row.plcc).collect();
            medians.push((method, labels, median(&sroccs), median(&plccs)));
            for o in outcomes {
                write_row(
                    &mut results,
                    &results_path,
                    &[
                        o.row.dataset.clone(),
                        o.row.method.to_string(),
                        o.row.labels.to_string(),
                        o.row.split_seed.to_string(),
                        fmt_opt(o.row.srocc),
                        fmt_opt(o.row.plcc),
                    ],
                )?;
                let report_path = reports_dir.join(format!(
                    "{}_{}_{}_s{}.json",
                    dataset, o.row.method, o.row.labels, o.row.split_seed
                ));
                let json = serde_json::to_vec_pretty(&o.report)
                    .map_err(|e| Error::Config(format!("serialize report: {e}")))?;
                fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
                rows.push(o.row);
            }
        }
    }

    let medians_path = out_dir.join("medians.csv");
    let mut mw = open_csv(
        &medians_path,
        &["dataset", "method", "labels", "median_srocc", "median_plcc"],
    )?;
    for (method, labels, ms, mp) in medians {
        write_row(
            &mut mw,
            &medians_path,
            &[
                dataset.clone(),
                method.to_string(),
                labels.to_string(),
                fmt_opt(ms),
                fmt_opt(mp),
            ],
        )?;
    }
    Ok(rows)
}

fn first_label(cfg: &ExperimentConfig) -> usize {
    *cfg.labels.first().expect("validated config")
}

/// Median SROCC of an LPR run grid for each threshold in `taus`; emits
/// `sweep_tau.csv` sorted by threshold.
pub fn sweep_tau(cfg: &ExperimentConfig, taus: &[f64], out_dir: &Path) -> Result<Vec<(f64, Option<f64>)>> {
    cfg.validate()?;
    if taus.is_empty() || taus.iter().any(|t| *t < 0.0) {
        return Err(Error::Config("tau sweep needs nonnegative values".into()));
    }
    let (dataset, records) = cfg.load_records()?;
    let seeds = cfg.split_seeds();
    let labels = first_label(cfg);

    let mut points: Vec<f64> = taus.to_vec();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut curve = Vec::with_capacity(points.len());
    for &tau in &points {
        let train_cfg = TrainConfig {
            tau,
            ..cfg.train.clone()
        };
        let outcomes =
            run_group(&records, &dataset, Method::Lpr, labels, &seeds, &train_cfg, cfg.jobs)?;
        let sroccs: Vec<f64> = outcomes.iter().filter_map(|o| o.row.srocc).collect();
        curve.push((tau, median(&sroccs)));
    }

    let path = out_dir.join("sweep_tau.csv");
    let mut w = open_csv(&path, &["tau", "median_srocc"])?;
    for &(tau, ms) in &curve {
        write_row(&mut w, &path, &[tau.to_string(), fmt_opt(ms)])?;
    }
    Ok(curve)
}

/// Median SROCC per strong-augmentation frame rate; emits `sweep_fps.csv`
/// sorted by rate.
pub fn sweep_fps(
    cfg: &ExperimentConfig,
    rates: &[f64],
    out_dir: &Path,
) -> Result<Vec<(f64, Option<f64>)>> {
    cfg.validate()?;
    if rates.is_empty() || rates.iter().any(|r| *r <= 0.0) {
        return Err(Error::Config("fps sweep needs positive rates".into()));
    }
    let (dataset, records) = cfg.load_records()?;
    let seeds = cfg.split_seeds();
    let labels = first_label(cfg);

    let mut points: Vec<f64> = rates.to_vec();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut curve = Vec::with_capacity(points.len());
    for &fps in &points {
        let train_cfg = TrainConfig {
            strong_fps: fps,
            ..cfg.train.clone()
        };
        let outcomes =
            run_group(&records, &dataset, Method::Lpr, labels, &seeds, &train_cfg, cfg.jobs)?;
        let sroccs: Vec<f64> = outcomes.iter().filter_map(|o| o.row.srocc).collect();
        curve.push((fps, median(&sroccs)));
    }

    let path = out_dir.join("sweep_fps.csv");
    let mut w = open_csv(&path, &["strong_fps", "median_srocc"])?;
    for &(fps, ms) in &curve {
        write_row(&mut w, &path, &[fps.to_string(), fmt_opt(ms)])?;
    }
    Ok(curve)
}

/// The five ablation variants: the full pipeline and the four component
/// knockouts.
pub const ABLATION_VARIANTS: [(&str, bool, bool, bool, bool); 5] = [
    // (name, use_ema, use_augmentation, use_threshold, use_rank)
    ("full", true, true, true, true),
    ("no-ema", false, true, true, true),
    ("no-augmentation", true, false, true, true),
    ("no-threshold", true, true, false, true),
    ("no-threshold-no-rank", true, true, false, false),
];

/// Runs the ablation grid at the first configured label count and emits
/// `ablation.csv` with one row per variant.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<(String, Option<f64>)>> {
    cfg.validate()?;
    let (dataset, records) = cfg.load_records()?;
    let seeds = cfg.split_seeds();
    let labels = first_label(cfg);

    let mut rows = Vec::with_capacity(ABLATION_VARIANTS.len());
    for &(name, use_ema, use_augmentation, use_threshold, use_rank) in &ABLATION_VARIANTS {
        let train_cfg = TrainConfig {
            use_ema,
            use_augmentation,
            use_threshold,
            use_rank,
            ..cfg.train.clone()
        };
        let outcomes =
            run_group(&records, &dataset, Method::Lpr, labels, &seeds, &train_cfg, cfg.jobs)?;
        let sroccs: Vec<f64> = outcomes.iter().filter_map(|o| o.row.srocc).collect();
        rows.push((name.to_string(), median(&sroccs)));
    }

    let path = out_dir.join("ablation.csv");
    let mut w = open_csv(
        &path,
        &[
            "variant",
            "use_ema",
            "use_augmentation",
            "use_threshold",
            "use_rank",
            "median_srocc",
        ],
    )?;
    for (row, &(_, ema, aug, thr, rank)) in rows.iter().zip(&ABLATION_VARIANTS) {
        write_row(
            &mut w,
            &path,
            &[
                row.0.clone(),
                ema.to_string(),
                aug.to_string(),
                thr.to_string(),
                rank.to_string(),
                fmt_opt(row.1),
            ],
        )?;
    }
    Ok(rows)
}

/// Median pseudo-rank accuracy per refresh iteration over LPR runs at the
/// first configured label count; emits `rank_accuracy.csv`.
pub fn trace_rank_accuracy(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    let (dataset, records) = cfg.load_records()?;
    let seeds = cfg.split_seeds();
    let labels = first_label(cfg);

    let outcomes =
        run_group(&records, &dataset, Method::Lpr, labels, &seeds, &cfg.train, cfg.jobs)?;
    let n_refreshes = outcomes
        .iter()
        .map(|o| o.report.refreshes.len())
        .min()
        .unwrap_or(0);
    let mut trace = Vec::with_capacity(n_refreshes);
    for k in 0..n_refreshes {
        let iteration = outcomes[0].report.refreshes[k].iteration;
        let accs: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.report.refreshes[k].rank_accuracy)
            .collect();
        let acc = median(&accs).ok_or_else(|| {
            Error::Training(
                "rank-accuracy trace needs diagnostic labels for the unlabelled set".into(),
            )
        })?;
        trace.push((iteration, acc));
    }
    if trace.is_empty() {
        return Err(Error::Training(
            "no refreshes recorded; is ssl_iters at least refresh_every?".into(),
        ));
    }

    let path = out_dir.join("rank_accuracy.csv");
    let mut w = open_csv(&path, &["iteration", "accuracy"])?;
    for &(it, acc) in &trace {
        write_row(&mut w, &path, &[it.to_string(), acc.to_string()])?;
    }
    Ok(trace)
}
