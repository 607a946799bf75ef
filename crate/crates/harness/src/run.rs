//! Executes a plan cell by cell. Finished cells are cached under their
//! config hash, so an interrupted run resumes where it stopped and cells
//! with identical physics (every NoRIS cell of a surface sweep) train once.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use cco_core::env::StarRisEnv;
use cco_core::moppo::{train, TrainStats};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::plan::{Cell, ExperimentPlan};
use crate::table::{write_csv, ResultRow, ResultTable};
use crate::HarnessError;

pub const CURVES_FILE: &str = "curves.csv";
pub const ARCHIVE_FILE: &str = "archive.csv";
pub const EVALUATIONS_FILE: &str = "evaluations.csv";
pub const CHECKPOINT_FILE: &str = "policy.ckpt";
/// Written last; its presence marks a finished cell.
pub const SUMMARY_FILE: &str = "summary.toml";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the plan's thread count when set.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub config_hash: String,
    pub strategy: String,
    pub seed: u64,
    pub coverage: f64,
    pub capacity: f64,
    pub stats: TrainStats,
}

fn cell_dir(out: &Path, hash: &str) -> PathBuf {
    out.join("cells").join(hash)
}

fn rel(hash: &str, file: &str) -> String {
    format!("cells/{hash}/{file}")
}

fn load_summary(dir: &Path) -> Option<CellSummary> {
    let text = std::fs::read_to_string(dir.join(SUMMARY_FILE)).ok()?;
    toml::from_str(&text).ok()
}

fn train_cell(plan: &ExperimentPlan, cell: &Cell, hash: &str, dir: &Path) -> Result<CellSummary, HarnessError> {
    let scenario = plan.cell_scenario(cell)?;
    let cfg = plan.train_config();
    let label = cell.strategy.label();
    let mut out = train(cell.strategy.trainer(), || StarRisEnv::new(&scenario), &cfg, cell.seed, hash)?;
    for r in &mut out.curves {
        r.strategy = label.clone();
    }
    let mut archive = out.archive.entries().to_vec();
    for e in archive.iter_mut().chain(out.evaluations.iter_mut()) {
        e.strategy = label.clone();
    }
    let [coverage, capacity] = out
        .archive
        .ideal_point()
        .ok_or_else(|| HarnessError::Format("training produced an empty archive".into()))?;

    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_csv(&dir.join(CURVES_FILE), &out.curves)?;
    write_csv(&dir.join(ARCHIVE_FILE), &archive)?;
    write_csv(&dir.join(EVALUATIONS_FILE), &out.evaluations)?;
    out.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    let summary = CellSummary {
        config_hash: hash.to_string(),
        strategy: label,
        seed: cell.seed,
        coverage,
        capacity,
        stats: out.stats,
    };
    let path = dir.join(SUMMARY_FILE);
    std::fs::write(&path, toml::to_string(&summary).expect("summary serializes"))
        .map_err(|e| HarnessError::io(&path, e))?;
    Ok(summary)
}

fn run_cell(plan: &ExperimentPlan, cell: &Cell, hash: &str, out: &Path) -> Result<CellSummary, String> {
    let dir = cell_dir(out, hash);
    if let Some(s) = load_summary(&dir) {
        if s.config_hash == hash {
            info!("cell {hash} already finished, reusing");
            return Ok(s);
        }
    }
    info!("training cell {hash}: {} at {} seed {}", cell.strategy.label(), cell.axis_value, cell.seed);
    match catch_unwind(AssertUnwindSafe(|| train_cell(plan, cell, hash, &dir))) {
        Ok(Ok(s)) => Ok(s),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "cell panicked".into())),
    }
}

/// Runs every cell of `plan` and writes `results.csv` under the output
/// directory. Cell failures become rows with an error message; only plan
/// and I/O errors on the table itself abort.
pub fn run_plan(plan: &ExperimentPlan, opts: &RunOptions) -> Result<ResultTable, HarnessError> {
    plan.validate()?;
    let out = &opts.out_dir;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;

    let cells = plan.cells();
    let hashes = cells.iter().map(|c| plan.cell_hash(c)).collect::<Result<Vec<_>, _>>()?;
    let mut unique: BTreeMap<&str, &Cell> = BTreeMap::new();
    for (c, h) in cells.iter().zip(&hashes) {
        unique.entry(h.as_str()).or_insert(c);
    }
    let jobs: Vec<(&str, &Cell)> = unique.into_iter().collect();

    let threads = opts.threads.unwrap_or(plan.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Plan(format!("thread pool: {e}")))?;
    let results: BTreeMap<&str, Result<CellSummary, String>> = pool.install(|| {
        jobs.par_iter().map(|&(h, c)| (h, run_cell(plan, c, h, out))).collect()
    });

    let rows = cells
        .iter()
        .zip(&hashes)
        .map(|(c, h)| {
            let base = ResultRow {
                axis: plan.axis.name().into(),
                axis_value: c.axis_value,
                strategy: c.strategy.label(),
                seed: c.seed,
                final_coverage: f64::NAN,
                final_capacity: f64::NAN,
                curve_file: String::new(),
                archive_file: String::new(),
                config_hash: h.clone(),
                error: String::new(),
            };
            match &results[h.as_str()] {
                Ok(s) => ResultRow {
                    final_coverage: s.coverage,
                    final_capacity: s.capacity,
                    curve_file: rel(h, CURVES_FILE),
                    archive_file: rel(h, ARCHIVE_FILE),
                    ..base
                },
                Err(e) => {
                    warn!("cell {h} failed: {e}");
                    ResultRow { error: e.clone(), ..base }
                }
            }
        })
        .collect();
    let table = ResultTable { rows, root: out.clone() };
    table.write()?;
    Ok(table)
}
