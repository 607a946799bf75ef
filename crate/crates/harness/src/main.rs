use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cco_core::moppo::{ArchiveEntry, ParetoArchive};
use cco_harness::chart::emit_charts;
use cco_harness::table::{read_csv, write_csv};
use cco_harness::verify::{run_all, VerifyOptions};
use cco_harness::{run_plan, ExperimentPlan, ResultTable, RunOptions};

const EXIT_PLAN: u8 = 1;
const EXIT_VERIFY: u8 = 2;

#[derive(Parser)]
#[command(name = "cco", version, about = "Coverage/capacity experiments on STAR-RIS networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Replaces the plan's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    budget_episodes: Option<usize>,
    #[arg(long, global = true)]
    budget_steps: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a plan, then chart the results.
    Run { plan: PathBuf },
    /// Render charts from a results table.
    Chart { table: PathBuf },
    /// Run the oracle and invariant suites.
    Verify {
        /// Shift every min-norm weight by this amount (mutation check).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        perturb_nu: f64,
    },
    /// Reduce archive files to their joint non-dominated set.
    Pareto {
        #[arg(required = true)]
        archives: Vec<PathBuf>,
    },
}

fn run(cli: &Cli, plan_path: &PathBuf) -> anyhow::Result<bool> {
    let mut plan = ExperimentPlan::load(plan_path)?;
    if let Some(s) = cli.seed {
        plan.seeds = vec![s];
    }
    if let Some(e) = cli.budget_episodes {
        plan.budget.episodes = e;
    }
    if let Some(s) = cli.budget_steps {
        plan.budget.steps = s;
    }
    let opts = RunOptions { out_dir: cli.out_dir.clone(), threads: cli.threads };
    let table = run_plan(&plan, &opts)?;
    let failed = table.failures().count();
    println!("{} rows -> {}", table.rows.len(), table.path().display());
    for r in table.failures() {
        eprintln!("failed: {} {} seed {}: {}", r.strategy, r.axis_value, r.seed, r.error);
    }
    if table.rows.iter().any(|r| r.ok()) {
        chart(&table, &cli.out_dir)?;
    }
    Ok(failed == 0)
}

fn chart(table: &ResultTable, out: &PathBuf) -> anyhow::Result<bool> {
    let report = emit_charts(table, out)?;
    for p in &report.written {
        println!("wrote {}", p.display());
    }
    for (p, e) in &report.failed {
        eprintln!("chart {} failed: {e}", p.display());
    }
    Ok(report.failed.is_empty())
}

fn pareto(cli: &Cli, files: &[PathBuf]) -> anyhow::Result<bool> {
    let mut archive = ParetoArchive::new();
    for f in files {
        let rows: Vec<ArchiveEntry> = read_csv(f)?;
        archive.extend(rows);
    }
    let mut front = archive.entries().to_vec();
    front.sort_by(|a, b| a.coverage.total_cmp(&b.coverage).then(b.capacity.total_cmp(&a.capacity)));
    let path = cli.out_dir.join("front.csv");
    write_csv(&path, &front)?;
    for e in &front {
        println!("{:.6} {:.6} {} seed {} {}", e.coverage, e.capacity, e.strategy, e.seed, e.preference);
    }
    println!("{} non-dominated points -> {}", front.len(), path.display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { plan } => run(&cli, plan),
        Command::Chart { table } => ResultTable::read(table)
            .with_context(|| format!("reading {}", table.display()))
            .and_then(|t| chart(&t, &cli.out_dir)),
        Command::Pareto { archives } => pareto(&cli, archives),
        Command::Verify { perturb_nu } => {
            let report = run_all(VerifyOptions { nu_perturbation: *perturb_nu });
            print!("{}", report.render());
            if report.passed() {
                return ExitCode::SUCCESS;
            }
            return ExitCode::from(EXIT_VERIFY);
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_PLAN),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PLAN)
        }
    }
}
