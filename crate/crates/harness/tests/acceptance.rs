//! Acceptance criteria, one PASS/FAIL line each. Desk-scale training cells
//! are shared between criteria and written under `CCO_ACCEPTANCE_DIR` (a
//! temporary directory when unset); pointing the variable at an existing
//! directory reuses finished cells.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cco_core::env::MoEnv;
use cco_core::moppo::toy::{TabularMomdp, ToyEnv};
use cco_core::moppo::trainer::greedy_action;
use cco_core::moppo::{dominates, train, ArchiveEntry, EpisodeRecord, Preference, Strategy, TrainConfig};
use cco_core::scenario::Scenario;
use cco_harness::verify::{self, VerifyOptions};
use cco_harness::{run_plan, Axis, Budget, ExperimentPlan, ResultTable, RunOptions, StrategySpec};

const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { name, passed, detail: detail.into() }
}

fn from_suite(name: &'static str, limit: Duration, f: impl FnOnce() -> verify::Check) -> Outcome {
    let t = Instant::now();
    let r = f();
    let el = t.elapsed();
    let in_time = el < limit;
    let (ok, msg) = match r {
        Ok(m) => (in_time, m),
        Err(m) => (false, m),
    };
    check(name, ok, format!("{msg}; {:.2}s (limit {}s)", el.as_secs_f64(), limit.as_secs()))
}

fn plan(name: &str, axis: Axis, values: &[f64], strategies: &[StrategySpec]) -> ExperimentPlan {
    ExperimentPlan {
        name: name.into(),
        axis,
        values: values.to_vec(),
        strategies: strategies.to_vec(),
        seeds: SEEDS.to_vec(),
        budget: Budget { episodes: 200, steps: 200 },
        scenario: None,
        training: TrainConfig::default(),
        threads: 0,
    }
}

fn run(root: &Path, p: &ExperimentPlan) -> (ResultTable, Duration) {
    let t = Instant::now();
    let table = run_plan(p, &RunOptions { out_dir: root.join(&p.name), threads: None })
        .unwrap_or_else(|e| panic!("plan {} failed to run: {e}", p.name));
    for r in table.failures() {
        eprintln!("cell failure in {}: {} {} seed {}: {}", p.name, r.strategy, r.axis_value, r.seed, r.error);
    }
    (table, t.elapsed())
}

fn mean_over_seeds(t: &ResultTable, strategy: &str, v: f64) -> Option<[f64; 2]> {
    let rows: Vec<_> = t.select(strategy, v).collect();
    if rows.len() != SEEDS.len() {
        return None;
    }
    let n = rows.len() as f64;
    Some([
        rows.iter().map(|r| r.final_coverage).sum::<f64>() / n,
        rows.iter().map(|r| r.final_capacity).sum::<f64>() / n,
    ])
}

fn fmt_pair(p: Option<[f64; 2]>) -> String {
    p.map_or("missing".into(), |p| format!("({:.4}, {:.4})", p[0], p[1]))
}

fn archive_points(t: &ResultTable, strategy: &str, v: f64) -> Vec<[f64; 2]> {
    t.select(strategy, v)
        .flat_map(|r| t.archive(r).expect("archive readable"))
        .map(|e| e.point())
        .collect()
}

fn toy_criterion() -> Outcome {
    let t = Instant::now();
    let mdp = TabularMomdp::treasure_grid(0.9);
    let cfg = TrainConfig { episodes: 10_000, actor_lr: 1e-3, hidden: 32, ..TrainConfig::default() };
    let out = match train(Strategy::Avus, || Ok(ToyEnv::new(TabularMomdp::treasure_grid(0.9), 12)), &cfg, 0, "toy") {
        Ok(o) => o,
        Err(e) => return check("toy_momdp_avus", false, format!("training failed: {e}")),
    };
    let actor = &out.checkpoint.entries[0].0;
    let env = ToyEnv::new(mdp.clone(), 12);
    let mut ratios = Vec::new();
    for k in 0..5 {
        let p = Preference::new(k as f64 / 4.0);
        let policy: Vec<usize> = (0..mdp.n_states)
            .map(|s| greedy_action(actor, &env.action_blocks(), &env.one_hot(s), Some(p)).expect("action")[0])
            .collect();
        let v = mdp.policy_values(&policy, 1e-12)[mdp.start];
        let opt = mdp.value_iteration(p, 1e-12)[mdp.start];
        ratios.push(p.scalarize(v) / opt);
    }
    let el = t.elapsed();
    let ok = ratios.iter().all(|r| *r >= 0.95) && el < Duration::from_secs(120);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    check(
        "toy_momdp_avus",
        ok,
        format!(
            "return/optimal per preference [{}], final homotopy {:.3}; {:.1}s",
            shown.join(", "),
            out.stats.final_homotopy,
            el.as_secs_f64()
        ),
    )
}

/// Mean of a trailing window-20 moving average over the first and last
/// fifth of the episodes.
fn progress(curve: &[EpisodeRecord]) -> (f64, f64) {
    let mut c = curve.to_vec();
    c.sort_by_key(|r| r.episode);
    let r: Vec<f64> = c.iter().map(|x| x.scalarized_reward).collect();
    let w = 20;
    let ma: Vec<(usize, f64)> =
        (w - 1..r.len()).map(|i| (i, r[i + 1 - w..=i].iter().sum::<f64>() / w as f64)).collect();
    let fifth = r.len() / 5;
    let avg = |lo: usize, hi: usize| {
        let v: Vec<f64> = ma.iter().filter(|(i, _)| *i >= lo && *i < hi).map(|x| x.1).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    (avg(0, fifth.max(w)), avg(r.len() - fifth, r.len()))
}

fn determinism(root: &Path) -> Outcome {
    let mut p = plan("determinism", Axis::NRis, &[1.0, 2.0], &[StrategySpec::Avus, StrategySpec::BM1]);
    p.seeds = vec![5];
    p.budget = Budget { episodes: 4, steps: 10 };
    let a = root.join("det-a");
    let b = root.join("det-b");
    let files = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let t = run_plan(&p, &RunOptions { out_dir: dir.to_path_buf(), threads: None }).expect("plan runs");
        let mut out = vec![("results.csv".to_string(), std::fs::read(t.path()).expect("table"))];
        for r in &t.rows {
            for f in [&r.curve_file, &r.archive_file] {
                out.push((f.clone(), std::fs::read(t.resolve(f)).expect("cell file")));
            }
        }
        out
    };
    let fa = files(&a);
    let fb = files(&b);
    let same = fa == fb && !fa.is_empty();
    check("determinism", same, format!("{} CSV files compared byte for byte", fa.len()))
}

fn main() -> ExitCode {
    let _ = env_logger::builder().is_test(true).try_init();
    let keep = std::env::var_os("CCO_ACCEPTANCE_DIR").map(PathBuf::from);
    let tmp = tempfile::tempdir().expect("tempdir");
    let root = keep.unwrap_or_else(|| tmp.path().to_path_buf());
    let desk = Scenario::desk();
    let mut results = Vec::new();
    let emit = |o: Outcome, results: &mut Vec<Outcome>| {
        println!("{} {:<26} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        results.push(o);
    };

    emit(
        from_suite("min_norm_oracle", Duration::from_secs(1), || {
            verify::min_norm_oracle(100, VerifyOptions::default())
        }),
        &mut results,
    );
    emit(from_suite("gradient_check", Duration::from_secs(10), || verify::gradient_check(10)), &mut results);
    emit(
        from_suite("channel_normalization", Duration::from_secs(10), || verify::channel_normalization(100_000)),
        &mut results,
    );
    emit(
        from_suite("constraint_safety", Duration::from_secs(600), || verify::constraint_safety(&desk, 10_000)),
        &mut results,
    );
    emit(from_suite("telescoping", Duration::from_secs(600), || verify::telescoping(&desk, 5)), &mut results);
    emit(toy_criterion(), &mut results);

    let noris = StrategySpec::NoRis.label();
    let avus = StrategySpec::Avus.label();
    let lfus = StrategySpec::Lfus.label();
    let (ns, ns_time) = run(&root, &plan("n_ris", Axis::NRis, &[1.0, 2.0, 3.0], &[StrategySpec::Avus, StrategySpec::NoRis]));
    let (bm, bm_time) = run(
        &root,
        &plan("baselines", Axis::NRis, &[2.0], &[StrategySpec::Lfus, StrategySpec::BM1, StrategySpec::BM2]),
    );
    let (grids, grids_time) = run(&root, &plan("grids", Axis::Grids, &[9.0, 16.0, 25.0], &[StrategySpec::Avus]));

    // Pareto dominance
    {
        let mut all_ok = true;
        let mut n_archives = 0;
        for t in [&ns, &bm, &grids] {
            for r in t.rows.iter().filter(|r| r.ok()) {
                let a: Vec<ArchiveEntry> = t.archive(r).expect("archive readable");
                n_archives += 1;
                all_ok &= a.iter().all(|x| a.iter().all(|y| !dominates(x.point(), y.point())));
            }
        }
        let ours: Vec<[f64; 2]> =
            archive_points(&ns, &avus, 2.0).into_iter().chain(archive_points(&bm, &lfus, 2.0)).collect();
        let mut parts = vec![format!("{n_archives} archives mutually non-dominated: {all_ok}")];
        let mut beats = true;
        for b in [StrategySpec::BM1, StrategySpec::BM2] {
            let base = archive_points(&bm, &b.label(), 2.0);
            let survivors = ours.iter().filter(|p| !base.iter().any(|q| dominates(*q, **p))).count();
            beats &= survivors > 0 && !base.is_empty();
            parts.push(format!("{}: {survivors}/{} avus/lfus points not dominated", b.label(), ours.len()));
        }
        emit(check("pareto_dominance", all_ok && beats, parts.join("; ")), &mut results);

        let mut pool: Vec<[f64; 2]> = ours.clone();
        for b in [StrategySpec::BM1, StrategySpec::BM2] {
            pool.extend(archive_points(&bm, &b.label(), 2.0));
        }
        let conflict = pool.iter().any(|a| pool.iter().any(|b| a[0] > b[0] && a[1] < b[1]));
        emit(check("coverage_capacity_conflict", conflict, format!("{} trained outcomes pooled", pool.len())), &mut results);
    }

    // Directional trends
    {
        let limit = Duration::from_secs(30 * 60);
        let m: Vec<Option<[f64; 2]>> = [1.0, 2.0, 3.0].iter().map(|&v| mean_over_seeds(&ns, &avus, v)).collect();
        let mono = m.iter().all(Option::is_some)
            && m.windows(2).all(|w| {
                let (a, b) = (w[0].unwrap(), w[1].unwrap());
                b[0] >= a[0] && b[1] >= a[1]
            });
        emit(
            check(
                "trend_n_ris_nondecreasing",
                mono && ns_time < limit,
                format!(
                    "avus mean (cov, cap) at 1/2/3 surfaces: {}; {:.0}s",
                    m.iter().map(|p| fmt_pair(*p)).collect::<Vec<_>>().join(" "),
                    ns_time.as_secs_f64()
                ),
            ),
            &mut results,
        );

        let base = mean_over_seeds(&ns, &noris, 1.0);
        let above = base.is_some()
            && m.iter().all(|p| p.is_some_and(|p| p[0] >= base.unwrap()[0] && p[1] >= base.unwrap()[1]));
        emit(
            check("trend_ris_above_noris", above, format!("noris mean {} vs avus above", fmt_pair(base))),
            &mut results,
        );

        let g: Vec<Option<[f64; 2]>> =
            [9.0, 16.0, 25.0].iter().map(|&v| mean_over_seeds(&grids, &avus, v)).collect();
        let dec = g.iter().all(Option::is_some) && g.windows(2).all(|w| w[1].unwrap()[1] < w[0].unwrap()[1]);
        emit(
            check(
                "trend_capacity_vs_grids",
                dec && grids_time < limit,
                format!(
                    "avus mean (cov, cap) at N=9/16/25: {}; {:.0}s",
                    g.iter().map(|p| fmt_pair(*p)).collect::<Vec<_>>().join(" "),
                    grids_time.as_secs_f64()
                ),
            ),
            &mut results,
        );
        log::info!("baseline plan took {:.0}s", bm_time.as_secs_f64());
    }

    // Learning progress
    {
        let mut ok = true;
        let mut parts = Vec::new();
        for (t, s) in [(&ns, &avus), (&bm, &lfus)] {
            let mut improved = 0;
            let mut pairs = Vec::new();
            for r in t.select(s, 2.0) {
                let (first, last) = progress(&t.curves(r).expect("curves readable"));
                if last > first {
                    improved += 1;
                }
                pairs.push(format!("{first:.4}->{last:.4}"));
            }
            ok &= improved >= 2;
            parts.push(format!("{s}: {improved}/3 improved [{}]", pairs.join(" ")));
        }
        emit(check("learning_progress", ok, parts.join("; ")), &mut results);
    }

    emit(determinism(&root), &mut results);

    let failed = results.iter().filter(|o| !o.passed).count();
    println!("{} criteria, {} passed, {failed} failed", results.len(), results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
