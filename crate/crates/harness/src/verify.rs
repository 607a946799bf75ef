//! Self-verification: each suite checks an implementation against an
//! independent oracle or an invariant and reports its own timing.

use std::time::{Duration, Instant};

use cco_core::channel::{array_response, rician_sample};
use cco_core::env::{MoEnv, StarRisEnv};
use cco_core::moppo::toy::TabularMomdp;
use cco_core::moppo::{combine, dominates, min_norm_nu, norm_sq, ArchiveEntry, ParetoArchive, Preference};
use cco_core::nn::Mlp;
use cco_core::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{line_chart, parse_markers, Series};

pub type Check = Result<String, String>;

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Added to every computed min-norm weight before it is checked.
    pub nu_perturbation: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub outcome: Check,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.outcome.is_ok())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let (tag, msg) = match &s.outcome {
                Ok(m) => ("PASS", m),
                Err(m) => ("FAIL", m),
            };
            out.push_str(&format!("{tag} {:<22} {:>9.3}s  {msg}\n", s.name, s.elapsed.as_secs_f64()));
        }
        out
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Check) -> SuiteResult {
    let t = Instant::now();
    let outcome = f();
    SuiteResult { name, outcome, elapsed: t.elapsed() }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// Minimizes `|nu g1 + (1 - nu) g2|^2` over a uniform grid of `steps + 1`
/// points in [0, 1]; the squared norm is expanded into its quadratic
/// coefficients once.
pub fn grid_search_nu(g1: &[f64], g2: &[f64], steps: usize) -> f64 {
    let d: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| a - b).collect();
    let a = norm_sq(&d);
    let b = 2.0 * d.iter().zip(g2).map(|(x, y)| x * y).sum::<f64>();
    let c = norm_sq(g2);
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let nu = i as f64 / steps as f64;
        let v = (a * nu + b) * nu + c;
        if v < best.0 {
            best = (v, nu);
        }
    }
    best.1
}

/// Closed-form min-norm weights against a 1e-6 grid search.
pub fn min_norm_oracle(pairs: usize, opts: VerifyOptions) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let mut worst_nu: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for k in 0..pairs {
        let dim = rng.random_range(2..=12);
        let g1 = gaussian_vec(&mut rng, dim);
        // some pairs nearly aligned so the clamped ends get exercised
        let g2 = if k % 5 == 0 {
            g1.iter().map(|x| 2.0 * x + 0.01 * rng.random::<f64>()).collect()
        } else {
            gaussian_vec(&mut rng, dim)
        };
        let nu = min_norm_nu(&g1, &g2) + opts.nu_perturbation;
        let reference = grid_search_nu(&g1, &g2, 1_000_000);
        let n_impl = norm_sq(&combine(&g1, &g2, nu)).sqrt();
        let n_ref = norm_sq(&combine(&g1, &g2, reference)).sqrt();
        worst_nu = worst_nu.max((nu - reference).abs());
        worst_norm = worst_norm.max((n_impl - n_ref).abs());
    }
    let msg = format!("{pairs} pairs, max |dnu| {worst_nu:.2e}, max |dnorm| {worst_norm:.2e}");
    if worst_nu <= 1e-6 && worst_norm <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Reverse-mode MLP gradients against central differences.
pub fn gradient_check(nets: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let mut worst: f64 = 0.0;
    for _ in 0..nets {
        let depth = rng.random_range(1..=3);
        let mut widths = vec![rng.random_range(1..=6)];
        for _ in 0..depth {
            widths.push(rng.random_range(1..=8));
        }
        let mut net = Mlp::new(&widths, &mut rng).map_err(|e| e.to_string())?;
        let x = gaussian_vec(&mut rng, widths[0]);
        let up = gaussian_vec(&mut rng, *widths.last().expect("widths"));
        let loss = |n: &Mlp| -> f64 {
            n.forward(&x).expect("shape").iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        let cache = net.forward_cached(&x).map_err(|e| e.to_string())?;
        let analytic = net.backward(&cache, &up);
        let h = 1e-5;
        for i in 0..net.n_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let lp = loss(&net);
            net.params_mut()[i] = orig - h;
            let lm = loss(&net);
            net.params_mut()[i] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    let msg = format!("{nets} networks, max relative error {worst:.2e}");
    if worst < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Mean `|h|^2 / L` over Rician draws for each factor.
pub fn channel_normalization(samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0003);
    let pos = [[0.0; 3]];
    let los = vec![array_response(0.7, 0.3, &pos, 0.0857)[0]; samples];
    let gain = 3.2e-4;
    let mut parts = Vec::new();
    let mut ok = true;
    for factor in [0.0, 2.0, 1e12] {
        let h = rician_sample(&los, factor, gain, &mut rng);
        let ratio = h.iter().map(|c| c.norm_sqr()).sum::<f64>() / samples as f64 / gain;
        ok &= (ratio - 1.0).abs() < 0.02;
        parts.push(format!("a={factor:e}: {ratio:.4}"));
    }
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_action(blocks: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    blocks.iter().map(|&k| rng.random_range(0..k)).collect()
}

/// Energy identity and power bounds after every step of a random rollout.
pub fn constraint_safety(scenario: &Scenario, steps: usize) -> Check {
    let mut env = StarRisEnv::new(scenario).map_err(|e| e.to_string())?;
    let blocks = env.action_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0004);
    let (pmin, pmax) = (scenario.radio.min_power, scenario.radio.max_power);
    let mut worst_energy: f64 = 0.0;
    let mut episode = 0;
    env.reset(episode).map_err(|e| e.to_string())?;
    for t in 0..steps {
        let step = env.step(&random_action(&blocks, &mut rng)).map_err(|e| format!("step {t}: {e}"))?;
        let st = env.state();
        for s in &st.surfaces {
            let e = s.k_re as f64 * s.beta_re + s.k_tr as f64 * s.beta_tr;
            worst_energy = worst_energy.max((e - 1.0).abs());
        }
        let p = st.transmit_power;
        if !(pmin..=pmax).contains(&p) {
            return Err(format!("step {t}: transmit power {p} outside [{pmin}, {pmax}]"));
        }
        if step.done {
            episode += 1;
            env.reset(episode).map_err(|e| e.to_string())?;
        }
    }
    let msg = format!("{steps} steps, max energy error {worst_energy:.1e}");
    if worst_energy <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Summed per-step rewards against terminal minus initial objectives.
pub fn telescoping(scenario: &Scenario, episodes: u64) -> Check {
    let mut env = StarRisEnv::new(scenario).map_err(|e| e.to_string())?;
    let blocks = env.action_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0005);
    let mut worst: f64 = 0.0;
    for ep in 0..episodes {
        env.reset(ep).map_err(|e| e.to_string())?;
        let start = env.objectives();
        let mut sum = [0.0; 2];
        loop {
            let s = env.step(&random_action(&blocks, &mut rng)).map_err(|e| e.to_string())?;
            sum[0] += s.reward[0];
            sum[1] += s.reward[1];
            if s.done {
                break;
            }
        }
        let end = env.objectives();
        for m in 0..2 {
            worst = worst.max((sum[m] - (end[m] - start[m])).abs());
        }
    }
    let msg = format!("{episodes} episodes, max deviation {worst:.1e}");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Archive contents against an O(n^2) brute-force front on random clouds.
pub fn pareto_bruteforce(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0006);
    for t in 0..trials {
        let n = rng.random_range(1..40);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [(rng.random_range(0..20) as f64) / 4.0, (rng.random_range(0..20) as f64) / 4.0])
            .collect();
        let mut a = ParetoArchive::new();
        for p in &pts {
            a.insert(ArchiveEntry {
                coverage: p[0],
                capacity: p[1],
                strategy: String::new(),
                seed: 0,
                preference: String::new(),
                config_hash: String::new(),
            });
        }
        let mut expect: Vec<[f64; 2]> =
            pts.iter().filter(|p| !pts.iter().any(|q| dominates(*q, **p))).copied().collect();
        expect.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
        expect.dedup();
        let mut got: Vec<[f64; 2]> = a.entries().iter().map(|e| e.point()).collect();
        got.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
        if got != expect {
            return Err(format!("trial {t}: archive {got:?} != brute force {expect:?}"));
        }
        if !a.is_mutually_non_dominated() {
            return Err(format!("trial {t}: archive holds a dominated point"));
        }
    }
    Ok(format!("{trials} random point clouds"))
}

/// Direct-link-only metrics on a 2x2 grid recomputed by hand from the raw
/// channel coefficients.
pub fn direct_link_oracle() -> Check {
    let sc = Scenario::desk().without_surfaces().with_grid_side_count(2).map_err(|e| e.to_string())?;
    let mut env = StarRisEnv::new(&sc).map_err(|e| e.to_string())?;
    env.reset(11).map_err(|e| e.to_string())?;
    let power_levels = env.action_blocks()[0];
    env.step(&[power_levels - 1]).map_err(|e| e.to_string())?;
    let p = env.state().transmit_power;
    let ch = env.channels().ok_or("no channels")?;
    let w = env.weights().clone();
    let (noise, bw, th) = (sc.radio.noise_power, sc.radio.bandwidth, sc.radio.rsrp_threshold);
    let (mut cov, mut cap) = (0.0, 0.0);
    for i in 0..4 {
        let g = [p * ch.bs_point(0, i).norm_sqr(), p * ch.bs_point(1, i).norm_sqr()];
        let (s, intf) = if g[1] > g[0] { (g[1], g[0]) } else { (g[0], g[1]) };
        if s >= th {
            cov += w.coverage[i];
        }
        cap += w.capacity[i] * bw * (1.0 + s / (intf + noise)).log2();
    }
    let got = env.objectives();
    let msg = format!("coverage {:.6} vs {cov:.6}, capacity {:.6} vs {cap:.6}", got[0], got[1]);
    if (got[0] - cov).abs() < 1e-12 && (got[1] - cap).abs() < 1e-9 * cap.abs().max(1.0) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Envelope value iteration scalarized at each preference against plain
/// scalar value iteration.
pub fn envelope_oracle() -> Check {
    let mdp = TabularMomdp::treasure_grid(0.9);
    let prefs: Vec<Preference> = (0..5).map(|k| Preference::new(k as f64 / 4.0)).collect();
    let q = mdp.envelope_value_iteration(&prefs, 1e-12, 10_000).map_err(|e| e.to_string())?;
    let h = TabularMomdp::optimality_filter(&q, &prefs).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, w) in prefs.iter().enumerate() {
        let v = mdp.value_iteration(*w, 1e-12);
        for s in 0..mdp.n_states {
            if !mdp.terminal[s] {
                worst = worst.max((h[s][k].0 - v[s]).abs());
            }
        }
    }
    let msg = format!("max |envelope - scalar| {worst:.1e}");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Chart markers read back through the declared axis mapping.
pub fn chart_parse_back() -> Check {
    let series = vec![
        Series { name: "avus".into(), points: vec![(1.0, 0.61, 0.5, 0.7), (2.0, 0.64, 0.6, 0.7), (3.0, 0.7, 0.7, 0.7)] },
        Series { name: "noris".into(), points: vec![(1.0, 0.4, 0.3, 0.45), (3.0, 0.42, 0.41, 0.43)] },
    ];
    let svg = line_chart("check", "n_ris", "coverage", &series);
    let marks = parse_markers(&svg).ok_or("markers unreadable")?;
    let expect: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().map(|p| (p.0, p.1))).collect();
    if marks.len() != expect.len() {
        return Err(format!("{} markers for {} values", marks.len(), expect.len()));
    }
    let worst = marks
        .iter()
        .zip(&expect)
        .map(|(m, e)| (m.1 - e.0).abs().max((m.2 - e.1).abs()))
        .fold(0.0, f64::max);
    let msg = format!("max read-back error {worst:.1e}");
    if worst < 1e-3 && svg == line_chart("check", "n_ris", "coverage", &series) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn run_all(opts: VerifyOptions) -> VerifyReport {
    let desk = Scenario::desk();
    let suites = vec![
        timed("min_norm", || min_norm_oracle(100, opts)),
        timed("gradient_check", || gradient_check(10)),
        timed("channel_normalization", || channel_normalization(100_000)),
        timed("constraint_safety", || constraint_safety(&desk, 10_000)),
        timed("telescoping", || telescoping(&desk, 5)),
        timed("pareto_archive", || pareto_bruteforce(200)),
        timed("direct_link", direct_link_oracle),
        timed("envelope", envelope_oracle),
        timed("chart_parse_back", chart_parse_back),
    ];
    VerifyReport { suites }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_search_finds_interior_minimum() {
        let nu = grid_search_nu(&[1.0, 0.0], &[0.0, 1.0], 1000);
        assert!((nu - 0.5).abs() < 1e-12);
        assert_eq!(grid_search_nu(&[1.0], &[2.0], 1000), 1.0);
    }

    #[test]
    fn perturbed_nu_is_caught() {
        assert!(min_norm_oracle(10, VerifyOptions::default()).is_ok());
        assert!(min_norm_oracle(10, VerifyOptions { nu_perturbation: 1e-3 }).is_err());
    }

    #[test]
    fn cheap_suites_pass() {
        assert!(pareto_bruteforce(20).is_ok());
        assert!(direct_link_oracle().is_ok());
        assert!(envelope_oracle().is_ok());
        assert!(chart_parse_back().is_ok());
    }

    #[test]
    fn report_renders_timing() {
        let r = VerifyReport {
            suites: vec![SuiteResult { name: "x", outcome: Err("bad".into()), elapsed: Duration::from_millis(5) }],
        };
        assert!(!r.passed());
        assert!(r.render().starts_with("FAIL x"));
        assert!(r.render().contains("0.005s"));
    }
}
