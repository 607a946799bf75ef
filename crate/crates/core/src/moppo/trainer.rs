//! Actor-critic training loop shared by AVUS, LFUS and fixed-weight PPO.
//!
//! Each iteration collects `update_every` steps from every actor against a
//! frozen policy, computes n-step advantages, then runs `epochs` passes of
//! minibatch updates.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pareto::{ArchiveEntry, ParetoArchive};
use super::{
    advantage, avus_weights, clip_passes_gradient, combine, grad_normalize, min_norm_nu, ratio,
    sample_preference, select_optimal_loss, surrogate_clip, surrogate_kl, surrogate_ncp, Preference,
    SurrogateKind,
};
use crate::env::MoEnv;
use crate::error::{CcoError, Result};
use crate::nn::{Adam, CategoricalHead, Checkpoint, Mlp};
use crate::rng;

const TAG_EPISODE: u64 = 1;
const TAG_ACTOR: u64 = 2;
const TAG_PREF: u64 = 3;
const TAG_SHUFFLE: u64 = 4;
const TAG_INIT: u64 = 5;
const TAG_EVAL_SAMPLE: u64 = 6;
/// Evaluation episodes use seeds independent of the run seed so that every
/// run is scored on the same channel draws.
const EVAL_BASE_SEED: u64 = 0x0E7A_15EED;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Avus,
    Lfus,
    /// Single-objective PPO on `w . R`.
    FixedWeight([f64; 2]),
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Avus => "avus".into(),
            Strategy::Lfus => "lfus".into(),
            Strategy::FixedWeight(w) => format!("fixed({},{})", w[0], w[1]),
        }
    }

    fn conditioned(&self) -> bool {
        matches!(self, Strategy::Avus)
    }

    /// Weight used to scalarize the curve reward.
    pub fn reference_weight(&self) -> Preference {
        match self {
            Strategy::FixedWeight(w) => Preference(*w),
            _ => Preference([0.5, 0.5]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Rollout length per actor between updates.
    pub update_every: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub homotopy_start: f64,
    /// Per-iteration change of the homotopy weight; negative steps walk
    /// toward the preference-weighted loss.
    pub homotopy_step: f64,
    pub kl_coef: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub hidden: usize,
    pub actors: usize,
    /// Preferences swept when evaluating an AVUS policy.
    pub eval_preferences: usize,
    pub eval_episodes: usize,
    /// Extra stochastic evaluation runs for unconditioned policies.
    pub eval_repeats: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            update_every: 10,
            epochs: 10,
            minibatch: 10,
            clip_eps: 0.2,
            gamma: 0.99,
            actor_lr: 1e-4,
            critic_lr: 3e-3,
            homotopy_start: 0.1,
            homotopy_step: 0.001,
            kl_coef: 0.01,
            value_coef: 0.5,
            entropy_coef: 0.01,
            hidden: 64,
            actors: 2,
            eval_preferences: 5,
            eval_episodes: 2,
            eval_repeats: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CcoError::Scenario(format!("training config: {m}")));
        if self.update_every == 0 || self.epochs == 0 || self.minibatch == 0 || self.actors == 0 {
            return bad("update_every, epochs, minibatch and actors must be >= 1");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.homotopy_start) || !self.homotopy_step.is_finite() {
            return bad("homotopy_start must lie in [0, 1] and homotopy_step be finite");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) || self.hidden == 0 {
            return bad("learning rates and hidden width must be > 0");
        }
        if self.eval_preferences < 2 || self.eval_episodes == 0 {
            return bad("need >= 2 evaluation preferences and >= 1 evaluation episode");
        }
        Ok(())
    }
}

/// Summary of one training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub strategy: String,
    pub seed: u64,
    /// Time-averaged objective values over the episode.
    pub cum_coverage: f64,
    pub cum_capacity: f64,
    /// Episode sum of the reference-weighted reward.
    pub scalarized_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub iterations: usize,
    pub final_homotopy: f64,
    pub selected: [usize; 3],
    pub mean_nu: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curves: Vec<EpisodeRecord>,
    /// Every evaluated point before dominance filtering.
    pub evaluations: Vec<ArchiveEntry>,
    pub archive: ParetoArchive,
    pub stats: TrainStats,
    pub checkpoint: Checkpoint,
}

/// One stored transition.
#[derive(Debug, Clone)]
struct Sample {
    input: Vec<f64>,
    action: Vec<usize>,
    log_prob: f64,
    logits: Vec<f64>,
    value: [f64; 2],
    reward: [f64; 2],
    done: bool,
}

struct Actor<E> {
    env: E,
    index: usize,
    obs: Vec<f64>,
    rng: ChaCha8Rng,
    episode: Option<usize>,
    next_local: usize,
    ep_steps: usize,
    ep_obj: [f64; 2],
    ep_reward: f64,
}

struct Segment {
    samples: Vec<Sample>,
    bootstrap: [f64; 2],
    finished: Vec<EpisodeRecord>,
}

struct Nets {
    head: CategoricalHead,
    actor: Mlp,
    critic: Mlp,
}

impl Nets {
    fn input(&self, obs: &[f64], pref: Option<Preference>) -> Vec<f64> {
        let mut x = obs.to_vec();
        if let Some(p) = pref {
            x.extend_from_slice(&p.0);
        }
        x
    }

    fn value(&self, input: &[f64]) -> Result<[f64; 2]> {
        let v = self.critic.forward(input)?;
        Ok([v[0], v[1]])
    }
}

fn episode_seed(seed: u64, episode: usize) -> u64 {
    rng::derive_seed(seed, &[TAG_EPISODE, episode as u64])
}

pub fn eval_seed(k: usize) -> u64 {
    rng::derive_seed(EVAL_BASE_SEED, &[k as u64])
}

impl<E: MoEnv> Actor<E> {
    /// Global episode index of this actor's `local`-th episode.
    fn global(&self, local: usize, n_actors: usize) -> usize {
        local * n_actors + self.index
    }

    fn start_next(&mut self, seed: u64, n_actors: usize, budget: usize) -> Result<()> {
        let e = self.global(self.next_local, n_actors);
        if e >= budget {
            self.episode = None;
            return Ok(());
        }
        self.obs = self.env.reset(episode_seed(seed, e))?;
        self.episode = Some(e);
        self.next_local += 1;
        self.ep_steps = 0;
        self.ep_obj = [0.0; 2];
        self.ep_reward = 0.0;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn collect(
        &mut self,
        nets: &Nets,
        pref: Option<Preference>,
        reference: Preference,
        steps: usize,
        seed: u64,
        n_actors: usize,
        budget: usize,
        label: &str,
    ) -> Result<Segment> {
        let mut samples = Vec::with_capacity(steps);
        let mut finished = Vec::new();
        for _ in 0..steps {
            let Some(ep) = self.episode else { break };
            let input = nets.input(&self.obs, pref);
            let logits = nets.actor.forward(&input)?;
            let (action, log_prob) = nets.head.sample(&logits, &mut self.rng);
            let value = nets.value(&input)?;
            let step = self.env.step(&action)?;
            let obj = self.env.objectives();
            self.ep_steps += 1;
            self.ep_obj[0] += obj[0];
            self.ep_obj[1] += obj[1];
            self.ep_reward += reference.scalarize(step.reward);
            samples.push(Sample { input, action, log_prob, logits, value, reward: step.reward, done: step.done });
            if step.done {
                let n = self.ep_steps as f64;
                finished.push(EpisodeRecord {
                    episode: ep,
                    strategy: label.to_string(),
                    seed,
                    cum_coverage: self.ep_obj[0] / n,
                    cum_capacity: self.ep_obj[1] / n,
                    scalarized_reward: self.ep_reward,
                });
                self.start_next(seed, n_actors, budget)?;
            } else {
                self.obs = step.obs;
            }
        }
        let bootstrap = match (self.episode, samples.last()) {
            (Some(_), Some(s)) if !s.done => nets.value(&nets.input(&self.obs, pref))?,
            _ => [0.0; 2],
        };
        Ok(Segment { samples, bootstrap, finished })
    }
}

/// Advantages for a segment that may contain episode ends.
fn segment_advantages(seg: &Segment, gamma: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(seg.samples.len());
    let mut start = 0;
    for (i, s) in seg.samples.iter().enumerate() {
        let last = i + 1 == seg.samples.len();
        if s.done || last {
            let part = &seg.samples[start..=i];
            let rewards: Vec<[f64; 2]> = part.iter().map(|s| s.reward).collect();
            let values: Vec<[f64; 2]> = part.iter().map(|s| s.value).collect();
            let boot = if s.done { [0.0; 2] } else { seg.bootstrap };
            out.extend(advantage(&rewards, &values, boot, gamma));
            start = i + 1;
        }
    }
    out
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    if n == 0.0 {
        return;
    }
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    let s = if sd > 1e-8 { sd } else { 1.0 };
    v.iter_mut().for_each(|x| *x = (*x - m) / s);
}

/// Per-minibatch actor pass: forward caches plus surrogate statistics.
struct ActorPass {
    caches: Vec<crate::nn::ForwardCache>,
    ratios: Vec<f64>,
    kls: Vec<f64>,
    entropy: f64,
}

fn actor_pass(nets: &Nets, batch: &[&Sample]) -> Result<ActorPass> {
    let mut caches = Vec::with_capacity(batch.len());
    let mut ratios = Vec::with_capacity(batch.len());
    let mut kls = Vec::with_capacity(batch.len());
    let mut entropy = 0.0;
    for s in batch {
        let c = nets.actor.forward_cached(&s.input)?;
        let z = c.output();
        ratios.push(ratio(nets.head.log_prob(z, &s.action), s.log_prob));
        kls.push(nets.head.kl(z, &s.logits));
        entropy += nets.head.entropy(z);
        caches.push(c);
    }
    entropy /= batch.len() as f64;
    Ok(ActorPass { caches, ratios, kls, entropy })
}

/// Selected surrogate for one advantage column.
fn selected(pass: &ActorPass, adv: &[f64], cfg: &TrainConfig) -> (f64, SurrogateKind) {
    select_optimal_loss(
        surrogate_ncp(&pass.ratios, adv),
        surrogate_clip(&pass.ratios, adv, cfg.clip_eps),
        surrogate_kl(&pass.ratios, adv, cfg.kl_coef, &pass.kls),
    )
}

/// Gradient of `-(sum_c weight_c * selected_c + entropy_coef * H)` with
/// respect to the actor parameters.
fn actor_grad(
    nets: &Nets,
    batch: &[&Sample],
    pass: &ActorPass,
    columns: &[(&[f64], SurrogateKind, f64)],
    cfg: &TrainConfig,
) -> Vec<f64> {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; nets.actor.n_params()];
    let mut up = vec![0.0; nets.head.n_logits()];
    for (i, s) in batch.iter().enumerate() {
        let z = pass.caches[i].output();
        let r = pass.ratios[i];
        let mut pg = 0.0;
        let mut kl_w = 0.0;
        for (adv, kind, w) in columns {
            let a = adv[i];
            match kind {
                SurrogateKind::Ncp => pg += w * r * a,
                SurrogateKind::Clip => {
                    if clip_passes_gradient(r, a, cfg.clip_eps) {
                        pg += w * r * a;
                    }
                }
                SurrogateKind::Kl => {
                    pg += w * r * a;
                    kl_w += w * cfg.kl_coef;
                }
            }
        }
        up.iter_mut().for_each(|u| *u = 0.0);
        // d(r A)/dz = r A dlogp/dz; signs flipped for minimization
        nets.head.add_log_prob_grad(z, &s.action, -pg / n, &mut up);
        if kl_w != 0.0 {
            nets.head.add_kl_grad(z, &s.logits, kl_w / n, &mut up);
        }
        nets.head.add_entropy_grad(z, -cfg.entropy_coef / n, &mut up);
        nets.actor.backward_into(&pass.caches[i], &up, &mut grad);
    }
    grad
}

/// Critic gradient and loss for `value_coef * mean sum_m mask_m (v_m - target_m)^2`.
fn critic_grad(
    nets: &Nets,
    batch: &[&Sample],
    targets: &[[f64; 2]],
    mask: [f64; 2],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, f64)> {
    let n = batch.len() as f64;
    let mut grad = vec![0.0; nets.critic.n_params()];
    let mut loss = 0.0;
    for (s, t) in batch.iter().zip(targets) {
        let c = nets.critic.forward_cached(&s.input)?;
        let v = c.output();
        let mut up = [0.0; 2];
        for m in 0..2 {
            let d = v[m] - t[m];
            loss += cfg.value_coef * mask[m] * d * d / n;
            up[m] = 2.0 * cfg.value_coef * mask[m] * d / n;
        }
        nets.critic.backward_into(&c, &up, &mut grad);
    }
    Ok((grad, loss))
}

fn kind_index(k: SurrogateKind) -> usize {
    match k {
        SurrogateKind::Ncp => 0,
        SurrogateKind::Clip => 1,
        SurrogateKind::Kl => 2,
    }
}

fn check_finite(what: &str, v: f64, iteration: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CcoError::Diverged(format!("{what} = {v} at iteration {iteration}")))
    }
}

/// Trains one policy and evaluates it into a Pareto archive.
pub fn train<E, F>(
    strategy: Strategy,
    make_env: F,
    cfg: &TrainConfig,
    seed: u64,
    config_hash: &str,
) -> Result<TrainOutcome>
where
    E: MoEnv + Send,
    F: Fn() -> Result<E> + Sync,
{
    cfg.validate()?;
    if let Strategy::FixedWeight(w) = strategy {
        if !Preference(w).is_valid() {
            return Err(CcoError::Scenario(format!("fixed weights {w:?} must be >= 0 and sum to 1")));
        }
    }
    let probe = make_env()?;
    let head = CategoricalHead::new(probe.action_blocks())?;
    let in_dim = probe.obs_dim() + if strategy.conditioned() { 2 } else { 0 };
    drop(probe);
    let mut init = rng::stream(seed, &[TAG_INIT]);
    let mut nets = Nets {
        actor: Mlp::new(&[in_dim, cfg.hidden, head.n_logits()], &mut init)?,
        critic: Mlp::new(&[in_dim, cfg.hidden, 2], &mut init)?,
        head,
    };
    let mut actor_opt = Adam::new(nets.actor.n_params(), cfg.actor_lr);
    let mut critic_opt = Adam::new(nets.critic.n_params(), cfg.critic_lr);

    let mut actors = (0..cfg.actors)
        .map(|i| {
            let mut a = Actor {
                env: make_env()?,
                index: i,
                obs: Vec::new(),
                rng: rng::stream(seed, &[TAG_ACTOR, i as u64]),
                episode: None,
                next_local: 0,
                ep_steps: 0,
                ep_obj: [0.0; 2],
                ep_reward: 0.0,
            };
            a.start_next(seed, cfg.actors, cfg.episodes)?;
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;

    let label = strategy.label();
    let reference = strategy.reference_weight();
    let mut curves = Vec::new();
    let mut stats = TrainStats { final_homotopy: cfg.homotopy_start, ..Default::default() };
    let mut homotopy = cfg.homotopy_start;
    let mut nu_sum = 0.0;
    let mut nu_count = 0usize;
    let mut iteration = 0usize;

    while actors.iter().any(|a| a.episode.is_some()) {
        let pref = match strategy {
            Strategy::Avus => Some(sample_preference(&mut rng::stream(seed, &[TAG_PREF, iteration as u64]))),
            _ => None,
        };
        let segments = actors
            .par_iter_mut()
            .map(|a| a.collect(&nets, pref, reference, cfg.update_every, seed, cfg.actors, cfg.episodes, &label))
            .collect::<Result<Vec<_>>>()?;

        let mut batch: Vec<Sample> = Vec::new();
        let mut adv: Vec<[f64; 2]> = Vec::new();
        for seg in &segments {
            adv.extend(segment_advantages(seg, cfg.gamma));
            curves.extend(seg.finished.iter().cloned());
        }
        for seg in segments {
            batch.extend(seg.samples);
        }
        if batch.is_empty() {
            break;
        }
        let targets: Vec<[f64; 2]> =
            batch.iter().zip(&adv).map(|(s, a)| [a[0] + s.value[0], a[1] + s.value[1]]).collect();
        // advantage columns used by the policy loss
        let columns: Vec<Vec<f64>> = match strategy {
            Strategy::FixedWeight(w) => {
                let mut c: Vec<f64> = adv.iter().map(|a| w[0] * a[0] + w[1] * a[1]).collect();
                standardize(&mut c);
                vec![c]
            }
            _ => (0..2)
                .map(|m| {
                    let mut c: Vec<f64> = adv.iter().map(|a| a[m]).collect();
                    standardize(&mut c);
                    c
                })
                .collect(),
        };

        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut initial_losses: Option<[f64; 2]> = None;
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng::stream(seed, &[TAG_SHUFFLE, iteration as u64, epoch as u64]));
            for chunk in order.chunks(cfg.minibatch) {
                let mb: Vec<&Sample> = chunk.iter().map(|&i| &batch[i]).collect();
                let mb_targets: Vec<[f64; 2]> = chunk.iter().map(|&i| targets[i]).collect();
                let mb_cols: Vec<Vec<f64>> =
                    columns.iter().map(|c| chunk.iter().map(|&i| c[i]).collect()).collect();
                let pass = actor_pass(&nets, &mb)?;
                match strategy {
                    Strategy::Avus | Strategy::FixedWeight(_) => {
                        let weights: Vec<f64> = match (strategy, pref) {
                            (Strategy::Avus, Some(p)) => avus_weights(p, homotopy).to_vec(),
                            _ => vec![1.0],
                        };
                        let mut cols = Vec::with_capacity(mb_cols.len());
                        for (c, w) in mb_cols.iter().zip(&weights) {
                            let (v, kind) = selected(&pass, c, cfg);
                            check_finite("surrogate", v, iteration)?;
                            stats.selected[kind_index(kind)] += 1;
                            cols.push((c.as_slice(), kind, *w));
                        }
                        let ga = actor_grad(&nets, &mb, &pass, &cols, cfg);
                        let (gc, vloss) = critic_grad(&nets, &mb, &mb_targets, [1.0, 1.0], cfg)?;
                        check_finite("value loss", vloss, iteration)?;
                        actor_opt.step(nets.actor.params_mut(), &ga);
                        critic_opt.step(nets.critic.params_mut(), &gc);
                    }
                    Strategy::Lfus => {
                        let mut grads = Vec::with_capacity(2);
                        let mut losses = [0.0; 2];
                        for m in 0..2 {
                            let (v, kind) = selected(&pass, &mb_cols[m], cfg);
                            stats.selected[kind_index(kind)] += 1;
                            let ga = actor_grad(&nets, &mb, &pass, &[(&mb_cols[m], kind, 1.0)], cfg);
                            let mut mask = [0.0; 2];
                            mask[m] = 1.0;
                            let (gc, vloss) = critic_grad(&nets, &mb, &mb_targets, mask, cfg)?;
                            losses[m] = -v - cfg.entropy_coef * pass.entropy + vloss;
                            check_finite("objective loss", losses[m], iteration)?;
                            let mut g = ga;
                            g.extend(gc);
                            grads.push(g);
                        }
                        let init = *initial_losses.get_or_insert(losses);
                        grad_normalize(&mut grads, &init);
                        let nu = min_norm_nu(&grads[0], &grads[1]);
                        nu_sum += nu;
                        nu_count += 1;
                        let g = combine(&grads[0], &grads[1], nu);
                        let (ga, gc) = g.split_at(nets.actor.n_params());
                        actor_opt.step(nets.actor.params_mut(), ga);
                        critic_opt.step(nets.critic.params_mut(), gc);
                    }
                }
            }
        }
        if !nets.actor.is_finite() || !nets.critic.is_finite() {
            return Err(CcoError::Diverged(format!("non-finite parameters after iteration {iteration}")));
        }
        if strategy.conditioned() {
            homotopy = (homotopy + cfg.homotopy_step).clamp(0.0, 1.0);
        }
        iteration += 1;
    }
    curves.sort_by_key(|r| r.episode);
    stats.iterations = iteration;
    stats.final_homotopy = homotopy;
    stats.mean_nu = if nu_count > 0 { nu_sum / nu_count as f64 } else { 0.0 };

    let evaluations = evaluate_policy(strategy, &nets, &make_env, cfg, seed, config_hash)?;
    let mut archive = ParetoArchive::new();
    archive.extend(evaluations.iter().cloned());
    Ok(TrainOutcome {
        curves,
        evaluations,
        archive,
        stats,
        checkpoint: Checkpoint { entries: vec![(nets.actor, actor_opt), (nets.critic, critic_opt)] },
    })
}

/// Runs one evaluation episode per evaluation seed and returns the
/// time-averaged objectives, averaged over episodes.
fn rollout_average<E: MoEnv>(
    env: &mut E,
    nets: &Nets,
    pref: Option<Preference>,
    episodes: usize,
    mut sampler: Option<&mut ChaCha8Rng>,
) -> Result<[f64; 2]> {
    let mut total = [0.0; 2];
    for k in 0..episodes {
        let mut obs = env.reset(eval_seed(k))?;
        let mut acc = [0.0; 2];
        let mut steps = 0usize;
        loop {
            let logits = nets.actor.forward(&nets.input(&obs, pref))?;
            let action = match sampler.as_deref_mut() {
                Some(r) => nets.head.sample(&logits, r).0,
                None => nets.head.mode(&logits),
            };
            let s = env.step(&action)?;
            let o = env.objectives();
            acc[0] += o[0];
            acc[1] += o[1];
            steps += 1;
            if s.done {
                break;
            }
            obs = s.obs;
        }
        total[0] += acc[0] / steps as f64;
        total[1] += acc[1] / steps as f64;
    }
    Ok([total[0] / episodes as f64, total[1] / episodes as f64])
}

fn evaluate_policy<E, F>(
    strategy: Strategy,
    nets: &Nets,
    make_env: &F,
    cfg: &TrainConfig,
    seed: u64,
    config_hash: &str,
) -> Result<Vec<ArchiveEntry>>
where
    E: MoEnv + Send,
    F: Fn() -> Result<E> + Sync,
{
    let entry = |p: [f64; 2], tag: String| ArchiveEntry {
        coverage: p[0],
        capacity: p[1],
        strategy: strategy.label(),
        seed,
        preference: tag,
        config_hash: config_hash.to_string(),
    };
    let runs: Vec<(Option<Preference>, Option<u64>, String)> = if strategy.conditioned() {
        (0..cfg.eval_preferences)
            .map(|k| {
                let p = Preference::new(k as f64 / (cfg.eval_preferences - 1) as f64);
                (Some(p), None, format!("w=({:.2},{:.2})", p.0[0], p.0[1]))
            })
            .collect()
    } else {
        std::iter::once((None, None, "greedy".to_string()))
            .chain((0..cfg.eval_repeats).map(|r| (None, Some(r as u64), format!("sample-{r}"))))
            .collect()
    };
    runs.into_par_iter()
        .map(|(pref, sample, tag)| {
            let mut env = make_env()?;
            let mut r = sample.map(|s| rng::stream(seed, &[TAG_EVAL_SAMPLE, s]));
            let p = rollout_average(&mut env, nets, pref, cfg.eval_episodes, r.as_mut())?;
            Ok(entry(p, tag))
        })
        .collect()
}

/// Greedy action of a trained actor for a conditioned or unconditioned input.
pub fn greedy_action(actor: &Mlp, blocks: &[usize], obs: &[f64], pref: Option<Preference>) -> Result<Vec<usize>> {
    let head = CategoricalHead::new(blocks.to_vec())?;
    let mut x = obs.to_vec();
    if let Some(p) = pref {
        x.extend_from_slice(&p.0);
    }
    Ok(head.mode(&actor.forward(&x)?))
}
