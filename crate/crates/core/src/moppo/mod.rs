//! Multi-objective PPO: surrogate losses and their selection, the AVUS
//! homotopy loss, the LFUS min-norm combination, Pareto bookkeeping, a
//! tabular toy problem and the trainer.

pub mod pareto;
pub mod toy;
pub mod trainer;

use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

pub use pareto::{dominates, pareto_front, ArchiveEntry, ParetoArchive};
pub use trainer::{eval_seed, train, EpisodeRecord, Strategy, TrainConfig, TrainOutcome, TrainStats};

/// Linear preference over (coverage, capacity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preference(pub [f64; 2]);

impl Preference {
    pub fn new(w0: f64) -> Self {
        Preference([w0, 1.0 - w0])
    }

    pub fn scalarize(&self, v: [f64; 2]) -> f64 {
        self.0[0] * v[0] + self.0[1] * v[1]
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|w| *w >= 0.0) && (self.0[0] + self.0[1] - 1.0).abs() <= 1e-12
    }
}

/// Uniform draw from the 2-simplex.
pub fn sample_preference<R: Rng + ?Sized>(rng: &mut R) -> Preference {
    let d = Dirichlet::new([1.0, 1.0]).expect("valid concentration");
    let w: [f64; 2] = d.sample(rng);
    // renormalize so the pair sums to one exactly
    Preference([w[0], 1.0 - w[0]])
}

/// n-step advantages per objective for one contiguous segment:
/// `A_t = sum_{k>=t} gamma^(k-t) R_k + gamma^(T-t) V(S_T) - V(S_t)`.
pub fn advantage(
    rewards: &[[f64; 2]],
    values: &[[f64; 2]],
    bootstrap: [f64; 2],
    gamma: f64,
) -> Vec<[f64; 2]> {
    assert_eq!(rewards.len(), values.len(), "one value per step");
    let mut out = vec![[0.0; 2]; rewards.len()];
    let mut ret = bootstrap;
    for t in (0..rewards.len()).rev() {
        for m in 0..2 {
            ret[m] = rewards[t][m] + gamma * ret[m];
            out[t][m] = ret[m] - values[t][m];
        }
    }
    out
}

pub const RATIO_LOG_CLAMP: f64 = 50.0;

pub fn ratio(new_log_prob: f64, old_log_prob: f64) -> f64 {
    (new_log_prob - old_log_prob).clamp(-RATIO_LOG_CLAMP, RATIO_LOG_CLAMP).exp()
}

pub fn surrogate_ncp(ratios: &[f64], adv: &[f64]) -> f64 {
    mean(ratios.iter().zip(adv).map(|(r, a)| r * a))
}

pub fn surrogate_clip(ratios: &[f64], adv: &[f64], eps: f64) -> f64 {
    mean(ratios.iter().zip(adv).map(|(r, a)| clip_term(*r, *a, eps)))
}

/// `mean(r A - beta KL)` with per-sample `KL(new || old)`.
pub fn surrogate_kl(ratios: &[f64], adv: &[f64], kl_coef: f64, kl: &[f64]) -> f64 {
    mean(ratios.iter().zip(adv).zip(kl).map(|((r, a), k)| r * a - kl_coef * k))
}

fn clip_term(r: f64, a: f64, eps: f64) -> f64 {
    (r * a).min(r.clamp(1.0 - eps, 1.0 + eps) * a)
}

/// True when the unclipped branch is active (its gradient flows).
pub fn clip_passes_gradient(r: f64, a: f64, eps: f64) -> bool {
    r * a <= r.clamp(1.0 - eps, 1.0 + eps) * a
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    Ncp,
    Clip,
    Kl,
}

/// Largest of the three surrogates; ties go to the later kind
/// (NCP < CLIP < KL).
pub fn select_optimal_loss(ncp: f64, clip: f64, kl: f64) -> (f64, SurrogateKind) {
    let mut best = (ncp, SurrogateKind::Ncp);
    if clip >= best.0 {
        best = (clip, SurrogateKind::Clip);
    }
    if kl >= best.0 {
        best = (kl, SurrogateKind::Kl);
    }
    best
}

/// Homotopy mix `w L1_sum + (1 - w) pref . L1` of the per-objective selected
/// surrogates.
pub fn avus_loss(selected: [f64; 2], pref: Preference, homotopy: f64) -> f64 {
    homotopy * (selected[0] + selected[1]) + (1.0 - homotopy) * pref.scalarize(selected)
}

/// Per-objective weights on the selected surrogates implied by
/// [`avus_loss`].
pub fn avus_weights(pref: Preference, homotopy: f64) -> [f64; 2] {
    [homotopy + (1.0 - homotopy) * pref.0[0], homotopy + (1.0 - homotopy) * pref.0[1]]
}

/// Divides each gradient by the magnitude of its objective's initial loss.
/// Objectives whose initial loss is (near) zero are left unscaled.
pub fn grad_normalize(grads: &mut [Vec<f64>], initial_losses: &[f64]) {
    assert_eq!(grads.len(), initial_losses.len(), "one loss per gradient");
    for (m, (g, l)) in grads.iter_mut().zip(initial_losses).enumerate() {
        let s = l.abs();
        if s < 1e-12 {
            log::warn!("objective {m}: initial loss {l} too small, gradient left unnormalized");
            continue;
        }
        g.iter_mut().for_each(|x| *x /= s);
    }
}

/// Weight `nu` of the minimum-norm point `nu g1 + (1 - nu) g2` on the
/// segment between two gradients.
pub fn min_norm_nu(g1: &[f64], g2: &[f64]) -> f64 {
    assert_eq!(g1.len(), g2.len(), "gradient widths");
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in g1.iter().zip(g2) {
        let d = b - a;
        num += d * b;
        den += d * d;
    }
    if den == 0.0 {
        return 0.5;
    }
    (num / den).clamp(0.0, 1.0)
}

pub fn combine(g1: &[f64], g2: &[f64], nu: f64) -> Vec<f64> {
    g1.iter().zip(g2).map(|(a, b)| nu * a + (1.0 - nu) * b).collect()
}

pub fn norm_sq(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum()
}
