//! Tabular two-objective MDP used to check the envelope operators and the
//! trainer against exact value iteration.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Preference;
use crate::env::{EnvStep, MoEnv};
use crate::error::{CcoError, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMomdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `[s * n_actions + a]`: successor distribution.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// `[s * n_actions + a]`: vector reward.
    pub rewards: Vec<[f64; 2]>,
    pub terminal: Vec<bool>,
    pub start: usize,
    pub gamma: f64,
}

/// Tabular vector action values indexed `[s][a][pref]`.
pub type MoQ = Vec<Vec<Vec<[f64; 2]>>>;

impl TabularMomdp {
    /// 3 x 5 grid, start at the top middle. Three absorbing treasures two
    /// moves away: `(1, 0)` top-left, `(0, 1)` top-right and `(0.6, 0.6)`
    /// bottom-middle. Actions: up, down, left, right; walls keep the agent
    /// in place.
    pub fn treasure_grid(gamma: f64) -> Self {
        let (rows, cols) = (3usize, 5usize);
        let n_states = rows * cols;
        let id = |r: usize, c: usize| r * cols + c;
        let treasures = [(id(0, 0), [1.0, 0.0]), (id(0, 4), [0.0, 1.0]), (id(2, 2), [0.6, 0.6])];
        let mut terminal = vec![false; n_states];
        for (s, _) in treasures {
            terminal[s] = true;
        }
        let mut transitions = Vec::with_capacity(n_states * 4);
        let mut rewards = Vec::with_capacity(n_states * 4);
        for s in 0..n_states {
            let (r, c) = (s / cols, s % cols);
            for a in 0..4 {
                if terminal[s] {
                    transitions.push(vec![(s, 1.0)]);
                    rewards.push([0.0, 0.0]);
                    continue;
                }
                let (nr, nc) = match a {
                    0 => (r.saturating_sub(1), c),
                    1 => ((r + 1).min(rows - 1), c),
                    2 => (r, c.saturating_sub(1)),
                    _ => (r, (c + 1).min(cols - 1)),
                };
                let next = id(nr, nc);
                transitions.push(vec![(next, 1.0)]);
                rewards.push(treasures.iter().find(|(t, _)| *t == next).map_or([0.0, 0.0], |(_, v)| *v));
            }
        }
        Self { n_states, n_actions: 4, transitions, rewards, terminal, start: id(0, 2), gamma }
    }

    fn idx(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Optimal scalarized state values for one preference.
    pub fn value_iteration(&self, pref: Preference, tol: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        loop {
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                if self.terminal[s] {
                    continue;
                }
                let best = (0..self.n_actions)
                    .map(|a| {
                        let i = self.idx(s, a);
                        pref.scalarize(self.rewards[i])
                            + self.gamma * self.transitions[i].iter().map(|(n, p)| p * v[*n]).sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                delta = delta.max((best - v[s]).abs());
                v[s] = best;
            }
            if delta < tol {
                return v;
            }
        }
    }

    /// Vector values of a deterministic policy (`policy[s]`).
    pub fn policy_values(&self, policy: &[usize], tol: f64) -> Vec<[f64; 2]> {
        let mut v = vec![[0.0; 2]; self.n_states];
        for _ in 0..100_000 {
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                if self.terminal[s] {
                    continue;
                }
                let i = self.idx(s, policy[s]);
                for m in 0..2 {
                    let nv = self.rewards[i][m]
                        + self.gamma * self.transitions[i].iter().map(|(n, p)| p * v[*n][m]).sum::<f64>();
                    delta = delta.max((nv - v[s][m]).abs());
                    v[s][m] = nv;
                }
            }
            if delta < tol {
                break;
            }
        }
        v
    }

    pub fn zero_q(&self, n_prefs: usize) -> MoQ {
        vec![vec![vec![[0.0; 2]; n_prefs]; self.n_actions]; self.n_states]
    }

    /// Envelope filter: `(HQ)(s, w) = max_{a, w'} w . Q(s, a, w')`, with
    /// the maximizing vector. Returns `[s][pref] -> (scalar, vector)`.
    pub fn optimality_filter(q: &MoQ, prefs: &[Preference]) -> Result<Vec<Vec<(f64, [f64; 2])>>> {
        if prefs.is_empty() {
            return Err(CcoError::Invariant("optimality filter needs a preference".into()));
        }
        Ok(q.iter()
            .map(|qs| {
                prefs
                    .iter()
                    .map(|w| {
                        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
                        for qa in qs {
                            for v in qa {
                                let s = w.scalarize(*v);
                                if s > best.0 {
                                    best = (s, *v);
                                }
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect())
    }

    /// One application of the multi-objective optimality operator:
    /// `(JQ)(s, a, w) = r(s, a) + gamma E[argmax-vector of (HQ)(s', w)]`.
    pub fn envelope_operator(&self, q: &MoQ, prefs: &[Preference]) -> Result<MoQ> {
        let h = Self::optimality_filter(q, prefs)?;
        let mut out = self.zero_q(prefs.len());
        for s in 0..self.n_states {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.n_actions {
                let i = self.idx(s, a);
                for k in 0..prefs.len() {
                    let mut v = self.rewards[i];
                    for (n, p) in &self.transitions[i] {
                        for m in 0..2 {
                            v[m] += self.gamma * p * h[*n][k].1[m];
                        }
                    }
                    out[s][a][k] = v;
                }
            }
        }
        Ok(out)
    }

    /// Iterates [`Self::envelope_operator`] to a fixed point.
    pub fn envelope_value_iteration(&self, prefs: &[Preference], tol: f64, max_iter: usize) -> Result<MoQ> {
        let mut q = self.zero_q(prefs.len());
        for _ in 0..max_iter {
            let next = self.envelope_operator(&q, prefs)?;
            let delta = q
                .iter()
                .flatten()
                .flatten()
                .zip(next.iter().flatten().flatten())
                .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
                .fold(0.0, f64::max);
            q = next;
            if delta < tol {
                break;
            }
        }
        Ok(q)
    }
}

/// Episodic wrapper: one-hot observations, episodes end at a terminal
/// state or after `max_steps`. `objectives` is the discounted vector
/// return collected so far.
pub struct ToyEnv {
    mdp: TabularMomdp,
    max_steps: usize,
    state: usize,
    t: usize,
    discount: f64,
    collected: [f64; 2],
    rng: ChaCha8Rng,
}

impl ToyEnv {
    pub fn new(mdp: TabularMomdp, max_steps: usize) -> Self {
        let start = mdp.start;
        Self { mdp, max_steps, state: start, t: 0, discount: 1.0, collected: [0.0; 2], rng: rng::stream(0, &[]) }
    }

    pub fn mdp(&self) -> &TabularMomdp {
        &self.mdp
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.mdp.n_states];
        v[s] = 1.0;
        v
    }
}

impl MoEnv for ToyEnv {
    fn obs_dim(&self) -> usize {
        self.mdp.n_states
    }

    fn action_blocks(&self) -> Vec<usize> {
        vec![self.mdp.n_actions]
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = rng::stream(seed, &[0x70F]);
        self.state = self.mdp.start;
        self.t = 0;
        self.discount = 1.0;
        self.collected = [0.0; 2];
        Ok(self.one_hot(self.state))
    }

    fn step(&mut self, action: &[usize]) -> Result<EnvStep> {
        let a = match action {
            [a] if *a < self.mdp.n_actions => *a,
            _ => return Err(CcoError::Action(format!("{action:?}"))),
        };
        let i = self.mdp.idx(self.state, a);
        let reward = self.mdp.rewards[i];
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let succ = &self.mdp.transitions[i];
        let mut next = succ[succ.len() - 1].0;
        for (n, p) in succ {
            acc += p;
            if u < acc {
                next = *n;
                break;
            }
        }
        for m in 0..2 {
            self.collected[m] += self.discount * reward[m];
        }
        self.discount *= self.mdp.gamma;
        self.state = next;
        self.t += 1;
        Ok(EnvStep {
            obs: self.one_hot(next),
            reward,
            done: self.mdp.terminal[next] || self.t >= self.max_steps,
        })
    }

    fn objectives(&self) -> [f64; 2] {
        self.collected
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefs(n: usize) -> Vec<Preference> {
        (0..n).map(|k| Preference::new(k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn filter_single_action_single_preference() {
        let q: MoQ = vec![vec![vec![[2.0, 4.0]]]];
        let p = [Preference([0.25, 0.75])];
        let h = TabularMomdp::optimality_filter(&q, &p).unwrap();
        assert_eq!(h[0][0], (3.5, [2.0, 4.0]));
        assert!(TabularMomdp::optimality_filter(&q, &[]).is_err());
    }

    #[test]
    fn filter_matches_enumeration() {
        // 2 states x 2 actions x 2 preferences
        let q: MoQ = vec![
            vec![vec![[1.0, 0.0], [0.0, 0.2]], vec![[0.4, 0.4], [0.0, 1.0]]],
            vec![vec![[0.3, 0.9], [0.5, 0.5]], vec![[0.9, 0.1], [0.2, 0.2]]],
        ];
        let p = [Preference([0.8, 0.2]), Preference([0.1, 0.9])];
        let h = TabularMomdp::optimality_filter(&q, &p).unwrap();
        for s in 0..2 {
            for (k, w) in p.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for a in 0..2 {
                    for k2 in 0..2 {
                        best = best.max(w.scalarize(q[s][a][k2]));
                    }
                }
                assert_eq!(h[s][k].0, best);
            }
        }
    }

    #[test]
    fn envelope_iteration_recovers_scalar_optimum() {
        let mdp = TabularMomdp::treasure_grid(0.9);
        let ps = prefs(5);
        let q = mdp.envelope_value_iteration(&ps, 1e-12, 1000).unwrap();
        let h = TabularMomdp::optimality_filter(&q, &ps).unwrap();
        for (k, w) in ps.iter().enumerate() {
            let v = mdp.value_iteration(*w, 1e-12);
            assert!((h[mdp.start][k].0 - v[mdp.start]).abs() < 1e-9, "pref {w:?}");
        }
    }

    #[test]
    fn treasure_optima_differ_by_preference() {
        let mdp = TabularMomdp::treasure_grid(0.9);
        let v = |w0| mdp.value_iteration(Preference::new(w0), 1e-12)[mdp.start];
        assert!((v(1.0) - 0.9).abs() < 1e-12);
        assert!((v(0.5) - 0.54).abs() < 1e-12);
        assert!((v(0.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn toy_env_walks_the_grid() {
        let mut env = ToyEnv::new(TabularMomdp::treasure_grid(0.9), 10);
        env.reset(0).unwrap();
        assert!(!env.step(&[2]).unwrap().done);
        let s = env.step(&[2]).unwrap();
        assert!(s.done);
        assert_eq!(s.reward, [1.0, 0.0]);
        assert!((env.objectives()[0] - 0.9).abs() < 1e-12);
        assert!(env.step(&[7]).is_err());
    }
}
