//! The coverage/capacity MDP: STAR-RIS splits, phases and transmit power
//! are re-selected from discrete grids every step and the reward is the
//! change of both objectives.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::channel::{self, ArrayLayout, ChannelParams, ChannelRealization};
use crate::error::{CcoError, Result};
use crate::geometry::GridMap;
use crate::rng;
use crate::scenario::Scenario;
use crate::starris::{self, NetworkMetrics, ObjectiveWeights, RadioParams, StarRisState};

pub type RewardVec = [f64; 2];

/// One environment transition as seen by a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: RewardVec,
    pub done: bool,
}

/// Episodic two-objective environment with a factored categorical action.
pub trait MoEnv {
    fn obs_dim(&self) -> usize;
    /// Number of choices in each categorical action block.
    fn action_blocks(&self) -> Vec<usize>;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[usize]) -> Result<EnvStep>;
    /// Current (coverage, capacity)-like objective values.
    fn objectives(&self) -> [f64; 2];
}

fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Normalized Poisson pmf values `pmf(lambda, k_i) / sum_j pmf(lambda, k_j)`,
/// computed in log space.
pub fn poisson_weights(lambda: f64, counts: &[u64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(CcoError::Scenario(format!("Poisson mean must be > 0, got {lambda}")));
    }
    let logs: Vec<f64> = counts
        .iter()
        .map(|&k| -lambda + k as f64 * lambda.ln() - ln_factorial(k))
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / s).collect())
}

/// Draws one event count per point and turns them into weights.
pub fn traffic_weights<R: Rng + ?Sized>(
    lambda_cov: f64,
    lambda_cap: f64,
    n_points: usize,
    rng: &mut R,
) -> Result<(ObjectiveWeights, Vec<u64>, Vec<u64>)> {
    let draw = |lambda: f64, rng: &mut R| -> Result<Vec<u64>> {
        let d = Poisson::new(lambda).map_err(|e| CcoError::Scenario(e.to_string()))?;
        Ok((0..n_points).map(|_| d.sample(rng) as u64).collect())
    };
    let k_cov = draw(lambda_cov, rng)?;
    let k_cap = draw(lambda_cap, rng)?;
    let w = ObjectiveWeights {
        coverage: poisson_weights(lambda_cov, &k_cov)?,
        capacity: poisson_weights(lambda_cap, &k_cap)?,
    };
    Ok((w, k_cov, k_cap))
}

/// Shape of the factored action: per surface one energy-split block and one
/// phase block per element, then one power block.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionLayout {
    pub n_ris: usize,
    pub n_elements: usize,
    pub k_re: usize,
    pub step: f64,
    pub phase_levels: usize,
    pub max_power: f64,
    pub min_power: f64,
}

impl ActionLayout {
    /// Split grid `{z, 2z, ..., 1 - z}`.
    pub fn split_levels(&self) -> usize {
        (1.0 / self.step).round() as usize - 1
    }

    /// Power grid `{0, z P_max, ..., P_max}`.
    pub fn power_levels(&self) -> usize {
        (1.0 / self.step).round() as usize + 1
    }

    pub fn split_value(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.step
    }

    pub fn phase_value(&self, i: usize) -> f64 {
        TAU * i as f64 / self.phase_levels as f64
    }

    /// Grid power, clamped into `[min_power, max_power]`.
    pub fn power_value(&self, i: usize) -> f64 {
        (i as f64 * self.step * self.max_power).clamp(self.min_power, self.max_power)
    }

    pub fn blocks(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.n_ris * (1 + self.n_elements) + 1);
        for _ in 0..self.n_ris {
            b.push(self.split_levels());
            b.extend(std::iter::repeat_n(self.phase_levels, self.n_elements));
        }
        b.push(self.power_levels());
        b
    }

    pub fn n_blocks(&self) -> usize {
        self.n_ris * (1 + self.n_elements) + 1
    }

    /// Turns action indices into surface states and a transmit power.
    pub fn decode(&self, action: &[usize]) -> Result<(Vec<StarRisState>, f64)> {
        if action.len() != self.n_blocks() {
            return Err(CcoError::Shape { expected: self.n_blocks(), got: action.len() });
        }
        for (j, (&a, n)) in action.iter().zip(self.blocks()).enumerate() {
            if a >= n {
                return Err(CcoError::Action(format!("block {j}: index {a} >= {n}")));
            }
        }
        let per = 1 + self.n_elements;
        let k_tr = self.n_elements - self.k_re;
        let mut states = Vec::with_capacity(self.n_ris);
        for s in 0..self.n_ris {
            let blk = &action[s * per..(s + 1) * per];
            let phases: Vec<f64> = blk[1..].iter().map(|&i| self.phase_value(i)).collect();
            states.push(StarRisState::from_split(
                self.k_re,
                k_tr,
                self.split_value(blk[0]),
                phases[..self.k_re].to_vec(),
                phases[self.k_re..].to_vec(),
            )?);
        }
        Ok((states, self.power_value(action[self.n_blocks() - 1])))
    }
}

/// Surface configurations plus transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct MoState {
    pub surfaces: Vec<StarRisState>,
    pub transmit_power: f64,
}

impl MoState {
    /// Feature vector: per surface the reflected and transmitted energy
    /// shares and `(cos, sin)` of every phase, then `P_t / P_max`.
    pub fn features(&self, max_power: f64) -> Vec<f64> {
        let mut f = Vec::new();
        for s in &self.surfaces {
            f.push(s.k_re as f64 * s.beta_re);
            f.push(s.k_tr as f64 * s.beta_tr);
            for &p in s.phase_re.iter().chain(&s.phase_tr) {
                f.push(p.cos());
                f.push(p.sin());
            }
        }
        f.push(self.transmit_power / max_power);
        f
    }
}

pub struct StarRisEnv {
    grid: GridMap,
    channel_params: ChannelParams,
    array: ArrayLayout,
    radio: RadioParams,
    layout: ActionLayout,
    initial_power: f64,
    lambda_cov: f64,
    lambda_cap: f64,
    episode_steps: usize,
    // episode state
    channels: Option<ChannelRealization>,
    weights: ObjectiveWeights,
    state: MoState,
    metrics: Option<NetworkMetrics>,
    t: usize,
}

impl StarRisEnv {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.grid()?;
        let array = scenario.layout();
        let n_elements = if grid.n_ris() == 0 { 0 } else { array.n_elements() };
        let layout = ActionLayout {
            n_ris: grid.n_ris(),
            n_elements,
            k_re: n_elements / 2,
            step: scenario.env.amplitude_step,
            phase_levels: scenario.env.phase_levels,
            max_power: scenario.radio.max_power,
            min_power: scenario.radio.min_power,
        };
        let n = grid.n_points();
        Ok(Self {
            channel_params: scenario.channel_params()?,
            radio: scenario.radio_params(),
            initial_power: scenario.radio.initial_power,
            lambda_cov: scenario.env.lambda_coverage,
            lambda_cap: scenario.env.lambda_capacity,
            episode_steps: scenario.env.episode_steps,
            array,
            layout,
            channels: None,
            weights: ObjectiveWeights::uniform(n),
            state: MoState { surfaces: Vec::new(), transmit_power: scenario.radio.initial_power },
            metrics: None,
            t: 0,
            grid,
        })
    }

    pub fn grid(&self) -> &GridMap {
        &self.grid
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn radio(&self) -> &RadioParams {
        &self.radio
    }

    pub fn state(&self) -> &MoState {
        &self.state
    }

    pub fn weights(&self) -> &ObjectiveWeights {
        &self.weights
    }

    pub fn channels(&self) -> Option<&ChannelRealization> {
        self.channels.as_ref()
    }

    pub fn metrics(&self) -> Option<&NetworkMetrics> {
        self.metrics.as_ref()
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn episode_steps(&self) -> usize {
        self.episode_steps
    }

    fn evaluate(&self) -> Result<NetworkMetrics> {
        let ch = self
            .channels
            .as_ref()
            .ok_or_else(|| CcoError::Invariant("environment used before reset".into()))?;
        starris::evaluate(
            &self.grid,
            ch,
            &self.state.surfaces,
            self.state.transmit_power,
            &self.weights,
            &self.radio,
        )
    }

    fn check_invariants(&self) -> Result<()> {
        let p = self.state.transmit_power;
        if !(p > 0.0 && p <= self.layout.max_power) {
            return Err(CcoError::Invariant(format!("transmit power {p} outside (0, P_max]")));
        }
        for s in &self.state.surfaces {
            s.validate().map_err(|e| CcoError::Invariant(e.to_string()))?;
        }
        Ok(())
    }

    /// Starts an episode: redraws the NLOS channels and the traffic
    /// weights, puts every split at the grid midpoint, draws random grid
    /// phases and restores the initial power.
    pub fn reset_state(&mut self, seed: u64) -> Result<&MoState> {
        let mut r = rng::stream(seed, &[0x7EA5]);
        let (w, _, _) = traffic_weights(self.lambda_cov, self.lambda_cap, self.grid.n_points(), &mut r)?;
        self.weights = w;
        self.channels = Some(channel::realize(&self.grid, &self.channel_params, &self.array, seed));
        let mid = (self.layout.split_levels() - 1) / 2;
        let mut surfaces = Vec::with_capacity(self.layout.n_ris);
        for _ in 0..self.layout.n_ris {
            let phases: Vec<f64> = (0..self.layout.n_elements)
                .map(|_| self.layout.phase_value(r.random_range(0..self.layout.phase_levels)))
                .collect();
            surfaces.push(StarRisState::from_split(
                self.layout.k_re,
                self.layout.n_elements - self.layout.k_re,
                self.layout.split_value(mid),
                phases[..self.layout.k_re].to_vec(),
                phases[self.layout.k_re..].to_vec(),
            )?);
        }
        self.state = MoState { surfaces, transmit_power: self.initial_power };
        self.t = 0;
        self.metrics = Some(self.evaluate()?);
        self.check_invariants()?;
        Ok(&self.state)
    }

    /// Applies an action and returns the reward and the new metrics.
    pub fn step_detailed(&mut self, action: &[usize]) -> Result<(RewardVec, &NetworkMetrics)> {
        let before = self
            .metrics
            .as_ref()
            .ok_or_else(|| CcoError::Invariant("environment used before reset".into()))?
            .objectives();
        let (surfaces, power) = self.layout.decode(action)?;
        self.state = MoState { surfaces, transmit_power: power };
        self.check_invariants()?;
        let m = self.evaluate()?;
        let after = m.objectives();
        self.metrics = Some(m);
        self.t += 1;
        let reward = [after[0] - before[0], after[1] - before[1]];
        Ok((reward, self.metrics.as_ref().expect("just set")))
    }

    /// Action indices that reproduce the current surface configuration with
    /// the given power index.
    pub fn current_action(&self, power_index: usize) -> Vec<usize> {
        let mut a = Vec::with_capacity(self.layout.n_blocks());
        let level = |p: f64| (p / TAU * self.layout.phase_levels as f64).round() as usize;
        for s in &self.state.surfaces {
            let share = s.k_tr as f64 * s.beta_tr;
            a.push((share / self.layout.step).round() as usize - 1);
            a.extend(s.phase_re.iter().chain(&s.phase_tr).map(|&p| level(p)));
        }
        a.push(power_index);
        a
    }
}

impl MoEnv for StarRisEnv {
    fn obs_dim(&self) -> usize {
        self.layout.n_ris * (2 + 2 * self.layout.n_elements) + 1
    }

    fn action_blocks(&self) -> Vec<usize> {
        self.layout.blocks()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.reset_state(seed)?;
        Ok(self.state.features(self.layout.max_power))
    }

    fn step(&mut self, action: &[usize]) -> Result<EnvStep> {
        let (reward, _) = self.step_detailed(action)?;
        Ok(EnvStep {
            obs: self.state.features(self.layout.max_power),
            reward,
            done: self.t >= self.episode_steps,
        })
    }

    fn objectives(&self) -> [f64; 2] {
        self.metrics.as_ref().map_or([0.0, 0.0], NetworkMetrics::objectives)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poisson_weight_examples() {
        assert_eq!(poisson_weights(1.0, &[1, 1]).unwrap(), vec![0.5, 0.5]);
        let w = poisson_weights(2.0, &[0, 1, 2]).unwrap();
        for (a, b) in w.iter().zip([0.2, 0.4, 0.4]) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        assert!(poisson_weights(0.0, &[1]).is_err());
        // large counts stay finite
        let w = poisson_weights(64.0, &[0, 64, 400]).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn traffic_weights_are_normalized() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let (w, kc, kp) = traffic_weights(5.0, 64.0, 9, &mut r).unwrap();
        w.validate().unwrap();
        assert_eq!((kc.len(), kp.len()), (9, 9));
    }

    #[test]
    fn action_grids() {
        let l = ActionLayout {
            n_ris: 1,
            n_elements: 4,
            k_re: 2,
            step: 0.1,
            phase_levels: 8,
            max_power: 200.0,
            min_power: 0.1,
        };
        assert_eq!(l.split_levels(), 9);
        assert_eq!(l.power_levels(), 11);
        assert_relative_eq!(l.split_value(8), 0.9, max_relative = 1e-12);
        assert_eq!(l.power_value(0), 0.1);
        assert_eq!(l.power_value(10), 200.0);
        assert_eq!(l.blocks(), vec![9, 8, 8, 8, 8, 11]);
        assert!(l.decode(&[9, 0, 0, 0, 0, 0]).is_err());
        assert!(l.decode(&[0, 0, 0]).is_err());
        let (s, p) = l.decode(&[4, 1, 2, 3, 4, 5]).unwrap();
        assert_relative_eq!(s[0].energy(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s[0].phase_tr[1], TAU / 2.0);
        assert_relative_eq!(p, 100.0);
    }

    #[test]
    fn reset_is_deterministic() {
        let sc = Scenario::desk();
        let mut a = StarRisEnv::new(&sc).unwrap();
        let mut b = StarRisEnv::new(&sc).unwrap();
        assert_eq!(a.reset(11).unwrap(), b.reset(11).unwrap());
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.state().transmit_power, 2.1);
        a.weights().validate().unwrap();
        let mut c = StarRisEnv::new(&sc).unwrap();
        assert_ne!(c.reset(12).unwrap(), a.reset(11).unwrap());
        assert_eq!(a.obs_dim(), a.state().features(200.0).len());
    }

    #[test]
    fn repeating_the_configuration_gives_zero_reward() {
        let mut env = StarRisEnv::new(&Scenario::desk()).unwrap();
        env.reset(5).unwrap();
        let act = env.current_action(3);
        env.step(&act).unwrap();
        let again = env.current_action(3);
        assert_eq!(again, act);
        let s = env.step(&again).unwrap();
        assert_eq!(s.reward, [0.0, 0.0]);
    }

    #[test]
    fn raising_power_never_lowers_coverage() {
        let mut env = StarRisEnv::new(&Scenario::desk()).unwrap();
        env.reset(9).unwrap();
        let mut prev = env.step(&env.current_action(0)).unwrap();
        for p in 1..env.layout().power_levels() {
            let act = env.current_action(p);
            let s = env.step(&act).unwrap();
            assert!(s.reward[0] >= 0.0, "power index {p}: {:?}", s.reward);
            prev = s;
        }
        assert!(!prev.done);
    }

    #[test]
    fn step_matches_recomputation() {
        let sc = Scenario::desk();
        let mut env = StarRisEnv::new(&sc).unwrap();
        env.reset(21).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let blocks = env.action_blocks();
        for _ in 0..5 {
            let before = env.objectives();
            let act: Vec<usize> = blocks.iter().map(|&n| r.random_range(0..n)).collect();
            let s = env.step(&act).unwrap();
            let (states, p) = env.layout().decode(&act).unwrap();
            let m = starris::evaluate(
                env.grid(),
                env.channels().unwrap(),
                &states,
                p,
                env.weights(),
                env.radio(),
            )
            .unwrap();
            assert!((s.reward[0] - (m.coverage - before[0])).abs() < 1e-12);
            assert!((s.reward[1] - (m.capacity - before[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn episode_ends_after_configured_steps() {
        let mut sc = Scenario::desk();
        sc.env.episode_steps = 3;
        let mut env = StarRisEnv::new(&sc).unwrap();
        env.reset(0).unwrap();
        let a = env.current_action(1);
        assert!(!env.step(&a).unwrap().done);
        assert!(!env.step(&a).unwrap().done);
        assert!(env.step(&a).unwrap().done);
    }

    #[test]
    fn surface_free_env_has_power_only_action() {
        let mut env = StarRisEnv::new(&Scenario::desk().without_surfaces()).unwrap();
        env.reset(1).unwrap();
        assert_eq!(env.action_blocks(), vec![11]);
        assert_eq!(env.obs_dim(), 1);
        env.step(&[10]).unwrap();
        assert_eq!(env.state().transmit_power, 200.0);
    }
}
