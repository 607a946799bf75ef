//! Mode-splitting STAR-RIS coefficients, the three-case received signal,
//! RSRP/SINR per sample point and the weighted coverage/capacity objectives.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{CcoError, Result};
use crate::geometry::{GridMap, LinkIndicators};

pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Reflect,
    Transmit,
}

/// Per-surface configuration. Elements `0..k_re` reflect, `k_re..k_re+k_tr`
/// transmit.
#[derive(Debug, Clone, PartialEq)]
pub struct StarRisState {
    pub k_re: usize,
    pub k_tr: usize,
    pub beta_re: f64,
    pub beta_tr: f64,
    pub phase_re: Vec<f64>,
    pub phase_tr: Vec<f64>,
}

impl StarRisState {
    /// Builds a state that sends `tr_share` of the incident energy into
    /// transmission: `K_Tr beta_Tr = tr_share`, `K_Re beta_Re = 1 - tr_share`.
    pub fn from_split(
        k_re: usize,
        k_tr: usize,
        tr_share: f64,
        phase_re: Vec<f64>,
        phase_tr: Vec<f64>,
    ) -> Result<Self> {
        if k_re == 0 || k_tr == 0 {
            return Err(CcoError::RisState("both modes need at least one element".into()));
        }
        if !(tr_share > 0.0 && tr_share < 1.0) {
            return Err(CcoError::RisState(format!("energy share {tr_share} outside (0, 1)")));
        }
        let s = Self {
            k_re,
            k_tr,
            beta_re: (1.0 - tr_share) / k_re as f64,
            beta_tr: tr_share / k_tr as f64,
            phase_re,
            phase_tr,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_elements(&self) -> usize {
        self.k_re + self.k_tr
    }

    pub fn energy(&self) -> f64 {
        self.k_re as f64 * self.beta_re + self.k_tr as f64 * self.beta_tr
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_re == 0 || self.k_tr == 0 {
            return Err(CcoError::RisState("both modes need at least one element".into()));
        }
        if self.phase_re.len() != self.k_re || self.phase_tr.len() != self.k_tr {
            return Err(CcoError::RisState("phase vector length does not match mode size".into()));
        }
        for b in [self.beta_re, self.beta_tr] {
            if !(b > 0.0 && b <= 1.0) {
                return Err(CcoError::RisState(format!("amplitude {b} outside (0, 1]")));
            }
        }
        if (self.energy() - 1.0).abs() > ENERGY_TOLERANCE {
            return Err(CcoError::RisState(format!(
                "energy identity violated: K_Re b_Re + K_Tr b_Tr = {}",
                self.energy()
            )));
        }
        if let Some(p) = self
            .phase_re
            .iter()
            .chain(&self.phase_tr)
            .find(|p| !(**p >= 0.0 && **p < TAU))
        {
            return Err(CcoError::RisState(format!("phase {p} outside [0, 2pi)")));
        }
        Ok(())
    }

    pub fn mode_range(&self, mode: Mode) -> std::ops::Range<usize> {
        match mode {
            Mode::Reflect => 0..self.k_re,
            Mode::Transmit => self.k_re..self.k_re + self.k_tr,
        }
    }
}

/// Diagonal of `Phi_mode`: `sqrt(beta) exp(j phi_k)` per element of the mode.
pub fn coefficient_matrix(state: &StarRisState, mode: Mode) -> Vec<Complex64> {
    let (beta, phases) = match mode {
        Mode::Reflect => (state.beta_re, &state.phase_re),
        Mode::Transmit => (state.beta_tr, &state.phase_tr),
    };
    let amp = beta.sqrt();
    phases.iter().map(|&p| Complex64::from_polar(amp, p)).collect()
}

/// Points behind the panel (smaller x than the surface, away from the BSs)
/// are served in transmission, the rest in reflection.
pub fn mode_for_point(point_x: f64, ris_x: f64) -> Mode {
    if point_x < ris_x {
        Mode::Transmit
    } else {
        Mode::Reflect
    }
}

/// Which received-signal expression applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalCase {
    /// Panel below the height threshold: the direct path always exists.
    DirectAlways,
    /// Tall but narrow panel: the direct path exists unless blocked.
    DirectUnlessBlocked,
    /// No direct path.
    CascadeOnly,
}

impl SignalCase {
    pub fn from_indicators(ind: LinkIndicators) -> Result<Self> {
        if ind.any != (ind.height || ind.width) {
            return Err(CcoError::RisState(format!("inconsistent indicators {ind:?}")));
        }
        Ok(match (ind.any, ind.height, ind.width) {
            (false, _, _) => SignalCase::CascadeOnly,
            (true, false, true) => SignalCase::DirectUnlessBlocked,
            // I_w = 0 forces I_h = 1; a panel that is both short and narrow
            // is cleared over the top as well.
            (true, true, _) => SignalCase::DirectAlways,
            (true, false, false) => unreachable!(),
        })
    }
}

/// `h_rp^H Phi h_br`: the cascaded term over the elements of one mode.
pub fn cascade(h_bs_ris: &[Complex64], h_ris_point: &[Complex64], coeffs: &[Complex64]) -> Complex64 {
    h_ris_point
        .iter()
        .zip(coeffs)
        .zip(h_bs_ris)
        .map(|((rp, phi), br)| rp.conj() * phi * br)
        .sum()
}

/// Noise-free received amplitude of one (BS, surface, point) link.
/// `direct_visible` is the per-link direct-path flag used by the
/// narrow-panel case.
pub fn received_signal(
    cascade_term: Complex64,
    h_direct: Complex64,
    case: SignalCase,
    direct_visible: bool,
    amplitude: f64,
) -> Complex64 {
    let direct = match case {
        SignalCase::DirectAlways => h_direct,
        SignalCase::DirectUnlessBlocked if direct_visible => h_direct,
        SignalCase::DirectUnlessBlocked | SignalCase::CascadeOnly => Complex64::new(0.0, 0.0),
    };
    (cascade_term + direct) * amplitude
}

/// Serving candidate: BS index and surface index (`None` when the network
/// has no surfaces and only direct links exist).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkId {
    pub bs: usize,
    pub ris: Option<usize>,
}

/// Max power over candidate links and the first link attaining it.
pub fn rsrp(links: &[(LinkId, f64)]) -> (f64, LinkId) {
    assert!(!links.is_empty(), "rsrp needs at least one link");
    let mut best = links[0];
    for &l in &links[1..] {
        if l.1 > best.1 {
            best = l;
        }
    }
    (best.1, best.0)
}

/// Which link powers count as interference for a serving link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    /// Every candidate link other than the serving pair.
    AllOtherLinks,
    /// Each non-serving BS once, through the serving surface index (its
    /// direct link when there are no surfaces).
    #[default]
    OtherBsSameSurface,
}

impl InterferenceModel {
    pub fn interference(self, links: &[(LinkId, f64)], serving: LinkId) -> f64 {
        match self {
            InterferenceModel::AllOtherLinks => links
                .iter()
                .filter(|(id, _)| *id != serving)
                .map(|(_, p)| p)
                .sum(),
            InterferenceModel::OtherBsSameSurface => links
                .iter()
                .filter(|(id, _)| id.bs != serving.bs && id.ris == serving.ris)
                .map(|(_, p)| p)
                .sum(),
        }
    }
}

pub fn sinr(serving_power: f64, interference: f64, noise_power: f64) -> f64 {
    serving_power / (interference + noise_power)
}

/// Weight mass of points whose RSRP reaches the threshold.
pub fn coverage(rsrp: &[f64], weights: &[f64], threshold: f64) -> f64 {
    rsrp.iter()
        .zip(weights)
        .filter(|(r, _)| **r >= threshold)
        .map(|(_, w)| w)
        .sum()
}

pub fn capacity(sinr: &[f64], weights: &[f64], bandwidth: f64) -> f64 {
    sinr.iter()
        .zip(weights)
        .map(|(s, w)| w * bandwidth * (1.0 + s).log2())
        .sum()
}

/// Normalized per-point weights for both objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveWeights {
    pub coverage: Vec<f64>,
    pub capacity: Vec<f64>,
}

impl ObjectiveWeights {
    pub fn uniform(n: usize) -> Self {
        let w = vec![1.0 / n as f64; n];
        Self { coverage: w.clone(), capacity: w }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("coverage", &self.coverage), ("capacity", &self.capacity)] {
            if w.iter().any(|x| !(*x >= 0.0)) {
                return Err(CcoError::Scenario(format!("{name} weights must be >= 0")));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(CcoError::Scenario(format!("{name} weights sum to {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Linear power threshold, same unit as the transmit power (mW).
    pub rsrp_threshold: f64,
    pub noise_power: f64,
    pub bandwidth: f64,
    pub interference: InterferenceModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMetrics {
    pub rsrp: Vec<f64>,
    pub best_server: Vec<LinkId>,
    pub sinr: Vec<f64>,
    pub coverage: f64,
    pub capacity: f64,
}

impl NetworkMetrics {
    pub fn objectives(&self) -> [f64; 2] {
        [self.coverage, self.capacity]
    }
}

/// Candidate link powers (mW) at every sample point.
pub fn link_powers(
    grid: &GridMap,
    channels: &ChannelRealization,
    states: &[StarRisState],
    transmit_power: f64,
) -> Result<Vec<Vec<(LinkId, f64)>>> {
    if states.len() != grid.n_ris() {
        return Err(CcoError::Shape { expected: grid.n_ris(), got: states.len() });
    }
    let amplitude = transmit_power.sqrt();
    let cases = (0..grid.n_ris())
        .map(|s| grid.indicators(s).and_then(SignalCase::from_indicators))
        .collect::<Result<Vec<_>>>()?;
    let coeffs: Vec<[Vec<Complex64>; 2]> = states
        .iter()
        .map(|st| [coefficient_matrix(st, Mode::Reflect), coefficient_matrix(st, Mode::Transmit)])
        .collect();

    let mut out = Vec::with_capacity(grid.n_points());
    for (i, pt) in grid.sample_points.iter().enumerate() {
        let mut links = Vec::with_capacity(2 * grid.n_ris().max(1));
        for bs in 0..2 {
            let h_direct = channels.bs_point(bs, i);
            if grid.n_ris() == 0 {
                let y = h_direct * amplitude;
                links.push((LinkId { bs, ris: None }, y.norm_sqr()));
                continue;
            }
            let visible = !grid.direct_path_blocked(bs, i);
            for (s, st) in states.iter().enumerate() {
                let mode = mode_for_point(pt[0], grid.ris_placements[s].x);
                let range = st.mode_range(mode);
                let phi = &coeffs[s][if mode == Mode::Reflect { 0 } else { 1 }];
                let c = cascade(
                    &channels.bs_ris(bs, s)[range.clone()],
                    &channels.ris_point(s, i)[range],
                    phi,
                );
                let y = received_signal(c, h_direct, cases[s], visible, amplitude);
                links.push((LinkId { bs, ris: Some(s) }, y.norm_sqr()));
            }
        }
        out.push(links);
    }
    Ok(out)
}

/// RSRP, serving link, SINR and both weighted objectives.
pub fn evaluate(
    grid: &GridMap,
    channels: &ChannelRealization,
    states: &[StarRisState],
    transmit_power: f64,
    weights: &ObjectiveWeights,
    radio: &RadioParams,
) -> Result<NetworkMetrics> {
    let powers = link_powers(grid, channels, states, transmit_power)?;
    let mut rsrp_v = Vec::with_capacity(powers.len());
    let mut best = Vec::with_capacity(powers.len());
    let mut sinr_v = Vec::with_capacity(powers.len());
    for links in &powers {
        let (p, id) = rsrp(links);
        let intf = radio.interference.interference(links, id);
        rsrp_v.push(p);
        best.push(id);
        sinr_v.push(sinr(p, intf, radio.noise_power));
    }
    let cov = coverage(&rsrp_v, &weights.coverage, radio.rsrp_threshold);
    let cap = capacity(&sinr_v, &weights.capacity, radio.bandwidth);
    Ok(NetworkMetrics { rsrp: rsrp_v, best_server: best, sinr: sinr_v, coverage: cov, capacity: cap })
}

/// Writes one CSV row per sample point:
/// `t,i,x,y,rsrp_dBW,serving_a,serving_ns,sinr_dB,covered`.
/// Powers are in mW; `serving_a`/`serving_ns` are 1-based, `serving_ns` is 0
/// for a direct-only network.
pub fn write_metrics_rows<W: std::io::Write>(
    out: &mut W,
    t: usize,
    grid: &GridMap,
    metrics: &NetworkMetrics,
    threshold: f64,
) -> std::io::Result<()> {
    for (i, pt) in grid.sample_points.iter().enumerate() {
        let id = metrics.best_server[i];
        writeln!(
            out,
            "{t},{i},{},{},{:.6},{},{},{:.6},{}",
            pt[0],
            pt[1],
            10.0 * (metrics.rsrp[i] / 1000.0).log10(),
            id.bs + 1,
            id.ris.map_or(0, |s| s + 1),
            10.0 * metrics.sinr[i].log10(),
            u8::from(metrics.rsrp[i] >= threshold)
        )?;
    }
    Ok(())
}

pub const METRICS_HEADER: &str = "t,i,x,y,rsrp_dBW,serving_a,serving_ns,sinr_dB,covered";

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(k_re: usize, k_tr: usize, share: f64) -> StarRisState {
        StarRisState::from_split(k_re, k_tr, share, vec![0.0; k_re], vec![0.0; k_tr]).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        // K_Re = 1 with all energy reflected is the limit we can still build
        let s = StarRisState {
            k_re: 1,
            k_tr: 1,
            beta_re: 1.0,
            beta_tr: 1e-300,
            phase_re: vec![0.0],
            phase_tr: vec![0.0],
        };
        assert_eq!(coefficient_matrix(&s, Mode::Reflect), vec![Complex64::new(1.0, 0.0)]);

        let s = StarRisState::from_split(2, 6, 0.5, vec![0.0; 2], vec![1.0; 6]).unwrap();
        let tr_re: f64 = coefficient_matrix(&s, Mode::Reflect).iter().map(|c| c.norm_sqr()).sum();
        let tr_tr: f64 = coefficient_matrix(&s, Mode::Transmit).iter().map(|c| c.norm_sqr()).sum();
        assert_relative_eq!(tr_re, 0.5, max_relative = 1e-14);
        assert_relative_eq!(tr_re + tr_tr, 1.0, max_relative = 1e-14);
        assert_relative_eq!(s.beta_re, 0.25);
    }

    #[test]
    fn state_validation() {
        assert!(StarRisState::from_split(0, 2, 0.5, vec![], vec![0.0; 2]).is_err());
        assert!(StarRisState::from_split(2, 2, 1.0, vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(StarRisState::from_split(2, 2, 0.5, vec![TAU; 2], vec![0.0; 2]).is_err());
        assert!(StarRisState::from_split(2, 2, 0.5, vec![0.0; 3], vec![0.0; 2]).is_err());
        let mut s = state(2, 2, 0.3);
        s.beta_re *= 1.01;
        assert!(s.validate().is_err());
    }

    #[test]
    fn signal_cases() {
        let ind = |h, w| LinkIndicators::new(h, w);
        assert_eq!(SignalCase::from_indicators(ind(true, false)).unwrap(), SignalCase::DirectAlways);
        assert_eq!(
            SignalCase::from_indicators(ind(false, true)).unwrap(),
            SignalCase::DirectUnlessBlocked
        );
        assert_eq!(SignalCase::from_indicators(ind(false, false)).unwrap(), SignalCase::CascadeOnly);
        let bad = LinkIndicators { height: true, width: false, any: false };
        assert!(SignalCase::from_indicators(bad).is_err());
    }

    #[test]
    fn received_signal_examples() {
        let one = Complex64::new(1.0, 0.0);
        let s = StarRisState {
            k_re: 1,
            k_tr: 1,
            beta_re: 1.0,
            beta_tr: 1e-300,
            phase_re: vec![0.0],
            phase_tr: vec![0.0],
        };
        let phi = coefficient_matrix(&s, Mode::Reflect);
        let h_rp = Complex64::new(0.6, 0.8);
        let h_br = Complex64::new(0.0, 1.0);
        let c = cascade(&[h_br], &[h_rp], &phi);
        let y = received_signal(c, one, SignalCase::CascadeOnly, true, 2.0);
        assert!((y - h_rp.conj() * h_br * 2.0).norm() < 1e-15);
        let y1 = received_signal(c, Complex64::new(0.0, 0.0), SignalCase::DirectAlways, true, 2.0);
        assert_eq!(y1, y);
        let y2 = received_signal(c, one, SignalCase::DirectUnlessBlocked, false, 2.0);
        assert_eq!(y2, y);
        let y3 = received_signal(c, one, SignalCase::DirectUnlessBlocked, true, 2.0);
        assert!((y3 - (c + one) * 2.0).norm() < 1e-15);
    }

    #[test]
    fn rsrp_and_sinr_examples() {
        let id = |bs, ris| LinkId { bs, ris: Some(ris) };
        let links = [(id(0, 0), 0.1), (id(0, 1), 0.4), (id(1, 0), 0.3), (id(1, 1), 0.2)];
        assert_eq!(rsrp(&links), (0.4, id(0, 1)));
        assert_eq!(rsrp(&links[..1]), (0.1, id(0, 0)));

        assert_relative_eq!(sinr(2.0, 0.0, 0.5), 4.0);
        assert_relative_eq!(sinr(4.0, 1.0 + 1.0, 2.0), 1.0);

        let all = InterferenceModel::AllOtherLinks.interference(&links, id(0, 1));
        assert_relative_eq!(all, 0.6, max_relative = 1e-15);
        let same = InterferenceModel::OtherBsSameSurface.interference(&links, id(0, 1));
        assert_relative_eq!(same, 0.2);
        let direct = [
            (LinkId { bs: 0, ris: None }, 3.0),
            (LinkId { bs: 1, ris: None }, 1.0),
        ];
        for m in [InterferenceModel::AllOtherLinks, InterferenceModel::OtherBsSameSurface] {
            assert_eq!(m.interference(&direct, LinkId { bs: 0, ris: None }), 1.0);
        }
    }

    #[test]
    fn objective_examples() {
        let w = vec![0.25; 4];
        assert_relative_eq!(coverage(&[1.0, 2.0, 3.0, 0.1], &w, 1.0), 0.75);
        assert_eq!(coverage(&[0.0; 4], &w, 1.0), 0.0);
        assert_relative_eq!(capacity(&[3.0], &[1.0], 1.0), 2.0);
        assert_eq!(capacity(&[0.0; 4], &w, 1.0), 0.0);
        let sinrs = [1.0, 3.0, 7.0];
        let w = [0.5, 0.3, 0.2];
        assert_relative_eq!(capacity(&sinrs, &w, 2.0), 2.0 * (0.5 * 1.0 + 0.3 * 2.0 + 0.2 * 3.0));
    }

    #[test]
    fn mode_side_convention() {
        assert_eq!(mode_for_point(0.5, 1.5), Mode::Transmit);
        assert_eq!(mode_for_point(2.5, 1.5), Mode::Reflect);
    }
}
