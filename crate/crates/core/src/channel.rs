//! Rician/Rayleigh channel generation with deterministic LOS geometry.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CcoError, Result};
use crate::geometry::{self, GridMap, Point3};
use crate::rng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Link classes with their own Rician factor and path-loss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    BsRis,
    RisPoint,
    BsPoint,
}

impl LinkClass {
    fn tag(self) -> u64 {
        match self {
            LinkClass::BsRis => 1,
            LinkClass::RisPoint => 2,
            LinkClass::BsPoint => 3,
        }
    }
}

/// Per-class parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerLink<T> {
    pub bs_ris: T,
    pub ris_point: T,
    pub bs_point: T,
}

impl<T: Copy> PerLink<T> {
    pub fn get(&self, class: LinkClass) -> T {
        match class {
            LinkClass::BsRis => self.bs_ris,
            LinkClass::RisPoint => self.ris_point,
            LinkClass::BsPoint => self.bs_point,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub carrier_frequency: f64,
    pub wavelength: f64,
    /// Linear power gain at the 1 m reference distance.
    pub reference_gain: f64,
    /// Linear Rician factors; `f64::INFINITY` means LOS only.
    pub rician: PerLink<f64>,
    pub path_loss_exponent: PerLink<f64>,
}

impl ChannelParams {
    pub fn new(
        carrier_frequency: f64,
        reference_gain: f64,
        rician: PerLink<f64>,
        path_loss_exponent: PerLink<f64>,
    ) -> Result<Self> {
        if !(carrier_frequency > 0.0) {
            return Err(CcoError::Channel("carrier frequency must be > 0".into()));
        }
        if !(reference_gain > 0.0) {
            return Err(CcoError::Channel("C0 must be > 0".into()));
        }
        for class in [LinkClass::BsRis, LinkClass::RisPoint, LinkClass::BsPoint] {
            if !(rician.get(class) >= 0.0) {
                return Err(CcoError::Channel(format!("{class:?}: Rician factor must be >= 0")));
            }
            if !(path_loss_exponent.get(class) > 0.0) {
                return Err(CcoError::Channel(format!("{class:?}: exponent must be > 0")));
            }
        }
        Ok(Self {
            carrier_frequency,
            wavelength: SPEED_OF_LIGHT / carrier_frequency,
            reference_gain,
            rician,
            path_loss_exponent,
        })
    }
}

/// Free-space reference term `c / (4 pi d0 f_c)` at `d0 = 1 m`, used as a
/// linear power gain when the frequency-dependent option is selected.
pub fn free_space_reference_gain(carrier_frequency: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * PI * carrier_frequency)
}

/// Element grid of one surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub per_row: usize,
    pub per_col: usize,
    pub elem_width: f64,
    pub elem_height: f64,
}

impl ArrayLayout {
    pub fn n_elements(&self) -> usize {
        self.per_row * self.per_col
    }

    pub fn positions(&self) -> Vec<Point3> {
        (1..=self.n_elements())
            .map(|k| {
                geometry::element_position(k, self.per_row, self.per_col, self.elem_width, self.elem_height)
                    .expect("index within layout")
            })
            .collect()
    }
}

pub fn wave_vector(azimuth: f64, elevation: f64, wavelength: f64) -> [f64; 3] {
    let s = 2.0 * PI / wavelength;
    [
        s * elevation.cos() * azimuth.cos(),
        s * elevation.cos() * azimuth.sin(),
        s * elevation.sin(),
    ]
}

pub fn array_response(
    azimuth: f64,
    elevation: f64,
    positions: &[Point3],
    wavelength: f64,
) -> Vec<Complex64> {
    let b = wave_vector(azimuth, elevation, wavelength);
    positions
        .iter()
        .map(|l| Complex64::from_polar(1.0, b[0] * l[0] + b[1] * l[1] + b[2] * l[2]))
        .collect()
}

/// Azimuth/elevation of the path from `src` to `dst`.
///
/// Elevation is the descent angle `asin((src.z - dst.z) / d)`; azimuth is
/// `acos(dx / d_2d)` on the horizontal offset `dst - src`, signed by `dy`.
/// A purely vertical link has azimuth 0.
pub fn los_angles(src: Point3, dst: Point3) -> (f64, f64) {
    let dx = dst[0] - src[0];
    let dy = dst[1] - src[1];
    let dz = src[2] - dst[2];
    let d2 = dx.hypot(dy);
    let d3 = (d2 * d2 + dz * dz).sqrt();
    let elevation = if d3 > 0.0 { (dz / d3).clamp(-1.0, 1.0).asin() } else { 0.0 };
    let azimuth = if d2 > 0.0 {
        let a = (dx / d2).clamp(-1.0, 1.0).acos();
        if dy < 0.0 { -a } else { a }
    } else {
        0.0
    };
    (azimuth, elevation)
}

/// `C0 d^-gamma`; distances below the 1 m reference are clamped to 1 m.
pub fn path_loss(distance: f64, exponent: f64, reference_gain: f64) -> f64 {
    let d = if distance < 1.0 {
        log::warn!("path loss distance {distance} m below reference, clamped to 1 m");
        1.0
    } else {
        distance
    };
    reference_gain * d.powf(-exponent)
}

fn rician_weights(factor: f64) -> (f64, f64) {
    if factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((factor / (1.0 + factor)).sqrt(), (1.0 / (1.0 + factor)).sqrt())
    }
}

pub fn circular_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sqrt(L) (sqrt(a/(1+a)) h_los + sqrt(1/(1+a)) h_nlos)` with unit-variance
/// circular NLOS entries. No NLOS draws are consumed in the LOS-only limit.
pub fn rician_sample<R: Rng + ?Sized>(
    los: &[Complex64],
    factor: f64,
    gain: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let (w_los, w_nlos) = rician_weights(factor);
    let amp = gain.sqrt();
    los.iter()
        .map(|&h| {
            let nlos = if w_nlos > 0.0 { circular_normal(rng) } else { Complex64::new(0.0, 0.0) };
            (h * w_los + nlos * w_nlos) * amp
        })
        .collect()
}

/// All channel coefficients for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub n_ris: usize,
    pub n_points: usize,
    pub n_elements: usize,
    /// `[bs * n_ris + ris]`, one coefficient per element.
    pub bs_ris: Vec<Vec<Complex64>>,
    /// `[ris * n_points + point]`, one coefficient per element.
    pub ris_point: Vec<Vec<Complex64>>,
    /// `[bs * n_points + point]`.
    pub bs_point: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn bs_ris(&self, bs: usize, ris: usize) -> &[Complex64] {
        &self.bs_ris[bs * self.n_ris + ris]
    }

    pub fn ris_point(&self, ris: usize, point: usize) -> &[Complex64] {
        &self.ris_point[ris * self.n_points + point]
    }

    pub fn bs_point(&self, bs: usize, point: usize) -> Complex64 {
        self.bs_point[bs * self.n_points + point]
    }
}

/// Draws every link of `grid`. Each link uses its own random stream keyed by
/// `(seed, class, endpoints)`.
pub fn realize(
    grid: &GridMap,
    params: &ChannelParams,
    layout: &ArrayLayout,
    seed: u64,
) -> ChannelRealization {
    let positions = layout.positions();
    let n_ris = grid.n_ris();
    let n_points = grid.n_points();
    let lambda = params.wavelength;

    let draw_vec = |class: LinkClass, src: Point3, dst: Point3, ids: [u64; 2]| {
        let (az, el) = los_angles(src, dst);
        let los = array_response(az, el, &positions, lambda);
        let gain = path_loss(
            geometry::distance(src, dst),
            params.path_loss_exponent.get(class),
            params.reference_gain,
        );
        let mut r = rng::stream(seed, &[class.tag(), ids[0], ids[1]]);
        rician_sample(&los, params.rician.get(class), gain, &mut r)
    };

    let mut bs_ris = Vec::with_capacity(2 * n_ris);
    for (a, &bs) in grid.bs_positions.iter().enumerate() {
        for (s, p) in grid.ris_placements.iter().enumerate() {
            bs_ris.push(draw_vec(LinkClass::BsRis, bs, p.anchor(), [a as u64, s as u64]));
        }
    }
    let mut ris_point = Vec::with_capacity(n_ris * n_points);
    for (s, p) in grid.ris_placements.iter().enumerate() {
        for (i, &pt) in grid.sample_points.iter().enumerate() {
            ris_point.push(draw_vec(LinkClass::RisPoint, p.anchor(), pt, [s as u64, i as u64]));
        }
    }
    let mut bs_point = Vec::with_capacity(2 * n_points);
    for (a, &bs) in grid.bs_positions.iter().enumerate() {
        for (i, &pt) in grid.sample_points.iter().enumerate() {
            let d = geometry::distance(bs, pt);
            let los = [Complex64::from_polar(1.0, -2.0 * PI * d / lambda)];
            let gain = path_loss(
                d,
                params.path_loss_exponent.get(LinkClass::BsPoint),
                params.reference_gain,
            );
            let mut r = rng::stream(seed, &[LinkClass::BsPoint.tag(), a as u64, i as u64]);
            bs_point.push(rician_sample(&los, params.rician.bs_point, gain, &mut r)[0]);
        }
    }

    ChannelRealization {
        n_ris,
        n_points,
        n_elements: layout.n_elements(),
        bs_ris,
        ris_point,
        bs_point,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, RisPlacement};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wave_vector_axes() {
        let b = wave_vector(0.0, 0.0, 1.0);
        assert_relative_eq!(b[0], 2.0 * PI);
        assert!(b[1].abs() < 1e-15 && b[2].abs() < 1e-15);
        let b = wave_vector(PI / 2.0, 0.0, 1.0);
        assert!(b[0].abs() < 1e-12);
        assert_relative_eq!(b[1], 2.0 * PI);
    }

    #[test]
    fn wave_vector_matches_scalar_trig() {
        let (psi, theta, lambda) = (PI / 4.0, PI / 6.0, 0.0857);
        let b = wave_vector(psi, theta, lambda);
        let k = 2.0 * PI / lambda;
        // cos(pi/6) cos(pi/4) = sqrt(3)/2 * sqrt(2)/2
        assert_relative_eq!(b[0], k * 3f64.sqrt() / 2.0 * 2f64.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b[1], k * 3f64.sqrt() / 2.0 * 2f64.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b[2], k * 0.5, max_relative = 1e-14);
    }

    #[test]
    fn array_response_origin_and_broadside() {
        let a = array_response(0.3, 0.2, &[[0.0, 0.0, 0.0]], 0.1);
        assert_eq!(a, vec![Complex64::new(1.0, 0.0)]);
        let layout = ArrayLayout { per_row: 4, per_col: 1, elem_width: 0.025, elem_height: 0.025 };
        for h in array_response(0.0, 0.0, &layout.positions(), 0.0857) {
            assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn array_response_conjugate_symmetry_for_row_arrays() {
        let layout = ArrayLayout { per_row: 5, per_col: 1, elem_width: 0.025, elem_height: 0.025 };
        let pos = layout.positions();
        let a = array_response(0.7, 0.0, &pos, 0.0857);
        let b = array_response(-0.7, 0.0, &pos, 0.0857);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.conj() - y).norm() < 1e-12);
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn los_angle_examples() {
        let (psi, theta) = los_angles([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
        assert_relative_eq!(theta, PI / 4.0, max_relative = 1e-14);
        assert_eq!(psi, 0.0);
        let (_, theta) = los_angles([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert_eq!(theta, 0.0);
        let (psi, _) = los_angles([0.0, 0.0, 2.0], [0.0, 1.0, 0.0]);
        assert_relative_eq!(psi, PI / 2.0, max_relative = 1e-14);
        let (psi, theta) = los_angles([1.0, 1.0, 3.0], [1.0, 1.0, 0.0]);
        assert_eq!(psi, 0.0);
        assert_relative_eq!(theta, PI / 2.0);
    }

    #[test]
    fn path_loss_examples() {
        assert_relative_eq!(path_loss(1.0, 2.8, 1e-3), 1e-3);
        assert_relative_eq!(path_loss(10.0, 2.0, 1.0), 0.01, max_relative = 1e-14);
        assert_relative_eq!(
            path_loss(3.7, 2.8, 1.0),
            (-2.8 * 3.7f64.ln()).exp(),
            max_relative = 1e-13
        );
        assert_relative_eq!(path_loss(0.5, 2.0, 1e-3), 1e-3);
    }

    #[test]
    fn rician_limits() {
        let los: Vec<Complex64> = (0..8).map(|k| Complex64::from_polar(1.0, k as f64)).collect();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let h = rician_sample(&los, 1e12, 4.0, &mut r);
        for (x, l) in h.iter().zip(&los) {
            assert!((x - l * 2.0).norm() / 2.0 < 1e-5);
        }
        let h = rician_sample(&los, f64::INFINITY, 4.0, &mut r);
        for (x, l) in h.iter().zip(&los) {
            assert_eq!(*x, l * 2.0);
        }
        // alpha = 0: exactly the scaled NLOS draws
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let h = rician_sample(&los, 0.0, 4.0, &mut r1);
        for x in h {
            assert_eq!(x, circular_normal(&mut r2) * 2.0);
        }
    }

    #[test]
    fn params_validate() {
        let ok = PerLink { bs_ris: 2.0, ris_point: 2.0, bs_point: 2.0 };
        let exps = PerLink { bs_ris: 3.5, ris_point: 2.8, bs_point: 2.2 };
        let p = ChannelParams::new(3.5e9, 1e-3, ok, exps).unwrap();
        assert_relative_eq!(p.wavelength, SPEED_OF_LIGHT / 3.5e9);
        assert!(ChannelParams::new(0.0, 1e-3, ok, exps).is_err());
        assert!(ChannelParams::new(3.5e9, 0.0, ok, exps).is_err());
        let bad = PerLink { bs_ris: -1.0, ..ok };
        assert!(ChannelParams::new(3.5e9, 1e-3, bad, exps).is_err());
    }

    fn demo() -> (GridMap, ChannelParams, ArrayLayout) {
        let grid = build_grid(
            3.0,
            1.0,
            7.0,
            vec![
                RisPlacement { x: 1.5, y: 1.0, height: 1.0, width: 0.5 },
                RisPlacement { x: 1.0, y: 2.2, height: 1.0, width: 0.5 },
            ],
        )
        .unwrap();
        let alpha = PerLink { bs_ris: 2.0, ris_point: 2.0, bs_point: 2.0 };
        let exps = PerLink { bs_ris: 3.5, ris_point: 2.8, bs_point: 2.2 };
        let params = ChannelParams::new(3.5e9, 1e-3, alpha, exps).unwrap();
        let layout = ArrayLayout { per_row: 4, per_col: 4, elem_width: 0.025, elem_height: 0.025 };
        (grid, params, layout)
    }

    #[test]
    fn realization_is_deterministic_and_nested() {
        let (grid, params, layout) = demo();
        let a = realize(&grid, &params, &layout, 42);
        let b = realize(&grid, &params, &layout, 42);
        assert_eq!(a, b);
        let c = realize(&grid, &params, &layout, 43);
        assert_ne!(a, c);

        // dropping the second surface leaves the first surface's links untouched
        let mut small = grid.clone();
        small.ris_placements.truncate(1);
        let s = realize(&small, &params, &layout, 42);
        assert_eq!(s.bs_ris(0, 0), a.bs_ris(0, 0));
        assert_eq!(s.bs_ris(1, 0), a.bs_ris(1, 0));
        assert_eq!(s.ris_point(0, 5), a.ris_point(0, 5));
        assert_eq!(s.bs_point, a.bs_point);
        for h in a.bs_ris.iter().chain(&a.ris_point).flatten().chain(&a.bs_point) {
            assert!(h.re.is_finite() && h.im.is_finite());
        }
    }
}
