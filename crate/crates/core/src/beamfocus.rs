//! Beamfocusing: MRT weights, focal gain maps, wideband beam-split with
//! frequency-flat phase shifters and true-time-delay correction.
//!
//! Gains are `|Σ_n w_n·a_n|` with `a` the unit-amplitude spherical steering
//! vector, so MRT weights are the normalized conjugate of the channel.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{nearfield_steering, AmplitudeModel, ChannelVector};
use crate::codebook::sine_grid;
use crate::error::{NfError, Result};
use crate::geometry::{
    fresnel_distance, rayleigh_distance, ArrayGeometry, CarrierConfig, FieldBoundaries, SPEED_OF_LIGHT,
};

/// Fractional bandwidth used by the beam-split experiment unless overridden.
pub const DEFAULT_FRACTIONAL_BANDWIDTH: f64 = 0.1;
/// Subcarrier count used by the beam-split experiment unless overridden.
pub const DEFAULT_SUBCARRIERS: usize = 129;
pub const DEFAULT_GRID_ANGLES: usize = 257;
pub const DEFAULT_GRID_DISTANCES: usize = 129;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformerKind {
    PhaseOnly,
    TimeDelay,
}

/// Focal point in polar coordinates about the array reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalPoint {
    pub angle: f64,
    pub distance: f64,
}

impl FocalPoint {
    pub fn new(angle: f64, distance: f64) -> Self {
        Self { angle, distance }
    }
}

/// Unit-norm transmit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    weights: DVector<Complex64>,
    design_frequency: Option<f64>,
    kind: BeamformerKind,
    delays: Option<Vec<f64>>,
}

impl Beamformer {
    pub fn weights(&self) -> &DVector<Complex64> {
        &self.weights
    }

    pub fn design_frequency(&self) -> Option<f64> {
        self.design_frequency
    }

    pub fn kind(&self) -> BeamformerKind {
        self.kind
    }

    pub fn delays(&self) -> Option<&[f64]> {
        self.delays.as_deref()
    }

    /// Weights seen by a signal at `frequency_hz`. Phase shifters are
    /// frequency-flat; delay lines rotate by `2π·f·τ_n`.
    pub fn weights_at(&self, frequency_hz: f64) -> DVector<Complex64> {
        match (&self.kind, &self.delays) {
            (BeamformerKind::TimeDelay, Some(tau)) => {
                let scale = 1.0 / (tau.len() as f64).sqrt();
                DVector::from_iterator(
                    tau.len(),
                    tau.iter()
                        .map(|t| Complex64::from_polar(scale, 2.0 * PI * frequency_hz * t)),
                )
            }
            _ => self.weights.clone(),
        }
    }

    /// Uniformly quantizes the phases of a phase-only beamformer to `bits`.
    pub fn quantized(&self, bits: u32) -> Result<Self> {
        if self.kind != BeamformerKind::PhaseOnly {
            return Err(NfError::invalid("only phase-only weights can be quantized"));
        }
        if bits == 0 || bits > 24 {
            return Err(NfError::invalid(format!("bits must lie in 1..=24, got {bits}")));
        }
        let step = 2.0 * PI / f64::from(1u32 << bits);
        let weights = self
            .weights
            .map(|w| Complex64::from_polar(w.norm(), (w.arg() / step).round() * step));
        Ok(Self {
            weights,
            ..self.clone()
        })
    }
}

/// `|Σ w_n a_n|`.
pub fn array_gain(weights: &DVector<Complex64>, a: &DVector<Complex64>) -> f64 {
    weights
        .iter()
        .zip(a.iter())
        .map(|(w, x)| w * x)
        .sum::<Complex64>()
        .norm()
}

/// Maximum ratio transmission: `w = conj(h)/‖h‖`.
pub fn mrt_beamformer(h: &ChannelVector) -> Result<Beamformer> {
    let norm = h.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(NfError::invalid("cannot beamform towards a zero channel"));
    }
    Ok(Beamformer {
        weights: h.0.map(|z| z.conj() / norm),
        design_frequency: None,
        kind: BeamformerKind::PhaseOnly,
        delays: None,
    })
}

/// Phase-only MRT towards `focal`, designed at `frequency_hz`.
pub fn focusing_beamformer(focal: FocalPoint, geometry: &ArrayGeometry, frequency_hz: f64) -> Result<Beamformer> {
    let lam = SPEED_OF_LIGHT / frequency_hz;
    let a = nearfield_steering(
        geometry,
        &geometry.point_at(focal.angle, focal.distance),
        lam,
        AmplitudeModel::Unit,
    )?;
    let mut w = mrt_beamformer(&a)?;
    w.design_frequency = Some(frequency_hz);
    Ok(w)
}

/// Angle/distance evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGrid {
    pub angles: Vec<f64>,
    pub distances: Vec<f64>,
}

impl GainGrid {
    pub fn new(angles: Vec<f64>, distances: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || distances.is_empty() {
            return Err(NfError::invalid("gain grid must be non-empty"));
        }
        if distances.iter().any(|d| !(*d > 0.0)) {
            return Err(NfError::invalid("grid distances must be positive"));
        }
        Ok(Self { angles, distances })
    }

    /// Angles uniform in sine; distances logarithmic from the Fresnel
    /// distance to twice the Rayleigh distance.
    pub fn near_field(
        geometry: &ArrayGeometry,
        wavelength_m: f64,
        n_angles: usize,
        n_distances: usize,
    ) -> Result<Self> {
        if n_angles == 0 || n_distances == 0 {
            return Err(NfError::invalid("gain grid must be non-empty"));
        }
        let lo = fresnel_distance(geometry.aperture(), wavelength_m)?.max(wavelength_m);
        let hi = 2.0 * rayleigh_distance(geometry.aperture(), wavelength_m)?.max(lo);
        let distances = log_grid(lo, hi, n_distances);
        let angles = sine_grid(n_angles).into_iter().map(f64::asin).collect();
        Self::new(angles, distances)
    }
}

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count as f64 - 1.0)).exp())
        .collect()
}

/// Beam gain in dB over an angle × distance grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMap {
    pub angles: Vec<f64>,
    pub distances: Vec<f64>,
    /// Row per angle, column per distance.
    pub gain_db: Vec<Vec<f64>>,
}

impl GainMap {
    /// `(angle, distance, gain_db)` of the grid maximum.
    pub fn peak(&self) -> (f64, f64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.gain_db.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if g > best.2 {
                    best = (i, j, g);
                }
            }
        }
        (self.angles[best.0], self.distances[best.1], best.2)
    }

    pub fn at(&self, angle_index: usize, distance_index: usize) -> f64 {
        self.gain_db[angle_index][distance_index]
    }
}

fn to_db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn gain_map_with(
    weights: &DVector<Complex64>,
    geometry: &ArrayGeometry,
    wavelength_m: f64,
    grid: &GainGrid,
) -> Result<GainMap> {
    let gain_db = grid
        .angles
        .par_iter()
        .map(|&theta| {
            grid.distances
                .iter()
                .map(|&r| {
                    let a = nearfield_steering(
                        geometry,
                        &geometry.point_at(theta, r),
                        wavelength_m,
                        AmplitudeModel::Unit,
                    )?;
                    Ok(to_db(array_gain(weights, &a.0)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainMap {
        angles: grid.angles.clone(),
        distances: grid.distances.clone(),
        gain_db,
    })
}

/// `20·log10|wᵀ·a(θ, r)|` over the grid, evaluated at the wavelength given.
pub fn focus_gain_map(w: &Beamformer, geometry: &ArrayGeometry, wavelength_m: f64, grid: &GainGrid) -> Result<GainMap> {
    if w.weights.len() != geometry.len() {
        return Err(NfError::invalid("beamformer length does not match the array"));
    }
    gain_map_with(
        &w.weights_at(SPEED_OF_LIGHT / wavelength_m),
        geometry,
        wavelength_m,
        grid,
    )
}

/// Wideband response at one subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierGain {
    pub frequency_hz: f64,
    /// Gain at the intended focal point (dB).
    pub focal_gain_db: f64,
    /// Grid maximum `(angle, distance, gain_db)`, when a grid was supplied.
    pub peak: Option<(f64, f64, f64)>,
}

/// Per-subcarrier focal gain (and optional grid peak) of `w`.
pub fn wideband_response(
    w: &Beamformer,
    focal: FocalPoint,
    geometry: &ArrayGeometry,
    carrier: &CarrierConfig,
    grid: Option<&GainGrid>,
) -> Result<Vec<SubcarrierGain>> {
    let subs = carrier
        .subcarriers()
        .ok_or_else(|| NfError::invalid("wideband analysis needs subcarriers"))?;
    let focal_point = geometry.point_at(focal.angle, focal.distance);
    subs.iter()
        .map(|&f| {
            let lam = SPEED_OF_LIGHT / f;
            let weights = w.weights_at(f);
            let a = nearfield_steering(geometry, &focal_point, lam, AmplitudeModel::Unit)?;
            let peak = match grid {
                Some(g) => Some(gain_map_with(&weights, geometry, lam, g)?.peak()),
                None => None,
            };
            Ok(SubcarrierGain {
                frequency_hz: f,
                focal_gain_db: to_db(array_gain(&weights, &a.0)),
                peak,
            })
        })
        .collect()
}

/// Beam-split of phase-only weights designed at the carrier and applied
/// unchanged on every subcarrier.
pub fn beamsplit_gain(
    focal: FocalPoint,
    geometry: &ArrayGeometry,
    carrier: &CarrierConfig,
    grid: Option<&GainGrid>,
) -> Result<Vec<SubcarrierGain>> {
    if carrier.subcarriers().is_none() {
        return Err(NfError::invalid("beam-split analysis needs subcarriers"));
    }
    let w = focusing_beamformer(focal, geometry, carrier.carrier_frequency())?;
    wideband_response(&w, focal, geometry, carrier, grid)
}

/// True-time-delay beamformer with `τ_n = (r_n − r_ref)/c`.
pub fn ttd_beamformer(focal: FocalPoint, geometry: &ArrayGeometry, carrier: &CarrierConfig) -> Result<Beamformer> {
    if carrier.subcarriers().is_none() {
        return Err(NfError::invalid("time-delay design needs subcarriers"));
    }
    let src = geometry.point_at(focal.angle, focal.distance);
    geometry.check_not_on_element(&src)?;
    let r_ref = (src - geometry.reference_point()).norm();
    let delays: Vec<f64> = geometry
        .positions()
        .iter()
        .map(|p| ((src - p).norm() - r_ref) / SPEED_OF_LIGHT)
        .collect();
    let mut bf = Beamformer {
        weights: DVector::zeros(delays.len()),
        design_frequency: Some(carrier.carrier_frequency()),
        kind: BeamformerKind::TimeDelay,
        delays: Some(delays),
    };
    bf.weights = bf.weights_at(carrier.carrier_frequency());
    Ok(bf)
}

/// Distance-domain correlation `|a(θ, r1)ᴴ a(θ, r2)| / N`.
pub fn focusing_correlation(angle: f64, r1: f64, r2: f64, geometry: &ArrayGeometry, wavelength_m: f64) -> Result<f64> {
    let limit = FieldBoundaries::new(geometry.aperture(), wavelength_m)?.reactive_limit_m;
    if !(r1 > limit && r2 > limit) {
        return Err(NfError::invalid(format!(
            "distances must exceed the reactive limit {limit} m"
        )));
    }
    let a1 = nearfield_steering(
        geometry,
        &geometry.point_at(angle, r1),
        wavelength_m,
        AmplitudeModel::Unit,
    )?;
    let a2 = nearfield_steering(
        geometry,
        &geometry.point_at(angle, r2),
        wavelength_m,
        AmplitudeModel::Unit,
    )?;
    Ok((a1.0.dotc(&a2.0).norm() / geometry.len() as f64).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ula(n: usize, f: f64) -> ArrayGeometry {
        ArrayGeometry::ula(n, SPEED_OF_LIGHT / f / 2.0).unwrap()
    }

    #[test]
    fn mrt_on_indicator() {
        let mut h = ChannelVector::zeros(4);
        h.0[0] = Complex64::new(1.0, 0.0);
        let w = mrt_beamformer(&h).unwrap();
        assert_eq!(w.weights()[0], Complex64::new(1.0, 0.0));
        assert!((array_gain(w.weights(), &h.0) - 1.0).abs() < 1e-15);
        assert!(mrt_beamformer(&ChannelVector::zeros(3)).is_err());
    }

    #[test]
    fn mrt_gain_is_root_n_for_unit_channels() {
        let g = ula(128, 300e9);
        let lam = SPEED_OF_LIGHT / 300e9;
        let h = nearfield_steering(&g, &g.point_at(0.2, 1.0), lam, AmplitudeModel::Unit).unwrap();
        let w = mrt_beamformer(&h).unwrap();
        assert!((w.weights().norm() - 1.0).abs() < 1e-12);
        assert!((array_gain(w.weights(), &h.0) - 128f64.sqrt()).abs() < 1e-10);
        assert!(w
            .weights()
            .iter()
            .all(|z| (z.norm() - w.weights()[0].norm()).abs() < 1e-14));
    }

    #[test]
    fn mrt_beats_random_weights() {
        let g = ula(32, 28e9);
        let lam = SPEED_OF_LIGHT / 28e9;
        let h = nearfield_steering(&g, &g.point_at(-0.3, 0.7), lam, AmplitudeModel::FreeSpace).unwrap();
        let best = array_gain(mrt_beamformer(&h).unwrap().weights(), &h.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v = DVector::from_fn(32, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let v = &v / Complex64::new(v.norm(), 0.0);
            assert!(array_gain(&v, &h.0) <= best);
        }
    }

    #[test]
    fn gain_map_peaks_at_focus_and_selects_distance() {
        let f = 300e9;
        let lam = SPEED_OF_LIGHT / f;
        let g = ula(512, f);
        let w = focusing_beamformer(FocalPoint::new(0.0, 5.0), &g, f).unwrap();
        let grid = GainGrid::new(
            vec![-0.02, -0.01, 0.0, 0.01, 0.02],
            vec![2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 500.0],
        )
        .unwrap();
        let map = focus_gain_map(&w, &g, lam, &grid).unwrap();
        let (a, r, peak) = map.peak();
        assert_eq!((a, r), (0.0, 5.0));
        assert!((peak - 20.0 * 512f64.sqrt().log10()).abs() < 1e-9);
        assert!(map.at(2, 6) <= peak - 3.0, "{}", map.at(2, 6));
    }

    #[test]
    fn farfield_beam_is_flat_in_distance() {
        let f = 300e9;
        let lam = SPEED_OF_LIGHT / f;
        let g = ula(256, f);
        let d_r = rayleigh_distance(g.aperture(), lam).unwrap();
        // conjugate planar steering at boresight
        let w = mrt_beamformer(&ChannelVector::from_vec(vec![Complex64::new(1.0, 0.0); 256])).unwrap();
        let grid = GainGrid::new(vec![0.0], log_grid(d_r, 100.0 * d_r, 20)).unwrap();
        let map = focus_gain_map(&w, &g, lam, &grid).unwrap();
        let row = &map.gain_db[0];
        let spread =
            row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - row.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.5, "{spread}");
    }

    #[test]
    fn beamsplit_design_subcarrier_matches_mrt() {
        let f = 28e9;
        let g = ula(64, f);
        let carrier = CarrierConfig::wideband(f, 0.1, 5).unwrap();
        let focal = FocalPoint::new(0.3, 2.0);
        let res = beamsplit_gain(focal, &g, &carrier, None).unwrap();
        let mid = &res[2];
        assert!((mid.frequency_hz - f).abs() < 1e-3);
        assert!((mid.focal_gain_db - 20.0 * 8f64.log10()).abs() < 1e-9);
        assert!(beamsplit_gain(focal, &g, &CarrierConfig::narrowband(f).unwrap(), None).is_err());
    }

    #[test]
    fn ttd_matches_mrt_on_single_carrier() {
        let f = 28e9;
        let g = ula(64, f);
        let focal = FocalPoint::new(-0.2, 3.0);
        let single = CarrierConfig::wideband(f, 0.0, 1).unwrap();
        let ttd = ttd_beamformer(focal, &g, &single).unwrap();
        let mrt = focusing_beamformer(focal, &g, f).unwrap();
        assert!((ttd.weights() - mrt.weights()).norm() < 1e-9);
        let a = beamsplit_gain(focal, &g, &single, None).unwrap();
        let b = wideband_response(&ttd, focal, &g, &single, None).unwrap();
        assert!((a[0].focal_gain_db - b[0].focal_gain_db).abs() < 1e-9);
        assert_eq!(ttd.delays().unwrap().len(), 64);
        assert!(ttd_beamformer(focal, &g, &CarrierConfig::narrowband(f).unwrap()).is_err());
    }

    #[test]
    fn ttd_holds_gain_across_band() {
        let f = 28e9;
        let g = ula(128, f);
        let carrier = CarrierConfig::wideband(f, 0.2, 9).unwrap();
        let focal = FocalPoint::new(0.5, 4.0);
        let ttd = ttd_beamformer(focal, &g, &carrier).unwrap();
        for s in wideband_response(&ttd, focal, &g, &carrier, None).unwrap() {
            assert!(10f64.powf(s.focal_gain_db / 20.0) >= 0.99 * 128f64.sqrt());
        }
    }

    #[test]
    fn quantization_keeps_norm() {
        let g = ula(16, 28e9);
        let w = focusing_beamformer(FocalPoint::new(0.1, 1.0), &g, 28e9).unwrap();
        let q = w.quantized(2).unwrap();
        assert!((q.weights().norm() - 1.0).abs() < 1e-12);
        for z in q.weights().iter() {
            let k = z.arg() / (PI / 2.0);
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert!(w.quantized(0).is_err());
    }

    #[test]
    fn correlation_limits() {
        let f = 300e9;
        let lam = SPEED_OF_LIGHT / f;
        let g = ula(256, f);
        assert!((focusing_correlation(0.0, 5.0, 5.0, &g, lam).unwrap() - 1.0).abs() < 1e-12);
        let d_r = rayleigh_distance(g.aperture(), lam).unwrap();
        assert!(focusing_correlation(0.0, 100.0 * d_r, 300.0 * d_r, &g, lam).unwrap() > 0.999);
        assert!(focusing_correlation(0.0, lam / 2.0, 5.0, &g, lam).is_err());
    }

    #[test]
    fn correlation_decreases_with_array_size() {
        let f = 300e9;
        let lam = SPEED_OF_LIGHT / f;
        let c: Vec<f64> = [1024, 256, 64]
            .iter()
            .map(|&n| focusing_correlation(0.0, 5.0, 10.0, &ula(n, f), lam).unwrap())
            .collect();
        assert!(c[0] < c[1] && c[1] < c[2], "{c:?}");
    }

    #[test]
    fn correlation_symmetric_and_continuous() {
        let f = 300e9;
        let lam = SPEED_OF_LIGHT / f;
        let g = ula(256, f);
        let a = focusing_correlation(0.2, 3.0, 7.0, &g, lam).unwrap();
        let b = focusing_correlation(0.2, 7.0, 3.0, &g, lam).unwrap();
        assert!((a - b).abs() < 1e-14);
        let c = focusing_correlation(0.2, 3.0, 7.0 + 1e-9, &g, lam).unwrap();
        assert!((a - c).abs() < 1e-6);
    }

    #[test]
    fn gain_map_rejects_length_mismatch() {
        let g = ula(16, 28e9);
        let w = mrt_beamformer(&ChannelVector::from_vec(vec![Complex64::new(1.0, 0.0); 8])).unwrap();
        let grid = GainGrid::new(vec![0.0], vec![1.0]).unwrap();
        assert!(focus_gain_map(&w, &g, 0.01, &grid).is_err());
        assert!(GainGrid::new(vec![], vec![1.0]).is_err());
    }
}
