//! Spherical- and planar-wavefront channel synthesis.
//!
//! Steering phases are referenced to the array reference point, so the
//! element nearest the reference carries (almost) zero phase and the
//! spherical model converges to the planar one as the source recedes.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{NfError, Result};
use crate::geometry::ArrayGeometry;
use crate::Point3;

/// Per-element amplitude handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeModel {
    /// Every element has modulus one.
    #[default]
    Unit,
    /// Element `n` is scaled by `λ / (4π r_n)`.
    FreeSpace,
}

impl AmplitudeModel {
    #[inline]
    fn gain(self, distance_m: f64, wavelength_m: f64) -> f64 {
        match self {
            AmplitudeModel::Unit => 1.0,
            AmplitudeModel::FreeSpace => wavelength_m / (4.0 * PI * distance_m),
        }
    }
}

/// Complex baseband gain per array element.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub DVector<Complex64>);

impl ChannelVector {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn from_vec(v: Vec<Complex64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<Complex64> {
        self.0
    }
}

/// Complex gains between two arrays, `N_rx × N_tx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(pub DMatrix<Complex64>);

impl ChannelMatrix {
    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }
}

/// A point scatterer seen by a contiguous range of elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub position: Point3,
    pub complex_gain: Complex64,
    pub visibility: Range<usize>,
}

impl Scatterer {
    pub fn new(position: Point3, complex_gain: Complex64, visibility: Range<usize>) -> Self {
        Self {
            position,
            complex_gain,
            visibility,
        }
    }

    /// Scatterer visible to every element of an `n`-element array.
    pub fn visible_to_all(position: Point3, complex_gain: Complex64, n: usize) -> Self {
        Self::new(position, complex_gain, 0..n)
    }
}

fn check_wavelength(wavelength_m: f64) -> Result<()> {
    if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
        return Err(NfError::invalid(format!(
            "wavelength must be positive, got {wavelength_m}"
        )));
    }
    Ok(())
}

/// Spherical-wavefront steering vector:
/// `h_n = g_n · exp(−j·2π/λ·(r_n − r_ref))`.
pub fn nearfield_steering(
    geometry: &ArrayGeometry,
    source: &Point3,
    wavelength_m: f64,
    amplitude: AmplitudeModel,
) -> Result<ChannelVector> {
    check_wavelength(wavelength_m)?;
    geometry.check_not_on_element(source)?;
    let k = 2.0 * PI / wavelength_m;
    let r_ref = (source - geometry.reference_point()).norm();
    let gains = geometry.positions().iter().map(|p| {
        let rn = (source - p).norm();
        Complex64::from_polar(amplitude.gain(rn, wavelength_m), -k * (rn - r_ref))
    });
    Ok(ChannelVector(DVector::from_iterator(geometry.len(), gains)))
}

/// Planar-wavefront steering vector for a plane wave travelling along
/// `direction`: `h_n = exp(−j·2π/λ·⟨p_n − p_ref, direction⟩)`.
///
/// A source located along unit vector `u` from the array produces a wave
/// travelling along `−u`; see [`farfield_steering_towards`].
pub fn farfield_steering(geometry: &ArrayGeometry, direction: &Point3, wavelength_m: f64) -> Result<ChannelVector> {
    check_wavelength(wavelength_m)?;
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(NfError::invalid("propagation direction must be non-zero"));
    }
    if (norm - 1.0).abs() > 1e-9 {
        return Err(NfError::invalid(format!(
            "propagation direction must be unit norm, got norm {norm}"
        )));
    }
    let k = 2.0 * PI / wavelength_m;
    let gains = geometry.positions().iter().map(|p| {
        let proj = (p - geometry.reference_point()).dot(direction);
        Complex64::from_polar(1.0, -k * proj)
    });
    Ok(ChannelVector(DVector::from_iterator(geometry.len(), gains)))
}

/// Far-field response to a source at angle `theta` from boresight.
pub fn farfield_steering_towards(geometry: &ArrayGeometry, theta: f64, wavelength_m: f64) -> Result<ChannelVector> {
    farfield_steering(geometry, &(-geometry.direction(theta)), wavelength_m)
}

/// LoS MIMO channel with entry `(m, n) = g_mn · exp(−j·2π/λ·d_mn)`.
pub fn los_mimo_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    wavelength_m: f64,
    amplitude: AmplitudeModel,
) -> Result<ChannelMatrix> {
    check_wavelength(wavelength_m)?;
    let k = 2.0 * PI / wavelength_m;
    let tol = 1e-12 * (tx.aperture() + rx.aperture()).max(1.0);
    let mut h = DMatrix::zeros(rx.len(), tx.len());
    for (n, pt) in tx.positions().iter().enumerate() {
        for (m, pr) in rx.positions().iter().enumerate() {
            let d = (pr - pt).norm();
            if d <= tol {
                return Err(NfError::invalid("transmit and receive arrays overlap"));
            }
            h[(m, n)] = Complex64::from_polar(amplitude.gain(d, wavelength_m), -k * d);
        }
    }
    Ok(ChannelMatrix(h))
}

/// Sum of scatterer paths (each restricted to its visibility range) and an
/// optional unit-gain LoS path seen by all elements.
pub fn multipath_channel(
    geometry: &ArrayGeometry,
    scatterers: &[Scatterer],
    wavelength_m: f64,
    amplitude: AmplitudeModel,
    los: Option<&Point3>,
) -> Result<ChannelVector> {
    if scatterers.is_empty() && los.is_none() {
        return Err(NfError::invalid("channel needs at least one path"));
    }
    let n = geometry.len();
    let mut h = DVector::<Complex64>::zeros(n);
    if let Some(src) = los {
        h += nearfield_steering(geometry, src, wavelength_m, amplitude)?.0;
    }
    for (i, s) in scatterers.iter().enumerate() {
        if s.visibility.is_empty() || s.visibility.end > n {
            return Err(NfError::invalid(format!(
                "scatterer {i}: visibility {:?} must be non-empty and within 0..{n}",
                s.visibility
            )));
        }
        let a = nearfield_steering(geometry, &s.position, wavelength_m, amplitude)?;
        for e in s.visibility.clone() {
            h[e] += s.complex_gain * a.0[e];
        }
    }
    Ok(ChannelVector(h))
}

/// Floor used for zero-magnitude entries in dB profiles.
pub const POWER_FLOOR_DB: f64 = -300.0;

/// Per-element received power `20·log10|h_n|` in dB.
pub fn power_profile(h: &ChannelVector) -> Vec<f64> {
    h.0.iter()
        .map(|z| {
            let db = 20.0 * z.norm().log10();
            if db.is_finite() {
                db.max(POWER_FLOOR_DB)
            } else {
                POWER_FLOOR_DB
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rayleigh_distance, SPEED_OF_LIGHT};
    use proptest::prelude::*;

    fn lam(f: f64) -> f64 {
        SPEED_OF_LIGHT / f
    }

    fn max_phase_gap(a: &ChannelVector, b: &ChannelVector) -> f64 {
        a.0.iter()
            .zip(b.0.iter())
            .map(|(x, y)| (x * y.conj()).arg().abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn unit_model_has_unit_modulus() {
        let l = lam(28e9);
        let g = ArrayGeometry::ula(33, l / 2.0).unwrap();
        let h = nearfield_steering(&g, &g.point_at(0.4, 2.0), l, AmplitudeModel::Unit).unwrap();
        assert!(h.0.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        // central element carries zero phase for a symmetric array
        assert!(h.0[g.central_element()].arg().abs() < 1e-6);
    }

    #[test]
    fn two_element_broadside_symmetry() {
        let l = lam(28e9);
        let g = ArrayGeometry::ula(2, l / 2.0).unwrap();
        let h = nearfield_steering(&g, &g.point_at(0.0, 0.3), l, AmplitudeModel::FreeSpace).unwrap();
        assert!((h.0[0] - h.0[1]).norm() < 1e-15);
    }

    #[test]
    fn coincident_source_rejected() {
        let g = ArrayGeometry::ula(4, 0.01).unwrap();
        let p = g.positions()[2];
        assert!(nearfield_steering(&g, &p, 0.02, AmplitudeModel::Unit).is_err());
    }

    #[test]
    fn nearfield_approaches_farfield() {
        let l = lam(28e9);
        let g = ArrayGeometry::ula(256, l / 2.0).unwrap();
        let d_r = rayleigh_distance(g.aperture(), l).unwrap();
        let ff = farfield_steering_towards(&g, 0.0, l).unwrap();
        let nf = nearfield_steering(&g, &g.point_at(0.0, 1e6 * d_r), l, AmplitudeModel::Unit).unwrap();
        assert!(max_phase_gap(&nf, &ff) < 1e-3);

        let theta = 0.7;
        let ff = farfield_steering_towards(&g, theta, l).unwrap();
        let g2 = max_phase_gap(
            &nearfield_steering(&g, &g.point_at(theta, 1e2 * d_r), l, AmplitudeModel::Unit).unwrap(),
            &ff,
        );
        let g4 = max_phase_gap(
            &nearfield_steering(&g, &g.point_at(theta, 1e4 * d_r), l, AmplitudeModel::Unit).unwrap(),
            &ff,
        );
        assert!(g4 < g2, "{g4} !< {g2}");
    }

    #[test]
    fn farfield_boresight_is_all_ones() {
        let g = ArrayGeometry::ula(8, 0.005).unwrap();
        let h = farfield_steering(&g, &-Point3::z(), 0.01).unwrap();
        assert!(h.0.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(farfield_steering(&g, &Point3::zeros(), 0.01).is_err());
    }

    #[test]
    fn farfield_textbook_phase_progression() {
        let l = 0.01;
        let g = ArrayGeometry::ula(8, l / 2.0).unwrap();
        let theta: f64 = 0.3;
        // wave travelling with sin(theta) component along the array axis
        let dir = Point3::new(theta.sin(), 0.0, -theta.cos());
        let h = farfield_steering(&g, &dir, l).unwrap();
        // entry n = exp(-j·π·n·sinθ) up to a common phase
        let shift = h.0[0];
        for n in 0..8 {
            let expect = Complex64::from_polar(1.0, -PI * n as f64 * theta.sin()) * shift;
            assert!((h.0[n] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn nearfield_energy_spreads_in_angle() {
        // 1024-element ULA at 300 GHz, source 3 m away on boresight
        let l = lam(300e9);
        let g = ArrayGeometry::ula(1024, l / 2.0).unwrap();
        let h = nearfield_steering(&g, &g.point_at(0.0, 3.0), l, AmplitudeModel::Unit).unwrap();
        let ff = farfield_steering_towards(&g, 0.0, l).unwrap();
        let ratio = h.0.dotc(&ff.0).norm() / 1024.0;
        assert!(ratio < 0.7, "{ratio}");
    }

    #[test]
    fn single_element_link_matches_amplitude_model() {
        let l = 0.01;
        let a = ArrayGeometry::ula(1, 0.01).unwrap();
        let b = a.centered_at(Point3::new(0.0, 0.0, 2.5));
        let h = los_mimo_channel(&a, &b, l, AmplitudeModel::FreeSpace).unwrap();
        assert_eq!((h.nrows(), h.ncols()), (1, 1));
        assert!((h.0[(0, 0)].norm() - l / (4.0 * PI * 2.5)).abs() < 1e-15);
        let h = los_mimo_channel(&a, &b, l, AmplitudeModel::Unit).unwrap();
        assert!((h.0[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(los_mimo_channel(&a, &a, l, AmplitudeModel::Unit).is_err());
    }

    #[test]
    fn single_scatterer_equals_steering() {
        let l = lam(28e9);
        let g = ArrayGeometry::ula(64, l / 2.0).unwrap();
        let p = g.point_at(-0.2, 4.0);
        let s = Scatterer::visible_to_all(p, Complex64::new(1.0, 0.0), 64);
        let h = multipath_channel(&g, &[s], l, AmplitudeModel::FreeSpace, None).unwrap();
        let a = nearfield_steering(&g, &p, l, AmplitudeModel::FreeSpace).unwrap();
        assert!((h.0 - a.0).norm() < 1e-18);
        assert!(multipath_channel(&g, &[], l, AmplitudeModel::Unit, None).is_err());
    }

    #[test]
    fn invisible_elements_get_nothing() {
        let l = lam(28e9);
        let g = ArrayGeometry::ula(16, l / 2.0).unwrap();
        let s = Scatterer::new(g.point_at(0.1, 1.0), Complex64::new(0.5, 0.5), 4..9);
        let h = multipath_channel(&g, &[s], l, AmplitudeModel::Unit, None).unwrap();
        for e in (0..4).chain(9..16) {
            assert_eq!(h.0[e], Complex64::new(0.0, 0.0));
        }
        let bad = Scatterer::new(g.point_at(0.1, 1.0), Complex64::new(1.0, 0.0), 10..17);
        assert!(multipath_channel(&g, &[bad], l, AmplitudeModel::Unit, None).is_err());
        let empty = Scatterer::new(g.point_at(0.1, 1.0), Complex64::new(1.0, 0.0), 3..3);
        assert!(multipath_channel(&g, &[empty], l, AmplitudeModel::Unit, None).is_err());
    }

    #[test]
    fn two_clusters_give_non_stationary_profile() {
        // 2.74 m ULA at 28 GHz; a near cluster seen by the lower half, a far
        // cluster by the upper half
        let l = lam(28e9);
        let n = 513;
        let g = ArrayGeometry::ula(n, 2.74 / (n as f64 - 1.0)).unwrap();
        let near = Scatterer::new(g.point_at(-0.3, 3.0), Complex64::new(1.0, 0.0), 0..n / 2);
        let far = Scatterer::new(g.point_at(0.4, 60.0), Complex64::new(1.0, 0.0), n / 2..n);
        let h = multipath_channel(&g, &[near.clone(), far.clone()], l, AmplitudeModel::FreeSpace, None).unwrap();
        let prof = power_profile(&h);
        // direct-summation oracle for the mean powers of each half
        let mean_db = |r: Range<usize>, s: &Scatterer| {
            let len = r.len() as f64;
            let p: f64 = r
                .map(|e| {
                    let d = (s.position - g.positions()[e]).norm();
                    (l / (4.0 * PI * d)).powi(2)
                })
                .sum::<f64>()
                / len;
            10.0 * p.log10()
        };
        let lo = mean_db(0..n / 2, &near);
        let hi = mean_db(n / 2..n, &far);
        assert!((lo - hi).abs() > 3.0);
        let lo_p = 10.0 * (prof[..n / 2].iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() / (n / 2) as f64).log10();
        assert!((lo_p - lo).abs() < 1e-9);
    }

    #[test]
    fn power_profile_values() {
        let ones = ChannelVector::from_vec(vec![Complex64::new(1.0, 0.0); 5]);
        assert!(power_profile(&ones).iter().all(|d| d.abs() < 1e-15));
        let z = ChannelVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.1)]);
        let p = power_profile(&z);
        assert_eq!(p[0], POWER_FLOOR_DB);
        assert!((p[1] + 20.0).abs() < 1e-12);
    }

    #[test]
    fn free_space_profile_peaks_at_nearest_element() {
        let l = lam(300e9);
        let g = ArrayGeometry::ula(101, l / 2.0).unwrap();
        let h = nearfield_steering(&g, &g.point_at(0.0, 0.05), l, AmplitudeModel::FreeSpace).unwrap();
        let p = power_profile(&h);
        let argmax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, g.central_element());
    }

    #[test]
    fn reciprocity() {
        let l = lam(300e9);
        let tx = ArrayGeometry::ula(40, l / 2.0).unwrap();
        let rx = ArrayGeometry::ula(7, l / 2.0)
            .unwrap()
            .centered_at(Point3::new(0.1, 0.0, 0.8));
        let a = los_mimo_channel(&tx, &rx, l, AmplitudeModel::FreeSpace).unwrap();
        let b = los_mimo_channel(&rx, &tx, l, AmplitudeModel::FreeSpace).unwrap();
        let bt = b.0.transpose();
        for (x, y) in a.0.iter().zip(bt.iter()) {
            assert!((x - y).norm() <= 1e-12 * x.norm());
        }
    }

    proptest! {
        #[test]
        fn translation_invariance(dx in -5.0f64..5.0, dy in -5.0f64..5.0, dz in -5.0f64..5.0) {
            let l = lam(28e9);
            let g = ArrayGeometry::ula(16, l / 2.0).unwrap();
            let src = g.point_at(0.3, 1.5);
            let shift = Point3::new(dx, dy, dz);
            let moved = g.centered_at(g.reference_point() + shift);
            let a = nearfield_steering(&g, &src, l, AmplitudeModel::FreeSpace).unwrap();
            let b = nearfield_steering(&moved, &(src + shift), l, AmplitudeModel::FreeSpace).unwrap();
            for (x, y) in a.0.iter().zip(b.0.iter()) {
                prop_assert!((x - y).norm() <= 1e-9 * x.norm());
            }
            let rx = ArrayGeometry::ula(4, l / 2.0).unwrap().centered_at(Point3::new(0.0, 0.0, 1.0));
            let h1 = los_mimo_channel(&g, &rx, l, AmplitudeModel::Unit).unwrap();
            let h2 = los_mimo_channel(&moved, &rx.centered_at(rx.reference_point() + shift), l, AmplitudeModel::Unit).unwrap();
            for (x, y) in h1.0.iter().zip(h2.0.iter()) {
                prop_assert!((x - y).norm() < 1e-6);
            }
        }

        #[test]
        fn multipath_is_linear_in_gains(re1 in -2.0f64..2.0, im1 in -2.0f64..2.0, c in -3.0f64..3.0) {
            let l = lam(28e9);
            let g = ArrayGeometry::ula(12, l / 2.0).unwrap();
            let p1 = g.point_at(0.2, 1.0);
            let p2 = g.point_at(-0.5, 2.0);
            let a = Complex64::new(re1, im1);
            let b = Complex64::new(0.3, -0.7);
            let h = |ga: Complex64, gb: Complex64| {
                multipath_channel(&g, &[Scatterer::new(p1, ga, 0..8), Scatterer::new(p2, gb, 3..12)], l, AmplitudeModel::Unit, None).unwrap().0
            };
            let lhs = h(a * c, b * c);
            let rhs = h(a, b) * Complex64::new(c, 0.0);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
