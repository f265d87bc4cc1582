//! Array layouts, carrier bookkeeping and near/far-field boundaries.
//!
//! Boundaries are available both as closed forms ([`rayleigh_distance`],
//! [`fresnel_distance`]) and from first principles via the exact phase error
//! of the linear and parabolic wavefront approximations
//! ([`max_phase_error`], [`worst_case_phase_error`]).

use std::f64::consts::PI;

use nalgebra::Rotation3;

use crate::error::{NfError, Result};
use crate::Point3;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Phase error that defines the classic field boundaries (radians).
pub const BOUNDARY_PHASE_ERROR: f64 = PI / 8.0;

/// Layout family of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// Element layout of a uniform linear or planar array.
///
/// Arrays are built centered at the origin with their first axis along `x`
/// and boresight along `z`, then moved with [`ArrayGeometry::placed`]. The
/// reference point is always the element centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Point3>,
    kind: ArrayKind,
    spacing: f64,
    axis: Point3,
    normal: Point3,
    reference: Point3,
    aperture: f64,
}

impl ArrayGeometry {
    /// Uniform linear array of `n` elements along `x`, boresight `+z`.
    pub fn ula(n: usize, spacing_m: f64) -> Result<Self> {
        if n == 0 {
            return Err(NfError::invalid("array needs at least one element"));
        }
        check_spacing(spacing_m)?;
        let half = (n as f64 - 1.0) / 2.0;
        let positions = (0..n)
            .map(|i| Point3::new((i as f64 - half) * spacing_m, 0.0, 0.0))
            .collect();
        Ok(Self {
            positions,
            kind: ArrayKind::Ula,
            spacing: spacing_m,
            axis: Point3::x(),
            normal: Point3::z(),
            reference: Point3::zeros(),
            aperture: (n as f64 - 1.0) * spacing_m,
        })
    }

    /// Uniform planar array of `nx × ny` elements in the `xy` plane.
    pub fn upa(nx: usize, ny: usize, spacing_m: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(NfError::invalid("array needs at least one element"));
        }
        check_spacing(spacing_m)?;
        let hx = (nx as f64 - 1.0) / 2.0;
        let hy = (ny as f64 - 1.0) / 2.0;
        let mut positions = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                positions.push(Point3::new(
                    (ix as f64 - hx) * spacing_m,
                    (iy as f64 - hy) * spacing_m,
                    0.0,
                ));
            }
        }
        let wx = (nx as f64 - 1.0) * spacing_m;
        let wy = (ny as f64 - 1.0) * spacing_m;
        Ok(Self {
            positions,
            kind: ArrayKind::Upa,
            spacing: spacing_m,
            axis: Point3::x(),
            normal: Point3::z(),
            reference: Point3::zeros(),
            aperture: wx.hypot(wy),
        })
    }

    /// Rigidly rotates the array about its reference point, then translates it.
    pub fn placed(&self, rotation: &Rotation3<f64>, translation: Point3) -> Self {
        let r = self.reference;
        Self {
            positions: self
                .positions
                .iter()
                .map(|p| rotation * (p - r) + r + translation)
                .collect(),
            kind: self.kind,
            spacing: self.spacing,
            axis: rotation * self.axis,
            normal: rotation * self.normal,
            reference: r + translation,
            aperture: self.aperture,
        }
    }

    /// Translates the array so that its reference point lands on `center`.
    pub fn centered_at(&self, center: Point3) -> Self {
        self.placed(&Rotation3::identity(), center - self.reference)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Direction of the first array axis (the line of a ULA).
    pub fn axis(&self) -> Point3 {
        self.axis
    }

    /// Boresight direction.
    pub fn normal(&self) -> Point3 {
        self.normal
    }

    pub fn reference_point(&self) -> Point3 {
        self.reference
    }

    /// Maximum distance between two elements (line length or panel diagonal).
    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    /// Unit vector from the reference point towards angle `theta` measured
    /// from boresight in the plane spanned by the normal and the array axis.
    pub fn direction(&self, theta: f64) -> Point3 {
        self.axis * theta.sin() + self.normal * theta.cos()
    }

    /// Point at angle `theta` and range `distance_m` from the reference point.
    pub fn point_at(&self, theta: f64, distance_m: f64) -> Point3 {
        self.reference + self.direction(theta) * distance_m
    }

    /// Index of the element closest to the reference point.
    pub fn central_element(&self) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.positions.iter().enumerate() {
            let d = (p - self.reference).norm();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Fails if `point` coincides with an element.
    pub(crate) fn check_not_on_element(&self, point: &Point3) -> Result<()> {
        let tol = 1e-12 * self.aperture.max(1.0);
        if self.positions.iter().any(|p| (p - point).norm() <= tol) {
            return Err(NfError::invalid("source coincides with an array element"));
        }
        Ok(())
    }
}

fn check_spacing(spacing_m: f64) -> Result<()> {
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(NfError::invalid(format!(
            "element spacing must be positive, got {spacing_m}"
        )));
    }
    Ok(())
}

/// Carrier frequency with an optional subcarrier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierConfig {
    carrier_frequency: f64,
    wavelength: f64,
    subcarriers: Option<Vec<f64>>,
}

impl CarrierConfig {
    pub fn narrowband(carrier_frequency_hz: f64) -> Result<Self> {
        if !(carrier_frequency_hz.is_finite() && carrier_frequency_hz > 0.0) {
            return Err(NfError::invalid(format!(
                "carrier frequency must be positive, got {carrier_frequency_hz}"
            )));
        }
        Ok(Self {
            carrier_frequency: carrier_frequency_hz,
            wavelength: SPEED_OF_LIGHT / carrier_frequency_hz,
            subcarriers: None,
        })
    }

    /// Carrier with an explicit subcarrier list; the list must be strictly
    /// increasing and bracket the carrier.
    pub fn with_subcarriers(carrier_frequency_hz: f64, subcarriers: Vec<f64>) -> Result<Self> {
        let mut cfg = Self::narrowband(carrier_frequency_hz)?;
        if subcarriers.is_empty() {
            return Err(NfError::invalid("subcarrier list is empty"));
        }
        if subcarriers.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(NfError::invalid("subcarrier frequencies must be positive"));
        }
        if subcarriers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NfError::invalid("subcarriers must be strictly increasing"));
        }
        let (lo, hi) = (subcarriers[0], subcarriers[subcarriers.len() - 1]);
        let tol = 1e-12 * carrier_frequency_hz;
        if lo > carrier_frequency_hz + tol || hi < carrier_frequency_hz - tol {
            return Err(NfError::invalid("subcarriers must bracket the carrier frequency"));
        }
        cfg.subcarriers = Some(subcarriers);
        Ok(cfg)
    }

    /// `count` uniformly spaced subcarriers spanning `fraction · f_c` centered
    /// on the carrier. A single subcarrier sits on the carrier.
    pub fn wideband(carrier_frequency_hz: f64, fractional_bandwidth: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(NfError::invalid("need at least one subcarrier"));
        }
        if !(fractional_bandwidth.is_finite() && (0.0..2.0).contains(&fractional_bandwidth)) {
            return Err(NfError::invalid(format!(
                "fractional bandwidth must lie in [0, 2), got {fractional_bandwidth}"
            )));
        }
        if count > 1 && fractional_bandwidth == 0.0 {
            return Err(NfError::invalid("zero bandwidth allows a single subcarrier only"));
        }
        let bw = fractional_bandwidth * carrier_frequency_hz;
        let subs = if count == 1 {
            vec![carrier_frequency_hz]
        } else {
            let start = carrier_frequency_hz - bw / 2.0;
            let step = bw / (count as f64 - 1.0);
            (0..count).map(|m| start + step * m as f64).collect()
        };
        Self::with_subcarriers(carrier_frequency_hz, subs)
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn subcarriers(&self) -> Option<&[f64]> {
        self.subcarriers.as_deref()
    }
}

/// Wavelength (m) of a frequency (Hz).
pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

fn check_aperture_wavelength(aperture_m: f64, wavelength_m: f64) -> Result<()> {
    if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
        return Err(NfError::invalid(format!(
            "wavelength must be positive, got {wavelength_m}"
        )));
    }
    if !(aperture_m.is_finite() && aperture_m >= 0.0) {
        return Err(NfError::invalid(format!(
            "aperture must be non-negative, got {aperture_m}"
        )));
    }
    Ok(())
}

/// Rayleigh (Fraunhofer) distance `2·D²/λ`.
pub fn rayleigh_distance(aperture_m: f64, wavelength_m: f64) -> Result<f64> {
    check_aperture_wavelength(aperture_m, wavelength_m)?;
    Ok(2.0 * aperture_m * aperture_m / wavelength_m)
}

/// Fresnel distance `0.62·√(D³/λ)`.
///
/// The constant comes from the cubic term of the distance expansion at its
/// worst-case direction (`sin θ = 1/√3`), so the matching numeric check is
/// [`worst_case_phase_error`], not the boresight error.
pub fn fresnel_distance(aperture_m: f64, wavelength_m: f64) -> Result<f64> {
    check_aperture_wavelength(aperture_m, wavelength_m)?;
    Ok(0.62 * (aperture_m.powi(3) / wavelength_m).sqrt())
}

/// Near/far-field boundaries of an aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldBoundaries {
    pub rayleigh_m: f64,
    pub fresnel_m: f64,
    pub reactive_limit_m: f64,
}

/// Propagation region of a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    ReactiveNear,
    RadiatingNear,
    Far,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::ReactiveNear => "reactive_near",
            Region::RadiatingNear => "radiating_near",
            Region::Far => "far",
        }
    }
}

impl FieldBoundaries {
    /// The reactive limit is one wavelength, clipped to the Fresnel distance
    /// so the ordering holds for apertures of about a wavelength.
    pub fn new(aperture_m: f64, wavelength_m: f64) -> Result<Self> {
        let rayleigh_m = rayleigh_distance(aperture_m, wavelength_m)?;
        let fresnel_m = fresnel_distance(aperture_m, wavelength_m)?;
        Ok(Self {
            rayleigh_m,
            fresnel_m,
            reactive_limit_m: wavelength_m.min(fresnel_m),
        })
    }

    /// Boundaries of a two-array link, using the sum of both apertures.
    pub fn for_link(tx: &ArrayGeometry, rx: &ArrayGeometry, wavelength_m: f64) -> Result<Self> {
        Self::new(tx.aperture() + rx.aperture(), wavelength_m)
    }

    pub fn classify(&self, distance_m: f64) -> Result<Region> {
        if !(distance_m > 0.0) {
            return Err(NfError::invalid(format!("distance must be positive, got {distance_m}")));
        }
        Ok(if distance_m >= self.rayleigh_m {
            Region::Far
        } else if distance_m >= self.fresnel_m {
            Region::RadiatingNear
        } else {
            Region::ReactiveNear
        })
    }
}

/// Region of `distance_m` with respect to the aperture of `geometry`.
pub fn classify_region(distance_m: f64, geometry: &ArrayGeometry, wavelength_m: f64) -> Result<Region> {
    FieldBoundaries::new(geometry.aperture(), wavelength_m)?.classify(distance_m)
}

/// Order of the wavefront approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxOrder {
    /// Planar wavefront (first order).
    Linear,
    /// Fresnel wavefront (second order).
    Parabolic,
}

/// Largest phase error over the elements between the exact spherical path
/// length and its Taylor approximation about the reference point.
pub fn max_phase_error(
    geometry: &ArrayGeometry,
    source: &Point3,
    wavelength_m: f64,
    order: ApproxOrder,
) -> Result<f64> {
    check_aperture_wavelength(geometry.aperture(), wavelength_m)?;
    geometry.check_not_on_element(source)?;
    let to_source = source - geometry.reference_point();
    let r = to_source.norm();
    if r == 0.0 {
        return Err(NfError::invalid("source sits on the array reference point"));
    }
    let u = to_source / r;
    let k = 2.0 * PI / wavelength_m;
    let mut worst: f64 = 0.0;
    for p in geometry.positions() {
        let delta = p - geometry.reference_point();
        let proj = delta.dot(&u);
        let d2 = delta.norm_squared();
        let rn = (source - p).norm();
        // r_n - r, without cancellation
        let exact = (d2 - 2.0 * r * proj) / (rn + r);
        let approx = match order {
            ApproxOrder::Linear => -proj,
            ApproxOrder::Parabolic => -proj + (d2 - proj * proj) / (2.0 * r),
        };
        worst = worst.max(k * (exact - approx).abs());
    }
    Ok(worst)
}

/// Maximum of [`max_phase_error`] over all source directions at range
/// `range_m`. Returns the error and the maximizing unit direction.
pub fn worst_case_phase_error(
    geometry: &ArrayGeometry,
    range_m: f64,
    wavelength_m: f64,
    order: ApproxOrder,
) -> Result<(f64, Point3)> {
    if !(range_m > 0.0) {
        return Err(NfError::invalid(format!("range must be positive, got {range_m}")));
    }
    // A ULA is rotationally symmetric about its axis; one cut suffices.
    let azimuths = match geometry.kind() {
        ArrayKind::Ula => 1,
        ArrayKind::Upa => 36,
    };
    let second_axis = geometry.normal().cross(&geometry.axis());
    let dir = |phi: f64, theta: f64| -> Point3 {
        let lateral = geometry.axis() * phi.cos() + second_axis * phi.sin();
        lateral * theta.sin() + geometry.normal() * theta.cos()
    };
    let eval = |phi: f64, theta: f64| -> f64 {
        let src = geometry.reference_point() + dir(phi, theta) * range_m;
        max_phase_error(geometry, &src, wavelength_m, order).unwrap_or(0.0)
    };

    let n_theta = 181;
    let lim = PI / 2.0 * 0.999;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for ia in 0..azimuths {
        let phi = PI * ia as f64 / azimuths as f64;
        for it in 0..n_theta {
            let theta = -lim + 2.0 * lim * it as f64 / (n_theta - 1) as f64;
            let e = eval(phi, theta);
            if e > best.0 {
                best = (e, phi, theta);
            }
        }
    }
    // golden-section refinement around the best grid angle
    let step = 2.0 * lim / (n_theta - 1) as f64;
    let (phi, t0) = (best.1, best.2);
    let (mut a, mut b) = ((t0 - step).max(-lim), (t0 + step).min(lim));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(phi, c), eval(phi, d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(phi, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(phi, d);
        }
    }
    let theta = (a + b) / 2.0;
    let refined = eval(phi, theta);
    if refined >= best.0 {
        Ok((refined, dir(phi, theta)))
    } else {
        Ok((best.0, dir(best.1, best.2)))
    }
}

/// How the uniform-power distance search ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdBound {
    /// Bisection converged inside the search interval.
    Converged,
    /// The threshold is only reached beyond the Rayleigh distance; capped there.
    CappedAtRayleigh,
    /// The amplitude spread never reaches the threshold; the search collapsed
    /// onto the array plane.
    BelowArray,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPowerDistance {
    pub distance_m: f64,
    pub bound: UpdBound,
}

impl UniformPowerDistance {
    pub fn capped(&self) -> bool {
        self.bound == UpdBound::CappedAtRayleigh
    }
}

/// Max/min free-space amplitude ratio across the array (dB) for a boresight
/// source at `distance_m`.
pub fn boresight_amplitude_spread_db(geometry: &ArrayGeometry, distance_m: f64) -> f64 {
    let src = geometry.reference_point() + geometry.normal() * distance_m;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for p in geometry.positions() {
        let r = (src - p).norm();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if lo == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (hi / lo).log10()
}

/// Boresight distance at which the per-element free-space amplitude spread
/// equals `threshold_db`, found by bisection on `(0, d_R]`.
pub fn uniform_power_distance(
    geometry: &ArrayGeometry,
    wavelength_m: f64,
    threshold_db: f64,
) -> Result<UniformPowerDistance> {
    if !(threshold_db.is_finite() && threshold_db > 0.0) {
        return Err(NfError::invalid(format!(
            "threshold must be positive, got {threshold_db} dB"
        )));
    }
    let d_r = rayleigh_distance(geometry.aperture(), wavelength_m)?;
    let spread = |z: f64| boresight_amplitude_spread_db(geometry, z);
    if d_r == 0.0 || spread(d_r) >= threshold_db {
        return Ok(UniformPowerDistance {
            distance_m: d_r,
            bound: UpdBound::CappedAtRayleigh,
        });
    }
    if spread(0.0) < threshold_db {
        return Ok(UniformPowerDistance {
            distance_m: 0.0,
            bound: UpdBound::BelowArray,
        });
    }
    let (mut lo, mut hi) = (0.0, d_r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spread(mid) >= threshold_db {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(UniformPowerDistance {
        distance_m: 0.5 * (lo + hi),
        bound: UpdBound::Converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lambda(f: f64) -> f64 {
        SPEED_OF_LIGHT / f
    }

    fn brute_aperture(g: &ArrayGeometry) -> f64 {
        let p = g.positions();
        let mut best: f64 = 0.0;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                best = best.max((p[i] - p[j]).norm());
            }
        }
        best
    }

    #[test]
    fn aperture_is_max_pairwise_distance() {
        let ula = ArrayGeometry::ula(17, 0.01).unwrap();
        assert!((ula.aperture() - brute_aperture(&ula)).abs() < 1e-14);
        assert!((ula.aperture() - 0.16).abs() < 1e-14);
        let upa = ArrayGeometry::upa(5, 7, 0.02).unwrap();
        assert!((upa.aperture() - brute_aperture(&upa)).abs() < 1e-14);
        let c: Point3 = upa.positions().iter().sum::<Point3>() / upa.len() as f64;
        assert!((c - upa.reference_point()).norm() < 1e-15);
    }

    #[test]
    fn placement_moves_reference_and_keeps_shape() {
        let ula = ArrayGeometry::ula(8, 0.5).unwrap();
        let rot = Rotation3::from_axis_angle(&Point3::y_axis(), 0.3);
        let moved = ula.placed(&rot, Point3::new(1.0, 2.0, 3.0));
        assert!((moved.reference_point() - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-14);
        assert!((brute_aperture(&moved) - ula.aperture()).abs() < 1e-12);
        let c: Point3 = moved.positions().iter().sum::<Point3>() / 8.0;
        assert!((c - moved.reference_point()).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_arrays() {
        assert!(ArrayGeometry::ula(0, 0.1).is_err());
        assert!(ArrayGeometry::ula(4, 0.0).is_err());
        assert!(ArrayGeometry::upa(2, 0, 0.1).is_err());
    }

    #[test]
    fn carrier_wavelength_product() {
        let c = CarrierConfig::narrowband(28e9).unwrap();
        assert!((c.wavelength() * c.carrier_frequency() / SPEED_OF_LIGHT - 1.0).abs() < 1e-12);
        assert!(CarrierConfig::narrowband(-1.0).is_err());
    }

    #[test]
    fn subcarrier_validation() {
        let w = CarrierConfig::wideband(28e9, 0.1, 129).unwrap();
        let s = w.subcarriers().unwrap();
        assert_eq!(s.len(), 129);
        assert!((s[64] - 28e9).abs() < 1e-3);
        assert!((s[128] - s[0] - 2.8e9).abs() < 1e-3);
        assert!(CarrierConfig::with_subcarriers(28e9, vec![29e9, 30e9]).is_err());
        assert!(CarrierConfig::with_subcarriers(28e9, vec![27e9, 27e9, 29e9]).is_err());
        assert_eq!(
            CarrierConfig::wideband(28e9, 0.0, 1).unwrap().subcarriers(),
            Some(&[28e9][..])
        );
    }

    #[test]
    fn rayleigh_square_panel_at_28ghz() {
        let d = rayleigh_distance(2f64.sqrt(), lambda(28e9)).unwrap();
        assert!((d - 373.6).abs() < 0.5, "{d}");
    }

    #[test]
    fn rayleigh_case_study_combined_aperture() {
        let lam = lambda(300e9);
        let tx = ArrayGeometry::ula(1024, lam / 2.0).unwrap();
        let rx = ArrayGeometry::ula(16, lam / 2.0).unwrap();
        let b = FieldBoundaries::for_link(&tx, &rx, lam).unwrap();
        assert!((b.rayleigh_m - 538.0).abs() < 3.0, "{}", b.rayleigh_m);
    }

    #[test]
    fn zero_aperture_has_no_near_field() {
        assert_eq!(rayleigh_distance(0.0, 0.01).unwrap(), 0.0);
        assert_eq!(fresnel_distance(0.0, 0.01).unwrap(), 0.0);
        assert!(rayleigh_distance(1.0, 0.0).is_err());
        assert!(fresnel_distance(1.0, -1.0).is_err());
    }

    #[test]
    fn fresnel_closed_form_value() {
        let d = fresnel_distance(0.5115, 1e-3).unwrap();
        assert!((d - 7.17).abs() < 0.01, "{d}");
    }

    #[test]
    fn boundaries_are_ordered() {
        for &(ap, lam) in &[(0.01, 0.01), (0.0137, 0.01), (1.0, 0.01), (2.74, lambda(28e9))] {
            let b = FieldBoundaries::new(ap, lam).unwrap();
            assert!(0.0 <= b.reactive_limit_m);
            assert!(b.reactive_limit_m <= b.fresnel_m);
            assert!(b.fresnel_m <= b.rayleigh_m);
        }
    }

    #[test]
    fn classify_case_study_distances() {
        let lam = lambda(300e9);
        let b = FieldBoundaries::new(0.5115 + 0.0075, lam).unwrap();
        assert_eq!(b.classify(600.0).unwrap(), Region::Far);
        assert_eq!(b.classify(21.3).unwrap(), Region::RadiatingNear);
        assert_eq!(b.classify(lam / 10.0).unwrap(), Region::ReactiveNear);
        assert!(b.classify(0.0).is_err());
        let g = ArrayGeometry::ula(64, lam / 2.0).unwrap();
        assert_eq!(classify_region(1e6, &g, lam).unwrap(), Region::Far);
    }

    #[test]
    fn far_field_phase_error_vanishes() {
        let lam = lambda(28e9);
        let g = ArrayGeometry::ula(256, lam / 2.0).unwrap();
        let d_r = rayleigh_distance(g.aperture(), lam).unwrap();
        let src = g.point_at(0.0, 1e6 * d_r);
        assert!(max_phase_error(&g, &src, lam, ApproxOrder::Linear).unwrap() < 1e-3);
    }

    #[test]
    fn linear_error_at_rayleigh_is_pi_over_8() {
        let lam = lambda(28e9);
        let g = ArrayGeometry::ula(256, lam / 2.0).unwrap();
        let d_r = rayleigh_distance(g.aperture(), lam).unwrap();
        let e = max_phase_error(&g, &g.point_at(0.0, d_r), lam, ApproxOrder::Linear).unwrap();
        let target = BOUNDARY_PHASE_ERROR;
        assert!((e / target - 1.0).abs() < 0.15, "{e}");
    }

    #[test]
    fn parabolic_error_at_fresnel_worst_direction() {
        let lam = lambda(28e9);
        let g = ArrayGeometry::ula(256, lam / 2.0).unwrap();
        let d_f = fresnel_distance(g.aperture(), lam).unwrap();
        let (e, dir) = worst_case_phase_error(&g, d_f, lam, ApproxOrder::Parabolic).unwrap();
        assert!((e / BOUNDARY_PHASE_ERROR - 1.0).abs() < 0.15, "{e}");
        // worst direction sits near sin(theta) = 1/sqrt(3)
        let s = dir.dot(&g.axis()).abs();
        assert!((s - 1.0 / 3f64.sqrt()).abs() < 0.05, "{s}");
        // at boresight the cubic term vanishes and the error is far smaller
        let b = max_phase_error(&g, &g.point_at(0.0, d_f), lam, ApproxOrder::Parabolic).unwrap();
        assert!(b < 0.2 * BOUNDARY_PHASE_ERROR, "{b}");
    }

    /// Bisection on the worst-case parabolic error, independent of the
    /// closed-form Fresnel constant.
    fn fresnel_by_bisection(g: &ArrayGeometry, lam: f64) -> f64 {
        let err = |r: f64| worst_case_phase_error(g, r, lam, ApproxOrder::Parabolic).unwrap().0;
        let (mut lo, mut hi) = (g.aperture() * 0.6, 10.0 * rayleigh_distance(g.aperture(), lam).unwrap());
        assert!(err(lo) > BOUNDARY_PHASE_ERROR && err(hi) < BOUNDARY_PHASE_ERROR);
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            if err(mid) > BOUNDARY_PHASE_ERROR {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn fresnel_closed_form_matches_bisection() {
        // 0.5115 m at 1 mm: 512 elements at lambda/2
        let lam = 1e-3;
        let g = ArrayGeometry::ula(1024, 0.5115 / 1023.0).unwrap();
        let numeric = fresnel_by_bisection(&g, lam);
        let closed = fresnel_distance(g.aperture(), lam).unwrap();
        assert!((numeric / closed - 1.0).abs() < 0.10, "{numeric} vs {closed}");

        let lam = lambda(28e9);
        let n = (2.74 / (lam / 2.0)).round() as usize + 1;
        let g = ArrayGeometry::ula(n, 2.74 / (n as f64 - 1.0)).unwrap();
        let numeric = fresnel_by_bisection(&g, lam);
        let closed = fresnel_distance(2.74, lam).unwrap();
        assert!((closed - 27.2).abs() < 0.1, "{closed}");
        assert!((numeric / closed - 1.0).abs() < 0.10, "{numeric} vs {closed}");
    }

    #[test]
    fn phase_error_rejects_coincident_source() {
        let g = ArrayGeometry::ula(4, 0.1).unwrap();
        let src = g.positions()[0];
        assert!(max_phase_error(&g, &src, 0.01, ApproxOrder::Linear).is_err());
    }

    #[test]
    fn upd_small_threshold_caps_at_rayleigh() {
        let lam = lambda(300e9);
        let g = ArrayGeometry::ula(64, lam / 2.0).unwrap();
        let u = uniform_power_distance(&g, lam, 1e-9).unwrap();
        assert!(u.capped());
        assert_eq!(u.distance_m, rayleigh_distance(g.aperture(), lam).unwrap());
        assert!(uniform_power_distance(&g, lam, 0.0).is_err());
    }

    #[test]
    fn upd_matches_grid_scan() {
        let lam = lambda(300e9);
        let g = ArrayGeometry::ula(64, lam / 2.0).unwrap();
        let u = uniform_power_distance(&g, lam, 3.0).unwrap();
        assert_eq!(u.bound, UpdBound::Converged);
        // brute-force oracle: last grid distance still at or above 3 dB
        let spread = |z: f64| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for p in g.positions() {
                let r = (Point3::new(0.0, 0.0, z) - p).norm();
                lo = lo.min(r);
                hi = hi.max(r);
            }
            20.0 * (hi / lo).log10()
        };
        let step = 1e-6;
        let mut z = step;
        while spread(z) >= 3.0 {
            z += step;
        }
        assert!(
            (u.distance_m - (z - step / 2.0)).abs() <= step,
            "{} vs {}",
            u.distance_m,
            z
        );
    }

    #[test]
    fn upd_unreachable_threshold_collapses_below_spacing() {
        let lam = lambda(300e9);
        let g = ArrayGeometry::ula(64, lam / 2.0).unwrap();
        let u = uniform_power_distance(&g, lam, 60.0).unwrap();
        assert!(u.distance_m < g.spacing());
        // an odd-length array has an element on boresight, so 60 dB is reachable
        let g = ArrayGeometry::ula(65, lam / 2.0).unwrap();
        let u = uniform_power_distance(&g, lam, 60.0).unwrap();
        assert_eq!(u.bound, UpdBound::Converged);
        assert!(u.distance_m < g.spacing());
        assert!((boresight_amplitude_spread_db(&g, u.distance_m) - 60.0).abs() < 1e-6);
    }

    #[test]
    fn upd_non_increasing_in_threshold() {
        let lam = lambda(300e9);
        let g = ArrayGeometry::ula(64, lam / 2.0).unwrap();
        let mut prev = f64::INFINITY;
        for t in [0.01, 0.1, 0.5, 1.0, 3.0, 6.0, 10.0, 20.0] {
            let d = uniform_power_distance(&g, lam, t).unwrap().distance_m;
            assert!(d <= prev);
            prev = d;
        }
    }

    proptest! {
        #[test]
        fn boundaries_monotone(d in 0.01f64..5.0, scale in 1.01f64..3.0, lam in 1e-4f64..0.1) {
            prop_assert!(rayleigh_distance(d * scale, lam).unwrap() > rayleigh_distance(d, lam).unwrap());
            prop_assert!(fresnel_distance(d * scale, lam).unwrap() > fresnel_distance(d, lam).unwrap());
            prop_assert!(rayleigh_distance(d, lam * scale).unwrap() < rayleigh_distance(d, lam).unwrap());
        }

        #[test]
        fn parabolic_refines_linear_on_boresight(n in 2usize..64, r in 0.05f64..100.0) {
            let lam = lambda(28e9);
            let g = ArrayGeometry::ula(n, lam / 2.0).unwrap();
            let src = g.point_at(0.0, r);
            let lin = max_phase_error(&g, &src, lam, ApproxOrder::Linear).unwrap();
            let par = max_phase_error(&g, &src, lam, ApproxOrder::Parabolic).unwrap();
            prop_assert!(lin >= par);
        }

        #[test]
        fn phase_error_decreases_along_ray(theta in -1.2f64..1.2, r in 0.2f64..50.0, k in 1.05f64..4.0) {
            let lam = lambda(28e9);
            let g = ArrayGeometry::ula(32, lam / 2.0).unwrap();
            for order in [ApproxOrder::Linear, ApproxOrder::Parabolic] {
                let near = max_phase_error(&g, &g.point_at(theta, r), lam, order).unwrap();
                let far = max_phase_error(&g, &g.point_at(theta, r * k), lam, order).unwrap();
                prop_assert!(far <= near + 1e-12);
            }
        }

        #[test]
        fn regions_are_contiguous(a in 0.001f64..10.0, b in 0.001f64..10.0) {
            let lam = lambda(300e9);
            let fb = FieldBoundaries::new(0.1, lam).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let rank = |r: Region| match r { Region::ReactiveNear => 0, Region::RadiatingNear => 1, Region::Far => 2 };
            prop_assert!(rank(fb.classify(lo).unwrap()) <= rank(fb.classify(hi).unwrap()));
        }
    }
}
