//! ToA localization Monte Carlo.
//!
//! Every array element of every access point yields one range measurement
//! with independent Gaussian error. Two estimators are provided: the
//! classical linearized least-squares solution (squared ranges, unknowns
//! `x`, `y` and `x² + y²`) and an iterative Gauss–Newton refinement of the
//! nonlinear range residuals.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{NfError, Result};
use crate::geometry::ArrayGeometry;
use crate::{Point2, Point3};

pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_TOL_M: f64 = 1e-9;

/// Horizontal direction along which an access point's ULA extends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisAlignment {
    X,
    Y,
}

/// An anchor carrying a linear array in the horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    geometry: ArrayGeometry,
    anchor: Point2,
}

impl AccessPoint {
    /// Half-wavelength (or any `spacing_m`) ULA centered on `anchor`.
    pub fn ula(anchor: Point2, n_elements: usize, spacing_m: f64, along: AxisAlignment) -> Result<Self> {
        let base = ArrayGeometry::ula(n_elements, spacing_m)?;
        let rotation = match along {
            AxisAlignment::X => nalgebra::Rotation3::identity(),
            AxisAlignment::Y => nalgebra::Rotation3::from_axis_angle(&Point3::z_axis(), std::f64::consts::FRAC_PI_2),
        };
        let geometry = base.placed(&rotation, Point3::new(anchor.x, anchor.y, 0.0));
        Ok(Self { geometry, anchor })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn anchor(&self) -> Point2 {
        self.anchor
    }

    pub fn element(&self, index: usize) -> Point2 {
        self.geometry.positions()[index].xy()
    }
}

/// Four access points at (3,0), (6,3), (3,6), (0,3) m. Arrays at y = 0 and
/// y = 6 run along x; the other two run along y.
pub fn square_room_access_points(n_elements: usize, spacing_m: f64) -> Result<Vec<AccessPoint>> {
    [
        (Point2::new(3.0, 0.0), AxisAlignment::X),
        (Point2::new(6.0, 3.0), AxisAlignment::Y),
        (Point2::new(3.0, 6.0), AxisAlignment::X),
        (Point2::new(0.0, 3.0), AxisAlignment::Y),
    ]
    .into_iter()
    .map(|(a, along)| AccessPoint::ula(a, n_elements, spacing_m, along))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangingSample {
    pub ap_index: usize,
    pub element_index: usize,
    pub measured_range: f64,
}

/// One noisy range per (access point, element); deterministic in `seed`.
pub fn simulate_ranges(
    user: &Point2,
    aps: &[AccessPoint],
    noise_variance_m2: f64,
    seed: u64,
) -> Result<Vec<RangingSample>> {
    if !(noise_variance_m2 >= 0.0 && noise_variance_m2.is_finite()) {
        return Err(NfError::invalid(format!(
            "noise variance must be non-negative, got {noise_variance_m2}"
        )));
    }
    let normal =
        Normal::new(0.0, noise_variance_m2.sqrt()).map_err(|e| NfError::invalid(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(aps.iter().map(|a| a.geometry.len()).sum());
    for (ap_index, ap) in aps.iter().enumerate() {
        for (element_index, p) in ap.geometry.positions().iter().enumerate() {
            let exact = (user - p.xy()).norm();
            let noise = if noise_variance_m2 > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            out.push(RangingSample {
                ap_index,
                element_index,
                measured_range: exact + noise,
            });
        }
    }
    Ok(out)
}

fn check_solvable(samples: &[RangingSample], aps: &[AccessPoint]) -> Result<()> {
    if samples.len() < 3 {
        return Err(NfError::invalid("need at least three range samples"));
    }
    let mut anchors: Vec<usize> = Vec::new();
    for s in samples {
        let ap = aps
            .get(s.ap_index)
            .ok_or_else(|| NfError::invalid(format!("sample refers to missing AP {}", s.ap_index)))?;
        if s.element_index >= ap.geometry.len() {
            return Err(NfError::invalid(format!(
                "sample refers to missing element {} of AP {}",
                s.element_index, s.ap_index
            )));
        }
        if !anchors.contains(&s.ap_index) {
            anchors.push(s.ap_index);
        }
    }
    let distinct = anchors
        .iter()
        .enumerate()
        .any(|(i, &a)| anchors[..i].iter().any(|&b| aps[a].anchor != aps[b].anchor));
    if !distinct {
        return Err(NfError::invalid("need samples from at least two distinct anchors"));
    }
    Ok(())
}

/// Result of the Gauss–Newton solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonFix {
    pub position: Point2,
    pub converged: bool,
    pub iterations: usize,
}

/// Gauss–Newton minimization of `Σ (ρ_i − ‖p − e_i‖)²`.
pub fn ls_position(
    samples: &[RangingSample],
    aps: &[AccessPoint],
    initial_guess: Point2,
    max_iters: usize,
    tol_m: f64,
) -> Result<GaussNewtonFix> {
    if max_iters == 0 {
        return Err(NfError::invalid("max_iters must be at least 1"));
    }
    check_solvable(samples, aps)?;
    let mut p = initial_guess;
    for it in 0..max_iters {
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = Vector2::<f64>::zeros();
        for s in samples {
            let diff = p - aps[s.ap_index].element(s.element_index);
            let r = diff.norm();
            if r == 0.0 {
                return Err(NfError::numerical("Gauss-Newton iterate hit an element", Some(it)));
            }
            let j = diff / r;
            jtj += j * j.transpose();
            jtr += j * (s.measured_range - r);
        }
        let step = jtj
            .cholesky()
            .map(|c| c.solve(&jtr))
            .ok_or_else(|| NfError::numerical("Gauss-Newton normal equations are singular", Some(it)))?;
        p += step;
        if step.norm() < tol_m {
            return Ok(GaussNewtonFix {
                position: p,
                converged: true,
                iterations: it + 1,
            });
        }
    }
    Ok(GaussNewtonFix {
        position: p,
        converged: false,
        iterations: max_iters,
    })
}

/// Closed-form least squares on squared ranges.
///
/// Each sample gives `2·aᵢᵀq − R = ‖aᵢ‖² − ρᵢ²` with `q` the position and
/// `R = ‖q‖²` treated as a free unknown; coordinates are centered on the
/// element centroid for conditioning.
pub fn linearized_ls_position(samples: &[RangingSample], aps: &[AccessPoint]) -> Result<Point2> {
    check_solvable(samples, aps)?;
    let center = samples
        .iter()
        .map(|s| aps[s.ap_index].element(s.element_index))
        .sum::<Point2>()
        / samples.len() as f64;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for s in samples {
        let a = aps[s.ap_index].element(s.element_index) - center;
        let row = Vector3::new(2.0 * a.x, 2.0 * a.y, -1.0);
        let rhs = a.norm_squared() - s.measured_range * s.measured_range;
        ata += row * row.transpose();
        atb += row * rhs;
    }
    let sol = ata
        .cholesky()
        .map(|c| c.solve(&atb))
        .ok_or_else(|| NfError::numerical("linearized LS normal equations are singular", None))?;
    Ok(Point2::new(sol.x, sol.y) + center)
}

/// Circular error probable: lower median of the distances to the mean.
pub fn cep(estimates: &[Point2]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(NfError::invalid("CEP needs at least one estimate"));
    }
    let mean = mean_point(estimates);
    let mut radii: Vec<f64> = estimates.iter().map(|p| (p - mean).norm()).collect();
    radii.sort_by(f64::total_cmp);
    Ok(radii[(radii.len() - 1) / 2])
}

fn mean_point(points: &[Point2]) -> Point2 {
    points.iter().sum::<Point2>() / points.len() as f64
}

/// Position estimator used by [`positioning_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    #[default]
    Linearized,
    GaussNewton,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Linearized => "linearized",
            Estimator::GaussNewton => "gauss_newton",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositioningResult {
    pub estimates: Vec<Point2>,
    pub cep_m: f64,
    pub mean_estimate: Point2,
}

/// Per-trial seed from a counter-based mix of the master seed and index.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(master_seed) ^ trial)
}

fn solve_trial(samples: &[RangingSample], aps: &[AccessPoint], estimator: Estimator) -> Result<Point2> {
    match estimator {
        Estimator::Linearized => linearized_ls_position(samples, aps),
        Estimator::GaussNewton => {
            let start = mean_point(&aps.iter().map(|a| a.anchor).collect::<Vec<_>>());
            match ls_position(samples, aps, start, DEFAULT_MAX_ITERS, DEFAULT_TOL_M) {
                Ok(fix) => Ok(fix.position),
                Err(NfError::NumericalFailure { .. }) => {
                    let nudged = start + Point2::new(0.137, -0.071);
                    ls_position(samples, aps, nudged, DEFAULT_MAX_ITERS, DEFAULT_TOL_M).map(|f| f.position)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Monte Carlo over `trials` independent range draws.
pub fn positioning_experiment(
    user: Point2,
    aps: &[AccessPoint],
    noise_variance_m2: f64,
    trials: usize,
    master_seed: u64,
    estimator: Estimator,
) -> Result<PositioningResult> {
    if trials == 0 {
        return Err(NfError::invalid("need at least one trial"));
    }
    let estimates = (0..trials)
        .into_par_iter()
        .map(|t| {
            let samples = simulate_ranges(&user, aps, noise_variance_m2, trial_seed(master_seed, t as u64))?;
            solve_trial(&samples, aps, estimator).map_err(|e| match e {
                NfError::NumericalFailure { context, iteration } => NfError::NumericalFailure {
                    context: format!("positioning trial {t}: {context}"),
                    iteration,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PositioningResult {
        cep_m: cep(&estimates)?,
        mean_estimate: mean_point(&estimates),
        estimates,
    })
}

/// Noise variance (m²) from a level in dB relative to 1 m².
pub fn variance_from_db(db_m2: f64) -> f64 {
    10f64.powf(db_m2 / 10.0)
}
