//! Effective spatial degrees of freedom of LoS MIMO links.

use nalgebra::{Rotation3, Unit};
use rayon::prelude::*;

use crate::beamfocus::log_grid;
use crate::channel::{los_mimo_channel, AmplitudeModel, ChannelMatrix};
use crate::error::{NfError, Result};
use crate::geometry::{ArrayGeometry, SPEED_OF_LIGHT};

/// Energy-loss budget used for the case-study DoF numbers.
pub const DEFAULT_ENERGY_LOSS: f64 = 0.01;

/// Singular values of `h`, sorted descending.
pub fn singular_values(h: &ChannelMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = h.0.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Smallest `k` whose leading squared singular values hold at least
/// `(1 − energy_loss)` of the total.
pub fn dof_from_singular_values(sv: &[f64], energy_loss: f64) -> Result<usize> {
    if !(energy_loss > 0.0 && energy_loss < 1.0) {
        return Err(NfError::invalid(format!(
            "energy loss must lie in (0, 1), got {energy_loss}"
        )));
    }
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return Err(NfError::invalid("channel matrix is zero"));
    }
    let target = (1.0 - energy_loss) * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, s) in sv.iter().enumerate() {
        acc += s * s;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    Ok(sv.len())
}

pub fn effective_dof(h: &ChannelMatrix, energy_loss: f64) -> Result<usize> {
    dof_from_singular_values(&singular_values(h), energy_loss)
}

/// Orientation of the receive array after it is displaced off boresight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOrientation {
    /// RX axis stays parallel to the TX axis.
    Parallel,
    /// RX axis is turned by the displacement angle so that it stays
    /// perpendicular to the line joining the two array centers.
    FacingTx,
}

/// Geometry and channel options of a point-to-point LoS link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub wavelength_m: f64,
    /// Angle between the TX boresight and the TX→RX center line.
    pub rx_angle: f64,
    pub orientation: RxOrientation,
    /// Extra rotation of the RX about its own center.
    pub rx_self_rotation: f64,
    pub amplitude: AmplitudeModel,
    pub energy_loss: f64,
}

impl LinkConfig {
    /// 300 GHz, free-space amplitudes, 1% energy loss, RX facing the TX.
    pub fn case_study(rx_angle: f64) -> Self {
        Self {
            wavelength_m: SPEED_OF_LIGHT / 300e9,
            rx_angle,
            orientation: RxOrientation::FacingTx,
            rx_self_rotation: 0.0,
            amplitude: AmplitudeModel::FreeSpace,
            energy_loss: DEFAULT_ENERGY_LOSS,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rx_angle >= 0.0 && self.rx_angle < std::f64::consts::FRAC_PI_2) {
            return Err(NfError::invalid(format!(
                "rx angle must lie in [0, π/2), got {}",
                self.rx_angle
            )));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(NfError::invalid("wavelength must be positive"));
        }
        Ok(())
    }
}

/// Places `rx` (built in the default frame) at `distance_m` from the TX
/// reference point along the direction at `rx_angle` from the TX boresight.
/// The RX faces back towards the TX.
pub fn place_rx(tx: &ArrayGeometry, rx: &ArrayGeometry, distance_m: f64, link: &LinkConfig) -> ArrayGeometry {
    let turn = match link.orientation {
        RxOrientation::Parallel => 0.0,
        RxOrientation::FacingTx => link.rx_angle,
    } + link.rx_self_rotation;
    let pivot = Unit::new_normalize(tx.normal().cross(&tx.axis()));
    let rotation = Rotation3::from_axis_angle(&pivot, turn + std::f64::consts::PI);
    let center = tx.point_at(link.rx_angle, distance_m);
    rx.placed(&rotation, center - rx.reference_point())
}

/// LoS channel of the placed link.
pub fn link_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    distance_m: f64,
    link: &LinkConfig,
) -> Result<ChannelMatrix> {
    let placed = place_rx(tx, rx, distance_m, link);
    los_mimo_channel(tx, &placed, link.wavelength_m, link.amplitude)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    DistanceM,
    ApertureM,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofPoint {
    pub value: f64,
    pub dof: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofSweepResult {
    pub sweep_variable: SweepVariable,
    pub points: Vec<DofPoint>,
}

impl DofSweepResult {
    pub fn dofs(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.dof).collect()
    }
}

fn dof_point(value: f64, h: &ChannelMatrix, energy_loss: f64) -> Result<DofPoint> {
    let sv = singular_values(h);
    let dof = dof_from_singular_values(&sv, energy_loss)?;
    Ok(DofPoint {
        value,
        dof,
        singular_values: sv,
    })
}

/// DoF at each RX distance.
pub fn dof_vs_distance(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    distances: &[f64],
    link: &LinkConfig,
) -> Result<DofSweepResult> {
    link.validate()?;
    if distances.iter().any(|d| !(*d > 0.0)) {
        return Err(NfError::invalid("distances must be positive"));
    }
    let points = distances
        .par_iter()
        .map(|&d| dof_point(d, &link_channel(tx, rx, d, link)?, link.energy_loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(DofSweepResult {
        sweep_variable: SweepVariable::DistanceM,
        points,
    })
}

/// DoF for half-wavelength TX ULAs of each element count, RX at
/// `distance_m`. Sweep values are TX apertures in meters.
pub fn dof_vs_aperture(
    n_elements_grid: &[usize],
    rx: &ArrayGeometry,
    distance_m: f64,
    link: &LinkConfig,
) -> Result<DofSweepResult> {
    link.validate()?;
    if n_elements_grid.contains(&0) {
        return Err(NfError::invalid("element counts must be at least 1"));
    }
    let spacing = link.wavelength_m / 2.0;
    let points = n_elements_grid
        .par_iter()
        .map(|&n| {
            let tx = ArrayGeometry::ula(n, spacing)?;
            dof_point(
                tx.aperture(),
                &link_channel(&tx, rx, distance_m, link)?,
                link.energy_loss,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DofSweepResult {
        sweep_variable: SweepVariable::ApertureM,
        points,
    })
}

/// Distance beyond which the link collapses to a single DoF.
///
/// Scans a logarithmic grid of `grid_points` over `[lo, hi]`, then bisects
/// the last multi-DoF grid interval to `rel_resolution`. Returns `None` when
/// no grid point has more than one DoF.
pub fn rank_boost_distance(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    link: &LinkConfig,
    lo: f64,
    hi: f64,
    grid_points: usize,
    rel_resolution: f64,
) -> Result<Option<f64>> {
    let grid = log_grid(lo, hi, grid_points.max(2));
    let sweep = dof_vs_distance(tx, rx, &grid, link)?;
    let Some(last) = sweep.points.iter().rposition(|p| p.dof >= 2) else {
        return Ok(None);
    };
    if last + 1 == grid.len() {
        return Ok(Some(hi));
    }
    let dof_at = |d: f64| -> Result<usize> { effective_dof(&link_channel(tx, rx, d, link)?, link.energy_loss) };
    let (mut a, mut b) = (grid[last], grid[last + 1]);
    while b / a - 1.0 > rel_resolution {
        let mid = (a * b).sqrt();
        if dof_at(mid)? >= 2 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(a))
}
