//! Experiment configuration files.
//!
//! A config is a TOML document with a top-level `experiment` name, an
//! optional `seed` and `output_path`, and one table of parameters named after
//! the experiment. Key names carry their SI unit.

use std::f64::consts::FRAC_PI_6;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::acceptance::aperture_sweep_elements;
use crate::beamfocus::{
    DEFAULT_FRACTIONAL_BANDWIDTH, DEFAULT_GRID_ANGLES, DEFAULT_GRID_DISTANCES, DEFAULT_SUBCARRIERS,
};
use crate::channel::AmplitudeModel;
use crate::codebook::DEFAULT_BETA;
use crate::dof::{RxOrientation, DEFAULT_ENERGY_LOSS};
use crate::positioning::Estimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Boundaries,
    PowerProfile,
    AngularSpread,
    Beamsplit,
    GainMap,
    DofDistance,
    DofAperture,
    Estimate,
    Positioning,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Boundaries,
        ExperimentKind::PowerProfile,
        ExperimentKind::AngularSpread,
        ExperimentKind::Beamsplit,
        ExperimentKind::GainMap,
        ExperimentKind::DofDistance,
        ExperimentKind::DofAperture,
        ExperimentKind::Estimate,
        ExperimentKind::Positioning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Boundaries => "boundaries",
            ExperimentKind::PowerProfile => "power_profile",
            ExperimentKind::AngularSpread => "angular_spread",
            ExperimentKind::Beamsplit => "beamsplit",
            ExperimentKind::GainMap => "gain_map",
            ExperimentKind::DofDistance => "dof_distance",
            ExperimentKind::DofAperture => "dof_aperture",
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::Positioning => "positioning",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amplitude {
    Unit,
    FreeSpace,
}

impl From<Amplitude> for AmplitudeModel {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Unit => AmplitudeModel::Unit,
            Amplitude::FreeSpace => AmplitudeModel::FreeSpace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryChoice {
    Polar,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsChoice {
    PhaseOnly,
    TimeDelay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Parallel,
    FacingTx,
}

impl From<Orientation> for RxOrientation {
    fn from(o: Orientation) -> Self {
        match o {
            Orientation::Parallel => RxOrientation::Parallel,
            Orientation::FacingTx => RxOrientation::FacingTx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    Linearized,
    GaussNewton,
}

impl From<EstimatorChoice> for Estimator {
    fn from(e: EstimatorChoice) -> Self {
        match e {
            EstimatorChoice::Linearized => Estimator::Linearized,
            EstimatorChoice::GaussNewton => Estimator::GaussNewton,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn zero() -> f64 {
    0.0
}
fn zero_usize() -> usize {
    0
}
fn half() -> f64 {
    0.5
}
fn f28ghz() -> f64 {
    28e9
}
fn f300ghz() -> f64 {
    300e9
}
fn unit() -> Amplitude {
    Amplitude::Unit
}
fn free_space() -> Amplitude {
    Amplitude::FreeSpace
}
fn polar() -> DictionaryChoice {
    DictionaryChoice::Polar
}
fn beta() -> f64 {
    DEFAULT_BETA
}
fn facing() -> Orientation {
    Orientation::FacingTx
}
fn energy_loss() -> f64 {
    DEFAULT_ENERGY_LOSS
}

/// A point source or scatterer placed by angle from boresight and range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub angle_rad: f64,
    pub distance_m: f64,
    #[serde(default = "one")]
    pub gain_re: f64,
    #[serde(default = "zero")]
    pub gain_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSpec {
    pub angle_rad: f64,
    pub distance_m: f64,
    #[serde(default = "one")]
    pub gain_re: f64,
    #[serde(default = "zero")]
    pub gain_im: f64,
    /// First visible element.
    #[serde(default = "zero_usize")]
    pub visible_from: usize,
    /// One past the last visible element; all remaining elements if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_to: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundariesParams {
    pub carrier_frequency_hz: f64,
    pub aperture_m: f64,
    #[serde(default = "upd_threshold_db")]
    pub upd_threshold_db: f64,
    /// Element spacing of the ULA used for the uniform-power distance.
    #[serde(default = "half")]
    pub element_spacing_wavelengths: f64,
}
fn upd_threshold_db() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerProfileParams {
    #[serde(default = "f28ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "pp_elements")]
    pub elements: usize,
    #[serde(default = "half")]
    pub element_spacing_wavelengths: f64,
    #[serde(default = "free_space")]
    pub amplitude: Amplitude,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los: Option<SourceSpec>,
    #[serde(default)]
    pub scatterers: Vec<ScattererSpec>,
}
fn pp_elements() -> usize {
    513
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSpreadParams {
    #[serde(default = "f300ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "as_elements")]
    pub elements: usize,
    #[serde(default = "unit")]
    pub amplitude: Amplitude,
    #[serde(default = "polar")]
    pub dictionary: DictionaryChoice,
    #[serde(default = "beta")]
    pub beta: f64,
    /// Angular samples of the polar dictionary; the element count if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_samples: Option<usize>,
    pub sources: Vec<SourceSpec>,
}
fn as_elements() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamsplitParams {
    #[serde(default = "f28ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "array_length_m")]
    pub array_length_m: f64,
    #[serde(default = "fractional_bandwidth")]
    pub fractional_bandwidth: f64,
    #[serde(default = "subcarriers")]
    pub subcarriers: usize,
    #[serde(default = "pi_6")]
    pub focal_angle_rad: f64,
    #[serde(default = "bs_focal_distance")]
    pub focal_distance_m: f64,
    #[serde(default = "phase_only")]
    pub weights: WeightsChoice,
    #[serde(default = "grid_angles")]
    pub grid_angles: usize,
    #[serde(default = "grid_distances")]
    pub grid_distances: usize,
    /// Subcarriers with a gain map in the output, spread evenly over the band.
    #[serde(default = "map_subcarriers")]
    pub map_subcarriers: usize,
}
fn array_length_m() -> f64 {
    2.74
}
fn fractional_bandwidth() -> f64 {
    DEFAULT_FRACTIONAL_BANDWIDTH
}
fn subcarriers() -> usize {
    DEFAULT_SUBCARRIERS
}
fn pi_6() -> f64 {
    FRAC_PI_6
}
fn bs_focal_distance() -> f64 {
    50.0
}
fn phase_only() -> WeightsChoice {
    WeightsChoice::PhaseOnly
}
fn grid_angles() -> usize {
    DEFAULT_GRID_ANGLES
}
fn grid_distances() -> usize {
    DEFAULT_GRID_DISTANCES
}
fn map_subcarriers() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainMapParams {
    #[serde(default = "f28ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "gm_elements")]
    pub elements: usize,
    #[serde(default = "half")]
    pub element_spacing_wavelengths: f64,
    #[serde(default = "zero")]
    pub focal_angle_rad: f64,
    #[serde(default = "gm_focal_distance")]
    pub focal_distance_m: f64,
    #[serde(default = "grid_angles")]
    pub grid_angles: usize,
    #[serde(default = "grid_distances")]
    pub grid_distances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization_bits: Option<u32>,
}
fn gm_elements() -> usize {
    256
}
fn gm_focal_distance() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DofDistanceParams {
    #[serde(default = "f300ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "tx_elements")]
    pub tx_elements: usize,
    #[serde(default = "rx_elements")]
    pub rx_elements: usize,
    #[serde(default = "zero")]
    pub rx_angle_rad: f64,
    #[serde(default = "facing")]
    pub rx_orientation: Orientation,
    #[serde(default = "zero")]
    pub rx_self_rotation_rad: f64,
    #[serde(default = "free_space")]
    pub amplitude: Amplitude,
    #[serde(default = "energy_loss")]
    pub energy_loss: f64,
    #[serde(default = "distance_min_m")]
    pub distance_min_m: f64,
    #[serde(default = "distance_max_m")]
    pub distance_max_m: f64,
    /// Points of the logarithmic distance grid.
    #[serde(default = "distance_points")]
    pub distance_points: usize,
}
fn tx_elements() -> usize {
    1024
}
fn rx_elements() -> usize {
    16
}
fn distance_min_m() -> f64 {
    0.5
}
fn distance_max_m() -> f64 {
    30.0
}
fn distance_points() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DofApertureParams {
    #[serde(default = "f300ghz")]
    pub carrier_frequency_hz: f64,
    /// TX element counts (half-wavelength ULAs) to sweep.
    #[serde(default = "aperture_sweep_elements")]
    pub tx_elements: Vec<usize>,
    #[serde(default = "rx_elements")]
    pub rx_elements: usize,
    #[serde(default = "da_distance")]
    pub distance_m: f64,
    #[serde(default = "zero")]
    pub rx_angle_rad: f64,
    #[serde(default = "facing")]
    pub rx_orientation: Orientation,
    #[serde(default = "zero")]
    pub rx_self_rotation_rad: f64,
    #[serde(default = "free_space")]
    pub amplitude: Amplitude,
    #[serde(default = "energy_loss")]
    pub energy_loss: f64,
}
fn da_distance() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateParams {
    #[serde(default = "f28ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "gm_elements")]
    pub elements: usize,
    #[serde(default = "unit")]
    pub amplitude: Amplitude,
    #[serde(default = "polar")]
    pub dictionary: DictionaryChoice,
    #[serde(default = "beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_samples: Option<usize>,
    /// Atoms to select; the number of paths if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    #[serde(default = "residual_tol")]
    pub residual_tol: f64,
    /// Rows of a subsampled DFT sensing matrix; full observation if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilots: Option<usize>,
    /// Per-observation SNR; noiseless if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub paths: Vec<SourceSpec>,
}
fn residual_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositioningParams {
    #[serde(default = "f300ghz")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "elements_per_ap")]
    pub elements_per_ap: usize,
    #[serde(default = "half")]
    pub element_spacing_wavelengths: f64,
    /// Range-measurement variance in dB relative to 1 m².
    #[serde(default = "noise_db_m2")]
    pub noise_db_m2: f64,
    #[serde(default = "trials")]
    pub trials: usize,
    #[serde(default = "three")]
    pub user_x_m: f64,
    #[serde(default = "three")]
    pub user_y_m: f64,
    #[serde(default = "linearized")]
    pub estimator: EstimatorChoice,
}
fn elements_per_ap() -> usize {
    64
}
fn noise_db_m2() -> f64 {
    15.0
}
fn trials() -> usize {
    10_000
}
fn three() -> f64 {
    3.0
}
fn linearized() -> EstimatorChoice {
    EstimatorChoice::Linearized
}

/// Parameters of the selected experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Boundaries(BoundariesParams),
    PowerProfile(PowerProfileParams),
    AngularSpread(AngularSpreadParams),
    Beamsplit(BeamsplitParams),
    GainMap(GainMapParams),
    DofDistance(DofDistanceParams),
    DofAperture(DofApertureParams),
    Estimate(EstimateParams),
    Positioning(PositioningParams),
}

impl Parameters {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Parameters::Boundaries(_) => ExperimentKind::Boundaries,
            Parameters::PowerProfile(_) => ExperimentKind::PowerProfile,
            Parameters::AngularSpread(_) => ExperimentKind::AngularSpread,
            Parameters::Beamsplit(_) => ExperimentKind::Beamsplit,
            Parameters::GainMap(_) => ExperimentKind::GainMap,
            Parameters::DofDistance(_) => ExperimentKind::DofDistance,
            Parameters::DofAperture(_) => ExperimentKind::DofAperture,
            Parameters::Estimate(_) => ExperimentKind::Estimate,
            Parameters::Positioning(_) => ExperimentKind::Positioning,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub output_path: Option<String>,
    pub parameters: Parameters,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.parameters.kind()
    }

    /// Whether the experiment draws random numbers and therefore needs a seed.
    pub fn is_randomized(&self) -> bool {
        match &self.parameters {
            Parameters::Positioning(_) => true,
            Parameters::Estimate(p) => p.pilots.is_some() || p.snr_db.is_some(),
            _ => false,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundaries: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power_profile: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angular_spread: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beamsplit: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain_map: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dof_distance: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dof_aperture: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    estimate: Option<toml::Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positioning: Option<toml::Table>,
}

impl RawConfig {
    fn section(&self, kind: ExperimentKind) -> Option<&toml::Table> {
        match kind {
            ExperimentKind::Boundaries => self.boundaries.as_ref(),
            ExperimentKind::PowerProfile => self.power_profile.as_ref(),
            ExperimentKind::AngularSpread => self.angular_spread.as_ref(),
            ExperimentKind::Beamsplit => self.beamsplit.as_ref(),
            ExperimentKind::GainMap => self.gain_map.as_ref(),
            ExperimentKind::DofDistance => self.dof_distance.as_ref(),
            ExperimentKind::DofAperture => self.dof_aperture.as_ref(),
            ExperimentKind::Estimate => self.estimate.as_ref(),
            ExperimentKind::Positioning => self.positioning.as_ref(),
        }
    }

    fn section_mut(&mut self, kind: ExperimentKind) -> &mut Option<toml::Table> {
        match kind {
            ExperimentKind::Boundaries => &mut self.boundaries,
            ExperimentKind::PowerProfile => &mut self.power_profile,
            ExperimentKind::AngularSpread => &mut self.angular_spread,
            ExperimentKind::Beamsplit => &mut self.beamsplit,
            ExperimentKind::GainMap => &mut self.gain_map,
            ExperimentKind::DofDistance => &mut self.dof_distance,
            ExperimentKind::DofAperture => &mut self.dof_aperture,
            ExperimentKind::Estimate => &mut self.estimate,
            ExperimentKind::Positioning => &mut self.positioning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error{}: {message}", at_line(*line))]
    Syntax { line: Option<usize>, message: String },
    #[error("unknown key `{key}`{}", at_line(*line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("missing key `{key}`{}", at_line(*line))]
    MissingKey { key: String, line: Option<usize> },
    #[error("unit violation for `{key}`{}: {message}", at_line(*line))]
    UnitViolation {
        key: String,
        line: Option<usize>,
        message: String,
    },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::MissingKey { line, .. }
            | ConfigError::UnitViolation { line, .. } => *line,
        }
    }

    /// The key a diagnostic refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey { key, .. }
            | ConfigError::MissingKey { key, .. }
            | ConfigError::UnitViolation { key, .. } => Some(key),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Line (1-based) of `key = ...` inside `[section]` (or any of its
/// sub-tables), or at the top level when `section` is `None`.
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            continue;
        }
        let in_scope = match (section, &current) {
            (None, None) => true,
            (Some(s), Some(c)) => c == s || c.starts_with(&format!("{s}.")),
            _ => false,
        };
        if !in_scope {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

fn section_line(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map(|i| i + 1)
}

fn de_error(text: &str, e: toml::de::Error, section: Option<&str>) -> ConfigError {
    let message = e.message().to_string();
    let line = e.span().map(|s| line_of_offset(text, s.start));
    if message.starts_with("unknown field") {
        let key = backticked(&message).unwrap_or_default();
        let line = line.or_else(|| locate(text, section, &key));
        let key = match section {
            Some(s) => format!("{s}.{key}"),
            None => key,
        };
        ConfigError::UnknownKey { key, line }
    } else if message.starts_with("missing field") {
        let key = backticked(&message).unwrap_or_default();
        let key = match section {
            Some(s) => format!("{s}.{key}"),
            None => key,
        };
        ConfigError::MissingKey { key, line }
    } else {
        ConfigError::Syntax { line, message }
    }
}

/// Deserializes the selected experiment's section from the full document so
/// error spans point into the original text.
macro_rules! section_parser {
    ($fn_name:ident, $field:ident, $ty:ty) => {
        fn $fn_name(text: &str) -> Result<$ty, ConfigError> {
            #[derive(Deserialize)]
            struct Doc {
                $field: Option<$ty>,
            }
            let doc: Doc = toml::from_str(text).map_err(|e| de_error(text, e, Some(stringify!($field))))?;
            match doc.$field {
                Some(p) => Ok(p),
                None => toml::from_str("").map_err(|e| de_error(text, e, Some(stringify!($field)))),
            }
        }
    };
}

section_parser!(parse_boundaries, boundaries, BoundariesParams);
section_parser!(parse_power_profile, power_profile, PowerProfileParams);
section_parser!(parse_angular_spread, angular_spread, AngularSpreadParams);
section_parser!(parse_beamsplit, beamsplit, BeamsplitParams);
section_parser!(parse_gain_map, gain_map, GainMapParams);
section_parser!(parse_dof_distance, dof_distance, DofDistanceParams);
section_parser!(parse_dof_aperture, dof_aperture, DofApertureParams);
section_parser!(parse_estimate, estimate, EstimateParams);
section_parser!(parse_positioning, positioning, PositioningParams);

struct Violation {
    key: String,
    message: String,
}

fn violation(key: &str, message: impl Into<String>) -> Violation {
    Violation {
        key: key.to_string(),
        message: message.into(),
    }
}

type Check = Result<(), Violation>;

fn positive(key: &str, v: f64) -> Check {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(violation(key, format!("must be a positive finite number, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Check {
    if v.is_finite() {
        Ok(())
    } else {
        Err(violation(key, format!("must be finite, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Check {
    if v >= min {
        Ok(())
    } else {
        Err(violation(key, format!("must be at least {min}, got {v}")))
    }
}

fn angle_in_half_plane(key: &str, v: f64) -> Check {
    if v.is_finite() && v.abs() < std::f64::consts::FRAC_PI_2 {
        Ok(())
    } else {
        Err(violation(key, format!("must lie in (-pi/2, pi/2) rad, got {v}")))
    }
}

fn fraction(key: &str, v: f64) -> Check {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(violation(key, format!("must lie in (0, 1), got {v}")))
    }
}

fn sources(prefix: &str, list: &[SourceSpec]) -> Check {
    for s in list {
        angle_in_half_plane(&format!("{prefix}.angle_rad"), s.angle_rad)?;
        positive(&format!("{prefix}.distance_m"), s.distance_m)?;
        finite(&format!("{prefix}.gain_re"), s.gain_re)?;
        finite(&format!("{prefix}.gain_im"), s.gain_im)?;
    }
    Ok(())
}

fn validate(p: &Parameters) -> Check {
    match p {
        Parameters::Boundaries(b) => {
            positive("carrier_frequency_hz", b.carrier_frequency_hz)?;
            positive("aperture_m", b.aperture_m)?;
            positive("upd_threshold_db", b.upd_threshold_db)?;
            positive("element_spacing_wavelengths", b.element_spacing_wavelengths)
        }
        Parameters::PowerProfile(p) => {
            positive("carrier_frequency_hz", p.carrier_frequency_hz)?;
            at_least("elements", p.elements, 1)?;
            positive("element_spacing_wavelengths", p.element_spacing_wavelengths)?;
            if p.los.is_none() && p.scatterers.is_empty() {
                return Err(violation("scatterers", "need a scatterer or a los path"));
            }
            if let Some(los) = &p.los {
                sources("los", std::slice::from_ref(los))?;
            }
            for s in &p.scatterers {
                angle_in_half_plane("scatterers.angle_rad", s.angle_rad)?;
                positive("scatterers.distance_m", s.distance_m)?;
                finite("scatterers.gain_re", s.gain_re)?;
                finite("scatterers.gain_im", s.gain_im)?;
                let end = s.visible_to.unwrap_or(p.elements);
                if !(s.visible_from < end && end <= p.elements) {
                    return Err(violation(
                        "scatterers.visible_to",
                        format!(
                            "visible range {}..{end} must be non-empty within {} elements",
                            s.visible_from, p.elements
                        ),
                    ));
                }
            }
            Ok(())
        }
        Parameters::AngularSpread(a) => {
            positive("carrier_frequency_hz", a.carrier_frequency_hz)?;
            at_least("elements", a.elements, 2)?;
            positive("beta", a.beta)?;
            if let Some(n) = a.angle_samples {
                at_least("angle_samples", n, 1)?;
            }
            if a.sources.is_empty() {
                return Err(violation("sources", "need at least one source"));
            }
            sources("sources", &a.sources)
        }
        Parameters::Beamsplit(b) => {
            positive("carrier_frequency_hz", b.carrier_frequency_hz)?;
            positive("array_length_m", b.array_length_m)?;
            fraction("fractional_bandwidth", b.fractional_bandwidth)?;
            at_least("subcarriers", b.subcarriers, 2)?;
            angle_in_half_plane("focal_angle_rad", b.focal_angle_rad)?;
            positive("focal_distance_m", b.focal_distance_m)?;
            at_least("grid_angles", b.grid_angles, 2)?;
            at_least("grid_distances", b.grid_distances, 2)?;
            at_least("map_subcarriers", b.map_subcarriers, 1)?;
            if b.map_subcarriers > b.subcarriers {
                return Err(violation("map_subcarriers", "cannot exceed subcarriers"));
            }
            Ok(())
        }
        Parameters::GainMap(g) => {
            positive("carrier_frequency_hz", g.carrier_frequency_hz)?;
            at_least("elements", g.elements, 2)?;
            positive("element_spacing_wavelengths", g.element_spacing_wavelengths)?;
            angle_in_half_plane("focal_angle_rad", g.focal_angle_rad)?;
            positive("focal_distance_m", g.focal_distance_m)?;
            at_least("grid_angles", g.grid_angles, 2)?;
            at_least("grid_distances", g.grid_distances, 2)?;
            if let Some(b) = g.quantization_bits {
                at_least("quantization_bits", b as usize, 1)?;
            }
            Ok(())
        }
        Parameters::DofDistance(d) => {
            positive("carrier_frequency_hz", d.carrier_frequency_hz)?;
            at_least("tx_elements", d.tx_elements, 1)?;
            at_least("rx_elements", d.rx_elements, 1)?;
            link_checks(d.rx_angle_rad, d.rx_self_rotation_rad, d.energy_loss)?;
            positive("distance_min_m", d.distance_min_m)?;
            positive("distance_max_m", d.distance_max_m)?;
            if d.distance_max_m < d.distance_min_m {
                return Err(violation("distance_max_m", "must not be below distance_min_m"));
            }
            at_least("distance_points", d.distance_points, 1)
        }
        Parameters::DofAperture(d) => {
            positive("carrier_frequency_hz", d.carrier_frequency_hz)?;
            if d.tx_elements.is_empty() || d.tx_elements.contains(&0) {
                return Err(violation("tx_elements", "must be a non-empty list of positive counts"));
            }
            at_least("rx_elements", d.rx_elements, 1)?;
            positive("distance_m", d.distance_m)?;
            link_checks(d.rx_angle_rad, d.rx_self_rotation_rad, d.energy_loss)
        }
        Parameters::Estimate(e) => {
            positive("carrier_frequency_hz", e.carrier_frequency_hz)?;
            at_least("elements", e.elements, 2)?;
            positive("beta", e.beta)?;
            if let Some(n) = e.angle_samples {
                at_least("angle_samples", n, 1)?;
            }
            if let Some(s) = e.sparsity {
                at_least("sparsity", s, 1)?;
            }
            if !(e.residual_tol >= 0.0 && e.residual_tol.is_finite()) {
                return Err(violation("residual_tol", "must be a non-negative finite number"));
            }
            if let Some(m) = e.pilots {
                at_least("pilots", m, 1)?;
                if m > e.elements {
                    return Err(violation("pilots", "cannot exceed elements"));
                }
            }
            if let Some(s) = e.snr_db {
                finite("snr_db", s)?;
            }
            if e.paths.is_empty() {
                return Err(violation("paths", "need at least one path"));
            }
            sources("paths", &e.paths)
        }
        Parameters::Positioning(p) => {
            positive("carrier_frequency_hz", p.carrier_frequency_hz)?;
            at_least("elements_per_ap", p.elements_per_ap, 1)?;
            positive("element_spacing_wavelengths", p.element_spacing_wavelengths)?;
            finite("noise_db_m2", p.noise_db_m2)?;
            at_least("trials", p.trials, 1)?;
            finite("user_x_m", p.user_x_m)?;
            finite("user_y_m", p.user_y_m)
        }
    }
}

fn link_checks(rx_angle: f64, self_rotation: f64, energy_loss: f64) -> Check {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&rx_angle) {
        return Err(violation(
            "rx_angle_rad",
            format!("must lie in [0, pi/2) rad, got {rx_angle}"),
        ));
    }
    finite("rx_self_rotation_rad", self_rotation)?;
    fraction("energy_loss", energy_loss)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| de_error(text, e, None))?;
    let kind = raw.experiment.ok_or(ConfigError::MissingKey {
        key: "experiment".into(),
        line: None,
    })?;
    for other in ExperimentKind::ALL.into_iter().filter(|k| *k != kind) {
        if raw.section(other).is_some() {
            return Err(ConfigError::UnknownKey {
                key: other.as_str().into(),
                line: section_line(text, other.as_str()),
            });
        }
    }
    let parameters = match kind {
        ExperimentKind::Boundaries => Parameters::Boundaries(parse_boundaries(text)?),
        ExperimentKind::PowerProfile => Parameters::PowerProfile(parse_power_profile(text)?),
        ExperimentKind::AngularSpread => Parameters::AngularSpread(parse_angular_spread(text)?),
        ExperimentKind::Beamsplit => Parameters::Beamsplit(parse_beamsplit(text)?),
        ExperimentKind::GainMap => Parameters::GainMap(parse_gain_map(text)?),
        ExperimentKind::DofDistance => Parameters::DofDistance(parse_dof_distance(text)?),
        ExperimentKind::DofAperture => Parameters::DofAperture(parse_dof_aperture(text)?),
        ExperimentKind::Estimate => Parameters::Estimate(parse_estimate(text)?),
        ExperimentKind::Positioning => Parameters::Positioning(parse_positioning(text)?),
    };
    validate(&parameters).map_err(|v| {
        let leaf = v.key.rsplit('.').next().unwrap_or(&v.key);
        let scope = match v.key.rsplit_once('.') {
            Some((head, _)) => format!("{kind}.{head}"),
            None => kind.as_str().to_string(),
        };
        ConfigError::UnitViolation {
            line: locate(text, Some(&scope), leaf),
            key: format!("{kind}.{}", v.key),
            message: v.message,
        }
    })?;
    Ok(ExperimentConfig {
        seed: raw.seed,
        output_path: raw.output_path,
        parameters,
    })
}

fn to_table<T: Serialize>(p: &T) -> toml::Table {
    match toml::Value::try_from(p).expect("parameters serialize to a table") {
        toml::Value::Table(t) => t,
        _ => unreachable!("parameter structs serialize to tables"),
    }
}

/// Canonical text of a config with every default spelled out.
pub fn serialize_config(config: &ExperimentConfig) -> String {
    let kind = config.kind();
    let mut raw = RawConfig {
        experiment: Some(kind),
        seed: config.seed,
        output_path: config.output_path.clone(),
        ..RawConfig::default()
    };
    let table = match &config.parameters {
        Parameters::Boundaries(p) => to_table(p),
        Parameters::PowerProfile(p) => to_table(p),
        Parameters::AngularSpread(p) => to_table(p),
        Parameters::Beamsplit(p) => to_table(p),
        Parameters::GainMap(p) => to_table(p),
        Parameters::DofDistance(p) => to_table(p),
        Parameters::DofAperture(p) => to_table(p),
        Parameters::Estimate(p) => to_table(p),
        Parameters::Positioning(p) => to_table(p),
    };
    *raw.section_mut(kind) = Some(table);
    toml::to_string(&raw).expect("config serializes")
}

/// `serialize_config(parse_config(text))`.
pub fn normalize_config(text: &str) -> Result<String, ConfigError> {
    parse_config(text).map(|c| serialize_config(&c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_finds_keys_in_sections() {
        let text = "experiment = \"boundaries\"\n[boundaries]\naperture_m = 1\ncarrier_frequency_hz = 2\n";
        assert_eq!(locate(text, Some("boundaries"), "carrier_frequency_hz"), Some(4));
        assert_eq!(locate(text, None, "experiment"), Some(1));
        assert_eq!(locate(text, None, "aperture_m"), None);
    }

    #[test]
    fn every_experiment_has_a_name() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::from_name(k.as_str()), Some(k));
        }
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let c = parse_config("experiment = \"dof_distance\"\n").unwrap();
        match c.parameters {
            Parameters::DofDistance(d) => {
                assert_eq!(d.tx_elements, 1024);
                assert_eq!(d.rx_orientation, Orientation::FacingTx);
            }
            other => panic!("wrong parameters {other:?}"),
        }
    }
}
