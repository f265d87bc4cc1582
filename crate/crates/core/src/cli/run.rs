//! Experiment dispatch: one module operation chain per experiment.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::*;
use super::table::{Cell, ResultTable};
use crate::beamfocus::{focus_gain_map, focusing_beamformer, log_grid, ttd_beamformer, FocalPoint, GainGrid, GainMap};
use crate::channel::{multipath_channel, nearfield_steering, power_profile, ChannelVector, Scatterer};
use crate::codebook::{
    fourier_dictionary, nmse_db, omp_estimate, polar_dictionary, transform_coefficients, Dictionary, Sensing,
};
use crate::dof::{dof_vs_aperture, dof_vs_distance, DofSweepResult, LinkConfig};
use crate::error::NfError;
use crate::geometry::{uniform_power_distance, ArrayGeometry, CarrierConfig, FieldBoundaries, SPEED_OF_LIGHT};
use crate::positioning::{positioning_experiment, square_room_access_points, trial_seed, variance_from_db};
use crate::Point2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{experiment}: {source}")]
    Model {
        experiment: ExperimentKind,
        #[source]
        source: NfError,
    },
    #[error("{experiment} needs a seed (set `seed` or pass --seed)")]
    MissingSeed { experiment: ExperimentKind },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 for configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Model {
                source: NfError::NumericalFailure { .. },
                ..
            } => 2,
            _ => 1,
        }
    }
}

/// Result of one experiment: the main table and, for some experiments, a
/// one-row summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub summary: Option<ResultTable>,
}

/// Path of the summary CSV written next to `path`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_summary.{ext}"),
        None => format!("{stem}_summary"),
    };
    path.with_file_name(name)
}

/// Writes the table (and summary, if any) as CSV.
pub fn write_output(output: &ExperimentOutput, path: &Path) -> Result<(), RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    std::fs::write(path, output.table.to_csv()).map_err(io(path))?;
    if let Some(summary) = &output.summary {
        let sp = summary_path(path);
        std::fs::write(&sp, summary.to_csv()).map_err(io(&sp))?;
    }
    Ok(())
}

/// Runs the experiment and writes CSV to `output_path` when one is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    let kind = config.kind();
    if config.is_randomized() && config.seed.is_none() {
        return Err(RunError::MissingSeed { experiment: kind });
    }
    let seed = config.seed.unwrap_or(0);
    let output = dispatch(&config.parameters, seed).map_err(|source| RunError::Model {
        experiment: kind,
        source,
    })?;
    if let Some(path) = &config.output_path {
        write_output(&output, Path::new(path))?;
    }
    Ok(output)
}

type Res<T> = crate::Result<T>;

fn dispatch(p: &Parameters, seed: u64) -> Res<ExperimentOutput> {
    let table = |table| ExperimentOutput { table, summary: None };
    match p {
        Parameters::Boundaries(b) => boundaries(b).map(table),
        Parameters::PowerProfile(pp) => power_profile_table(pp).map(table),
        Parameters::AngularSpread(a) => angular_spread(a).map(table),
        Parameters::Beamsplit(b) => beamsplit(b).map(table),
        Parameters::GainMap(g) => gain_map(g).map(table),
        Parameters::DofDistance(d) => dof_distance(d).map(table),
        Parameters::DofAperture(d) => dof_aperture(d).map(table),
        Parameters::Estimate(e) => estimate(e, seed),
        Parameters::Positioning(pp) => positioning(pp, seed),
    }
}

fn wavelength(f: f64) -> f64 {
    SPEED_OF_LIGHT / f
}

fn boundaries(b: &BoundariesParams) -> Res<ResultTable> {
    let lam = wavelength(b.carrier_frequency_hz);
    let fb = FieldBoundaries::new(b.aperture_m, lam)?;
    let spacing = b.element_spacing_wavelengths * lam;
    let n = (b.aperture_m / spacing).round() + 1.0;
    if n > 1e6 {
        return Err(NfError::invalid(format!(
            "uniform-power distance needs a {n} element array; increase element_spacing_wavelengths"
        )));
    }
    let g = ArrayGeometry::ula(n as usize, b.aperture_m / (n - 1.0).max(1.0))?;
    let upd = uniform_power_distance(&g, lam, b.upd_threshold_db)?;
    let mut t = ResultTable::new([
        "aperture_m",
        "wavelength_m",
        "rayleigh_m",
        "fresnel_m",
        "reactive_limit_m",
        "uniform_power_m",
        "uniform_power_capped",
    ]);
    t.push(vec![
        b.aperture_m.into(),
        lam.into(),
        fb.rayleigh_m.into(),
        fb.fresnel_m.into(),
        fb.reactive_limit_m.into(),
        upd.distance_m.into(),
        Cell::Int(upd.capped() as i64),
    ])?;
    Ok(t)
}

fn complex(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn power_profile_table(p: &PowerProfileParams) -> Res<ResultTable> {
    let lam = wavelength(p.carrier_frequency_hz);
    let g = ArrayGeometry::ula(p.elements, p.element_spacing_wavelengths * lam)?;
    let scatterers: Vec<Scatterer> = p
        .scatterers
        .iter()
        .map(|s| {
            Scatterer::new(
                g.point_at(s.angle_rad, s.distance_m),
                complex(s.gain_re, s.gain_im),
                s.visible_from..s.visible_to.unwrap_or(p.elements),
            )
        })
        .collect();
    let los = p.los.as_ref().map(|s| g.point_at(s.angle_rad, s.distance_m));
    let h = multipath_channel(&g, &scatterers, lam, p.amplitude.into(), los.as_ref())?;
    let mut t = ResultTable::new(["element_index", "power_db"]);
    for (i, pw) in power_profile(&h).into_iter().enumerate() {
        t.push(vec![i.into(), pw.into()])?;
    }
    Ok(t)
}

fn dictionary(
    choice: DictionaryChoice,
    g: &ArrayGeometry,
    lam: f64,
    beta: f64,
    angles: Option<usize>,
) -> Res<Dictionary> {
    match choice {
        DictionaryChoice::Fourier => fourier_dictionary(g.len()),
        DictionaryChoice::Polar => polar_dictionary(g, lam, beta, angles.unwrap_or(g.len())),
    }
}

fn sum_of_sources(g: &ArrayGeometry, lam: f64, sources: &[SourceSpec], amplitude: Amplitude) -> Res<ChannelVector> {
    let mut h = DVector::<Complex64>::zeros(g.len());
    for s in sources {
        let a = nearfield_steering(g, &g.point_at(s.angle_rad, s.distance_m), lam, amplitude.into())?;
        h += a.0 * complex(s.gain_re, s.gain_im);
    }
    Ok(ChannelVector(h))
}

fn magnitude_db(z: Complex64) -> f64 {
    let m = z.norm();
    if m > 0.0 {
        20.0 * m.log10()
    } else {
        f64::NEG_INFINITY
    }
}

fn angular_spread(a: &AngularSpreadParams) -> Res<ResultTable> {
    let lam = wavelength(a.carrier_frequency_hz);
    let g = ArrayGeometry::ula(a.elements, lam / 2.0)?;
    let dict = dictionary(a.dictionary, &g, lam, a.beta, a.angle_samples)?;
    let h = sum_of_sources(&g, lam, &a.sources, a.amplitude)?;
    let coeffs = transform_coefficients(&h, &dict)?;
    let mut t = ResultTable::new(["atom_index", "angle", "distance", "magnitude_db"]);
    for (m, (gp, c)) in dict.grid().iter().zip(coeffs.iter()).enumerate() {
        t.push(vec![
            m.into(),
            gp.angle.into(),
            gp.distance.into(),
            magnitude_db(*c).into(),
        ])?;
    }
    Ok(t)
}

fn push_map(t: &mut ResultTable, map: &GainMap, frequency_hz: f64) -> Res<()> {
    for (i, &theta) in map.angles.iter().enumerate() {
        for (j, &r) in map.distances.iter().enumerate() {
            t.push(vec![theta.into(), r.into(), map.at(i, j).into(), frequency_hz.into()])?;
        }
    }
    Ok(())
}

fn gain_map_header() -> ResultTable {
    ResultTable::new(["angle_rad", "distance_m", "gain_db", "subcarrier_hz"])
}

fn beamsplit(b: &BeamsplitParams) -> Res<ResultTable> {
    let carrier = CarrierConfig::wideband(b.carrier_frequency_hz, b.fractional_bandwidth, b.subcarriers)?;
    let lam = wavelength(b.carrier_frequency_hz);
    let n = (b.array_length_m / (lam / 2.0)).round() as usize + 1;
    let g = ArrayGeometry::ula(n, b.array_length_m / (n as f64 - 1.0))?;
    let focal = FocalPoint::new(b.focal_angle_rad, b.focal_distance_m);
    let w = match b.weights {
        WeightsChoice::PhaseOnly => focusing_beamformer(focal, &g, b.carrier_frequency_hz)?,
        WeightsChoice::TimeDelay => ttd_beamformer(focal, &g, &carrier)?,
    };
    let grid = GainGrid::near_field(&g, lam, b.grid_angles, b.grid_distances)?;
    let subs = carrier.subcarriers().expect("wideband carrier");
    let k = b.map_subcarriers;
    let picks: Vec<usize> = if k == 1 {
        vec![subs.len() / 2]
    } else {
        (0..k).map(|i| (i * (subs.len() - 1) + (k - 1) / 2) / (k - 1)).collect()
    };
    let mut t = gain_map_header();
    for i in picks {
        let f = subs[i];
        push_map(&mut t, &focus_gain_map(&w, &g, wavelength(f), &grid)?, f)?;
    }
    Ok(t)
}

fn gain_map(p: &GainMapParams) -> Res<ResultTable> {
    let lam = wavelength(p.carrier_frequency_hz);
    let g = ArrayGeometry::ula(p.elements, p.element_spacing_wavelengths * lam)?;
    let mut w = focusing_beamformer(
        FocalPoint::new(p.focal_angle_rad, p.focal_distance_m),
        &g,
        p.carrier_frequency_hz,
    )?;
    if let Some(bits) = p.quantization_bits {
        w = w.quantized(bits)?;
    }
    let grid = GainGrid::near_field(&g, lam, p.grid_angles, p.grid_distances)?;
    let mut t = gain_map_header();
    push_map(&mut t, &focus_gain_map(&w, &g, lam, &grid)?, p.carrier_frequency_hz)?;
    Ok(t)
}

fn sweep_table(sweep: &DofSweepResult, n_sv: usize) -> Res<ResultTable> {
    let mut header = vec!["sweep_value".to_string(), "dof".to_string()];
    header.extend((1..=n_sv).map(|i| format!("sv_{i}")));
    let mut t = ResultTable::new(header);
    for p in &sweep.points {
        let mut row = vec![p.value.into(), p.dof.into()];
        // rank-limited points have fewer singular values; the rest are zero
        row.extend((0..n_sv).map(|i| Cell::Float(p.singular_values.get(i).copied().unwrap_or(0.0))));
        t.push(row)?;
    }
    Ok(t)
}

fn link(
    f: f64,
    rx_angle: f64,
    orientation: Orientation,
    self_rotation: f64,
    amplitude: Amplitude,
    energy_loss: f64,
) -> LinkConfig {
    LinkConfig {
        wavelength_m: wavelength(f),
        rx_angle,
        orientation: orientation.into(),
        rx_self_rotation: self_rotation,
        amplitude: amplitude.into(),
        energy_loss,
    }
}

fn dof_distance(d: &DofDistanceParams) -> Res<ResultTable> {
    let lam = wavelength(d.carrier_frequency_hz);
    let tx = ArrayGeometry::ula(d.tx_elements, lam / 2.0)?;
    let rx = ArrayGeometry::ula(d.rx_elements, lam / 2.0)?;
    let cfg = link(
        d.carrier_frequency_hz,
        d.rx_angle_rad,
        d.rx_orientation,
        d.rx_self_rotation_rad,
        d.amplitude,
        d.energy_loss,
    );
    let distances = log_grid(d.distance_min_m, d.distance_max_m, d.distance_points);
    let sweep = dof_vs_distance(&tx, &rx, &distances, &cfg)?;
    sweep_table(&sweep, d.tx_elements.min(d.rx_elements))
}

fn dof_aperture(d: &DofApertureParams) -> Res<ResultTable> {
    let lam = wavelength(d.carrier_frequency_hz);
    let rx = ArrayGeometry::ula(d.rx_elements, lam / 2.0)?;
    let cfg = link(
        d.carrier_frequency_hz,
        d.rx_angle_rad,
        d.rx_orientation,
        d.rx_self_rotation_rad,
        d.amplitude,
        d.energy_loss,
    );
    let sweep = dof_vs_aperture(&d.tx_elements, &rx, d.distance_m, &cfg)?;
    let max_tx = d.tx_elements.iter().copied().max().unwrap_or(1);
    sweep_table(&sweep, max_tx.min(d.rx_elements))
}

fn estimate(e: &EstimateParams, seed: u64) -> Res<ExperimentOutput> {
    let lam = wavelength(e.carrier_frequency_hz);
    let g = ArrayGeometry::ula(e.elements, lam / 2.0)?;
    let dict = dictionary(e.dictionary, &g, lam, e.beta, e.angle_samples)?;
    let h = sum_of_sources(&g, lam, &e.paths, e.amplitude)?;
    let sensing = match e.pilots {
        Some(m) => Sensing::subsampled_dft(e.elements, m, trial_seed(seed, 0))?,
        None => Sensing::Identity(e.elements),
    };
    let mut y = sensing.observe(&h)?;
    if let Some(snr_db) = e.snr_db {
        let signal = y.norm_squared() / y.len() as f64;
        let sigma = (signal / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|err| NfError::invalid(err.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, 1));
        for z in y.iter_mut() {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    let sparsity = e.sparsity.unwrap_or(e.paths.len());
    let est = omp_estimate(&y, &sensing, &dict, sparsity, e.residual_tol)?;
    let mut t = ResultTable::new([
        "iteration",
        "atom_index",
        "angle",
        "distance",
        "magnitude_db",
        "residual_norm",
    ]);
    for (i, (&m, c)) in est.support.iter().zip(&est.coefficients).enumerate() {
        let gp = dict.grid()[m];
        t.push(vec![
            (i + 1).into(),
            m.into(),
            gp.angle.into(),
            gp.distance.into(),
            magnitude_db(*c).into(),
            est.residual_norms[i + 1].into(),
        ])?;
    }
    let mut summary = ResultTable::new(["nmse_db", "atoms"]);
    summary.push(vec![nmse_db(&est.reconstructed, &h).into(), est.support.len().into()])?;
    Ok(ExperimentOutput {
        table: t,
        summary: Some(summary),
    })
}

fn positioning(p: &PositioningParams, seed: u64) -> Res<ExperimentOutput> {
    let spacing = p.element_spacing_wavelengths * wavelength(p.carrier_frequency_hz);
    let aps = square_room_access_points(p.elements_per_ap, spacing)?;
    let result = positioning_experiment(
        Point2::new(p.user_x_m, p.user_y_m),
        &aps,
        variance_from_db(p.noise_db_m2),
        p.trials,
        seed,
        p.estimator.into(),
    )?;
    let mut t = ResultTable::new(["trial", "x_m", "y_m"]);
    for (i, e) in result.estimates.iter().enumerate() {
        t.push(vec![i.into(), e.x.into(), e.y.into()])?;
    }
    let mut summary = ResultTable::new(["cep_m", "mean_x", "mean_y"]);
    summary.push(vec![
        result.cep_m.into(),
        result.mean_estimate.x.into(),
        result.mean_estimate.y.into(),
    ])?;
    Ok(ExperimentOutput {
        table: t,
        summary: Some(summary),
    })
}
