//! Acceptance criteria, shared by the `acceptance` test target and the
//! `nfkit self-check` command.
//!
//! Each criterion returns a [`CriterionOutcome`]; thresholds are fixed here.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};
use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beamfocus::{
    array_gain, beamsplit_gain, mrt_beamformer, ttd_beamformer, wideband_response, FocalPoint,
    DEFAULT_FRACTIONAL_BANDWIDTH, DEFAULT_SUBCARRIERS,
};
use crate::channel::{los_mimo_channel, nearfield_steering, AmplitudeModel, ChannelMatrix, ChannelVector};
use crate::codebook::{
    fourier_dictionary, nmse_db, omp_estimate, polar_dictionary, top_energy_share, transform_coefficients, Dictionary,
    Sensing, DEFAULT_BETA,
};
use crate::dof::{dof_vs_aperture, effective_dof, link_channel, rank_boost_distance, LinkConfig};
use crate::error::Result;
use crate::geometry::{
    fresnel_distance, max_phase_error, rayleigh_distance, worst_case_phase_error, ApproxOrder, ArrayGeometry,
    CarrierConfig, BOUNDARY_PHASE_ERROR, SPEED_OF_LIGHT,
};
use crate::positioning::{cep, positioning_experiment, square_room_access_points, variance_from_db, Estimator};
use crate::{Point2, Point3};

/// Trial counts for the Monte Carlo criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub positioning_trials: usize,
    pub cep_samples: usize,
}

impl Scale {
    pub const FULL: Scale = Scale {
        positioning_trials: 10_000,
        cep_samples: 100_000,
    };
    /// Reduced counts used by `self-check`.
    pub const QUICK: Scale = Scale {
        positioning_trials: 2_000,
        cep_samples: 100_000,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {} ({}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

/// Rayleigh distance implementation under test (swappable for mutation checks).
pub type RayleighFn = fn(f64, f64) -> Result<f64>;

/// The full set of criteria with a configurable scale and seed.
#[derive(Debug, Clone, Copy)]
pub struct Suite {
    pub scale: Scale,
    pub seed: u64,
    pub rayleigh: RayleighFn,
}

impl Default for Suite {
    fn default() -> Self {
        Self {
            scale: Scale::FULL,
            seed: 2024,
            rayleigh: rayleigh_distance,
        }
    }
}

struct Checks {
    passed: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes.push(if ok { note } else { format!("{note} [FAILED]") });
    }

    fn error(&mut self, what: &str, e: crate::NfError) {
        self.passed = false;
        self.notes.push(format!("{what}: error {e}"));
    }
}

fn finish(id: u8, name: &'static str, limit: Duration, start: Instant, mut c: Checks) -> CriterionOutcome {
    let elapsed = start.elapsed();
    if elapsed < limit {
        c.check(true, format!("runtime under {}s", limit.as_secs_f64()));
    } else {
        c.check(
            false,
            format!("runtime {:.3}s exceeds {}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
        );
    }
    CriterionOutcome {
        id,
        name,
        passed: c.passed,
        detail: c.notes.join("; "),
        elapsed,
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn half_wave_ula(n: usize, frequency_hz: f64) -> Result<ArrayGeometry> {
    ArrayGeometry::ula(n, SPEED_OF_LIGHT / frequency_hz / 2.0)
}

/// Element grid for the aperture sweep: every count up to 41 (about 2 cm at
/// 300 GHz), then steps of 40 up to 4096.
pub fn aperture_sweep_elements() -> Vec<usize> {
    let mut v: Vec<usize> = (1..=41).collect();
    v.extend((81..4096).step_by(40));
    v.push(4096);
    v
}

/// Length of the 2.74 m array used for the wideband criteria, as a
/// half-wavelength-or-finer ULA at `frequency_hz`.
pub fn ula_of_length(length_m: f64, frequency_hz: f64) -> Result<ArrayGeometry> {
    let n = (length_m / (SPEED_OF_LIGHT / frequency_hz / 2.0)).round() as usize + 1;
    ArrayGeometry::ula(n, length_m / (n as f64 - 1.0))
}

/// Focal point of the beam-split criteria.
pub const BEAMSPLIT_FOCAL: FocalPoint = FocalPoint {
    angle: FRAC_PI_6,
    distance: 50.0,
};

impl Suite {
    pub fn quick(seed: u64) -> Self {
        Self {
            scale: Scale::QUICK,
            seed,
            ..Self::default()
        }
    }

    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        vec![
            self.boundaries(),
            self.phase_error(),
            self.dof_distance(),
            self.dof_aperture(),
            self.positioning(),
            self.beam_split(),
            self.polar_sparsity(),
            self.properties(),
        ]
    }

    /// 1. Rayleigh-distance anchors.
    pub fn boundaries(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let lam28 = SPEED_OF_LIGHT / 28e9;
        let lam300 = SPEED_OF_LIGHT / 300e9;
        match (self.rayleigh)(2f64.sqrt(), lam28) {
            Ok(d) => c.check(
                within(d, 371.0, 376.0),
                format!("1x1 m panel @28 GHz: {d:.2} m in [371, 376]"),
            ),
            Err(e) => c.error("panel", e),
        }
        let combined = 1023.0 * lam300 / 2.0 + 15.0 * lam300 / 2.0;
        match (self.rayleigh)(combined, lam300) {
            Ok(d) => c.check(
                within(d, 533.0, 544.0),
                format!("case-study link: {d:.1} m in [533, 544]"),
            ),
            Err(e) => c.error("case study", e),
        }
        finish(1, "boundaries", Duration::from_millis(1), start, c)
    }

    /// 2. Phase error of the linear/parabolic approximations at d_R / d_F.
    pub fn phase_error(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let lam = SPEED_OF_LIGHT / 28e9;
        let band = (BOUNDARY_PHASE_ERROR * 0.85, BOUNDARY_PHASE_ERROR * 1.15);
        let run = |c: &mut Checks| -> Result<()> {
            let g = half_wave_ula(256, 28e9)?;
            let d_r = rayleigh_distance(g.aperture(), lam)?;
            let lin = max_phase_error(&g, &g.point_at(0.0, d_r), lam, ApproxOrder::Linear)?;
            c.check(
                within(lin, band.0, band.1),
                format!(
                    "linear error at d_R = {:.4} rad (pi/8 = {:.4})",
                    lin, BOUNDARY_PHASE_ERROR
                ),
            );
            let d_f = fresnel_distance(g.aperture(), lam)?;
            let (par, dir) = worst_case_phase_error(&g, d_f, lam, ApproxOrder::Parabolic)?;
            c.check(
                within(par, band.0, band.1),
                format!(
                    "parabolic error at d_F = {:.4} rad (worst direction {:.1} deg)",
                    par,
                    dir.dot(&g.axis()).asin().to_degrees()
                ),
            );
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error("phase error", e);
        }
        finish(2, "phase-error consistency", Duration::from_secs(1), start, c)
    }

    /// 3. DoF versus distance for the 1024 × 16 link at 300 GHz.
    pub fn dof_distance(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let run = |c: &mut Checks| -> Result<()> {
            let tx = half_wave_ula(1024, 300e9)?;
            let rx = half_wave_ula(16, 300e9)?;
            let link = LinkConfig::case_study(0.0);
            let near = effective_dof(&link_channel(&tx, &rx, 0.5, &link)?, link.energy_loss)?;
            c.check((7..=9).contains(&near), format!("dof(0.5 m) = {near} (8 ± 1)"));
            let far = effective_dof(&link_channel(&tx, &rx, 30.0, &link)?, link.energy_loss)?;
            c.check(far == 1, format!("dof(30 m) = {far}"));
            let boost = rank_boost_distance(&tx, &rx, &link, 0.5, 538.0, 200, 0.01)?;
            match boost {
                Some(d) => c.check(within(d, 18.1, 24.5), format!("rank boost at {d:.2} m in [18.1, 24.5]")),
                None => c.check(false, "no rank boost found".into()),
            }
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error("dof sweep", e);
        }
        finish(3, "dof vs distance", Duration::from_secs(30), start, c)
    }

    /// 4. DoF versus TX aperture at 0.7 m.
    pub fn dof_aperture(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let run = |c: &mut Checks| -> Result<()> {
            let rx = half_wave_ula(16, 300e9)?;
            let grid = aperture_sweep_elements();
            let sweeps = [0.0, FRAC_PI_6, FRAC_PI_3]
                .iter()
                .map(|&a| dof_vs_aperture(&grid, &rx, 0.7, &LinkConfig::case_study(a)))
                .collect::<Result<Vec<_>>>()?;

            let small: Vec<_> = sweeps[0].points.iter().filter(|p| p.value <= 0.02 + 1e-12).collect();
            let bad: Vec<String> = small
                .iter()
                .filter(|p| p.dof != 1)
                .map(|p| format!("{:.2} cm -> {}", p.value * 100.0, p.dof))
                .collect();
            c.check(
                bad.is_empty(),
                format!(
                    "dof = 1 for all {} apertures <= 2 cm{}",
                    small.len(),
                    if bad.is_empty() {
                        String::new()
                    } else {
                        format!(" (violations: {})", bad.join(", "))
                    }
                ),
            );

            let mut min_large = usize::MAX;
            for s in &sweeps {
                for p in s.points.iter().filter(|p| p.value >= 0.9) {
                    min_large = min_large.min(p.dof);
                }
            }
            c.check(
                min_large >= 8,
                format!("min dof for apertures >= 0.9 m over 0, pi/6, pi/3: {min_large}"),
            );

            let order_bad = sweeps[2]
                .points
                .iter()
                .zip(&sweeps[0].points)
                .filter(|(a, b)| a.dof > b.dof)
                .count();
            c.check(
                order_bad == 0,
                format!(
                    "dof(pi/3) <= dof(0) at all {} points ({order_bad} violations)",
                    grid.len()
                ),
            );
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error("aperture sweep", e);
        }
        finish(4, "dof vs aperture", Duration::from_secs(60), start, c)
    }

    /// 5. CEP with 64 and 1024 elements per access point.
    pub fn positioning(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let run = |c: &mut Checks| -> Result<()> {
            let spacing = SPEED_OF_LIGHT / 300e9 / 2.0;
            let var = variance_from_db(15.0);
            let user = Point2::new(3.0, 3.0);
            let trials = self.scale.positioning_trials;
            let a = positioning_experiment(
                user,
                &square_room_access_points(64, spacing)?,
                var,
                trials,
                self.seed,
                Estimator::Linearized,
            )?;
            let b = positioning_experiment(
                user,
                &square_room_access_points(1024, spacing)?,
                var,
                trials,
                self.seed,
                Estimator::Linearized,
            )?;
            c.check(
                within(a.cep_m, 0.77, 1.16),
                format!("CEP(64) = {:.3} m in [0.77, 1.16] ({trials} trials)", a.cep_m),
            );
            c.check(
                within(b.cep_m, 0.19, 0.29),
                format!("CEP(1024) = {:.3} m in [0.19, 0.29]", b.cep_m),
            );
            let ratio = a.cep_m / b.cep_m;
            c.check(within(ratio, 3.6, 4.4), format!("ratio {ratio:.2} in [3.6, 4.4]"));
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error("positioning", e);
        }
        finish(5, "positioning CEP", Duration::from_secs(120), start, c)
    }

    /// 6. Beam-split with phase-only weights and its TTD correction.
    pub fn beam_split(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let run = |c: &mut Checks| -> Result<()> {
            let fc = 28e9;
            let carrier = CarrierConfig::wideband(fc, DEFAULT_FRACTIONAL_BANDWIDTH, DEFAULT_SUBCARRIERS)?;
            let g = ula_of_length(2.74, fc)?;
            let ideal = 20.0 * (g.len() as f64).sqrt().log10();
            let ps = beamsplit_gain(BEAMSPLIT_FOCAL, &g, &carrier, None)?;
            let edge_loss = (ideal - ps[0].focal_gain_db).min(ideal - ps[ps.len() - 1].focal_gain_db);
            c.check(
                edge_loss > 3.0,
                format!("phase-only edge loss {edge_loss:.2} dB > 3 dB"),
            );
            let ttd = ttd_beamformer(BEAMSPLIT_FOCAL, &g, &carrier)?;
            let worst = wideband_response(&ttd, BEAMSPLIT_FOCAL, &g, &carrier, None)?
                .iter()
                .map(|s| (ideal - s.focal_gain_db).abs())
                .fold(0.0, f64::max);
            c.check(worst < 0.1, format!("TTD worst in-band loss {worst:.2e} dB < 0.1 dB"));
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error("beam split", e);
        }
        finish(6, "beam-split", Duration::from_secs(10), start, c)
    }

    /// 7. Polar-domain sparsity and OMP accuracy.
    pub fn polar_sparsity(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let run = |c: &mut Checks| -> Result<()> {
            let f = 300e9;
            let lam = SPEED_OF_LIGHT / f;
            let g = half_wave_ula(1024, f)?;
            let fourier = fourier_dictionary(1024)?;
            let polar = polar_dictionary(&g, lam, DEFAULT_BETA, 1024)?;
            for deg in [-30.0f64, 0.0, 30.0] {
                let h = nearfield_steering(&g, &g.point_at(deg.to_radians(), 3.0), lam, AmplitudeModel::Unit)?;
                let e = h.0.norm_squared();
                let sf = top_energy_share(&transform_coefficients(&h, &fourier)?, e);
                let sp = top_energy_share(&transform_coefficients(&h, &polar)?, e);
                c.check(sp > sf, format!("{deg:+.0} deg: polar top-1 {sp:.4} > fourier {sf:.4}"));
            }

            let (polar_nmse, fourier_nmse) = omp_comparison()?;
            c.check(
                polar_nmse < -30.0,
                format!("OMP polar NMSE {polar_nmse:.1} dB < -30 dB"),
            );
            c.check(
                fourier_nmse >= polar_nmse + 10.0,
                format!("OMP fourier NMSE {fourier_nmse:.1} dB >= polar + 10 dB"),
            );
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error("polar sparsity", e);
        }
        finish(7, "polar-domain sparsity", Duration::from_secs(30), start, c)
    }

    /// 8. Property suites.
    pub fn properties(&self) -> CriterionOutcome {
        let start = Instant::now();
        let mut c = Checks::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let run = |c: &mut Checks, rng: &mut ChaCha8Rng| -> Result<()> {
            // dictionaries
            let lam = SPEED_OF_LIGHT / 28e9;
            let f = fourier_dictionary(64)?;
            let gram_err = (f.atoms().ad_mul(f.atoms()) - DMatrix::<Complex64>::identity(64, 64)).camax();
            let p = polar_dictionary(&half_wave_ula(64, 28e9)?, lam, DEFAULT_BETA, 64)?;
            let norm_err = max_column_norm_error(&f).max(max_column_norm_error(&p));
            c.check(
                gram_err < 1e-10 && norm_err < 1e-10,
                format!("dictionary Gram err {gram_err:.1e}, norm err {norm_err:.1e}"),
            );

            // MRT optimality
            let g = half_wave_ula(64, 28e9)?;
            let h = nearfield_steering(&g, &g.point_at(0.4, 1.5), lam, AmplitudeModel::FreeSpace)?;
            let best = array_gain(mrt_beamformer(&h)?.weights(), &h.0);
            let beaten = (0..1000)
                .filter(|_| {
                    let v = DVector::from_fn(64, |_, _| {
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    });
                    let v = &v / Complex64::new(v.norm(), 0.0);
                    array_gain(&v, &h.0) > best
                })
                .count();
            c.check(beaten == 0, format!("MRT beaten by {beaten}/1000 random beamformers"));

            // DoF invariances
            let tx = half_wave_ula(16, 300e9)?;
            let rx = half_wave_ula(16, 300e9)?;
            let hm = link_channel(&tx, &rx, 0.05, &LinkConfig::case_study(0.0))?;
            let base = effective_dof(&hm, 0.01)?;
            let scaled = effective_dof(&ChannelMatrix(hm.0.map(|z| z * Complex64::new(-3.7, 12.0))), 0.01)?;
            let mut unitary_ok = true;
            for _ in 0..10 {
                let u = random_unitary(rng, 16);
                let v = random_unitary(rng, 16);
                unitary_ok &= effective_dof(&ChannelMatrix(&u * &hm.0 * &v), 0.01)? == base;
            }
            c.check(
                scaled == base && unitary_ok,
                format!("dof scale/unitary invariance (dof = {base})"),
            );

            // reciprocity
            let txa = half_wave_ula(64, 300e9)?;
            let rxa = half_wave_ula(8, 300e9)?.centered_at(Point3::new(0.05, 0.0, 0.4));
            let a = los_mimo_channel(&txa, &rxa, SPEED_OF_LIGHT / 300e9, AmplitudeModel::FreeSpace)?;
            let b = los_mimo_channel(&rxa, &txa, SPEED_OF_LIGHT / 300e9, AmplitudeModel::FreeSpace)?;
            let rel =
                a.0.iter()
                    .zip(b.0.transpose().iter())
                    .map(|(x, y)| (x - y).norm() / x.norm())
                    .fold(0.0, f64::max);
            c.check(rel <= 1e-12, format!("reciprocity rel err {rel:.1e}"));

            // CEP of an isotropic Gaussian
            let n = Normal::new(0.0, 1.0).expect("unit normal");
            let pts: Vec<Point2> = (0..self.scale.cep_samples)
                .map(|_| Point2::new(n.sample(rng), n.sample(rng)))
                .collect();
            let r = cep(&pts)?;
            let expect = (2.0 * 2f64.ln()).sqrt();
            c.check(
                (r / expect - 1.0).abs() < 0.01,
                format!("Gaussian CEP {r:.4} vs {expect:.4} (1%)"),
            );

            // determinism
            let aps = square_room_access_points(64, SPEED_OF_LIGHT / 300e9 / 2.0)?;
            let run = || {
                positioning_experiment(
                    Point2::new(3.0, 3.0),
                    &aps,
                    variance_from_db(15.0),
                    200,
                    self.seed,
                    Estimator::Linearized,
                )
            };
            let (x, y) = (run()?, run()?);
            let same = x
                .estimates
                .iter()
                .zip(&y.estimates)
                .all(|(p, q)| p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits())
                && x.cep_m.to_bits() == y.cep_m.to_bits();
            c.check(same, "seeded positioning run is bit-identical".into());
            Ok(())
        };
        if let Err(e) = run(&mut c, &mut rng) {
            c.error("properties", e);
        }
        finish(8, "property suites", Duration::from_secs(60), start, c)
    }
}

fn max_column_norm_error(d: &Dictionary) -> f64 {
    d.atoms()
        .column_iter()
        .map(|c| (c.norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
    .qr()
    .q()
}

/// Noiseless three-path on-grid channel (N = 256, 28 GHz) estimated by OMP
/// with the polar and the Fourier dictionary. Returns both NMSEs in dB.
pub fn omp_comparison() -> Result<(f64, f64)> {
    let f = 28e9;
    let lam = SPEED_OF_LIGHT / f;
    let g = half_wave_ula(256, f)?;
    let polar = polar_dictionary(&g, lam, DEFAULT_BETA, 256)?;
    let fourier = fourier_dictionary(256)?;
    // three near-field atoms at well-separated angles, nearest rings
    let picks = [40usize, 128, 200];
    let gains = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-0.4, 0.6),
        Complex64::new(0.3, -0.5),
    ];
    let mut h = DVector::<Complex64>::zeros(256);
    for (&k, &gain) in picks.iter().zip(&gains) {
        let cols = polar.columns_for_angle(k);
        let m = *cols.last().expect("at least the far-field atom");
        h += polar.atoms().column(m) * gain;
    }
    let truth = ChannelVector(h);
    let sensing = Sensing::Identity(256);
    let p = omp_estimate(&truth.0, &sensing, &polar, 3, 1e-9)?;
    let q = omp_estimate(&truth.0, &sensing, &fourier, 3, 1e-9)?;
    Ok((nmse_db(&p.reconstructed, &truth), nmse_db(&q.reconstructed, &truth)))
}
