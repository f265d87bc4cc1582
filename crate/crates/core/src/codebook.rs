//! Fourier and polar-domain dictionaries, sparse-domain transforms and
//! on-grid orthogonal matching pursuit.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{farfield_steering_towards, nearfield_steering, AmplitudeModel, ChannelVector};
use crate::error::{NfError, Result};
use crate::geometry::{fresnel_distance, ArrayGeometry, ArrayKind};

/// Default polar-domain distance sampling density.
pub const DEFAULT_BETA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    Fourier,
    Polar,
}

/// Label of one dictionary column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub angle_index: usize,
    /// Angle from boresight (radians).
    pub angle: f64,
    /// Focal distance (meters); infinite for far-field atoms.
    pub distance: f64,
}

/// Unit-norm steering codewords stored column-wise (`N × M`).
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: DMatrix<Complex64>,
    grid: Vec<GridPoint>,
    kind: DictionaryKind,
}

impl Dictionary {
    pub fn atoms(&self) -> &DMatrix<Complex64> {
        &self.atoms
    }

    pub fn grid(&self) -> &[GridPoint] {
        &self.grid
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn n_elements(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, m: usize) -> ChannelVector {
        ChannelVector(self.atoms.column(m).into_owned())
    }

    /// Column indices sharing the given angle index, in storage order.
    pub fn columns_for_angle(&self, angle_index: usize) -> Vec<usize> {
        self.grid
            .iter()
            .enumerate()
            .filter(|(_, g)| g.angle_index == angle_index)
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest `|a_iᴴ a_j|` between distinct columns of one angle bin.
    pub fn max_coherence_within_angle(&self, angle_index: usize) -> f64 {
        let cols = self.columns_for_angle(angle_index);
        let mut worst: f64 = 0.0;
        for (a, &i) in cols.iter().enumerate() {
            for &j in &cols[a + 1..] {
                worst = worst.max(self.atoms.column(i).dotc(&self.atoms.column(j)).norm());
            }
        }
        worst
    }
}

/// Uniform-in-sine grid `sin θ_k = (2k − K + 1)/K`.
pub fn sine_grid(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (2.0 * k as f64 - count as f64 + 1.0) / count as f64)
        .collect()
}

/// Unitary DFT dictionary of a half-wavelength ULA with `n_elements`.
pub fn fourier_dictionary(n_elements: usize) -> Result<Dictionary> {
    if n_elements == 0 {
        return Err(NfError::invalid("dictionary needs at least one element"));
    }
    let n = n_elements;
    let center = (n as f64 - 1.0) / 2.0;
    let scale = 1.0 / (n as f64).sqrt();
    let sines = sine_grid(n);
    let atoms = DMatrix::from_fn(n, n, |m, k| {
        Complex64::from_polar(scale, PI * (m as f64 - center) * sines[k])
    });
    let grid = sines
        .iter()
        .enumerate()
        .map(|(k, s)| GridPoint {
            angle_index: k,
            angle: s.asin(),
            distance: f64::INFINITY,
        })
        .collect();
    Ok(Dictionary {
        atoms,
        grid,
        kind: DictionaryKind::Fourier,
    })
}

/// Polar-domain dictionary of a ULA.
///
/// For each of `n_angles` uniform-in-sine angles: one far-field atom, then
/// rings `r_s = Z(θ)/(β²·s)` for `s = 1, 2, …` down to the Fresnel distance,
/// with `Z(θ) = N²d²(1 − sin²θ)/(2λ)`.
pub fn polar_dictionary(geometry: &ArrayGeometry, wavelength_m: f64, beta: f64, n_angles: usize) -> Result<Dictionary> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(NfError::invalid(format!("beta must be positive, got {beta}")));
    }
    if n_angles == 0 {
        return Err(NfError::invalid("need at least one angle"));
    }
    if geometry.kind() != ArrayKind::Ula {
        return Err(NfError::invalid("polar dictionary is defined for linear arrays"));
    }
    let n = geometry.len() as f64;
    let d = geometry.spacing();
    let d_f = fresnel_distance(geometry.aperture(), wavelength_m)?;

    let mut grid = Vec::new();
    for (k, s) in sine_grid(n_angles).into_iter().enumerate() {
        let angle = s.asin();
        grid.push(GridPoint {
            angle_index: k,
            angle,
            distance: f64::INFINITY,
        });
        if d_f <= 0.0 {
            continue;
        }
        let z = n * n * d * d * (1.0 - s * s) / (2.0 * wavelength_m);
        let mut ring = 1usize;
        loop {
            let r = z / (beta * beta * ring as f64);
            if r < d_f {
                break;
            }
            grid.push(GridPoint {
                angle_index: k,
                angle,
                distance: r,
            });
            ring += 1;
        }
    }

    let columns: Vec<DVector<Complex64>> = grid
        .par_iter()
        .map(|g| {
            let v = if g.distance.is_infinite() {
                farfield_steering_towards(geometry, g.angle, wavelength_m)?.0
            } else {
                nearfield_steering(
                    geometry,
                    &geometry.point_at(g.angle, g.distance),
                    wavelength_m,
                    AmplitudeModel::Unit,
                )?
                .0
            };
            let norm = v.norm();
            Ok(v / Complex64::new(norm, 0.0))
        })
        .collect::<Result<_>>()?;
    Ok(Dictionary {
        atoms: DMatrix::from_columns(&columns),
        grid,
        kind: DictionaryKind::Polar,
    })
}

/// Sparse-domain coefficients `c_m = ⟨atom_m, h⟩` (conjugate inner product).
pub fn transform_coefficients(h: &ChannelVector, dict: &Dictionary) -> Result<DVector<Complex64>> {
    if h.len() != dict.n_elements() {
        return Err(NfError::invalid(format!(
            "channel has {} entries but dictionary atoms have {}",
            h.len(),
            dict.n_elements()
        )));
    }
    Ok(dict.atoms.ad_mul(&h.0))
}

/// Share of `total_energy` held by the strongest coefficient.
pub fn top_energy_share(coeffs: &DVector<Complex64>, total_energy: f64) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max) / total_energy
}

/// Number of strongest coefficients needed to reach `fraction` of the
/// coefficient energy.
pub fn coefficients_for_energy(coeffs: &DVector<Complex64>, fraction: f64) -> usize {
    let mut e: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = e.iter().sum();
    e.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (i, v) in e.iter().enumerate() {
        acc += v;
        if acc >= fraction * total {
            return i + 1;
        }
    }
    e.len()
}

/// Pilot observation model `y = Φ·h`.
#[derive(Debug, Clone)]
pub enum Sensing {
    /// Fully digital observation of all `n` elements.
    Identity(usize),
    Matrix(DMatrix<Complex64>),
}

impl Sensing {
    /// `rows` distinct rows of the unitary `n`-point DFT, picked with `seed`.
    pub fn subsampled_dft(n: usize, rows: usize, seed: u64) -> Result<Self> {
        if rows == 0 || rows > n {
            return Err(NfError::invalid(format!("need 1..={n} pilot rows, got {rows}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, rows).into_vec();
        picked.sort_unstable();
        let scale = 1.0 / (n as f64).sqrt();
        let phi = DMatrix::from_fn(rows, n, |i, j| {
            Complex64::from_polar(scale, -2.0 * PI * (picked[i] * j) as f64 / n as f64)
        });
        Ok(Sensing::Matrix(phi))
    }

    pub fn n_rows(&self) -> usize {
        match self {
            Sensing::Identity(n) => *n,
            Sensing::Matrix(m) => m.nrows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Sensing::Identity(n) => *n,
            Sensing::Matrix(m) => m.ncols(),
        }
    }

    pub fn observe(&self, h: &ChannelVector) -> Result<DVector<Complex64>> {
        if h.len() != self.n_cols() {
            return Err(NfError::invalid("channel length does not match the sensing matrix"));
        }
        Ok(match self {
            Sensing::Identity(_) => h.0.clone(),
            Sensing::Matrix(m) => m * &h.0,
        })
    }

    fn composite(&self, atoms: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        match self {
            Sensing::Identity(_) => atoms.clone(),
            Sensing::Matrix(m) => m * atoms,
        }
    }
}

/// Output of [`omp_estimate`].
#[derive(Debug, Clone)]
pub struct SparseEstimate {
    pub support: Vec<usize>,
    pub coefficients: Vec<Complex64>,
    pub reconstructed: ChannelVector,
    /// Residual norm after each iteration, starting with `‖y‖`.
    pub residual_norms: Vec<f64>,
}

/// Orthogonal matching pursuit over the composite matrix `Φ · atoms`.
///
/// Stops after `sparsity` atoms or once `‖r‖ ≤ residual_tol · ‖y‖`.
pub fn omp_estimate(
    y: &DVector<Complex64>,
    sensing: &Sensing,
    dict: &Dictionary,
    sparsity: usize,
    residual_tol: f64,
) -> Result<SparseEstimate> {
    if sparsity == 0 {
        return Err(NfError::invalid("sparsity must be at least 1"));
    }
    if sensing.n_cols() != dict.n_elements() {
        return Err(NfError::invalid("sensing matrix does not match the dictionary"));
    }
    if y.len() != sensing.n_rows() {
        return Err(NfError::invalid("measurement length does not match the sensing matrix"));
    }
    if sensing.n_rows() < sparsity {
        return Err(NfError::invalid(format!(
            "{} measurements cannot support sparsity {sparsity}",
            sensing.n_rows()
        )));
    }
    let a = sensing.composite(&dict.atoms);
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if col_norms.iter().all(|&c| c == 0.0) {
        return Err(NfError::invalid("all sensed atoms vanish"));
    }

    let y_norm = y.norm();
    let mut residual = y.clone();
    let mut residual_norms = vec![y_norm];
    let mut support: Vec<usize> = Vec::new();
    let mut coeffs = DVector::<Complex64>::zeros(0);
    let mut selected = vec![false; a.ncols()];

    for iteration in 0..sparsity {
        if residual.norm() <= residual_tol * y_norm || y_norm == 0.0 {
            break;
        }
        let corr = a.ad_mul(&residual);
        let best = (0..a.ncols())
            .filter(|&m| !selected[m] && col_norms[m] > 0.0)
            .map(|m| (m, corr[m].norm() / col_norms[m]))
            .max_by(|x, y| x.1.total_cmp(&y.1));
        let Some((m, _)) = best else { break };
        selected[m] = true;
        support.push(m);

        let sub = a.select_columns(support.iter());
        let qr = sub.clone().qr();
        let r = qr.r();
        let diag_max = (0..r.nrows().min(r.ncols()))
            .map(|i| r[(i, i)].norm())
            .fold(0.0, f64::max);
        let rank_ok = support.len() <= sub.nrows() && (0..support.len()).all(|i| r[(i, i)].norm() > 1e-10 * diag_max);
        if !rank_ok {
            return Err(NfError::numerical(
                "OMP least-squares refit (rank-deficient support)",
                Some(iteration),
            ));
        }
        let qty = qr.q().ad_mul(y);
        coeffs = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| NfError::numerical("OMP least-squares refit", Some(iteration)))?;
        residual = y - &sub * &coeffs;
        residual_norms.push(residual.norm());
    }

    let reconstructed = if support.is_empty() {
        DVector::zeros(dict.n_elements())
    } else {
        dict.atoms.select_columns(support.iter()) * &coeffs
    };
    Ok(SparseEstimate {
        support,
        coefficients: coeffs.iter().copied().collect(),
        reconstructed: ChannelVector(reconstructed),
        residual_norms,
    })
}

/// Normalized mean-square error `‖ĥ − h‖²/‖h‖²` in dB.
pub fn nmse_db(estimate: &ChannelVector, truth: &ChannelVector) -> f64 {
    let err = (&estimate.0 - &truth.0).norm_squared();
    10.0 * (err / truth.0.norm_squared()).log10()
}
