//! Fluxonium spectrum in the harmonic-oscillator basis.
//!
//! The circuit Hamiltonian
//!
//!   H = 4 E_C n^2 + (E_L / 2) phi^2 - E_J cos(phi + phi_ext)
//!
//! is expanded in the eigenbasis of the (E_C, E_L) oscillator. The cosine
//! (and the quasiparticle operator sin((phi + phi_ext)/2)) are evaluated by
//! diagonalising the truncated phase operator and applying the scalar
//! function to its spectrum, so no power series is truncated.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Ground, first, second and third excited state indices.
pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;
pub const H: usize = 3;

/// Smallest accepted oscillator basis.
pub const MIN_BASIS_SIZE: usize = 20;
pub const DEFAULT_BASIS_SIZE: usize = 60;
pub const DEFAULT_LEVELS: usize = 6;

/// Conventional label of level `i` (g, e, f, h, then the index).
pub fn level_label(i: usize) -> String {
    match i {
        G => "g".into(),
        E => "e".into(),
        F => "f".into(),
        H => "h".into(),
        n => n.to_string(),
    }
}

/// Device parameters in internal units (rad/us, kelvin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub e_j: f64,
    pub e_c: f64,
    pub e_l: f64,
    /// External flux phase in radians; the sweet spot is pi.
    pub phi_ext: f64,
    pub temperature: f64,
    /// Measured external decay rate of the e-f transition (rad/us).
    pub gamma_r_anchor: Option<f64>,
}

impl DeviceParams {
    /// Table I device at the sweet spot, 10 mK, anchored at 2pi x 5.4 MHz.
    pub fn table_one() -> Self {
        Self {
            e_j: units::ghz_to_rad_per_us(6.23),
            e_c: units::ghz_to_rad_per_us(1.25),
            e_l: units::ghz_to_rad_per_us(0.86),
            phi_ext: std::f64::consts::PI,
            temperature: 0.010,
            gamma_r_anchor: Some(units::mhz_to_rad_per_us(5.4)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("E_J", self.e_j), ("E_C", self.e_c), ("E_L", self.e_l)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Domain(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if !self.phi_ext.is_finite() {
            return Err(Error::Domain("phi_ext must be finite".into()));
        }
        if let Some(g) = self.gamma_r_anchor {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Domain(format!("gamma_r anchor must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// Plasma frequency sqrt(8 E_C E_L) of the underlying oscillator.
    pub fn plasma_frequency(&self) -> f64 {
        (8.0 * self.e_c * self.e_l).sqrt()
    }

    /// Zero-point phase fluctuation (2 E_C / E_L)^(1/4).
    fn phase_zpf(&self) -> f64 {
        (2.0 * self.e_c / self.e_l).powf(0.25)
    }
}

/// Truncated phase operator phi_zpf (a + a^dagger) (real symmetric).
pub fn phase_operator(params: &DeviceParams, basis_size: usize) -> DMatrix<f64> {
    let zpf = params.phase_zpf();
    let mut phi = DMatrix::zeros(basis_size, basis_size);
    for k in 1..basis_size {
        let v = zpf * (k as f64).sqrt();
        phi[(k - 1, k)] = v;
        phi[(k, k - 1)] = v;
    }
    phi
}

/// Real antisymmetric `A` with n = i A, i.e. A = (a^dagger - a) / (2 phi_zpf).
fn charge_generator(params: &DeviceParams, basis_size: usize) -> DMatrix<f64> {
    let scale = 1.0 / (2.0 * params.phase_zpf());
    let mut a = DMatrix::zeros(basis_size, basis_size);
    for k in 1..basis_size {
        let v = scale * (k as f64).sqrt();
        // <k| a^dagger |k-1> = sqrt(k), <k-1| a |k> = sqrt(k)
        a[(k, k - 1)] = v;
        a[(k - 1, k)] = -v;
    }
    a
}

/// Truncated charge operator n (Hermitian, purely imaginary).
pub fn charge_operator(params: &DeviceParams, basis_size: usize) -> DMatrix<Complex64> {
    charge_generator(params, basis_size).map(|x| Complex64::new(0.0, x))
}

/// f(phi + shift) through the eigen-decomposition of the truncated phase.
fn phase_function(phi: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let n = phi.nrows();
    let eig = SymmetricEigen::try_new(phi.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("phase operator eigen-decomposition did not converge".into()))?;
    let diag = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&x| f(x)));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&diag) * v.transpose())
}

fn check_basis(basis_size: usize) -> Result<()> {
    if basis_size < MIN_BASIS_SIZE {
        return Err(Error::Config(format!(
            "basis_size must be at least {MIN_BASIS_SIZE}, got {basis_size}"
        )));
    }
    Ok(())
}

/// Fluxonium Hamiltonian (rad/us) in the oscillator basis of size `basis_size`.
pub fn build_hamiltonian(params: &DeviceParams, basis_size: usize) -> Result<DMatrix<f64>> {
    params.validate()?;
    check_basis(basis_size)?;
    let phi = phase_operator(params, basis_size);
    let a = charge_generator(params, basis_size);
    // n^2 = (iA)(iA) = -A^2
    let n_sq = -(&a * &a);
    let phi_ext = params.phi_ext;
    let cos_phi = phase_function(&phi, |x| (x + phi_ext).cos())?;
    let mut h = n_sq * (4.0 * params.e_c) + (&phi * &phi) * (0.5 * params.e_l) - cos_phi * params.e_j;
    // Symmetrise away rounding from the eigen-reconstruction.
    let ht = h.transpose();
    h = (h + ht) * 0.5;
    Ok(h)
}

/// Retained eigenstates with the matrix elements the rest of the stack uses.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub levels: usize,
    pub basis_size: usize,
    /// Ascending angular frequencies, ground at zero.
    pub energies: Vec<f64>,
    /// |<i| n |j>|.
    pub charge_elements: DMatrix<f64>,
    /// |<i| sin((phi + phi_ext)/2) |j>|.
    pub qp_elements: DMatrix<f64>,
    /// Columns are the retained eigenvectors in the oscillator basis.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    /// Keep only the lowest `levels` states.
    pub fn truncate(&self, levels: usize) -> Result<EigenSystem> {
        if levels == 0 || levels > self.levels {
            return Err(Error::Domain(format!(
                "cannot truncate {} levels to {levels}",
                self.levels
            )));
        }
        Ok(EigenSystem {
            levels,
            basis_size: self.basis_size,
            energies: self.energies[..levels].to_vec(),
            charge_elements: self.charge_elements.view((0, 0), (levels, levels)).into_owned(),
            qp_elements: self.qp_elements.view((0, 0), (levels, levels)).into_owned(),
            eigenvectors: self.eigenvectors.columns(0, levels).into_owned(),
        })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.levels {
            return Err(Error::Domain(format!(
                "level index {i} out of range for {} retained levels",
                self.levels
            )));
        }
        Ok(())
    }

    pub fn charge(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.charge_elements[(i, j)])
    }

    pub fn qp(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.qp_elements[(i, j)])
    }
}

/// Diagonalise `h` and keep the lowest `levels` states.
///
/// The parameters are needed again to build the charge and quasiparticle
/// operators in the same basis.
pub fn diagonalize(
    h: &DMatrix<f64>,
    params: &DeviceParams,
    levels: usize,
) -> Result<EigenSystem> {
    let basis_size = h.nrows();
    check_basis(basis_size)?;
    if h.ncols() != basis_size {
        return Err(Error::Domain("Hamiltonian must be square".into()));
    }
    if levels == 0 || 3 * levels > basis_size {
        return Err(Error::Config(format!(
            "levels must be in 1..={} for basis size {basis_size}",
            basis_size / 3
        )));
    }
    let eig = SymmetricEigen::try_new(h.clone(), 1e-15, 10_000).ok_or_else(|| {
        Error::Numeric(format!(
            "Hamiltonian eigen-solver did not converge (basis {basis_size}, norm {:.3e})",
            h.norm()
        ))
    })?;
    let mut order: Vec<usize> = (0..basis_size).collect();
    // Stable sort keeps solver index order for exact degeneracies.
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let order = &order[..levels];

    let ground = eig.eigenvalues[order[0]];
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k] - ground).collect();
    let vecs = DMatrix::from_columns(
        &order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>(),
    );

    let a = charge_generator(params, basis_size);
    let phi = phase_operator(params, basis_size);
    let phi_ext = params.phi_ext;
    let sin_half = phase_function(&phi, |x| ((x + phi_ext) / 2.0).sin())?;

    let charge = (vecs.transpose() * &a * &vecs).map(f64::abs);
    let qp = (vecs.transpose() * &sin_half * &vecs).map(f64::abs);
    let symmetrise = |m: DMatrix<f64>| {
        let t = m.transpose();
        (m + t) * 0.5
    };
    Ok(EigenSystem {
        levels,
        basis_size,
        energies,
        charge_elements: symmetrise(charge),
        qp_elements: symmetrise(qp),
        eigenvectors: vecs,
    })
}

/// Build and diagonalise in one step.
pub fn solve(params: &DeviceParams, basis_size: usize, levels: usize) -> Result<EigenSystem> {
    let h = build_hamiltonian(params, basis_size)?;
    diagonalize(&h, params, levels)
}

/// Signed transition frequency omega_i - omega_j (rad/us).
pub fn transition_frequency(eig: &EigenSystem, i: usize, j: usize) -> Result<f64> {
    eig.check_index(i)?;
    eig.check_index(j)?;
    Ok(eig.energies[i] - eig.energies[j])
}

/// Boltzmann populations of the retained levels.
///
/// At zero temperature this is the ground-state delta distribution.
pub fn thermal_population(eig: &EigenSystem, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature must be non-negative, got {temperature}")));
    }
    let mut p = vec![0.0; eig.levels];
    if temperature == 0.0 {
        p[0] = 1.0;
        return Ok(p);
    }
    for (pi, &e) in p.iter_mut().zip(&eig.energies) {
        *pi = (-units::hbar_omega_over_kt(e, temperature)).exp();
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

/// Temperature at which the Boltzmann ground population equals `p_ground`.
pub fn temperature_for_ground_population(eig: &EigenSystem, p_ground: f64) -> Result<f64> {
    let floor = 1.0 / eig.levels as f64;
    if !(p_ground > floor && p_ground < 1.0) {
        return Err(Error::Domain(format!(
            "ground population must lie in ({floor}, 1), got {p_ground}"
        )));
    }
    let pg = |t: f64| thermal_population(eig, t).map(|p| p[0]);
    // P_g decreases monotonically with temperature.
    let (mut lo, mut hi) = (1e-6_f64, 1.0_f64);
    while pg(hi)? > p_ground {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numeric("temperature bracket failed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pg(mid)? > p_ground {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
