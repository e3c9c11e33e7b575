//! Driven, dissipative evolution in the rotating frame.
//!
//! The master equation is
//!
//!   d rho / dt = -i [H, rho] + sum_k Gamma_k D[|to_k><from_k|] rho
//!
//! integrated with fixed-step classic Runge-Kutta. Steady states come from
//! the null space of the vectorised generator.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dissipation::{ChannelSet, SELECTION_THRESHOLD};
use crate::error::{Error, Result};
use crate::qubit::{level_label, EigenSystem};

/// Largest accepted step in units of the fastest generator time scale.
pub const STABILITY_FACTOR: f64 = 0.1;

/// Tolerances of the density-matrix invariants.
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// One coherent drive on a single transition.
///
/// `detuning` is the transition frequency minus the drive frequency, so
/// the upper level of a single tone sits at +detuning in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    pub from_level: usize,
    pub to_level: usize,
    pub detuning: f64,
    pub rabi_amplitude: f64,
    pub phase: f64,
}

impl DriveTone {
    /// Checked constructor: the transition must carry charge coupling.
    pub fn new(
        eig: &EigenSystem,
        from_level: usize,
        to_level: usize,
        detuning: f64,
        rabi_amplitude: f64,
    ) -> Result<Self> {
        let tone = Self { from_level, to_level, detuning, rabi_amplitude, phase: 0.0 };
        tone.check(eig)?;
        Ok(tone)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    fn check(&self, eig: &EigenSystem) -> Result<()> {
        if self.from_level == self.to_level {
            return Err(Error::Domain(format!("drive needs two distinct levels, got {}", self.from_level)));
        }
        if !(self.rabi_amplitude >= 0.0 && self.rabi_amplitude.is_finite()) {
            return Err(Error::Domain(format!(
                "Rabi amplitude must be non-negative, got {}",
                self.rabi_amplitude
            )));
        }
        if !self.detuning.is_finite() || !self.phase.is_finite() {
            return Err(Error::Domain("drive detuning and phase must be finite".into()));
        }
        let n = eig.charge(self.from_level, self.to_level)?;
        if n <= SELECTION_THRESHOLD {
            return Err(Error::Config(format!(
                "drive on the {}-{} transition is parity forbidden (|n| = {n:.3e})",
                level_label(self.from_level),
                level_label(self.to_level)
            )));
        }
        Ok(())
    }

    fn lower_upper(&self) -> (usize, usize) {
        (self.from_level.min(self.to_level), self.from_level.max(self.to_level))
    }
}

/// Rotating-frame Hamiltonian for any set of tones forming a ladder or tree.
///
/// Each connected group of driven levels is put into a common frame by a
/// breadth-first walk from its lowest level: the upper level of each tone
/// sits `detuning` above the lower one. Undriven levels stay at zero in
/// their own frame, which is exact because the dissipators only move
/// populations. A loop of tones must close consistently.
pub fn rwa_hamiltonian(eig: &EigenSystem, drives: &[DriveTone]) -> Result<DMatrix<Complex64>> {
    let n = eig.levels;
    for (k, d) in drives.iter().enumerate() {
        d.check(eig)?;
        for other in &drives[..k] {
            if other.lower_upper() == d.lower_upper() {
                return Err(Error::Config(format!(
                    "two tones drive the {}-{} transition",
                    level_label(d.lower_upper().0),
                    level_label(d.lower_upper().1)
                )));
            }
        }
    }

    let mut offset = vec![None::<f64>; n];
    for root in 0..n {
        if offset[root].is_some() {
            continue;
        }
        offset[root] = Some(0.0);
        let mut queue = VecDeque::from([root]);
        while let Some(level) = queue.pop_front() {
            let here = offset[level].unwrap();
            for d in drives {
                let (lo, hi) = d.lower_upper();
                let (next, value) = if lo == level {
                    (hi, here + d.detuning)
                } else if hi == level {
                    (lo, here - d.detuning)
                } else {
                    continue;
                };
                match offset[next] {
                    None => {
                        offset[next] = Some(value);
                        queue.push_back(next);
                    }
                    Some(existing) => {
                        let scale = 1.0 + existing.abs().max(value.abs());
                        if (existing - value).abs() > 1e-9 * scale {
                            return Err(Error::Config(format!(
                                "drive frequencies do not close around a loop through level {}",
                                level_label(next)
                            )));
                        }
                    }
                }
            }
        }
    }

    let mut h = DMatrix::from_element(n, n, ZERO);
    for (i, o) in offset.iter().enumerate() {
        h[(i, i)] = Complex64::new(o.unwrap_or(0.0), 0.0);
    }
    for d in drives {
        let (lo, hi) = d.lower_upper();
        let c = Complex64::from_polar(0.5 * d.rabi_amplitude, d.phase);
        h[(lo, hi)] += c;
        h[(hi, lo)] += c.conj();
    }
    Ok(h)
}

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validated construction.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::Domain("density matrix must be square and non-empty".into()));
        }
        let rho = Self { entries };
        rho.check()?;
        Ok(rho)
    }

    pub fn pure(dim: usize, level: usize) -> Result<Self> {
        if level >= dim {
            return Err(Error::Domain(format!("level {level} outside a {dim}-level space")));
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        m[(level, level)] = Complex64::new(1.0, 0.0);
        Ok(Self { entries: m })
    }

    /// Diagonal state with the given populations, which must sum to one.
    pub fn from_populations(pops: &[f64]) -> Result<Self> {
        let m = DMatrix::from_fn(pops.len(), pops.len(), |i, j| {
            if i == j {
                Complex64::new(pops[i], 0.0)
            } else {
                ZERO
            }
        });
        Self::new(m)
    }

    /// Skips validation; used for integrator output that is checked separately.
    fn from_raw(entries: DMatrix<Complex64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn population(&self, i: usize) -> f64 {
        self.entries[(i, i)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Embed into the lowest levels of a larger space.
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::Domain(format!("cannot embed {} levels into {dim}", self.dim())));
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.entries);
        Ok(Self { entries: m })
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<()> {
        if self.entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("density matrix has non-finite entries".into()));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::Numeric(format!("density matrix not Hermitian (error {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::Numeric(format!("density matrix trace is {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::Numeric(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

/// Sampled time evolution.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub populations: Vec<Vec<f64>>,
}

impl Trajectory {
    fn push(&mut self, t: f64, rho: DensityMatrix) {
        self.times.push(t);
        self.populations.push(rho.populations());
        self.states.push(rho);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    /// Population series of one level.
    pub fn population_series(&self, level: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[level]).collect()
    }

    /// Check every stored state against the density-matrix invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for (t, rho) in self.times.iter().zip(&self.states) {
            rho.check().map_err(|e| Error::Numeric(format!("at t = {t} us: {e}")))?;
        }
        for (t, p) in self.times.iter().zip(&self.populations) {
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Numeric(format!("populations sum to {s} at t = {t} us")));
            }
        }
        Ok(())
    }

    /// CSV with a `t_us,P_g,P_e,...` header.
    pub fn to_csv(&self) -> String {
        let dim = self.populations.first().map_or(0, |p| p.len());
        let mut out = String::from("t_us");
        for i in 0..dim {
            out.push_str(&format!(",P_{}", level_label(i)));
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.populations) {
            out.push_str(&format!("{t}"));
            for x in p {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Flat right-hand side of the master equation.
struct Generator {
    n: usize,
    h: Vec<Complex64>,
    jumps: Vec<(usize, usize, f64)>,
    out_rate: Vec<f64>,
}

impl Generator {
    fn new(h: &DMatrix<Complex64>, channels: &ChannelSet) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::Domain("Hamiltonian must be square and non-empty".into()));
        }
        let n = h.nrows();
        let mut out_rate = vec![0.0; n];
        let mut jumps = Vec::with_capacity(channels.len());
        for c in channels.iter() {
            if c.from >= n || c.to >= n {
                return Err(Error::Domain(format!(
                    "channel {}->{} outside the {n}-level Hamiltonian",
                    c.from, c.to
                )));
            }
            if c.rate > 0.0 {
                jumps.push((c.from, c.to, c.rate));
                out_rate[c.from] += c.rate;
            }
        }
        let h = (0..n * n).map(|k| h[(k / n, k % n)]).collect();
        Ok(Self { n, h, jumps, out_rate })
    }

    /// Fastest time scale of the generator.
    fn scale(&self) -> f64 {
        let hmax = self.h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let gmax = self.jumps.iter().map(|j| j.2).fold(0.0, f64::max);
        hmax.max(gmax)
    }

    fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        for a in 0..n {
            for b in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.h[a * n + k] * rho[k * n + b] - rho[a * n + k] * self.h[k * n + b];
                }
                out[a * n + b] = -I * acc - rho[a * n + b] * (0.5 * (self.out_rate[a] + self.out_rate[b]));
            }
        }
        for &(from, to, rate) in &self.jumps {
            out[to * n + to] += rho[from * n + from] * rate;
        }
    }
}

struct Rk4 {
    gen: Generator,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(gen: Generator) -> Self {
        let m = gen.n * gen.n;
        Self { gen, k: std::array::from_fn(|_| vec![ZERO; m]), tmp: vec![ZERO; m] }
    }

    fn step(&mut self, rho: &mut [Complex64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.gen.apply(rho, k1);
        for (t, (r, k)) in self.tmp.iter_mut().zip(rho.iter().zip(k1.iter())) {
            *t = r + k * (0.5 * dt);
        }
        self.gen.apply(&self.tmp, k2);
        for (t, (r, k)) in self.tmp.iter_mut().zip(rho.iter().zip(k2.iter())) {
            *t = r + k * (0.5 * dt);
        }
        self.gen.apply(&self.tmp, k3);
        for (t, (r, k)) in self.tmp.iter_mut().zip(rho.iter().zip(k3.iter())) {
            *t = r + k * dt;
        }
        self.gen.apply(&self.tmp, k4);
        for i in 0..rho.len() {
            rho[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

fn to_flat(rho: &DensityMatrix) -> Vec<Complex64> {
    let n = rho.dim();
    (0..n * n).map(|k| rho.entries[(k / n, k % n)]).collect()
}

fn from_flat(n: usize, v: &[Complex64]) -> DensityMatrix {
    DensityMatrix::from_raw(DMatrix::from_fn(n, n, |i, j| v[i * n + j]))
}

/// Validate inputs and return (integrator, number of steps, actual step).
fn prepare(
    rho0: &DensityMatrix,
    h: &DMatrix<Complex64>,
    channels: &ChannelSet,
    duration: f64,
    step: f64,
) -> Result<(Rk4, usize, f64)> {
    if rho0.dim() != h.nrows() {
        return Err(Error::Domain(format!(
            "state has {} levels but the Hamiltonian has {}",
            rho0.dim(),
            h.nrows()
        )));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration must be non-negative, got {duration}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    let gen = Generator::new(h, channels)?;
    let scale = gen.scale();
    if scale > 0.0 {
        let limit = STABILITY_FACTOR / scale;
        if step > limit {
            return Err(Error::Stability { step, limit });
        }
    }
    let steps = (duration / step).ceil() as usize;
    let dt = if steps == 0 { 0.0 } else { duration / steps as f64 };
    Ok((Rk4::new(gen), steps, dt))
}

/// Largest step accepted by the stability guard for this generator.
pub fn max_stable_step(h: &DMatrix<Complex64>, channels: &ChannelSet) -> Result<f64> {
    let scale = Generator::new(h, channels)?.scale();
    Ok(if scale > 0.0 { STABILITY_FACTOR / scale } else { f64::INFINITY })
}

/// Integrate and record every step. The step is shrunk so an integer
/// number of steps spans `duration` exactly.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &DMatrix<Complex64>,
    channels: &ChannelSet,
    duration: f64,
    step: f64,
) -> Result<Trajectory> {
    evolve_sampled(rho0, h, channels, duration, step, 1)
}

/// As [`evolve`], recording every `stride`-th step plus the final state.
pub fn evolve_sampled(
    rho0: &DensityMatrix,
    h: &DMatrix<Complex64>,
    channels: &ChannelSet,
    duration: f64,
    step: f64,
    stride: usize,
) -> Result<Trajectory> {
    let (mut rk, steps, dt) = prepare(rho0, h, channels, duration, step)?;
    let stride = stride.max(1);
    let n = rho0.dim();
    let mut v = to_flat(rho0);
    let mut traj = Trajectory::default();
    traj.push(0.0, rho0.clone());
    for s in 1..=steps {
        rk.step(&mut v, dt);
        if s % stride == 0 || s == steps {
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numeric(format!("integration diverged at step {s}")));
            }
            traj.push(s as f64 * dt, from_flat(n, &v));
        }
    }
    Ok(traj)
}

/// Final state only.
pub fn evolve_final(
    rho0: &DensityMatrix,
    h: &DMatrix<Complex64>,
    channels: &ChannelSet,
    duration: f64,
    step: f64,
) -> Result<DensityMatrix> {
    let (mut rk, steps, dt) = prepare(rho0, h, channels, duration, step)?;
    let mut v = to_flat(rho0);
    for _ in 0..steps {
        rk.step(&mut v, dt);
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("integration diverged".into()));
    }
    Ok(from_flat(rho0.dim(), &v))
}

/// Vectorised generator acting on row-major vec(rho).
pub fn liouvillian(h: &DMatrix<Complex64>, channels: &ChannelSet) -> Result<DMatrix<Complex64>> {
    let gen = Generator::new(h, channels)?;
    let n = gen.n;
    let m = n * n;
    let mut l = DMatrix::from_element(m, m, ZERO);
    let mut basis = vec![ZERO; m];
    let mut col = vec![ZERO; m];
    for k in 0..m {
        basis[k] = Complex64::new(1.0, 0.0);
        gen.apply(&basis, &mut col);
        for (r, c) in col.iter().enumerate() {
            l[(r, k)] = *c;
        }
        basis[k] = ZERO;
    }
    Ok(l)
}

/// Unique stationary state from the null space of the generator.
pub fn steady_state(h: &DMatrix<Complex64>, channels: &ChannelSet) -> Result<DensityMatrix> {
    let l = liouvillian(h, channels)?;
    let n = h.nrows();
    let svd = l.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not return right vectors".into()))?;
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let tol = 1e-9 * smax.max(1.0);
    let null: Vec<usize> = (0..s.len()).filter(|&k| s[k] <= tol).collect();
    if null.len() != 1 {
        return Err(Error::Multiplicity { dimension: null.len() });
    }
    let row = v_t.row(null[0]);
    let mut rho = DMatrix::from_fn(n, n, |i, j| row[i * n + j].conj());
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = rho.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::Numeric("stationary vector has zero trace".into()));
    }
    rho /= tr;
    let vec = nalgebra::DVector::from_fn(n * n, |k, _| rho[(k / n, k % n)]);
    let residual = (&l * vec).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(Error::Numeric(format!("steady-state residual {residual:.3e}")));
    }
    DensityMatrix::new(rho)
}

/// Closed-form stationary state of a single e-f tone with decay gamma_r:
/// returns (rho_ee, rho_ff, rho_ef) in the frame of [`rwa_hamiltonian`].
pub fn analytic_ef_steady_state(
    p_ef: f64,
    detuning: f64,
    omega: f64,
    gamma_r: f64,
) -> Result<(f64, f64, Complex64)> {
    if !(gamma_r > 0.0) {
        return Err(Error::Domain(format!("gamma_r must be positive, got {gamma_r}")));
    }
    if !(0.0..=1.0).contains(&p_ef) {
        return Err(Error::Domain(format!("p_ef must be in [0, 1], got {p_ef}")));
    }
    let d0 = detuning * detuning + 0.25 * gamma_r * gamma_r;
    let denom = d0 + 0.5 * omega * omega;
    let rho_ff = p_ef * 0.25 * omega * omega / denom;
    let rho_ee = p_ef - rho_ff;
    let rho_ef = Complex64::new(-detuning, 0.5 * gamma_r) * (p_ef * omega / (2.0 * denom));
    Ok((rho_ee, rho_ff, rho_ef))
}
