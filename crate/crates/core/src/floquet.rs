//! Period maps of time-periodic quadratic Hamiltonians at the symplectic
//! level.
//!
//! A quadratic Hamiltonian `H(t) = Q^t B(t) Q / 2` over the quadrature
//! vector `Q = (p_1..p_N, q_1..q_N)` drives the linear flow
//! `dS/dt = J B(t) S`. This module integrates that flow, extracts the
//! one-period monodromy matrix with its phases and conjugacy labels, and
//! checks numerically that the spectrum of `S(t) S_T S(t)^{-1}` does not
//! move with `t` — the conserved-spectrum property that makes the phases
//! meaningful invariants.
//!
//! For monodromies whose eigenvalue pairs all lie on the unit circle away
//! from the negative real axis, [`effective_hamiltonian`] returns the
//! constant quadratic form `B_ef` with `S_T = exp(T J B_ef)` through a
//! principal matrix logarithm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::gaussian_state::j_matrix;
use crate::{Error, Result};

/// Target Frobenius residual of `S^t J S - J` for propagated maps.
pub const SYMPLECTIC_RESIDUAL_TOL: f64 = 1e-9;

/// Hard cap on integration steps during residual-driven refinement.
pub const MAX_STEPS: usize = 1 << 22;

/// Tolerance for Hamiltonian symmetry and periodicity validation.
pub const HAMILTONIAN_TOL: f64 = 1e-12;

/// Half-width of the parabolic trace window `| |tr| - 2 | <=` this.
pub const PARABOLIC_TOL: f64 = 1e-10;

/// Unit-circle tolerance for eigenvalue classification and phases.
pub const UNIT_CIRCLE_TOL: f64 = 1e-10;

/// Condition-number estimate above which similarity transforms are
/// refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Number of equispaced period fractions used by [`monodromy`] for its
/// spectrum-invariance residual.
pub const INVARIANCE_SAMPLES: usize = 8;

/// A time-periodic quadratic Hamiltonian: the symmetric form `B(t)` and
/// its period.
pub struct QuadraticHamiltonian {
    n_modes: usize,
    period: f64,
    b: Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
}

impl QuadraticHamiltonian {
    /// Wraps a matrix-valued function of time. Symmetry and
    /// `B(t + T) = B(t)` are checked at a handful of sample times to
    /// [`HAMILTONIAN_TOL`]; they cannot be proven for arbitrary closures.
    pub fn new(
        n_modes: usize,
        period: f64,
        b: Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidInput("need at least one mode".into()));
        }
        if !period.is_finite() || period <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "period must be finite and positive, got {}",
                period
            )));
        }
        let dim = 2 * n_modes;
        for frac in [0.0, 0.25, 1.0 / 3.0, 0.5, 0.7, 1.0] {
            let t = frac * period;
            let m = b(t);
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::InvalidInput(format!(
                    "B({}) is {}x{}, expected {}x{}",
                    t,
                    m.nrows(),
                    m.ncols(),
                    dim,
                    dim
                )));
            }
            let scale = 1.0 + m.amax();
            let asym = (&m - m.transpose()).amax();
            if asym > HAMILTONIAN_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "B({}) is not symmetric: asymmetry {:.3e}",
                    t, asym
                )));
            }
            let drift = (&m - b(t + period)).amax();
            if drift > HAMILTONIAN_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "B is not {}-periodic: |B({}) - B({})| = {:.3e}",
                    period,
                    t,
                    t + period,
                    drift
                )));
            }
        }
        Ok(QuadraticHamiltonian { n_modes, period, b })
    }

    /// Time-independent Hamiltonian with an arbitrary (positive) nominal
    /// period.
    pub fn constant(b: DMatrix<f64>, period: f64) -> Result<Self> {
        if b.nrows() != b.ncols() || b.nrows() == 0 || !b.nrows().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "constant form must be square with even dimension, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let n_modes = b.nrows() / 2;
        QuadraticHamiltonian::new(n_modes, period, Box::new(move |_| b.clone()))
    }

    /// Parametrically driven single-mode oscillator:
    /// `B(t) = diag(1, omega0^2 (1 + epsilon cos(drive t)))`, with the
    /// drive's natural period `2 pi / drive` unless overridden.
    pub fn mathieu(
        omega0: f64,
        epsilon: f64,
        drive: f64,
        period_override: Option<f64>,
    ) -> Result<Self> {
        if !omega0.is_finite() || !epsilon.is_finite() || !drive.is_finite() || drive <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "modulated oscillator needs finite omega0, epsilon and positive drive; got {}, {}, {}",
                omega0, epsilon, drive
            )));
        }
        let period = period_override.unwrap_or(2.0 * std::f64::consts::PI / drive);
        QuadraticHamiltonian::new(
            1,
            period,
            Box::new(move |t| {
                DMatrix::from_diagonal(&DVector::from_vec(vec![
                    1.0,
                    omega0 * omega0 * (1.0 + epsilon * (drive * t).cos()),
                ]))
            }),
        )
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn b_at(&self, t: f64) -> DMatrix<f64> {
        (self.b)(t)
    }
}

/// Conjugacy label of one eigenvalue pair of a symplectic map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Conjugacy {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

impl std::fmt::Display for Conjugacy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Conjugacy::Elliptic => "elliptic",
            Conjugacy::Hyperbolic => "hyperbolic",
            Conjugacy::Parabolic => "parabolic",
        })
    }
}

/// One-period summary of a periodic quadratic Hamiltonian.
#[derive(Clone, Debug)]
pub struct MonodromyReport {
    /// The period map `S(T)`.
    pub s_t: DMatrix<f64>,
    /// Phases of unit-circle eigenvalues, folded to `(-pi/T, pi/T]`,
    /// sorted ascending.
    pub phases: Vec<f64>,
    /// One label per eigenvalue pair, in canonical (sorted) order.
    pub conjugacy: Vec<Conjugacy>,
    /// Frobenius norm of `S_T^t J S_T - J`.
    pub symplectic_residual: f64,
    /// Largest eigenvalue-matching distance of `S(t) S_T S(t)^{-1}`
    /// against `S_T` over the sampled period fractions.
    pub invariance_residual: f64,
    /// The period the map was integrated over.
    pub period: f64,
}

fn symplectic_residual(s: &DMatrix<f64>) -> f64 {
    let j = j_matrix(s.nrows() / 2);
    (s.transpose() * &j * s - &j).norm()
}

/// Integrates `dS/dt = J B(t) S` from `t0` to `t1` with a fixed number of
/// classical 4th-order steps. No residual control; see [`propagate`].
pub fn propagate_fixed_steps(
    ham: &QuadraticHamiltonian,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(Error::InvalidInput("step count must be at least 1".into()));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidInput(format!(
            "integration bounds must be finite, got [{}, {}]",
            t0, t1
        )));
    }
    let dim = 2 * ham.n_modes;
    let j = j_matrix(ham.n_modes);
    let mut s = DMatrix::<f64>::identity(dim, dim);
    if t0 == t1 {
        return Ok(s);
    }
    let h = (t1 - t0) / steps as f64;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let a1 = &j * ham.b_at(t);
        let a2 = &j * ham.b_at(t + 0.5 * h);
        let a4 = &j * ham.b_at(t + h);
        let k1 = &a1 * &s;
        let k2 = &a2 * (&s + (h / 2.0) * &k1);
        let k3 = &a2 * (&s + (h / 2.0) * &k2);
        let k4 = &a4 * (&s + h * &k3);
        s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(s)
}

/// Integrates `dS/dt = J B(t) S` from `t0` to `t1`, doubling the step
/// count from `steps` until the symplectic residual of the result is
/// within [`SYMPLECTIC_RESIDUAL_TOL`] (or [`MAX_STEPS`] is exceeded).
pub fn propagate(
    ham: &QuadraticHamiltonian,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(Error::InvalidInput("step count must be at least 1".into()));
    }
    let mut n = steps;
    loop {
        let s = propagate_fixed_steps(ham, t0, t1, n)?;
        let residual = symplectic_residual(&s);
        if residual <= SYMPLECTIC_RESIDUAL_TOL {
            return Ok(s);
        }
        if n >= MAX_STEPS {
            return Err(Error::Accuracy(format!(
                "symplectic residual {:.3e} still above {:.0e} at {} steps",
                residual, SYMPLECTIC_RESIDUAL_TOL, n
            )));
        }
        n = (n * 2).min(MAX_STEPS);
    }
}

/// Sorts a complex spectrum by (argument, modulus); the fixed order used
/// for eigenvalue matching.
fn sorted_spectrum(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut eigs: Vec<Complex64> = m.complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| {
        (a.arg(), a.norm())
            .partial_cmp(&(b.arg(), b.norm()))
            .expect("eigenvalues of a finite matrix are finite")
    });
    eigs
}

fn spectrum_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest movement of the spectrum of `S(t) S_T S(t)^{-1}` relative to
/// the spectrum of `S_T`, over the given times. With exact arithmetic
/// the similarity leaves the spectrum fixed, so the return value is a
/// pure numerical-error gauge.
pub fn invariant_spectrum_check(
    ham: &QuadraticHamiltonian,
    t_samples: &[f64],
    steps: usize,
) -> Result<f64> {
    let period = ham.period;
    for &t in t_samples {
        if !(0.0..=period).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "sample time {} outside [0, {}]",
                t, period
            )));
        }
    }
    let s_t = propagate(ham, 0.0, period, steps)?;
    let reference = sorted_spectrum(&s_t);
    let j = j_matrix(ham.n_modes);

    let distances: Vec<Result<f64>> = t_samples
        .par_iter()
        .map(|&t| {
            let s = propagate(ham, 0.0, t, steps)?;
            let s_inv = -(&j) * s.transpose() * &j;
            let cond = s.norm() * s_inv.norm();
            if cond > CONDITION_LIMIT {
                return Err(Error::Accuracy(format!(
                    "similarity at t = {} is ill-conditioned (estimate {:.3e})",
                    t, cond
                )));
            }
            let m = &s * &s_t * s_inv;
            Ok(spectrum_distance(&reference, &sorted_spectrum(&m)))
        })
        .collect();

    let mut max_distance = 0.0f64;
    for d in distances {
        max_distance = max_distance.max(d?);
    }
    Ok(max_distance)
}

/// Conjugacy labels of a symplectic map, one per eigenvalue pair, in
/// canonical (sorted) order. Single-mode maps are labeled by the trace:
/// parabolic within [`PARABOLIC_TOL`] of `|tr| = 2`, elliptic below,
/// hyperbolic above. Larger maps are labeled through the unit-circle
/// test on each eigenvalue.
pub fn classify_conjugacy(s: &DMatrix<f64>) -> Result<Vec<Conjugacy>> {
    if s.nrows() != s.ncols() || s.nrows() == 0 || !s.nrows().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "expected a square even-dimensional matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let residual = symplectic_residual(s);
    if residual > SYMPLECTIC_RESIDUAL_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not symplectic: residual {:.3e} exceeds {:.0e}",
            residual, SYMPLECTIC_RESIDUAL_TOL
        )));
    }
    let n_pairs = s.nrows() / 2;
    if n_pairs == 1 {
        let tr = s.trace();
        let label = if (tr.abs() - 2.0).abs() <= PARABOLIC_TOL {
            Conjugacy::Parabolic
        } else if tr.abs() < 2.0 {
            Conjugacy::Elliptic
        } else {
            Conjugacy::Hyperbolic
        };
        return Ok(vec![label]);
    }

    let mut elliptic = 0usize;
    let mut hyperbolic = 0usize;
    let mut parabolic = 0usize;
    for eig in sorted_spectrum(s) {
        if (eig.norm() - 1.0).abs() <= UNIT_CIRCLE_TOL {
            if (eig - Complex64::new(1.0, 0.0)).norm() <= UNIT_CIRCLE_TOL
                || (eig + Complex64::new(1.0, 0.0)).norm() <= UNIT_CIRCLE_TOL
            {
                parabolic += 1;
            } else {
                elliptic += 1;
            }
        } else {
            hyperbolic += 1;
        }
    }
    let mut labels = Vec::with_capacity(n_pairs);
    labels.extend(std::iter::repeat_n(Conjugacy::Elliptic, elliptic / 2));
    labels.extend(std::iter::repeat_n(Conjugacy::Hyperbolic, hyperbolic / 2));
    labels.extend(std::iter::repeat_n(Conjugacy::Parabolic, parabolic / 2));
    // Eigenvalues straddling a tolerance boundary can leave odd counts;
    // those pairs sit at the elliptic/hyperbolic border, which is the
    // parabolic stratum.
    while labels.len() < n_pairs {
        labels.push(Conjugacy::Parabolic);
    }
    labels.sort();
    Ok(labels)
}

/// One-period summary: the monodromy matrix, its folded phases and
/// conjugacy labels, and the measured symplectic and spectrum-invariance
/// residuals.
pub fn monodromy(ham: &QuadraticHamiltonian, steps: usize) -> Result<MonodromyReport> {
    let period = ham.period;
    let s_t = propagate(ham, 0.0, period, steps)?;
    let residual = symplectic_residual(&s_t);

    let mut phases: Vec<f64> = Vec::new();
    for eig in s_t.complex_eigenvalues().iter() {
        if (eig.norm() - 1.0).abs() <= UNIT_CIRCLE_TOL {
            let mut phi = -eig.arg() / period;
            let half_band = std::f64::consts::PI / period;
            if phi <= -half_band {
                phi += 2.0 * half_band;
            }
            phases.push(phi);
        }
    }
    phases.sort_by(|a, b| a.partial_cmp(b).expect("phases are finite"));

    let conjugacy = classify_conjugacy(&s_t)?;
    let samples: Vec<f64> = (0..INVARIANCE_SAMPLES)
        .map(|k| k as f64 * period / INVARIANCE_SAMPLES as f64)
        .collect();
    let invariance_residual = invariant_spectrum_check(ham, &samples, steps)?;

    Ok(MonodromyReport {
        s_t,
        phases,
        conjugacy,
        symplectic_residual: residual,
        invariance_residual,
        period,
    })
}

/// Principal square root of a real matrix with no eigenvalues on the
/// closed negative real axis, by the coupled Newton iteration
/// `Y <- (Y + Z^{-1})/2`, `Z <- (Z + Y^{-1})/2`.
fn principal_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..100 {
        let z_inv = z.clone().try_inverse().ok_or_else(|| Error::Singular {
            matrix: "square-root iterate".into(),
            context: "principal matrix logarithm".into(),
        })?;
        let y_inv = y.clone().try_inverse().ok_or_else(|| Error::Singular {
            matrix: "square-root iterate".into(),
            context: "principal matrix logarithm".into(),
        })?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Err(Error::Accuracy(
        "matrix square root did not converge in 100 iterations".into(),
    ))
}

/// Principal logarithm of a matrix within 0.25 of the identity, via the
/// inverse hyperbolic tangent series
/// `log A = 2 atanh(Z), Z = (A - I)(A + I)^{-1}`.
fn log_near_identity(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let num = a - &id;
    let den = (a + &id).try_inverse().ok_or_else(|| Error::Singular {
        matrix: "A + I".into(),
        context: "principal matrix logarithm".into(),
    })?;
    let z = num * den;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut acc = z.clone();
    for k in 1..=24usize {
        term *= &z2;
        let add = &term / (2 * k + 1) as f64;
        acc += &add;
        if add.norm() <= 1e-18 * (1.0 + acc.norm()) {
            break;
        }
    }
    Ok(acc * 2.0)
}

/// Recovers the constant quadratic form generating the period map:
/// `B_ef` with `S_T = exp(T J B_ef)`, from the principal logarithm of
/// the monodromy. Exists when every eigenvalue pair is elliptic (or the
/// map is exactly `±I`); hyperbolic or parabolic monodromies have no
/// real principal logarithm of the required form and are refused.
pub fn effective_hamiltonian(report: &MonodromyReport) -> Result<DMatrix<f64>> {
    let s = &report.s_t;
    let dim = s.nrows();
    let n = dim / 2;
    let t = report.period;
    let id = DMatrix::<f64>::identity(dim, dim);
    let j = j_matrix(n);

    // S = I and S = -I have exact logarithms (0 and pi J) even though
    // their labels are parabolic; handle them before the label gate.
    if (s - &id).norm() <= 1e-10 {
        return Ok(DMatrix::zeros(dim, dim));
    }
    if (s + &id).norm() <= 1e-10 {
        return Ok(std::f64::consts::PI / t * id);
    }
    if let Some(bad) = report.conjugacy.iter().find(|c| **c != Conjugacy::Elliptic) {
        return Err(Error::NoPrincipalLog(format!(
            "monodromy has a {} eigenvalue pair; only elliptic maps have a real principal logarithm here",
            bad
        )));
    }
    for eig in s.complex_eigenvalues().iter() {
        if eig.arg().abs() > std::f64::consts::PI - 1e-8 {
            return Err(Error::NoPrincipalLog(format!(
                "eigenvalue {} lies on the negative real axis within tolerance",
                eig
            )));
        }
    }

    let mut a = s.clone();
    let mut scaling = 0u32;
    while (&a - &id).norm() > 0.25 {
        if scaling >= 40 {
            return Err(Error::Accuracy(
                "inverse scaling did not contract the monodromy toward the identity".into(),
            ));
        }
        a = principal_sqrt(&a)?;
        scaling += 1;
    }
    let log = log_near_identity(&a)? * 2.0f64.powi(scaling as i32);

    let b_raw = -(&j) * log / t;
    let asym = (&b_raw - b_raw.transpose()).norm();
    if asym > 1e-9 * (1.0 + b_raw.norm()) {
        return Err(Error::Accuracy(format!(
            "recovered quadratic form is not symmetric: residual {:.3e}",
            asym
        )));
    }
    let b_ef = (&b_raw + b_raw.transpose()) * 0.5;

    let roundtrip = ((t * &j * &b_ef).exp() - s).norm();
    if roundtrip > SYMPLECTIC_RESIDUAL_TOL {
        return Err(Error::Accuracy(format!(
            "exp(T J B_ef) misses the monodromy by {:.3e}",
            roundtrip
        )));
    }
    Ok(b_ef)
}
