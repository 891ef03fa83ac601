//! Multimode Gaussian states: construction, validation, and moments.
//!
//! A state of `N` modes is described by the mean vector of the quadrature
//! operators and their dispersion (covariance) matrix, in dimensionless
//! units with `hbar = 1` and the crate-wide ordering `(p_1..p_N, q_1..q_N)`.
//! Physicality is the generalized uncertainty relation: all symplectic
//! eigenvalues of the dispersion matrix must be at least 1/2.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance below 1/2 admitted for symplectic eigenvalues, so states
/// produced by double-precision symplectic evolution still validate.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// Relative tolerance for dispersion-matrix symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Residual tolerance for accepting a matrix as symplectic.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// The canonical antisymmetric form `J = [[0, -I], [I, 0]]` for the
/// `(p, q)` block ordering; satisfies `J^t = -J` and `J^2 = -I` exactly.
#[derive(Clone, Debug)]
pub struct SymplecticForm {
    n_modes: usize,
    j: DMatrix<f64>,
}

impl SymplecticForm {
    /// Builds the form for `n_modes` modes (a `2N x 2N` matrix).
    pub fn new(n_modes: usize) -> Self {
        let n = n_modes;
        let j = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            if r < n && c == r + n {
                -1.0
            } else if r >= n && c == r - n {
                1.0
            } else {
                0.0
            }
        });
        SymplecticForm { n_modes, j }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }
}

/// Convenience accessor for the canonical form matrix.
pub fn j_matrix(n_modes: usize) -> DMatrix<f64> {
    SymplecticForm::new(n_modes).j
}

/// Serialized document layout for a state: plain JSON with `mean` of
/// length `2N` and `disp` as `2N` rows of `2N` reals.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct StateDoc {
    n_modes: usize,
    mean: Vec<f64>,
    disp: Vec<Vec<f64>>,
}

/// A multimode Gaussian state: mean quadrature vector and dispersion
/// matrix in the `(p_1..p_N, q_1..q_N)` ordering.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "StateDoc", into = "StateDoc")]
pub struct GaussianState {
    pub n_modes: usize,
    pub mean: DVector<f64>,
    pub disp: DMatrix<f64>,
}

impl TryFrom<StateDoc> for GaussianState {
    type Error = Error;

    fn try_from(doc: StateDoc) -> Result<GaussianState> {
        let n = doc.n_modes;
        if n == 0 {
            return Err(Error::InvalidState("n_modes must be at least 1".into()));
        }
        if doc.mean.len() != 2 * n {
            return Err(Error::InvalidState(format!(
                "mean has length {}, expected {} for {} modes",
                doc.mean.len(),
                2 * n,
                n
            )));
        }
        if doc.disp.len() != 2 * n || doc.disp.iter().any(|row| row.len() != 2 * n) {
            return Err(Error::InvalidState(format!(
                "disp must be a {0} x {0} matrix of rows",
                2 * n
            )));
        }
        let mean = DVector::from_vec(doc.mean);
        let disp = DMatrix::from_fn(2 * n, 2 * n, |r, c| doc.disp[r][c]);
        Ok(GaussianState {
            n_modes: n,
            mean,
            disp,
        })
    }
}

impl From<GaussianState> for StateDoc {
    fn from(state: GaussianState) -> StateDoc {
        let n = state.n_modes;
        StateDoc {
            n_modes: n,
            mean: state.mean.iter().copied().collect(),
            disp: (0..2 * n)
                .map(|r| (0..2 * n).map(|c| state.disp[(r, c)]).collect())
                .collect(),
        }
    }
}

/// Physicality report produced by [`validate`].
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    /// Largest absolute asymmetry `|disp - disp^t|` entry.
    pub symmetry_residual: f64,
    /// Symplectic eigenvalues of the dispersion matrix, sorted ascending.
    pub symplectic_eigenvalues: Vec<f64>,
    /// Smallest symplectic eigenvalue; physical states have it >= 1/2.
    pub min_symplectic_eigenvalue: f64,
    /// Violated constraints, one message each; empty for a physical state.
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_physical(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Vacuum of `n_modes` modes: zero means, dispersion `I/2`.
pub fn make_vacuum(n_modes: usize) -> Result<GaussianState> {
    if n_modes == 0 {
        return Err(Error::InvalidInput(
            "make_vacuum requires at least one mode".into(),
        ));
    }
    Ok(GaussianState {
        n_modes,
        mean: DVector::zeros(2 * n_modes),
        disp: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5,
    })
}

/// Coherent state with one complex amplitude per mode: vacuum dispersion
/// and means `p_j = sqrt(2) Im(alpha_j)`, `q_j = sqrt(2) Re(alpha_j)`.
pub fn make_coherent(alphas: &[Complex64]) -> Result<GaussianState> {
    let n = alphas.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "make_coherent requires at least one amplitude".into(),
        ));
    }
    let mut state = make_vacuum(n)?;
    for (j, alpha) in alphas.iter().enumerate() {
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::InvalidInput(format!(
                "amplitude {} is not finite: {}",
                j, alpha
            )));
        }
        state.mean[j] = std::f64::consts::SQRT_2 * alpha.im;
        state.mean[n + j] = std::f64::consts::SQRT_2 * alpha.re;
    }
    Ok(state)
}

/// Thermal state with one mean occupation per mode: zero means and
/// per-mode variances `nbar_j + 1/2` on both quadratures.
pub fn make_thermal(nbars: &[f64]) -> Result<GaussianState> {
    let n = nbars.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "make_thermal requires at least one occupation".into(),
        ));
    }
    let mut state = make_vacuum(n)?;
    for (j, &nbar) in nbars.iter().enumerate() {
        if nbar.is_nan() || nbar < 0.0 {
            return Err(Error::InvalidInput(format!(
                "mean occupation must be non-negative, got {} for mode {}",
                nbar, j
            )));
        }
        state.disp[(j, j)] = nbar + 0.5;
        state.disp[(n + j, n + j)] = nbar + 0.5;
    }
    Ok(state)
}

/// Single-mode squeezed vacuum: zero means and dispersion
/// `R(phi/2) diag(e^{2r}, e^{-2r}) R(phi/2)^t / 2` with `R` a rotation
/// of the `(p, q)` plane. The determinant is exactly 1/4 (pure state).
pub fn make_squeezed_vacuum(r: f64, phi: f64) -> Result<GaussianState> {
    if !r.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "squeezing parameters must be finite, got r = {}, phi = {}",
            r, phi
        )));
    }
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![(2.0 * r).exp(), (-2.0 * r).exp()]));
    let disp = 0.5 * &rot * diag * rot.transpose();
    Ok(GaussianState {
        n_modes: 1,
        mean: DVector::zeros(2),
        disp,
    })
}

/// Symplectic eigenvalues of a dispersion matrix: the moduli of the
/// eigenvalue pairs of `J * disp`, sorted ascending (one value per mode).
pub fn symplectic_eigenvalues(disp: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = disp.nrows();
    if dim == 0 || !dim.is_multiple_of(2) || disp.ncols() != dim {
        return Err(Error::InvalidInput(format!(
            "dispersion matrix must be square with even dimension, got {}x{}",
            disp.nrows(),
            disp.ncols()
        )));
    }
    let n = dim / 2;
    let jm = j_matrix(n) * disp;
    let eigs = jm.complex_eigenvalues();
    let mut moduli: Vec<f64> = eigs.iter().map(|e| e.norm()).collect();
    moduli.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalue moduli are finite"));
    // The spectrum comes in +/- i nu pairs with equal moduli; average each
    // pair to cancel the tiny split left by the eigensolver.
    Ok((0..n).map(|k| 0.5 * (moduli[2 * k] + moduli[2 * k + 1])).collect())
}

/// Checks structure and physicality, reporting the symmetry residual, the
/// symplectic spectrum, and every violated constraint. Malformed shapes
/// and non-finite entries are errors; physicality failures are reported
/// in the returned [`ValidationReport`].
pub fn validate(state: &GaussianState) -> Result<ValidationReport> {
    let n = state.n_modes;
    if n == 0 {
        return Err(Error::InvalidState("state has zero modes".into()));
    }
    if state.mean.len() != 2 * n {
        return Err(Error::InvalidState(format!(
            "mean has length {}, expected {}",
            state.mean.len(),
            2 * n
        )));
    }
    if state.disp.nrows() != 2 * n || state.disp.ncols() != 2 * n {
        return Err(Error::InvalidState(format!(
            "disp is {}x{}, expected {}x{}",
            state.disp.nrows(),
            state.disp.ncols(),
            2 * n,
            2 * n
        )));
    }
    if state.mean.iter().any(|v| !v.is_finite()) || state.disp.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(
            "state contains non-finite entries".into(),
        ));
    }

    let mut violations = Vec::new();
    let symmetry_residual = (&state.disp - state.disp.transpose()).amax();
    let scale = 1.0 + state.disp.amax();
    if symmetry_residual > SYMMETRY_TOL * scale {
        violations.push(format!(
            "dispersion asymmetry {:.3e} exceeds relative tolerance {:.1e}",
            symmetry_residual, SYMMETRY_TOL
        ));
    }

    let symplectic_eigs = symplectic_eigenvalues(&state.disp)?;
    let min_eig = symplectic_eigs[0];
    if min_eig < 0.5 - PHYSICALITY_TOL {
        violations.push(format!(
            "minimum symplectic eigenvalue {:.12} is below 1/2 (uncertainty relation)",
            min_eig
        ));
    }

    Ok(ValidationReport {
        symmetry_residual,
        min_symplectic_eigenvalue: min_eig,
        symplectic_eigenvalues: symplectic_eigs,
        violations,
    })
}

/// Validates and requires physicality, converting any violation into an
/// invalid-state error. Used as the precondition gate by consumers.
pub fn ensure_physical(state: &GaussianState) -> Result<()> {
    let report = validate(state)?;
    if report.is_physical() {
        Ok(())
    } else {
        Err(Error::InvalidState(report.violations.join("; ")))
    }
}

/// Applies a symplectic transformation `S` and displacement `d`:
/// `mean -> S mean + d`, `disp -> S disp S^t`. `S` must satisfy
/// `S^t J S = J` within [`SYMPLECTIC_TOL`] (Frobenius norm).
pub fn apply_symplectic(
    state: &GaussianState,
    s: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<GaussianState> {
    let dim = 2 * state.n_modes;
    if s.nrows() != dim || s.ncols() != dim {
        return Err(Error::InvalidInput(format!(
            "transformation is {}x{}, expected {}x{}",
            s.nrows(),
            s.ncols(),
            dim,
            dim
        )));
    }
    if d.len() != dim {
        return Err(Error::InvalidInput(format!(
            "displacement has length {}, expected {}",
            d.len(),
            dim
        )));
    }
    let j = j_matrix(state.n_modes);
    let residual = (s.transpose() * &j * s - &j).norm();
    if residual > SYMPLECTIC_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not symplectic: residual |S^t J S - J| = {:.3e} exceeds {:.1e}",
            residual, SYMPLECTIC_TOL
        )));
    }
    Ok(GaussianState {
        n_modes: state.n_modes,
        mean: s * &state.mean + d,
        disp: s * &state.disp * s.transpose(),
    })
}

/// Mean photon number of mode `mode` (0-based):
/// `(sigma_pp + sigma_qq - 1)/2 + (<p>^2 + <q>^2)/2`.
pub fn mean_photon_number(state: &GaussianState, mode: usize) -> Result<f64> {
    let n = state.n_modes;
    if mode >= n {
        return Err(Error::InvalidInput(format!(
            "mode index {} out of range for {} modes",
            mode, n
        )));
    }
    let spp = state.disp[(mode, mode)];
    let sqq = state.disp[(n + mode, n + mode)];
    let p = state.mean[mode];
    let q = state.mean[n + mode];
    Ok(0.5 * (spp + sqq - 1.0) + 0.5 * (p * p + q * q))
}

/// Purity `(2^{2N} det disp)^{-1/2}`; equals 1 exactly for pure states.
pub fn purity(state: &GaussianState) -> Result<f64> {
    let n = state.n_modes;
    let det = state.disp.determinant();
    if det <= 0.0 {
        return Err(Error::InvalidState(format!(
            "dispersion determinant must be positive, got {:.3e}",
            det
        )));
    }
    Ok(1.0 / (4.0f64.powi(n as i32) * det).sqrt())
}

/// Reads a state document (JSON) from a string.
pub fn state_from_json(text: &str) -> Result<GaussianState> {
    Ok(serde_json::from_str(text)?)
}

/// Writes a state document (JSON) to a string.
pub fn state_to_json(state: &GaussianState) -> Result<String> {
    Ok(serde_json::to_string_pretty(state)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const SQRT_2: f64 = std::f64::consts::SQRT_2;

    fn random_symplectic(n_modes: usize, rng: &mut StdRng) -> DMatrix<f64> {
        // exp(J A) with A symmetric is symplectic.
        let dim = 2 * n_modes;
        let mut a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-0.5..0.5));
        a = 0.5 * (&a + a.transpose());
        (j_matrix(n_modes) * a).exp()
    }

    #[test]
    fn vacuum_has_unit_uncertainty() {
        let state = make_vacuum(1).unwrap();
        assert_eq!(state.mean.len(), 2);
        assert_eq!(state.disp, DMatrix::identity(2, 2) * 0.5);
        let state2 = make_vacuum(2).unwrap();
        assert_eq!(state2.mean.len(), 4);
        assert_eq!(state2.disp, DMatrix::identity(4, 4) * 0.5);
        let report = validate(&make_vacuum(3).unwrap()).unwrap();
        assert!(report.is_physical());
        assert!((report.min_symplectic_eigenvalue - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vacuum_rejects_zero_modes() {
        assert!(make_vacuum(0).is_err());
    }

    #[test]
    fn coherent_means_follow_amplitudes() {
        let zero = make_coherent(&[Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(zero.mean, make_vacuum(1).unwrap().mean);
        assert_eq!(zero.disp, make_vacuum(1).unwrap().disp);

        let one = make_coherent(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert!((one.mean[0] - 0.0).abs() < 1e-15);
        assert!((one.mean[1] - SQRT_2).abs() < 1e-15);

        let imag = make_coherent(&[Complex64::new(0.0, 1.0)]).unwrap();
        assert!((imag.mean[0] - SQRT_2).abs() < 1e-15);
        assert!((imag.mean[1] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn coherent_mean_photon_is_amplitude_squared() {
        let alpha = Complex64::new(0.7, -0.4);
        let state = make_coherent(&[alpha]).unwrap();
        let n = mean_photon_number(&state, 0).unwrap();
        assert!((n - alpha.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn thermal_variances_and_means() {
        let state = make_thermal(&[1.0]).unwrap();
        assert!((state.disp[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((state.disp[(1, 1)] - 1.5).abs() < 1e-15);

        let zero = make_thermal(&[0.0]).unwrap();
        assert_eq!(zero.disp, make_vacuum(1).unwrap().disp);

        for nbar in [0.0, 0.5, 1.0, 5.0] {
            let s = make_thermal(&[nbar]).unwrap();
            assert!((mean_photon_number(&s, 0).unwrap() - nbar).abs() < 1e-12);
        }

        assert!(make_thermal(&[-0.1]).is_err());
    }

    #[test]
    fn squeezed_vacuum_matches_definition() {
        let state = make_squeezed_vacuum(1.0, 0.0).unwrap();
        assert!((state.disp[(0, 0)] - (2.0f64).exp() / 2.0).abs() < 1e-12);
        assert!((state.disp[(1, 1)] - (-2.0f64).exp() / 2.0).abs() < 1e-12);
        assert!(state.disp[(0, 1)].abs() < 1e-15);

        let zero = make_squeezed_vacuum(0.0, 0.0).unwrap();
        assert_eq!(zero.disp, make_vacuum(1).unwrap().disp);

        for (r, phi) in [(0.3, 0.0), (1.0, 0.7), (2.0, -1.3)] {
            let s = make_squeezed_vacuum(r, phi).unwrap();
            assert!((s.disp.determinant() - 0.25).abs() < 1e-12);
            assert!(validate(&s).unwrap().is_physical());
        }
    }

    #[test]
    fn validate_flags_uncertainty_violation() {
        let state = GaussianState {
            n_modes: 1,
            mean: DVector::zeros(2),
            disp: DMatrix::identity(2, 2) * 0.25,
        };
        let report = validate(&state).unwrap();
        assert!(!report.is_physical());
        assert!(report.violations[0].contains("symplectic eigenvalue"));
        assert!(ensure_physical(&state).is_err());
    }

    #[test]
    fn validate_reports_thermal_spectrum() {
        let report = validate(&make_thermal(&[1.0]).unwrap()).unwrap();
        assert!(report.is_physical());
        assert!((report.min_symplectic_eigenvalue - 1.5).abs() < 1e-10);
    }

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        for n in 1..=3 {
            let form = SymplecticForm::new(n);
            let j = form.matrix();
            assert_eq!(j.transpose(), -j);
            assert_eq!(j * j, -DMatrix::<f64>::identity(2 * n, 2 * n));
        }
    }

    #[test]
    fn apply_symplectic_identity_is_noop() {
        let state = make_thermal(&[0.7]).unwrap();
        let moved = apply_symplectic(
            &state,
            &DMatrix::identity(2, 2),
            &DVector::zeros(2),
        )
        .unwrap();
        assert_eq!(moved.mean, state.mean);
        assert_eq!(moved.disp, state.disp);
    }

    #[test]
    fn squeezing_transformation_matches_constructor() {
        let r: f64 = 0.8;
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![r.exp(), (-r).exp()]));
        let squeezed = apply_symplectic(&make_vacuum(1).unwrap(), &s, &DVector::zeros(2)).unwrap();
        let reference = make_squeezed_vacuum(r, 0.0).unwrap();
        assert!((squeezed.disp - reference.disp).amax() < 1e-12);
    }

    #[test]
    fn apply_symplectic_rejects_non_symplectic() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let err = apply_symplectic(&make_vacuum(1).unwrap(), &s, &DVector::zeros(2)).unwrap_err();
        assert!(err.to_string().contains("not symplectic"));
    }

    #[test]
    fn symplectic_transport_preserves_spectrum() {
        let mut rng = StdRng::seed_from_u64(42);
        for n_modes in [1usize, 2] {
            let base = make_thermal(&vec![0.4; n_modes]).unwrap();
            let before = symplectic_eigenvalues(&base.disp).unwrap();
            for _ in 0..20 {
                let s = random_symplectic(n_modes, &mut rng);
                let d = DVector::from_fn(2 * n_modes, |_, _| rng.gen_range(-1.0..1.0));
                let moved = apply_symplectic(&base, &s, &d).unwrap();
                let after = symplectic_eigenvalues(&moved.disp).unwrap();
                for (a, b) in before.iter().zip(after.iter()) {
                    assert!((a - b).abs() < 1e-10, "spectrum drifted: {} vs {}", a, b);
                }
                assert!(validate(&moved).unwrap().is_physical());
            }
        }
    }

    #[test]
    fn purity_of_reference_states() {
        assert!((purity(&make_vacuum(1).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        assert!((purity(&make_thermal(&[1.0]).unwrap()).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((purity(&make_squeezed_vacuum(1.0, 0.0).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        // Purity is 1 exactly when every symplectic eigenvalue is 1/2.
        let mixed = make_thermal(&[0.2, 0.0]).unwrap();
        let p = purity(&mixed).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn mean_photon_number_examples() {
        assert_eq!(mean_photon_number(&make_vacuum(1).unwrap(), 0).unwrap(), 0.0);
        let coherent = make_coherent(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert!((mean_photon_number(&coherent, 0).unwrap() - 1.0).abs() < 1e-12);
        let thermal = make_thermal(&[2.0]).unwrap();
        assert!((mean_photon_number(&thermal, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!(mean_photon_number(&thermal, 1).is_err());
    }

    #[test]
    fn state_document_round_trip() {
        let state = make_thermal(&[0.3, 1.2]).unwrap();
        let text = state_to_json(&state).unwrap();
        let back = state_from_json(&text).unwrap();
        assert_eq!(back.n_modes, 2);
        assert!((back.mean - state.mean).amax() < 1e-15);
        assert!((back.disp - state.disp).amax() < 1e-15);
    }

    #[test]
    fn state_document_rejects_bad_shapes() {
        let bad = r#"{"n_modes": 2, "mean": [0.0, 0.0], "disp": [[0.5]]}"#;
        assert!(state_from_json(bad).is_err());
        let zero = r#"{"n_modes": 0, "mean": [], "disp": []}"#;
        assert!(state_from_json(zero).is_err());
    }
}
