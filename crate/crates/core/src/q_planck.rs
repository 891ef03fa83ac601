//! Thermal occupation of a deformed oscillator whose level spacing grows
//! with a deformation parameter `lambda`.
//!
//! The deformed integer bracket is `[n] = sinh(lambda n) / sinh(lambda)`,
//! reducing to `n` as `lambda -> 0`. Level energies are
//! `E_n = ([n] + [n+1]) / 2` in units of the bare quantum, so consecutive
//! levels are separated by `E_{n+1} - E_n = cosh(lambda (n+1))`, which is
//! the amplitude-dependent frequency map [`q_frequency`] rescaled by
//! `sinh(lambda) / lambda`.
//!
//! [`mean_occupation_exact`] sums the Boltzmann series for the mean level
//! label directly; [`mean_occupation_approx`] is a second-order
//! small-`lambda` formula kept for comparison. The two agree at
//! `lambda = 0` and are tabulated side by side by [`planck_curve`].

use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Relative weight below which the Boltzmann series is considered
/// converged.
pub const SERIES_REL_TOL: f64 = 1e-18;

/// Hard cap on Boltzmann series terms before giving up.
pub const SERIES_MAX_TERMS: usize = 1_000_000;

/// Default initial term count for the Boltzmann series; the sum extends
/// itself beyond this automatically when not yet converged.
pub const DEFAULT_SERIES_CUTOFF: usize = 1024;

/// Largest deformation magnitude accepted; keeps `sinh(lambda)` finite.
pub const MAX_LAMBDA: f64 = 350.0;

/// Deformed bracket `[n] = sinh(lambda n) / sinh(lambda)`; exactly `n`
/// when the deformation vanishes.
pub fn qbracket(n: u64, lambda: f64) -> f64 {
    qbracket_value(n as f64, lambda)
}

fn qbracket_value(n: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return n;
    }
    (lambda * n).sinh() / lambda.sinh()
}

/// Level energy `E_n = ([n] + [n+1]) / 2` in units of the bare quantum;
/// the undeformed ladder `n + 1/2` at `lambda = 0`.
pub fn q_energy(n: u64, lambda: f64) -> f64 {
    0.5 * (qbracket(n, lambda) + qbracket(n + 1, lambda))
}

/// Amplitude-dependent frequency map
/// `(lambda / sinh(lambda)) * cosh(lambda * n_value)` in units of the
/// bare frequency; 1 at zero deformation. The ladder spacing relates to
/// it by `E_{n+1} - E_n = (sinh(lambda) / lambda) * q_frequency(n + 1)`.
pub fn q_frequency(n_value: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    lambda / lambda.sinh() * (lambda * n_value).cosh()
}

/// A deformed oscillator in contact with a bath: deformation `lambda`
/// and the dimensionless temperature ratio `x` (bare quantum over
/// thermal quantum).
#[derive(Clone, Copy, Debug)]
pub struct QOscillator {
    pub lambda: f64,
    pub x: f64,
}

impl QOscillator {
    pub fn new(lambda: f64, x: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda.abs() > MAX_LAMBDA {
            return Err(Error::InvalidInput(format!(
                "deformation must be finite with |lambda| <= {}, got {}",
                MAX_LAMBDA, lambda
            )));
        }
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "temperature ratio x must be finite and positive, got {}",
                x
            )));
        }
        Ok(QOscillator { lambda, x })
    }
}

/// Mean level label from the Boltzmann series
/// `sum_n n e^{-x (E_n - E_0)} / sum_n e^{-x (E_n - E_0)}`.
///
/// At least `cutoff` terms are summed; the series then extends itself
/// until one term falls below [`SERIES_REL_TOL`] of the running
/// partition sum. If [`SERIES_MAX_TERMS`] terms do not get there (which
/// happens for arbitrarily soft temperatures), the call reports an
/// accuracy failure instead of a truncated value.
pub fn mean_occupation_exact(osc: &QOscillator, cutoff: usize) -> Result<f64> {
    let e0 = q_energy(0, osc.lambda);
    let mut partition = 1.0f64;
    let mut weighted = 0.0f64;
    for n in 1..=SERIES_MAX_TERMS {
        let w = (-osc.x * (q_energy(n as u64, osc.lambda) - e0)).exp();
        partition += w;
        weighted += n as f64 * w;
        if n >= cutoff && w / partition < SERIES_REL_TOL {
            return Ok(weighted / partition);
        }
    }
    Err(Error::Accuracy(format!(
        "Boltzmann series did not converge within {} terms at x = {}, lambda = {}",
        SERIES_MAX_TERMS, osc.x, osc.lambda
    )))
}

/// Second-order small-deformation occupation formula:
/// `1/(e^x - 1) - lambda^2 x (e^{3x} + 4 e^{2x} + e^x) / (e^x - 1)^4`,
/// evaluated through `u = e^{-x}` so large `x` cannot overflow.
pub fn mean_occupation_approx(osc: &QOscillator) -> f64 {
    let u = (-osc.x).exp();
    let planck = u / (1.0 - u);
    if osc.lambda == 0.0 {
        return planck;
    }
    let correction = osc.x * u * (1.0 + 4.0 * u + u * u) / (1.0 - u).powi(4);
    planck - osc.lambda.powi(2) * correction
}

/// One tabulated comparison point of the two occupation formulas.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PlanckRow {
    pub x: f64,
    pub exact: f64,
    pub approx: f64,
    /// `exact - approx`.
    pub difference: f64,
}

/// Tabulates exact and approximate occupations over the given
/// temperature ratios. Rows keep the input order; evaluation is parallel
/// but the output (and any reported error) is deterministic.
pub fn planck_curve(lambda: f64, xs: &[f64]) -> Result<Vec<PlanckRow>> {
    let oscillators: Vec<QOscillator> = xs
        .iter()
        .map(|&x| QOscillator::new(lambda, x))
        .collect::<Result<_>>()?;
    let rows: Vec<Result<PlanckRow>> = oscillators
        .par_iter()
        .map(|osc| {
            let exact = mean_occupation_exact(osc, DEFAULT_SERIES_CUTOFF)?;
            let approx = mean_occupation_approx(osc);
            Ok(PlanckRow {
                x: osc.x,
                exact,
                approx,
                difference: exact - approx,
            })
        })
        .collect();
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_limits_and_identities() {
        for n in 0..50u64 {
            assert_eq!(qbracket(n, 0.0), n as f64);
        }
        assert!((qbracket(2, 0.7) - 2.0 * 0.7f64.cosh()).abs() < 1e-14);
        assert_eq!(qbracket(0, 0.4), 0.0);
        assert_eq!(qbracket(1, 0.4), 1.0);
        for n in 0..10u64 {
            assert!((qbracket(n, 0.7) - qbracket(n, -0.7)).abs() < 1e-13);
        }
    }

    #[test]
    fn bracket_is_superlinear_for_nonzero_deformation() {
        for lambda in [0.1, 0.5, 1.5] {
            for n in 0..20u64 {
                assert!(
                    qbracket(n, lambda) >= n as f64 - 1e-12,
                    "[{}] at lambda {}",
                    n,
                    lambda
                );
            }
            assert!(qbracket(5, lambda) > 5.0);
        }
    }

    #[test]
    fn energy_reduces_to_harmonic_ladder() {
        for n in 0..20u64 {
            assert!((q_energy(n, 0.0) - (n as f64 + 0.5)).abs() < 1e-15);
        }
        assert!((q_energy(0, 0.1) - 0.5).abs() < 1e-15);
        let expected = 0.5 * (0.6f64.sinh() + 0.8f64.sinh()) / 0.2f64.sinh();
        assert!((q_energy(3, 0.2) - expected).abs() < 1e-13);
    }

    #[test]
    fn ladder_spacing_matches_rescaled_frequency() {
        for lambda in [0.0f64, 0.3, 1.0] {
            let rescale = if lambda == 0.0 {
                1.0
            } else {
                lambda.sinh() / lambda
            };
            for n in 0..=20u64 {
                let gap = q_energy(n + 1, lambda) - q_energy(n, lambda);
                let freq = rescale * q_frequency(n as f64 + 1.0, lambda);
                assert!(
                    (gap - freq).abs() < 1e-12 * (1.0 + freq.abs()),
                    "lambda = {}, n = {}: gap {} vs rescaled frequency {}",
                    lambda,
                    n,
                    gap,
                    freq
                );
            }
        }
    }

    #[test]
    fn frequency_limits() {
        assert_eq!(q_frequency(3.0, 0.0), 1.0);
        let lambda = 0.5f64;
        assert!((q_frequency(0.0, lambda) - lambda / lambda.sinh()).abs() < 1e-15);
        let expected = 0.5 / 0.5f64.sinh() * 1.0f64.cosh();
        assert!((q_frequency(2.0, lambda) - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_deformation_reproduces_planck() {
        for x in [0.5, 1.0, 2.0, 5.0] {
            let osc = QOscillator::new(0.0, x).unwrap();
            let expected = 1.0 / (x.exp() - 1.0);
            let exact = mean_occupation_exact(&osc, DEFAULT_SERIES_CUTOFF).unwrap();
            assert!(
                (exact - expected).abs() < 1e-12,
                "x = {}: {} vs {}",
                x,
                exact,
                expected
            );
            assert!((mean_occupation_approx(&osc) - expected).abs() < 1e-14);
        }
    }

    /// The approximate formula shifts the Planck value by exactly
    /// `-lambda^2 x u (1 + 4u + u^2) / (1 - u)^4` with `u = e^{-x}`.
    #[test]
    fn approx_second_order_term_is_pinned() {
        let x = 1.0f64;
        let u = (-x).exp();
        let coeff = x * u * (1.0 + 4.0 * u + u * u) / (1.0 - u).powi(4);
        assert!((coeff - 6.0065127966367635).abs() < 1e-12);
        let lambda = 1e-3;
        let osc = QOscillator::new(lambda, x).unwrap();
        let planck = 1.0 / (x.exp() - 1.0);
        let approx = mean_occupation_approx(&osc);
        assert!(
            ((planck - approx) - lambda * lambda * coeff).abs() < 1e-12,
            "approx shift {} vs {}",
            planck - approx,
            lambda * lambda * coeff
        );
    }

    /// The Boltzmann series itself leaves Planck at half that rate: its
    /// true second-order coefficient is
    /// `x u (1 + 4u + u^2) / (2 (1 - u)^4)`.
    #[test]
    fn exact_second_order_coefficient_is_half_the_approx_rate() {
        let x = 1.0f64;
        let u = (-x).exp();
        let true_coeff = x * u * (1.0 + 4.0 * u + u * u) / (2.0 * (1.0 - u).powi(4));
        assert!((true_coeff - 3.0032563983183818).abs() < 1e-12);
        let lambda = 1e-3;
        let osc = QOscillator::new(lambda, x).unwrap();
        let planck = 1.0 / (x.exp() - 1.0);
        let exact = mean_occupation_exact(&osc, DEFAULT_SERIES_CUTOFF).unwrap();
        let measured = (planck - exact) / (lambda * lambda);
        assert!(
            (measured - true_coeff).abs() < 1e-3,
            "measured second-order rate {} vs {}",
            measured,
            true_coeff
        );

        let lambda = 0.01;
        let osc = QOscillator::new(lambda, x).unwrap();
        let exact = mean_occupation_exact(&osc, DEFAULT_SERIES_CUTOFF).unwrap();
        assert!(
            (exact - (planck - lambda * lambda * true_coeff)).abs() < 1e-6,
            "exact {} vs second-order model {}",
            exact,
            planck - lambda * lambda * true_coeff
        );
    }

    #[test]
    fn soft_temperature_hits_term_cap() {
        let osc = QOscillator::new(0.0, 1e-9).unwrap();
        let err = mean_occupation_exact(&osc, DEFAULT_SERIES_CUTOFF).unwrap_err();
        assert!(matches!(err, Error::Accuracy(_)));
    }

    #[test]
    fn occupation_decreases_with_deformation() {
        let planck = mean_occupation_exact(&QOscillator::new(0.0, 1.0).unwrap(), 64).unwrap();
        let deformed = mean_occupation_exact(&QOscillator::new(0.5, 1.0).unwrap(), 64).unwrap();
        assert!(deformed < planck);
    }

    #[test]
    fn curve_preserves_order_and_rejects_bad_input() {
        let xs = [2.0, 0.5, 1.0];
        let rows = planck_curve(0.1, &xs).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, &x) in rows.iter().zip(&xs) {
            assert_eq!(row.x, x);
            assert!((row.difference - (row.exact - row.approx)).abs() < 1e-15);
        }
        assert!(planck_curve(0.1, &[1.0, -2.0]).is_err());
        assert!(planck_curve(0.1, &[0.0]).is_err());
        assert!(planck_curve(f64::INFINITY, &[1.0]).is_err());
        assert!(QOscillator::new(f64::NAN, 1.0).is_err());
        assert!(QOscillator::new(400.0, 1.0).is_err());
    }

    #[test]
    fn exact_column_is_monotone_decreasing_in_x() {
        let xs: Vec<f64> = (0..=9).map(|i| 0.5 + 0.5 * i as f64).collect();
        let rows = planck_curve(0.1, &xs).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].exact < pair[0].exact);
        }
    }
}
