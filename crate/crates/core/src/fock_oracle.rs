//! Photon-number probabilities by direct phase-space quadrature.
//!
//! This module is the slow, independent reference against which the
//! Hermite-based pipeline is verified. The probability of a number state
//! is written as a phase-space overlap: for the probability-normalized
//! Wigner density of the state and the number-state Wigner functions,
//!
//! `P_n = (2 pi)^N  integral  W_state(z) * prod_j W_{n_j}(p_j, q_j)  dz`
//!
//! evaluated on a uniform tensor grid over `[-L, L]` per axis. Each
//! probability is computed at the requested resolution and again at twice
//! the resolution; the refined value is returned together with the
//! difference between the two passes as an empirical error bar.
//!
//! All grid reductions use pairwise summation over fixed orderings, so
//! results are bit-identical across runs and worker counts.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::gaussian_state::GaussianState;
use crate::{Error, Result};

/// Quadrature mass that must be captured for a result to be trusted.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Grid half-width in units of the largest quadrature standard deviation.
pub const SIGMA_MULTIPLIER: f64 = 7.0;

/// Default points per axis for single-mode states.
pub const DEFAULT_POINTS_SINGLE: usize = 256;

/// Default points per axis for two-mode states.
pub const DEFAULT_POINTS_TWO_MODE: usize = 64;

/// Largest per-axis point count accepted for two-mode quadrature; the
/// refinement pass doubles it.
pub const MAX_TWO_MODE_POINTS: usize = 64;

/// Largest per-mode photon number served by the two-mode oracle.
pub const MAX_TWO_MODE_ORDER: usize = 8;

/// Largest photon number served by the single-mode oracle.
pub const MAX_SINGLE_MODE_ORDER: usize = 256;

/// Uniform tensor quadrature grid: `points_per_axis` samples spanning
/// `[-half_width, half_width]` on every phase-space axis.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl QuadratureGrid {
    pub fn new(half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "grid half-width must be finite and positive, got {}",
                half_width
            )));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points per axis, got {}",
                points_per_axis
            )));
        }
        Ok(QuadratureGrid {
            half_width,
            points_per_axis,
        })
    }

    /// Grid adapted to a state: half-width seven standard deviations of
    /// the widest quadrature plus the largest mean offset, with the
    /// default point count for the state's mode number.
    pub fn default_for(state: &GaussianState) -> Result<Self> {
        let points = match state.n_modes {
            1 => DEFAULT_POINTS_SINGLE,
            2 => DEFAULT_POINTS_TWO_MODE,
            n => {
                return Err(Error::InvalidInput(format!(
                    "quadrature oracle supports 1 or 2 modes, got {}",
                    n
                )))
            }
        };
        let max_var = state
            .disp
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max_var.is_finite() || max_var <= 0.0 {
            return Err(Error::InvalidState(format!(
                "dispersion has no positive variance direction (max eigenvalue {})",
                max_var
            )));
        }
        let offset = state.mean.amax();
        QuadratureGrid::new(SIGMA_MULTIPLIER * max_var.sqrt() + offset, points)
    }

    fn axis(&self) -> (Vec<f64>, f64) {
        let g = self.points_per_axis;
        let step = 2.0 * self.half_width / (g - 1) as f64;
        let xs = (0..g).map(|i| -self.half_width + i as f64 * step).collect();
        (xs, step)
    }

    fn doubled(&self) -> QuadratureGrid {
        QuadratureGrid {
            half_width: self.half_width,
            points_per_axis: 2 * self.points_per_axis,
        }
    }
}

/// One quadrature result: the refined value and the shift observed when
/// the per-axis resolution was doubled.
#[derive(Clone, Copy, Debug)]
pub struct FockEstimate {
    pub value: f64,
    pub refinement_error: f64,
}

/// Sums a slice by recursive halving. For the long, smoothly varying
/// reductions here this keeps rounding error near the sqrt(log n) regime
/// of pairwise summation while staying order-deterministic.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise dot product: `sum_i a_i * b_i` with the same reduction tree
/// as [`pairwise_sum`].
fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= 8 {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Laguerre values `L_0(z) ..= L_{n_max}(z)` by the upward three-term
/// recurrence.
fn laguerre_row(n_max: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(1.0 - z);
    for k in 1..n_max {
        let next = ((2 * k + 1) as f64 - z) * out[k] - k as f64 * out[k - 1];
        out.push(next / (k + 1) as f64);
    }
    out
}

/// Wigner function of the n-photon number state at the phase-space point
/// `(p, q)`.
pub fn fock_wigner(n: usize, p: f64, q: f64) -> f64 {
    let r2 = p * p + q * q;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let lag = laguerre_row(n, 2.0 * r2);
    sign / std::f64::consts::PI * lag[n] * (-r2).exp()
}

/// Number-state Wigner values for all orders `0..=n_max` at one point;
/// shares the Laguerre recurrence across orders.
fn fock_wigner_row(n_max: usize, p: f64, q: f64) -> Vec<f64> {
    let r2 = p * p + q * q;
    let damp = (-r2).exp() / std::f64::consts::PI;
    laguerre_row(n_max, 2.0 * r2)
        .into_iter()
        .enumerate()
        .map(|(n, l)| if n % 2 == 0 { l * damp } else { -l * damp })
        .collect()
}

/// Inverse dispersion and normalization of the state's Wigner density.
struct WignerDensity {
    inv: DMatrix<f64>,
    mean: DVector<f64>,
    log_norm: f64,
}

impl WignerDensity {
    fn new(state: &GaussianState) -> Result<Self> {
        let dim = 2 * state.n_modes;
        let lu = state.disp.clone().lu();
        let det = lu.determinant();
        if det.is_nan() || det <= 0.0 {
            return Err(Error::InvalidState(format!(
                "dispersion determinant must be positive, got {}",
                det
            )));
        }
        let inv = lu.try_inverse().ok_or_else(|| Error::Singular {
            matrix: "dispersion".into(),
            context: "inverting for the Wigner density".into(),
        })?;
        let log_norm = -(dim as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        Ok(WignerDensity {
            inv,
            mean: state.mean.clone(),
            log_norm,
        })
    }
}

/// Shared single-mode grid pass: raw (unnormalized by the 2 pi h^2
/// factor) sums for every order plus the density mass captured by the
/// grid.
fn single_mode_pass(
    density: &WignerDensity,
    n_max: usize,
    grid: &QuadratureGrid,
) -> (Vec<f64>, f64) {
    let (xs, h) = grid.axis();
    let g = xs.len();
    let (a, b, c) = (density.inv[(0, 0)], density.inv[(0, 1)], density.inv[(1, 1)]);
    let (mp, mq) = (density.mean[0], density.mean[1]);
    let norm = density.log_norm.exp();

    // Each row (fixed p) reduces its q axis to one partial per order plus
    // a mass partial; rows combine pairwise afterwards.
    let rows: Vec<(Vec<f64>, f64)> = (0..g)
        .into_par_iter()
        .map(|i| {
            let p = xs[i];
            let dp = p - mp;
            let mut contrib = vec![vec![0.0f64; g]; n_max + 1];
            let mut w_row = vec![0.0f64; g];
            for (k, &q) in xs.iter().enumerate() {
                let dq = q - mq;
                let quad = a * dp * dp + 2.0 * b * dp * dq + c * dq * dq;
                let w = norm * (-0.5 * quad).exp();
                w_row[k] = w;
                let wn = fock_wigner_row(n_max, p, q);
                for n in 0..=n_max {
                    contrib[n][k] = w * wn[n];
                }
            }
            let sums = contrib.iter().map(|row| pairwise_sum(row)).collect();
            (sums, pairwise_sum(&w_row))
        })
        .collect();

    let scale = 2.0 * std::f64::consts::PI * h * h;
    let mut totals = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let col: Vec<f64> = rows.iter().map(|(sums, _)| sums[n]).collect();
        totals.push(scale * pairwise_sum(&col));
    }
    let mass_col: Vec<f64> = rows.iter().map(|(_, m)| *m).collect();
    (totals, h * h * pairwise_sum(&mass_col))
}

fn check_mass(mass: f64, grid: &QuadratureGrid) -> Result<()> {
    if mass < 1.0 - MASS_TOLERANCE {
        return Err(Error::Accuracy(format!(
            "quadrature grid (half-width {}, {} points) captures mass {:.12}, below 1 - {:.0e}",
            grid.half_width, grid.points_per_axis, mass, MASS_TOLERANCE
        )));
    }
    Ok(())
}

/// Number distribution of a single-mode state for `n = 0..=n_max`,
/// integrated on `grid` and on its doubled refinement.
pub fn oracle_pnd_single_mode(
    state: &GaussianState,
    n_max: usize,
    grid: &QuadratureGrid,
) -> Result<Vec<FockEstimate>> {
    if state.n_modes != 1 {
        return Err(Error::InvalidInput(format!(
            "single-mode oracle got a {}-mode state",
            state.n_modes
        )));
    }
    if n_max > MAX_SINGLE_MODE_ORDER {
        return Err(Error::ResourceLimit(format!(
            "single-mode oracle supports n <= {}, got {}",
            MAX_SINGLE_MODE_ORDER, n_max
        )));
    }
    let density = WignerDensity::new(state)?;
    let fine_grid = grid.doubled();
    let (coarse, coarse_mass) = single_mode_pass(&density, n_max, grid);
    let (fine, fine_mass) = single_mode_pass(&density, n_max, &fine_grid);
    check_mass(coarse_mass, grid)?;
    check_mass(fine_mass, &fine_grid)?;
    Ok(coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| FockEstimate {
            value: f,
            refinement_error: (f - c).abs(),
        })
        .collect())
}

/// Shared two-mode grid pass over axes `(p1, p2, q1, q2)`: raw sums for
/// every order pair plus the captured density mass. Streams one `p1`
/// slab at a time so memory stays at one 3-D block per worker.
fn two_mode_pass(
    density: &WignerDensity,
    order_cap: usize,
    grid: &QuadratureGrid,
) -> (Vec<Vec<f64>>, f64) {
    let (xs, h) = grid.axis();
    let g = xs.len();
    let orders = order_cap + 1;
    let mi = &density.inv;
    let m = &density.mean;
    let norm = density.log_norm.exp();

    // Mode-2 number-state factors on the (p2, q2) plane, shared by all
    // slabs; flat index i2 * g + k2.
    let mut mode2: Vec<Vec<f64>> = vec![vec![0.0; g * g]; orders];
    for i2 in 0..g {
        for k2 in 0..g {
            let row = fock_wigner_row(order_cap, xs[i2], xs[k2]);
            for (n2, v) in row.into_iter().enumerate() {
                mode2[n2][i2 * g + k2] = v;
            }
        }
    }

    let slabs: Vec<(Vec<Vec<f64>>, f64)> = (0..g)
        .into_par_iter()
        .map(|i1| {
            let p1 = xs[i1];
            let d0 = p1 - m[0];
            // Mode-1 factors along q1 for this slab's fixed p1.
            let mut mode1: Vec<Vec<f64>> = vec![vec![0.0; g]; orders];
            for k1 in 0..g {
                let row = fock_wigner_row(order_cap, p1, xs[k1]);
                for (n1, v) in row.into_iter().enumerate() {
                    mode1[n1][k1] = v;
                }
            }

            // Density over (i2, k2, k1) with the q1 axis contiguous.
            let mut w_fiber = vec![0.0f64; g];
            let mut mode1_partials: Vec<Vec<f64>> = vec![vec![0.0; g * g]; orders];
            let mut fiber_mass = vec![0.0f64; g * g];
            for i2 in 0..g {
                let d1 = xs[i2] - m[1];
                for k2 in 0..g {
                    let d3 = xs[k2] - m[3];
                    let base = mi[(0, 0)] * d0 * d0
                        + 2.0 * mi[(0, 1)] * d0 * d1
                        + mi[(1, 1)] * d1 * d1
                        + 2.0 * (mi[(0, 3)] * d0 + mi[(1, 3)] * d1) * d3
                        + mi[(3, 3)] * d3 * d3;
                    let lin = mi[(0, 2)] * d0 + mi[(1, 2)] * d1 + mi[(2, 3)] * d3;
                    for (k1, w) in w_fiber.iter_mut().enumerate() {
                        let d2 = xs[k1] - m[2];
                        let quad = base + d2 * (2.0 * lin + mi[(2, 2)] * d2);
                        *w = norm * (-0.5 * quad).exp();
                    }
                    let f = i2 * g + k2;
                    fiber_mass[f] = pairwise_sum(&w_fiber);
                    for n1 in 0..orders {
                        mode1_partials[n1][f] = pairwise_dot(&w_fiber, &mode1[n1]);
                    }
                }
            }

            let mut contrib = vec![vec![0.0f64; orders]; orders];
            for n1 in 0..orders {
                for n2 in 0..orders {
                    contrib[n1][n2] = pairwise_dot(&mode1_partials[n1], &mode2[n2]);
                }
            }
            (contrib, pairwise_sum(&fiber_mass))
        })
        .collect();

    let scale = (2.0 * std::f64::consts::PI).powi(2) * h.powi(4);
    let mut totals = vec![vec![0.0f64; orders]; orders];
    for n1 in 0..orders {
        for n2 in 0..orders {
            let col: Vec<f64> = slabs.iter().map(|(c, _)| c[n1][n2]).collect();
            totals[n1][n2] = scale * pairwise_sum(&col);
        }
    }
    let mass_col: Vec<f64> = slabs.iter().map(|(_, m)| *m).collect();
    (totals, h.powi(4) * pairwise_sum(&mass_col))
}

/// Joint number distribution of a two-mode state for all order pairs
/// `(n1, n2)` with both entries at most `order_cap`. Indexed as
/// `result[n1][n2]`.
pub fn oracle_pnd_two_mode(
    state: &GaussianState,
    order_cap: usize,
    grid: &QuadratureGrid,
) -> Result<Vec<Vec<FockEstimate>>> {
    if state.n_modes != 2 {
        return Err(Error::InvalidInput(format!(
            "two-mode oracle got a {}-mode state",
            state.n_modes
        )));
    }
    if order_cap > MAX_TWO_MODE_ORDER {
        return Err(Error::ResourceLimit(format!(
            "two-mode oracle supports orders <= {}, got {}",
            MAX_TWO_MODE_ORDER, order_cap
        )));
    }
    if grid.points_per_axis > MAX_TWO_MODE_POINTS {
        return Err(Error::ResourceLimit(format!(
            "two-mode oracle supports at most {} points per axis (doubled internally), got {}",
            MAX_TWO_MODE_POINTS, grid.points_per_axis
        )));
    }
    let density = WignerDensity::new(state)?;
    let fine_grid = grid.doubled();
    let (coarse, coarse_mass) = two_mode_pass(&density, order_cap, grid);
    let (fine, fine_mass) = two_mode_pass(&density, order_cap, &fine_grid);
    check_mass(coarse_mass, grid)?;
    check_mass(fine_mass, &fine_grid)?;
    Ok(coarse
        .into_iter()
        .zip(fine)
        .map(|(crow, frow)| {
            crow.into_iter()
                .zip(frow)
                .map(|(c, f)| FockEstimate {
                    value: f,
                    refinement_error: (f - c).abs(),
                })
                .collect()
        })
        .collect())
}

/// Geometric number distribution of a thermal state with the given mean
/// occupation.
pub fn closed_form_thermal(nbar: f64, n: usize) -> Result<f64> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(Error::InvalidInput(format!(
            "thermal occupation must be finite and non-negative, got {}",
            nbar
        )));
    }
    if nbar == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let ratio = nbar / (1.0 + nbar);
    Ok(ratio.powi(n as i32) / (1.0 + nbar))
}

/// Poisson number distribution of a coherent state with the given mean
/// photon number.
pub fn closed_form_coherent(mean_photons: f64, n: usize) -> Result<f64> {
    if !mean_photons.is_finite() || mean_photons < 0.0 {
        return Err(Error::InvalidInput(format!(
            "mean photon number must be finite and non-negative, got {}",
            mean_photons
        )));
    }
    let mut p = (-mean_photons).exp();
    for k in 0..n {
        p *= mean_photons / (k + 1) as f64;
    }
    Ok(p)
}

/// Number distribution of squeezed vacuum: zero at odd orders, with the
/// even orders following the two-term ratio recurrence.
pub fn closed_form_squeezed_vacuum(r: f64, n: usize) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "squeezing parameter must be finite, got {}",
            r
        )));
    }
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let t2 = r.tanh().powi(2);
    let mut p = 1.0 / r.cosh();
    for k in 0..n / 2 {
        p *= t2 * (2 * k + 1) as f64 / (2 * k + 2) as f64;
    }
    Ok(p)
}
