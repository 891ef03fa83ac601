//! Joint photon-number distributions of Gaussian states.
//!
//! The distribution is assembled from three ingredients:
//!
//! * the vacuum overlap `P_0` of the state, a determinant-and-quadratic
//!   closed form in the dispersion and mean,
//! * a complex symmetric kernel `R` and linear term derived from the
//!   dispersion through a fixed unitary change of quadrature basis, and
//! * the scaled multidimensional Hermite lattice of [`crate::hermite`],
//!   whose doubled-index diagonal `(n, n)` carries the probabilities as
//!   `P_n = P_0 * H_(n,n) / n!`.
//!
//! The linear term is evaluated in a form that stays finite for every
//! physical state. A registry of deliberately perturbed kernel builders
//! (see [`Variant`]) exposes nearby-but-wrong constructions so tests can
//! confirm the pipeline distinguishes the correct kernel from plausible
//! alternatives.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::gaussian_state::{ensure_physical, mean_photon_number, GaussianState};
use crate::hermite::{hermite_batch_scaled, HermiteSpec};
use crate::{Error, Result};

/// Largest per-mode cutoff accepted by [`pnd`] and [`adaptive_cutoff`].
pub const MAX_CUTOFF: usize = 256;

/// Absolute bound on the imaginary residue of any assembled probability.
pub const IMAG_TOL: f64 = 1e-10;

/// Most negative real part tolerated before a probability is declared
/// invalid rather than clamped to zero.
pub const NEGATIVITY_TOL: f64 = -1e-12;

/// Slack allowed above one for the total captured probability.
pub const SUM_SLACK: f64 = 1e-9;

/// Largest tail mass [`mean_from_pnd`] accepts before refusing to quote
/// a moment.
pub const MEAN_TAIL_TOL: f64 = 1e-6;

/// Determinant threshold below which `I - 2M` is treated as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-12;

/// Kernel construction to use. `Regular` is the production formula; the
/// others are adjacent constructions that look algebraically plausible
/// but are each ruled out by at least one reference family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Production kernel: `R = U^H (I+2M)^{-1} (I-2M) conj(U)` with the
    /// linear term `2 U^H (I+2M)^{-1} mean`, finite for every state.
    Regular,
    /// Same kernel, but the argument vector is materialized explicitly
    /// through `(I-2M)^{-1}`, which does not exist for states with a
    /// vacuum-valued quadrature (vacuum, coherent).
    LiteralY,
    /// Argument vector built with the transposed instead of conjugated
    /// basis change; agrees on mean-zero states, wrong for displaced
    /// ones.
    MirrorY,
    /// Kernel and linear term with flipped sign.
    NegatedR,
    /// Kernel with the matrix fraction inverted:
    /// `(I-2M)^{-1} (I+2M)` instead of `(I+2M)^{-1} (I-2M)`.
    SwappedR,
}

impl Variant {
    pub fn id(&self) -> &'static str {
        match self {
            Variant::Regular => "regular",
            Variant::LiteralY => "literal-y",
            Variant::MirrorY => "mirror-y",
            Variant::NegatedR => "negated-r",
            Variant::SwappedR => "swapped-r",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Variant::all()
            .iter()
            .find(|v| v.id() == s)
            .copied()
            .ok_or_else(|| {
                let ids: Vec<&str> = Variant::all().iter().map(|v| v.id()).collect();
                Error::InvalidInput(format!(
                    "unknown variant {:?}; expected one of {}",
                    s,
                    ids.join(", ")
                ))
            })
    }

    pub fn all() -> &'static [Variant] {
        &[
            Variant::Regular,
            Variant::LiteralY,
            Variant::MirrorY,
            Variant::NegatedR,
            Variant::SwappedR,
        ]
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Inputs handed to the Hermite engine: kernel, basis change, and the
/// linear term of the generating function. `y` is populated only by
/// variants that materialize the argument vector itself.
#[derive(Clone, Debug)]
pub struct HermiteArguments {
    pub r: DMatrix<Complex64>,
    pub y: Option<DVector<Complex64>>,
    pub linear: DVector<Complex64>,
    pub u: DMatrix<Complex64>,
    pub variant: Variant,
}

/// The fixed quadrature-to-ladder basis change: block rows
/// `(-i, +i) / sqrt(2)` and `(1, 1) / sqrt(2)` over the `(p, q)` block
/// structure.
pub fn build_u(n_modes: usize) -> DMatrix<Complex64> {
    let n = n_modes;
    let s = 1.0 / 2.0_f64.sqrt();
    let mut u = DMatrix::from_element(2 * n, 2 * n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        u[(j, j)] = Complex64::new(0.0, -s);
        u[(j, j + n)] = Complex64::new(0.0, s);
        u[(j + n, j)] = Complex64::new(s, 0.0);
        u[(j + n, j + n)] = Complex64::new(s, 0.0);
    }
    u
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Vacuum probability of the state:
/// `det(M + I/2)^{-1/2} exp(-mean^t (2M + I)^{-1} mean)`.
pub fn prob_zero(state: &GaussianState) -> Result<f64> {
    let dim = 2 * state.n_modes;
    let id = DMatrix::<f64>::identity(dim, dim);
    let shifted = &state.disp + 0.5 * &id;
    let lu = shifted.clone().lu();
    let det = lu.determinant();
    if det.is_nan() || det <= 0.0 {
        return Err(Error::InvalidState(format!(
            "det(M + I/2) must be positive, got {}",
            det
        )));
    }
    let doubled = 2.0 * &state.disp + &id;
    let solved = doubled.lu().solve(&state.mean).ok_or_else(|| Error::Singular {
        matrix: "2M + I".into(),
        context: "vacuum-probability quadratic form".into(),
    })?;
    Ok(det.powf(-0.5) * (-state.mean.dot(&solved)).exp())
}

/// Solves `(I - 2M) x = rhs`, failing with a singular-matrix error when
/// the determinant is below [`SINGULAR_DET_TOL`].
fn solve_one_minus_2m(
    one_minus: &DMatrix<f64>,
    rhs: &DMatrix<Complex64>,
    context: &str,
) -> Result<DMatrix<Complex64>> {
    let lu = to_complex(one_minus).lu();
    let det = lu.determinant();
    if det.norm() < SINGULAR_DET_TOL {
        return Err(Error::Singular {
            matrix: "I - 2M".into(),
            context: context.into(),
        });
    }
    lu.solve(rhs).ok_or_else(|| Error::Singular {
        matrix: "I - 2M".into(),
        context: context.into(),
    })
}

/// Builds the Hermite kernel and linear term for a state under the given
/// variant. The state must already be physical.
pub fn build_hermite_args(state: &GaussianState, variant: Variant) -> Result<HermiteArguments> {
    let dim = 2 * state.n_modes;
    let id = DMatrix::<f64>::identity(dim, dim);
    let one_plus = &id + 2.0 * &state.disp;
    let one_minus = &id - 2.0 * &state.disp;
    let u = build_u(state.n_modes);
    let u_h = u.adjoint();
    let u_conj = u.map(|z| z.conj());
    let mean_c = state.mean.map(|x| Complex64::new(x, 0.0));

    let plus_lu = one_plus.clone().lu();
    // (I + 2M) has eigenvalues >= 2 for physical states; treat failure as
    // a structural error rather than a reportable singularity.
    let x_regular = plus_lu.solve(&one_minus).ok_or_else(|| Error::InvalidState(
        "I + 2M is not invertible, dispersion is far from physical".into(),
    ))?;
    let solve_plus_mean = plus_lu.solve(&state.mean).ok_or_else(|| Error::InvalidState(
        "I + 2M is not invertible, dispersion is far from physical".into(),
    ))?;
    let solve_plus_mean_c = solve_plus_mean.map(|x| Complex64::new(x, 0.0));

    let r_regular = &u_h * to_complex(&x_regular) * &u_conj;
    let linear_regular = (&u_h * &solve_plus_mean_c).scale(2.0);

    let (r, y, linear) = match variant {
        Variant::Regular => (r_regular, None, linear_regular),
        Variant::LiteralY => {
            let mean_mat = DMatrix::from_column_slice(dim, 1, mean_c.as_slice());
            let solved = solve_one_minus_2m(
                &one_minus,
                &mean_mat,
                "materializing the argument vector",
            )?;
            let y = (u.transpose() * DVector::from_column_slice(solved.as_slice())).scale(2.0);
            let linear = &r_regular * &y;
            (r_regular, Some(y), linear)
        }
        Variant::MirrorY => {
            let y = (u.transpose() * &solve_plus_mean_c).scale(2.0);
            let linear = &r_regular * &y;
            (r_regular, Some(y), linear)
        }
        Variant::NegatedR => (-r_regular, None, -linear_regular),
        Variant::SwappedR => {
            let stacked = {
                // Solve (I - 2M) X = (I + 2M) and (I - 2M) v = mean in one
                // guarded pass.
                let rhs = to_complex(&one_plus);
                solve_one_minus_2m(&one_minus, &rhs, "inverted matrix fraction")?
            };
            let mean_mat = DMatrix::from_column_slice(dim, 1, mean_c.as_slice());
            let solved_mean =
                solve_one_minus_2m(&one_minus, &mean_mat, "inverted matrix fraction")?;
            let r = &u_h * stacked * &u_conj;
            let linear =
                (&u_h * DVector::from_column_slice(solved_mean.as_slice())).scale(2.0);
            (r, None, linear)
        }
    };

    Ok(HermiteArguments {
        r,
        y,
        linear,
        u,
        variant,
    })
}

/// Joint photon-number distribution over the box `0..=cutoff` per mode.
#[derive(Clone, Debug)]
pub struct PhotonDistribution {
    pub n_modes: usize,
    pub cutoff: usize,
    /// Flat probabilities over `(n_1, ..., n_N)`, last index fastest.
    pub probs: Vec<f64>,
    /// Probability outside the box: `max(0, 1 - sum)`.
    pub tail_mass: f64,
    /// Vacuum probability.
    pub p0: f64,
    pub variant: Variant,
}

impl PhotonDistribution {
    /// Flat offset of a joint photon number.
    pub fn offset(&self, n: &[usize]) -> usize {
        debug_assert_eq!(n.len(), self.n_modes);
        let mut flat = 0;
        for &v in n {
            debug_assert!(v <= self.cutoff);
            flat = flat * (self.cutoff + 1) + v;
        }
        flat
    }

    pub fn prob(&self, n: &[usize]) -> f64 {
        self.probs[self.offset(n)]
    }

    /// Captured probability inside the box.
    pub fn total(&self) -> f64 {
        crate::fock_oracle::pairwise_sum(&self.probs)
    }
}

/// Photon-number distribution with the production kernel.
pub fn pnd(state: &GaussianState, cutoff: usize) -> Result<PhotonDistribution> {
    pnd_with_variant(state, cutoff, Variant::Regular)
}

/// Photon-number distribution under an explicitly chosen kernel variant.
/// Probabilities must come out real to [`IMAG_TOL`], non-negative to
/// [`NEGATIVITY_TOL`], and sum to at most `1 + `[`SUM_SLACK`]; a variant
/// that breaks any of these is reported as an accuracy failure.
pub fn pnd_with_variant(
    state: &GaussianState,
    cutoff: usize,
    variant: Variant,
) -> Result<PhotonDistribution> {
    if cutoff > MAX_CUTOFF {
        return Err(Error::ResourceLimit(format!(
            "cutoff {} exceeds the supported maximum {}",
            cutoff, MAX_CUTOFF
        )));
    }
    ensure_physical(state)?;
    let args = build_hermite_args(state, variant)?;
    let spec = HermiteSpec::from_linear_term(args.r, args.linear)?;
    let table = hermite_batch_scaled(&spec, cutoff)?;
    let p0 = prob_zero(state)?;

    let n_modes = state.n_modes;
    let count = (cutoff + 1).pow(n_modes as u32);
    let mut probs = Vec::with_capacity(count);
    let mut index = vec![0usize; n_modes];
    let mut lattice_index = vec![0usize; 2 * n_modes];
    let mut max_imag = 0.0f64;
    let mut min_real = f64::INFINITY;
    loop {
        for (d, &v) in index.iter().enumerate() {
            lattice_index[d] = v;
            lattice_index[d + n_modes] = v;
        }
        let value = table.get(&lattice_index) * p0;
        max_imag = max_imag.max(value.im.abs());
        min_real = min_real.min(value.re);
        probs.push(value.re);
        let mut d = n_modes;
        loop {
            if d == 0 {
                break;
            }
            d -= 1;
            if index[d] < cutoff {
                index[d] += 1;
                break;
            }
            index[d] = 0;
        }
        if index.iter().all(|&v| v == 0) {
            break;
        }
    }

    if max_imag > IMAG_TOL {
        return Err(Error::Accuracy(format!(
            "variant {}: probabilities have imaginary residue {:.3e}, beyond {:.0e}",
            variant, max_imag, IMAG_TOL
        )));
    }
    if min_real < NEGATIVITY_TOL {
        return Err(Error::Accuracy(format!(
            "variant {}: probability {:.3e} is negative beyond {:.0e}",
            variant, min_real, NEGATIVITY_TOL
        )));
    }
    for p in &mut probs {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total = crate::fock_oracle::pairwise_sum(&probs);
    if total > 1.0 + SUM_SLACK {
        return Err(Error::Accuracy(format!(
            "variant {}: captured probability {:.12} exceeds 1 + {:.0e}",
            variant, total, SUM_SLACK
        )));
    }

    Ok(PhotonDistribution {
        n_modes,
        cutoff,
        probs,
        tail_mass: (1.0 - total).max(0.0),
        p0,
        variant,
    })
}

/// Mean photon number of one mode from a tabulated distribution. Refused
/// when the tail outside the box exceeds [`MEAN_TAIL_TOL`], since the
/// truncated moment would silently undercount.
pub fn mean_from_pnd(dist: &PhotonDistribution, mode: usize) -> Result<f64> {
    if mode >= dist.n_modes {
        return Err(Error::InvalidInput(format!(
            "mode {} out of range for {} modes",
            mode, dist.n_modes
        )));
    }
    if dist.tail_mass > MEAN_TAIL_TOL {
        return Err(Error::Accuracy(format!(
            "tail mass {:.3e} exceeds {:.0e}; increase the cutoff before taking moments",
            dist.tail_mass, MEAN_TAIL_TOL
        )));
    }
    let side = dist.cutoff + 1;
    let weighted: Vec<f64> = dist
        .probs
        .iter()
        .enumerate()
        .map(|(flat, &p)| {
            let n_mode = (flat / side.pow((dist.n_modes - 1 - mode) as u32)) % side;
            n_mode as f64 * p
        })
        .collect();
    Ok(crate::fock_oracle::pairwise_sum(&weighted))
}

/// Smallest per-mode cutoff whose geometric tail bound
/// `sum_j (1 + nbar_j) w_j^{(c+1)/2}`, with `w_j = nbar_j / (1 + nbar_j)`,
/// falls below `tail_tol`.
pub fn adaptive_cutoff(state: &GaussianState, tail_tol: f64) -> Result<usize> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail tolerance must lie in (0, 1), got {}",
            tail_tol
        )));
    }
    ensure_physical(state)?;
    let nbars: Vec<f64> = (0..state.n_modes)
        .map(|j| mean_photon_number(state, j))
        .collect::<Result<_>>()?;
    for cutoff in 0..=MAX_CUTOFF {
        let bound: f64 = nbars
            .iter()
            .map(|&nbar| {
                if nbar <= 0.0 {
                    0.0
                } else {
                    let w = nbar / (1.0 + nbar);
                    (1.0 + nbar) * w.powf((cutoff + 1) as f64 / 2.0)
                }
            })
            .sum();
        if bound <= tail_tol {
            return Ok(cutoff);
        }
    }
    Err(Error::ResourceLimit(format!(
        "no cutoff up to {} meets tail tolerance {:.3e}",
        MAX_CUTOFF, tail_tol
    )))
}
