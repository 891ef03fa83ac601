//! Batch command-line front end.
//!
//! Five subcommands tie the library together for scripted use: `state`
//! validates or fabricates Gaussian state documents, `pnd` tabulates
//! photon-number distributions, `verify` cross-checks them against the
//! quadrature oracle, `qplanck` tabulates the deformed thermal
//! occupation, and `floquet` summarizes the period map of a periodic
//! quadratic Hamiltonian.
//!
//! Output is assembled in memory and written once, so identical inputs
//! and flags produce byte-identical files regardless of worker count.
//! CSV tables carry `# key=value` comment lines followed by a header
//! row; all floating-point values are printed with 17 significant
//! digits. JSONL output emits one metadata object followed by one
//! object per row.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::floquet::{
    invariant_spectrum_check, monodromy, QuadraticHamiltonian, INVARIANCE_SAMPLES,
};
use crate::fock_oracle::{
    oracle_pnd_single_mode, oracle_pnd_two_mode, QuadratureGrid, MAX_SINGLE_MODE_ORDER,
    MAX_TWO_MODE_ORDER,
};
use crate::gaussian_state::{
    make_coherent, make_squeezed_vacuum, make_thermal, make_vacuum, mean_photon_number, purity,
    state_from_json, state_to_json, validate, GaussianState,
};
use crate::photon_distribution::{adaptive_cutoff, pnd_with_variant, PhotonDistribution, Variant};
use crate::q_planck::planck_curve;
use crate::{Error, Result};

/// Largest `verify` deviation accepted as agreement between the
/// distribution pipeline and the quadrature oracle.
pub const VERIFY_TOL: f64 = 1e-8;

/// Environment variable fixing the worker-thread count (default:
/// available parallelism).
pub const WORKER_ENV: &str = "PHOTONDIST_THREADS";

/// Default tail tolerance used when `pnd` picks its cutoff adaptively.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

/// Output encoding for tables and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

/// Parsed invocation: one subcommand plus the shared output options.
#[derive(Parser, Debug)]
#[command(
    name = "photondist",
    version,
    about = "Photon-number statistics of Gaussian states, with oracles"
)]
pub struct RunConfig {
    /// Table encoding.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Write output to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Families `state --make` can fabricate without an input file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateKind {
    Vacuum,
    Coherent,
    Thermal,
    Squeezed,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a state document (or fabricate one with --make).
    State {
        /// State document to validate.
        input: Option<PathBuf>,
        /// Emit a fresh state document of this family instead of
        /// validating a file. The document is always JSON.
        #[arg(long, value_enum)]
        make: Option<StateKind>,
        /// Mode count for --make vacuum/coherent/thermal.
        #[arg(long, default_value_t = 1)]
        modes: usize,
        /// Re(alpha) for --make coherent (same amplitude on every mode).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha_re: f64,
        /// Im(alpha) for --make coherent.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        alpha_im: f64,
        /// Mean occupation for --make thermal (same on every mode).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        nbar: f64,
        /// Squeezing rate for --make squeezed (single mode).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        r: f64,
        /// Squeezing phase for --make squeezed.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phi: f64,
    },
    /// Tabulate the joint photon-number distribution of a state file.
    Pnd {
        /// State document.
        input: PathBuf,
        /// Per-mode cutoff; omitted means adaptive via --tail-tol.
        #[arg(long)]
        cutoff: Option<usize>,
        /// Tail-mass bound for the adaptive cutoff.
        #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
        tail_tol: f64,
        /// Evaluation variant (regular, literal-y, mirror-y, negated-r,
        /// swapped-r); non-default variants exist for falsification
        /// experiments.
        #[arg(long, default_value = "regular")]
        variant: String,
    },
    /// Run the distribution pipeline and the quadrature oracle side by
    /// side; exits 3 if they disagree beyond tolerance.
    Verify {
        /// State document (one or two modes).
        input: PathBuf,
        /// Per-mode cutoff; omitted means adaptive, clamped to the
        /// oracle's supported range.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Tabulate exact and second-order thermal occupations of the
    /// deformed oscillator.
    Qplanck {
        /// Deformation parameter.
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        /// Single temperature ratio x = (energy quantum)/(k T).
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        /// Range start (with --x-max and --x-steps).
        #[arg(long, allow_negative_numbers = true)]
        x_min: Option<f64>,
        /// Range end, inclusive.
        #[arg(long, allow_negative_numbers = true)]
        x_max: Option<f64>,
        /// Number of evenly spaced points in [x-min, x-max] (at least 2).
        #[arg(long)]
        x_steps: Option<usize>,
    },
    /// Summarize the one-period map of a periodic quadratic
    /// Hamiltonian document.
    Floquet {
        /// Hamiltonian document.
        input: PathBuf,
        /// Initial integration step count (doubled as needed).
        #[arg(long, default_value_t = 4096)]
        steps: usize,
        /// Number of equispaced period fractions for the
        /// spectrum-invariance residual.
        #[arg(long, default_value_t = INVARIANCE_SAMPLES)]
        samples: usize,
        /// Period override; a modulated oscillator defaults to its
        /// drive period, and overrides must stay commensurate with it.
        #[arg(long)]
        period: Option<f64>,
    },
}

/// On-disk description of a periodic quadratic Hamiltonian.
#[derive(Debug, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum HamiltonianDoc {
    Constant { b: Vec<Vec<f64>>, period: f64 },
    Mathieu { omega0: f64, epsilon: f64, drive: f64 },
}

/// 17-significant-digit float encoding used in all CSV output.
fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x)
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {}", path.display(), e)))
}

fn load_state(path: &Path) -> Result<GaussianState> {
    let text = read_file(path)?;
    state_from_json(&text)
        .map_err(|e| Error::InvalidInput(format!("malformed state document {}: {}", path.display(), e)))
}

/// Executes one invocation, appending its report to `out`. The report
/// is appended even on failure paths that produce one (an unphysical
/// state, an over-tolerance verification), so callers should flush
/// `out` before inspecting the error.
pub fn run(config: &RunConfig, out: &mut String) -> Result<()> {
    match &config.command {
        Command::State {
            input,
            make,
            modes,
            alpha_re,
            alpha_im,
            nbar,
            r,
            phi,
        } => run_state(
            config.format,
            out,
            input.as_deref(),
            *make,
            *modes,
            Complex64::new(*alpha_re, *alpha_im),
            *nbar,
            *r,
            *phi,
        ),
        Command::Pnd {
            input,
            cutoff,
            tail_tol,
            variant,
        } => run_pnd(config.format, out, input, *cutoff, *tail_tol, variant),
        Command::Verify { input, cutoff } => run_verify(config.format, out, input, *cutoff),
        Command::Qplanck {
            lambda,
            x,
            x_min,
            x_max,
            x_steps,
        } => run_qplanck(config.format, out, *lambda, *x, *x_min, *x_max, *x_steps),
        Command::Floquet {
            input,
            steps,
            samples,
            period,
        } => run_floquet(config.format, out, input, *steps, *samples, *period),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_state(
    format: OutputFormat,
    out: &mut String,
    input: Option<&Path>,
    make: Option<StateKind>,
    modes: usize,
    alpha: Complex64,
    nbar: f64,
    r: f64,
    phi: f64,
) -> Result<()> {
    let state = match (input, make) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput(
                "give either an input file or --make, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "state needs an input file or --make".into(),
            ))
        }
        (None, Some(kind)) => {
            let state = match kind {
                StateKind::Vacuum => make_vacuum(modes)?,
                StateKind::Coherent => make_coherent(&vec![alpha; modes])?,
                StateKind::Thermal => make_thermal(&vec![nbar; modes])?,
                StateKind::Squeezed => {
                    if modes != 1 {
                        return Err(Error::InvalidInput(
                            "--make squeezed produces a single-mode state".into(),
                        ));
                    }
                    make_squeezed_vacuum(r, phi)?
                }
            };
            out.push_str(&state_to_json(&state)?);
            out.push('\n');
            return Ok(());
        }
        (Some(path), None) => load_state(path)?,
    };

    let report = validate(&state)?;
    let physical = report.is_physical();
    let (purity_value, mean_photons) = if physical {
        let means = (0..state.n_modes)
            .map(|m| mean_photon_number(&state, m))
            .collect::<Result<Vec<f64>>>()?;
        (Some(purity(&state)?), Some(means))
    } else {
        (None, None)
    };

    match format {
        OutputFormat::Csv => {
            out.push_str("field,value\n");
            out.push_str(&format!("n_modes,{}\n", state.n_modes));
            out.push_str(&format!(
                "symmetry_residual,{}\n",
                fmt_float(report.symmetry_residual)
            ));
            out.push_str(&format!(
                "min_symplectic_eigenvalue,{}\n",
                fmt_float(report.min_symplectic_eigenvalue)
            ));
            for (k, nu) in report.symplectic_eigenvalues.iter().enumerate() {
                out.push_str(&format!("symplectic_eigenvalue_{},{}\n", k, fmt_float(*nu)));
            }
            out.push_str(&format!("physical,{}\n", physical));
            out.push_str(&format!("violations,{}\n", report.violations.len()));
            if let Some(p) = purity_value {
                out.push_str(&format!("purity,{}\n", fmt_float(p)));
            }
            if let Some(means) = &mean_photons {
                for (m, value) in means.iter().enumerate() {
                    out.push_str(&format!("mean_photons_mode_{},{}\n", m, fmt_float(*value)));
                }
            }
        }
        OutputFormat::Jsonl => {
            let line = serde_json::json!({
                "n_modes": state.n_modes,
                "symmetry_residual": report.symmetry_residual,
                "symplectic_eigenvalues": report.symplectic_eigenvalues,
                "min_symplectic_eigenvalue": report.min_symplectic_eigenvalue,
                "physical": physical,
                "violations": report.violations,
                "purity": purity_value,
                "mean_photons": mean_photons,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }

    if physical {
        Ok(())
    } else {
        Err(Error::InvalidState(format!(
            "state fails physicality: {}",
            report.violations.join("; ")
        )))
    }
}

/// Decodes a flat lattice offset into per-mode indices (first mode most
/// significant), matching [`PhotonDistribution::offset`].
fn decode_indices(flat: usize, n_modes: usize, side: usize) -> Vec<usize> {
    let mut indices = vec![0usize; n_modes];
    let mut rem = flat;
    for slot in indices.iter_mut().rev() {
        *slot = rem % side;
        rem /= side;
    }
    indices
}

fn index_header(n_modes: usize) -> String {
    (1..=n_modes)
        .map(|k| format!("n{}", k))
        .collect::<Vec<_>>()
        .join(",")
}

fn run_pnd(
    format: OutputFormat,
    out: &mut String,
    input: &Path,
    cutoff: Option<usize>,
    tail_tol: f64,
    variant_name: &str,
) -> Result<()> {
    let state = load_state(input)?;
    let variant = Variant::parse(variant_name)?;
    let cutoff = match cutoff {
        Some(c) => c,
        None => adaptive_cutoff(&state, tail_tol)?,
    };
    let dist = pnd_with_variant(&state, cutoff, variant)?;
    write_distribution(format, out, &dist);
    Ok(())
}

fn write_distribution(format: OutputFormat, out: &mut String, dist: &PhotonDistribution) {
    let side = dist.cutoff + 1;
    match format {
        OutputFormat::Csv => {
            out.push_str(&format!("# variant={}\n", dist.variant.id()));
            out.push_str(&format!("# cutoff={}\n", dist.cutoff));
            out.push_str(&format!("# p0={}\n", fmt_float(dist.p0)));
            out.push_str(&format!("# tail_mass={}\n", fmt_float(dist.tail_mass)));
            out.push_str(&format!("{},probability\n", index_header(dist.n_modes)));
            for (flat, p) in dist.probs.iter().enumerate() {
                let indices = decode_indices(flat, dist.n_modes, side);
                for idx in &indices {
                    out.push_str(&format!("{},", idx));
                }
                out.push_str(&fmt_float(*p));
                out.push('\n');
            }
        }
        OutputFormat::Jsonl => {
            let meta = serde_json::json!({
                "variant": dist.variant.id(),
                "cutoff": dist.cutoff,
                "p0": dist.p0,
                "tail_mass": dist.tail_mass,
            });
            out.push_str(&meta.to_string());
            out.push('\n');
            for (flat, p) in dist.probs.iter().enumerate() {
                let indices = decode_indices(flat, dist.n_modes, side);
                let line = serde_json::json!({ "n": indices, "probability": p });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
    }
}

fn run_verify(
    format: OutputFormat,
    out: &mut String,
    input: &Path,
    cutoff: Option<usize>,
) -> Result<()> {
    let state = load_state(input)?;
    let order_limit = match state.n_modes {
        1 => MAX_SINGLE_MODE_ORDER,
        2 => MAX_TWO_MODE_ORDER,
        n => {
            return Err(Error::InvalidInput(format!(
                "verify supports one- and two-mode states, got {} modes",
                n
            )))
        }
    };
    let cutoff = match cutoff {
        Some(c) => c,
        None => adaptive_cutoff(&state, DEFAULT_TAIL_TOL)?.min(order_limit),
    };
    let dist = pnd_with_variant(&state, cutoff, Variant::Regular)?;
    let grid = QuadratureGrid::default_for(&state)?;

    // (indices, pipeline, oracle) triples in lattice order.
    let mut rows: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    if state.n_modes == 1 {
        let estimates = oracle_pnd_single_mode(&state, cutoff, &grid)?;
        for (n, estimate) in estimates.iter().enumerate() {
            rows.push((vec![n], dist.prob(&[n]), estimate.value));
        }
    } else {
        let estimates = oracle_pnd_two_mode(&state, cutoff, &grid)?;
        for (n1, row) in estimates.iter().enumerate() {
            for (n2, estimate) in row.iter().enumerate() {
                rows.push((vec![n1, n2], dist.prob(&[n1, n2]), estimate.value));
            }
        }
    }
    let max_dev = rows
        .iter()
        .map(|(_, p, o)| (p - o).abs())
        .fold(0.0, f64::max);

    match format {
        OutputFormat::Csv => {
            out.push_str(&format!("# cutoff={}\n", cutoff));
            out.push_str(&format!("# max_abs_deviation={}\n", fmt_float(max_dev)));
            out.push_str(&format!(
                "{},pnd,oracle,abs_deviation\n",
                index_header(state.n_modes)
            ));
            for (indices, p, o) in &rows {
                for idx in indices {
                    out.push_str(&format!("{},", idx));
                }
                out.push_str(&format!(
                    "{},{},{}\n",
                    fmt_float(*p),
                    fmt_float(*o),
                    fmt_float((p - o).abs())
                ));
            }
        }
        OutputFormat::Jsonl => {
            let meta = serde_json::json!({ "cutoff": cutoff, "max_abs_deviation": max_dev });
            out.push_str(&meta.to_string());
            out.push('\n');
            for (indices, p, o) in &rows {
                let line = serde_json::json!({
                    "n": indices,
                    "pnd": p,
                    "oracle": o,
                    "abs_deviation": (p - o).abs(),
                });
                out.push_str(&line.to_string());
                out.push('\n');
            }
        }
    }

    if max_dev <= VERIFY_TOL {
        Ok(())
    } else {
        Err(Error::Accuracy(format!(
            "pipeline and oracle disagree: max deviation {:.3e} exceeds {:.0e}",
            max_dev, VERIFY_TOL
        )))
    }
}

fn run_qplanck(
    format: OutputFormat,
    out: &mut String,
    lambda: f64,
    x: Option<f64>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    x_steps: Option<usize>,
) -> Result<()> {
    let xs: Vec<f64> = match (x, x_min, x_max, x_steps) {
        (Some(single), None, None, None) => vec![single],
        (None, Some(a), Some(b), Some(k)) => {
            if !a.is_finite() || !b.is_finite() || b <= a {
                return Err(Error::InvalidInput(format!(
                    "need finite x-min < x-max, got [{}, {}]",
                    a, b
                )));
            }
            if k < 2 {
                return Err(Error::InvalidInput(format!(
                    "x-steps must be at least 2, got {}",
                    k
                )));
            }
            (0..k)
                .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                .collect()
        }
        _ => {
            return Err(Error::InvalidInput(
                "give --x alone, or all of --x-min, --x-max, --x-steps".into(),
            ))
        }
    };
    let rows = planck_curve(lambda, &xs)?;

    match format {
        OutputFormat::Csv => {
            out.push_str(&format!("# lambda={}\n", fmt_float(lambda)));
            out.push_str("x,exact,approx,difference\n");
            for row in &rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_float(row.x),
                    fmt_float(row.exact),
                    fmt_float(row.approx),
                    fmt_float(row.difference)
                ));
            }
        }
        OutputFormat::Jsonl => {
            let meta = serde_json::json!({ "lambda": lambda });
            out.push_str(&meta.to_string());
            out.push('\n');
            for row in &rows {
                out.push_str(&serde_json::to_string(row)?);
                out.push('\n');
            }
        }
    }
    Ok(())
}

fn run_floquet(
    format: OutputFormat,
    out: &mut String,
    input: &Path,
    steps: usize,
    samples: usize,
    period_override: Option<f64>,
) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    let text = read_file(input)?;
    let doc: HamiltonianDoc = serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!(
            "malformed Hamiltonian document {}: {}",
            input.display(),
            e
        ))
    })?;
    let ham = match doc {
        HamiltonianDoc::Constant { b, period } => {
            let rows = b.len();
            if rows == 0 || b.iter().any(|row| row.len() != rows) {
                return Err(Error::InvalidInput(format!(
                    "constant form must be a square matrix, got {} rows",
                    rows
                )));
            }
            let flat: Vec<f64> = b.into_iter().flatten().collect();
            let matrix = nalgebra::DMatrix::from_row_slice(rows, rows, &flat);
            QuadraticHamiltonian::constant(matrix, period_override.unwrap_or(period))?
        }
        HamiltonianDoc::Mathieu {
            omega0,
            epsilon,
            drive,
        } => QuadraticHamiltonian::mathieu(omega0, epsilon, drive, period_override)?,
    };

    let report = monodromy(&ham, steps)?;
    let invariance_residual = if samples == INVARIANCE_SAMPLES {
        report.invariance_residual
    } else {
        let times: Vec<f64> = (0..samples)
            .map(|k| k as f64 * ham.period() / samples as f64)
            .collect();
        invariant_spectrum_check(&ham, &times, steps)?
    };
    let s_t_rows: Vec<Vec<f64>> = (0..report.s_t.nrows())
        .map(|i| report.s_t.row(i).iter().cloned().collect())
        .collect();
    let labels: Vec<String> = report.conjugacy.iter().map(|c| c.to_string()).collect();

    match format {
        OutputFormat::Csv => {
            out.push_str(&format!("# period={}\n", fmt_float(report.period)));
            out.push_str(&format!("# steps={}\n", steps));
            out.push_str(&format!("# samples={}\n", samples));
            out.push_str(&format!(
                "# symplectic_residual={}\n",
                fmt_float(report.symplectic_residual)
            ));
            out.push_str(&format!(
                "# invariance_residual={}\n",
                fmt_float(invariance_residual)
            ));
            out.push_str(&format!("# s_t={}\n", serde_json::to_string(&s_t_rows)?));
            out.push_str("record,index,value\n");
            for (i, phi) in report.phases.iter().enumerate() {
                out.push_str(&format!("phase,{},{}\n", i, fmt_float(*phi)));
            }
            for (i, label) in labels.iter().enumerate() {
                out.push_str(&format!("conjugacy,{},{}\n", i, label));
            }
        }
        OutputFormat::Jsonl => {
            let line = serde_json::json!({
                "period": report.period,
                "steps": steps,
                "samples": samples,
                "symplectic_residual": report.symplectic_residual,
                "invariance_residual": invariance_residual,
                "phases": report.phases,
                "conjugacy": labels,
                "s_t": s_t_rows,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_encoding_has_17_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.5), "-5.0000000000000000e-1");
        let x = std::f64::consts::PI;
        let round_trip: f64 = fmt_float(x).parse().unwrap();
        assert_eq!(round_trip, x);
    }

    #[test]
    fn lattice_offsets_decode_to_index_vectors() {
        assert_eq!(decode_indices(0, 2, 3), vec![0, 0]);
        assert_eq!(decode_indices(5, 2, 3), vec![1, 2]);
        assert_eq!(decode_indices(8, 2, 3), vec![2, 2]);
        assert_eq!(decode_indices(7, 1, 9), vec![7]);
    }

    #[test]
    fn index_header_numbers_modes_from_one() {
        assert_eq!(index_header(1), "n1");
        assert_eq!(index_header(3), "n1,n2,n3");
    }
}
