//! Multidimensional Hermite polynomials evaluated over multi-index
//! lattices.
//!
//! The family `H_n(R, y)` is defined by the generating function
//! `exp(-a^t R a / 2 + a^t R y) = sum_n H_n a^n / n!` with `R` complex
//! symmetric and `n!` the product of entry factorials. Values are produced
//! by the raising recurrence
//!
//! `H_{n+e_k} = (R y)_k H_n - sum_j R_{kj} n_j H_{n-e_j}`
//!
//! seeded with `H_0 = 1`, traversed level-by-level in total order so every
//! dependency is already available. Only the product `R y` enters the
//! recurrence; specs can therefore be built either from `y` itself or
//! directly from the linear term, which stays finite for parameter
//! families where `y` alone is not representable.
//!
//! A scaled batch variant computes `H_n / sqrt(n!)`, which is bounded for
//! the distribution workloads in this crate and never overflows double
//! precision, unlike raw `H_n` whose magnitude grows factorially.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;

use crate::{Error, Result};

/// Largest lattice (in entries) a batch call will allocate.
pub const LATTICE_BUDGET: usize = 1 << 25;

/// Total-order guard for the series oracle.
pub const SERIES_ORDER_GUARD: usize = 12;

/// Level size above which batch levels are computed in parallel. Entries
/// are written back in lattice order, so results are identical either way.
const PAR_LEVEL_THRESHOLD: usize = 256;

/// Multi-index: a vector of non-negative integers labeling joint degrees.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<usize>,
}

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Total order: the sum of the entries.
    pub fn order(&self) -> usize {
        self.entries.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }
}

impl From<&[usize]> for MultiIndex {
    fn from(entries: &[usize]) -> Self {
        MultiIndex::new(entries.to_vec())
    }
}

/// Parameters of one Hermite family: dimension, complex symmetric `R`,
/// and the linear term of the generating function. `y` is kept when the
/// spec was built from an explicit argument vector.
#[derive(Clone, Debug)]
pub struct HermiteSpec {
    dim: usize,
    r: DMatrix<Complex64>,
    y: Option<DVector<Complex64>>,
    linear: DVector<Complex64>,
}

impl HermiteSpec {
    /// Builds a spec from `R` and the argument vector `y`; the linear term
    /// is calculated as `R y`. `R` must be symmetric to 1e-12.
    pub fn new(r: DMatrix<Complex64>, y: DVector<Complex64>) -> Result<Self> {
        Self::check_r(&r)?;
        if y.len() != r.nrows() {
            return Err(Error::InvalidInput(format!(
                "argument vector has length {}, expected {}",
                y.len(),
                r.nrows()
            )));
        }
        let linear = &r * &y;
        Ok(HermiteSpec {
            dim: r.nrows(),
            r,
            y: Some(y),
            linear,
        })
    }

    /// Builds a spec directly from `R` and the linear term `R y`, for
    /// families where the product is finite but `y` itself is not.
    pub fn from_linear_term(r: DMatrix<Complex64>, linear: DVector<Complex64>) -> Result<Self> {
        Self::check_r(&r)?;
        if linear.len() != r.nrows() {
            return Err(Error::InvalidInput(format!(
                "linear term has length {}, expected {}",
                linear.len(),
                r.nrows()
            )));
        }
        Ok(HermiteSpec {
            dim: r.nrows(),
            r,
            y: None,
            linear,
        })
    }

    fn check_r(r: &DMatrix<Complex64>) -> Result<()> {
        if r.nrows() == 0 || r.nrows() != r.ncols() {
            return Err(Error::InvalidInput(format!(
                "R must be square and non-empty, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let asym = (r - r.transpose()).map(|z| z.norm()).max();
        let scale = 1.0 + r.map(|z| z.norm()).max();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "R must be symmetric: asymmetry {:.3e} exceeds 1e-12 relative",
                asym
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> &DMatrix<Complex64> {
        &self.r
    }

    /// The argument vector, when one was supplied at construction.
    pub fn y(&self) -> Option<&DVector<Complex64>> {
        self.y.as_ref()
    }

    /// The linear term `R y` of the generating function.
    pub fn linear(&self) -> &DVector<Complex64> {
        &self.linear
    }
}

/// Dense table of Hermite values over the box `0..=caps[d]` per axis,
/// stored row-major with the last axis fastest.
#[derive(Clone, Debug)]
pub struct HermiteTable {
    caps: Vec<usize>,
    strides: Vec<usize>,
    /// True when entries hold `H_n / sqrt(n!)` instead of raw `H_n`.
    scaled: bool,
    values: Vec<Complex64>,
}

impl HermiteTable {
    pub fn dim(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat offset of a multi-index (must be inside the box).
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.caps.len());
        index
            .iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        self.values[self.offset(index)]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

fn strides_for(caps: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; caps.len()];
    for d in (0..caps.len().saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * (caps[d + 1] + 1);
    }
    strides
}

fn lattice_len(caps: &[usize]) -> Result<usize> {
    let mut len: usize = 1;
    for &c in caps {
        len = len
            .checked_mul(c + 1)
            .filter(|&l| l <= LATTICE_BUDGET)
            .ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "hermite lattice {:?} exceeds the {} entry budget",
                    caps.iter().map(|&c| c + 1).collect::<Vec<_>>(),
                    LATTICE_BUDGET
                ))
            })?;
    }
    Ok(len)
}

/// Groups every multi-index in the box by total order; each group holds
/// flat offsets in lexicographic (deterministic) order.
fn levels_for(caps: &[usize], strides: &[usize]) -> Vec<Vec<usize>> {
    let max_level: usize = caps.iter().sum();
    let mut levels = vec![Vec::new(); max_level + 1];
    let mut index = vec![0usize; caps.len()];
    loop {
        let order: usize = index.iter().sum();
        let flat: usize = index.iter().zip(strides).map(|(i, s)| i * s).sum();
        levels[order].push(flat);
        // Odometer increment over the box.
        let mut d = caps.len();
        loop {
            if d == 0 {
                return levels;
            }
            d -= 1;
            if index[d] < caps[d] {
                index[d] += 1;
                break;
            }
            index[d] = 0;
        }
    }
}

/// One recurrence step: the value at `flat` from already-filled lower
/// levels. `scaled` selects the `H_n / sqrt(n!)` form.
fn entry_value(
    flat: usize,
    caps: &[usize],
    strides: &[usize],
    r: &DMatrix<Complex64>,
    linear: &DVector<Complex64>,
    values: &[Complex64],
    scaled: bool,
) -> Complex64 {
    let dim = caps.len();
    let mut idx = vec![0usize; dim];
    let mut rem = flat;
    for d in 0..dim {
        idx[d] = rem / strides[d];
        rem %= strides[d];
    }
    let k = idx
        .iter()
        .position(|&v| v > 0)
        .expect("level zero is seeded, not computed");
    // Predecessor m = idx - e_k; dependencies m and m - e_j.
    let m_flat = flat - strides[k];
    let mut acc = linear[k] * values[m_flat];
    for j in 0..dim {
        let m_j = if j == k { idx[j] - 1 } else { idx[j] };
        if m_j == 0 {
            continue;
        }
        let weight = if scaled { (m_j as f64).sqrt() } else { m_j as f64 };
        acc -= r[(k, j)] * weight * values[m_flat - strides[j]];
    }
    if scaled {
        acc / (idx[k] as f64).sqrt()
    } else {
        acc
    }
}

fn batch_over_box(spec: &HermiteSpec, caps: &[usize], scaled: bool) -> Result<HermiteTable> {
    if caps.len() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "box has {} axes, spec has dimension {}",
            caps.len(),
            spec.dim
        )));
    }
    let len = lattice_len(caps)?;
    let strides = strides_for(caps);
    let mut values = vec![Complex64::new(0.0, 0.0); len];
    values[0] = Complex64::new(1.0, 0.0);

    let levels = levels_for(caps, &strides);
    for level in levels.iter().skip(1) {
        if level.len() >= PAR_LEVEL_THRESHOLD {
            let computed: Vec<Complex64> = level
                .par_iter()
                .map(|&flat| {
                    entry_value(flat, caps, &strides, &spec.r, &spec.linear, &values, scaled)
                })
                .collect();
            for (&flat, value) in level.iter().zip(computed) {
                values[flat] = value;
            }
        } else {
            for &flat in level {
                values[flat] =
                    entry_value(flat, caps, &strides, &spec.r, &spec.linear, &values, scaled);
            }
        }
    }

    Ok(HermiteTable {
        caps: caps.to_vec(),
        strides,
        scaled,
        values,
    })
}

/// Evaluates a single `H_n` by running the recurrence over the minimal
/// box `0..=n_d` per axis; cost is the product of `(n_d + 1)`.
pub fn hermite_eval(spec: &HermiteSpec, n: &MultiIndex) -> Result<Complex64> {
    if n.dim() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "multi-index has dimension {}, spec has {}",
            n.dim(),
            spec.dim
        )));
    }
    let table = batch_over_box(spec, n.entries(), false)?;
    Ok(table.get(n.entries()))
}

/// Evaluates every `H_n` with all entries at most `cutoff`, level by
/// level; each value is computed exactly once. Output is bit-identical
/// across runs and worker counts.
pub fn hermite_batch(spec: &HermiteSpec, cutoff: usize) -> Result<HermiteTable> {
    batch_over_box(spec, &vec![cutoff; spec.dim], false)
}

/// Same lattice as [`hermite_batch`] but holding `H_n / sqrt(n!)`: the
/// overflow-free form consumed by the photon-distribution assembly.
pub fn hermite_batch_scaled(spec: &HermiteSpec, cutoff: usize) -> Result<HermiteTable> {
    batch_over_box(spec, &vec![cutoff; spec.dim], true)
}

/// Independent oracle: extracts `H_n` from the truncated multinomial
/// expansion of `exp(-a^t R a / 2) * exp(a^t (R y))`. Exponential in the
/// order, so guarded at order [`SERIES_ORDER_GUARD`]; `max_terms` bounds
/// the number of live monomials.
pub fn hermite_series_oracle(
    spec: &HermiteSpec,
    n: &MultiIndex,
    max_terms: usize,
) -> Result<Complex64> {
    if n.dim() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "multi-index has dimension {}, spec has {}",
            n.dim(),
            spec.dim
        )));
    }
    let order = n.order();
    if order > SERIES_ORDER_GUARD {
        return Err(Error::ResourceLimit(format!(
            "series oracle supports order <= {}, got {}",
            SERIES_ORDER_GUARD, order
        )));
    }
    let dim = spec.dim;

    // The argument polynomial P = -a^t R a / 2 + a^t (R y), as a sparse
    // exponent-vector map. Monomials with any exponent above n_d can never
    // contribute to the coefficient of a^n and are pruned throughout.
    let mut arg: HashMap<Vec<usize>, Complex64> = HashMap::new();
    for k in 0..dim {
        if n.entries()[k] == 0 {
            continue;
        }
        let mut key = vec![0usize; dim];
        key[k] = 1;
        let c = spec.linear[k];
        if c != Complex64::new(0.0, 0.0) {
            *arg.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let mut key = vec![0usize; dim];
            key[i] += 1;
            key[j] += 1;
            if key.iter().zip(n.entries()).any(|(e, cap)| e > cap) {
                continue;
            }
            let c = if i == j {
                -0.5 * spec.r[(i, j)]
            } else {
                -spec.r[(i, j)]
            };
            if c != Complex64::new(0.0, 0.0) {
                *arg.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
    }

    // exp(P) = sum_k P^k / k!, truncated at total degree `order`; every
    // term of P has degree >= 1, so k ranges over 0..=order.
    let one = Complex64::new(1.0, 0.0);
    let mut result: HashMap<Vec<usize>, Complex64> = HashMap::new();
    result.insert(vec![0usize; dim], one);
    let mut power: HashMap<Vec<usize>, Complex64> = result.clone();
    let mut factorial = 1.0f64;
    for k in 1..=order {
        factorial *= k as f64;
        let mut next: HashMap<Vec<usize>, Complex64> = HashMap::new();
        for (pe, pc) in &power {
            for (ae, ac) in &arg {
                let mut key = pe.clone();
                let mut ok = true;
                for d in 0..dim {
                    key[d] += ae[d];
                    if key[d] > n.entries()[d] {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                *next.entry(key).or_insert(Complex64::new(0.0, 0.0)) += pc * ac;
            }
            if next.len() > max_terms {
                return Err(Error::ResourceLimit(format!(
                    "series oracle exceeded {} live monomials",
                    max_terms
                )));
            }
        }
        power = next;
        if power.is_empty() {
            break;
        }
        let inv_fact = 1.0 / factorial;
        for (e, c) in &power {
            *result.entry(e.clone()).or_insert(Complex64::new(0.0, 0.0)) += c * inv_fact;
        }
    }

    let coeff = result
        .get(n.entries())
        .copied()
        .unwrap_or(Complex64::new(0.0, 0.0));
    let mut n_factorial = 1.0f64;
    for &e in n.entries() {
        for m in 1..=e {
            n_factorial *= m as f64;
        }
    }
    Ok(coeff * n_factorial)
}
