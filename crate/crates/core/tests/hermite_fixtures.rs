//! Checks the Hermite recurrence against frozen reference values produced
//! by an exact-rational multinomial expansion of the generating function.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use photondist::hermite::{hermite_eval, HermiteSpec, MultiIndex};
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixture {
    r: Vec<Vec<[f64; 2]>>,
    y: Vec<[f64; 2]>,
    n: Vec<usize>,
    value: [f64; 2],
}

#[test]
fn recurrence_matches_frozen_reference_values() {
    let raw = include_str!("fixtures/hermite_reference.json");
    let fixtures: Vec<Fixture> = serde_json::from_str(raw).expect("fixture file parses");
    assert!(fixtures.len() >= 50, "expected a full fixture set");

    for (i, f) in fixtures.iter().enumerate() {
        let dim = f.r.len();
        let r = DMatrix::from_fn(dim, dim, |a, b| Complex64::new(f.r[a][b][0], f.r[a][b][1]));
        let y = DVector::from_fn(dim, |a, _| Complex64::new(f.y[a][0], f.y[a][1]));
        let spec = HermiteSpec::new(r, y).expect("fixture spec is valid");
        let got = hermite_eval(&spec, &MultiIndex::new(f.n.clone())).expect("evaluation succeeds");
        let expected = Complex64::new(f.value[0], f.value[1]);
        let tol = 1e-12 * (1.0 + expected.norm());
        assert!(
            (got - expected).norm() <= tol,
            "fixture {}: n = {:?}, got {}, expected {}",
            i,
            f.n,
            got,
            expected
        );
    }
}
