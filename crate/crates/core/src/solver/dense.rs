//! Dense symmetric solves shared by the direct solvers: Cholesky first,
//! SVD pseudo-inverse (least-norm) when singular.

use nalgebra::{DMatrix, DVector};

/// Solves `A x = b` for symmetric positive semidefinite `A`. Returns the
/// solution and whether the least-norm fallback was used.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> (DVector<f64>, bool) {
    if let Some(chol) = a.clone().cholesky() {
        (chol.solve(&b), false)
    } else {
        let svd = a.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        let x = svd.solve(&b, eps).expect("svd solve with u,v computed");
        (x, true)
    }
}
