//! Thin helpers over nalgebra for the small dense systems used here.
//!
//! Conventions:
//! * every linear solve is accepted only if its relative residual is below
//!   [`SOLVE_RESIDUAL_TOL`], otherwise it is reported as an error;
//! * rank decisions use singular values relative to the largest one with
//!   threshold [`RANK_TOL`].

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Relative residual bound for accepting a linear solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Singular values below `RANK_TOL * sigma_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

fn residual_rel(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = a * x - b;
    let scale = b.amax().max(a.amax() * x.amax()).max(1e-300);
    r.amax() / scale
}

/// Solve `a x = b` by LU, verifying the residual.
pub fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let x = a.clone().lu().solve(b).ok_or_else(|| Error::Singular {
        context: context.to_string(),
        detail: "matrix is singular".to_string(),
    })?;
    let res = residual_rel(a, &x, b);
    if !res.is_finite() || res > SOLVE_RESIDUAL_TOL {
        return Err(Error::Singular {
            context: context.to_string(),
            detail: format!("solution residual {res:.3e} exceeds {SOLVE_RESIDUAL_TOL:.1e}"),
        });
    }
    Ok(x)
}

/// Rank of `a` under [`RANK_TOL`].
pub fn rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Basis of the null space of `a` (right singular vectors for negligible
/// singular values). Vectors are unit length.
pub fn null_space(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let ncols = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut basis = Vec::new();
    for j in 0..ncols {
        let s = if j < sv.len() { sv[j] } else { 0.0 };
        if smax == 0.0 || s <= RANK_TOL * smax {
            if j < v_t.nrows() {
                basis.push(v_t.row(j).transpose());
            }
        }
    }
    // A wide/thin SVD may not expose trailing null directions; fall back on the
    // full right basis only when dimensions already cover them.
    basis
}

/// One-dimensional null space of `a`, erroring unless the nullity is exactly 1.
pub fn null_vector_1d(a: &DMatrix<f64>, context: &str) -> Result<DVector<f64>> {
    let nullity = a.ncols() - rank(a);
    if nullity != 1 {
        return Err(Error::hypothesis(format!(
            "{context}: null space must be one-dimensional, found nullity {nullity} (rank {} of {} columns)",
            rank(a),
            a.ncols()
        )));
    }
    let basis = null_space(a);
    basis.into_iter().next().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        detail: "svd returned no null direction".to_string(),
    })
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = if smax > 0.0 { RANK_TOL * smax } else { RANK_TOL };
    svd.solve(b, eps).map_err(|e| Error::Singular {
        context: context.to_string(),
        detail: e.to_string(),
    })
}

/// Real eigenvalues of `m`: eigenvalues whose imaginary part is negligible
/// relative to the matrix scale, sorted ascending.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let scale = m.amax().max(1.0);
    let eig = m.complex_eigenvalues();
    let mut out: Vec<f64> = eig
        .iter()
        .filter(|z| z.im.abs() <= 1e-8 * scale)
        .map(|z| z.re)
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Geometric mean of a strictly positive vector.
pub fn geometric_mean(v: &DVector<f64>) -> Result<f64> {
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::domain(
            "geometric mean requires strictly positive entries".to_string(),
        ));
    }
    let mean_log = v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64;
    Ok(mean_log.exp())
}
