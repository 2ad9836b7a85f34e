//! Small dense linear algebra: dot products, Cholesky factorization of
//! symmetric positive definite systems, and a cheap condition estimate.
//!
//! The systems here are d x d with d in the tens, so everything is written
//! directly on row-major `&[F]` buffers; no external matrix crate is pulled
//! in for this.

use crate::scalar::Scalar;

/// Inner product. Shared by data generation and estimation so that a noise
/// free response reproduces bitwise in the residual computation.
#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// Euclidean norm.
pub fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

/// Euclidean distance between two vectors of equal length.
pub fn dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        let t = *x - *y;
        acc = acc + t * t;
    }
    acc.sqrt()
}

/// Result of a symmetric positive definite solve.
#[derive(Debug, Clone)]
pub struct SpdSolve<F> {
    pub solution: Vec<F>,
    /// Power-iteration estimate of the 2-norm condition number of the
    /// (regularized) matrix that was factored.
    pub condition: F,
}

/// Solves `(a + ridge * I) x = rhs` for symmetric positive semidefinite `a`
/// (row-major, `dim * dim`). Returns `None` when the Cholesky factorization
/// breaks down, i.e. the regularized matrix is numerically indefinite.
pub fn solve_spd_with_ridge<F: Scalar>(
    a: &[F],
    dim: usize,
    rhs: &[F],
    ridge: F,
) -> Option<SpdSolve<F>> {
    assert_eq!(a.len(), dim * dim, "gram matrix size");
    assert_eq!(rhs.len(), dim, "rhs length");
    let mut reg = a.to_vec();
    for i in 0..dim {
        reg[i * dim + i] += ridge;
    }
    let l = cholesky(&reg, dim)?;
    let solution = chol_solve(&l, dim, rhs);
    if solution.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let condition = condition_estimate(&reg, &l, dim);
    Some(SpdSolve { solution, condition })
}

/// Ordinary (ridge) least squares over the selected rows of a flat row-major
/// design. Used by the data-driven initializer and the alternating
/// minimization refit; the EM M-step accumulates its own weighted version.
pub fn ols_on_rows<F: Scalar>(
    design: &[F],
    dim: usize,
    response: &[F],
    rows: &[usize],
    ridge: F,
) -> Option<SpdSolve<F>> {
    let mut gram = vec![F::zero(); dim * dim];
    let mut rhs = vec![F::zero(); dim];
    for &i in rows {
        let x = &design[i * dim..(i + 1) * dim];
        let y = response[i];
        for r in 0..dim {
            let xr = x[r];
            rhs[r] += xr * y;
            for c in r..dim {
                gram[r * dim + c] += xr * x[c];
            }
        }
    }
    mirror_upper_to_lower(&mut gram, dim);
    solve_spd_with_ridge(&gram, dim, &rhs, ridge)
}

/// Copies the upper triangle onto the lower one; accumulation loops only
/// fill `r <= c`.
pub fn mirror_upper_to_lower<F: Scalar>(a: &mut [F], dim: usize) {
    for r in 0..dim {
        for c in 0..r {
            a[r * dim + c] = a[c * dim + r];
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// or `None` if a pivot is not strictly positive.
fn cholesky<F: Scalar>(a: &[F], dim: usize) -> Option<Vec<F>> {
    let mut l = vec![F::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a[i * dim + j];
            for t in 0..j {
                s = s - l[i * dim + t] * l[j * dim + t];
            }
            if i == j {
                if !(s > F::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the lower factor.
fn chol_solve<F: Scalar>(l: &[F], dim: usize, b: &[F]) -> Vec<F> {
    let mut x = b.to_vec();
    // forward: L z = b
    for i in 0..dim {
        let mut s = x[i];
        for t in 0..i {
            s = s - l[i * dim + t] * x[t];
        }
        x[i] = s / l[i * dim + i];
    }
    // backward: L^T x = z
    for i in (0..dim).rev() {
        let mut s = x[i];
        for t in i + 1..dim {
            s = s - l[t * dim + i] * x[t];
        }
        x[i] = s / l[i * dim + i];
    }
    x
}

/// Ratio of extreme eigenvalue estimates of `a`, obtained from a few rounds
/// of power iteration (largest) and inverse iteration through the Cholesky
/// factor (smallest). Deterministic start vector, no RNG involved.
fn condition_estimate<F: Scalar>(a: &[F], l: &[F], dim: usize) -> F {
    if dim == 1 {
        return F::one();
    }
    let rounds = 8;
    let inv_sqrt_d = F::one() / F::from_usize(dim).unwrap().sqrt();
    let mut v = vec![inv_sqrt_d; dim];
    let mut lambda_max = F::zero();
    for _ in 0..rounds {
        let w = mat_vec(a, dim, &v);
        let n = norm(&w);
        if !(n > F::zero()) {
            lambda_max = F::zero();
            break;
        }
        lambda_max = n;
        v = w;
        let inv = F::one() / n;
        for x in v.iter_mut() {
            *x *= inv;
        }
    }
    let mut u = vec![inv_sqrt_d; dim];
    let mut inv_lambda_min = F::zero();
    for _ in 0..rounds {
        let w = chol_solve(l, dim, &u);
        let n = norm(&w);
        if !n.is_finite() || !(n > F::zero()) {
            return F::infinity();
        }
        inv_lambda_min = n;
        u = w;
        let inv = F::one() / n;
        for x in u.iter_mut() {
            *x *= inv;
        }
    }
    if inv_lambda_min == F::zero() {
        return F::infinity();
    }
    lambda_max * inv_lambda_min
}

fn mat_vec<F: Scalar>(a: &[F], dim: usize, v: &[F]) -> Vec<F> {
    let mut out = vec![F::zero(); dim];
    for r in 0..dim {
        out[r] = dot(&a[r * dim..(r + 1) * dim], v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(dim: usize) -> Vec<f64> {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        a
    }

    #[test]
    fn solves_identity_system() {
        let a = identity(3);
        let out = solve_spd_with_ridge(&a, 3, &[1.0, -2.0, 3.0], 0.0).unwrap();
        assert_eq!(out.solution, vec![1.0, -2.0, 3.0]);
        assert!((out.condition - 1.0).abs() < 1e-9);
    }

    #[test]
    fn solves_dense_spd_system() {
        // A = B^T B + I with fixed B keeps things positive definite.
        let b = [1.0, 2.0, 0.5, -1.0, 0.25, 3.0, 2.0, -0.5, 1.5];
        let dim = 3;
        let mut a = identity(dim);
        for r in 0..dim {
            for c in 0..dim {
                for t in 0..dim {
                    a[r * dim + c] += b[t * dim + r] * b[t * dim + c];
                }
            }
        }
        let x_true = [0.3, -1.2, 2.5];
        let mut rhs = vec![0.0; dim];
        for r in 0..dim {
            for c in 0..dim {
                rhs[r] += a[r * dim + c] * x_true[c];
            }
        }
        let out = solve_spd_with_ridge(&a, dim, &rhs, 0.0).unwrap();
        for (got, want) in out.solution.iter().zip(x_true) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = [1.0, 0.0, 0.0, -1.0];
        assert!(solve_spd_with_ridge(&a, 2, &[1.0, 1.0], 0.0).is_none());
        // A large enough ridge restores definiteness.
        assert!(solve_spd_with_ridge(&a, 2, &[1.0, 1.0], 2.0).is_some());
    }

    #[test]
    fn condition_estimate_tracks_diagonal_spread() {
        let mut a = identity(4);
        a[0] = 1e6;
        let out = solve_spd_with_ridge(&a, 4, &[1.0; 4], 0.0).unwrap();
        assert!(
            out.condition > 1e5 && out.condition < 2e6,
            "condition {}",
            out.condition
        );
    }

    #[test]
    fn ols_recovers_exact_linear_data() {
        let dim = 2;
        let design = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0];
        let beta = [3.0, -0.5];
        let response: Vec<f64> = (0..4)
            .map(|i| dot(&design[i * dim..(i + 1) * dim], &beta))
            .collect();
        let rows: Vec<usize> = (0..4).collect();
        let out = ols_on_rows(&design, dim, &response, &rows, 0.0).unwrap();
        for (got, want) in out.solution.iter().zip(beta) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
