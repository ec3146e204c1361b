//! Dense complex linear algebra used by the propagators.
//!
//! Dimensions stay tiny (the largest superoperator is 36x36), so everything
//! here is written as straightforward dense loops rather than delegating to
//! an external BLAS/LAPACK backend.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type C64 = Complex64;

/// C = A * B for square or rectangular complex matrices.
///
/// Plain ikj loop over row-major storage; fast enough for the dimensions in
/// this crate and bitwise deterministic.
pub fn matmul(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (n, k1) = a.dim();
    let (k2, m) = b.dim();
    assert_eq!(k1, k2, "matmul dimension mismatch");
    let mut c = Array2::<C64>::zeros((n, m));
    for i in 0..n {
        let a_row = a.row(i);
        let mut c_row = c.row_mut(i);
        let c_slice = c_row.as_slice_mut().expect("row-major output");
        for k in 0..k1 {
            let aik = a_row[k];
            if aik == C64::new(0.0, 0.0) {
                continue;
            }
            let b_row = b.row(k);
            let b_slice = b_row.as_slice().expect("row-major input");
            for j in 0..m {
                c_slice[j] += aik * b_slice[j];
            }
        }
    }
    c
}

/// Matrix-vector product y = A x.
pub fn matvec(a: &Array2<C64>, x: &Array1<C64>) -> Array1<C64> {
    let (n, m) = a.dim();
    assert_eq!(m, x.len(), "matvec dimension mismatch");
    let mut y = Array1::<C64>::zeros(n);
    let xs = x.as_slice().expect("contiguous vector");
    for i in 0..n {
        let row = a.row(i);
        let rs = row.as_slice().expect("row-major input");
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..m {
            acc += rs[j] * xs[j];
        }
        y[i] = acc;
    }
    y
}

/// Kronecker product A (x) B.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[[i * br + p, j * bc + q]] = aij * b[[p, q]];
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    let (n, m) = a.dim();
    let mut out = Array2::<C64>::zeros((m, n));
    for i in 0..n {
        for j in 0..m {
            out[[j, i]] = a[[i, j]].conj();
        }
    }
    out
}

/// Maximum absolute column sum (the induced 1-norm).
pub fn one_norm(a: &Array2<C64>) -> f64 {
    let (n, m) = a.dim();
    let mut best = 0.0f64;
    for j in 0..m {
        let mut s = 0.0;
        for i in 0..n {
            s += a[[i, j]].norm();
        }
        best = best.max(s);
    }
    best
}

/// Largest elementwise modulus.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

const EXPM_THETA: f64 = 0.5;
const EXPM_MAX_TERMS: usize = 40;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The input is scaled so its 1-norm is at most 0.5; the series is summed
/// until the next term falls below unit roundoff relative to the running
/// sum, which keeps the truncation error of the scaled exponential far below
/// 1e-12 in operator norm. The result is then squared back up.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(CoreError::invalid(format!(
            "expm requires a square matrix, got {n}x{m}"
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CoreError::numeric("expm input contains non-finite entries"));
    }

    let norm = one_norm(a);
    let squarings = if norm <= EXPM_THETA {
        0
    } else {
        (norm / EXPM_THETA).log2().ceil() as u32
    };
    let scale = C64::new(0.5f64.powi(squarings as i32), 0.0);
    let scaled = a.mapv(|z| z * scale);

    // exp(scaled) = I + scaled + scaled^2/2! + ...
    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=EXPM_MAX_TERMS {
        term = matmul(&term, &scaled);
        term.mapv_inplace(|z| z / k as f64);
        result += &term;
        if one_norm(&term) <= f64::EPSILON * one_norm(&result) {
            break;
        }
    }

    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    Ok(result)
}

/// Eigenvalues of a real symmetric matrix by the cyclic Jacobi method.
///
/// Returns the eigenvalues in ascending order.
pub fn symmetric_eigenvalues(mat: &Array2<f64>) -> Vec<f64> {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "symmetric_eigenvalues needs a square matrix");
    let mut a = mat.clone();

    let off = |a: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[[i, j]] * a[[i, j]];
                }
            }
        }
        s
    };

    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(1.0);
    let tol = 1e-28 * scale;
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Smallest eigenvalue of a complex Hermitian matrix.
///
/// Embeds H = A + iB into the real symmetric matrix [[A, -B], [B, A]],
/// whose spectrum is that of H with every eigenvalue doubled.
pub fn hermitian_min_eigenvalue(h: &Array2<C64>) -> f64 {
    let n = h.nrows();
    let mut real = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = h[[i, j]];
            real[[i, j]] = z.re;
            real[[i + n, j + n]] = z.re;
            real[[i, j + n]] = -z.im;
            real[[i + n, j]] = z.im;
        }
    }
    let eigs = symmetric_eigenvalues(&real);
    eigs[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matmul_matches_hand_computation() {
        let a = array![[c(1.0, 0.0), c(0.0, 1.0)], [c(2.0, 0.0), c(0.0, 0.0)]];
        let b = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, -1.0)]];
        let p = matmul(&a, &b);
        assert_eq!(p[[0, 0]], c(0.0, 1.0));
        assert_eq!(p[[0, 1]], c(2.0, 0.0));
        assert_eq!(p[[1, 0]], c(0.0, 0.0));
        assert_eq!(p[[1, 1]], c(2.0, 0.0));
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = Array2::<C64>::eye(2);
        let i3 = Array2::<C64>::eye(3);
        let k = kron(&i2, &i3);
        assert_eq!(k, Array2::<C64>::eye(6));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((4, 4));
        let e = expm(&z).unwrap();
        assert_eq!(e, Array2::<C64>::eye(4));
    }

    #[test]
    fn expm_diagonal_matches_scalar_exponential() {
        let a = array![[c(1.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.3, 2.0)]];
        let e = expm(&a).unwrap();
        let e00 = (1.5f64).exp();
        let e11 = C64::new(-0.3, 2.0).exp();
        assert_abs_diff_eq!(e[[0, 0]].re, e00, epsilon = 1e-12);
        assert_abs_diff_eq!(e[[1, 1]].re, e11.re, epsilon = 1e-12);
        assert_abs_diff_eq!(e[[1, 1]].im, e11.im, epsilon = 1e-12);
        assert_abs_diff_eq!(e[[0, 1]].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn expm_antihermitian_rotation() {
        // exp(-i t sigma_x) = cos(t) I - i sin(t) sigma_x
        let t = 0.7;
        let a = array![[c(0.0, 0.0), c(0.0, -t)], [c(0.0, -t), c(0.0, 0.0)]];
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[[0, 0]].re, t.cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[[0, 1]].im, -t.sin(), epsilon = 1e-13);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        // exp of a stiff decay: diagonal -1e6 entry must come out as ~0, not NaN.
        let a = array![[c(-1.0e6, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let e = expm(&a).unwrap();
        assert!(e[[0, 0]].norm() < 1e-300);
        assert_abs_diff_eq!(e[[1, 1]].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expm_rejects_non_finite() {
        let a = array![[c(f64::NAN, 0.0)]];
        assert!(matches!(expm(&a), Err(CoreError::NumericDomain(_))));
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let m = array![[2.0, 1.0], [1.0, 2.0]];
        let eigs = symmetric_eigenvalues(&m);
        assert_abs_diff_eq!(eigs[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_min_eigenvalue_of_pauli_y() {
        let m = array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        assert_abs_diff_eq!(hermitian_min_eigenvalue(&m), -1.0, epsilon = 1e-12);
    }
}
