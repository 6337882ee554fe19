//! Slow, self-contained reference implementations used by tests: dense
//! direct Nystrom reconstruction, Gaussian-elimination solve, cyclic Jacobi
//! eigendecomposition, the explicit Taylor feature map, and error
//! measurement. Everything here is single-threaded and guarded to desk
//! scale; none of it shares code with the fast paths it checks.

use crate::dense::{kernel_block, DenseMatrix, KernelSpec};
use crate::error::{Error, Result};

const MAX_ORACLE_DIM: usize = 512;

/// Norms of a difference matrix, plus the optional clipped attention bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub max_norm_err: f64,
    pub rowwise_err: f64,
    pub spectral_err: f64,
    pub clipped_bound: Option<f64>,
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns.
pub fn jacobi_eigh(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::DimensionMismatch("jacobi_eigh: matrix not square".into()));
    }
    if n > MAX_ORACLE_DIM {
        return Err(Error::SizeGuard(format!("jacobi_eigh limited to n <= {MAX_ORACLE_DIM}")));
    }
    let mut a: Vec<f64> = m.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + newc] = v[r * n + oldc];
        }
    }
    Ok((eigvals, DenseMatrix::from_vec(n, n, vecs)?))
}

/// Sum of absolute eigenvalues of a symmetric matrix (the nuclear norm).
pub fn nuclear_norm_sym(m: &DenseMatrix) -> Result<f64> {
    let (eigvals, _) = jacobi_eigh(m)?;
    Ok(eigvals.iter().map(|x| x.abs()).sum())
}

/// Condition number lambda_max/lambda_min of a symmetric positive definite
/// matrix, via the Jacobi eigenvalues.
pub fn condition_number_sym(m: &DenseMatrix) -> Result<f64> {
    let (eigvals, _) = jacobi_eigh(m)?;
    let lmax = eigvals.first().copied().unwrap_or(0.0);
    let lmin = eigvals.last().copied().unwrap_or(0.0);
    if lmin <= 0.0 {
        return Err(Error::Singular("condition_number_sym: nonpositive eigenvalue".into()));
    }
    Ok(lmax / lmin)
}

/// Dense Nystrom reconstruction h(K,·) restricted to the coreset S, via an
/// explicit pseudo-inverse with eigenvalue cutoff 1e-12·lambda_max.
/// An empty S yields the zero matrix.
pub fn direct_nystrom(keys: &DenseMatrix, spec: &KernelSpec, s_idx: &[usize]) -> Result<DenseMatrix> {
    let n = keys.rows();
    if n > MAX_ORACLE_DIM {
        return Err(Error::SizeGuard(format!("direct_nystrom limited to n <= {MAX_ORACLE_DIM}")));
    }
    if s_idx.is_empty() {
        return Ok(DenseMatrix::zeros(n, n));
    }
    let coreset = keys.gather_rows(s_idx)?;
    let cross = kernel_block(spec, keys, &coreset)?; // n x r
    let core = kernel_block(spec, &coreset, &coreset)?; // r x r
    let (eigvals, vecs) = jacobi_eigh(&core)?;
    let cutoff = 1e-12 * eigvals.first().copied().unwrap_or(0.0).max(0.0);
    let r = s_idx.len();
    // pinv = V diag(1/lambda where lambda > cutoff) Vᵀ
    let mut pinv = vec![0.0; r * r];
    for (k, &lambda) in eigvals.iter().enumerate() {
        if lambda > cutoff {
            let inv = 1.0 / lambda;
            for i in 0..r {
                let vik = vecs.get(i, k);
                for j in 0..r {
                    pinv[i * r + j] += inv * vik * vecs.get(j, k);
                }
            }
        }
    }
    let pinv = DenseMatrix::from_vec(r, r, pinv)?;
    cross.matmul(&pinv)?.matmul(&cross.transpose())
}

/// Solves A·X = B by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch("dense_solve: A not square".into()));
    }
    if b.rows() != n {
        return Err(Error::DimensionMismatch("dense_solve: B row mismatch".into()));
    }
    if n > MAX_ORACLE_DIM {
        return Err(Error::SizeGuard(format!("dense_solve limited to n <= {MAX_ORACLE_DIM}")));
    }
    let m = b.cols();
    let mut aug: Vec<f64> = Vec::with_capacity(n * (n + m));
    for i in 0..n {
        aug.extend_from_slice(a.row(i));
        aug.extend_from_slice(b.row(i));
    }
    let w = n + m;
    let scale = a.max_norm().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                aug[i * w + col]
                    .abs()
                    .partial_cmp(&aug[j * w + col].abs())
                    .unwrap()
            })
            .unwrap();
        if aug[pivot_row * w + col].abs() <= 1e-300 + 1e-14 * scale * f64::EPSILON {
            return Err(Error::Singular(format!("dense_solve: pivot {col} vanished")));
        }
        if pivot_row != col {
            for j in 0..w {
                aug.swap(col * w + j, pivot_row * w + j);
            }
        }
        let pivot = aug[col * w + col];
        for i in (col + 1)..n {
            let factor = aug[i * w + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..w {
                aug[i * w + j] -= factor * aug[col * w + j];
            }
        }
    }
    // back substitution
    let mut x = vec![0.0; n * m];
    for i in (0..n).rev() {
        for j in 0..m {
            let mut acc = aug[i * w + n + j];
            for k in (i + 1)..n {
                acc -= aug[i * w + k] * x[k * m + j];
            }
            x[i * m + j] = acc / aug[i * w + i];
        }
    }
    DenseMatrix::from_vec(n, m, x)
}

/// Exact order-s Taylor kernel matrix built from the explicit multi-index
/// feature map phi_alpha(k) = sqrt(multinom(|alpha|, alpha)·c^|alpha|/|alpha|!)·k^alpha
/// with c = beta/tau². Guarded to d <= 4, s <= 8.
pub fn taylor_feature_gram(keys: &DenseMatrix, spec: &KernelSpec, order: usize) -> Result<DenseMatrix> {
    let d = keys.cols();
    if d > 4 || order > 8 {
        return Err(Error::SizeGuard(
            "taylor_feature_gram limited to d <= 4, s <= 8".into(),
        ));
    }
    let n = keys.rows();
    let c = spec.scale();
    // enumerate multi-indices with |alpha| <= order
    let mut alphas: Vec<Vec<usize>> = Vec::new();
    let mut cur = vec![0usize; d];
    enumerate_alphas(&mut alphas, &mut cur, 0, order);
    let fact: Vec<f64> = {
        let mut f = vec![1.0; order + 1];
        for i in 1..=order {
            f[i] = f[i - 1] * i as f64;
        }
        f
    };
    // feature matrix n x |alphas|
    let mut features = vec![0.0; n * alphas.len()];
    for (a_idx, alpha) in alphas.iter().enumerate() {
        let total: usize = alpha.iter().sum();
        let multinom = alpha.iter().fold(fact[total], |acc, &aj| acc / fact[aj]);
        let coeff = (multinom / fact[total] * c.powi(total as i32)).sqrt();
        for i in 0..n {
            let k = keys.row(i);
            let mono = alpha
                .iter()
                .enumerate()
                .fold(1.0, |acc, (j, &aj)| acc * k[j].powi(aj as i32));
            features[i * alphas.len() + a_idx] = coeff * mono;
        }
    }
    let phi = DenseMatrix::from_vec(n, alphas.len(), features)?;
    phi.matmul(&phi.transpose())
}

fn enumerate_alphas(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, budget: usize) {
    if pos == cur.len() {
        out.push(cur.clone());
        return;
    }
    for v in 0..=budget {
        cur[pos] = v;
        enumerate_alphas(out, cur, pos + 1, budget - v);
    }
    cur[pos] = 0;
}

/// The three difference norms between an exact and an approximate matrix.
pub fn measure_errors(exact: &DenseMatrix, approx: &DenseMatrix) -> Result<ErrorStats> {
    if exact.rows() != approx.rows() || exact.cols() != approx.cols() {
        return Err(Error::DimensionMismatch("measure_errors: shape mismatch".into()));
    }
    let diff = exact.sub(approx)?;
    Ok(ErrorStats {
        max_norm_err: diff.max_norm(),
        rowwise_err: diff.row_norm(),
        spectral_err: diff.spectral_norm().value,
        clipped_bound: None,
    })
}
