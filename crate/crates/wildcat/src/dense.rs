//! Minimal dense real linear algebra: row-major matrices, the three matrix
//! norms used throughout the crate, exponential-kernel evaluation, key
//! recentring, and a seeded Gaussian tensor generator.
//!
//! All arithmetic is f64. Constructors reject NaN/infinity so every
//! downstream routine may assume finite entries.

use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;

/// Immutable row-major matrix of finite f64 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ContractViolation(format!(
                "matrix must be nonempty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                pos / cols,
                pos % cols,
                data[pos]
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::ContractViolation("no rows given".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Fills each row with `f`; used internally where results are then
    /// re-validated or provably finite.
    pub(crate) fn from_row_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let mut data = vec![0.0; rows * cols];
        par::for_each_row(&mut data, cols, f);
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let (r, c) = (self.rows, self.cols);
        DenseMatrix::from_row_fn(c, r, |j, out| {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = self.data[i * c + j];
            }
        })
    }

    /// Row-by-row matrix product with fixed-order inner summation.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        Ok(DenseMatrix::from_row_fn(n, m, |i, out| {
            let lhs_row = &self.data[i * k..(i + 1) * k];
            for (p, &a) in lhs_row.iter().enumerate() {
                let rhs_row = &rhs.data[p * m..(p + 1) * m];
                for (slot, &b) in out.iter_mut().zip(rhs_row) {
                    *slot += a * b;
                }
            }
        }))
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch("sub: shape mismatch".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Copies the given rows into a new matrix.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<DenseMatrix> {
        if indices.is_empty() {
            return Err(Error::ContractViolation("gather_rows: empty index set".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows) {
            return Err(Error::ContractViolation(format!(
                "gather_rows: index {bad} out of range for {} rows",
                self.rows
            )));
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Ok(DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// Vertical concatenation.
    pub fn vstack(&self, below: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != below.cols {
            return Err(Error::DimensionMismatch("vstack: column mismatch".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        Ok(DenseMatrix {
            rows: self.rows + below.rows,
            cols: self.cols,
            data,
        })
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Largest Euclidean row norm (the 2→∞ norm).
    pub fn row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| dot(self.row(i), self.row(i)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Power-iteration estimate of the largest singular value with default
    /// settings: tol 1e-8, 10·max(rows, cols) iterations, start vector from
    /// seed 0.
    pub fn spectral_norm(&self) -> SpectralEstimate {
        self.spectral_norm_with(1e-8, 10 * self.rows.max(self.cols))
    }

    pub fn spectral_norm_with(&self, tol: f64, max_iters: usize) -> SpectralEstimate {
        let mut rng = Rng::new(0);
        let mut v: Vec<f64> = (0..self.cols).map(|_| rng.next_normal()).collect();
        let vn = dot(&v, &v).sqrt();
        if vn > 0.0 {
            v.iter_mut().for_each(|x| *x /= vn);
        }
        let mut estimate = 0.0;
        let mut w = vec![0.0; self.rows];
        for iter in 1..=max_iters {
            // w = M v
            for (i, slot) in w.iter_mut().enumerate() {
                *slot = dot(self.row(i), &v);
            }
            let sigma = dot(&w, &w).sqrt();
            if sigma == 0.0 {
                return SpectralEstimate {
                    value: 0.0,
                    converged: true,
                    iterations: iter,
                };
            }
            // v = Mᵀ w, renormalised
            for (j, slot) in v.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..self.rows {
                    acc += self.data[i * self.cols + j] * w[i];
                }
                *slot = acc;
            }
            let nrm = dot(&v, &v).sqrt();
            if nrm > 0.0 {
                v.iter_mut().for_each(|x| *x /= nrm);
            }
            let prev = estimate;
            estimate = sigma;
            if (estimate - prev).abs() <= tol * estimate.max(f64::MIN_POSITIVE) {
                return SpectralEstimate {
                    value: estimate,
                    converged: true,
                    iterations: iter,
                };
            }
        }
        SpectralEstimate {
            value: estimate,
            converged: false,
            iterations: max_iters,
        }
    }
}

/// Result of the power iteration; `converged` is false when the iteration
/// budget ran out and `value` is the best estimate so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Exponential-kernel parameters: h(x, y) = exp(beta·⟨x, y⟩ / tau²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    beta: f64,
    tau: f64,
}

impl KernelSpec {
    /// Kernel with temperature 1.
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_tau(beta, 1.0)
    }

    pub fn with_tau(beta: f64, tau: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::ContractViolation(format!("beta must be > 0, got {beta}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::ContractViolation(format!("tau must be > 0, got {tau}")));
        }
        Ok(KernelSpec { beta, tau })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// beta / tau², the coefficient actually multiplying inner products.
    pub fn scale(&self) -> f64 {
        self.beta / (self.tau * self.tau)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.scale() * dot(x, y)).exp()
    }
}

/// Dense kernel block h(X, Y): result[i][l] = exp(beta·⟨x_i, y_l⟩/tau²).
pub fn kernel_block(spec: &KernelSpec, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "kernel_block: X has {} columns, Y has {}",
            x.cols(),
            y.cols()
        )));
    }
    let scale = spec.scale();
    let block = DenseMatrix::from_row_fn(x.rows(), y.rows(), |i, out| {
        let xi = x.row(i);
        for (l, slot) in out.iter_mut().enumerate() {
            *slot = (scale * dot(xi, y.row(l))).exp();
        }
    });
    if !block.data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(
            "kernel_block overflowed; rescale inputs or raise tau".into(),
        ));
    }
    Ok(block)
}

/// Subtracts the mean key. Returns the centred matrix and the mean row.
pub fn recenter_rows(keys: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let (n, d) = (keys.rows(), keys.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (slot, &v) in mean.iter_mut().zip(keys.row(i)) {
            *slot += v;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);
    let centred = DenseMatrix::from_row_fn(n, d, |i, out| {
        for ((slot, &v), &m) in out.iter_mut().zip(keys.row(i)).zip(&mean) {
            *slot = v - m;
        }
    });
    (centred, mean)
}

/// Seeded i.i.d. standard-normal matrix. When `target_row_norm` is given the
/// whole matrix is rescaled by one factor so that the maximum row norm equals
/// the target.
pub fn gen_gaussian(
    rows: usize,
    cols: usize,
    target_row_norm: Option<f64>,
    seed: u64,
) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::ContractViolation(
            "gen_gaussian: rows and cols must be >= 1".into(),
        ));
    }
    let mut rng = Rng::new(seed);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.next_normal()).collect();
    let mut m = DenseMatrix { rows, cols, data };
    if let Some(target) = target_row_norm {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::ContractViolation(format!(
                "target_row_norm must be > 0, got {target}"
            )));
        }
        let current = m.row_norm();
        if current > 0.0 {
            let f = target / current;
            m.data.iter_mut().for_each(|x| *x *= f);
        }
    }
    Ok(m)
}
