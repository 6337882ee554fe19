//! Softmax attention: the exact dense computation, the weighted-coreset
//! forward pass over a compressed cache, the end-to-end pipeline, and the
//! clipped-output error bound used as a desk-scale diagnostic.

use crate::compresskv::{compress_kv, CompressedCache};
use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::par;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Attention output with clipping diagnostics.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub output: DenseMatrix,
    /// Share of output entries changed by clipping to the value range.
    pub clipped_fraction: f64,
    /// Query rows whose weighted denominator was nonpositive.
    pub zero_denominator_rows: usize,
}

/// Exact softmax attention O = D⁻¹AV with per-row max subtraction for
/// overflow safety (the shift cancels in the ratio).
pub fn exact_attention(
    queries: &DenseMatrix,
    keys: &DenseMatrix,
    values: &DenseMatrix,
    beta: f64,
) -> Result<AttentionOutput> {
    if queries.cols() != keys.cols() {
        return Err(Error::DimensionMismatch(format!(
            "queries have {} columns, keys have {}",
            queries.cols(),
            keys.cols()
        )));
    }
    if keys.rows() != values.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} keys vs {} value rows",
            keys.rows(),
            values.rows()
        )));
    }
    if !beta.is_finite() {
        return Err(Error::ContractViolation(format!("beta must be finite, got {beta}")));
    }
    let n = keys.rows();
    let d_v = values.cols();
    let output = DenseMatrix::from_row_fn(queries.rows(), d_v, |i, out| {
        let q = queries.row(i);
        let mut logits: Vec<f64> = Vec::with_capacity(n);
        let mut max_logit = f64::NEG_INFINITY;
        for l in 0..n {
            let t = beta * dot(q, keys.row(l));
            max_logit = max_logit.max(t);
            logits.push(t);
        }
        let mut denom = 0.0;
        for (l, t) in logits.iter().enumerate() {
            let e = (t - max_logit).exp();
            denom += e;
            for (slot, &v) in out.iter_mut().zip(values.row(l)) {
                *slot += e * v;
            }
        }
        for slot in out.iter_mut() {
            *slot /= denom;
        }
    });
    Ok(AttentionOutput {
        output,
        clipped_fraction: 0.0,
        zero_denominator_rows: 0,
    })
}

/// Weighted coreset attention over a compressed cache:
/// Ô = clip(diag(Âw)⁻¹ Â V_S, v_min, v_max) with Â = exp(β·Q·K_Sᵀ).
/// Rows whose denominator Âw is nonpositive yield the zero row before the
/// clip. Runs in O(m·r·(d + d_v)).
pub fn wtd_attention(queries: &DenseMatrix, cache: &CompressedCache) -> Result<AttentionOutput> {
    if queries.cols() != cache.coreset_keys().cols() {
        return Err(Error::DimensionMismatch(format!(
            "queries have {} columns, cache keys have {}",
            queries.cols(),
            cache.coreset_keys().cols()
        )));
    }
    let beta = cache.beta();
    let coreset = cache.coreset_keys();
    let values = cache.compressed_values();
    let weights = cache.norm_weights();
    let (v_min, v_max) = (cache.value_min(), cache.value_max());
    let r = coreset.rows();
    let d_v = values.cols();
    let clipped = AtomicUsize::new(0);
    let zero_rows = AtomicUsize::new(0);
    let output = DenseMatrix::from_row_fn(queries.rows(), d_v, |i, out| {
        let q = queries.row(i);
        let mut logits: Vec<f64> = Vec::with_capacity(r);
        let mut max_logit = f64::NEG_INFINITY;
        for l in 0..r {
            let t = beta * dot(q, coreset.row(l));
            max_logit = max_logit.max(t);
            logits.push(t);
        }
        let mut denom = 0.0;
        let mut row = vec![0.0; d_v];
        for (l, t) in logits.iter().enumerate() {
            let e = (t - max_logit).exp();
            denom += e * weights[l];
            for (slot, &v) in row.iter_mut().zip(values.row(l)) {
                *slot += e * v;
            }
        }
        if denom > 0.0 {
            for slot in row.iter_mut() {
                *slot /= denom;
            }
        } else {
            zero_rows.fetch_add(1, Ordering::Relaxed);
            row.iter_mut().for_each(|slot| *slot = 0.0);
        }
        let mut clipped_here = 0usize;
        for ((slot, &raw), (&lo, &hi)) in
            out.iter_mut().zip(&row).zip(v_min.iter().zip(v_max))
        {
            let c = raw.clamp(lo, hi);
            if c != raw {
                clipped_here += 1;
            }
            *slot = c;
        }
        if clipped_here > 0 {
            clipped.fetch_add(clipped_here, Ordering::Relaxed);
        }
    });
    let total_entries = (queries.rows() * d_v) as f64;
    Ok(AttentionOutput {
        output,
        clipped_fraction: clipped.into_inner() as f64 / total_entries,
        zero_denominator_rows: zero_rows.into_inner(),
    })
}

/// Full pipeline: compute the value range and query radius, compress the
/// cache, and run the weighted forward pass. Deterministic given the seed.
pub fn wildcat(
    queries: &DenseMatrix,
    keys: &DenseMatrix,
    values: &DenseMatrix,
    beta: f64,
    rank: usize,
    bins: usize,
    seed: u64,
) -> Result<AttentionOutput> {
    if queries.cols() != keys.cols() {
        return Err(Error::DimensionMismatch(format!(
            "queries have {} columns, keys have {}",
            queries.cols(),
            keys.cols()
        )));
    }
    let r_q = queries.row_norm();
    let cache = compress_kv(keys, values, r_q, beta, rank, bins, seed)?;
    wtd_attention(queries, &cache)
}

/// Entrywise error bound for the clipped plug-in output:
/// ‖V‖_max · min( (3/√n)·‖A − Â‖_{2→∞} / min_{ij} A_ij , 2 ).
/// Requires the dense attention matrix, so it is a desk-scale diagnostic.
pub fn clip_bound(a: &DenseMatrix, a_hat: &DenseMatrix, values: &DenseMatrix) -> Result<f64> {
    if a.rows() != a_hat.rows() || a.cols() != a_hat.cols() {
        return Err(Error::DimensionMismatch("clip_bound: A and Â differ in shape".into()));
    }
    if a.cols() != values.rows() {
        return Err(Error::DimensionMismatch(format!(
            "clip_bound: A has {} columns but V has {} rows",
            a.cols(),
            values.rows()
        )));
    }
    let a_min = a.data().iter().cloned().fold(f64::INFINITY, f64::min);
    if a_min <= 0.0 {
        return Err(Error::Domain(format!(
            "clip_bound requires positive attention entries, min is {a_min}"
        )));
    }
    let n = a.cols() as f64;
    let rowwise = a.sub(a_hat)?.row_norm();
    Ok(values.max_norm() * ((3.0 / n.sqrt()) * rowwise / a_min).min(2.0))
}
