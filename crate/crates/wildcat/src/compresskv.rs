//! KV-cache compression: recentre keys, bin them, pick a per-bin
//! temperature, run the pivoted Nystrom selection per bin, and emit the
//! compressed cache (coreset keys, reweighted values, normalisation
//! weights). The cache stores O(r·(d + d_v)) scalars and nothing sized n.

use crate::dense::{recenter_rows, DenseMatrix, KernelSpec};
use crate::error::{Error, Result};
use crate::par;
use crate::rng;
use crate::rpnys::rpnys;
use crate::temperature::{get_temperature, TemperatureInputs};

/// Compressed replacement for a full (K, V) pair.
#[derive(Debug, Clone)]
pub struct CompressedCache {
    coreset_keys: DenseMatrix,
    compressed_values: DenseMatrix,
    norm_weights: Vec<f64>,
    value_min: Vec<f64>,
    value_max: Vec<f64>,
    bins: usize,
    bin_boundaries: Vec<usize>,
    per_bin_tau: Vec<f64>,
    beta: f64,
    coreset_indices: Vec<usize>,
}

impl CompressedCache {
    /// Rebuilds a cache from its stored fields (used by file loaders and by
    /// harness-level pass-through composition), revalidating invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        coreset_keys: DenseMatrix,
        compressed_values: DenseMatrix,
        norm_weights: Vec<f64>,
        value_min: Vec<f64>,
        value_max: Vec<f64>,
        bins: usize,
        bin_boundaries: Vec<usize>,
        per_bin_tau: Vec<f64>,
        beta: f64,
        coreset_indices: Vec<usize>,
    ) -> Result<Self> {
        let r = coreset_keys.rows();
        if compressed_values.rows() != r || norm_weights.len() != r || coreset_indices.len() != r {
            return Err(Error::DimensionMismatch(
                "cache fields disagree on the coreset size".into(),
            ));
        }
        let d_v = compressed_values.cols();
        if value_min.len() != d_v || value_max.len() != d_v {
            return Err(Error::DimensionMismatch(
                "value range length must match the value dimension".into(),
            ));
        }
        if value_min.iter().zip(&value_max).any(|(lo, hi)| lo > hi) {
            return Err(Error::ContractViolation("value_min exceeds value_max".into()));
        }
        if bins == 0 || per_bin_tau.len() != bins || bin_boundaries.len() != bins + 1 {
            return Err(Error::ContractViolation("inconsistent bin metadata".into()));
        }
        if bin_boundaries.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ContractViolation("bin boundaries must be nondecreasing".into()));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::ContractViolation(format!("beta must be > 0, got {beta}")));
        }
        if per_bin_tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::ContractViolation("per-bin tau must be > 0".into()));
        }
        if norm_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("norm weights must be finite".into()));
        }
        Ok(CompressedCache {
            coreset_keys,
            compressed_values,
            norm_weights,
            value_min,
            value_max,
            bins,
            bin_boundaries,
            per_bin_tau,
            beta,
            coreset_indices,
        })
    }

    pub fn coreset_keys(&self) -> &DenseMatrix {
        &self.coreset_keys
    }

    pub fn compressed_values(&self) -> &DenseMatrix {
        &self.compressed_values
    }

    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    pub fn value_min(&self) -> &[f64] {
        &self.value_min
    }

    pub fn value_max(&self) -> &[f64] {
        &self.value_max
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_boundaries(&self) -> &[usize] {
        &self.bin_boundaries
    }

    pub fn per_bin_tau(&self) -> &[f64] {
        &self.per_bin_tau
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Original row indices behind each coreset row.
    pub fn coreset_indices(&self) -> &[usize] {
        &self.coreset_indices
    }

    /// Achieved coreset size (may differ from the requested rank by up to
    /// B − 1 because of per-bin rounding).
    pub fn total_rank(&self) -> usize {
        self.coreset_keys.rows()
    }
}

/// Seed of bin `bin` derived from the run seed; bins are independent,
/// reproducible streams.
pub fn derive_bin_seed(seed: u64, bin: usize) -> u64 {
    rng::derive_stream(seed, bin as u64)
}

/// Bin b covers rows [b·⌊n/B⌋, (b+1)·⌊n/B⌋), with the remainder appended to
/// the last bin.
pub fn bin_boundaries(n: usize, bins: usize) -> Vec<usize> {
    let width = n / bins;
    let mut bounds: Vec<usize> = (0..bins).map(|b| b * width).collect();
    bounds.push(n);
    bounds
}

struct BinOutput {
    tau: f64,
    centred_coreset: DenseMatrix,
    compressed_values: DenseMatrix,
    norm_weights: Vec<f64>,
    global_indices: Vec<usize>,
    weights: DenseMatrix,
}

fn compress_bins(
    keys: &DenseMatrix,
    values: &DenseMatrix,
    r_q: f64,
    beta: f64,
    rank: usize,
    bins: usize,
    seed: u64,
) -> Result<(Vec<BinOutput>, Vec<f64>, Vec<usize>)> {
    let n = keys.rows();
    if values.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "keys have {n} rows but values have {}",
            values.rows()
        )));
    }
    if rank == 0 || rank > n {
        return Err(Error::ContractViolation(format!(
            "rank must satisfy 1 <= rank <= n, got rank={rank}, n={n}"
        )));
    }
    if bins == 0 || bins > rank {
        return Err(Error::ContractViolation(format!(
            "bins must satisfy 1 <= bins <= rank, got bins={bins}, rank={rank}"
        )));
    }
    if !(r_q.is_finite() && r_q >= 0.0) {
        return Err(Error::ContractViolation(format!("r_q must be >= 0, got {r_q}")));
    }
    let (centred, mean) = recenter_rows(keys);
    let bounds = bin_boundaries(n, bins);
    let rank_per_bin = rank.div_ceil(bins);

    let results: Vec<Result<BinOutput>> = par::map_indexed(bins, |b| {
        let (start, end) = (bounds[b], bounds[b + 1]);
        let rows: Vec<usize> = (start..end).collect();
        let bin_keys = centred.gather_rows(&rows)?;
        let bin_values = values.gather_rows(&rows)?;
        let n_b = end - start;
        let r_b = rank_per_bin.min(n_b);
        let r_k = bin_keys.row_norm();
        let tau = get_temperature(&TemperatureInputs::new(beta, r_q, r_k, n_b)?);
        let spec = KernelSpec::with_tau(beta, tau)?;
        let res = rpnys(&bin_keys, &spec, r_b, derive_bin_seed(seed, b))?;
        let weights = res.weights().clone();
        let compressed_values = weights.matmul(&bin_values)?;
        let norm_weights: Vec<f64> = (0..weights.rows())
            .map(|i| weights.row(i).iter().sum())
            .collect();
        let centred_coreset = bin_keys.gather_rows(res.coreset_indices())?;
        let global_indices: Vec<usize> =
            res.coreset_indices().iter().map(|&i| start + i).collect();
        Ok(BinOutput {
            tau,
            centred_coreset,
            compressed_values,
            norm_weights,
            global_indices,
            weights,
        })
    });
    let mut outputs = Vec::with_capacity(bins);
    for r in results {
        outputs.push(r?);
    }
    Ok((outputs, mean, bounds))
}

fn assemble_cache(
    outputs: &[BinOutput],
    mean: &[f64],
    bounds: Vec<usize>,
    values: &DenseMatrix,
    beta: f64,
    bins: usize,
) -> Result<CompressedCache> {
    let d = outputs[0].centred_coreset.cols();
    let d_v = values.cols();
    let total: usize = outputs.iter().map(|o| o.centred_coreset.rows()).sum();
    let mut key_data = Vec::with_capacity(total * d);
    let mut value_data = Vec::with_capacity(total * d_v);
    let mut norm_weights = Vec::with_capacity(total);
    let mut indices = Vec::with_capacity(total);
    let mut per_bin_tau = Vec::with_capacity(bins);
    for out in outputs {
        for i in 0..out.centred_coreset.rows() {
            for (j, &v) in out.centred_coreset.row(i).iter().enumerate() {
                key_data.push(v + mean[j]);
            }
            value_data.extend_from_slice(out.compressed_values.row(i));
        }
        norm_weights.extend_from_slice(&out.norm_weights);
        indices.extend_from_slice(&out.global_indices);
        per_bin_tau.push(out.tau);
    }
    let mut value_min = vec![f64::INFINITY; d_v];
    let mut value_max = vec![f64::NEG_INFINITY; d_v];
    for i in 0..values.rows() {
        for (j, &v) in values.row(i).iter().enumerate() {
            value_min[j] = value_min[j].min(v);
            value_max[j] = value_max[j].max(v);
        }
    }
    CompressedCache::from_parts(
        DenseMatrix::from_vec(total, d, key_data)?,
        DenseMatrix::from_vec(total, d_v, value_data)?,
        norm_weights,
        value_min,
        value_max,
        bins,
        bounds,
        per_bin_tau,
        beta,
        indices,
    )
}

/// Compresses a (K, V) pair to a weighted coreset of about `rank` rows.
///
/// `r_q` is the maximum query row norm, supplied by the caller because the
/// queries may not exist yet at compression time.
pub fn compress_kv(
    keys: &DenseMatrix,
    values: &DenseMatrix,
    r_q: f64,
    beta: f64,
    rank: usize,
    bins: usize,
    seed: u64,
) -> Result<CompressedCache> {
    let (outputs, mean, bounds) = compress_bins(keys, values, r_q, beta, rank, bins, seed)?;
    assemble_cache(&outputs, &mean, bounds, values, beta, bins)
}

/// Desk-scale diagnostic twin of [`compress_kv`] that also returns the dense
/// weight matrix W (total rank × n) used to compress the values. W is block
/// structured: rows of bin b act only on the columns of bin b.
#[allow(clippy::too_many_arguments)]
pub fn compress_kv_with_weights(
    keys: &DenseMatrix,
    values: &DenseMatrix,
    r_q: f64,
    beta: f64,
    rank: usize,
    bins: usize,
    seed: u64,
) -> Result<(CompressedCache, DenseMatrix)> {
    let n = keys.rows();
    let (outputs, mean, bounds) = compress_bins(keys, values, r_q, beta, rank, bins, seed)?;
    let total: usize = outputs.iter().map(|o| o.weights.rows()).sum();
    let mut w = vec![0.0; total * n];
    let mut row_offset = 0usize;
    for (b, out) in outputs.iter().enumerate() {
        let start = bounds[b];
        for i in 0..out.weights.rows() {
            let src = out.weights.row(i);
            let dst = &mut w[(row_offset + i) * n + start..(row_offset + i) * n + start + src.len()];
            dst.copy_from_slice(src);
        }
        row_offset += out.weights.rows();
    }
    let cache = assemble_cache(&outputs, &mean, bounds, values, beta, bins)?;
    let w = DenseMatrix::from_vec(total, n, w)?;
    Ok((cache, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::gen_gaussian;

    #[test]
    fn single_point_cache() {
        let keys = DenseMatrix::from_vec(1, 2, vec![3.0, -1.0]).unwrap();
        let values = DenseMatrix::from_vec(1, 2, vec![5.0, 7.0]).unwrap();
        let cache = compress_kv(&keys, &values, 1.0, 1.0, 1, 1, 0).unwrap();
        // k̄ = k, the centred key is zero, tau falls back to 1
        assert_eq!(cache.per_bin_tau(), &[1.0]);
        assert!((cache.coreset_keys().get(0, 0) - 3.0).abs() <= 1e-12);
        assert!((cache.coreset_keys().get(0, 1) + 1.0).abs() <= 1e-12);
        assert_eq!(cache.compressed_values().data(), values.data());
        assert!((cache.norm_weights()[0] - 1.0).abs() <= 1e-12);
        assert_eq!(cache.total_rank(), 1);
    }

    #[test]
    fn value_range_covers_full_values() {
        let keys = gen_gaussian(2, 2, None, 1).unwrap();
        let values = DenseMatrix::from_vec(2, 2, vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        let cache = compress_kv(&keys, &values, 1.0, 1.0, 1, 1, 0).unwrap();
        assert_eq!(cache.value_min(), &[1.0, 2.0]);
        assert_eq!(cache.value_max(), &[3.0, 5.0]);
    }

    #[test]
    fn contract_violations() {
        let keys = gen_gaussian(8, 2, None, 0).unwrap();
        let values = gen_gaussian(8, 3, None, 1).unwrap();
        assert!(compress_kv(&keys, &values, 1.0, 1.0, 9, 1, 0).is_err());
        assert!(compress_kv(&keys, &values, 1.0, 1.0, 4, 5, 0).is_err());
        assert!(compress_kv(&keys, &values, 1.0, 1.0, 0, 1, 0).is_err());
        let short = gen_gaussian(7, 3, None, 1).unwrap();
        assert!(compress_kv(&keys, &short, 1.0, 1.0, 4, 1, 0).is_err());
    }

    #[test]
    fn coreset_keys_round_trip_to_original_rows() {
        let keys = gen_gaussian(20, 3, Some(1.0), 3).unwrap();
        let values = gen_gaussian(20, 2, None, 4).unwrap();
        let cache = compress_kv(&keys, &values, 1.0, 0.7, 6, 2, 9).unwrap();
        for (row, &idx) in cache.coreset_indices().iter().enumerate() {
            for j in 0..3 {
                assert!(
                    (cache.coreset_keys().get(row, j) - keys.get(idx, j)).abs() <= 1e-12,
                    "coreset row {row} does not match original row {idx}"
                );
            }
        }
    }

    #[test]
    fn recentring_idempotence() {
        // adding a constant row to K must not change the selection or the
        // weights: the pipeline always recentres first
        let keys = gen_gaussian(24, 3, Some(1.0), 5).unwrap();
        let values = gen_gaussian(24, 2, None, 6).unwrap();
        let shift = [10.0, -4.0, 2.5];
        let shifted_rows: Vec<Vec<f64>> = (0..24)
            .map(|i| {
                keys.row(i)
                    .iter()
                    .zip(&shift)
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect();
        let shifted = DenseMatrix::from_rows(&shifted_rows).unwrap();
        for seed in [0u64, 1, 2] {
            let a = compress_kv(&keys, &values, 1.0, 0.8, 8, 2, seed).unwrap();
            let b = compress_kv(&shifted, &values, 1.0, 0.8, 8, 2, seed).unwrap();
            assert_eq!(a.coreset_indices(), b.coreset_indices());
            for (wa, wb) in a.norm_weights().iter().zip(b.norm_weights()) {
                assert!((wa - wb).abs() <= 1e-10);
            }
            for i in 0..a.compressed_values().rows() {
                for j in 0..a.compressed_values().cols() {
                    assert!(
                        (a.compressed_values().get(i, j) - b.compressed_values().get(i, j)).abs()
                            <= 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn full_rank_bins_have_unit_weight_rows() {
        // r_b = n_b with a well-conditioned bin kernel: W·1 = 1 exactly when
        // the Nystrom reconstruction is exact
        let keys = gen_gaussian(12, 3, Some(1.0), 8).unwrap();
        let values = gen_gaussian(12, 2, None, 9).unwrap();
        let cache = compress_kv(&keys, &values, 1.0, 1.0, 12, 2, 3).unwrap();
        let bounds = cache.bin_boundaries().to_vec();
        let mut row = 0usize;
        for b in 0..cache.bins() {
            let n_b = bounds[b + 1] - bounds[b];
            let sum: f64 = cache.norm_weights()[row..row + n_b].iter().sum();
            assert!(
                (sum - n_b as f64).abs() <= 1e-6 * n_b as f64,
                "bin {b} weight sum {sum}"
            );
            row += n_b;
        }
    }

    #[test]
    fn binning_matches_independent_rpnys_runs() {
        use crate::rpnys::rpnys;
        let keys = gen_gaussian(30, 4, Some(1.2), 12).unwrap();
        let values = gen_gaussian(30, 3, None, 13).unwrap();
        let (bins, rank, seed, beta, r_q) = (3usize, 9usize, 21u64, 0.9, 1.0);
        let cache = compress_kv(&keys, &values, r_q, beta, rank, bins, seed).unwrap();

        let (centred, _) = recenter_rows(&keys);
        let bounds = bin_boundaries(30, bins);
        let mut offset = 0usize;
        for b in 0..bins {
            let rows: Vec<usize> = (bounds[b]..bounds[b + 1]).collect();
            let bin_keys = centred.gather_rows(&rows).unwrap();
            let n_b = rows.len();
            let r_b = rank.div_ceil(bins).min(n_b);
            let tau = get_temperature(
                &TemperatureInputs::new(beta, r_q, bin_keys.row_norm(), n_b).unwrap(),
            );
            assert!((cache.per_bin_tau()[b] - tau).abs() <= 1e-15 * tau);
            let spec = KernelSpec::with_tau(beta, tau).unwrap();
            let res = rpnys(&bin_keys, &spec, r_b, derive_bin_seed(seed, b)).unwrap();
            let expect: Vec<usize> =
                res.coreset_indices().iter().map(|&i| bounds[b] + i).collect();
            assert_eq!(&cache.coreset_indices()[offset..offset + r_b], &expect[..]);
            offset += r_b;
        }
    }

    #[test]
    fn perturbing_any_value_row_moves_compressed_values() {
        let keys = gen_gaussian(10, 2, Some(1.0), 30).unwrap();
        let values = gen_gaussian(10, 2, None, 31).unwrap();
        let (cache, w) = compress_kv_with_weights(&keys, &values, 1.0, 1.0, 4, 1, 7).unwrap();
        for l in 0..10 {
            let col_nonzero = (0..w.rows()).any(|i| w.get(i, l) != 0.0);
            if !col_nonzero {
                continue;
            }
            let mut bumped = values.data().to_vec();
            bumped[l * 2] += 1.0;
            let bumped = DenseMatrix::from_vec(10, 2, bumped).unwrap();
            let cache2 = compress_kv(&keys, &bumped, 1.0, 1.0, 4, 1, 7).unwrap();
            let moved = cache
                .compressed_values()
                .sub(cache2.compressed_values())
                .unwrap()
                .max_norm();
            assert!(moved > 0.0, "value row {l} had no effect");
        }
    }

    #[test]
    fn cache_memory_is_rank_sized() {
        let n = 64usize;
        let (rank, bins) = (8usize, 2usize);
        let keys = gen_gaussian(n, 4, Some(1.0), 1).unwrap();
        let values = gen_gaussian(n, 3, None, 2).unwrap();
        let cache = compress_kv(&keys, &values, 1.0, 0.5, rank, bins, 0).unwrap();
        let r = cache.total_rank();
        assert!(r <= rank + bins - 1);
        assert_eq!(cache.coreset_keys().rows(), r);
        assert_eq!(cache.compressed_values().rows(), r);
        assert_eq!(cache.norm_weights().len(), r);
        assert_eq!(cache.coreset_indices().len(), r);
        assert_eq!(cache.value_min().len(), 3);
        assert_eq!(cache.value_max().len(), 3);
        assert_eq!(cache.per_bin_tau().len(), bins);
        assert_eq!(cache.bin_boundaries().len(), bins + 1);
    }

    #[test]
    fn weights_diagnostic_agrees_with_cache() {
        let keys = gen_gaussian(18, 3, Some(1.0), 40).unwrap();
        let values = gen_gaussian(18, 2, None, 41).unwrap();
        let (cache, w) = compress_kv_with_weights(&keys, &values, 1.0, 0.8, 6, 2, 11).unwrap();
        let direct = compress_kv(&keys, &values, 1.0, 0.8, 6, 2, 11).unwrap();
        assert_eq!(cache.coreset_indices(), direct.coreset_indices());
        assert_eq!(cache.compressed_values().data(), direct.compressed_values().data());
        // W·V reproduces the compressed values and W·1 the norm weights
        let wv = w.matmul(&values).unwrap();
        for i in 0..wv.rows() {
            for j in 0..wv.cols() {
                assert!((wv.get(i, j) - cache.compressed_values().get(i, j)).abs() <= 1e-12);
            }
            let row_sum: f64 = w.row(i).iter().sum();
            assert!((row_sum - cache.norm_weights()[i]).abs() <= 1e-12);
        }
    }
}
