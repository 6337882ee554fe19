//! Randomly pivoted Nystrom coreset selection.
//!
//! Pivots are sampled sequentially from the diagonal of the residual kernel;
//! the inverse of the coreset kernel matrix is maintained through rank-one
//! updates, so only O(n·r) kernel entries are ever evaluated and the whole
//! run costs O(n·r² + n·r·d).

use crate::dense::{dot, kernel_block, DenseMatrix, KernelSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;
use std::sync::OnceLock;

/// Residual entries at or below `RESIDUAL_FLOOR`·(initial max diagonal) are
/// treated as zero: they are excluded from pivot sampling, and when the
/// whole diagonal falls below n times that level the remaining pivots are
/// drawn uniformly without replacement with zero weight rows (the kernel
/// matrix is already fully approximated at working precision).
const RESIDUAL_FLOOR: f64 = 1e-14;

/// Output of a coreset run.
#[derive(Debug)]
pub struct RpnysResult {
    coreset_indices: Vec<usize>,
    inverse_core: DenseMatrix,
    kernel_rows: DenseMatrix,
    final_residual_diag: Vec<f64>,
    residual_trace: Vec<f64>,
    kernel_entries_evaluated: usize,
    fallback_rounds: usize,
    weights: OnceLock<DenseMatrix>,
}

impl RpnysResult {
    /// Selected pivot indices, in selection order.
    pub fn coreset_indices(&self) -> &[usize] {
        &self.coreset_indices
    }

    /// M = h(K_S, K_S)⁻¹, maintained by rank-one updates. Rows and columns
    /// belonging to fallback pivots are zero.
    pub fn inverse_core(&self) -> &DenseMatrix {
        &self.inverse_core
    }

    /// R with row i = h(k_{s_i}, K). Fallback rows are zero.
    pub fn kernel_rows(&self) -> &DenseMatrix {
        &self.kernel_rows
    }

    /// Final residual kernel diagonal, clamped to be nonnegative.
    pub fn final_residual_diag(&self) -> &[f64] {
        &self.final_residual_diag
    }

    /// Sum of the residual diagonal before round 0 and after each round.
    pub fn residual_trace(&self) -> &[f64] {
        &self.residual_trace
    }

    /// Number of kernel entries evaluated during the run.
    pub fn kernel_entries_evaluated(&self) -> usize {
        self.kernel_entries_evaluated
    }

    /// Rounds that fell back to uniform sampling after residual exhaustion.
    pub fn fallback_rounds(&self) -> usize {
        self.fallback_rounds
    }

    /// Nystrom weights W = M·R, materialised on first access.
    pub fn weights(&self) -> &DenseMatrix {
        self.weights.get_or_init(|| {
            self.inverse_core
                .matmul(&self.kernel_rows)
                .expect("inverse core and kernel rows conform")
        })
    }
}

/// Runs randomly pivoted Nystrom on the rows of `keys` with the given kernel
/// and rank. The seeded generator makes the pivot sequence reproducible.
pub fn rpnys(keys: &DenseMatrix, spec: &KernelSpec, rank: usize, seed: u64) -> Result<RpnysResult> {
    let n = keys.rows();
    if rank == 0 {
        return Err(Error::ContractViolation("rpnys: rank must be >= 1".into()));
    }
    if rank > n {
        return Err(Error::ContractViolation(format!(
            "rpnys: rank {rank} exceeds number of keys {n}"
        )));
    }
    let scale = spec.scale();
    let mut kernel_entries = 0usize;

    // Initial residual diagonal p_l = h(k_l, k_l).
    let mut p: Vec<f64> = (0..n)
        .map(|l| {
            let k = keys.row(l);
            (scale * dot(k, k)).exp()
        })
        .collect();
    kernel_entries += n;
    if let Some(l) = p.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!(
            "rpnys: kernel diagonal overflowed at key {l}; rescale inputs or raise tau"
        )));
    }
    let init_max = p.iter().cloned().fold(0.0, f64::max);
    let entry_floor = RESIDUAL_FLOOR * init_max;
    let exhaust_threshold = n as f64 * RESIDUAL_FLOOR * init_max;

    let mut rng = Rng::new(seed);
    let mut m_data = vec![0.0; rank * rank];
    let mut r_data = vec![0.0; rank * n];
    let mut g = vec![0.0; rank];
    let mut selected = vec![false; n];
    let mut coreset: Vec<usize> = Vec::with_capacity(rank);
    let mut residual_trace = Vec::with_capacity(rank + 1);
    residual_trace.push(p.iter().sum());
    let mut exhausted = false;
    let mut fallback_rounds = 0usize;

    for i in 0..rank {
        let total: f64 = p.iter().sum();
        if !exhausted && total <= exhaust_threshold {
            exhausted = true;
        }
        let pivot = if exhausted {
            None
        } else {
            sample_pivot(&p, entry_floor, &mut rng)
        };
        let s = match pivot {
            Some(s) => s,
            None => {
                // Uniform without replacement among unselected indices; the
                // weight rows of these pivots stay zero.
                exhausted = true;
                fallback_rounds += 1;
                let unselected: Vec<usize> =
                    (0..n).filter(|&l| !selected[l]).collect();
                let pick = (rng.next_f64() * unselected.len() as f64) as usize;
                let s = unselected[pick.min(unselected.len() - 1)];
                selected[s] = true;
                coreset.push(s);
                p[s] = 0.0;
                residual_trace.push(p.iter().sum());
                continue;
            }
        };
        debug_assert!(p[s] > entry_floor, "sampler returned an exhausted pivot");
        let p_s = p[s];
        selected[s] = true;
        coreset.push(s);

        // g = (h(K_S,K_S)⁻¹ h(K_S,k_s), -1) / sqrt(p_s); at i = 0 the
        // leading block is empty and g = (-1)/sqrt(p_s).
        for j in 0..i {
            let mj = &m_data[j * rank..j * rank + i];
            let mut acc = 0.0;
            for (j2, &mv) in mj.iter().enumerate() {
                acc += mv * r_data[j2 * n + s];
            }
            g[j] = acc;
        }
        g[i] = -1.0;
        let inv_sqrt = 1.0 / p_s.sqrt();
        for gj in g.iter_mut().take(i + 1) {
            *gj *= inv_sqrt;
        }

        // M ← M + g gᵀ on the active (i+1)×(i+1) block.
        for a in 0..=i {
            let ga = g[a];
            for b in 0..=i {
                m_data[a * rank + b] += ga * g[b];
            }
        }

        // New kernel row h(k_s, K). Entries are bounded by the diagonal via
        // Cauchy-Schwarz, so finiteness follows from the diagonal check.
        let key_s = keys.row(s);
        let row = &mut r_data[i * n..(i + 1) * n];
        fill_kernel_row(row, keys, key_s, scale);
        kernel_entries += n;

        // Residual diagonal update: p_l ← max(p_l − (gᵀ h(K_S', k_l))², 0).
        update_residual(&mut p, &r_data, &g, i, n);
        p[s] = 0.0;
        residual_trace.push(p.iter().sum());
    }

    let final_residual_diag = p;
    Ok(RpnysResult {
        coreset_indices: coreset,
        inverse_core: DenseMatrix::from_vec(rank, rank, m_data)?,
        kernel_rows: DenseMatrix::from_vec(rank, n, r_data)?,
        final_residual_diag,
        residual_trace,
        kernel_entries_evaluated: kernel_entries,
        fallback_rounds,
        weights: OnceLock::new(),
    })
}

/// Inverse-CDF draw over residual entries above the floor. Returns None when
/// no entry qualifies.
fn sample_pivot(p: &[f64], entry_floor: f64, rng: &mut Rng) -> Option<usize> {
    let mut eff_total = 0.0;
    for &v in p {
        if v > entry_floor {
            eff_total += v;
        }
    }
    if eff_total <= 0.0 {
        return None;
    }
    let target = rng.next_f64() * eff_total;
    let mut acc = 0.0;
    let mut last = None;
    for (l, &v) in p.iter().enumerate() {
        if v > entry_floor {
            acc += v;
            last = Some(l);
            if acc > target {
                return Some(l);
            }
        }
    }
    last // rounding pushed the target past the final prefix sum
}

fn fill_kernel_row(row: &mut [f64], keys: &DenseMatrix, key_s: &[f64], scale: f64) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        row.par_iter_mut().enumerate().for_each(|(l, slot)| {
            *slot = (scale * dot(key_s, keys.row(l))).exp();
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (l, slot) in row.iter_mut().enumerate() {
            *slot = (scale * dot(key_s, keys.row(l))).exp();
        }
    }
}

fn update_residual(p: &mut [f64], r_data: &[f64], g: &[f64], i: usize, n: usize) {
    let active = &g[..=i];
    let delta_at = |l: usize| {
        let mut acc = 0.0;
        for (j, &gj) in active.iter().enumerate() {
            acc += gj * r_data[j * n + l];
        }
        acc
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        p.par_iter_mut().enumerate().for_each(|(l, pl)| {
            let delta = delta_at(l);
            *pl = (*pl - delta * delta).max(0.0);
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (l, pl) in p.iter_mut().enumerate() {
            let delta = delta_at(l);
            *pl = (*pl - delta * delta).max(0.0);
        }
    }
}

/// Returns the factor pair (h(K, K_S), W) whose product is the rank-r
/// Nystrom reconstruction of h(K, K), without forming the n×n product.
pub fn nystrom_apply(
    res: &RpnysResult,
    spec: &KernelSpec,
    keys: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if res.kernel_rows.cols() != keys.rows() {
        return Err(Error::DimensionMismatch(format!(
            "nystrom_apply: result built for {} keys, got {}",
            res.kernel_rows.cols(),
            keys.rows()
        )));
    }
    let coreset_keys = keys.gather_rows(&res.coreset_indices)?;
    let cross = kernel_block(spec, keys, &coreset_keys)?;
    Ok((cross, res.weights().clone()))
}
