//! Scalar special functions: guaranteed-accuracy Lambert-W on [0, ∞), the
//! rescaling constant rho0, binary entropy, and the log of the
//! entropy-based binomial-coefficient bound.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Result of a Lambert-W evaluation. `residual` is |w·e^w − z|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertResult {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Number of fixed-point iterations. The iteration error bound
/// max(0.32^(2^n), 0.633^(2^n)/3) is below 1e-13 already at n = 6, so a
/// fixed count needs no adaptive stopping.
const LAMBERT_ITERS: usize = 6;

/// Principal branch W0 for z ≥ 0, solving w·e^w = z.
///
/// Uses the guaranteed-convergence iteration
/// w ← w/(1+w)·(1 + log z − log w), seeded with log z − log log z for z > e
/// and z/e for z < e. The seed is singular exactly at z = e, where the
/// result is 1 by definition.
pub fn lambert_w0(z: f64) -> Result<LambertResult> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::Domain(format!(
            "lambert_w0 requires finite z >= 0, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(LambertResult {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    if z == std::f64::consts::E {
        return Ok(LambertResult {
            value: 1.0,
            iterations: 0,
            residual: (std::f64::consts::E - z).abs(),
        });
    }
    if z < 1e-300 {
        // Two-term series W(z) = z - z² + O(z³); avoids log of a subnormal.
        let w = z * (1.0 - z);
        return Ok(LambertResult {
            value: w,
            iterations: 0,
            residual: (w * w.exp() - z).abs(),
        });
    }
    let ln_z = z.ln();
    let mut w = if z > std::f64::consts::E {
        ln_z - ln_z.ln()
    } else {
        z / std::f64::consts::E
    };
    for _ in 0..LAMBERT_ITERS {
        w = w / (1.0 + w) * (1.0 + ln_z - w.ln());
    }
    Ok(LambertResult {
        value: w,
        iterations: LAMBERT_ITERS,
        residual: (w * w.exp() - z).abs(),
    })
}

/// The rescaling constant rho0 = sqrt(1 + e^(W0(2/e²)+2)) ≈ 3.19.
pub fn rho0() -> f64 {
    static RHO0: OnceLock<f64> = OnceLock::new();
    *RHO0.get_or_init(|| {
        let z = 2.0 * (-2.0f64).exp();
        let w = lambert_w0(z).expect("rho0 argument is positive").value;
        (1.0 + (w + 2.0).exp()).sqrt()
    })
}

/// Natural-log binary entropy, with Ent(0) = Ent(1) = 0 by continuity.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "binary_entropy requires p in [0, 1], got {p}"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.ln() - (1.0 - p) * (1.0 - p).ln())
}

/// Natural log of the entropy bound on binom(s + d, d):
/// (1/sqrt(2π))·sqrt(1/s + 1/d)·exp((s+d)·Ent(s/(s+d))).
/// Degenerate s = 0 or d = 0 gives binom = 1, so the log is 0.
pub fn log_binom_bound(s: usize, d: usize) -> f64 {
    if s == 0 || d == 0 {
        return 0.0;
    }
    let (s, d) = (s as f64, d as f64);
    let ent = binary_entropy(s / (s + d)).expect("ratio is in (0, 1)");
    -0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * (1.0 / s + 1.0 / d).ln() + (s + d) * ent
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on w·e^w = z: an oracle independent of the iteration.
    fn lambert_bisect(z: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 800.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_anchor_points() {
        let r = lambert_w0(0.0).unwrap();
        assert_eq!(r.value, 0.0);
        let r = lambert_w0(std::f64::consts::E).unwrap();
        assert_eq!(r.value, 1.0);
        let r = lambert_w0(10.0).unwrap();
        assert!(r.residual <= 1e-11);
        let oracle = lambert_bisect(10.0);
        assert!((r.value - oracle).abs() <= 1e-11 * oracle);
    }

    #[test]
    fn lambert_rejects_negative() {
        assert!(matches!(lambert_w0(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn lambert_residual_grid() {
        // 1000 log-spaced points in [1e-8, 1e8]
        let lo: f64 = 1e-8;
        let hi: f64 = 1e8;
        let mut prev = -1.0;
        for i in 0..1000 {
            let t = i as f64 / 999.0;
            let z = lo * (hi / lo).powf(t);
            let r = lambert_w0(z).unwrap();
            assert!(
                r.residual <= 1e-12 * z.max(1.0),
                "z={z} residual={}",
                r.residual
            );
            assert!(r.value > prev, "monotonicity broke at z={z}");
            prev = r.value;
        }
    }

    #[test]
    fn lambert_exponential_identity() {
        // exp(W(z)) = z / W(z) for z > 0
        for i in 0..200 {
            let z = 1e-6 * 10f64.powf(i as f64 * 12.0 / 199.0);
            let w = lambert_w0(z).unwrap().value;
            let lhs = w.exp();
            let rhs = z / w;
            assert!((lhs - rhs).abs() <= 1e-11 * rhs.abs(), "z={z}");
        }
    }

    #[test]
    fn lambert_tiny_series_branch() {
        let z = 1e-305;
        let r = lambert_w0(z).unwrap();
        assert!(r.residual <= 1e-12 * 1.0);
        assert!(r.value > 0.0 && r.value < 1e-300);
    }

    #[test]
    fn rho0_matches_reported_constant() {
        assert!((rho0() - 3.19).abs() < 0.005, "rho0 = {}", rho0());
        // defining identity: rho0² − 1 = e^(W0(2/e²)+2)
        let z = 2.0 * (-2.0f64).exp();
        let w = lambert_w0(z).unwrap();
        assert!(w.residual <= 1e-12);
        let lhs = rho0() * rho0() - 1.0;
        let rhs = (w.value + 2.0).exp();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        // and the oracle agrees on W0(2/e²)
        let oracle = lambert_bisect(z);
        assert!((w.value - oracle).abs() <= 1e-11);
    }

    #[test]
    fn entropy_values() {
        assert!((binary_entropy(0.5).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        let p: f64 = 0.25;
        let direct = -p * p.ln() - 0.75 * 0.75f64.ln();
        assert_eq!(binary_entropy(p).unwrap(), direct);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn entropy_symmetry_exact() {
        for k in 0..=64u32 {
            let p = k as f64 / 64.0;
            assert_eq!(
                binary_entropy(p).unwrap(),
                binary_entropy(1.0 - p).unwrap(),
                "p = {p}"
            );
        }
    }

    #[test]
    fn binom_bound_dominates_pascal_triangle() {
        // Exact binomials via Pascal's triangle, up to s + d = 40.
        let max = 41;
        let mut pascal = vec![vec![0f64; max + 1]; max + 1];
        for n in 0..=max {
            pascal[n][0] = 1.0;
            for k in 1..=n {
                pascal[n][k] = pascal[n - 1][k - 1] + if k <= n - 1 { pascal[n - 1][k] } else { 0.0 };
            }
        }
        for s in 1..=20usize {
            for d in 1..=20usize {
                let exact = pascal[s + d][d];
                let bound = log_binom_bound(s, d).exp();
                assert!(
                    bound >= exact,
                    "bound {bound} < binom({}, {d}) = {exact}",
                    s + d
                );
            }
        }
        assert!(log_binom_bound(2, 2).exp() >= 6.0);
        assert!(log_binom_bound(1, 1).exp() >= 2.0);
        assert_eq!(log_binom_bound(0, 5), 0.0);
        assert_eq!(log_binom_bound(5, 0), 0.0);
    }
}
