//! Evaluates the closed-form guarantee quantities: the Taylor order needed
//! for a target nuclear-norm residual, the residual itself, and the
//! sufficient coreset rank of the end-to-end error bound. Everything is a
//! pure function computed in log space, since the rank bound's exponents
//! overflow f64 at realistic sequence lengths.

use crate::error::{Error, Result};
use crate::special::{binary_entropy, lambert_w0, rho0};
use crate::temperature::{get_temperature, TemperatureInputs};

/// Report of the sufficient-rank calculation.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub n: usize,
    pub d: usize,
    pub a: f64,
    pub bins: usize,
    /// Effective sequence length ⌊n/B⌋ at which the bound is evaluated.
    pub n_eff: usize,
    /// Entry growth parameter beta·R_Q·R_K / log(n_eff).
    pub gamma: f64,
    /// Dimension growth parameter d / log(n_eff).
    pub delta: f64,
    /// Taylor growth parameter (a + gamma) / W0(1/(2·rho0·gamma) + 1/rho0).
    pub sigma: f64,
    /// Taylor order sigma·log(n_eff).
    pub s_tilde: f64,
    /// Sufficient per-bin rank (right-hand side of the rank bound); may be
    /// infinite in linear scale, in which case the log stays finite.
    pub r_sufficient: f64,
    /// Natural log of (r_sufficient − 1).
    pub log_r_sufficient: f64,
    /// ⌈r_sufficient⌉ saturated to u64.
    pub r_eff: u64,
    /// Log of the nuclear-norm Taylor residual at order ⌊s_tilde⌋ with the
    /// closed-form temperature for these radii.
    pub taylor_residual_log: f64,
    /// The bound demands more rank than keys exist: the guarantee cannot be
    /// invoked at this size.
    pub vacuous: bool,
    /// a < 1/2 violates the theorem hypothesis; values are still reported.
    pub warn_small_a: bool,
    /// Zero radii: the attention matrix is constant and the bound trivial.
    pub degenerate: bool,
}

impl GuaranteeReport {
    pub fn to_kv_lines(&self) -> String {
        format!(
            "n={}\nd={}\na={}\nbins={}\nn_eff={}\ngamma={}\ndelta={}\nsigma={}\ns_tilde={}\nr_sufficient={}\nlog_r_sufficient={}\nr_eff={}\ntaylor_residual_log={}\nvacuous={}\nwarn_small_a={}\ndegenerate={}\n",
            self.n,
            self.d,
            self.a,
            self.bins,
            self.n_eff,
            self.gamma,
            self.delta,
            self.sigma,
            self.s_tilde,
            self.r_sufficient,
            self.log_r_sufficient,
            self.r_eff,
            self.taylor_residual_log,
            self.vacuous,
            self.warn_small_a,
            self.degenerate
        )
    }

    pub fn csv_header() -> &'static str {
        "n,d,a,bins,n_eff,gamma,delta,sigma,s_tilde,r_sufficient,log_r_sufficient,r_eff,taylor_residual_log,vacuous,warn_small_a,degenerate"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.d,
            self.a,
            self.bins,
            self.n_eff,
            self.gamma,
            self.delta,
            self.sigma,
            self.s_tilde,
            self.r_sufficient,
            self.log_r_sufficient,
            self.r_eff,
            self.taylor_residual_log,
            self.vacuous,
            self.warn_small_a,
            self.degenerate
        )
    }
}

/// Order s̃(ε) such that the nuclear-norm Taylor residual of the
/// temperature-rescaled kernel drops below ε for every s ≥ ⌊s̃(ε)⌋:
/// s̃ = (log(n/ε) + c) / W0(log(n/ε)/(e·c) + 1/e) with c = beta·R_K²/tau².
pub fn taylor_order(n: usize, eps: f64, beta: f64, r_k: f64, tau: f64) -> Result<f64> {
    if n == 0 || !(eps > 0.0) || !(beta > 0.0) || !(r_k > 0.0) || !(tau > 0.0) {
        return Err(Error::ContractViolation(
            "taylor_order requires n >= 1 and positive eps, beta, r_k, tau".into(),
        ));
    }
    let c = beta * r_k * r_k / (tau * tau);
    let log_ratio = (n as f64 / eps).ln();
    if log_ratio + c <= 0.0 {
        return Err(Error::Domain(format!(
            "undefined regime: eps >= n·exp(beta·R_K²/tau²) (log(n/eps) = {log_ratio}, c = {c})"
        )));
    }
    let arg = log_ratio / (std::f64::consts::E * c) + 1.0 / std::f64::consts::E;
    if arg <= 0.0 {
        return Err(Error::Domain(format!(
            "undefined regime: Lambert argument {arg} is nonpositive"
        )));
    }
    let w = lambert_w0(arg)?.value;
    Ok((log_ratio + c) / w)
}

/// Log of the nuclear-norm residual bound of the order-s Taylor kernel:
/// log(n) + c + (s+1)·(1 + log c − log(s+1)) with c = beta·R_K²/tau².
/// Zero key radius makes the truncation exact, reported as −∞.
pub fn taylor_residual_log(n: usize, beta: f64, r_k: f64, tau: f64, s: usize) -> f64 {
    let c = beta * r_k * r_k / (tau * tau);
    if c == 0.0 {
        return f64::NEG_INFINITY;
    }
    let sp1 = (s + 1) as f64;
    (n as f64).ln() + c + sp1 * (1.0 + c.ln() - sp1.ln())
}

/// Linear-scale version of [`taylor_residual_log`].
pub fn taylor_residual(n: usize, beta: f64, r_k: f64, tau: f64, s: usize) -> f64 {
    taylor_residual_log(n, beta, r_k, tau, s).exp()
}

/// Evaluates the sufficient-rank bound. With `bins` > 1 every occurrence of
/// the sequence length is replaced by n_eff = ⌊n/B⌋, and the resulting rank
/// is the per-bin requirement ⌈r/B⌉.
pub fn theorem_rank(
    n: usize,
    d: usize,
    a: f64,
    beta: f64,
    r_q: f64,
    r_k: f64,
    bins: usize,
) -> Result<GuaranteeReport> {
    if n < 2 {
        return Err(Error::ContractViolation("theorem_rank requires n >= 2".into()));
    }
    if d == 0 {
        return Err(Error::ContractViolation("theorem_rank requires d >= 1".into()));
    }
    if bins == 0 {
        return Err(Error::ContractViolation("theorem_rank requires bins >= 1".into()));
    }
    if !(beta.is_finite() && beta > 0.0) || !a.is_finite() || a < 0.0 {
        return Err(Error::ContractViolation(
            "theorem_rank requires beta > 0 and a >= 0".into(),
        ));
    }
    if !(r_q.is_finite() && r_q >= 0.0) || !(r_k.is_finite() && r_k >= 0.0) {
        return Err(Error::ContractViolation("radii must be nonnegative".into()));
    }
    let n_eff = n / bins;
    if n_eff < 2 {
        return Err(Error::ContractViolation(format!(
            "effective sequence length n/B = {n_eff} is too short; reduce bins"
        )));
    }
    let ln_n = (n_eff as f64).ln();
    let gamma = beta * r_q * r_k / ln_n;
    let delta = d as f64 / ln_n;
    let degenerate = gamma == 0.0;
    let sigma = if degenerate {
        0.0
    } else {
        let arg = 1.0 / (2.0 * rho0() * gamma) + 1.0 / rho0();
        (a + gamma) / lambert_w0(arg)?.value
    };
    let ent = if sigma == 0.0 {
        0.0
    } else {
        binary_entropy(sigma / (sigma + delta))?
    };
    let s_tilde = sigma * ln_n;
    let log_factor_arg = (2.0 * a + sigma + 3.0 * gamma) * ln_n;
    let (log_r_sufficient, r_sufficient) = if log_factor_arg <= 0.0 {
        (f64::NEG_INFINITY, 1.0)
    } else {
        let log_main =
            -0.5 * std::f64::consts::PI.ln() + (sigma + delta) * ent * ln_n + log_factor_arg.ln();
        (log_main, 1.0 + log_main.exp())
    };
    let r_eff = if r_sufficient >= u64::MAX as f64 {
        u64::MAX
    } else {
        r_sufficient.ceil() as u64
    };
    let tau = get_temperature(&TemperatureInputs::new(beta, r_q, r_k, n_eff)?);
    let taylor_residual_log = if r_k > 0.0 {
        taylor_residual_log(n_eff, beta, r_k, tau, s_tilde.floor().max(0.0) as usize)
    } else {
        f64::NEG_INFINITY
    };
    Ok(GuaranteeReport {
        n,
        d,
        a,
        bins,
        n_eff,
        gamma,
        delta,
        sigma,
        s_tilde,
        r_sufficient,
        log_r_sufficient,
        r_eff,
        taylor_residual_log,
        vacuous: !(r_sufficient <= n_eff as f64),
        warn_small_a: a < 0.5,
        degenerate,
    })
}
