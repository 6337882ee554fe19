//! Closed-form key/query rescaling temperature.
//!
//! tau = sqrt((R_K/R_Q) · b0 / (2·W0(b0/(2·rho0)))) with
//! b0 = log(n)/(beta·R_Q·R_K) + 2. Rescaling Q → tau·Q, K → K/tau leaves the
//! attention matrix unchanged but makes the key kernel matrix easier to
//! approximate at low rank.

use crate::error::{Error, Result};
use crate::special::{lambert_w0, rho0};

/// Inputs of the temperature formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureInputs {
    pub beta: f64,
    pub r_q: f64,
    pub r_k: f64,
    pub n: usize,
}

impl TemperatureInputs {
    pub fn new(beta: f64, r_q: f64, r_k: f64, n: usize) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::ContractViolation(format!("beta must be > 0, got {beta}")));
        }
        if !(r_q.is_finite() && r_q >= 0.0) || !(r_k.is_finite() && r_k >= 0.0) {
            return Err(Error::ContractViolation(format!(
                "radii must be nonnegative, got r_q={r_q}, r_k={r_k}"
            )));
        }
        if n == 0 {
            return Err(Error::ContractViolation("n must be >= 1".into()));
        }
        Ok(TemperatureInputs { beta, r_q, r_k, n })
    }
}

/// Evaluates the temperature formula. Degenerate zero radii (constant
/// attention matrix) fall back to tau = 1.
pub fn get_temperature(inp: &TemperatureInputs) -> f64 {
    if inp.r_q <= 0.0 || inp.r_k <= 0.0 {
        return 1.0;
    }
    let b0 = (inp.n as f64).ln() / (inp.beta * inp.r_q * inp.r_k) + 2.0;
    let w = lambert_w0(b0 / (2.0 * rho0()))
        .expect("b0 >= 2 makes the Lambert argument positive")
        .value;
    ((inp.r_k / inp.r_q) * b0 / (2.0 * w)).sqrt()
}

/// The effective rescaling ratio rho = tau²·R_Q/R_K.
pub fn rho_of(tau: f64, r_q: f64, r_k: f64) -> Result<f64> {
    if !(r_k > 0.0) {
        return Err(Error::ContractViolation(format!("r_k must be > 0, got {r_k}")));
    }
    Ok(tau * tau * r_q / r_k)
}
