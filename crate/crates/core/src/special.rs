//! Gamma-family helpers, always evaluated in log space.

use crate::error::{Error, Result};
use alloc::format;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_beta(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

/// `exp` of a log-space quantity, rejecting overflow and NaN.
pub fn exp_finite(log_value: f64, what: &str) -> Result<f64> {
    let v = libm::exp(log_value);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} (log value {log_value})")))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
