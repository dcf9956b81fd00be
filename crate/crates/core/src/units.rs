//! Power unit conversions. Everything inside the crate works in linear mW;
//! dBm only appears at interfaces.

use crate::error::{Error, Result};

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> Result<f64> {
    if !(mw > 0.0) || !mw.is_finite() {
        return Err(Error::domain(format!(
            "linear power must be positive and finite, got {mw}"
        )));
    }
    Ok(10.0 * mw.log10())
}

/// Linear factor for a loss (or gain, if negative) given in dB.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// d/dx 10^(x/10) = (ln 10 / 10) 10^(x/10)
pub const DB_SLOPE: f64 = std::f64::consts::LN_10 / 10.0;
