//! Capacity of a WDM link from its channel SNRs, and capacity per Watt of
//! electrical supply power.

use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, SnrVector};

/// `2 R_s Σ log2(1 + η SNR_k)` in bit/s (dual polarization).
pub fn capacity(snr: &SnrVector, grid: &ChannelGrid, eta: f64) -> Result<f64> {
    snr.check_grid(grid)?;
    check_eta(eta)?;
    Ok(capacity_unchecked(snr.linear(), grid.symbol_rate, eta))
}

pub(crate) fn capacity_unchecked(snr: &[f64], symbol_rate: f64, eta: f64) -> f64 {
    let bits: f64 = snr.iter().map(|&s| (1.0 + eta * s).log2()).sum();
    2.0 * symbol_rate * bits
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

/// Capacity per Watt of supply power (bit/s/W).
pub fn figure_of_merit(capacity: f64, supply_power_w: f64) -> Result<f64> {
    if !(supply_power_w > 0.0) || !supply_power_w.is_finite() {
        return Err(Error::domain(format!(
            "supply power must be positive, got {supply_power_w}"
        )));
    }
    Ok(capacity / supply_power_w)
}
