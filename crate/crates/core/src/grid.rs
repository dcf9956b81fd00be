//! WDM channel plan and the per-channel vectors that live on it.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::units::{dbm_to_mw, mw_to_dbm};

/// Channel plan: `channel_count` signal slots of `slot_width`, one every
/// `channel_spacing` (signal slots interleaved with empty ones).
///
/// All frequencies are in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelGrid {
    pub channel_count: usize,
    pub slot_width: f64,
    pub channel_spacing: f64,
    pub start_frequency: f64,
    /// Reference bandwidth for SNR and capacity.
    pub symbol_rate: f64,
}

impl Default for ChannelGrid {
    fn default() -> Self {
        ChannelGrid {
            channel_count: 40,
            slot_width: 50e9,
            channel_spacing: 100e9,
            start_frequency: 192.0e12,
            symbol_rate: 50e9,
        }
    }
}

impl ChannelGrid {
    pub fn validate(&self) -> Result<()> {
        if self.channel_count == 0 {
            return Err(Error::domain("channel_count must be at least 1"));
        }
        if !(self.slot_width > 0.0) || !self.slot_width.is_finite() {
            return Err(Error::domain("slot_width must be positive"));
        }
        if !(self.channel_spacing >= self.slot_width) || !self.channel_spacing.is_finite() {
            return Err(Error::domain("channel_spacing must be at least slot_width"));
        }
        if !(self.start_frequency > 0.0) || !self.start_frequency.is_finite() {
            return Err(Error::domain("start_frequency must be positive"));
        }
        if !(self.symbol_rate > 0.0) || !self.symbol_rate.is_finite() {
            return Err(Error::domain("symbol_rate must be positive"));
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.start_frequency + k as f64 * self.channel_spacing
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.channel_count).map(|k| self.frequency(k)).collect()
    }

    /// Position of each channel across the band, 0 at the first channel and
    /// 1 at the last. A single-channel grid maps to 0.
    pub fn normalized_frequencies(&self) -> Vec<f64> {
        let n = self.channel_count;
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    pub fn occupied_bandwidth(&self) -> f64 {
        (self.channel_count - 1) as f64 * self.channel_spacing + self.slot_width
    }
}

/// Per-channel launch powers in dBm per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    powers_dbm: Vec<f64>,
}

impl PowerProfile {
    pub fn new(powers_dbm: Vec<f64>) -> Result<Self> {
        if powers_dbm.is_empty() {
            return Err(Error::domain("power profile must have at least one channel"));
        }
        if let Some(k) = powers_dbm.iter().position(|p| !p.is_finite()) {
            return Err(Error::domain(format!(
                "power profile entry {k} is not finite"
            )));
        }
        Ok(PowerProfile { powers_dbm })
    }

    /// Flat profile carrying `total_mw` spread evenly over `channels`.
    pub fn flat(total_mw: f64, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::domain("flat profile needs at least one channel"));
        }
        let level = mw_to_dbm(total_mw / channels as f64)?;
        Ok(PowerProfile {
            powers_dbm: vec![level; channels],
        })
    }

    pub fn powers_dbm(&self) -> &[f64] {
        &self.powers_dbm
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.powers_dbm
    }

    pub fn len(&self) -> usize {
        self.powers_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_dbm.is_empty()
    }

    pub fn linear_mw(&self) -> Vec<f64> {
        self.powers_dbm.iter().map(|&p| dbm_to_mw(p)).collect()
    }

    pub fn total_mw(&self) -> f64 {
        self.powers_dbm.iter().map(|&p| dbm_to_mw(p)).sum()
    }

    pub fn excursion_db(&self) -> f64 {
        let (lo, hi) = min_max(&self.powers_dbm);
        hi - lo
    }

    /// Linear powers normalized to sum to one.
    pub fn normalized(&self) -> Vec<f64> {
        let lin = self.linear_mw();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    /// Apply a uniform dB shift so that the total linear power equals
    /// `total_mw`. The profile's shape (and excursion) is unchanged.
    pub fn rescaled_to_total(&self, total_mw: f64) -> Result<Self> {
        Ok(PowerProfile {
            powers_dbm: shift_to_total(&self.powers_dbm, total_mw)?,
        })
    }
}

/// Uniform dB shift of `powers_dbm` restoring the linear sum `total_mw`.
pub fn shift_to_total(powers_dbm: &[f64], total_mw: f64) -> Result<Vec<f64>> {
    if !(total_mw > 0.0) || !total_mw.is_finite() {
        return Err(Error::domain(format!(
            "total power must be positive, got {total_mw}"
        )));
    }
    // Factor out the peak so the sum cannot overflow or underflow.
    let (_, peak) = min_max(powers_dbm);
    let rel_sum: f64 = powers_dbm.iter().map(|&p| dbm_to_mw(p - peak)).sum();
    let shift = mw_to_dbm(total_mw)? - peak - 10.0 * rel_sum.log10();
    Ok(powers_dbm.iter().map(|&p| p + shift).collect())
}

pub(crate) fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Per-channel SNR, one polarization, in the reference bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrVector {
    snr_linear: Vec<f64>,
}

impl SnrVector {
    pub fn new(snr_linear: Vec<f64>) -> Result<Self> {
        if let Some(k) = snr_linear.iter().position(|s| !(*s >= 0.0)) {
            return Err(Error::domain(format!(
                "SNR entry {k} is negative or NaN: {}",
                snr_linear[k]
            )));
        }
        Ok(SnrVector { snr_linear })
    }

    pub fn from_db(snr_db: &[f64]) -> Result<Self> {
        Self::new(snr_db.iter().map(|&s| dbm_to_mw(s)).collect())
    }

    pub fn linear(&self) -> &[f64] {
        &self.snr_linear
    }

    pub fn db(&self) -> Vec<f64> {
        self.snr_linear.iter().map(|&s| 10.0 * s.log10()).collect()
    }

    pub fn len(&self) -> usize {
        self.snr_linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snr_linear.is_empty()
    }

    pub(crate) fn check_grid(&self, grid: &ChannelGrid) -> Result<()> {
        check_len("SNR vector", grid.channel_count, self.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_grid_band() {
        let g = ChannelGrid::default();
        g.validate().unwrap();
        assert_relative_eq!(g.occupied_bandwidth(), 3.95e12, max_relative = 1e-15);
        let f = g.frequencies();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(f[0], 192.0e12);
        assert_relative_eq!(f[39], 195.9e12, max_relative = 1e-15);
    }

    #[test]
    fn grid_validation() {
        let bad = ChannelGrid {
            channel_spacing: 25e9,
            ..ChannelGrid::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChannelGrid {
            channel_count: 0,
            ..ChannelGrid::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn profile_rejects_nonfinite() {
        assert!(PowerProfile::new(vec![0.0, f64::NAN]).is_err());
        assert!(PowerProfile::new(vec![]).is_err());
    }

    #[test]
    fn excursion_is_peak_to_peak() {
        let p = PowerProfile::new(vec![-3.0, 2.5, -10.0, 0.0]).unwrap();
        assert_eq!(p.excursion_db(), 12.5);
    }

    #[test]
    fn shift_preserves_shape() {
        let p = PowerProfile::new(vec![-3.0, 2.5, -10.0, 0.0]).unwrap();
        let q = p.rescaled_to_total(7.0).unwrap();
        assert_relative_eq!(q.total_mw(), 7.0, max_relative = 1e-14);
        assert_relative_eq!(q.excursion_db(), 12.5, epsilon = 1e-12);
    }

    #[test]
    fn snr_rejects_negative() {
        assert!(SnrVector::new(vec![1.0, -0.1]).is_err());
        assert!(SnrVector::new(vec![0.0, 1.0]).is_ok());
    }
}
