use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{ChannelGrid, SnrVector};

/// Signal power (mW per slot) and two-polarization ASE power spectral
/// density (W/Hz at the channel center) for every channel at one point of
/// the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumState {
    pub signal_mw: Vec<f64>,
    pub ase_psd: Vec<f64>,
}

impl SpectrumState {
    pub fn new(signal_mw: Vec<f64>, ase_psd: Vec<f64>) -> Result<Self> {
        check_len("ASE spectrum", signal_mw.len(), ase_psd.len())?;
        if signal_mw.iter().chain(&ase_psd).any(|v| !(*v >= 0.0)) {
            return Err(Error::domain(
                "spectrum entries must be nonnegative and finite",
            ));
        }
        Ok(SpectrumState { signal_mw, ase_psd })
    }

    pub fn len(&self) -> usize {
        self.signal_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal_mw.is_empty()
    }

    /// One-polarization ASE power in the reference bandwidth (mW).
    pub fn noise_mw(&self, grid: &ChannelGrid) -> Vec<f64> {
        self.ase_psd
            .iter()
            .map(|&psd| 0.5 * psd * grid.symbol_rate * 1e3)
            .collect()
    }

    pub fn snr(&self, grid: &ChannelGrid) -> Result<SnrVector> {
        let snr = self
            .signal_mw
            .iter()
            .zip(self.noise_mw(grid))
            .map(|(&s, n)| s / n)
            .collect();
        SnrVector::new(snr)
    }

    /// Signal plus ASE counted over `ase_bandwidth` Hz per channel (mW).
    pub fn total_power_mw(&self, ase_bandwidth: f64) -> f64 {
        self.signal_mw
            .iter()
            .zip(&self.ase_psd)
            .map(|(&s, &psd)| s + psd * ase_bandwidth * 1e3)
            .sum()
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.signal_mw
            .iter()
            .chain(&self.ase_psd)
            .all(|v| v.is_finite())
    }
}
