//! Single-inversion amplifier model.
//!
//! The gain of channel k at average inversion `x` is affine in dB,
//! `G_k(x) = x (α_k + g*_k) − α_k`, and the spontaneous-emission factor is
//! `n_sp,k = x (α_k + g*_k) / (x (α_k + g*_k) − α_k)`, clamped to
//! `[1, nsp_max]`. The pump is controlled so that the total output power,
//! signal plus ASE across `ase_bandwidth` per channel, hits a target.

use serde::{Deserialize, Serialize};

use super::spectrum::SpectrumState;
use crate::error::{check_len, Error, Result};
use crate::grid::ChannelGrid;
use crate::units::{db_to_linear, PLANCK};

pub const INVERSION_MIN: f64 = 1e-3;
pub const INVERSION_MAX: f64 = 1.0;
const MAX_BISECTIONS: usize = 200;
/// Bisection stops once the output power is this close to target. The
/// contract is 1e-9; running tighter keeps independent implementations
/// agreeing channel by channel.
const STOP_REL_TOL: f64 = 1e-13;
const CONTRACT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdfaParams {
    /// Absorption coefficients α_k (dB).
    pub absorption_db: Vec<f64>,
    /// Gain coefficients at full inversion g*_k (dB).
    pub gain_star_db: Vec<f64>,
    /// Bandwidth per channel over which ASE counts toward output power (Hz).
    pub ase_bandwidth: f64,
    /// Upper clamp on n_sp. Zero turns spontaneous emission off.
    pub nsp_max: f64,
}

impl EdfaParams {
    /// Built-in spectral shapes: ripple of one to two dB per amplifier.
    pub fn default_for(grid: &ChannelGrid) -> Self {
        use std::f64::consts::TAU;
        let u = grid.normalized_frequencies();
        let absorption_db = u
            .iter()
            .map(|&u| 7.0 + 0.8 * u + 0.9 * (TAU * (1.4 * u + 0.1)).sin())
            .collect();
        let gain_star_db = u
            .iter()
            .map(|&u| 20.5 - 1.2 * u + 0.7 * (TAU * (2.3 * u + 0.55)).sin())
            .collect();
        EdfaParams {
            absorption_db,
            gain_star_db,
            ase_bandwidth: grid.channel_spacing,
            nsp_max: 10.0,
        }
    }

    /// Spectrally flat amplifier.
    pub fn flat(channels: usize, absorption_db: f64, gain_star_db: f64, ase_bandwidth: f64) -> Self {
        EdfaParams {
            absorption_db: vec![absorption_db; channels],
            gain_star_db: vec![gain_star_db; channels],
            ase_bandwidth,
            nsp_max: 10.0,
        }
    }

    pub fn len(&self) -> usize {
        self.absorption_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorption_db.is_empty()
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        check_len("EDFA absorption", channels, self.absorption_db.len())?;
        check_len("EDFA gain coefficients", channels, self.gain_star_db.len())?;
        if self
            .absorption_db
            .iter()
            .chain(&self.gain_star_db)
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::domain("EDFA coefficients must be positive and finite"));
        }
        if !(self.ase_bandwidth >= 0.0) || !self.ase_bandwidth.is_finite() {
            return Err(Error::domain("ase_bandwidth must be nonnegative"));
        }
        if !(self.nsp_max >= 0.0) || !self.nsp_max.is_finite() {
            return Err(Error::domain("nsp_max must be nonnegative"));
        }
        Ok(())
    }

    fn gain_db_at(&self, k: usize, x: f64) -> f64 {
        x * (self.absorption_db[k] + self.gain_star_db[k]) - self.absorption_db[k]
    }

    fn nsp_at(&self, k: usize, x: f64) -> f64 {
        let inverted = x * (self.absorption_db[k] + self.gain_star_db[k]);
        let excess = inverted - self.absorption_db[k];
        let raw = if excess > 0.0 { inverted / excess } else { f64::INFINITY };
        raw.max(1.0).min(self.nsp_max)
    }
}

pub fn edfa_gain_db(inversion: f64, params: &EdfaParams) -> Result<Vec<f64>> {
    check_inversion(inversion)?;
    Ok((0..params.len())
        .map(|k| params.gain_db_at(k, inversion))
        .collect())
}

fn check_inversion(x: f64) -> Result<()> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::domain(format!("inversion must lie in (0, 1], got {x}")));
    }
    Ok(())
}

/// Amplifier state for one input spectrum, evaluated at arbitrary inversion.
struct Stage<'a> {
    input: &'a SpectrumState,
    params: &'a EdfaParams,
    photon_energy: Vec<f64>,
}

impl<'a> Stage<'a> {
    fn new(input: &'a SpectrumState, params: &'a EdfaParams, grid: &ChannelGrid) -> Self {
        let photon_energy = grid.frequencies().iter().map(|f| PLANCK * f).collect();
        Stage {
            input,
            params,
            photon_energy,
        }
    }

    fn output(&self, x: f64) -> SpectrumState {
        let k_count = self.input.len();
        let mut signal_mw = Vec::with_capacity(k_count);
        let mut ase_psd = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let g = db_to_linear(self.params.gain_db_at(k, x));
            signal_mw.push(self.input.signal_mw[k] * g);
            let mut psd = self.input.ase_psd[k] * g;
            if g > 1.0 {
                psd += 2.0 * self.params.nsp_at(k, x) * self.photon_energy[k] * (g - 1.0);
            }
            ase_psd.push(psd);
        }
        SpectrumState { signal_mw, ase_psd }
    }

    fn total_mw(&self, x: f64) -> f64 {
        let bw_mw = self.params.ase_bandwidth * 1e3;
        (0..self.input.len())
            .map(|k| {
                let g = db_to_linear(self.params.gain_db_at(k, x));
                let mut psd = self.input.ase_psd[k] * g;
                if g > 1.0 {
                    psd += 2.0 * self.params.nsp_at(k, x) * self.photon_energy[k] * (g - 1.0);
                }
                self.input.signal_mw[k] * g + psd * bw_mw
            })
            .sum()
    }
}

/// Constant-output-power amplification: finds the inversion at which the
/// total output power equals `target_output_mw` and returns the output
/// spectrum together with that inversion.
pub fn amplify(
    input: &SpectrumState,
    target_output_mw: f64,
    params: &EdfaParams,
    grid: &ChannelGrid,
) -> Result<(SpectrumState, f64)> {
    check_len("amplifier input", grid.channel_count, input.len())?;
    params.validate(grid.channel_count)?;
    if !(target_output_mw > 0.0) || !target_output_mw.is_finite() {
        return Err(Error::domain(format!(
            "amplifier target must be positive, got {target_output_mw}"
        )));
    }
    if !input.signal_mw.iter().any(|&s| s > 0.0) {
        return Err(Error::domain("amplifier input carries no signal"));
    }

    let stage = Stage::new(input, params, grid);
    let (mut lo, mut hi) = (INVERSION_MIN, INVERSION_MAX);
    let (p_lo, p_hi) = (stage.total_mw(lo), stage.total_mw(hi));
    if !(p_lo <= target_output_mw && target_output_mw <= p_hi) {
        return Err(Error::PumpUnreachable {
            edfa: 0,
            target_mw: target_output_mw,
            min_mw: p_lo,
            max_mw: p_hi,
        });
    }

    let mut best = (hi, p_hi - target_output_mw);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let miss = stage.total_mw(mid) - target_output_mw;
        if miss.abs() < best.1.abs() {
            best = (mid, miss);
        }
        if miss.abs() <= STOP_REL_TOL * target_output_mw {
            break;
        }
        if miss < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (x, miss) = best;
    if miss.abs() > CONTRACT_REL_TOL * target_output_mw {
        return Err(Error::Numeric {
            stage: 0,
            what: format!("output power missed target by {miss:.3e} mW"),
        });
    }
    Ok((stage.output(x), x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1() -> ChannelGrid {
        ChannelGrid {
            channel_count: 1,
            ..ChannelGrid::default()
        }
    }

    #[test]
    fn gain_formula() {
        let p = EdfaParams::flat(1, 7.0, 19.0, 100e9);
        assert_relative_eq!(edfa_gain_db(0.9, &p).unwrap()[0], 16.4, epsilon = 1e-12);
        assert_eq!(edfa_gain_db(1.0, &p).unwrap()[0], 19.0);
        let transparent = 7.0 / 26.0;
        assert!(edfa_gain_db(transparent, &p).unwrap()[0].abs() < 1e-12);
        assert!(edfa_gain_db(0.0, &p).is_err());
        assert!(edfa_gain_db(1.01, &p).is_err());
    }

    #[test]
    fn full_inversion_reaches_gain_star() {
        let grid = ChannelGrid::default();
        let p = EdfaParams::default_for(&grid);
        let g = edfa_gain_db(1.0, &p).unwrap();
        for (a, b) in g.iter().zip(&p.gain_star_db) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_increases_with_inversion() {
        let grid = ChannelGrid::default();
        let p = EdfaParams::default_for(&grid);
        let a = edfa_gain_db(0.5, &p).unwrap();
        let b = edfa_gain_db(0.6, &p).unwrap();
        assert!(a.iter().zip(&b).all(|(a, b)| b > a));
    }

    #[test]
    fn nsp_clamp() {
        let p = EdfaParams::flat(1, 7.0, 19.0, 100e9);
        assert_eq!(p.nsp_at(0, 0.27), 10.0);
        assert_relative_eq!(p.nsp_at(0, 1.0), 26.0 / 19.0, max_relative = 1e-15);
        let off = EdfaParams { nsp_max: 0.0, ..p };
        assert_eq!(off.nsp_at(0, 1.0), 0.0);
    }

    #[test]
    fn flat_noise_free_doubling() {
        let grid = ChannelGrid::default();
        let mut p = EdfaParams::flat(40, 5.0, 20.0, 100e9);
        p.nsp_max = 0.0;
        let input = SpectrumState::new(
            (0..40).map(|k| 0.01 + 1e-4 * k as f64).collect(),
            vec![0.0; 40],
        )
        .unwrap();
        let total_in: f64 = input.signal_mw.iter().sum();
        let (out, _) = amplify(&input, 2.0 * total_in, &p, &grid).unwrap();
        for (o, i) in out.signal_mw.iter().zip(&input.signal_mw) {
            assert_relative_eq!(*o, 2.0 * i, max_relative = 1e-11);
        }
    }

    #[test]
    fn transparency_adds_no_spontaneous_noise() {
        let grid = grid1();
        let p = EdfaParams::flat(1, 7.0, 19.0, 100e9);
        let input = SpectrumState::new(vec![0.5], vec![1e-18]).unwrap();
        let bw = p.ase_bandwidth * 1e3;
        // Target equal to the input total: G = 1 exactly.
        let target = 0.5 + 1e-18 * bw;
        let (out, x) = amplify(&input, target, &p, &grid).unwrap();
        assert_relative_eq!(x, 7.0 / 26.0, max_relative = 1e-9);
        assert_relative_eq!(out.ase_psd[0], 1e-18, max_relative = 1e-8);
    }

    #[test]
    fn unreachable_targets() {
        let grid = grid1();
        let p = EdfaParams::flat(1, 7.0, 19.0, 100e9);
        let input = SpectrumState::new(vec![0.01], vec![0.0]).unwrap();
        assert!(matches!(
            amplify(&input, 100.0, &p, &grid),
            Err(Error::PumpUnreachable { .. })
        ));
        assert!(matches!(
            amplify(&input, 1e-9, &p, &grid),
            Err(Error::PumpUnreachable { .. })
        ));
        let dark = SpectrumState::new(vec![0.0], vec![0.0]).unwrap();
        assert!(amplify(&dark, 1.0, &p, &grid).is_err());
    }
}
