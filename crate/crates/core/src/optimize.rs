//! Capacity maximization through the twin and the reference allocations
//! it is compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{shift_to_total, ChannelGrid, PowerProfile};
use crate::linksim::{propagate, LinkConfig};
use crate::twin::{CapacityObjective, TwinModel};

/// Relative mismatch of a start profile's total power that is still accepted.
const START_TOTAL_TOL: f64 = 1e-6;

/// Projected gradient this small relative to the raw one is treated as
/// zero; max-abs normalization would otherwise blow rounding noise up to a
/// full step.
const ZERO_GRADIENT_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientNormalization {
    /// Scale the step so the largest channel moves by exactly `step_db`.
    MaxAbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdSettings {
    pub max_iterations: usize,
    pub step_db: f64,
    pub gradient_normalization: GradientNormalization,
    /// Relative capacity change over `stop_window` iterations that counts
    /// as a plateau.
    pub stop_tol: f64,
    pub stop_window: usize,
    /// Widening of the twin's training envelope used as per-channel bounds (dB).
    pub clamp_margin_db: f64,
}

impl Default for GdSettings {
    fn default() -> Self {
        GdSettings {
            max_iterations: 300,
            step_db: 0.3,
            gradient_normalization: GradientNormalization::MaxAbs,
            stop_tol: 1e-4,
            stop_window: 10,
            clamp_margin_db: 0.0,
        }
    }
}

impl GdSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.step_db > 0.0) || !self.step_db.is_finite() {
            return Err(Error::Config("step_db must be positive".into()));
        }
        if !(self.stop_tol >= 0.0) || self.stop_window == 0 || !self.clamp_margin_db.is_finite() {
            return Err(Error::Config("invalid stopping or clamp settings".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub start_profile: PowerProfile,
    pub final_profile: PowerProfile,
    /// Predicted capacity after each iteration, starting with the start point.
    pub capacity_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl OptimizationResult {
    pub fn final_capacity(&self) -> f64 {
        *self.capacity_trace.last().expect("trace is never empty")
    }

    pub fn start_capacity(&self) -> f64 {
        self.capacity_trace[0]
    }
}

/// Gradient of `C(shift(P))` where `shift` rescales to a fixed total:
/// the component along the shift direction is removed with the power
/// shares as weights.
fn reduced_gradient(grad: &[f64], tx_mw: &[f64]) -> Vec<f64> {
    let total: f64 = tx_mw.iter().sum();
    let sum_g: f64 = grad.iter().sum();
    grad.iter()
        .zip(tx_mw)
        .map(|(g, p)| g - sum_g * p / total)
        .collect()
}

fn check_start(start: &PowerProfile, total_power_mw: f64) -> Result<()> {
    if !(total_power_mw > 0.0) || !total_power_mw.is_finite() {
        return Err(Error::domain(format!(
            "total power must be positive, got {total_power_mw} mW"
        )));
    }
    let rel = (start.total_mw() - total_power_mw).abs() / total_power_mw;
    if rel > START_TOTAL_TOL {
        return Err(Error::domain(format!(
            "start profile carries {} mW, constraint is {total_power_mw} mW",
            start.total_mw()
        )));
    }
    Ok(())
}

/// Projected gradient ascent of predicted capacity under a total-power
/// constraint, in dB coordinates.
pub fn maximize_capacity(
    model: &TwinModel,
    start: &PowerProfile,
    total_power_mw: f64,
    settings: &GdSettings,
    grid: &ChannelGrid,
    eta: f64,
) -> Result<OptimizationResult> {
    settings.validate()?;
    check_start(start, total_power_mw)?;
    let objective = CapacityObjective {
        symbol_rate: grid.symbol_rate,
        eta,
    };
    let bounds: Vec<[f64; 2]> = model
        .training_envelope
        .iter()
        .map(|[lo, hi]| [lo - settings.clamp_margin_db, hi + settings.clamp_margin_db])
        .collect();

    let mut p = PowerProfile::new(shift_to_total(start.powers_dbm(), total_power_mw)?)?;
    let (c0, mut grad) = model.capacity_gradient(&p, &objective)?;
    let mut trace = vec![c0];
    let mut converged = false;
    let mut iterations_used = 0;
    for it in 0..settings.max_iterations {
        let g = reduced_gradient(&grad, &p.linear_mw());
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::Numeric {
                stage: it,
                what: "non-finite twin gradient during ascent".into(),
            });
        }
        let raw = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale <= ZERO_GRADIENT_REL * raw || scale == 0.0 {
            converged = true;
            break;
        }
        let stepped: Vec<f64> = p
            .powers_dbm()
            .iter()
            .zip(&g)
            .zip(&bounds)
            .map(|((x, g), [lo, hi])| (x + settings.step_db * g / scale).clamp(*lo, *hi))
            .collect();
        p = PowerProfile::new(shift_to_total(&stepped, total_power_mw)?)?;
        let (c, next) = model.capacity_gradient(&p, &objective)?;
        grad = next;
        trace.push(c);
        iterations_used = it + 1;
        let w = settings.stop_window;
        if trace.len() > w {
            let last = trace[trace.len() - 1];
            if (last - trace[trace.len() - 1 - w]).abs() <= settings.stop_tol * last.abs() {
                converged = true;
                break;
            }
        }
    }
    Ok(OptimizationResult {
        start_profile: start.clone(),
        final_profile: p,
        capacity_trace: trace,
        converged,
        iterations_used,
    })
}

/// Independent runs from every start, in start order.
pub fn maximize_from_starts(
    model: &TwinModel,
    starts: &[PowerProfile],
    total_power_mw: f64,
    settings: &GdSettings,
    grid: &ChannelGrid,
    eta: f64,
) -> Result<Vec<OptimizationResult>> {
    starts
        .par_iter()
        .map(|s| maximize_capacity(model, s, total_power_mw, settings, grid, eta))
        .collect()
}

pub fn flat_tx_profile(total_power_mw: f64, grid: &ChannelGrid) -> Result<PowerProfile> {
    PowerProfile::flat(total_power_mw, grid.channel_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlattenTarget {
    RxSignal,
    Snr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlattenSettings {
    pub damping: f64,
    pub tol_db: f64,
    pub max_iters: usize,
}

impl Default for FlattenSettings {
    fn default() -> Self {
        FlattenSettings {
            damping: 0.7,
            tol_db: 0.01,
            max_iters: 100,
        }
    }
}

/// Damped fixed-point search for a TX profile that makes the oracle's
/// per-channel output (dB) flat. Flatness is the max-min spread.
pub fn flatten<F>(
    mut oracle: F,
    start: &PowerProfile,
    total_power_mw: f64,
    settings: &FlattenSettings,
) -> Result<PowerProfile>
where
    F: FnMut(&PowerProfile) -> Result<Vec<f64>>,
{
    if !(settings.damping > 0.0 && settings.damping <= 1.0) || !(settings.tol_db > 0.0) {
        return Err(Error::Config("flattener needs damping in (0, 1] and tol_db > 0".into()));
    }
    check_start(start, total_power_mw)?;
    let mut p = start.clone();
    let mut best: Option<(f64, PowerProfile)> = None;
    for it in 0..settings.max_iters {
        let values = oracle(&p)?;
        crate::error::check_len("flattener oracle output", p.len(), values.len())?;
        let (lo, hi) = crate::grid::min_max(&values);
        let spread = hi - lo;
        if !spread.is_finite() {
            return Err(Error::Numeric {
                stage: it,
                what: "flattener oracle returned non-finite values".into(),
            });
        }
        if spread <= settings.tol_db {
            return Ok(p);
        }
        if best.as_ref().map_or(true, |(d, _)| spread < *d) {
            best = Some((spread, p.clone()));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let next: Vec<f64> = p
            .powers_dbm()
            .iter()
            .zip(&values)
            .map(|(x, v)| x + settings.damping * (mean - v))
            .collect();
        p = PowerProfile::new(shift_to_total(&next, total_power_mw)?)?;
    }
    let (deviation_db, best) = best.expect("at least one iteration ran");
    Err(Error::NonConvergence {
        best: Box::new(best),
        deviation_db,
    })
}

/// Oracle closure over the simulated link for use with [`flatten`].
pub fn link_oracle(
    config: &LinkConfig,
    target: FlattenTarget,
) -> impl FnMut(&PowerProfile) -> Result<Vec<f64>> + '_ {
    move |tx| {
        let prop = propagate(tx, config)?;
        Ok(match target {
            FlattenTarget::Snr => prop.snr.db(),
            FlattenTarget::RxSignal => prop
                .rx
                .signal_mw
                .iter()
                .map(|&s| crate::units::mw_to_dbm(s))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_tx_spot_values() {
        let grid = ChannelGrid::default();
        let p = flat_tx_profile(40.0, &grid).unwrap();
        assert!(p.powers_dbm().iter().all(|v| v.abs() < 1e-12));
        assert_eq!(p.excursion_db(), 0.0);
        assert!((p.total_mw() - 40.0).abs() < 1e-12);
        assert!(flat_tx_profile(0.0, &grid).is_err());
    }

    #[test]
    fn reduced_gradient_is_orthogonal_to_shift() {
        let g = [1.0, -2.0, 0.5];
        let p = [1.0, 2.0, 3.0];
        let r = reduced_gradient(&g, &p);
        // A uniform shift of a projected point changes nothing, so the
        // share-weighted sum of the reduced gradient vanishes.
        let s: f64 = r.iter().sum();
        assert!(s.abs() < 1e-12, "{s}");
    }

    #[test]
    fn gd_settings_invariants() {
        assert!(GdSettings::default().validate().is_ok());
        let bad = GdSettings {
            max_iterations: 0,
            ..GdSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = GdSettings {
            step_db: 0.0,
            ..GdSettings::default()
        };
        assert!(bad.validate().is_err());
    }
}
