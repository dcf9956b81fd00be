use serde::{Deserialize, Serialize};

use super::edfa::{amplify, EdfaParams};
use super::spectrum::SpectrumState;
use crate::error::{check_len, Error, Result};
use crate::grid::{min_max, ChannelGrid, PowerProfile, SnrVector};
use crate::units::{db_to_linear, mw_to_dbm};

/// Flat-load ripple above which calibration logs a warning.
pub const RIPPLE_WARNING_DB: f64 = 1.5;
const CALIBRATION_ROUNDS: usize = 5;
const CALIBRATION_TOL: f64 = 1e-6;
const TX_POWER_REL_TOL: f64 = 1e-6;

/// Static gain-flattening filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GffState {
    pub attenuation_db: Vec<f64>,
    pub excess_loss_db: f64,
    /// Fraction of the amplifier's output power (signal and ASE) that
    /// passes the filter at its design point.
    pub mean_transmission: f64,
}

impl GffState {
    pub fn transmission(&self) -> Vec<f64> {
        self.attenuation_db.iter().map(|&a| db_to_linear(-a)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.excess_loss_db >= 0.0) {
            return Err(Error::domain("GFF excess loss must be nonnegative"));
        }
        if !(self.mean_transmission > 0.0 && self.mean_transmission <= 1.0) {
            return Err(Error::domain("GFF mean transmission must lie in (0, 1]"));
        }
        let (lo, _) = min_max(&self.attenuation_db);
        if !(lo >= self.excess_loss_db - 1e-12) {
            return Err(Error::domain(
                "GFF attenuation must be at least the excess loss on every channel",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub grid: ChannelGrid,
    pub span_count: usize,
    pub inline_edfa_count: usize,
    pub span_loss_db: f64,
    /// Linear loss tilt across the band (dB from first to last channel,
    /// centered on `span_loss_db`). Zero by default.
    pub span_tilt_db: f64,
    /// Total electrical pump power of the budget-counted amplifiers (W).
    pub supply_power_w: f64,
    /// Optical output per unit electrical power, referenced after the GFF.
    pub wall_plug_efficiency: f64,
    pub gff_enabled: bool,
    pub gff_excess_loss_db: f64,
    pub edfa: EdfaParams,
    pub tx_snr_db: f64,
    /// Installed filter; populated by [`calibrate_link`] when `gff_enabled`.
    pub gff: Option<GffState>,
    /// Intrinsic pump-to-optical conversion efficiency, resolved by
    /// [`calibrate_link`].
    pub conversion_efficiency: Option<f64>,
}

impl LinkConfig {
    pub fn new(grid: ChannelGrid, supply_power_w: f64, wall_plug_efficiency: f64, gff_enabled: bool) -> Self {
        let edfa = EdfaParams::default_for(&grid);
        LinkConfig {
            grid,
            span_count: 12,
            inline_edfa_count: 11,
            span_loss_db: 16.5,
            span_tilt_db: 0.0,
            supply_power_w,
            wall_plug_efficiency,
            gff_enabled,
            gff_excess_loss_db: 1.0,
            edfa,
            tx_snr_db: 45.0,
            gff: None,
            conversion_efficiency: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.edfa.validate(self.grid.channel_count)?;
        if self.inline_edfa_count == 0 || self.span_count < self.inline_edfa_count {
            return Err(Error::domain(
                "need span_count >= inline_edfa_count >= 1",
            ));
        }
        if !(self.span_loss_db >= 0.0) || !self.span_tilt_db.is_finite() {
            return Err(Error::domain("span loss must be nonnegative"));
        }
        if !(self.supply_power_w > 0.0) || !self.supply_power_w.is_finite() {
            return Err(Error::domain("supply power must be positive"));
        }
        if !(self.wall_plug_efficiency > 0.0 && self.wall_plug_efficiency < 1.0) {
            return Err(Error::domain("wall-plug efficiency must lie in (0, 1)"));
        }
        if !(self.gff_excess_loss_db >= 0.0) {
            return Err(Error::domain("GFF excess loss must be nonnegative"));
        }
        if !self.tx_snr_db.is_finite() {
            return Err(Error::domain("TX SNR must be finite"));
        }
        if let Some(gff) = &self.gff {
            check_len("GFF attenuation", self.grid.channel_count, gff.attenuation_db.len())?;
            gff.validate()?;
        }
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.conversion_efficiency.is_some() && (self.gff.is_some() == self.gff_enabled)
    }

    fn efficiency(&self) -> f64 {
        self.conversion_efficiency.unwrap_or(self.wall_plug_efficiency)
    }

    /// Total output power each inline amplifier is controlled to (mW),
    /// before any filter.
    pub fn amplifier_output_mw(&self) -> f64 {
        self.efficiency() * self.supply_power_w * 1e3 / self.inline_edfa_count as f64
    }

    /// Total power leaving each amplifier site after the filter, which is
    /// also the total TX launch power (mW).
    pub fn delivered_power_mw(&self) -> f64 {
        let t = match (&self.gff, self.gff_enabled) {
            (Some(gff), true) => gff.mean_transmission,
            _ => 1.0,
        };
        self.amplifier_output_mw() * t
    }

    fn span_losses_db(&self) -> Vec<f64> {
        self.grid
            .normalized_frequencies()
            .iter()
            .map(|&u| self.span_loss_db + self.span_tilt_db * (u - 0.5))
            .collect()
    }
}

/// Outcome of [`calibrate_link`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub conversion_efficiency: f64,
    pub mean_transmission: f64,
    pub rounds: usize,
    /// Per-channel gains at the design condition (dB).
    pub calibration_gain_db: Vec<f64>,
    pub calibration_inversion: f64,
    /// Worst per-amplifier net-gain ripple along the link under a flat TX
    /// load (dB), filter included when installed.
    pub flat_load_ripple_db: f64,
    pub ripple_warning: bool,
}

/// Resolve the amplifier conversion efficiency and, when the link uses
/// them, design and install the gain-flattening filters.
///
/// The filter is designed at the steady-state flat-load operating point:
/// every amplifier sees the previous site's delivered power, flat across
/// channels, attenuated by one span. The quoted wall-plug efficiency is
/// referenced after the filter, so the intrinsic conversion efficiency is
/// `wall_plug_efficiency / T̄` with `T̄` the filter's mean transmission.
/// The same amplifier hardware is assumed with the filter removed, so a
/// link without filters delivers the intrinsic efficiency.
pub fn calibrate_link(config: &mut LinkConfig) -> Result<CalibrationReport> {
    config.validate()?;
    let k_count = config.grid.channel_count;
    let span = span_factors(config);

    let mut mean_t = 1.0;
    let mut converged = None;
    let mut design = None;
    for round in 1..=CALIBRATION_ROUNDS {
        let eta = config.wall_plug_efficiency / mean_t;
        let raw = eta * config.supply_power_w * 1e3 / config.inline_edfa_count as f64;
        let per_channel = raw * mean_t / k_count as f64;
        let input = SpectrumState {
            signal_mw: span.iter().map(|s| per_channel * s).collect(),
            ase_psd: vec![0.0; k_count],
        };
        let (out, x) = amplify(&input, raw, &config.edfa, &config.grid).map_err(|e| {
            Error::Calibration(format!("design point not reachable: {e}"))
        })?;
        let gains: Vec<f64> = out
            .signal_mw
            .iter()
            .zip(&input.signal_mw)
            .map(|(o, i)| 10.0 * (o / i).log10())
            .collect();
        let gff = filter_for(&gains, &out, config);
        let next_t = gff.mean_transmission;
        let delta = (next_t - mean_t).abs();
        mean_t = next_t;
        design = Some((gains, x, gff));
        if delta <= CALIBRATION_TOL * mean_t {
            converged = Some(round);
            break;
        }
    }
    let rounds = converged.ok_or_else(|| {
        Error::Calibration(format!(
            "filter transmission did not settle within {CALIBRATION_ROUNDS} rounds"
        ))
    })?;
    let (gains, x, gff) = design.expect("at least one calibration round");

    config.conversion_efficiency = Some(config.wall_plug_efficiency / mean_t);
    config.gff = config.gff_enabled.then_some(gff);

    let flat = PowerProfile::flat(config.delivered_power_mw(), k_count)?;
    let run = propagate(&flat, config)?;
    let flat_load_ripple_db = run
        .stage_ripple_db
        .iter()
        .fold(0.0f64, |acc, &r| acc.max(r));
    let ripple_warning = config.gff_enabled && flat_load_ripple_db > RIPPLE_WARNING_DB;
    if ripple_warning {
        log::warn!(
            "flat-load ripple {flat_load_ripple_db:.2} dB exceeds {RIPPLE_WARNING_DB} dB with filters installed"
        );
    }

    Ok(CalibrationReport {
        conversion_efficiency: config.wall_plug_efficiency / mean_t,
        mean_transmission: mean_t,
        rounds,
        calibration_gain_db: gains,
        calibration_inversion: x,
        flat_load_ripple_db,
        ripple_warning,
    })
}

fn filter_for(gains_db: &[f64], design_output: &SpectrumState, config: &LinkConfig) -> GffState {
    let (lo, _) = min_max(gains_db);
    let excess_loss_db = config.gff_excess_loss_db;
    let attenuation_db: Vec<f64> = gains_db.iter().map(|g| g - lo + excess_loss_db).collect();
    let bw_mw = config.edfa.ase_bandwidth * 1e3;
    let (passed, offered) = design_output
        .signal_mw
        .iter()
        .zip(&design_output.ase_psd)
        .zip(&attenuation_db)
        .fold((0.0, 0.0), |(p, o), ((s, a), att)| {
            let power = s + a * bw_mw;
            (p + power * db_to_linear(-att), o + power)
        });
    GffState {
        attenuation_db,
        excess_loss_db,
        mean_transmission: passed / offered,
    }
}

fn span_factors(config: &LinkConfig) -> Vec<f64> {
    config
        .span_losses_db()
        .iter()
        .map(|&l| db_to_linear(-l))
        .collect()
}

/// Passive span: signal and ASE scale by the same factor, so SNR is
/// unchanged.
pub fn apply_span(input: &SpectrumState, loss_db: f64) -> Result<SpectrumState> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(Error::domain(format!("span loss must be nonnegative, got {loss_db}")));
    }
    let f = db_to_linear(-loss_db);
    Ok(scale(input, &vec![f; input.len()]))
}

fn scale(input: &SpectrumState, factors: &[f64]) -> SpectrumState {
    SpectrumState {
        signal_mw: input.signal_mw.iter().zip(factors).map(|(s, f)| s * f).collect(),
        ase_psd: input.ase_psd.iter().zip(factors).map(|(a, f)| a * f).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub rx: SpectrumState,
    pub snr: SnrVector,
    /// Highest per-channel signal power at any amplifier output (dBm).
    pub max_inline_dbm: f64,
    pub inversions: Vec<f64>,
    /// Net gain ripple of each amplifier site, filter included (dB).
    pub stage_ripple_db: Vec<f64>,
}

/// Send `tx` through the calibrated link.
pub fn propagate(tx: &PowerProfile, config: &LinkConfig) -> Result<Propagation> {
    config.validate()?;
    if !config.is_calibrated() {
        return Err(Error::domain("link must be calibrated before propagation"));
    }
    let grid = &config.grid;
    check_len("TX profile", grid.channel_count, tx.len())?;
    let delivered = config.delivered_power_mw();
    let total = tx.total_mw();
    if ((total - delivered) / delivered).abs() > TX_POWER_REL_TOL {
        return Err(Error::domain(format!(
            "TX total {total:.6e} mW does not match the delivered power {delivered:.6e} mW"
        )));
    }

    let tx_snr = db_to_linear(config.tx_snr_db);
    let signal_mw = tx.linear_mw();
    let ase_psd = signal_mw
        .iter()
        .map(|s| 2.0 * s * 1e-3 / (tx_snr * grid.symbol_rate))
        .collect();
    let mut state = SpectrumState { signal_mw, ase_psd };

    let span = span_factors(config);
    let filter = config.gff.as_ref().filter(|_| config.gff_enabled);
    let filter_t = filter.map(GffState::transmission);
    let target = config.amplifier_output_mw();

    let mut max_inline = f64::NEG_INFINITY;
    let mut inversions = Vec::with_capacity(config.inline_edfa_count);
    let mut stage_ripple_db = Vec::with_capacity(config.inline_edfa_count);
    for stage in 0..config.inline_edfa_count {
        let input = scale(&state, &span);
        let (out, x) = amplify(&input, target, &config.edfa, grid).map_err(|e| match e {
            Error::Numeric { what, .. } => Error::Numeric { stage, what },
            e => e.at_edfa(stage),
        })?;
        inversions.push(x);
        max_inline = out.signal_mw.iter().fold(max_inline, |m, &s| m.max(s));

        let net: Vec<f64> = out
            .signal_mw
            .iter()
            .zip(&input.signal_mw)
            .enumerate()
            .map(|(k, (o, i))| {
                let g = 10.0 * (o / i).log10();
                g - filter.map_or(0.0, |f| f.attenuation_db[k])
            })
            .collect();
        let (lo, hi) = min_max(&net);
        stage_ripple_db.push(hi - lo);

        state = match &filter_t {
            Some(t) => scale(&out, t),
            None => out,
        };
        if !state.is_finite() {
            return Err(Error::Numeric {
                stage,
                what: "non-finite spectrum after amplifier".into(),
            });
        }
    }
    for _ in config.inline_edfa_count..config.span_count {
        state = scale(&state, &span);
    }

    let snr = state.snr(grid)?;
    Ok(Propagation {
        rx: state,
        snr,
        max_inline_dbm: mw_to_dbm(max_inline)?,
        inversions,
        stage_ripple_db,
    })
}
