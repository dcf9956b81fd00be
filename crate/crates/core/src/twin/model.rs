use serde::{Deserialize, Serialize};

use super::network::{LayerSpec, Network, Trace};
use crate::error::{check_len, Error, Result};
use crate::grid::PowerProfile;
use crate::metrics::check_eta;
use crate::units::{db_to_linear, DB_SLOPE};

/// Distance outside the training envelope that triggers a warning (dB).
pub const EXTRAPOLATION_MARGIN_DB: f64 = 3.0;

/// How TX powers are presented to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// Powers in dBm.
    Dbm,
    /// Powers in mW.
    LinearMw,
}

impl InputEncoding {
    fn encode(self, p_dbm: f64) -> f64 {
        match self {
            InputEncoding::Dbm => p_dbm,
            InputEncoding::LinearMw => db_to_linear(p_dbm),
        }
    }

    /// d encode / d P_dBm
    fn slope(self, p_dbm: f64) -> f64 {
        match self {
            InputEncoding::Dbm => 1.0,
            InputEncoding::LinearMw => DB_SLOPE * db_to_linear(p_dbm),
        }
    }
}

/// What the first K network outputs stand for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalOutput {
    /// Received signal power in dBm.
    Absolute,
    /// End-to-end channel gain in dB; received power is TX power plus gain.
    GainDb,
}

/// Per-feature affine normalization `z = (x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Column statistics; degenerate columns get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let width = rows[0].len();
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + sd) && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    fn validate(&self, what: &'static str, width: usize) -> Result<()> {
        check_len(what, width, self.mean.len())?;
        check_len(what, width, self.std.len())?;
        if self.mean.iter().any(|m| !m.is_finite())
            || self.std.iter().any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(Error::domain(format!(
                "{what}: means must be finite and deviations positive"
            )));
        }
        Ok(())
    }
}

/// The digital twin: TX profile in, received signal and noise powers out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinModel {
    pub layer_spec: LayerSpec,
    pub input_encoding: InputEncoding,
    pub signal_output: SignalOutput,
    pub network: Network,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
    /// Per-channel `[min, max]` of training TX powers (dBm).
    pub training_envelope: Vec<[f64; 2]>,
    /// Digest of the training configuration that produced the model.
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub channel: usize,
    /// How far outside the envelope the input lies (dB).
    pub excess_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub signal_dbm: Vec<f64>,
    pub noise_dbm: Vec<f64>,
    /// Worst envelope violation beyond the margin, if any.
    pub extrapolation: Option<Extrapolation>,
}

impl Prediction {
    pub fn snr_db(&self) -> Vec<f64> {
        self.signal_dbm
            .iter()
            .zip(&self.noise_dbm)
            .map(|(s, n)| s - n)
            .collect()
    }

    pub fn snr_linear(&self) -> Vec<f64> {
        self.snr_db().into_iter().map(db_to_linear).collect()
    }
}

/// Capacity objective `2 R_s Σ log2(1 + η SNR_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityObjective {
    pub symbol_rate: f64,
    pub eta: f64,
}

impl TwinModel {
    pub fn channels(&self) -> usize {
        self.layer_spec.inputs()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.network.spec() != self.layer_spec {
            return Err(Error::domain("network does not match its layer spec"));
        }
        let k = self.channels();
        self.layer_spec.validate_for_channels(k)?;
        self.input_norm.validate("input normalization", k)?;
        self.output_norm.validate("output normalization", 2 * k)?;
        check_len("training envelope", k, self.training_envelope.len())?;
        if self
            .training_envelope
            .iter()
            .any(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::domain("training envelope must satisfy min <= max"));
        }
        Ok(())
    }

    pub fn encode_input(&self, tx_dbm: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = tx_dbm.iter().map(|&p| self.input_encoding.encode(p)).collect();
        self.input_norm.normalize(&raw)
    }

    /// Normalized training targets for one row.
    pub fn encode_target(&self, tx_dbm: &[f64], signal_dbm: &[f64], noise_dbm: &[f64]) -> Vec<f64> {
        self.output_norm
            .normalize(&raw_target(self.signal_output, tx_dbm, signal_dbm, noise_dbm))
    }

    fn decode(&self, tx_dbm: &[f64], out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.channels();
        let y = self.output_norm.denormalize(out);
        let mut signal = y[..k].to_vec();
        if self.signal_output == SignalOutput::GainDb {
            signal.iter_mut().zip(tx_dbm).for_each(|(s, p)| *s += p);
        }
        (signal, y[k..].to_vec())
    }

    fn extrapolation(&self, tx_dbm: &[f64]) -> Option<Extrapolation> {
        tx_dbm
            .iter()
            .zip(&self.training_envelope)
            .enumerate()
            .map(|(k, (&p, &[lo, hi]))| (k, (lo - p).max(p - hi)))
            .filter(|&(_, excess)| excess > EXTRAPOLATION_MARGIN_DB)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(channel, excess_db)| Extrapolation { channel, excess_db })
    }

    fn check_input(&self, tx: &PowerProfile) -> Result<()> {
        check_len("twin input", self.channels(), tx.len())
    }

    pub fn predict(&self, tx: &PowerProfile) -> Result<Prediction> {
        self.check_input(tx)?;
        let p = tx.powers_dbm();
        let out = self.network.forward(&self.encode_input(p));
        let (signal_dbm, noise_dbm) = self.decode(p, &out);
        let extrapolation = self.extrapolation(p);
        if let Some(e) = &extrapolation {
            log::warn!(
                "twin input channel {} lies {:.2} dB outside the training envelope",
                e.channel,
                e.excess_db
            );
        }
        Ok(Prediction {
            signal_dbm,
            noise_dbm,
            extrapolation,
        })
    }

    /// Predicted capacity and its exact gradient with respect to the TX
    /// powers (bit/s per dB).
    pub fn capacity_gradient(
        &self,
        tx: &PowerProfile,
        objective: &CapacityObjective,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_input(tx)?;
        check_eta(objective.eta)?;
        let k = self.channels();
        let p = tx.powers_dbm();
        let mut trace = Trace::default();
        self.network.forward_trace(&self.encode_input(p), &mut trace);
        let (signal, noise) = self.decode(p, trace.output());

        let scale = 2.0 * objective.symbol_rate / std::f64::consts::LN_2;
        let mut capacity = 0.0;
        // ∂C/∂S̃_k; ∂C/∂Ñ_k is its negative.
        let mut d_signal = vec![0.0; k];
        for i in 0..k {
            let snr = objective.eta * db_to_linear(signal[i] - noise[i]);
            capacity += snr.ln_1p();
            d_signal[i] = scale * DB_SLOPE * snr / (1.0 + snr);
        }
        capacity *= scale;

        let std = &self.output_norm.std;
        let mut d_out = vec![0.0; 2 * k];
        for i in 0..k {
            d_out[i] = d_signal[i] * std[i];
            d_out[k + i] = -d_signal[i] * std[k + i];
        }
        let d_in = self.network.backward(&trace, &d_out, None);
        let grad = (0..k)
            .map(|i| {
                let through_net =
                    d_in[i] * self.input_encoding.slope(p[i]) / self.input_norm.std[i];
                let skip = match self.signal_output {
                    SignalOutput::GainDb => d_signal[i],
                    SignalOutput::Absolute => 0.0,
                };
                through_net + skip
            })
            .collect();
        Ok((capacity, grad))
    }

    pub fn input_gradient(&self, tx: &PowerProfile, objective: &CapacityObjective) -> Result<Vec<f64>> {
        self.capacity_gradient(tx, objective).map(|(_, g)| g)
    }

    /// Predicted capacity (bit/s).
    pub fn capacity(&self, tx: &PowerProfile, objective: &CapacityObjective) -> Result<f64> {
        check_eta(objective.eta)?;
        let pred = self.predict(tx)?;
        Ok(crate::metrics::capacity_unchecked(
            &pred.snr_linear(),
            objective.symbol_rate,
            objective.eta,
        ))
    }
}

pub(crate) fn raw_target(
    mode: SignalOutput,
    tx_dbm: &[f64],
    signal_dbm: &[f64],
    noise_dbm: &[f64],
) -> Vec<f64> {
    let mut t: Vec<f64> = match mode {
        SignalOutput::Absolute => signal_dbm.to_vec(),
        SignalOutput::GainDb => signal_dbm.iter().zip(tx_dbm).map(|(s, p)| s - p).collect(),
    };
    t.extend_from_slice(noise_dbm);
    t
}
