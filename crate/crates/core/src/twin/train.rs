//! Mini-batch training with adaptive moment estimation and early stopping
//! on validation error.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use super::model::{InputEncoding, Normalizer, SignalOutput, TwinModel};
use super::network::{Gradients, LayerSpec, Network, Trace};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub input_encoding: InputEncoding,
    pub signal_output: SignalOutput,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 2000,
            patience: 100,
            input_encoding: InputEncoding::LinearMw,
            signal_output: SignalOutput::GainDb,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0;
        if !ok {
            return Err(Error::Config("invalid training settings".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_mse: Vec<f64>,
    pub validation_mse: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

impl TrainingReport {
    pub fn best_validation_mse(&self) -> f64 {
        self.validation_mse[self.best_epoch]
    }

    pub fn best_train_mse(&self) -> f64 {
        self.train_mse[self.best_epoch]
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(net: &Network, s: &TrainSettings) -> Self {
        Adam {
            lr: s.learning_rate,
            beta1: s.beta1,
            beta2: s.beta2,
            epsilon: s.epsilon,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    fn update(&mut self, net: &mut Network, g: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        let apply = |theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            apply(&mut layer.weights, &g.weights[l], &mut self.m.weights[l], &mut self.v.weights[l]);
            apply(&mut layer.biases, &g.biases[l], &mut self.m.biases[l], &mut self.v.biases[l]);
        }
    }
}

struct Encoded {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

fn mse(net: &Network, data: &Encoded) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, t) in data.inputs.iter().zip(&data.targets) {
        let y = net.forward(x);
        total += y.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>();
        count += t.len();
    }
    total / count as f64
}

/// FNV-1a over the training configuration, as a hex string.
fn fingerprint(spec: &LayerSpec, settings: &TrainSettings, seed: u64, rows: usize) -> String {
    let text = format!(
        "{}|{}|{seed}|{rows}",
        serde_json::to_string(spec).unwrap_or_default(),
        serde_json::to_string(settings).unwrap_or_default()
    );
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Fit a twin to `dataset`. Normalization statistics and the input
/// envelope come from the training split only.
pub fn train(
    dataset: &Dataset,
    layer_spec: &LayerSpec,
    settings: &TrainSettings,
    seed: u64,
) -> Result<(TwinModel, TrainingReport)> {
    dataset.validate()?;
    settings.validate()?;
    layer_spec.validate_for_channels(dataset.channels)?;
    let train_rows: Vec<_> = dataset.split(Split::Train).collect();
    let val_rows: Vec<_> = dataset.split(Split::Validation).collect();
    if train_rows.is_empty() || val_rows.is_empty() {
        return Err(Error::Data(format!(
            "both splits need rows (train {}, validation {})",
            train_rows.len(),
            val_rows.len()
        )));
    }
    if train_rows.len() < 10 || val_rows.len() < 10 {
        log::warn!(
            "small training set: {} train / {} validation rows",
            train_rows.len(),
            val_rows.len()
        );
    }

    let k = dataset.channels;
    let encode_inputs = |rows: &[&super::dataset::DatasetRow]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.tx_dbm
                    .iter()
                    .map(|&p| match settings.input_encoding {
                        InputEncoding::Dbm => p,
                        InputEncoding::LinearMw => crate::units::dbm_to_mw(p),
                    })
                    .collect()
            })
            .collect()
    };
    let raw_targets = |rows: &[&super::dataset::DatasetRow]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                super::model::raw_target(settings.signal_output, &r.tx_dbm, &r.signal_dbm, &r.noise_dbm)
            })
            .collect()
    };
    let train_x = encode_inputs(&train_rows);
    let train_y = raw_targets(&train_rows);
    let input_norm = Normalizer::fit(&train_x);
    let output_norm = Normalizer::fit(&train_y);

    let mut envelope = vec![[f64::INFINITY, f64::NEG_INFINITY]; k];
    for r in &train_rows {
        for (e, &p) in envelope.iter_mut().zip(&r.tx_dbm) {
            e[0] = e[0].min(p);
            e[1] = e[1].max(p);
        }
    }

    let train_set = Encoded {
        inputs: train_x.iter().map(|x| input_norm.normalize(x)).collect(),
        targets: train_y.iter().map(|y| output_norm.normalize(y)).collect(),
    };
    let val_set = Encoded {
        inputs: encode_inputs(&val_rows)
            .iter()
            .map(|x| input_norm.normalize(x))
            .collect(),
        targets: raw_targets(&val_rows)
            .iter()
            .map(|y| output_norm.normalize(y))
            .collect(),
    };

    let mut net = Network::init(layer_spec, &mut stream(derive_seed(seed, 1), 0))?;
    let mut shuffle_rng = stream(derive_seed(seed, 2), 0);
    let mut adam = Adam::new(&net, settings);
    let mut grads = Gradients::zeros_like(&net);
    let mut trace = Trace::default();
    let mut order: Vec<usize> = (0..train_set.inputs.len()).collect();
    let outputs = layer_spec.outputs();

    let mut report = TrainingReport {
        train_mse: Vec::new(),
        validation_mse: Vec::new(),
        best_epoch: 0,
        epochs_run: 0,
    };
    let mut best = (f64::INFINITY, net.clone());
    for epoch in 0..settings.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(settings.batch_size) {
            grads.clear();
            let scale = 2.0 / (batch.len() * outputs) as f64;
            for &i in batch {
                net.forward_trace(&train_set.inputs[i], &mut trace);
                let d_out: Vec<f64> = trace
                    .output()
                    .iter()
                    .zip(&train_set.targets[i])
                    .map(|(y, t)| scale * (y - t))
                    .collect();
                net.backward(&trace, &d_out, Some(&mut grads));
            }
            adam.update(&mut net, &grads);
        }
        let tr = mse(&net, &train_set);
        let va = mse(&net, &val_set);
        if !tr.is_finite() || !va.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        report.train_mse.push(tr);
        report.validation_mse.push(va);
        report.epochs_run = epoch + 1;
        if epoch % 100 == 0 {
            log::debug!("epoch {epoch}: train {tr:.4e}, validation {va:.4e}");
        }
        if va < best.0 {
            best = (va, net.clone());
            report.best_epoch = epoch;
        } else if epoch - report.best_epoch >= settings.patience {
            break;
        }
    }

    let model = TwinModel {
        layer_spec: layer_spec.clone(),
        input_encoding: settings.input_encoding,
        signal_output: settings.signal_output,
        network: best.1,
        input_norm,
        output_norm,
        training_envelope: envelope,
        fingerprint: fingerprint(layer_spec, settings, seed, dataset.len()),
    };
    model.validate()?;
    Ok((model, report))
}
