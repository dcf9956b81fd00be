//! Dense feed-forward network with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Sigmoid,
    Softplus,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Softplus => sigmoid(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Default for LayerSpec {
    fn default() -> Self {
        LayerSpec {
            widths: vec![40, 80, 120, 80],
            activations: vec![Activation::Sigmoid, Activation::Softplus, Activation::Linear],
        }
    }
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.iter().any(|&w| w == 0) {
            return Err(Error::domain("layer spec needs at least two nonzero widths"));
        }
        check_len("activations", self.widths.len() - 1, self.activations.len())
    }

    /// Shape constraint of the twin: K inputs and 2K outputs.
    pub fn validate_for_channels(&self, channels: usize) -> Result<()> {
        self.validate()?;
        check_len("input width", channels, self.widths[0])?;
        check_len("output width", 2 * channels, *self.widths.last().unwrap())
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn outputs(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Affine layer, weights row-major `[output][input]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Dense>,
}

/// Pre-activations and activations of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` is layer l's output.
    pub activations: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an input")
    }
}

/// Parameter gradients, laid out like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .widths
            .windows(2)
            .zip(&spec.activations)
            .map(|(w, &activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Dense {
                    inputs,
                    outputs,
                    activation,
                    weights,
                    biases: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Network { layers })
    }

    pub fn spec(&self) -> LayerSpec {
        let mut widths = vec![self.layers[0].inputs];
        widths.extend(self.layers.iter().map(|l| l.outputs));
        LayerSpec {
            widths,
            activations: self.layers.iter().map(|l| l.activation).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::domain("network has no layers"));
        }
        for pair in self.layers.windows(2) {
            check_len("layer chaining", pair[0].outputs, pair[1].inputs)?;
        }
        for l in &self.layers {
            check_len("weights", l.inputs * l.outputs, l.weights.len())?;
            check_len("biases", l.outputs, l.biases.len())?;
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::domain("network parameters must be finite"));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        for l in &self.layers {
            a = (0..l.outputs)
                .map(|o| l.activation.apply(dot(l.row(o), &a) + l.biases[o]))
                .collect();
        }
        a
    }

    pub fn forward_trace(&self, input: &[f64], trace: &mut Trace) {
        trace.activations.resize(self.layers.len() + 1, Vec::new());
        trace.pre.resize(self.layers.len(), Vec::new());
        trace.activations[0].clear();
        trace.activations[0].extend_from_slice(input);
        for (i, l) in self.layers.iter().enumerate() {
            let (prev, rest) = trace.activations.split_at_mut(i + 1);
            let a_in = &prev[i];
            let z = &mut trace.pre[i];
            let a_out = &mut rest[0];
            z.clear();
            a_out.clear();
            for o in 0..l.outputs {
                let zo = dot(l.row(o), a_in) + l.biases[o];
                z.push(zo);
                a_out.push(l.activation.apply(zo));
            }
        }
    }

    /// Backpropagate `d_output` (∂L/∂output) through a recorded pass.
    /// Parameter gradients are accumulated into `grads` when given; the
    /// gradient with respect to the input is returned.
    pub fn backward(
        &self,
        trace: &Trace,
        d_output: &[f64],
        mut grads: Option<&mut Gradients>,
    ) -> Vec<f64> {
        let mut delta: Vec<f64> = d_output.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[i];
            let a = &trace.activations[i + 1];
            for o in 0..l.outputs {
                delta[o] *= l.activation.derivative(z[o], a[o]);
            }
            let a_in = &trace.activations[i];
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g.weights[i];
                for o in 0..l.outputs {
                    axpy(delta[o], a_in, &mut gw[o * l.inputs..(o + 1) * l.inputs]);
                    g.biases[i][o] += delta[o];
                }
            }
            let mut prev = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                axpy(delta[o], l.row(o), &mut prev);
            }
            delta = prev;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn activations() {
        assert_eq!(Activation::Linear.apply(-3.0), -3.0);
        assert_relative_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_relative_eq!(Activation::Softplus.apply(0.7), (1.0 + 0.7f64.exp()).ln(), max_relative = 1e-15);
        assert_relative_eq!(Activation::Softplus.apply(-40.0), (-40.0f64).exp(), max_relative = 1e-9);
        assert_eq!(Activation::Softplus.apply(800.0), 800.0);
        assert_eq!(Activation::Sigmoid.apply(-800.0), 0.0);
    }

    #[test]
    fn single_softplus_unit() {
        let net = Network {
            layers: vec![Dense {
                inputs: 1,
                outputs: 1,
                activation: Activation::Softplus,
                weights: vec![1.0],
                biases: vec![0.0],
            }],
        };
        for x in [-3.0, 0.0, 0.5, 4.0] {
            assert_relative_eq!(net.forward(&[x])[0], (1.0 + f64::exp(x)).ln(), max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_weights_give_bias_map() {
        let spec = LayerSpec {
            widths: vec![3, 4, 2],
            activations: vec![Activation::Sigmoid, Activation::Linear],
        };
        let mut net = Network::init(&spec, &mut stream(0, 0)).unwrap();
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        net.layers[1].biases = vec![1.5, -2.0];
        assert_eq!(net.forward(&[9.0, -9.0, 1.0]), vec![1.5, -2.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let spec = LayerSpec {
            widths: vec![5, 7, 6, 4],
            activations: vec![Activation::Sigmoid, Activation::Softplus, Activation::Linear],
        };
        let net = Network::init(&spec, &mut stream(3, 0)).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0, -0.4];
        let w = [0.5, -1.0, 2.0, 0.25];
        let loss = |n: &Network, x: &[f64]| dot(&n.forward(x), &w);

        let mut trace = Trace::default();
        net.forward_trace(&x, &mut trace);
        let mut grads = Gradients::zeros_like(&net);
        let dx = net.backward(&trace, &w, Some(&mut grads));

        let h = 1e-6;
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x, x);
            xp[k] += h;
            xm[k] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert_relative_eq!(dx[k], fd, max_relative = 1e-7, epsilon = 1e-9);
        }
        for (li, idx) in [(0usize, 3usize), (1, 10), (2, 5)] {
            let mut np = net.clone();
            let mut nm = net.clone();
            np.layers[li].weights[idx] += h;
            nm.layers[li].weights[idx] -= h;
            let fd = (loss(&np, &x) - loss(&nm, &x)) / (2.0 * h);
            assert_relative_eq!(grads.weights[li][idx], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
        let mut np = net.clone();
        let mut nm = net.clone();
        np.layers[1].biases[2] += h;
        nm.layers[1].biases[2] -= h;
        let fd = (loss(&np, &x) - loss(&nm, &x)) / (2.0 * h);
        assert_relative_eq!(grads.biases[1][2], fd, max_relative = 1e-6, epsilon = 1e-9);
    }

    #[test]
    fn spec_shape_checks() {
        assert!(LayerSpec::default().validate_for_channels(40).is_ok());
        assert!(LayerSpec::default().validate_for_channels(20).is_err());
        let bad = LayerSpec {
            widths: vec![40, 80],
            activations: vec![],
        };
        assert!(bad.validate().is_err());
    }
}
