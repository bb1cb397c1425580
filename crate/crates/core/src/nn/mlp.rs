use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{LayerShape, ParamVector};
use crate::error::{Error, Result};

/// Dense network layout: `widths[0]` inputs, zero or more ReLU hidden layers,
/// linear output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    widths: Vec<usize>,
}

/// Activations recorded by a forward pass; `layers[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    layers: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("trace always has an input layer")
    }
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Shape("a network needs an input and an output width".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Shape("layer widths must be positive".into()));
        }
        Ok(Self { widths })
    }

    /// `input -> hidden... -> output`
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        self.widths
            .windows(2)
            .map(|w| LayerShape::dense(w[0], w[1]))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(LayerShape::len).sum()
    }

    /// Uniform Glorot initialisation, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let shapes = self.layer_shapes();
        let mut values = Vec::with_capacity(self.param_count());
        for s in &shapes {
            let bound = (6.0 / (s.inputs + s.outputs) as f64).sqrt();
            for _ in 0..s.inputs * s.outputs {
                values.push(rng.random_range(-bound..bound));
            }
            values.extend(std::iter::repeat_n(0.0, s.outputs));
        }
        ParamVector::from_values(&shapes, values).expect("init matches spec layout")
    }

    pub fn zeros(&self) -> ParamVector {
        ParamVector::zeros(&self.layer_shapes())
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        let shapes = params.shapes();
        let matches = shapes.len() + 1 == self.widths.len()
            && shapes
                .iter()
                .zip(self.widths.windows(2))
                .all(|(s, w)| *s == LayerShape::dense(w[0], w[1]));
        if !matches {
            return Err(Error::Shape(format!(
                "parameters ({} values) do not match network {:?}",
                params.len(),
                self.widths
            )));
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = self.forward_trace(params, input)?;
        Ok(trace.layers.pop().unwrap())
    }

    pub fn forward_trace(&self, params: &ParamVector, input: &[f64]) -> Result<Trace> {
        self.check_params(params)?;
        if input.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} but network expects {}",
                input.len(),
                self.input_width()
            )));
        }
        let n_layers = self.widths.len() - 1;
        let values = params.values();
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(input.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let weights = &values[offset..offset + fan_in * fan_out];
            let bias = &values[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let prev = &layers[l];
            let hidden = l + 1 < n_layers;
            let mut out = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut z = bias[o];
                for (w, a) in row.iter().zip(prev) {
                    z += w * a;
                }
                out.push(if hidden { z.max(0.0) } else { z });
            }
            layers.push(out);
        }
        Ok(Trace { layers })
    }

    /// Reverse pass for one sample. Adds `d loss / d params` into `grad`
    /// and returns `d loss / d input`.
    pub fn backward_accumulate(
        &self,
        params: &ParamVector,
        trace: &Trace,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if upstream.len() != self.output_width() {
            return Err(Error::Shape(format!(
                "upstream gradient width {} but network outputs {}",
                upstream.len(),
                self.output_width()
            )));
        }
        if grad.len() != params.len() {
            return Err(Error::Shape("gradient buffer length mismatch".into()));
        }
        let n_layers = self.widths.len() - 1;
        let values = params.values();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            offsets.push(offset);
            offset += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
        }

        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let base = offsets[l];
            let input = &trace.layers[l];
            let mut prev_delta = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let w_row = &values[base + o * fan_in..base + (o + 1) * fan_in];
                let g_row = &mut grad[base + o * fan_in..base + (o + 1) * fan_in];
                for i in 0..fan_in {
                    g_row[i] += d * input[i];
                    prev_delta[i] += d * w_row[i];
                }
                grad[base + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                for (pd, a) in prev_delta.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
            }
            delta = prev_delta;
        }
        Ok(delta)
    }

    /// Gradient of `upstream . f(input)` with respect to the parameters.
    pub fn backward(
        &self,
        params: &ParamVector,
        input: &[f64],
        upstream: &[f64],
    ) -> Result<ParamVector> {
        let trace = self.forward_trace(params, input)?;
        let mut grad = vec![0.0; params.len()];
        self.backward_accumulate(params, &trace, upstream, &mut grad)?;
        ParamVector::from_values(params.shapes(), grad)
    }
}
