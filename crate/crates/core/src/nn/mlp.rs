use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{Matrix, ParamTensor};
use crate::error::{config_err, shape_err, Result};
use crate::rng::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    fn apply_row(self, row: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => row.iter_mut().for_each(|v| *v = libm::tanh(*v)),
            Activation::Sigmoid => row.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => super::categorical::softmax_in_place(row),
        }
    }

    /// Turns a gradient w.r.t. the activation output into one w.r.t. its
    /// input, given the stored output `y`.
    fn backprop_row(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => grad
                .iter_mut()
                .zip(y)
                .for_each(|(g, &y)| *g *= 1.0 - y * y),
            Activation::Sigmoid => grad
                .iter_mut()
                .zip(y)
                .for_each(|(g, &y)| *g *= y * (1.0 - y)),
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(y).map(|(g, y)| g * y).sum();
                grad.iter_mut()
                    .zip(y)
                    .for_each(|(g, &y)| *g = y * (*g - dot));
            }
        }
    }
}

/// Logistic function, evaluated without overflow for either sign.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Layer widths from input to output; every hidden layer uses `hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl MlpSpec {
    pub fn new(widths: &[usize], output: Activation) -> Self {
        Self {
            widths: widths.to_vec(),
            hidden: Activation::Tanh,
            output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(config_err("an MLP needs input, at least one hidden, and output widths"));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(config_err("MLP widths must be >= 1"));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Gradients aligned with [`Mlp::params`].
pub type Gradients = Vec<Vec<f64>>;

/// Parameters are stored as `[w0, b0, w1, b1, ...]`, with weight `l`
/// shaped `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<ParamTensor>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardRecord {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Matrix>,
}

impl ForwardRecord {
    pub fn output(&self) -> &Matrix {
        self.activations.last().unwrap()
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }
}

/// Xavier-uniform weights, zero biases. Tensor names are `{prefix}.l{i}.weight`
/// and `{prefix}.l{i}.bias`.
pub fn init_mlp(spec: &MlpSpec, seed: u64, prefix: &str) -> Result<Mlp> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut params = Vec::with_capacity(2 * spec.num_layers());
    for (l, w) in spec.widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let values = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        params.push(ParamTensor {
            name: format!("{prefix}.l{l}.weight"),
            shape: vec![fan_out, fan_in],
            values,
        });
        params.push(ParamTensor::zeros(format!("{prefix}.l{l}.bias"), vec![fan_out]));
    }
    Ok(Mlp {
        spec: spec.clone(),
        params,
    })
}

impl Mlp {
    /// Rebuilds a network from stored tensors, checking every shape.
    pub fn from_params(spec: &MlpSpec, params: Vec<ParamTensor>) -> Result<Mlp> {
        spec.validate()?;
        if params.len() != 2 * spec.num_layers() {
            return Err(shape_err(format!(
                "expected {} tensors, got {}",
                2 * spec.num_layers(),
                params.len()
            )));
        }
        for (l, w) in spec.widths.windows(2).enumerate() {
            let (weight, bias) = (&params[2 * l], &params[2 * l + 1]);
            if weight.shape != [w[1], w[0]] || weight.values.len() != w[0] * w[1] {
                return Err(shape_err(format!("{}: bad shape {:?}", weight.name, weight.shape)));
            }
            if bias.shape != [w[1]] || bias.values.len() != w[1] {
                return Err(shape_err(format!("{}: bad shape {:?}", bias.name, bias.shape)));
            }
        }
        Ok(Mlp {
            spec: spec.clone(),
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[ParamTensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<ParamTensor> {
        self.params
    }

    pub fn zero_grads(&self) -> Gradients {
        self.params.iter().map(|p| vec![0.0; p.len()]).collect()
    }

    pub fn weight(&self, layer: usize) -> &ParamTensor {
        &self.params[2 * layer]
    }

    pub fn bias(&self, layer: usize) -> &ParamTensor {
        &self.params[2 * layer + 1]
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.spec.num_layers() {
            self.spec.output
        } else {
            self.spec.hidden
        }
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, ForwardRecord)> {
        if input.cols != self.spec.input_width() {
            return Err(shape_err(format!(
                "input width {} but network expects {}",
                input.cols,
                self.spec.input_width()
            )));
        }
        let mut activations = Vec::with_capacity(self.spec.widths.len());
        activations.push(input.clone());
        for l in 0..self.spec.num_layers() {
            let next = self.layer_forward(l, activations.last().unwrap());
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, ForwardRecord { activations }))
    }

    /// Forward pass for a single example without keeping a record.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.spec.input_width() {
            return Err(shape_err(format!(
                "input width {} but network expects {}",
                input.len(),
                self.spec.input_width()
            )));
        }
        let mut x = input.to_vec();
        for l in 0..self.spec.num_layers() {
            let w = &self.params[2 * l];
            let b = &self.params[2 * l + 1].values;
            let (out_w, in_w) = (w.shape[0], w.shape[1]);
            let mut y = b.clone();
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &w.values[o * in_w..(o + 1) * in_w];
                *yo += dot(row, &x);
            }
            debug_assert_eq!(y.len(), out_w);
            self.activation_of(l).apply_row(&mut y);
            x = y;
        }
        Ok(x)
    }

    fn layer_forward(&self, l: usize, x: &Matrix) -> Matrix {
        let w = &self.params[2 * l];
        let b = &self.params[2 * l + 1].values;
        let (out_w, in_w) = (w.shape[0], w.shape[1]);
        let act = self.activation_of(l);
        let mut y = Matrix::zeros(x.rows, out_w);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for o in 0..out_w {
                yr[o] = b[o] + dot(&w.values[o * in_w..(o + 1) * in_w], xr);
            }
            act.apply_row(yr);
        }
        y
    }

    /// Reverse-mode pass. Returns parameter gradients and the gradient with
    /// respect to the input batch.
    pub fn backward(&self, record: &ForwardRecord, grad_output: &Matrix) -> Result<(Gradients, Matrix)> {
        let mut grads = self.zero_grads();
        let input_grad = self.backward_accumulate(record, grad_output, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`Mlp::backward`] but adds into existing gradient buffers.
    pub fn backward_accumulate(
        &self,
        record: &ForwardRecord,
        grad_output: &Matrix,
        grads: &mut Gradients,
    ) -> Result<Matrix> {
        let layers = self.spec.num_layers();
        if record.activations.len() != layers + 1 {
            return Err(shape_err("forward record does not match this network"));
        }
        for (l, a) in record.activations.iter().enumerate() {
            if a.cols != self.spec.widths[l] {
                return Err(shape_err("forward record does not match this network"));
            }
        }
        let out = record.output();
        if grad_output.rows != out.rows || grad_output.cols != out.cols {
            return Err(shape_err(format!(
                "output gradient is {}x{}, forward output was {}x{}",
                grad_output.rows, grad_output.cols, out.rows, out.cols
            )));
        }
        if grads.len() != self.params.len()
            || grads.iter().zip(&self.params).any(|(g, p)| g.len() != p.len())
        {
            return Err(shape_err("gradient buffers do not match this network"));
        }

        let mut delta = grad_output.clone();
        for l in (0..layers).rev() {
            let y = &record.activations[l + 1];
            let x = &record.activations[l];
            let act = self.activation_of(l);
            for r in 0..delta.rows {
                act.backprop_row(y.row(r), delta.row_mut(r));
            }
            let w = &self.params[2 * l];
            let (out_w, in_w) = (w.shape[0], w.shape[1]);
            let (gw_slot, rest) = grads.split_at_mut(2 * l + 1);
            let gw = &mut gw_slot[2 * l];
            let gb = &mut rest[0];
            let mut dx = Matrix::zeros(x.rows, in_w);
            for r in 0..x.rows {
                let dr = delta.row(r);
                let xr = x.row(r);
                let dxr = dx.row_mut(r);
                for o in 0..out_w {
                    let d = dr[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let wrow = &w.values[o * in_w..(o + 1) * in_w];
                    let grow = &mut gw[o * in_w..(o + 1) * in_w];
                    for i in 0..in_w {
                        grow[i] += d * xr[i];
                        dxr[i] += d * wrow[i];
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
