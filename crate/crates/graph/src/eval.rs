use std::collections::BTreeMap;

use crate::graph::{ComputationGraph, Op};
use crate::{GraphError, Tensor};

/// Activations of one node for a whole mini-batch, sample-major.
struct Batch {
    per_sample: usize,
    data: Vec<f32>,
}

impl Batch {
    fn sample(&self, b: usize) -> &[f32] {
        &self.data[b * self.per_sample..(b + 1) * self.per_sample]
    }
}

impl ComputationGraph {
    /// Evaluates `output` for a single input.
    pub fn eval(&self, input: &Tensor, output: &str) -> Result<Tensor, GraphError> {
        let mut out = self.eval_batch(std::slice::from_ref(input), 1, output)?;
        Ok(out.pop().expect("one output per input"))
    }

    /// Evaluates `output` for every input, `mini_batch` samples per kernel
    /// invocation. Results are in input order and bitwise equal to per-item
    /// [`eval`](Self::eval) calls.
    pub fn eval_batch(
        &self,
        inputs: &[Tensor],
        mini_batch: usize,
        output: &str,
    ) -> Result<Vec<Tensor>, GraphError> {
        if mini_batch == 0 {
            return Err(GraphError::Invalid(
                "mini-batch size must be at least 1".into(),
            ));
        }
        let plan = self.ancestors(output)?;
        for input in inputs {
            self.check_input(input)?;
        }
        let target = self.index[output];
        let shape = self.shapes[target].clone();
        let mut results = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(mini_batch) {
            let values = self.forward(chunk, &plan)?;
            let out = values[target].as_ref().expect("target evaluated");
            for b in 0..chunk.len() {
                results.push(Tensor::new(shape.clone(), out.sample(b).to_vec())?);
            }
        }
        Ok(results)
    }

    /// Every node's value for one input, as computed by a full forward pass.
    pub fn eval_all(&self, input: &Tensor) -> Result<BTreeMap<String, Tensor>, GraphError> {
        self.check_input(input)?;
        let plan: Vec<usize> = (0..self.nodes.len()).collect();
        let values = self.forward(std::slice::from_ref(input), &plan)?;
        let mut out = BTreeMap::new();
        for (i, value) in values.into_iter().enumerate() {
            let batch = value.expect("all nodes evaluated");
            out.insert(
                self.nodes[i].name.clone(),
                Tensor::new(self.shapes[i].clone(), batch.data)?,
            );
        }
        Ok(out)
    }

    fn check_input(&self, input: &Tensor) -> Result<(), GraphError> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(GraphError::ShapeMismatch {
                expected: self.input_shape.clone(),
                actual: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn forward(&self, inputs: &[Tensor], plan: &[usize]) -> Result<Vec<Option<Batch>>, GraphError> {
        let n = inputs.len();
        let mut values: Vec<Option<Batch>> = (0..self.nodes.len()).map(|_| None).collect();
        for &i in plan {
            let node = &self.nodes[i];
            let out_shape = &self.shapes[i];
            let per_sample: usize = out_shape.iter().product();
            let arg = |k: usize| {
                values[self.index[&node.inputs[k]]]
                    .as_ref()
                    .expect("inputs precede their consumers")
            };
            let arg_shape = |k: usize| self.shapes[self.index[&node.inputs[k]]].as_slice();
            let weight = |k: usize| &self.blocks[self.block_index[&node.weights[k]]].data[..];
            let mut data = vec![0.0f32; per_sample * n];
            match node.op {
                Op::Input => {
                    for (b, input) in inputs.iter().enumerate() {
                        data[b * per_sample..(b + 1) * per_sample].copy_from_slice(input.data());
                    }
                }
                Op::Relu => {
                    for (o, &v) in data.iter_mut().zip(&arg(0).data) {
                        *o = if v > 0.0 { v } else { 0.0 };
                    }
                }
                Op::Flatten => data.copy_from_slice(&arg(0).data),
                Op::Add => {
                    let (a, c) = (arg(0), arg(1));
                    for ((o, &x), &y) in data.iter_mut().zip(&a.data).zip(&c.data) {
                        *o = x + y;
                    }
                }
                Op::Softmax => {
                    let src = arg(0);
                    let axis = *out_shape.last().expect("non-empty shape");
                    for (o, x) in data.chunks_mut(axis).zip(src.data.chunks(axis)) {
                        softmax(x, o);
                    }
                }
                Op::Dense { out_units } => {
                    let src = arg(0);
                    for b in 0..n {
                        dense(
                            src.sample(b),
                            weight(0),
                            weight(1),
                            out_units,
                            &mut data[b * per_sample..(b + 1) * per_sample],
                        );
                    }
                }
                Op::Conv2d {
                    kernel_h,
                    kernel_w,
                    out_channels,
                    stride,
                } => {
                    let src = arg(0);
                    let geom = ConvGeometry {
                        in_shape: arg_shape(0),
                        out_shape,
                        kernel_h,
                        kernel_w,
                        stride,
                    };
                    debug_assert_eq!(out_shape[2], out_channels);
                    for b in 0..n {
                        conv2d(
                            src.sample(b),
                            weight(0),
                            weight(1),
                            &geom,
                            &mut data[b * per_sample..(b + 1) * per_sample],
                        );
                    }
                }
                Op::MaxPool2d {
                    pool_h,
                    pool_w,
                    stride,
                } => {
                    let src = arg(0);
                    let geom = ConvGeometry {
                        in_shape: arg_shape(0),
                        out_shape,
                        kernel_h: pool_h,
                        kernel_w: pool_w,
                        stride,
                    };
                    for b in 0..n {
                        maxpool2d(
                            src.sample(b),
                            &geom,
                            &mut data[b * per_sample..(b + 1) * per_sample],
                        );
                    }
                }
            }
            values[i] = Some(Batch { per_sample, data });
        }
        Ok(values)
    }
}

fn softmax(x: &[f32], out: &mut [f32]) {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `out[o] = (sum_i x[i] * kernel[i][o]) + bias[o]`, summing over `i` in order.
fn dense(x: &[f32], kernel: &[f32], bias: &[f32], out_units: usize, out: &mut [f32]) {
    out.fill(0.0);
    for (i, &xi) in x.iter().enumerate() {
        let row = &kernel[i * out_units..(i + 1) * out_units];
        for (acc, &w) in out.iter_mut().zip(row) {
            *acc += xi * w;
        }
    }
    for (acc, &b) in out.iter_mut().zip(bias) {
        *acc += b;
    }
}

struct ConvGeometry<'a> {
    in_shape: &'a [usize],
    out_shape: &'a [usize],
    kernel_h: usize,
    kernel_w: usize,
    stride: usize,
}

/// Valid convolution over an HxWxC input with a `[kh, kw, c, oc]` kernel.
/// Each output accumulates its window in `(ky, kx, ic)` order.
fn conv2d(x: &[f32], kernel: &[f32], bias: &[f32], g: &ConvGeometry<'_>, out: &mut [f32]) {
    let (in_w, in_c) = (g.in_shape[1], g.in_shape[2]);
    let (out_h, out_w, out_c) = (g.out_shape[0], g.out_shape[1], g.out_shape[2]);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let acc = &mut out[(oy * out_w + ox) * out_c..(oy * out_w + ox + 1) * out_c];
            acc.fill(0.0);
            for ky in 0..g.kernel_h {
                let row = (oy * g.stride + ky) * in_w;
                for kx in 0..g.kernel_w {
                    let base = (row + ox * g.stride + kx) * in_c;
                    for ic in 0..in_c {
                        let v = x[base + ic];
                        let k = ((ky * g.kernel_w + kx) * in_c + ic) * out_c;
                        for (a, &w) in acc.iter_mut().zip(&kernel[k..k + out_c]) {
                            *a += v * w;
                        }
                    }
                }
            }
            for (a, &b) in acc.iter_mut().zip(bias) {
                *a += b;
            }
        }
    }
}

fn maxpool2d(x: &[f32], g: &ConvGeometry<'_>, out: &mut [f32]) {
    let (in_w, c) = (g.in_shape[1], g.in_shape[2]);
    let (out_h, out_w) = (g.out_shape[0], g.out_shape[1]);
    for oy in 0..out_h {
        for ox in 0..out_w {
            for ch in 0..c {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..g.kernel_h {
                    for kx in 0..g.kernel_w {
                        let v = x[((oy * g.stride + ky) * in_w + ox * g.stride + kx) * c + ch];
                        if v > m {
                            m = v;
                        }
                    }
                }
                out[(oy * out_w + ox) * c + ch] = m;
            }
        }
    }
}
