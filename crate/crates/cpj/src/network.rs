use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salbench_core::preprocess::{minmax_normalize, prepare_pair, resize_bilinear};
use salbench_core::SaliencyMap;

use crate::config::{CpjConfig, InitScheme, BLOCK_DEPTHS, INPUT_CHANNELS};
use crate::error::{CpjError, Result};
use crate::kernels;

/// Two-channel network input `[esm; gsm]`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CpjInput {
    res: usize,
    data: Vec<f64>,
}

impl CpjInput {
    /// Resizes the estimate onto the ground truth, min-max normalizes both,
    /// then resamples the pair to `res x res`.
    pub fn prepare(esm: &SaliencyMap, gsm: &SaliencyMap, res: usize) -> Result<Self> {
        let pair = prepare_pair(esm, gsm)?;
        let e = minmax_normalize(&resize_bilinear(pair.esm(), res, res)?);
        let g = minmax_normalize(&resize_bilinear(pair.gsm(), res, res)?);
        Self::from_prepared(&e, &g)
    }

    /// Stacks maps that are already square, equal-sized and normalized.
    pub fn from_prepared(esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<Self> {
        let res = gsm.width();
        for dims in [esm.dims(), gsm.dims()] {
            if dims != (res, res) {
                return Err(CpjError::DimensionMismatch {
                    expected: (res, res),
                    found: dims,
                });
            }
        }
        let mut data = Vec::with_capacity(2 * res * res);
        data.extend_from_slice(esm.values());
        data.extend_from_slice(gsm.values());
        Ok(CpjInput { res, data })
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    /// Weights get weight decay; biases do not.
    pub is_weight: bool,
}

impl ParamBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone)]
struct Conv {
    c_in: usize,
    c_out: usize,
    side: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct Dense {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
    relu: bool,
}

#[derive(Debug, Clone)]
enum Op {
    Conv(Conv),
    Pool { channels: usize, side: usize },
    Dense(Dense),
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Trace {
    /// `acts[0]` is the input, `acts[k + 1]` the output of op `k`.
    pub acts: Vec<Vec<f64>>,
    /// Argmax indices of each pooling op, empty for other ops.
    pub argmax: Vec<Vec<u32>>,
    pub score: f64,
}

/// One stream of the two-stream network. Both streams evaluate this single
/// parameter set, so the pair difference is exactly antisymmetric.
#[derive(Debug, Clone)]
pub struct CpjNetwork {
    config: CpjConfig,
    params: Vec<f64>,
    blocks: Vec<ParamBlock>,
    ops: Vec<Op>,
}

impl PartialEq for CpjNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

impl CpjNetwork {
    /// Seeded uniform initialization (Glorot by default), zero biases. Every
    /// weight is representable in f32 so checkpoints are lossless.
    pub fn init(config: &CpjConfig) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let fans: Vec<(usize, usize)> = net
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Conv(c) => Some((c.c_in * 9, c.c_out * 9)),
                Op::Dense(d) => Some((d.n_in, d.n_out)),
                Op::Pool { .. } => None,
            })
            .collect();
        let weights = net.blocks.iter().filter(|b| b.is_weight).cloned().collect::<Vec<_>>();
        for (block, (fan_in, fan_out)) in weights.iter().zip(fans) {
            let limit = match config.init {
                InitScheme::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                InitScheme::HeUniform => (6.0 / fan_in as f64).sqrt(),
            };
            for p in &mut net.params[block.range()] {
                *p = round_f32(rng.random_range(-limit..limit));
            }
        }
        Ok(net)
    }

    /// Builds the layer layout with every parameter zero.
    pub fn zeros(config: &CpjConfig) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::new();
        let mut ops = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, len: usize, is_weight: bool| {
            blocks.push(ParamBlock {
                name,
                offset,
                len,
                is_weight,
            });
            offset += len;
            offset - len
        };
        let mut c_in = INPUT_CHANNELS;
        let mut side = config.input_res;
        for (bi, (&depth, &c_out)) in BLOCK_DEPTHS.iter().zip(config.channels().iter()).enumerate() {
            for li in 0..depth {
                let name = format!("conv{}_{}", bi + 1, li + 1);
                let w = push(format!("{name}.weight"), c_out * c_in * 9, true);
                let b = push(format!("{name}.bias"), c_out, false);
                ops.push(Op::Conv(Conv {
                    c_in,
                    c_out,
                    side,
                    w,
                    b,
                }));
                c_in = c_out;
            }
            ops.push(Op::Pool { channels: c_in, side });
            side /= 2;
        }
        let mut n_in = c_in * side * side;
        for (i, &n_out) in config.fc_dims.iter().enumerate() {
            let name = format!("fc{}", i + 6);
            let w = push(format!("{name}.weight"), n_out * n_in, true);
            let b = push(format!("{name}.bias"), n_out, false);
            ops.push(Op::Dense(Dense {
                n_in,
                n_out,
                w,
                b,
                relu: i + 1 < config.fc_dims.len(),
            }));
            n_in = n_out;
        }
        Ok(CpjNetwork {
            config: config.clone(),
            params: vec![0.0; offset],
            blocks,
            ops,
        })
    }

    pub fn config(&self) -> &CpjConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    /// Output channels of the first convolution.
    pub fn first_conv_channels(&self) -> usize {
        match &self.ops[0] {
            Op::Conv(c) => c.c_out,
            _ => unreachable!("the first op is a convolution"),
        }
    }

    pub fn prepare(&self, esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<CpjInput> {
        CpjInput::prepare(esm, gsm, self.config.input_res)
    }

    pub(crate) fn check_input(&self, x: &CpjInput) -> Result<()> {
        let r = self.config.input_res;
        if x.res != r {
            return Err(CpjError::DimensionMismatch {
                expected: (r, r),
                found: (x.res, x.res),
            });
        }
        Ok(())
    }

    /// Score of a prepared input, in (0, 1).
    pub fn score_input(&self, x: &CpjInput) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.trace(x.data()).score)
    }

    /// Score of an estimated map against a ground-truth map of any size.
    pub fn score(&self, esm: &SaliencyMap, gsm: &SaliencyMap) -> Result<f64> {
        self.score_input(&self.prepare(esm, gsm)?)
    }

    /// `score(a, g) - score(b, g)`.
    pub fn forward_pair(&self, a: &SaliencyMap, b: &SaliencyMap, g: &SaliencyMap) -> Result<f64> {
        Ok(self.score(a, g)? - self.score(b, g)?)
    }

    pub(crate) fn trace(&self, input: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.ops.len() + 1);
        let mut argmax = Vec::with_capacity(self.ops.len());
        acts.push(input.to_vec());
        for op in &self.ops {
            let x = acts.last().expect("input pushed first");
            let (y, idx) = match op {
                Op::Conv(c) => (self.conv_forward(c, x), Vec::new()),
                Op::Pool { channels, side } => kernels::maxpool2(x, *channels, *side),
                Op::Dense(d) => (self.dense_forward(d, x), Vec::new()),
            };
            acts.push(y);
            argmax.push(idx);
        }
        let z = acts.last().expect("network has ops")[0];
        Trace {
            acts,
            argmax,
            score: sigmoid(z),
        }
    }

    fn conv_forward(&self, c: &Conv, x: &[f64]) -> Vec<f64> {
        let hw = c.side * c.side;
        let cols = kernels::im2col(x, c.c_in, c.side);
        let mut y = vec![0.0; c.c_out * hw];
        for (row, &bias) in y.chunks_mut(hw).zip(&self.params[c.b..c.b + c.c_out]) {
            row.fill(bias);
        }
        let w = &self.params[c.w..c.w + c.c_out * c.c_in * 9];
        kernels::gemm(c.c_out, c.c_in * 9, hw, w, false, &cols, false, &mut y, 1.0);
        kernels::relu(&mut y);
        y
    }

    fn dense_forward(&self, d: &Dense, x: &[f64]) -> Vec<f64> {
        let w = &self.params[d.w..d.w + d.n_out * d.n_in];
        let mut y: Vec<f64> = self.params[d.b..d.b + d.n_out].to_vec();
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += kernels::dot(&w[o * d.n_in..(o + 1) * d.n_in], x);
        }
        if d.relu {
            kernels::relu(&mut y);
        }
        y
    }

    /// Accumulates `dscore * dscore/dparams` into `grad`.
    pub(crate) fn backward(&self, trace: &Trace, dscore: f64, grad: &mut [f64]) {
        let s = trace.score;
        let mut g = vec![dscore * s * (1.0 - s)];
        for (k, op) in self.ops.iter().enumerate().rev() {
            let x = &trace.acts[k];
            let y = &trace.acts[k + 1];
            let need_dx = k > 0;
            g = match op {
                Op::Conv(c) => self.conv_backward(c, x, y, g, grad, need_dx),
                Op::Pool { .. } => {
                    let mut dx = vec![0.0; x.len()];
                    for (&i, &gi) in trace.argmax[k].iter().zip(&g) {
                        dx[i as usize] += gi;
                    }
                    dx
                }
                Op::Dense(d) => self.dense_backward(d, x, y, g, grad),
            };
        }
    }

    fn conv_backward(&self, c: &Conv, x: &[f64], y: &[f64], mut g: Vec<f64>, grad: &mut [f64], need_dx: bool) -> Vec<f64> {
        let hw = c.side * c.side;
        let k = c.c_in * 9;
        kernels::relu_mask(&mut g, y);
        let cols = kernels::im2col(x, c.c_in, c.side);
        kernels::gemm(c.c_out, hw, k, &g, false, &cols, true, &mut grad[c.w..c.w + c.c_out * k], 1.0);
        for (db, row) in grad[c.b..c.b + c.c_out].iter_mut().zip(g.chunks(hw)) {
            *db += row.iter().sum::<f64>();
        }
        if !need_dx {
            return Vec::new();
        }
        let w = &self.params[c.w..c.w + c.c_out * k];
        let mut dcols = vec![0.0; k * hw];
        kernels::gemm(k, c.c_out, hw, w, true, &g, false, &mut dcols, 0.0);
        kernels::col2im(&dcols, c.c_in, c.side)
    }

    fn dense_backward(&self, d: &Dense, x: &[f64], y: &[f64], mut g: Vec<f64>, grad: &mut [f64]) -> Vec<f64> {
        if d.relu {
            kernels::relu_mask(&mut g, y);
        }
        let w = &self.params[d.w..d.w + d.n_out * d.n_in];
        let mut dx = vec![0.0; d.n_in];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            let row = o * d.n_in;
            for (gw, &xi) in grad[d.w + row..d.w + row + d.n_in].iter_mut().zip(x) {
                *gw += go * xi;
            }
            for (dxi, &wi) in dx.iter_mut().zip(&w[row..row + d.n_in]) {
                *dxi += go * wi;
            }
            grad[d.b + o] += go;
        }
        dx
    }

    /// Rounds every parameter to the nearest f32.
    pub(crate) fn quantize(&mut self) {
        for p in &mut self.params {
            *p = round_f32(*p);
        }
    }

    /// Replaces all parameters; the length must match the layout.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(CpjError::InvalidConfig(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// Fingerprint of every rectifier on/off state and pooling choice for
    /// one input; equal fingerprints mean the network is locally linear in
    /// the same region.
    pub(crate) fn activation_signature(&self, input: &[f64]) -> u64 {
        let t = self.trace(input);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for (k, op) in self.ops.iter().enumerate() {
            match op {
                Op::Pool { .. } => t.argmax[k].iter().for_each(|&i| mix(i as u64)),
                Op::Dense(d) if !d.relu => {}
                _ => t.acts[k + 1].iter().for_each(|&v| mix((v > 0.0) as u64)),
            }
        }
        h
    }
}

/// Shared handle to a prepared input; many triplets reuse the same pair.
pub type SharedInput = Arc<CpjInput>;
