use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gemm::gemm;
use super::{NnError, Tensor};

pub const INPUT_WIDTH: usize = 60;
pub const INPUT_HEIGHT: usize = 36;
pub const KERNEL: usize = 5;
pub const CONV1_FILTERS: usize = 20;
pub const CONV2_FILTERS: usize = 50;
pub const HIDDEN_UNITS: usize = 500;
pub const HEAD_DIMS: usize = 2;
pub const OUTPUTS: usize = 2;

const C1_H: usize = INPUT_HEIGHT - KERNEL + 1; // 32
const C1_W: usize = INPUT_WIDTH - KERNEL + 1; // 56
const P1_H: usize = C1_H / 2; // 16
const P1_W: usize = C1_W / 2; // 28
const C2_H: usize = P1_H - KERNEL + 1; // 12
const C2_W: usize = P1_W - KERNEL + 1; // 24
const P2_H: usize = C2_H / 2; // 6
const P2_W: usize = C2_W / 2; // 12
pub const FC_FEATURES: usize = CONV2_FILTERS * P2_H * P2_W; // 3600
const INPUT_LEN: usize = INPUT_WIDTH * INPUT_HEIGHT;
const K1: usize = KERNEL * KERNEL; // conv1 patch length
const K2: usize = CONV1_FILTERS * KERNEL * KERNEL; // conv2 patch length
const CONCAT: usize = HIDDEN_UNITS + HEAD_DIMS;

/// Architecture switches that are not fixed by the layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct CnnConfig {
    /// Rectify each convolution output before pooling.
    pub conv_relu: bool,
}

/// All weights and biases of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub config: CnnConfig,
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub fc1_w: Tensor,
    pub fc1_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

/// Gradients share the parameter layout.
pub type Gradients = CnnParams;

impl CnnParams {
    pub fn zeros(config: CnnConfig) -> Self {
        Self {
            config,
            conv1_w: Tensor::zeros(&[CONV1_FILTERS, 1, KERNEL, KERNEL]),
            conv1_b: Tensor::zeros(&[CONV1_FILTERS]),
            conv2_w: Tensor::zeros(&[CONV2_FILTERS, CONV1_FILTERS, KERNEL, KERNEL]),
            conv2_b: Tensor::zeros(&[CONV2_FILTERS]),
            fc1_w: Tensor::zeros(&[HIDDEN_UNITS, FC_FEATURES]),
            fc1_b: Tensor::zeros(&[HIDDEN_UNITS]),
            out_w: Tensor::zeros(&[OUTPUTS, CONCAT]),
            out_b: Tensor::zeros(&[OUTPUTS]),
        }
    }

    /// Parameter blocks in declaration order.
    pub fn tensors(&self) -> [(&'static str, &Tensor); 8] {
        [
            ("conv1_w", &self.conv1_w),
            ("conv1_b", &self.conv1_b),
            ("conv2_w", &self.conv2_w),
            ("conv2_b", &self.conv2_b),
            ("fc1_w", &self.fc1_w),
            ("fc1_b", &self.fc1_b),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 8] {
        [
            ("conv1_w", &mut self.conv1_w),
            ("conv1_b", &mut self.conv1_b),
            ("conv2_w", &mut self.conv2_w),
            ("conv2_b", &mut self.conv2_b),
            ("fc1_w", &mut self.fc1_w),
            ("fc1_b", &mut self.fc1_b),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }

    pub fn expected_shapes() -> [Vec<usize>; 8] {
        let z = Self::zeros(CnnConfig::default());
        z.tensors().map(|(_, t)| t.shape().to_vec())
    }

    pub fn validate(&self) -> Result<(), NnError> {
        for ((name, t), shape) in self.tensors().iter().zip(Self::expected_shapes()) {
            t.expect_shape(name, &shape)?;
            if !t.all_finite() {
                return Err(NnError::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.all_finite())
    }
}

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_params(seed: u64, config: CnnConfig) -> CnnParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = CnnParams::zeros(config);
    let fans = [
        (K1, CONV1_FILTERS * K1),
        (K2, CONV2_FILTERS * KERNEL * KERNEL),
        (FC_FEATURES, HIDDEN_UNITS),
        (CONCAT, OUTPUTS),
    ];
    let weights = [
        &mut p.conv1_w,
        &mut p.conv2_w,
        &mut p.fc1_w,
        &mut p.out_w,
    ];
    for (w, (fan_in, fan_out)) in weights.into_iter().zip(fans) {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in w.data_mut() {
            *v = rng.random_range(-limit..limit);
        }
    }
    p
}

/// One network input: pixels scaled to [0, 1] (row-major 36x60) and the head angle.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub pixels: Vec<f64>,
    pub head: [f64; 2],
}

impl NetInput {
    pub fn from_tensor(e: &Tensor, head: [f64; 2]) -> Result<Self, NnError> {
        e.expect_shape("eye image", &[1, INPUT_HEIGHT, INPUT_WIDTH])?;
        Ok(Self {
            pixels: e.data().to_vec(),
            head,
        })
    }

    fn check(&self) -> Result<(), NnError> {
        if self.pixels.len() != INPUT_LEN {
            return Err(NnError::ShapeMismatch {
                what: "eye image",
                expected: vec![1, INPUT_HEIGHT, INPUT_WIDTH],
                got: vec![self.pixels.len()],
            });
        }
        Ok(())
    }
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone)]
struct ConvCache {
    col1: Vec<f64>,
    conv1: Vec<f64>,
    pool1_arg: Vec<u32>,
    col2: Vec<f64>,
    conv2: Vec<f64>,
    pool2_arg: Vec<u32>,
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    convs: Vec<ConvCache>,
    features: Vec<f64>,
    hidden_pre: Vec<f64>,
    concat: Vec<f64>,
    outputs: Vec<[f64; 2]>,
}

impl ForwardCache {
    pub fn outputs(&self) -> &[[f64; 2]] {
        &self.outputs
    }

    pub fn batch_size(&self) -> usize {
        self.outputs.len()
    }
}

/// `col[(c·k + ky)·k + kx][oy·ow + ox] = input[c][oy + ky][ox + kx]`.
fn im2col(input: &[f64], c: usize, h: usize, w: usize, col: &mut [f64]) {
    let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
    let mut row = 0;
    for ci in 0..c {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let dst = &mut col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let src = &input[ci * h * w + (oy + ky) * w + kx..];
                    dst[oy * ow..(oy + 1) * ow].copy_from_slice(&src[..ow]);
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates column gradients into the input layout.
fn col2im(col: &[f64], c: usize, h: usize, w: usize, out: &mut [f64]) {
    let (oh, ow) = (h - KERNEL + 1, w - KERNEL + 1);
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut row = 0;
    for ci in 0..c {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let src = &col[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let dst = &mut out[ci * h * w + (oy + ky) * w + kx..];
                    for ox in 0..ow {
                        dst[ox] += src[oy * ow + ox];
                    }
                }
                row += 1;
            }
        }
    }
}

/// 2x2 stride-2 max pooling. Ties go to the first element in row-major window order.
fn max_pool(input: &[f64], c: usize, h: usize, w: usize, out: &mut [f64], arg: &mut [u32]) {
    let (ph, pw) = (h / 2, w / 2);
    for ci in 0..c {
        for py in 0..ph {
            for px in 0..pw {
                let base = ci * h * w + 2 * py * w + 2 * px;
                let mut best = base;
                for idx in [base + 1, base + w, base + w + 1] {
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                let o = ci * ph * pw + py * pw + px;
                out[o] = input[best];
                arg[o] = best as u32;
            }
        }
    }
}

fn add_bias_rows(out: &mut [f64], bias: &[f64], cols: usize) {
    for (row, b) in out.chunks_mut(cols).zip(bias) {
        row.iter_mut().for_each(|v| *v += b);
    }
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
}

fn conv_forward(params: &CnnParams, pixels: &[f64], features: &mut [f64]) -> ConvCache {
    let relu = params.config.conv_relu;
    let mut col1 = vec![0.0; K1 * C1_H * C1_W];
    im2col(pixels, 1, INPUT_HEIGHT, INPUT_WIDTH, &mut col1);
    let mut conv1 = vec![0.0; CONV1_FILTERS * C1_H * C1_W];
    gemm(CONV1_FILTERS, K1, C1_H * C1_W, 1.0, params.conv1_w.data(), false, &col1, false, 0.0, &mut conv1);
    add_bias_rows(&mut conv1, params.conv1_b.data(), C1_H * C1_W);
    if relu {
        relu_in_place(&mut conv1);
    }
    let mut pool1 = vec![0.0; CONV1_FILTERS * P1_H * P1_W];
    let mut pool1_arg = vec![0u32; pool1.len()];
    max_pool(&conv1, CONV1_FILTERS, C1_H, C1_W, &mut pool1, &mut pool1_arg);

    let mut col2 = vec![0.0; K2 * C2_H * C2_W];
    im2col(&pool1, CONV1_FILTERS, P1_H, P1_W, &mut col2);
    let mut conv2 = vec![0.0; CONV2_FILTERS * C2_H * C2_W];
    gemm(CONV2_FILTERS, K2, C2_H * C2_W, 1.0, params.conv2_w.data(), false, &col2, false, 0.0, &mut conv2);
    add_bias_rows(&mut conv2, params.conv2_b.data(), C2_H * C2_W);
    if relu {
        relu_in_place(&mut conv2);
    }
    let mut pool2_arg = vec![0u32; FC_FEATURES];
    max_pool(&conv2, CONV2_FILTERS, C2_H, C2_W, features, &mut pool2_arg);
    ConvCache {
        col1,
        conv1,
        pool1_arg,
        col2,
        conv2,
        pool2_arg,
    }
}

/// Forward pass over a batch.
///
/// Convolution stages run per sample (possibly in parallel); the fully
/// connected stages run as one batched product. Results do not depend on the
/// number of threads.
pub fn forward_batch(
    params: &CnnParams,
    inputs: &[NetInput],
) -> Result<(Vec<[f64; 2]>, ForwardCache), NnError> {
    params.validate()?;
    for x in inputs {
        x.check()?;
    }
    let b = inputs.len();
    let mut features = vec![0.0; b * FC_FEATURES];
    let convs: Vec<ConvCache> = features
        .par_chunks_mut(FC_FEATURES)
        .zip(inputs.par_iter())
        .map(|(feat, x)| conv_forward(params, &x.pixels, feat))
        .collect();

    let mut hidden_pre = vec![0.0; b * HIDDEN_UNITS];
    gemm(b, FC_FEATURES, HIDDEN_UNITS, 1.0, &features, false, params.fc1_w.data(), true, 0.0, &mut hidden_pre);
    let mut concat = vec![0.0; b * CONCAT];
    for (i, x) in inputs.iter().enumerate() {
        let pre = &mut hidden_pre[i * HIDDEN_UNITS..(i + 1) * HIDDEN_UNITS];
        for (v, bias) in pre.iter_mut().zip(params.fc1_b.data()) {
            *v += bias;
        }
        let row = &mut concat[i * CONCAT..(i + 1) * CONCAT];
        for (dst, &v) in row[..HIDDEN_UNITS].iter_mut().zip(pre.iter()) {
            *dst = v.max(0.0);
        }
        row[HIDDEN_UNITS] = x.head[0];
        row[HIDDEN_UNITS + 1] = x.head[1];
    }
    let mut out = vec![0.0; b * OUTPUTS];
    gemm(b, CONCAT, OUTPUTS, 1.0, &concat, false, params.out_w.data(), true, 0.0, &mut out);
    let outputs: Vec<[f64; 2]> = out
        .chunks(OUTPUTS)
        .map(|o| [o[0] + params.out_b.data()[0], o[1] + params.out_b.data()[1]])
        .collect();
    Ok((
        outputs.clone(),
        ForwardCache {
            convs,
            features,
            hidden_pre,
            concat,
            outputs,
        },
    ))
}

/// Single-sample forward pass on a `1 x 36 x 60` tensor.
pub fn forward(
    params: &CnnParams,
    e: &Tensor,
    h: [f64; 2],
) -> Result<([f64; 2], ForwardCache), NnError> {
    let input = NetInput::from_tensor(e, h)?;
    let (out, cache) = forward_batch(params, std::slice::from_ref(&input))?;
    Ok((out[0], cache))
}

/// Sum over the batch of the Euclidean distance between prediction and target.
pub fn loss(pred: &[[f64; 2]], target: &[[f64; 2]]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, t)| ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt())
        .sum()
}

fn conv_backward(params: &CnnParams, cache: &ConvCache, dfeat: &[f64]) -> [Vec<f64>; 4] {
    let relu = params.config.conv_relu;
    let mut dconv2 = vec![0.0; CONV2_FILTERS * C2_H * C2_W];
    for (g, &idx) in dfeat.iter().zip(&cache.pool2_arg) {
        dconv2[idx as usize] += g;
    }
    if relu {
        for (d, &a) in dconv2.iter_mut().zip(&cache.conv2) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
    }
    let mut dw2 = vec![0.0; CONV2_FILTERS * K2];
    gemm(CONV2_FILTERS, C2_H * C2_W, K2, 1.0, &dconv2, false, &cache.col2, true, 0.0, &mut dw2);
    let db2: Vec<f64> = dconv2.chunks(C2_H * C2_W).map(|r| r.iter().sum()).collect();

    let mut dcol2 = vec![0.0; K2 * C2_H * C2_W];
    gemm(K2, CONV2_FILTERS, C2_H * C2_W, 1.0, params.conv2_w.data(), true, &dconv2, false, 0.0, &mut dcol2);
    let mut dpool1 = vec![0.0; CONV1_FILTERS * P1_H * P1_W];
    col2im(&dcol2, CONV1_FILTERS, P1_H, P1_W, &mut dpool1);

    let mut dconv1 = vec![0.0; CONV1_FILTERS * C1_H * C1_W];
    for (g, &idx) in dpool1.iter().zip(&cache.pool1_arg) {
        dconv1[idx as usize] += g;
    }
    if relu {
        for (d, &a) in dconv1.iter_mut().zip(&cache.conv1) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
    }
    let mut dw1 = vec![0.0; CONV1_FILTERS * K1];
    gemm(CONV1_FILTERS, C1_H * C1_W, K1, 1.0, &dconv1, false, &cache.col1, true, 0.0, &mut dw1);
    let db1: Vec<f64> = dconv1.chunks(C1_H * C1_W).map(|r| r.iter().sum()).collect();
    [dw1, db1, dw2, db2]
}

/// Analytic gradients of `scale · loss(outputs, targets)`.
///
/// At `ĝ = g` the distance is not differentiable; its subgradient is taken as 0.
pub fn backward(
    params: &CnnParams,
    cache: &ForwardCache,
    targets: &[[f64; 2]],
    scale: f64,
) -> Result<Gradients, NnError> {
    let b = cache.batch_size();
    if targets.len() != b {
        return Err(NnError::ShapeMismatch {
            what: "targets",
            expected: vec![b, 2],
            got: vec![targets.len(), 2],
        });
    }
    let mut grads = CnnParams::zeros(params.config);

    let mut dout = vec![0.0; b * OUTPUTS];
    for (i, (p, t)) in cache.outputs.iter().zip(targets).enumerate() {
        let d = [p[0] - t[0], p[1] - t[1]];
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if norm > 0.0 {
            dout[2 * i] = scale * d[0] / norm;
            dout[2 * i + 1] = scale * d[1] / norm;
        }
    }
    gemm(OUTPUTS, b, CONCAT, 1.0, &dout, true, &cache.concat, false, 0.0, grads.out_w.data_mut());
    for row in dout.chunks(OUTPUTS) {
        grads.out_b.data_mut()[0] += row[0];
        grads.out_b.data_mut()[1] += row[1];
    }

    let mut dconcat = vec![0.0; b * CONCAT];
    gemm(b, OUTPUTS, CONCAT, 1.0, &dout, false, params.out_w.data(), false, 0.0, &mut dconcat);
    let mut dhidden = vec![0.0; b * HIDDEN_UNITS];
    for i in 0..b {
        let src = &dconcat[i * CONCAT..i * CONCAT + HIDDEN_UNITS];
        let pre = &cache.hidden_pre[i * HIDDEN_UNITS..(i + 1) * HIDDEN_UNITS];
        let dst = &mut dhidden[i * HIDDEN_UNITS..(i + 1) * HIDDEN_UNITS];
        for ((d, &s), &z) in dst.iter_mut().zip(src).zip(pre) {
            *d = if z > 0.0 { s } else { 0.0 };
        }
    }
    gemm(HIDDEN_UNITS, b, FC_FEATURES, 1.0, &dhidden, true, &cache.features, false, 0.0, grads.fc1_w.data_mut());
    for row in dhidden.chunks(HIDDEN_UNITS) {
        for (g, v) in grads.fc1_b.data_mut().iter_mut().zip(row) {
            *g += v;
        }
    }
    let mut dfeatures = vec![0.0; b * FC_FEATURES];
    gemm(b, HIDDEN_UNITS, FC_FEATURES, 1.0, &dhidden, false, params.fc1_w.data(), false, 0.0, &mut dfeatures);

    let per_sample: Vec<[Vec<f64>; 4]> = cache
        .convs
        .par_iter()
        .zip(dfeatures.par_chunks(FC_FEATURES))
        .map(|(c, df)| conv_backward(params, c, df))
        .collect();
    // fixed summation order keeps results independent of the thread count
    for parts in &per_sample {
        let accs = [
            grads.conv1_w.data_mut(),
            grads.conv1_b.data_mut(),
            grads.conv2_w.data_mut(),
            grads.conv2_b.data_mut(),
        ];
        for (acc, part) in accs.into_iter().zip(parts) {
            acc.iter_mut().zip(part).for_each(|(a, p)| *a += p);
        }
    }
    Ok(grads)
}
