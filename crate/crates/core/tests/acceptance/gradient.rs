//! Finite-difference check of every network parameter against an
//! independent scalar implementation of the forward pass.
//!
//! Each perturbed loss is evaluated incrementally: only the part of the
//! network downstream of the perturbed parameter is recomputed, and the loss
//! difference is formed without cancellation. ReLU and max-pool decisions
//! that flip inside the stencil are detected; the affected sample then uses
//! a one-sided second-order stencil on the side where the network is smooth.

use gazekit::nnengine::{backward, forward_batch, init_params, CnnConfig, CnnParams, NetInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: usize = 36;
const W: usize = 60;
const K: usize = 5;
const C1: usize = 20;
const C1H: usize = 32;
const C1W: usize = 56;
const P1H: usize = 16;
const P1W: usize = 28;
const C2: usize = 50;
const C2H: usize = 12;
const C2W: usize = 24;
const P2H: usize = 6;
const P2W: usize = 12;
const BLOCK: usize = P2H * P2W;
const FEAT: usize = C2 * BLOCK;
const HID: usize = 500;
const CAT: usize = HID + 2;

pub const SAMPLES: usize = 20;
pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

struct Net<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
    wf: &'a [f64],
    bf: &'a [f64],
    wo: &'a [f64],
    bo: &'a [f64],
    /// fc1 weights transposed to feature-major order.
    wf_t: Vec<f64>,
}

struct Sample {
    x: Vec<f64>,
    head: [f64; 2],
    target: [f64; 2],
    c1: Vec<f64>,
    p1: Vec<f64>,
    a1: Vec<usize>,
    c2: Vec<f64>,
    a2: Vec<usize>,
    f: Vec<f64>,
    z: Vec<f64>,
    cat: Vec<f64>,
    out: [f64; 2],
    r: [f64; 2],
}

/// Max pooling of one `h x w` channel; ties keep the first element of the
/// window in row-major order. Returns values and flat argmax indices.
fn pool(v: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = Vec::with_capacity(h * w / 4);
    let mut arg = Vec::with_capacity(h * w / 4);
    for py in 0..h / 2 {
        for px in 0..w / 2 {
            let cands = [
                2 * py * w + 2 * px,
                2 * py * w + 2 * px + 1,
                (2 * py + 1) * w + 2 * px,
                (2 * py + 1) * w + 2 * px + 1,
            ];
            let mut best = cands[0];
            for &c in &cands[1..] {
                if v[c] > v[best] {
                    best = c;
                }
            }
            out.push(v[best]);
            arg.push(best);
        }
    }
    (out, arg)
}

/// Change of the pooled values of one channel when its input changes by
/// `dv`, plus whether any window changed its argmax.
fn pool_delta(v: &[f64], dv: &[f64], arg: &[usize], h: usize, w: usize) -> (Vec<f64>, bool) {
    let mut flip = false;
    let mut out = Vec::with_capacity(arg.len());
    let mut k = 0;
    for py in 0..h / 2 {
        for px in 0..w / 2 {
            let cands = [
                2 * py * w + 2 * px,
                2 * py * w + 2 * px + 1,
                (2 * py + 1) * w + 2 * px,
                (2 * py + 1) * w + 2 * px + 1,
            ];
            let mut best = cands[0];
            for &c in &cands[1..] {
                if v[c] + dv[c] > v[best] + dv[best] {
                    best = c;
                }
            }
            let old = arg[k];
            if best == old {
                out.push(dv[old]);
            } else {
                flip = true;
                out.push(v[best] - v[old] + dv[best]);
            }
            k += 1;
        }
    }
    (out, flip)
}

impl<'a> Net<'a> {
    fn new(p: &'a CnnParams) -> Self {
        let wf = p.fc1_w.data();
        let mut wf_t = vec![0.0; FEAT * HID];
        for j in 0..HID {
            for i in 0..FEAT {
                wf_t[i * HID + j] = wf[j * FEAT + i];
            }
        }
        Self {
            w1: p.conv1_w.data(),
            b1: p.conv1_b.data(),
            w2: p.conv2_w.data(),
            b2: p.conv2_b.data(),
            wf,
            bf: p.fc1_b.data(),
            wo: p.out_w.data(),
            bo: p.out_b.data(),
            wf_t,
        }
    }

    fn forward(&self, x: Vec<f64>, head: [f64; 2], target: [f64; 2]) -> Sample {
        let mut c1 = vec![0.0; C1 * C1H * C1W];
        for c in 0..C1 {
            for y in 0..C1H {
                for xx in 0..C1W {
                    let mut s = self.b1[c];
                    for ky in 0..K {
                        for kx in 0..K {
                            s += self.w1[c * K * K + ky * K + kx] * x[(y + ky) * W + xx + kx];
                        }
                    }
                    c1[(c * C1H + y) * C1W + xx] = s;
                }
            }
        }
        let mut p1 = Vec::with_capacity(C1 * P1H * P1W);
        let mut a1 = Vec::new();
        for c in 0..C1 {
            let (v, a) = pool(&c1[c * C1H * C1W..(c + 1) * C1H * C1W], C1H, C1W);
            p1.extend(v);
            a1.extend(a);
        }
        let mut c2 = vec![0.0; C2 * C2H * C2W];
        for o in 0..C2 {
            for y in 0..C2H {
                for xx in 0..C2W {
                    let mut s = self.b2[o];
                    for c in 0..C1 {
                        for ky in 0..K {
                            for kx in 0..K {
                                s += self.w2[((o * C1 + c) * K + ky) * K + kx]
                                    * p1[(c * P1H + y + ky) * P1W + xx + kx];
                            }
                        }
                    }
                    c2[(o * C2H + y) * C2W + xx] = s;
                }
            }
        }
        let mut f = Vec::with_capacity(FEAT);
        let mut a2 = Vec::new();
        for o in 0..C2 {
            let (v, a) = pool(&c2[o * C2H * C2W..(o + 1) * C2H * C2W], C2H, C2W);
            f.extend(v);
            a2.extend(a);
        }
        let z: Vec<f64> = (0..HID)
            .map(|j| self.bf[j] + (0..FEAT).map(|i| self.wf[j * FEAT + i] * f[i]).sum::<f64>())
            .collect();
        let mut cat: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        cat.extend(head);
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bo[k] + (0..CAT).map(|j| self.wo[k * CAT + j] * cat[j]).sum::<f64>();
        }
        let r = [out[0] - target[0], out[1] - target[1]];
        Sample {
            x,
            head,
            target,
            c1,
            p1,
            a1,
            c2,
            a2,
            f,
            z,
            cat,
            out,
            r,
        }
    }

    /// Output change for a hidden pre-activation change given sparsely.
    fn from_dz(&self, s: &Sample, dz: impl Iterator<Item = (usize, f64)>) -> ([f64; 2], bool) {
        let mut flip = false;
        let mut d = [0.0; 2];
        for (j, dzj) in dz {
            let z = s.z[j];
            let da = match (z > 0.0, z + dzj > 0.0) {
                (true, true) => dzj,
                (false, false) => 0.0,
                _ => {
                    flip = true;
                    (z + dzj).max(0.0) - z.max(0.0)
                }
            };
            d[0] += self.wo[j] * da;
            d[1] += self.wo[CAT + j] * da;
        }
        (d, flip)
    }

    /// Hidden pre-activation changes for several feature deltas that all
    /// start at feature `start`.
    fn dz_batch(&self, start: usize, dfs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut dz = vec![vec![0.0; HID]; dfs.len()];
        let len = dfs.first().map_or(0, Vec::len);
        for k in 0..len {
            let row = &self.wf_t[(start + k) * HID..(start + k + 1) * HID];
            for (acc, df) in dz.iter_mut().zip(dfs) {
                let v = df[k];
                if v != 0.0 {
                    for (a, w) in acc.iter_mut().zip(row) {
                        *a += v * w;
                    }
                }
            }
        }
        dz
    }

    /// Feature change of output channel `o` for a change of its conv2 map.
    fn conv2_channel_delta(&self, s: &Sample, o: usize, dc2: &[f64]) -> (Vec<f64>, bool) {
        let n = C2H * C2W;
        pool_delta(&s.c2[o * n..(o + 1) * n], dc2, &s.a2[o * BLOCK..(o + 1) * BLOCK], C2H, C2W)
    }

    /// Feature change of the whole network for a change of conv1 channel `c`.
    fn conv1_channel_delta(&self, s: &Sample, c: usize, dc1: &[f64]) -> (Vec<f64>, bool) {
        let n1 = C1H * C1W;
        let np = P1H * P1W;
        let (dp1, mut flip) =
            pool_delta(&s.c1[c * n1..(c + 1) * n1], dc1, &s.a1[c * np..(c + 1) * np], C1H, C1W);
        let mut df = Vec::with_capacity(FEAT);
        let mut dc2 = vec![0.0; C2H * C2W];
        for o in 0..C2 {
            let w = &self.w2[(o * C1 + c) * K * K..(o * C1 + c + 1) * K * K];
            for y in 0..C2H {
                for xx in 0..C2W {
                    let mut sum = 0.0;
                    for ky in 0..K {
                        for kx in 0..K {
                            sum += w[ky * K + kx] * dp1[(y + ky) * P1W + xx + kx];
                        }
                    }
                    dc2[y * C2W + xx] = sum;
                }
            }
            let (d, fl) = self.conv2_channel_delta(s, o, &dc2);
            flip |= fl;
            df.extend(d);
        }
        (df, flip)
    }
}

/// `‖r + δ‖ − ‖r‖` without cancellation.
fn loss_delta(r: [f64; 2], d: [f64; 2]) -> f64 {
    let num = 2.0 * (r[0] * d[0] + r[1] * d[1]) + d[0] * d[0] + d[1] * d[1];
    let a = ((r[0] + d[0]).powi(2) + (r[1] + d[1]).powi(2)).sqrt();
    let b = (r[0] * r[0] + r[1] * r[1]).sqrt();
    num / (a + b)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct StencilStats {
    pub central: u64,
    pub one_sided: u64,
    pub first_order: u64,
    pub unresolved: u64,
}

/// Derivative of one sample's loss along a parameter from loss deltas at
/// `t · STEP`, `t ∈ {−2, −1, 1, 2}`. `eval(t)` returns (Δloss, flipped).
fn sample_derivative(mut eval: impl FnMut(f64) -> (f64, bool), stats: &mut StencilStats) -> f64 {
    let h = STEP;
    let (fp, flip_p) = eval(h);
    let (fm, flip_m) = eval(-h);
    if !flip_p && !flip_m {
        stats.central += 1;
        return (fp - fm) / (2.0 * h);
    }
    if flip_p && flip_m {
        stats.unresolved += 1;
        return (fp - fm) / (2.0 * h);
    }
    let sign = if flip_p { -1.0 } else { 1.0 };
    let (f1, f2flip, f2) = {
        let f1 = if flip_p { fm } else { fp };
        let (f2, fl) = eval(2.0 * sign * h);
        (f1, fl, f2)
    };
    if !f2flip {
        stats.one_sided += 1;
        sign * (4.0 * f1 - f2) / (2.0 * h)
    } else {
        stats.first_order += 1;
        sign * f1 / h
    }
}

pub struct GradientCheck {
    pub parameters: usize,
    pub worst: Vec<(&'static str, f64)>,
    pub failures: usize,
    pub stats: StencilStats,
    pub forward_mismatch: f64,
}

fn rel_error(a: f64, n: f64) -> f64 {
    let m = a.abs().max(n.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - n).abs() / m
    }
}

pub fn run(seed: u64) -> GradientCheck {
    let params = init_params(seed, CnnConfig::default());
    let net = Net::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let samples: Vec<Sample> = (0..SAMPLES)
        .map(|_| {
            let x: Vec<f64> = (0..H * W).map(|_| rng.random::<f64>()).collect();
            let head = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let target = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            net.forward(x, head, target)
        })
        .collect();

    let inputs: Vec<NetInput> = samples
        .iter()
        .map(|s| NetInput {
            pixels: s.x.clone(),
            head: s.head,
        })
        .collect();
    let targets: Vec<[f64; 2]> = samples.iter().map(|s| s.target).collect();
    let (outputs, cache) = forward_batch(&params, &inputs).expect("forward");
    let forward_mismatch = outputs
        .iter()
        .zip(&samples)
        .map(|(o, s)| (o[0] - s.out[0]).abs().max((o[1] - s.out[1]).abs()))
        .fold(0.0, f64::max);
    let grads = backward(&params, &cache, &targets, 1.0).expect("backward");

    let mut stats = StencilStats::default();
    let mut worst = Vec::new();
    let mut failures = 0;
    let mut record = |name: &'static str, analytic: &[f64], numeric: &[f64], worst: &mut Vec<(&'static str, f64)>| {
        let mut w = 0.0f64;
        for (&a, &n) in analytic.iter().zip(numeric) {
            let e = rel_error(a, n);
            if !(e < TOLERANCE) {
                failures += 1;
            }
            w = w.max(e);
        }
        worst.push((name, w));
    };

    // output layer
    let mut num_ob = vec![0.0; 2];
    let mut num_ow = vec![0.0; 2 * CAT];
    for s in &samples {
        for k in 0..2 {
            num_ob[k] += sample_derivative(
                |t| {
                    let mut d = [0.0; 2];
                    d[k] = t;
                    (loss_delta(s.r, d), false)
                },
                &mut stats,
            );
            for j in 0..CAT {
                num_ow[k * CAT + j] += sample_derivative(
                    |t| {
                        let mut d = [0.0; 2];
                        d[k] = t * s.cat[j];
                        (loss_delta(s.r, d), false)
                    },
                    &mut stats,
                );
            }
        }
    }
    record("out_b", grads.out_b.data(), &num_ob, &mut worst);
    record("out_w", grads.out_w.data(), &num_ow, &mut worst);

    // fully connected layer
    let mut num_fb = vec![0.0; HID];
    let mut num_fw = vec![0.0; HID * FEAT];
    for s in &samples {
        for j in 0..HID {
            let eval = |dzj: f64| {
                let (d, flip) = net.from_dz(s, std::iter::once((j, dzj)));
                (loss_delta(s.r, d), flip)
            };
            num_fb[j] += sample_derivative(eval, &mut stats);
            for i in 0..FEAT {
                let fi = s.f[i];
                num_fw[j * FEAT + i] += sample_derivative(|t| eval(t * fi), &mut stats);
            }
        }
    }
    record("fc1_b", grads.fc1_b.data(), &num_fb, &mut worst);
    record("fc1_w", grads.fc1_w.data(), &num_fw, &mut worst);

    // conv2: one output channel changes, so only its 72 features move
    let finish_block = |s: &Sample, o: usize, df: &[f64], flip: bool| {
        let dz = net.dz_batch(o * BLOCK, &[df.to_vec()]).pop().unwrap();
        let (d, f2) = net.from_dz(s, dz.into_iter().enumerate());
        (loss_delta(s.r, d), flip || f2)
    };
    let mut num_c2b = vec![0.0; C2];
    let mut num_c2w = vec![0.0; C2 * C1 * K * K];
    let n2 = C2H * C2W;
    for s in &samples {
        for o in 0..C2 {
            num_c2b[o] += sample_derivative(
                |t| {
                    let (df, flip) = net.conv2_channel_delta(s, o, &vec![t; n2]);
                    finish_block(s, o, &df, flip)
                },
                &mut stats,
            );
            for c in 0..C1 {
                for ky in 0..K {
                    for kx in 0..K {
                        let idx = ((o * C1 + c) * K + ky) * K + kx;
                        num_c2w[idx] += sample_derivative(
                            |t| {
                                let mut dc2 = vec![0.0; n2];
                                for y in 0..C2H {
                                    for xx in 0..C2W {
                                        dc2[y * C2W + xx] = t * s.p1[(c * P1H + y + ky) * P1W + xx + kx];
                                    }
                                }
                                let (df, flip) = net.conv2_channel_delta(s, o, &dc2);
                                finish_block(s, o, &df, flip)
                            },
                            &mut stats,
                        );
                    }
                }
            }
        }
    }
    record("conv2_b", grads.conv2_b.data(), &num_c2b, &mut worst);
    record("conv2_w", grads.conv2_w.data(), &num_c2w, &mut worst);

    // conv1: every feature moves; the ±h evaluations of all samples share
    // one pass over the fc1 weights
    let n1 = C1H * C1W;
    let conv1_param = |c: usize, dc1_of: &dyn Fn(&Sample, f64) -> Vec<f64>, stats: &mut StencilStats| -> f64 {
        let mut dfs = Vec::with_capacity(2 * SAMPLES);
        let mut flips = Vec::with_capacity(2 * SAMPLES);
        for s in &samples {
            for t in [STEP, -STEP] {
                let (df, flip) = net.conv1_channel_delta(s, c, &dc1_of(s, t));
                dfs.push(df);
                flips.push(flip);
            }
        }
        let dzs = net.dz_batch(0, &dfs);
        let mut total = 0.0;
        for (k, s) in samples.iter().enumerate() {
            let mut cached = [None, None];
            for m in 0..2 {
                let (d, f2) = net.from_dz(s, dzs[2 * k + m].iter().copied().enumerate());
                cached[m] = Some((loss_delta(s.r, d), flips[2 * k + m] || f2));
            }
            total += sample_derivative(
                |t| {
                    if t == STEP {
                        cached[0].unwrap()
                    } else if t == -STEP {
                        cached[1].unwrap()
                    } else {
                        let (df, flip) = net.conv1_channel_delta(s, c, &dc1_of(s, t));
                        let dz = net.dz_batch(0, &[df]).pop().unwrap();
                        let (d, f2) = net.from_dz(s, dz.into_iter().enumerate());
                        (loss_delta(s.r, d), flip || f2)
                    }
                },
                stats,
            );
        }
        total
    };
    let mut num_c1b = vec![0.0; C1];
    let mut num_c1w = vec![0.0; C1 * K * K];
    for c in 0..C1 {
        num_c1b[c] = conv1_param(c, &|_, t| vec![t; n1], &mut stats);
        for ky in 0..K {
            for kx in 0..K {
                num_c1w[c * K * K + ky * K + kx] = conv1_param(
                    c,
                    &|s, t| {
                        let mut d = vec![0.0; n1];
                        for y in 0..C1H {
                            for xx in 0..C1W {
                                d[y * C1W + xx] = t * s.x[(y + ky) * W + xx + kx];
                            }
                        }
                        d
                    },
                    &mut stats,
                );
            }
        }
    }
    record("conv1_b", grads.conv1_b.data(), &num_c1b, &mut worst);
    record("conv1_w", grads.conv1_w.data(), &num_c1w, &mut worst);

    GradientCheck {
        parameters: params.parameter_count(),
        worst,
        failures,
        stats,
        forward_mismatch,
    }
}
