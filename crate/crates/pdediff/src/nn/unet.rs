//! A 3-level convolutional encoder-decoder noise predictor with timestep
//! conditioning:
//! * two 3x3 residual blocks per level (group norm + SiLU), base width
//!   doubling per level,
//! * factor-2 strided-convolution downsampling, nearest-neighbor + conv
//!   upsampling, skip concatenation encoder -> decoder,
//! * a sinusoidal timestep embedding fed through a two-layer perceptron and
//!   injected per block as a channel bias,
//! * final 3x3 convolution to one channel, zero-initialized so an untrained
//!   model predicts exactly zero noise.
//!
//! Fully convolutional: any spatial size divisible by 4 round-trips.

use super::*;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SeedRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Architecture hyperparameters; recorded in checkpoints so files are
/// self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub base_width: usize,
    pub groups: usize,
    pub emb_dim: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            base_width: 64,
            groups: 8,
            emb_dim: 256,
        }
    }
}

impl ArchConfig {
    /// A small configuration for smoke-scale experiments and tests.
    pub fn smoke(base_width: usize) -> Self {
        Self {
            base_width,
            groups: base_width.min(4),
            emb_dim: (4 * base_width).max(8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 || self.groups == 0 {
            return Err(Error::InvalidParameter(
                "base width and groups must be positive".into(),
            ));
        }
        if self.base_width % self.groups != 0 {
            return Err(Error::InvalidParameter(format!(
                "groups {} must divide base width {}",
                self.groups, self.base_width
            )));
        }
        if self.emb_dim < 2 || self.emb_dim % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "embedding dim must be even and >= 2, got {}",
                self.emb_dim
            )));
        }
        Ok(())
    }
}

struct Alloc {
    next: usize,
}

impl Alloc {
    fn take(&mut self, n: usize) -> Range<usize> {
        let r = self.next..self.next + n;
        self.next += n;
        r
    }
}

/// 3x3 (pad 1) or 1x1 convolution.
#[derive(Debug, Clone)]
struct Conv {
    in_c: usize,
    out_c: usize,
    stride: usize,
    k: usize,
    w: Range<usize>,
    b: Range<usize>,
}

impl Conv {
    fn new(a: &mut Alloc, in_c: usize, out_c: usize, stride: usize, k: usize) -> Self {
        let w = a.take(out_c * in_c * k * k);
        let b = a.take(out_c);
        Self {
            in_c,
            out_c,
            stride,
            k,
            w,
            b,
        }
    }

    fn fwd(&self, p: &[f64], x: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
        let (ho, wo) = (conv_out(h, self.stride), conv_out(w, self.stride));
        let np = ho * wo;
        let weights = &p[self.w.clone()];
        let bias = &p[self.b.clone()];
        let mut y = vec![0.0; self.out_c * np];
        if self.k == 1 {
            debug_assert_eq!(self.stride, 1);
            gemm(self.out_c, self.in_c, np, 1.0, weights, x, 0.0, &mut y);
        } else {
            let mut cols = vec![0.0; self.in_c * 9 * np];
            im2col3(x, self.in_c, h, w, self.stride, &mut cols);
            gemm(self.out_c, self.in_c * 9, np, 1.0, weights, &cols, 0.0, &mut y);
        }
        for c in 0..self.out_c {
            let bset = bias[c];
            for v in &mut y[c * np..(c + 1) * np] {
                *v += bset;
            }
        }
        (y, ho, wo)
    }

    /// Returns grad wrt the input; parameter grads accumulate into `g`.
    fn bwd(
        &self,
        p: &[f64],
        x: &[f64],
        h: usize,
        w: usize,
        grad_y: &[f64],
        g: &mut [f64],
    ) -> Vec<f64> {
        let (ho, wo) = (conv_out(h, self.stride), conv_out(w, self.stride));
        let np = ho * wo;
        let weights = &p[self.w.clone()];
        for c in 0..self.out_c {
            g[self.b.clone()][c] += grad_y[c * np..(c + 1) * np].iter().sum::<f64>();
        }
        let mut grad_x = vec![0.0; self.in_c * h * w];
        if self.k == 1 {
            gemm_abt(
                self.out_c,
                np,
                self.in_c,
                1.0,
                grad_y,
                x,
                1.0,
                &mut g[self.w.clone()],
            );
            gemm_atb(self.in_c, self.out_c, np, 1.0, weights, grad_y, 0.0, &mut grad_x);
        } else {
            let mut cols = vec![0.0; self.in_c * 9 * np];
            im2col3(x, self.in_c, h, w, self.stride, &mut cols);
            gemm_abt(
                self.out_c,
                np,
                self.in_c * 9,
                1.0,
                grad_y,
                &cols,
                1.0,
                &mut g[self.w.clone()],
            );
            let mut grad_cols = vec![0.0; self.in_c * 9 * np];
            gemm_atb(
                self.in_c * 9,
                self.out_c,
                np,
                1.0,
                weights,
                grad_y,
                0.0,
                &mut grad_cols,
            );
            col2im3(&grad_cols, self.in_c, h, w, self.stride, &mut grad_x);
        }
        grad_x
    }
}

#[derive(Debug, Clone)]
struct Gn {
    c: usize,
    groups: usize,
    gamma: Range<usize>,
    beta: Range<usize>,
}

struct GnCache {
    mean: Vec<f64>,
    istd: Vec<f64>,
}

const GN_EPS: f64 = 1e-5;

impl Gn {
    fn new(a: &mut Alloc, c: usize, groups: usize) -> Self {
        debug_assert_eq!(c % groups, 0);
        Self {
            c,
            groups,
            gamma: a.take(c),
            beta: a.take(c),
        }
    }

    fn fwd(&self, p: &[f64], x: &[f64], hw: usize) -> (Vec<f64>, GnCache) {
        let cg = self.c / self.groups;
        let n = cg * hw;
        let gamma = &p[self.gamma.clone()];
        let beta = &p[self.beta.clone()];
        let mut y = vec![0.0; x.len()];
        let mut mean = vec![0.0; self.groups];
        let mut istd = vec![0.0; self.groups];
        for gi in 0..self.groups {
            let seg = &x[gi * n..(gi + 1) * n];
            let mu = seg.iter().sum::<f64>() / n as f64;
            let var = seg.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + GN_EPS).sqrt();
            mean[gi] = mu;
            istd[gi] = is;
            for ci in 0..cg {
                let c = gi * cg + ci;
                let (ga, be) = (gamma[c], beta[c]);
                let xs = &x[c * hw..(c + 1) * hw];
                let ys = &mut y[c * hw..(c + 1) * hw];
                for (yv, xv) in ys.iter_mut().zip(xs) {
                    *yv = ga * (xv - mu) * is + be;
                }
            }
        }
        (y, GnCache { mean, istd })
    }

    fn bwd(
        &self,
        p: &[f64],
        x: &[f64],
        cache: &GnCache,
        hw: usize,
        grad_y: &[f64],
        g: &mut [f64],
    ) -> Vec<f64> {
        let cg = self.c / self.groups;
        let n = cg * hw;
        let gamma = &p[self.gamma.clone()];
        let mut grad_x = vec![0.0; x.len()];
        for gi in 0..self.groups {
            let (mu, is) = (cache.mean[gi], cache.istd[gi]);
            let mut sum1 = 0.0;
            let mut sum2 = 0.0;
            for ci in 0..cg {
                let c = gi * cg + ci;
                let ga = gamma[c];
                let xs = &x[c * hw..(c + 1) * hw];
                let gys = &grad_y[c * hw..(c + 1) * hw];
                let mut dgam = 0.0;
                let mut dbet = 0.0;
                for (xv, gy) in xs.iter().zip(gys) {
                    let xhat = (xv - mu) * is;
                    let dxh = gy * ga;
                    sum1 += dxh;
                    sum2 += dxh * xhat;
                    dgam += gy * xhat;
                    dbet += gy;
                }
                g[self.gamma.clone()][c] += dgam;
                g[self.beta.clone()][c] += dbet;
            }
            let inv_n = 1.0 / n as f64;
            for ci in 0..cg {
                let c = gi * cg + ci;
                let ga = gamma[c];
                let xs = &x[c * hw..(c + 1) * hw];
                let gys = &grad_y[c * hw..(c + 1) * hw];
                let gxs = &mut grad_x[c * hw..(c + 1) * hw];
                for ((xv, gy), gx) in xs.iter().zip(gys).zip(gxs.iter_mut()) {
                    let xhat = (xv - mu) * is;
                    let dxh = gy * ga;
                    *gx = is * (dxh - inv_n * (sum1 + xhat * sum2));
                }
            }
        }
        grad_x
    }
}

#[derive(Debug, Clone)]
struct Lin {
    in_f: usize,
    out_f: usize,
    w: Range<usize>,
    b: Range<usize>,
}

impl Lin {
    fn new(a: &mut Alloc, in_f: usize, out_f: usize) -> Self {
        Self {
            in_f,
            out_f,
            w: a.take(out_f * in_f),
            b: a.take(out_f),
        }
    }

    fn fwd(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &p[self.w.clone()];
        let b = &p[self.b.clone()];
        let mut y = vec![0.0; self.out_f];
        for o in 0..self.out_f {
            let row = &w[o * self.in_f..(o + 1) * self.in_f];
            y[o] = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        y
    }

    fn bwd(&self, p: &[f64], x: &[f64], grad_y: &[f64], g: &mut [f64]) -> Vec<f64> {
        let w = &p[self.w.clone()];
        let mut grad_x = vec![0.0; self.in_f];
        for o in 0..self.out_f {
            let gy = grad_y[o];
            g[self.b.clone()][o] += gy;
            let grow = &mut g[self.w.clone()][o * self.in_f..(o + 1) * self.in_f];
            for (i, gw) in grow.iter_mut().enumerate() {
                *gw += gy * x[i];
            }
            let row = &w[o * self.in_f..(o + 1) * self.in_f];
            for (i, wv) in row.iter().enumerate() {
                grad_x[i] += gy * wv;
            }
        }
        grad_x
    }
}

#[derive(Debug, Clone)]
struct ResBlock {
    gn1: Gn,
    conv1: Conv,
    proj: Lin,
    gn2: Gn,
    conv2: Conv,
    skip: Option<Conv>,
}

struct RbCache {
    x: Vec<f64>,
    gn1: GnCache,
    a1: Vec<f64>,
    s1: Vec<f64>,
    h1: Vec<f64>,
    gn2: GnCache,
    a2: Vec<f64>,
    s2: Vec<f64>,
    h: usize,
    w: usize,
}

impl ResBlock {
    fn new(a: &mut Alloc, in_c: usize, out_c: usize, groups: usize, temb_dim: usize) -> Self {
        Self {
            gn1: Gn::new(a, in_c, groups),
            conv1: Conv::new(a, in_c, out_c, 1, 3),
            proj: Lin::new(a, temb_dim, out_c),
            gn2: Gn::new(a, out_c, groups),
            conv2: Conv::new(a, out_c, out_c, 1, 3),
            skip: if in_c != out_c {
                Some(Conv::new(a, in_c, out_c, 1, 1))
            } else {
                None
            },
        }
    }

    fn fwd(&self, p: &[f64], x: Vec<f64>, ts: &[f64], h: usize, w: usize) -> (Vec<f64>, RbCache) {
        let hw = h * w;
        let (a1, gn1c) = self.gn1.fwd(p, &x, hw);
        let mut s1 = a1.clone();
        silu(&mut s1);
        let (mut h1, _, _) = self.conv1.fwd(p, &s1, h, w);
        let bias = self.proj.fwd(p, ts);
        for c in 0..self.conv1.out_c {
            let bv = bias[c];
            for v in &mut h1[c * hw..(c + 1) * hw] {
                *v += bv;
            }
        }
        let (a2, gn2c) = self.gn2.fwd(p, &h1, hw);
        let mut s2 = a2.clone();
        silu(&mut s2);
        let (mut y, _, _) = self.conv2.fwd(p, &s2, h, w);
        match &self.skip {
            Some(sc) => {
                let (sk, _, _) = sc.fwd(p, &x, h, w);
                for (yv, sv) in y.iter_mut().zip(&sk) {
                    *yv += sv;
                }
            }
            None => {
                for (yv, xv) in y.iter_mut().zip(&x) {
                    *yv += xv;
                }
            }
        }
        let cache = RbCache {
            x,
            gn1: gn1c,
            a1,
            s1,
            h1,
            gn2: gn2c,
            a2,
            s2,
            h,
            w,
        };
        (y, cache)
    }

}

/// The noise-prediction network.
#[derive(Debug, Clone)]
pub struct UNet {
    pub arch: ArchConfig,
    params: Vec<f64>,
    temb1: Lin,
    temb2: Lin,
    stem: Conv,
    enc1: [ResBlock; 2],
    down1: Conv,
    enc2: [ResBlock; 2],
    down2: Conv,
    mid: [ResBlock; 2],
    up1: Conv,
    dec2: [ResBlock; 2],
    up2: Conv,
    dec1: [ResBlock; 2],
    out_gn: Gn,
    out_conv: Conv,
}

pub struct UNetCache {
    h: usize,
    w: usize,
    temb0: Vec<f64>,
    pre1: Vec<f64>,
    s_pre1: Vec<f64>,
    temb_act: Vec<f64>,
    ts: Vec<f64>,
    x_in: Vec<f64>,
    stem_out_shape: (usize, usize),
    e1: [RbCache; 2],
    skip1: Vec<f64>,
    e2: [RbCache; 2],
    skip2: Vec<f64>,
    m: [RbCache; 2],
    up1_ups: Vec<f64>,
    d2: [RbCache; 2],
    up2_ups: Vec<f64>,
    d1: [RbCache; 2],
    d1_out: Vec<f64>,
    ogn: GnCache,
    oa: Vec<f64>,
    os: Vec<f64>,
}

impl UNet {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let w = arch.base_width;
        let g = arch.groups;
        let e = arch.emb_dim;
        let mut a = Alloc { next: 0 };
        let temb1 = Lin::new(&mut a, e, e);
        let temb2 = Lin::new(&mut a, e, e);
        let stem = Conv::new(&mut a, 1, w, 1, 3);
        let enc1 = [
            ResBlock::new(&mut a, w, w, g, e),
            ResBlock::new(&mut a, w, w, g, e),
        ];
        let down1 = Conv::new(&mut a, w, 2 * w, 2, 3);
        let enc2 = [
            ResBlock::new(&mut a, 2 * w, 2 * w, g, e),
            ResBlock::new(&mut a, 2 * w, 2 * w, g, e),
        ];
        let down2 = Conv::new(&mut a, 2 * w, 4 * w, 2, 3);
        let mid = [
            ResBlock::new(&mut a, 4 * w, 4 * w, g, e),
            ResBlock::new(&mut a, 4 * w, 4 * w, g, e),
        ];
        let up1 = Conv::new(&mut a, 4 * w, 2 * w, 1, 3);
        let dec2 = [
            ResBlock::new(&mut a, 4 * w, 2 * w, g, e),
            ResBlock::new(&mut a, 2 * w, 2 * w, g, e),
        ];
        let up2 = Conv::new(&mut a, 2 * w, w, 1, 3);
        let dec1 = [
            ResBlock::new(&mut a, 2 * w, w, g, e),
            ResBlock::new(&mut a, w, w, g, e),
        ];
        let out_gn = Gn::new(&mut a, w, g);
        let out_conv = Conv::new(&mut a, w, 1, 1, 3);
        let mut net = Self {
            arch,
            params: vec![0.0; a.next],
            temb1,
            temb2,
            stem,
            enc1,
            down1,
            enc2,
            down2,
            mid,
            up1,
            dec2,
            up2,
            dec1,
            out_gn,
            out_conv,
        };
        net.init_params(seed);
        Ok(net)
    }

    pub fn from_params(arch: ArchConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::new(arch, 0)?;
        if params.len() != net.params.len() {
            return Err(Error::Format(format!(
                "parameter payload has {} values, architecture needs {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    fn init_params(&mut self, seed: u64) {
        let mut rng = rng_from_seed(seed ^ 0x5eed_0000_u64);
        let p = &mut self.params;
        let he = |rng: &mut SeedRng, p: &mut [f64], r: &Range<usize>, fan_in: usize| {
            use rand::Rng;
            let std = (2.0 / fan_in as f64).sqrt();
            for v in &mut p[r.clone()] {
                *v = rng.sample::<f64, _>(StandardNormal) * std;
            }
        };
        let conv_init = |rng: &mut SeedRng, p: &mut [f64], c: &Conv| {
            he(rng, p, &c.w, c.in_c * c.k * c.k);
        };
        let lin_init = |rng: &mut SeedRng, p: &mut [f64], l: &Lin| {
            he(rng, p, &l.w, l.in_f);
        };
        let gn_init = |p: &mut [f64], g: &Gn| {
            for v in &mut p[g.gamma.clone()] {
                *v = 1.0;
            }
        };
        lin_init(&mut rng, p, &self.temb1);
        lin_init(&mut rng, p, &self.temb2);
        conv_init(&mut rng, p, &self.stem);
        for rb in self
            .enc1
            .iter()
            .chain(&self.enc2)
            .chain(&self.mid)
            .chain(&self.dec2)
            .chain(&self.dec1)
        {
            gn_init(p, &rb.gn1);
            conv_init(&mut rng, p, &rb.conv1);
            lin_init(&mut rng, p, &rb.proj);
            gn_init(p, &rb.gn2);
            conv_init(&mut rng, p, &rb.conv2);
            if let Some(sc) = &rb.skip {
                conv_init(&mut rng, p, sc);
            }
        }
        conv_init(&mut rng, p, &self.down1);
        conv_init(&mut rng, p, &self.down2);
        conv_init(&mut rng, p, &self.up1);
        conv_init(&mut rng, p, &self.up2);
        gn_init(p, &self.out_gn);
        // Final conv stays zero: a fresh model predicts zero noise.
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        if h % 4 != 0 || w % 4 != 0 || h < 4 || w < 4 {
            return Err(Error::InvalidParameter(format!(
                "network input must have both sides divisible by 4, got {h}x{w}"
            )));
        }
        Ok(())
    }

    fn temb_forward(&self, t: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let temb0 = sinusoidal_embedding(t, self.arch.emb_dim);
        let pre1 = self.temb1.fwd(&self.params, &temb0);
        let mut s_pre1 = pre1.clone();
        silu(&mut s_pre1);
        let temb_act = self.temb2.fwd(&self.params, &s_pre1);
        let mut ts = temb_act.clone();
        silu(&mut ts);
        (temb0, pre1, s_pre1, temb_act, ts)
    }

    /// Inference forward: input and output are `(h * w)` single-channel
    /// buffers.
    pub fn forward(&self, x: &[f64], h: usize, w: usize, t: usize) -> Result<Vec<f64>> {
        let (y, _) = self.forward_cached(x, h, w, t)?;
        Ok(y)
    }

    /// Forward pass that retains every intermediate needed by
    /// [`UNet::backward`].
    pub fn forward_cached(
        &self,
        x: &[f64],
        h: usize,
        w: usize,
        t: usize,
    ) -> Result<(Vec<f64>, UNetCache)> {
        self.check_input(h, w)?;
        if x.len() != h * w {
            return Err(Error::InvalidParameter(format!(
                "input has {} values for a {h}x{w} grid",
                x.len()
            )));
        }
        let p = &self.params;
        let (temb0, pre1, s_pre1, temb_act, ts) = self.temb_forward(t);

        let x_in = x.to_vec();
        let (stem_out, _, _) = self.stem.fwd(p, &x_in, h, w);
        let (e1a_out, e1a) = self.enc1[0].fwd(p, stem_out, &ts, h, w);
        let (skip1, e1b) = self.enc1[1].fwd(p, e1a_out, &ts, h, w);

        let (d1_out, h2, w2) = self.down1.fwd(p, &skip1, h, w);
        let (e2a_out, e2a) = self.enc2[0].fwd(p, d1_out, &ts, h2, w2);
        let (skip2, e2b) = self.enc2[1].fwd(p, e2a_out, &ts, h2, w2);

        let (d2_out, h4, w4) = self.down2.fwd(p, &skip2, h2, w2);
        let (m1_out, m1) = self.mid[0].fwd(p, d2_out, &ts, h4, w4);
        let (mid_out, m2) = self.mid[1].fwd(p, m1_out, &ts, h4, w4);

        let wq = self.arch.base_width;
        let up1_ups = upsample2(&mid_out, 4 * wq, h4, w4);
        let (up1_out, _, _) = self.up1.fwd(p, &up1_ups, h2, w2);
        let mut cat2 = up1_out;
        cat2.extend_from_slice(&skip2);
        let (d2a_out, d2a) = self.dec2[0].fwd(p, cat2, &ts, h2, w2);
        let (d2_out_dec, d2b) = self.dec2[1].fwd(p, d2a_out, &ts, h2, w2);

        let up2_ups = upsample2(&d2_out_dec, 2 * wq, h2, w2);
        let (up2_out, _, _) = self.up2.fwd(p, &up2_ups, h, w);
        let mut cat1 = up2_out;
        cat1.extend_from_slice(&skip1);
        let (d1a_out, d1a) = self.dec1[0].fwd(p, cat1, &ts, h, w);
        let (d1_out_dec, d1b) = self.dec1[1].fwd(p, d1a_out, &ts, h, w);

        let (oa, ognc) = self.out_gn.fwd(p, &d1_out_dec, h * w);
        let mut os = oa.clone();
        silu(&mut os);
        let (y, _, _) = self.out_conv.fwd(p, &os, h, w);

        let cache = UNetCache {
            h,
            w,
            temb0,
            pre1,
            s_pre1,
            temb_act,
            ts,
            x_in,
            stem_out_shape: (h, w),
            e1: [e1a, e1b],
            skip1,
            e2: [e2a, e2b],
            skip2,
            m: [m1, m2],
            up1_ups,
            d2: [d2a, d2b],
            up2_ups,
            d1: [d1a, d1b],
            d1_out: d1_out_dec,
            ogn: ognc,
            oa,
            os,
        };
        Ok((y, cache))
    }

    fn rb_backward(
        &self,
        rb: &ResBlock,
        cache: &RbCache,
        grad_y: &[f64],
        ts: &[f64],
        grad_ts: &mut [f64],
        g: &mut [f64],
    ) -> Vec<f64> {
        let p = &self.params;
        let (h, w) = (cache.h, cache.w);
        let hw = h * w;
        let grad_s2 = rb.conv2.bwd(p, &cache.s2, h, w, grad_y, g);
        let mut grad_a2 = vec![0.0; grad_s2.len()];
        silu_backward(&cache.a2, &grad_s2, &mut grad_a2);
        let grad_h1 = rb.gn2.bwd(p, &cache.h1, &cache.gn2, hw, &grad_a2, g);
        let mut grad_bias = vec![0.0; rb.conv1.out_c];
        for c in 0..rb.conv1.out_c {
            grad_bias[c] = grad_h1[c * hw..(c + 1) * hw].iter().sum();
        }
        let gts = rb.proj.bwd(p, ts, &grad_bias, g);
        for (a, b) in grad_ts.iter_mut().zip(&gts) {
            *a += b;
        }
        let grad_s1 = rb.conv1.bwd(p, &cache.s1, h, w, &grad_h1, g);
        let mut grad_a1 = vec![0.0; grad_s1.len()];
        silu_backward(&cache.a1, &grad_s1, &mut grad_a1);
        let mut grad_x = rb.gn1.bwd(p, &cache.x, &cache.gn1, hw, &grad_a1, g);
        match &rb.skip {
            Some(sc) => {
                let gsk = sc.bwd(p, &cache.x, h, w, grad_y, g);
                for (gx, gs) in grad_x.iter_mut().zip(&gsk) {
                    *gx += gs;
                }
            }
            None => {
                for (gx, gy) in grad_x.iter_mut().zip(grad_y) {
                    *gx += gy;
                }
            }
        }
        grad_x
    }

    /// Accumulate parameter gradients for one sample into `grads`
    /// (a buffer of `param_count` zeros or running sums).
    pub fn backward(&self, cache: &UNetCache, grad_y: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        let p = &self.params;
        let (h, w) = (cache.h, cache.w);
        let hw = h * w;
        let wq = self.arch.base_width;
        let (h2, w2) = (h / 2, w / 2);
        let (h4, w4) = (h / 4, w / 4);
        let mut grad_ts = vec![0.0; self.arch.emb_dim];

        // Output head.
        let grad_os = self.out_conv.bwd(p, &cache.os, h, w, grad_y, grads);
        let mut grad_oa = vec![0.0; grad_os.len()];
        silu_backward(&cache.oa, &grad_os, &mut grad_oa);
        let grad_d1_out = self
            .out_gn
            .bwd(p, &cache.d1_out, &cache.ogn, hw, &grad_oa, grads);

        // Decoder level 1.
        let g_d1a_out = self.rb_backward(&self.dec1[1], &cache.d1[1], &grad_d1_out, &cache.ts, &mut grad_ts, grads);
        let g_cat1 = self.rb_backward(&self.dec1[0], &cache.d1[0], &g_d1a_out, &cache.ts, &mut grad_ts, grads);
        let (g_up2_out, mut g_skip1) = {
            let split = wq * hw;
            (g_cat1[..split].to_vec(), g_cat1[split..].to_vec())
        };
        let g_up2_ups = self.up2.bwd(p, &cache.up2_ups, h, w, &g_up2_out, grads);
        let g_d2_out = upsample2_backward(&g_up2_ups, 2 * wq, h2, w2);

        // Decoder level 2.
        let g_d2a_out = self.rb_backward(&self.dec2[1], &cache.d2[1], &g_d2_out, &cache.ts, &mut grad_ts, grads);
        let g_cat2 = self.rb_backward(&self.dec2[0], &cache.d2[0], &g_d2a_out, &cache.ts, &mut grad_ts, grads);
        let (g_up1_out, mut g_skip2) = {
            let split = 2 * wq * h2 * w2;
            (g_cat2[..split].to_vec(), g_cat2[split..].to_vec())
        };
        let g_up1_ups = self.up1.bwd(p, &cache.up1_ups, h2, w2, &g_up1_out, grads);
        let g_mid_out = upsample2_backward(&g_up1_ups, 4 * wq, h4, w4);

        // Bottleneck.
        let g_m1_out = self.rb_backward(&self.mid[1], &cache.m[1], &g_mid_out, &cache.ts, &mut grad_ts, grads);
        let g_d2_in = self.rb_backward(&self.mid[0], &cache.m[0], &g_m1_out, &cache.ts, &mut grad_ts, grads);
        let g_skip2_from_down = self.down2.bwd(p, &cache.skip2, h2, w2, &g_d2_in, grads);
        for (a, b) in g_skip2.iter_mut().zip(&g_skip2_from_down) {
            *a += b;
        }

        // Encoder level 2.
        let g_e2a_out = self.rb_backward(&self.enc2[1], &cache.e2[1], &g_skip2, &cache.ts, &mut grad_ts, grads);
        let g_d1_in = self.rb_backward(&self.enc2[0], &cache.e2[0], &g_e2a_out, &cache.ts, &mut grad_ts, grads);
        let g_skip1_from_down = self.down1.bwd(p, &cache.skip1, h, w, &g_d1_in, grads);
        for (a, b) in g_skip1.iter_mut().zip(&g_skip1_from_down) {
            *a += b;
        }

        // Encoder level 1 and stem.
        let g_e1a_out = self.rb_backward(&self.enc1[1], &cache.e1[1], &g_skip1, &cache.ts, &mut grad_ts, grads);
        let g_stem_out = self.rb_backward(&self.enc1[0], &cache.e1[0], &g_e1a_out, &cache.ts, &mut grad_ts, grads);
        let _ = self
            .stem
            .bwd(p, &cache.x_in, cache.stem_out_shape.0, cache.stem_out_shape.1, &g_stem_out, grads);

        // Timestep MLP.
        let mut grad_temb_act = vec![0.0; self.arch.emb_dim];
        silu_backward(&cache.temb_act, &grad_ts, &mut grad_temb_act);
        let grad_s_pre1 = self.temb2.bwd(p, &cache.s_pre1, &grad_temb_act, grads);
        let mut grad_pre1 = vec![0.0; self.arch.emb_dim];
        silu_backward(&cache.pre1, &grad_s_pre1, &mut grad_pre1);
        let _ = self.temb1.bwd(p, &cache.temb0, &grad_pre1, grads);
    }
}
