//! Minimal dense-tensor neural-network kernels: 3x3/1x1 convolutions via
//! im2col + GEMM, group normalization, SiLU, linear layers, nearest
//! upsampling, and Adam. Everything is f64 and runs on the CPU; forward and
//! backward passes are hand-written and checked against finite differences
//! in the tests.
//!
//! Activations are `(channels, height, width)` flat buffers. Parameters of
//! a whole model live in one flat arena (`Vec<f64>`), with each layer
//! holding offsets into it; gradients use a mirror arena of the same
//! layout, which keeps the optimizer and checkpoint serialization trivial.

pub mod unet;

pub use unet::{ArchConfig, UNet};

/// Row-major GEMM: `c = alpha * a(m x k) * b(k x n) + beta * c`.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = alpha * a(m x k) * b(n x k)^T + beta * c`.
pub(crate) fn gemm_abt(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = alpha * a(k x m)^T * b(k x n) + beta * c`.
pub(crate) fn gemm_atb(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// SiLU (sigmoid-weighted linear) activation, in place.
pub(crate) fn silu(x: &mut [f64]) {
    for v in x {
        *v *= sigmoid(*v);
    }
}

/// Gradient of SiLU given the pre-activation input.
pub(crate) fn silu_backward(pre: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
    for ((&x, &g), gi) in pre.iter().zip(grad_out).zip(grad_in) {
        let s = sigmoid(x);
        *gi = g * (s + x * s * (1.0 - s));
    }
}

/// Output spatial size of a 3x3 convolution with padding 1.
#[inline]
pub(crate) fn conv_out(h: usize, stride: usize) -> usize {
    (h - 1) / stride + 1
}

/// im2col for a 3x3 kernel with padding 1: `cols` is `(in_c * 9, p)` where
/// `p = h_out * w_out`.
pub(crate) fn im2col3(
    x: &[f64],
    in_c: usize,
    h: usize,
    w: usize,
    stride: usize,
    cols: &mut [f64],
) {
    let ho = conv_out(h, stride);
    let wo = conv_out(w, stride);
    let p = ho * wo;
    debug_assert_eq!(cols.len(), in_c * 9 * p);
    for c in 0..in_c {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for kh in 0..3usize {
            for kw in 0..3usize {
                let row = &mut cols[(c * 9 + kh * 3 + kw) * p..(c * 9 + kh * 3 + kw + 1) * p];
                for oh in 0..ho {
                    let ih = (oh * stride + kh) as isize - 1;
                    let base = oh * wo;
                    if ih < 0 || ih >= h as isize {
                        row[base..base + wo].fill(0.0);
                        continue;
                    }
                    let ih = ih as usize;
                    for ow in 0..wo {
                        let iw = (ow * stride + kw) as isize - 1;
                        row[base + ow] = if iw < 0 || iw >= w as isize {
                            0.0
                        } else {
                            plane[ih * w + iw as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add transpose of [`im2col3`]: accumulates `cols` back into an
/// `(in_c, h, w)` gradient buffer.
pub(crate) fn col2im3(
    cols: &[f64],
    in_c: usize,
    h: usize,
    w: usize,
    stride: usize,
    grad_x: &mut [f64],
) {
    let ho = conv_out(h, stride);
    let wo = conv_out(w, stride);
    let p = ho * wo;
    debug_assert_eq!(cols.len(), in_c * 9 * p);
    debug_assert_eq!(grad_x.len(), in_c * h * w);
    for c in 0..in_c {
        let plane = &mut grad_x[c * h * w..(c + 1) * h * w];
        for kh in 0..3usize {
            for kw in 0..3usize {
                let row = &cols[(c * 9 + kh * 3 + kw) * p..(c * 9 + kh * 3 + kw + 1) * p];
                for oh in 0..ho {
                    let ih = (oh * stride + kh) as isize - 1;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let ih = ih as usize;
                    let base = oh * wo;
                    for ow in 0..wo {
                        let iw = (ow * stride + kw) as isize - 1;
                        if iw >= 0 && iw < w as isize {
                            plane[ih * w + iw as usize] += row[base + ow];
                        }
                    }
                }
            }
        }
    }
}

/// Nearest-neighbor 2x upsampling `(c, h, w) -> (c, 2h, 2w)`.
pub(crate) fn upsample2(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let mut y = vec![0.0; c * 4 * h * w];
    let (h2, w2) = (2 * h, 2 * w);
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        let dst = &mut y[ch * h2 * w2..(ch + 1) * h2 * w2];
        for i in 0..h {
            for j in 0..w {
                let v = src[i * w + j];
                let r0 = 2 * i * w2 + 2 * j;
                dst[r0] = v;
                dst[r0 + 1] = v;
                dst[r0 + w2] = v;
                dst[r0 + w2 + 1] = v;
            }
        }
    }
    y
}

/// Backward of [`upsample2`]: sums each 2x2 block.
pub(crate) fn upsample2_backward(gy: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let mut gx = vec![0.0; c * h * w];
    let (h2, w2) = (2 * h, 2 * w);
    for ch in 0..c {
        let src = &gy[ch * h2 * w2..(ch + 1) * h2 * w2];
        let dst = &mut gx[ch * h * w..(ch + 1) * h * w];
        for i in 0..h {
            for j in 0..w {
                let r0 = 2 * i * w2 + 2 * j;
                dst[i * w + j] = src[r0] + src[r0 + 1] + src[r0 + w2] + src[r0 + w2 + 1];
            }
        }
    }
    gx
}

/// Sinusoidal embedding of an integer timestep: `[sin(t f_i).., cos(t f_i)..]`
/// with log-spaced frequencies from 1 down to 1/10000.
pub(crate) fn sinusoidal_embedding(t: usize, dim: usize) -> Vec<f64> {
    debug_assert!(dim >= 2 && dim % 2 == 0);
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    let denom = if half > 1 { (half - 1) as f64 } else { 1.0 };
    for i in 0..half {
        let freq = (-(10000.0f64.ln()) * i as f64 / denom).exp();
        out.push((t as f64 * freq).sin());
    }
    for i in 0..half {
        let freq = (-(10000.0f64.ln()) * i as f64 / denom).exp();
        out.push((t as f64 * freq).cos());
    }
    out
}

/// Adam with the standard moment defaults and bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), c> == <x, col2im(c)> for random x, c.
        let (in_c, h, w) = (2usize, 5usize, 4usize);
        for stride in [1usize, 2] {
            let p = conv_out(h, stride) * conv_out(w, stride);
            let mut rng = crate::rng::rng_from_seed(1);
            let x: Vec<f64> = (0..in_c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..in_c * 9 * p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut cols = vec![0.0; in_c * 9 * p];
            im2col3(&x, in_c, h, w, stride, &mut cols);
            let mut back = vec![0.0; in_c * h * w];
            col2im3(&c, in_c, h, w, stride, &mut back);
            let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10, "stride {stride}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn upsample_and_backward_are_adjoint() {
        let (c, h, w) = (3usize, 4usize, 5usize);
        let mut rng = crate::rng::rng_from_seed(2);
        let x: Vec<f64> = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gy: Vec<f64> = (0..c * 4 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = upsample2(&x, c, h, w);
        let gx = upsample2_backward(&gy, c, h, w);
        let lhs: f64 = y.iter().zip(&gy).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn silu_gradient_matches_finite_differences() {
        let pre = [-2.0, -0.5, 0.0, 0.3, 1.7];
        let go = [1.0; 5];
        let mut gi = [0.0; 5];
        silu_backward(&pre, &go, &mut gi);
        for (i, &x) in pre.iter().enumerate() {
            let eps = 1e-6;
            let f = |v: f64| v * sigmoid(v);
            let fd = (f(x + eps) - f(x - eps)) / (2.0 * eps);
            assert!((gi[i] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn embedding_shape_and_range() {
        let e = sinusoidal_embedding(100, 32);
        assert_eq!(e.len(), 32);
        assert!(e.iter().all(|v| v.abs() <= 1.0));
        // First sine tap uses frequency 1.
        assert!((e[0] - (100.0f64).sin()).abs() < 1e-12);
        assert_ne!(sinusoidal_embedding(1, 32), sinusoidal_embedding(2, 32));
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut p, &g, 0.05);
        }
        assert!(p.iter().all(|v| v.abs() < 1e-2), "{p:?}");
    }

    #[test]
    fn gemm_variants_agree_with_naive() {
        let (m, k, n) = (3usize, 4usize, 5usize);
        let mut rng = crate::rng::rng_from_seed(3);
        let a: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, 1.0, &a, &b, 0.0, &mut c);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|l| a[i * k + l] * b[l * n + j]).sum();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
        // a * b^T with b stored (n x k).
        let bt: Vec<f64> = {
            let mut t = vec![0.0; n * k];
            for l in 0..k {
                for j in 0..n {
                    t[j * k + l] = b[l * n + j];
                }
            }
            t
        };
        let mut c2 = vec![0.0; m * n];
        gemm_abt(m, k, n, 1.0, &a, &bt, 0.0, &mut c2);
        for (x, y) in c.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-12);
        }
        // a^T * b with a stored (k x m).
        let at: Vec<f64> = {
            let mut t = vec![0.0; k * m];
            for i in 0..m {
                for l in 0..k {
                    t[l * m + i] = a[i * k + l];
                }
            }
            t
        };
        let mut c3 = vec![0.0; m * n];
        gemm_atb(m, k, n, 1.0, &at, &b, 0.0, &mut c3);
        for (x, y) in c.iter().zip(&c3) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
