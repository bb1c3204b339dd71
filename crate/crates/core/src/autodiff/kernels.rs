//! Dense compute kernels shared by the tape ops. All slices are row-major.

use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.h - self.kh) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w - self.kw) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    fn in_sample_len(&self) -> usize {
        self.c_in * self.h * self.w
    }

    fn out_sample_len(&self) -> usize {
        self.c_out * self.positions()
    }
}

/// Unfolds one sample into a `[patch_len, positions]` matrix.
fn im2col(g: &ConvGeometry, x: &[f64], col: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    let mut k = 0;
    for ci in 0..g.c_in {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = &mut col[k * p..(k + 1) * p];
                for oy in 0..oh {
                    let src = &plane[(oy * g.stride + ky) * g.w + kx..];
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if g.stride == 1 {
                        dst.copy_from_slice(&src[..ow]);
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate() {
                            *d = src[ox * g.stride];
                        }
                    }
                }
                k += 1;
            }
        }
    }
}

/// Scatter-adds a `[patch_len, positions]` matrix back onto one sample.
fn col2im(g: &ConvGeometry, col: &[f64], dx: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    let mut k = 0;
    for ci in 0..g.c_in {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = &col[k * p..(k + 1) * p];
                for oy in 0..oh {
                    let base = (oy * g.stride + ky) * g.w + kx;
                    for ox in 0..ow {
                        plane[base + ox * g.stride] += row[oy * ow + ox];
                    }
                }
                k += 1;
            }
        }
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn conv2d_forward(g: &ConvGeometry, x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let k_len = g.patch_len();
    let p = g.positions();
    let mut out = vec![0.0; g.n * g.out_sample_len()];
    out.par_chunks_mut(g.out_sample_len())
        .zip(x.par_chunks(g.in_sample_len()))
        .for_each(|(out_n, x_n)| {
            let mut col = vec![0.0; k_len * p];
            im2col(g, x_n, &mut col);
            for co in 0..g.c_out {
                let out_row = &mut out_n[co * p..(co + 1) * p];
                out_row.fill(bias[co]);
                let w_row = &weight[co * k_len..(co + 1) * k_len];
                for (k, &wv) in w_row.iter().enumerate() {
                    axpy(wv, &col[k * p..(k + 1) * p], out_row);
                }
            }
        });
    out
}

pub(crate) struct ConvGrads {
    pub input: Option<Vec<f64>>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-sample gradients are computed independently and summed in sample
/// order, so the result does not depend on scheduling.
/// Per-sample weight grads, bias grads and (optionally) input grads.
type SampleGrads = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

pub(crate) fn conv2d_backward(
    g: &ConvGeometry,
    x: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    need_input: bool,
) -> ConvGrads {
    let k_len = g.patch_len();
    let p = g.positions();
    let per_sample: Vec<SampleGrads> = x
        .par_chunks(g.in_sample_len())
        .zip(grad_out.par_chunks(g.out_sample_len()))
        .map(|(x_n, g_n)| {
            let mut col = vec![0.0; k_len * p];
            im2col(g, x_n, &mut col);
            let mut dw = vec![0.0; g.c_out * k_len];
            let mut db = vec![0.0; g.c_out];
            for co in 0..g.c_out {
                let g_row = &g_n[co * p..(co + 1) * p];
                db[co] = g_row.iter().sum();
                for k in 0..k_len {
                    dw[co * k_len + k] = dot(g_row, &col[k * p..(k + 1) * p]);
                }
            }
            let dx = need_input.then(|| {
                col.fill(0.0);
                for co in 0..g.c_out {
                    let g_row = &g_n[co * p..(co + 1) * p];
                    for k in 0..k_len {
                        axpy(weight[co * k_len + k], g_row, &mut col[k * p..(k + 1) * p]);
                    }
                }
                let mut dx = vec![0.0; g.in_sample_len()];
                col2im(g, &col, &mut dx);
                dx
            });
            (dw, db, dx)
        })
        .collect();

    let mut weight_grad = vec![0.0; g.c_out * k_len];
    let mut bias_grad = vec![0.0; g.c_out];
    let mut input_grad = need_input.then(|| Vec::with_capacity(x.len()));
    for (dw, db, dx) in per_sample {
        axpy(1.0, &dw, &mut weight_grad);
        axpy(1.0, &db, &mut bias_grad);
        if let (Some(acc), Some(dx)) = (input_grad.as_mut(), dx) {
            acc.extend_from_slice(&dx);
        }
    }
    ConvGrads {
        input: input_grad,
        weight: weight_grad,
        bias: bias_grad,
    }
}

/// Max pooling over `[planes, h, w]`; returns outputs and, for each output,
/// the flat input index of the first maximum in row-major window order.
pub(crate) fn maxpool_forward(
    x: &[f64],
    planes: usize,
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
) -> (Vec<f64>, Vec<usize>) {
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    for pl in 0..planes {
        let base = pl * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = base + oy * stride * w + ox * stride;
                let mut best = x[best_idx];
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let idx = base + (oy * stride + ky) * w + ox * stride + kx;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    (out, argmax)
}

/// `[n, d] x [d, u] + [u]`.
pub(crate) fn dense_forward(x: &[f64], n: usize, d: usize, weight: &[f64], u: usize, bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * u];
    for i in 0..n {
        let row = &mut out[i * u..(i + 1) * u];
        row.copy_from_slice(bias);
        for k in 0..d {
            let xv = x[i * d + k];
            if xv != 0.0 {
                axpy(xv, &weight[k * u..(k + 1) * u], row);
            }
        }
    }
    out
}

pub(crate) fn dense_backward(
    x: &[f64],
    n: usize,
    d: usize,
    weight: &[f64],
    u: usize,
    grad_out: &[f64],
    need_input: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut dw = vec![0.0; d * u];
    let mut db = vec![0.0; u];
    for i in 0..n {
        let g_row = &grad_out[i * u..(i + 1) * u];
        axpy(1.0, g_row, &mut db);
        for k in 0..d {
            let xv = x[i * d + k];
            if xv != 0.0 {
                axpy(xv, g_row, &mut dw[k * u..(k + 1) * u]);
            }
        }
    }
    let dx = need_input.then(|| {
        let mut dx = vec![0.0; n * d];
        for i in 0..n {
            let g_row = &grad_out[i * u..(i + 1) * u];
            for k in 0..d {
                dx[i * d + k] = dot(g_row, &weight[k * u..(k + 1) * u]);
            }
        }
        dx
    });
    (dx, dw, db)
}
