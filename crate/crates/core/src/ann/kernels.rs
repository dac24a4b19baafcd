//! Forward and backward kernels on flat row-major slices.
//!
//! Image tensors are `[channels, height, width]`. Backward kernels *accumulate*
//! into their gradient outputs, so callers zero them first.

/// `y[o] = sum_i w[o, i] * x[i]`
pub fn dense_forward(w: &[f64], n_out: usize, x: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (o, out) in y.iter_mut().enumerate().take(n_out) {
        let row = &w[o * n_in..(o + 1) * n_in];
        *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

pub fn dense_backward(
    w: &[f64],
    x: &[f64],
    gy: &[f64],
    gw: &mut [f64],
    gx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, &g) in gy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let grow = &mut gw[o * n_in..(o + 1) * n_in];
        for (gwi, &xi) in grow.iter_mut().zip(x) {
            *gwi += g * xi;
        }
    }
    if let Some(gx) = gx {
        for (o, &g) in gy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &w[o * n_in..(o + 1) * n_in];
            for (gxi, &wi) in gx.iter_mut().zip(row) {
                *gxi += g * wi;
            }
        }
    }
}

/// Geometry of a valid (unpadded) strided convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.k_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.k_w) / self.stride + 1
    }

    pub fn kernel_len(&self) -> usize {
        self.in_ch * self.k_h * self.k_w
    }
}

pub fn conv_forward(g: &ConvGeometry, w: &[f64], x: &[f64], y: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    y.iter_mut().for_each(|v| *v = 0.0);
    for o in 0..g.out_ch {
        let out = &mut y[o * oh * ow..(o + 1) * oh * ow];
        for c in 0..g.in_ch {
            let plane = &x[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
            for ky in 0..g.k_h {
                for kx in 0..g.k_w {
                    let wv = w[((o * g.in_ch + c) * g.k_h + ky) * g.k_w + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let row = &plane[(oy * g.stride + ky) * g.in_w..];
                        let orow = &mut out[oy * ow..(oy + 1) * ow];
                        for (ox, ov) in orow.iter_mut().enumerate() {
                            *ov += wv * row[ox * g.stride + kx];
                        }
                    }
                }
            }
        }
    }
}

pub fn conv_backward(
    g: &ConvGeometry,
    w: &[f64],
    x: &[f64],
    gy: &[f64],
    gw: &mut [f64],
    mut gx: Option<&mut [f64]>,
) {
    let (oh, ow) = (g.out_h(), g.out_w());
    for o in 0..g.out_ch {
        let gout = &gy[o * oh * ow..(o + 1) * oh * ow];
        for c in 0..g.in_ch {
            let plane = c * g.in_h * g.in_w;
            for ky in 0..g.k_h {
                for kx in 0..g.k_w {
                    let widx = ((o * g.in_ch + c) * g.k_h + ky) * g.k_w + kx;
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let base = plane + (oy * g.stride + ky) * g.in_w + kx;
                        for ox in 0..ow {
                            acc += gout[oy * ow + ox] * x[base + ox * g.stride];
                        }
                    }
                    gw[widx] += acc;
                    if let Some(gx) = gx.as_deref_mut() {
                        let wv = w[widx];
                        for oy in 0..oh {
                            let base = plane + (oy * g.stride + ky) * g.in_w + kx;
                            for ox in 0..ow {
                                gx[base + ox * g.stride] += wv * gout[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Non-overlapping `size x size` average pooling; trailing rows/cols that do
/// not fill a window are dropped.
pub fn avgpool_forward(size: usize, ch: usize, h: usize, w: usize, x: &[f64], y: &mut [f64]) {
    let (oh, ow) = (h / size, w / size);
    let norm = 1.0 / (size * size) as f64;
    for c in 0..ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for dy in 0..size {
                    let row = (c * h + oy * size + dy) * w + ox * size;
                    acc += x[row..row + size].iter().sum::<f64>();
                }
                y[(c * oh + oy) * ow + ox] = acc * norm;
            }
        }
    }
}

pub fn avgpool_backward(size: usize, ch: usize, h: usize, w: usize, gy: &[f64], gx: &mut [f64]) {
    let (oh, ow) = (h / size, w / size);
    let norm = 1.0 / (size * size) as f64;
    for c in 0..ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = gy[(c * oh + oy) * ow + ox] * norm;
                for dy in 0..size {
                    let row = (c * h + oy * size + dy) * w + ox * size;
                    gx[row..row + size].iter_mut().for_each(|v| *v += g);
                }
            }
        }
    }
}
