//! Single-image layer kernels over CHW slices.
//!
//! Accumulation runs in `f64`; results are rounded to `f32` once per output
//! element.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Window {
    /// Output extent along one axis, `None` if the window does not fit.
    pub fn output_len(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if self.kernel == 0 || self.stride == 0 || padded < self.kernel {
            return None;
        }
        Some((padded - self.kernel) / self.stride + 1)
    }

    /// Input coordinate covered by output position `o` and kernel tap `k`.
    #[inline]
    fn source(&self, o: usize, k: usize, len: usize) -> Option<usize> {
        let pos = (o * self.stride + k).checked_sub(self.padding)?;
        (pos < len).then_some(pos)
    }
}

/// Standard convolution. `weight` is `[out_c, in_c, k, k]`, `bias` is `[out_c]`.
pub fn conv2d(
    input: &[f32],
    (in_c, h, w): (usize, usize, usize),
    weight: &[f32],
    bias: &[f32],
    out_c: usize,
    win: Window,
) -> Vec<f32> {
    let (oh, ow) = (
        win.output_len(h).unwrap_or(0),
        win.output_len(w).unwrap_or(0),
    );
    let k = win.kernel;
    let mut out = Vec::with_capacity(out_c * oh * ow);
    let mut acc = vec![0.0f64; oh * ow];
    for oc in 0..out_c {
        acc.fill(f64::from(bias[oc]));
        for ic in 0..in_c {
            let plane = &input[ic * h * w..(ic + 1) * h * w];
            let kern = &weight[(oc * in_c + ic) * k * k..(oc * in_c + ic + 1) * k * k];
            accumulate_plane(&mut acc, plane, (h, w), (oh, ow), kern, win);
        }
        out.extend(acc.iter().map(|&v| v as f32));
    }
    out
}

/// Adds one input plane convolved with one `k x k` kernel into `acc`.
///
/// Taps are visited in `ky, kx` order, so every output element sums its
/// products in the same order as a direct per-element loop.
fn accumulate_plane(
    acc: &mut [f64],
    plane: &[f32],
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    kern: &[f32],
    win: Window,
) {
    let k = win.kernel;
    for ky in 0..k {
        for kx in 0..k {
            let kv = f64::from(kern[ky * k + kx]);
            // output columns whose tap lands inside the row
            let ox_lo = win.padding.saturating_sub(kx).div_ceil(win.stride);
            let ox_hi = (w + win.padding)
                .saturating_sub(kx)
                .div_ceil(win.stride)
                .min(ow);
            if ox_lo >= ox_hi {
                continue;
            }
            for oy in 0..oh {
                let Some(iy) = win.source(oy, ky, h) else {
                    continue;
                };
                let row = &plane[iy * w..(iy + 1) * w];
                let dst = &mut acc[oy * ow + ox_lo..oy * ow + ox_hi];
                let ix0 = ox_lo * win.stride + kx - win.padding;
                if win.stride == 1 {
                    for (a, &x) in dst.iter_mut().zip(&row[ix0..ix0 + (ox_hi - ox_lo)]) {
                        *a += f64::from(x) * kv;
                    }
                } else {
                    for (j, a) in dst.iter_mut().enumerate() {
                        *a += f64::from(row[ix0 + j * win.stride]) * kv;
                    }
                }
            }
        }
    }
}

/// Depthwise convolution with channel multiplier 1. `weight` is `[c, 1, k, k]`.
pub fn depthwise_conv2d(
    input: &[f32],
    (c, h, w): (usize, usize, usize),
    weight: &[f32],
    bias: &[f32],
    win: Window,
) -> Vec<f32> {
    let (oh, ow) = (
        win.output_len(h).unwrap_or(0),
        win.output_len(w).unwrap_or(0),
    );
    let k = win.kernel;
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut acc = vec![0.0f64; oh * ow];
    for ch in 0..c {
        acc.fill(f64::from(bias[ch]));
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        let kern = &weight[ch * k * k..(ch + 1) * k * k];
        accumulate_plane(&mut acc, plane, (h, w), (oh, ow), kern, win);
        out.extend(acc.iter().map(|&v| v as f32));
    }
    out
}

/// `y = W x + b` with `W` stored row-major as `[out, in]`.
pub fn dense(input: &[f32], weight: &[f32], bias: &[f32]) -> Vec<f32> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &weight[o * n_in..(o + 1) * n_in];
            let acc = row.iter().zip(input).fold(f64::from(b), |acc, (&wv, &xv)| {
                acc + f64::from(wv) * f64::from(xv)
            });
            acc as f32
        })
        .collect()
}

/// Max pooling; padded positions never win.
pub fn max_pool(input: &[f32], (c, h, w): (usize, usize, usize), win: Window) -> Vec<f32> {
    pool(input, (c, h, w), win, |vals| {
        vals.fold(f32::NEG_INFINITY, f32::max)
    })
}

/// Average pooling; padded positions count as zeros in the divisor.
pub fn avg_pool(input: &[f32], (c, h, w): (usize, usize, usize), win: Window) -> Vec<f32> {
    let area = (win.kernel * win.kernel) as f64;
    pool(input, (c, h, w), win, |vals| {
        (vals.fold(0.0f64, |a, v| a + f64::from(v)) / area) as f32
    })
}

fn pool<F>(input: &[f32], (c, h, w): (usize, usize, usize), win: Window, reduce: F) -> Vec<f32>
where
    F: Fn(&mut dyn Iterator<Item = f32>) -> f32,
{
    let (oh, ow) = (
        win.output_len(h).unwrap_or(0),
        win.output_len(w).unwrap_or(0),
    );
    let k = win.kernel;
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut taps = (0..k)
                    .flat_map(|ky| (0..k).map(move |kx| (ky, kx)))
                    .filter_map(|(ky, kx)| {
                        let iy = win.source(oy, ky, h)?;
                        let ix = win.source(ox, kx, w)?;
                        Some(plane[iy * w + ix])
                    });
                out.push(reduce(&mut taps));
            }
        }
    }
    out
}

/// Numerically stable softmax over all elements.
pub fn softmax(input: &[f32]) -> Vec<f32> {
    let max = input.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = input
        .iter()
        .map(|&v| libm::exp(f64::from(v) - f64::from(max)))
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| (e / sum) as f32).collect()
}
