//! Same-padded, stride-1 2-D convolution kernels over `[N, C, H, W]` buffers.

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

impl ConvDims {
    fn pad(&self) -> isize {
        (self.k / 2) as isize
    }

    /// Rows `y` of the output that read input row `y + dy`, and likewise for columns.
    fn span(len: usize, d: isize) -> (usize, usize) {
        let lo = (-d).max(0) as usize;
        let hi = (len as isize - d).min(len as isize).max(0) as usize;
        (lo, hi.max(lo))
    }
}

pub(crate) fn forward(d: ConvDims, input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let hw = d.h * d.w;
    let kk = d.k * d.k;
    for n in 0..d.n {
        for o in 0..d.c_out {
            let plane = &mut out[(n * d.c_out + o) * hw..][..hw];
            plane.iter_mut().for_each(|v| *v = bias[o]);
            for i in 0..d.c_in {
                let src = &input[(n * d.c_in + i) * hw..][..hw];
                let taps = &weight[(o * d.c_in + i) * kk..][..kk];
                for ky in 0..d.k {
                    let dy = ky as isize - d.pad();
                    let (y0, y1) = ConvDims::span(d.h, dy);
                    for kx in 0..d.k {
                        let dx = kx as isize - d.pad();
                        let (x0, x1) = ConvDims::span(d.w, dx);
                        let tap = taps[ky * d.k + kx];
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let dst = &mut plane[y * d.w + x0..y * d.w + x1];
                            let s0 = (x0 as isize + dx) as usize;
                            let row = &src[sy * d.w + s0..sy * d.w + s0 + (x1 - x0)];
                            for (o, s) in dst.iter_mut().zip(row) {
                                *o += tap * s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates input, weight and bias gradients for upstream gradient `g_out`.
pub(crate) fn backward(
    d: ConvDims,
    input: &[f64],
    weight: &[f64],
    g_out: &[f64],
    g_in: &mut [f64],
    g_weight: &mut [f64],
    g_bias: &mut [f64],
) {
    let hw = d.h * d.w;
    let kk = d.k * d.k;
    for n in 0..d.n {
        for o in 0..d.c_out {
            let go = &g_out[(n * d.c_out + o) * hw..][..hw];
            g_bias[o] += go.iter().sum::<f64>();
            for i in 0..d.c_in {
                let src = &input[(n * d.c_in + i) * hw..][..hw];
                let gi = &mut g_in[(n * d.c_in + i) * hw..][..hw];
                let base = (o * d.c_in + i) * kk;
                for ky in 0..d.k {
                    let dy = ky as isize - d.pad();
                    let (y0, y1) = ConvDims::span(d.h, dy);
                    for kx in 0..d.k {
                        let dx = kx as isize - d.pad();
                        let (x0, x1) = ConvDims::span(d.w, dx);
                        let tap = weight[base + ky * d.k + kx];
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let s0 = (x0 as isize + dx) as usize;
                            let g_row = &go[y * d.w + x0..y * d.w + x1];
                            let in_row = &src[sy * d.w + s0..sy * d.w + s0 + (x1 - x0)];
                            let gi_row = &mut gi[sy * d.w + s0..sy * d.w + s0 + (x1 - x0)];
                            for ((g, x), gi) in g_row.iter().zip(in_row).zip(gi_row.iter_mut()) {
                                acc += g * x;
                                *gi += tap * g;
                            }
                        }
                        g_weight[base + ky * d.k + kx] += acc;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition with explicit zero padding.
    fn naive(d: ConvDims, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let p = (d.k / 2) as isize;
        let mut out = vec![0.0; d.n * d.c_out * d.h * d.w];
        for n in 0..d.n {
            for o in 0..d.c_out {
                for y in 0..d.h as isize {
                    for x in 0..d.w as isize {
                        let mut acc = bias[o];
                        for i in 0..d.c_in {
                            for ky in 0..d.k as isize {
                                for kx in 0..d.k as isize {
                                    let (sy, sx) = (y + ky - p, x + kx - p);
                                    if sy < 0 || sx < 0 || sy >= d.h as isize || sx >= d.w as isize {
                                        continue;
                                    }
                                    let iv = input[((n * d.c_in + i) * d.h + sy as usize) * d.w + sx as usize];
                                    let wv = weight[((o * d.c_in + i) * d.k + ky as usize) * d.k + kx as usize];
                                    acc += iv * wv;
                                }
                            }
                        }
                        out[((n * d.c_out + o) * d.h + y as usize) * d.w + x as usize] = acc;
                    }
                }
            }
        }
        out
    }

    fn ramp(len: usize, scale: f64) -> Vec<f64> {
        (0..len).map(|i| ((i * 37 % 11) as f64 - 5.0) * scale).collect()
    }

    #[test]
    fn matches_naive_definition() {
        for &(k, h, w) in &[(3, 4, 5), (5, 3, 3), (1, 2, 6), (3, 1, 1)] {
            let d = ConvDims { n: 2, c_in: 3, c_out: 2, h, w, k };
            let input = ramp(d.n * d.c_in * h * w, 0.1);
            let weight = ramp(d.c_out * d.c_in * k * k, 0.05);
            let bias = vec![0.3, -0.2];
            let mut out = vec![0.0; d.n * d.c_out * h * w];
            forward(d, &input, &weight, &bias, &mut out);
            let want = naive(d, &input, &weight, &bias);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <g, conv(x)> is linear in x and w; check both gradients against the naive map.
        let d = ConvDims { n: 1, c_in: 2, c_out: 3, h: 4, w: 3, k: 3 };
        let input = ramp(d.c_in * 12, 0.2);
        let weight = ramp(d.c_out * d.c_in * 9, 0.07);
        let bias = vec![0.0; 3];
        let g_out = ramp(d.c_out * 12, 0.3);
        let mut g_in = vec![0.0; input.len()];
        let mut g_w = vec![0.0; weight.len()];
        let mut g_b = vec![0.0; 3];
        backward(d, &input, &weight, &g_out, &mut g_in, &mut g_w, &mut g_b);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        for j in 0..input.len() {
            let mut e = vec![0.0; input.len()];
            e[j] = 1.0;
            let col = naive(d, &e, &weight, &bias);
            assert!((dot(&col, &g_out) - g_in[j]).abs() < 1e-12);
        }
        for j in 0..weight.len() {
            let mut e = vec![0.0; weight.len()];
            e[j] = 1.0;
            let col = naive(d, &input, &e, &bias);
            assert!((dot(&col, &g_out) - g_w[j]).abs() < 1e-12);
        }
        for o in 0..3 {
            let s: f64 = g_out[o * 12..(o + 1) * 12].iter().sum();
            assert!((g_b[o] - s).abs() < 1e-12);
        }
    }
}
