//! Reference implementations used only by tests. They share no code with
//! the engine: plain nested loops over explicit indices, accumulating in f64.
#![allow(dead_code)]

/// Six-nested-loop convolution over channel-major `input` (`cin x h x w`)
/// and `[out][in][kh][kw]` kernels, with symmetric zero padding.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv(
    input: &[f32],
    cin: usize,
    h: usize,
    w: usize,
    kernels: &[f32],
    biases: &[f32],
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> (usize, usize, Vec<f32>) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0f32; cout * oh * ow];
    for o in 0..cout {
        for r in 0..oh {
            for c in 0..ow {
                let mut acc = f64::from(biases[o]);
                for i in 0..cin {
                    for kr in 0..k {
                        for kc in 0..k {
                            let y = (r * stride + kr) as isize - pad as isize;
                            let x = (c * stride + kc) as isize - pad as isize;
                            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                                continue;
                            }
                            let v = input[i * h * w + y as usize * w + x as usize];
                            let wt = kernels[((o * cin + i) * k + kr) * k + kc];
                            acc += f64::from(v) * f64::from(wt);
                        }
                    }
                }
                out[(o * oh + r) * ow + c] = acc as f32;
            }
        }
    }
    (oh, ow, out)
}

/// Slides a window across `input + 2 * pad` cells one placement at a time.
/// Returns the placement count and whether the last placement ends exactly
/// on the far border. `None` if no placement fits.
pub fn enumerate_placements(input: usize, k: usize, stride: usize, pad: usize) -> Option<(usize, bool)> {
    let padded = input + 2 * pad;
    let mut start = 0;
    let mut count = 0;
    let mut last_end = 0;
    while start + k <= padded {
        count += 1;
        last_end = start + k;
        start += stride;
    }
    (count > 0).then_some((count, last_end == padded))
}

/// Window maxima and the full list of positions attaining each maximum.
pub fn brute_pool(
    input: &[f32],
    h: usize,
    w: usize,
    window: usize,
    stride: usize,
) -> Vec<(f32, Vec<(usize, usize)>)> {
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Vec::new();
    for r in 0..oh {
        for c in 0..ow {
            let cells: Vec<(usize, usize)> = (0..window)
                .flat_map(|dr| (0..window).map(move |dc| (r * stride + dr, c * stride + dc)))
                .collect();
            let max = cells.iter().map(|&(y, x)| input[y * w + x]).fold(f32::NEG_INFINITY, f32::max);
            let at = cells.into_iter().filter(|&(y, x)| input[y * w + x] == max).collect();
            out.push((max, at));
        }
    }
    out
}

/// Softmax by direct evaluation in f64 with log-sum-exp.
pub fn softmax_f64(logits: &[f32]) -> Vec<f64> {
    let m = logits.iter().map(|&l| f64::from(l)).fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (f64::from(l) - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| (f64::from(l) - lse).exp()).collect()
}
