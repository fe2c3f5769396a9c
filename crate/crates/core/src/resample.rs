//! Separable image resampling on interleaved 8-bit or float buffers.
//!
//! The bicubic filter is the Keys cubic with `a = -0.5`. When shrinking, the
//! kernel is stretched by the scale factor so every source pixel contributes
//! (area-aware downsampling). Taps that fall outside the image are clamped to
//! the nearest edge pixel.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    Bicubic,
    Nearest,
}

const CUBIC_A: f64 = -0.5;

fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Source taps (index, weight) for every output coordinate along one axis.
fn axis_taps(src_len: usize, dst_len: usize, filter: Filter) -> Vec<Vec<(usize, f64)>> {
    let scale = src_len as f64 / dst_len as f64;
    let last = src_len as i64 - 1;
    (0..dst_len)
        .map(|x| {
            let center = (x as f64 + 0.5) * scale;
            match filter {
                Filter::Nearest => {
                    let i = (center.floor() as i64).clamp(0, last) as usize;
                    vec![(i, 1.0)]
                }
                Filter::Bicubic => {
                    let filter_scale = scale.max(1.0);
                    let support = 2.0 * filter_scale;
                    let lo = (center - support + 0.5).floor() as i64;
                    let hi = (center + support + 0.5).floor() as i64;
                    let mut taps: Vec<(usize, f64)> = Vec::with_capacity((hi - lo) as usize);
                    let mut total = 0.0;
                    for i in lo..hi {
                        let w = cubic((i as f64 + 0.5 - center) / filter_scale);
                        if w == 0.0 {
                            continue;
                        }
                        total += w;
                        let idx = i.clamp(0, last) as usize;
                        match taps.iter_mut().find(|(j, _)| *j == idx) {
                            Some(t) => t.1 += w,
                            None => taps.push((idx, w)),
                        }
                    }
                    for t in &mut taps {
                        t.1 /= total;
                    }
                    taps
                }
            }
        })
        .collect()
}

/// Resamples an interleaved `width × height × channels` float buffer.
pub fn resample_f64(
    src: &[f64],
    (width, height): (usize, usize),
    channels: usize,
    (dst_w, dst_h): (usize, usize),
    filter: Filter,
) -> Vec<f64> {
    assert_eq!(src.len(), width * height * channels, "buffer size mismatch");
    assert!(width > 0 && height > 0 && dst_w > 0 && dst_h > 0, "empty image");

    let xs = axis_taps(width, dst_w, filter);
    let mut horiz = vec![0.0; dst_w * height * channels];
    for y in 0..height {
        let row = &src[y * width * channels..(y + 1) * width * channels];
        for (x, taps) in xs.iter().enumerate() {
            let out = &mut horiz[(y * dst_w + x) * channels..][..channels];
            for &(i, w) in taps {
                for c in 0..channels {
                    out[c] += w * row[i * channels + c];
                }
            }
        }
    }

    let ys = axis_taps(height, dst_h, filter);
    let mut out = vec![0.0; dst_w * dst_h * channels];
    for (y, taps) in ys.iter().enumerate() {
        let dst_row = &mut out[y * dst_w * channels..(y + 1) * dst_w * channels];
        for &(i, w) in taps {
            let src_row = &horiz[i * dst_w * channels..(i + 1) * dst_w * channels];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += w * s;
            }
        }
    }
    out
}

/// Resamples an interleaved 8-bit buffer, rounding and saturating the result.
///
/// Resizing to the source dimensions returns the input unchanged.
pub fn resample_u8(
    src: &[u8],
    size: (usize, usize),
    channels: usize,
    dst: (usize, usize),
    filter: Filter,
) -> Vec<u8> {
    if size == dst {
        return src.to_vec();
    }
    let as_float: Vec<f64> = src.iter().map(|&v| f64::from(v)).collect();
    resample_f64(&as_float, size, channels, dst, filter)
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect()
}
