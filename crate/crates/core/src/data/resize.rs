use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Sample `img: [h,w,c]` at fractional `(y, x)` into `out`, channel by channel.
/// Coordinates must lie in `[0, h−1] × [0, w−1]`.
pub(crate) fn sample_bilinear(img: &Tensor<f32>, y: f64, x: f64, out: &mut [f32]) {
    let &[h, w, c] = img.shape() else { unreachable!() };
    let y0 = (y.floor() as usize).min(h - 1);
    let x0 = (x.floor() as usize).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let d = img.data();
    let at = |yy: usize, xx: usize, k: usize| d[(yy * w + xx) * c + k] as f64;
    for (k, o) in out.iter_mut().enumerate() {
        let top = at(y0, x0, k) * (1.0 - fx) + at(y0, x1, k) * fx;
        let bot = at(y1, x0, k) * (1.0 - fx) + at(y1, x1, k) * fx;
        *o = (top * (1.0 - fy) + bot * fy) as f32;
    }
}

/// Corner-aligned bilinear resize of `[h,w,c]` to `[out_h,out_w,c]`: output
/// corners coincide with input corners.
pub fn resize_bilinear(img: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    img.expect_rank(3, "image")?;
    let &[h, w, c] = img.shape() else { unreachable!() };
    if h < 2 || w < 2 || out_h == 0 || out_w == 0 {
        return Err(Error::Dimension(format!("cannot resize {h}x{w} to {out_h}x{out_w}")));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let step = |n_in: usize, n_out: usize| {
        if n_out == 1 {
            0.0
        } else {
            (n_in - 1) as f64 / (n_out - 1) as f64
        }
    };
    let (sy, sx) = (step(h, out_h), step(w, out_w));
    let mut out = Tensor::zeros(&[out_h, out_w, c]);
    let od = out.data_mut();
    for i in 0..out_h {
        for j in 0..out_w {
            let base = (i * out_w + j) * c;
            sample_bilinear(img, i as f64 * sy, j as f64 * sx, &mut od[base..base + c]);
        }
    }
    Ok(out)
}

/// Centers `[h,w,c]` on a square canvas filled with `fill`; an odd remainder
/// goes to the bottom/right.
pub fn pad_to_square(img: &Tensor<f32>, fill: f32) -> Result<Tensor<f32>> {
    img.expect_rank(3, "image")?;
    let &[h, w, c] = img.shape() else { unreachable!() };
    let s = h.max(w);
    if s == h && s == w {
        return Ok(img.clone());
    }
    let (top, left) = ((s - h) / 2, (s - w) / 2);
    let mut out = Tensor::full(&[s, s, c], fill);
    let od = out.data_mut();
    for y in 0..h {
        let src = &img.data()[y * w * c..(y + 1) * w * c];
        let dst = ((y + top) * s + left) * c;
        od[dst..dst + w * c].copy_from_slice(src);
    }
    Ok(out)
}
