//! Direct-loop 2-D convolution over NHWC tensors with "same" zero padding.
//!
//! Output spatial size is `ceil(in / stride)`. When the total padding is odd the
//! extra row/column goes on the bottom/right, the same split TensorFlow uses.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<T = f32> {
    /// `[k, k, c_in, c_out]`
    pub weights: Tensor<T>,
    /// `[c_out]`
    pub bias: Tensor<T>,
    pub stride: usize,
}

impl<T: Real> ConvKernel<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, stride: usize) -> Result<Self> {
        let kernel = Self {
            weights,
            bias,
            stride,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn zeros(k: usize, c_in: usize, c_out: usize, stride: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[k, k, c_in, c_out]),
            bias: Tensor::zeros(&[c_out]),
            stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.expect_rank(4, "conv weights")?;
        let s = self.weights.shape();
        if s[0] != s[1] || !(s[0] == 1 || s[0] == 3) {
            return Err(Error::Dimension(format!(
                "kernel must be 1x1 or 3x3, got {}x{}",
                s[0], s[1]
            )));
        }
        if !(self.stride == 1 || self.stride == 2) {
            return Err(Error::Dimension(format!(
                "stride must be 1 or 2, got {}",
                self.stride
            )));
        }
        self.bias.expect_shape(&[s[3]])
    }

    pub fn size(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn c_out(&self) -> usize {
        self.weights.shape()[3]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Output length and leading pad for one spatial axis.
pub fn same_geometry(len: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(len);
    (out, total / 2)
}

struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
    pad_y: usize,
    pad_x: usize,
}

fn geometry<T: Real>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Geometry> {
    kernel.validate()?;
    input.expect_rank(4, "conv2d input")?;
    let &[n, h, w, c_in] = input.shape() else {
        unreachable!()
    };
    if c_in != kernel.c_in() {
        return Err(Error::Dimension(format!(
            "conv2d: input has {c_in} channels, kernel expects {}",
            kernel.c_in()
        )));
    }
    let k = kernel.size();
    if h < k || w < k {
        return Err(Error::Dimension(format!(
            "conv2d: input {h}x{w} smaller than {k}x{k} kernel"
        )));
    }
    let (oh, pad_y) = same_geometry(h, k, kernel.stride);
    let (ow, pad_x) = same_geometry(w, k, kernel.stride);
    Ok(Geometry {
        n,
        h,
        w,
        c_in,
        c_out: kernel.c_out(),
        k,
        stride: kernel.stride,
        oh,
        ow,
        pad_y,
        pad_x,
    })
}

impl Geometry {
    /// Input coordinate for output `o` and tap `t`, if it falls inside the image.
    #[inline]
    fn src(o: usize, t: usize, stride: usize, pad: usize, len: usize) -> Option<usize> {
        let pos = (o * stride + t).checked_sub(pad)?;
        (pos < len).then_some(pos)
    }
}

pub fn conv2d_forward<T: Real>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Tensor<T>> {
    let g = geometry(input, kernel)?;
    let x = input.data();
    let wts = kernel.weights.data();
    let bias = kernel.bias.data();
    let mut out = Tensor::zeros(&[g.n, g.oh, g.ow, g.c_out]);
    let od = out.data_mut();

    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * g.c_out;
                let acc = &mut od[o_base..o_base + g.c_out];
                acc.copy_from_slice(bias);
                for ky in 0..g.k {
                    let Some(iy) = Geometry::src(oy, ky, g.stride, g.pad_y, g.h) else {
                        continue;
                    };
                    for kx in 0..g.k {
                        let Some(ix) = Geometry::src(ox, kx, g.stride, g.pad_x, g.w) else {
                            continue;
                        };
                        let i_base = ((n * g.h + iy) * g.w + ix) * g.c_in;
                        let w_base = (ky * g.k + kx) * g.c_in * g.c_out;
                        for ci in 0..g.c_in {
                            let xv = x[i_base + ci];
                            let row = &wts[w_base + ci * g.c_out..w_base + (ci + 1) * g.c_out];
                            for (a, &wv) in acc.iter_mut().zip(row) {
                                *a = *a + xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = geometry(input, kernel)?;
    upstream.expect_shape(&[g.n, g.oh, g.ow, g.c_out])?;
    let x = input.data();
    let wts = kernel.weights.data();
    let up = upstream.data();

    let mut gx = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(kernel.weights.shape());
    let mut gb = Tensor::zeros(kernel.bias.shape());
    let gxd = gx.data_mut();
    let gwd = gw.data_mut();
    let gbd = gb.data_mut();

    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * g.c_out;
                let go = &up[o_base..o_base + g.c_out];
                for (b, &v) in gbd.iter_mut().zip(go) {
                    *b = *b + v;
                }
                for ky in 0..g.k {
                    let Some(iy) = Geometry::src(oy, ky, g.stride, g.pad_y, g.h) else {
                        continue;
                    };
                    for kx in 0..g.k {
                        let Some(ix) = Geometry::src(ox, kx, g.stride, g.pad_x, g.w) else {
                            continue;
                        };
                        let i_base = ((n * g.h + iy) * g.w + ix) * g.c_in;
                        let w_base = (ky * g.k + kx) * g.c_in * g.c_out;
                        for ci in 0..g.c_in {
                            let xv = x[i_base + ci];
                            let r = w_base + ci * g.c_out..w_base + (ci + 1) * g.c_out;
                            let mut dx = T::zero();
                            for ((gwv, &wv), &gv) in gwd[r.clone()].iter_mut().zip(&wts[r]).zip(go)
                            {
                                *gwv = *gwv + xv * gv;
                                dx = dx + wv * gv;
                            }
                            gxd[i_base + ci] = gxd[i_base + ci] + dx;
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: gx,
        weights: gw,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Nested-loop reference with explicit zero padding, independent of the
    /// slice-based kernel above.
    fn naive_conv(input: &Tensor<f64>, kernel: &ConvKernel<f64>) -> Tensor<f64> {
        let s = input.shape();
        let (n, h, w, ci) = (s[0], s[1], s[2], s[3]);
        let k = kernel.size();
        let co = kernel.c_out();
        let st = kernel.stride;
        let oh = (h + st - 1) / st;
        let ow = (w + st - 1) / st;
        let pad_y = (((oh - 1) * st + k) as isize - h as isize).max(0) as usize / 2;
        let pad_x = (((ow - 1) * st + k) as isize - w as isize).max(0) as usize / 2;
        let mut out = vec![0.0; n * oh * ow * co];
        for b in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    for o in 0..co {
                        let mut acc = kernel.bias.data()[o];
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * st + ky) as isize - pad_y as isize;
                                let ix = (x * st + kx) as isize - pad_x as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                for c in 0..ci {
                                    let xv = input.data()
                                        [((b * h + iy as usize) * w + ix as usize) * ci + c];
                                    let wv = kernel.weights.data()[((ky * k + kx) * ci + c) * co + o];
                                    acc += xv * wv;
                                }
                            }
                        }
                        out[((b * oh + y) * ow + x) * co + o] = acc;
                    }
                }
            }
        }
        Tensor::from_vec(&[n, oh, ow, co], out).unwrap()
    }

    fn lcg_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn identity_one_by_one_kernel() {
        let k = ConvKernel::new(
            Tensor::<f32>::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(&[1]),
            1,
        )
        .unwrap();
        let x = Tensor::from_vec(&[1, 3, 2, 1], vec![1.0, -2.0, 3.5, 0.0, 7.0, -0.25]).unwrap();
        assert_eq!(conv2d_forward(&x, &k).unwrap(), x);
    }

    #[test]
    fn all_ones_kernel_on_constant_image() {
        let k = ConvKernel::new(
            Tensor::<f32>::full(&[3, 3, 1, 1], 1.0),
            Tensor::zeros(&[1]),
            1,
        )
        .unwrap();
        let x = Tensor::full(&[1, 4, 4, 1], 1.0);
        let y = conv2d_forward(&x, &k).unwrap();
        #[rustfmt::skip]
        let expected = [
            4.0, 6.0, 6.0, 4.0,
            6.0, 9.0, 9.0, 6.0,
            6.0, 9.0, 9.0, 6.0,
            4.0, 6.0, 6.0, 4.0,
        ];
        assert_eq!(y.data(), &expected);
    }

    #[test]
    fn stride_two_halves_full_size_input() {
        let k = ConvKernel::<f32>::zeros(3, 11, 2, 2);
        let x = Tensor::zeros(&[1, 176, 176, 11]);
        assert_eq!(conv2d_forward(&x, &k).unwrap().shape(), &[1, 88, 88, 2]);
        assert_eq!(same_geometry(88, 3, 2), (44, 0));
        assert_eq!(same_geometry(5, 3, 2), (3, 1));
        assert_eq!(same_geometry(7, 3, 1), (7, 1));
    }

    #[test]
    fn matches_naive_reference() {
        for (seed, (h, w, ci, co, k, s)) in [
            (5, 5, 2, 3, 3, 2),
            (6, 7, 3, 2, 3, 1),
            (4, 4, 2, 2, 1, 1),
            (9, 6, 1, 4, 3, 2),
            (3, 3, 2, 1, 1, 2),
        ]
        .into_iter()
        .enumerate()
        {
            let x = lcg_tensor(&[2, h, w, ci], seed as u64);
            let kernel = ConvKernel::new(
                lcg_tensor(&[k, k, ci, co], 100 + seed as u64),
                lcg_tensor(&[co], 200 + seed as u64),
                s,
            )
            .unwrap();
            let fast = conv2d_forward(&x, &kernel).unwrap();
            let slow = naive_conv(&x, &kernel);
            assert_eq!(fast.shape(), slow.shape());
            assert!(fast.max_abs_diff(&slow) < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let k = ConvKernel::<f32>::zeros(3, 2, 2, 1);
        let x = Tensor::zeros(&[1, 4, 4, 3]);
        assert!(matches!(conv2d_forward(&x, &k), Err(Error::Dimension(_))));
        let up = Tensor::zeros(&[1, 4, 4, 2]);
        assert!(conv2d_backward(&x, &k, &up).is_err());
    }

    #[test]
    fn invalid_kernel_geometry_rejected() {
        assert!(ConvKernel::<f32>::new(Tensor::zeros(&[2, 2, 1, 1]), Tensor::zeros(&[1]), 1).is_err());
        assert!(ConvKernel::<f32>::new(Tensor::zeros(&[3, 3, 1, 1]), Tensor::zeros(&[1]), 3).is_err());
        assert!(ConvKernel::<f32>::new(Tensor::zeros(&[3, 3, 1, 2]), Tensor::zeros(&[1]), 1).is_err());
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let x = lcg_tensor(&[1, 5, 5, 2], 1);
        let k = ConvKernel::new(lcg_tensor(&[3, 3, 2, 3], 2), lcg_tensor(&[3], 3), 2).unwrap();
        let up = Tensor::zeros(&[1, 3, 3, 3]);
        let g = conv2d_backward(&x, &k, &up).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_identity_kernel_passes_upstream() {
        let k = ConvKernel::new(
            Tensor::<f32>::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(&[1]),
            1,
        )
        .unwrap();
        let x = Tensor::full(&[1, 3, 3, 1], 2.0);
        let up = Tensor::full(&[1, 3, 3, 1], 1.0);
        let g = conv2d_backward(&x, &k, &up).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 1.0));
        assert_eq!(g.bias.data(), &[9.0]);
        assert_eq!(g.weights.data(), &[18.0]);
    }
}
