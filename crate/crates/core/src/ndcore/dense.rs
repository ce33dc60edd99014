use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Global average pooling: `[N,H,W,C] -> [N,C]`, the spatial mean of every channel.
pub fn gap_forward<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(4, "gap input")?;
    let &[n, h, w, c] = x.shape() else {
        unreachable!()
    };
    if h == 0 || w == 0 {
        return Err(Error::Dimension("gap: empty spatial extent".into()));
    }
    let hw = h * w;
    let inv = T::one() / T::from_usize(hw).unwrap();
    let mut out = Tensor::zeros(&[n, c]);
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..n {
        let acc = &mut od[b * c..(b + 1) * c];
        for p in 0..hw {
            let px = &xd[(b * hw + p) * c..(b * hw + p + 1) * c];
            for (a, &v) in acc.iter_mut().zip(px) {
                *a = *a + v;
            }
        }
        for a in acc.iter_mut() {
            *a = *a * inv;
        }
    }
    Ok(out)
}

/// Spreads `[N,C]` upstream gradient evenly over an `[N,H,W,C]` input.
pub fn gap_backward<T: Real>(input_shape: &[usize], upstream: &Tensor<T>) -> Result<Tensor<T>> {
    let &[n, h, w, c] = input_shape else {
        return Err(Error::Dimension(format!(
            "gap_backward: input shape {input_shape:?} is not rank 4"
        )));
    };
    upstream.expect_shape(&[n, c])?;
    let hw = h * w;
    let inv = T::one() / T::from_usize(hw).unwrap();
    let mut gx = Tensor::zeros(input_shape);
    let ud = upstream.data();
    let gd = gx.data_mut();
    for b in 0..n {
        let g = &ud[b * c..(b + 1) * c];
        for p in 0..hw {
            for (dst, &v) in gd[(b * hw + p) * c..(b * hw + p + 1) * c].iter_mut().zip(g) {
                *dst = v * inv;
            }
        }
    }
    Ok(gx)
}

fn fc_dims<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    x.expect_rank(2, "fc input")?;
    w.expect_rank(2, "fc weight")?;
    let (n, d_in) = (x.shape()[0], x.shape()[1]);
    let (d_out, w_in) = (w.shape()[0], w.shape()[1]);
    if w_in != d_in {
        return Err(Error::Dimension(format!(
            "fc: input width {d_in} but weight is {d_out}x{w_in}"
        )));
    }
    b.expect_shape(&[d_out])?;
    Ok((n, d_in, d_out))
}

/// Affine map `y = x·Wᵀ + b` with `W: [D_out, D_in]`.
pub fn fc_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, d_in, d_out) = fc_dims(x, w, b)?;
    let mut out = Tensor::zeros(&[n, d_out]);
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let od = out.data_mut();
    for i in 0..n {
        let xi = &xd[i * d_in..(i + 1) * d_in];
        for o in 0..d_out {
            let row = &wd[o * d_in..(o + 1) * d_in];
            od[i * d_out + o] = bd[o] + xi.iter().zip(row).map(|(&a, &b)| a * b).sum::<T>();
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FcGrads<T = f32> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn fc_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<FcGrads<T>> {
    let (n, d_in, d_out) = fc_dims(x, w, b)?;
    upstream.expect_shape(&[n, d_out])?;
    let (xd, wd, ud) = (x.data(), w.data(), upstream.data());
    let mut gx = Tensor::zeros(&[n, d_in]);
    let mut gw = Tensor::zeros(&[d_out, d_in]);
    let mut gb = Tensor::zeros(&[d_out]);
    {
        let (gxd, gwd, gbd) = (gx.data_mut(), gw.data_mut(), gb.data_mut());
        for i in 0..n {
            for o in 0..d_out {
                let g = ud[i * d_out + o];
                gbd[o] = gbd[o] + g;
                for k in 0..d_in {
                    gwd[o * d_in + k] = gwd[o * d_in + k] + g * xd[i * d_in + k];
                    gxd[i * d_in + k] = gxd[i * d_in + k] + g * wd[o * d_in + k];
                }
            }
        }
    }
    Ok(FcGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of relu given its forward *input*.
pub fn relu_backward<T: Real>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    upstream.expect_shape(x.shape())?;
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

#[inline]
pub fn sigmoid_scalar<T: Real>(v: T) -> T {
    // Split on sign so exp never overflows.
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Gradient of sigmoid given its forward *output* `y`.
pub fn sigmoid_backward<T: Real>(y: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    upstream.expect_shape(y.shape())?;
    let data = y
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::from_vec(y.shape(), data)
}
