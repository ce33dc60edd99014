//! Squeeze-and-excitation channel gating.
//!
//! `ω = sigmoid(W2·relu(W1·δ + b1) + b2)` where `δ` is the per-channel spatial mean,
//! then every channel `k` of the input is scaled by `ω_k`.

use super::params::SeParams;
use crate::error::{Error, Result};
use crate::ndcore::{
    fc_backward, fc_forward, gap_backward, gap_forward, relu, relu_backward, sigmoid,
    sigmoid_backward, Real, Tensor,
};

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct SeCache<T = f32> {
    pub delta: Tensor<T>,
    pub hidden_pre: Tensor<T>,
    pub hidden: Tensor<T>,
    pub omega: Tensor<T>,
}

fn check<T: Real>(x: &Tensor<T>, se: &SeParams<T>) -> Result<()> {
    x.expect_rank(4, "se input")?;
    let c = x.shape()[3];
    if se.w1.rank() != 2 || se.w1.shape()[1] != c {
        return Err(Error::Dimension(format!(
            "se: squeeze weight {:?} does not match {c} channels",
            se.w1.shape()
        )));
    }
    let r = se.w1.shape()[0];
    if se.w2.shape() != [c, r] {
        return Err(Error::Dimension(format!(
            "se: bottleneck mismatch, w1 {:?} vs w2 {:?}",
            se.w1.shape(),
            se.w2.shape()
        )));
    }
    Ok(())
}

/// Excitation weights `ω: [N,C]` for input `x: [N,H,W,C]`.
pub fn se_excitation<T: Real>(x: &Tensor<T>, se: &SeParams<T>) -> Result<SeCache<T>> {
    check(x, se)?;
    let delta = gap_forward(x)?;
    let hidden_pre = fc_forward(&delta, &se.w1, &se.b1)?;
    let hidden = relu(&hidden_pre);
    let omega = sigmoid(&fc_forward(&hidden, &se.w2, &se.b2)?);
    Ok(SeCache {
        delta,
        hidden_pre,
        hidden,
        omega,
    })
}

/// Channel-wise rescaling `X'[n,h,w,k] = X[n,h,w,k]·ω[n,k]`.
pub fn se_apply<T: Real>(x: &Tensor<T>, omega: &Tensor<T>) -> Result<Tensor<T>> {
    x.expect_rank(4, "se input")?;
    let &[n, h, w, c] = x.shape() else {
        unreachable!()
    };
    omega.expect_shape(&[n, c])?;
    let hw = h * w;
    let mut out = x.clone();
    let od = out.data_mut();
    for b in 0..n {
        let gate = &omega.data()[b * c..(b + 1) * c];
        for p in 0..hw {
            for (v, &g) in od[(b * hw + p) * c..(b * hw + p + 1) * c].iter_mut().zip(gate) {
                *v = *v * g;
            }
        }
    }
    Ok(out)
}

pub fn se_forward<T: Real>(x: &Tensor<T>, se: &SeParams<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let cache = se_excitation(x, se)?;
    let out = se_apply(x, &cache.omega)?;
    Ok((out, cache.omega))
}

/// Returns the gradient w.r.t. the block input and a gradient set for the SE
/// parameters.
pub fn se_backward<T: Real>(
    x: &Tensor<T>,
    se: &SeParams<T>,
    cache: &SeCache<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, SeParams<T>)> {
    upstream.expect_shape(x.shape())?;
    let &[n, h, w, c] = x.shape() else {
        unreachable!()
    };
    let hw = h * w;

    // Direct path through the multiplication, and dL/dω = Σ_hw g·x.
    let mut gx = se_apply(upstream, &cache.omega)?;
    let mut g_omega = Tensor::zeros(&[n, c]);
    {
        let (xd, ud, go) = (x.data(), upstream.data(), g_omega.data_mut());
        for b in 0..n {
            let acc = &mut go[b * c..(b + 1) * c];
            for p in 0..hw {
                let base = (b * hw + p) * c;
                for k in 0..c {
                    acc[k] = acc[k] + ud[base + k] * xd[base + k];
                }
            }
        }
    }

    let g_pre2 = sigmoid_backward(&cache.omega, &g_omega)?;
    let fc2 = fc_backward(&cache.hidden, &se.w2, &se.b2, &g_pre2)?;
    let g_pre1 = relu_backward(&cache.hidden_pre, &fc2.input)?;
    let fc1 = fc_backward(&cache.delta, &se.w1, &se.b1, &g_pre1)?;
    let via_gap = gap_backward(x.shape(), &fc1.input)?;
    gx.axpy(T::one(), &via_gap)?;

    Ok((
        gx,
        SeParams {
            w1: fc1.weight,
            b1: fc1.bias,
            w2: fc2.weight,
            b2: fc2.bias,
        },
    ))
}
