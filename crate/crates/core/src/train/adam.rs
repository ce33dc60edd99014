use crate::error::{Error, Result};
use crate::model::ParamSet;
use crate::ndcore::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: ParamSet<T>,
    pub v: ParamSet<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update:
/// `θ ← θ − lr·m̂/(√v̂ + eps)` with `m̂ = m/(1−β1ᵗ)`, `v̂ = v/(1−β2ᵗ)`.
///
/// Gradients are checked for finiteness before anything is modified.
pub fn adam_step<T: Real>(
    params: &mut ParamSet<T>,
    grads: &ParamSet<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    let g_named = grads.named();
    for (name, g) in &g_named {
        if let Some(i) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient {name}[{i}] = {:?} at step {}",
                g.data()[i],
                state.t + 1
            )));
        }
    }
    let p_named = params.named_mut();
    if p_named.len() != g_named.len() {
        return Err(Error::Dimension("gradient layout differs from parameters".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let m_named = state.m.named_mut();
    let v_named = state.v.named_mut();
    for (((p, g), m), v) in p_named.into_iter().zip(g_named).zip(m_named).zip(v_named) {
        let (p, g, m, v) = (p.1, g.1, m.1, v.1);
        g.expect_shape(p.shape())?;
        let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..pd.len() {
            let gi = g.data()[i].to_f64_lossy();
            let mi = cfg.beta1 * md[i].to_f64_lossy() + (1.0 - cfg.beta1) * gi;
            let vi = cfg.beta2 * vd[i].to_f64_lossy() + (1.0 - cfg.beta2) * gi * gi;
            md[i] = T::lit(mi);
            vd[i] = T::lit(vi);
            let step = cfg.lr * (mi / c1) / ((vi / c2).sqrt() + cfg.eps);
            pd[i] = T::lit(pd[i].to_f64_lossy() - step);
        }
    }
    Ok(())
}
