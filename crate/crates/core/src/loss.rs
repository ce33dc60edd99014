//! Softmax cross-entropy and the virtual-class softmax.
//!
//! Labels are zero-based class indices. Losses are averaged over the batch.
//!
//! The virtual-class variant appends one extra competitor logit per sample,
//! `z_virt = ‖W_y‖·‖x‖`: the logit a weight vector of the true class's norm would
//! produce if it were perfectly aligned with the embedding. Because `z_virt ≥ z_y`
//! (Cauchy-Schwarz, ignoring bias), the true class can only win by pushing the
//! embedding closer in angle to `W_y`, which is what enlarges the margin. The extra
//! logit never participates in inference.

use crate::error::{Error, Result};
use crate::ndcore::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct LossOutput<T = f32> {
    /// Batch mean.
    pub loss: T,
    pub per_sample: Vec<T>,
    /// Gradient w.r.t. the loss input: logits for [`softmax_ce`], embeddings for
    /// [`virtual_softmax_loss`].
    pub grad_input: Tensor<T>,
    pub grad_weight: Option<Tensor<T>>,
    pub grad_bias: Option<Tensor<T>>,
}

fn check_labels(labels: &[usize], n: usize, classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Returns `(log Σ exp(z), softmax(z))` with max subtraction.
fn log_softmax_parts<T: Real>(z: &[T]) -> (T, Vec<T>) {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = exps.iter().copied().sum();
    let probs = exps.into_iter().map(|e| e / s).collect();
    (m + s.ln(), probs)
}

/// Row-wise softmax of `[N,C]` logits.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    logits.expect_rank(2, "softmax input")?;
    let c = logits.shape()[1];
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(c) {
        out.extend(log_softmax_parts(row).1);
    }
    Tensor::from_vec(logits.shape(), out)
}

pub fn softmax_ce<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<LossOutput<T>> {
    logits.expect_rank(2, "softmax_ce logits")?;
    let (n, c) = (logits.shape()[0], logits.shape()[1]);
    check_labels(labels, n, c)?;
    let inv_n = T::one() / T::from_usize(n.max(1)).unwrap();
    let mut grad = Tensor::zeros(&[n, c]);
    let mut per_sample = Vec::with_capacity(n);
    for (i, (row, &y)) in logits.data().chunks(c).zip(labels).enumerate() {
        let (lse, probs) = log_softmax_parts(row);
        per_sample.push(lse - row[y]);
        let g = &mut grad.data_mut()[i * c..(i + 1) * c];
        for (j, (gj, p)) in g.iter_mut().zip(probs).enumerate() {
            let target = if j == y { T::one() } else { T::zero() };
            *gj = (p - target) * inv_n;
        }
    }
    let loss = per_sample.iter().copied().sum::<T>() * inv_n;
    Ok(LossOutput {
        loss,
        per_sample,
        grad_input: grad,
        grad_weight: None,
        grad_bias: None,
    })
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&a| a * a).sum::<T>().sqrt()
}

/// Virtual-class softmax over embeddings `x: [N,D]` and class weights `w: [C,D]`.
///
/// Real logits are `z_j = W_j·x + b_j`. With `num_virtual == 1` the virtual logit
/// `‖W_y‖·‖x‖` joins the denominator; with `num_virtual == 0` this is exactly
/// [`softmax_ce`] on `x·Wᵀ + b`.
pub fn virtual_softmax_loss<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    labels: &[usize],
    num_virtual: usize,
) -> Result<LossOutput<T>> {
    if num_virtual > 1 {
        return Err(Error::Config(format!(
            "num_virtual must be 0 or 1, got {num_virtual}"
        )));
    }
    x.expect_rank(2, "embedding")?;
    w.expect_rank(2, "class weights")?;
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let c = w.shape()[0];
    if w.shape()[1] != d {
        return Err(Error::Dimension(format!(
            "class weights {:?} do not match embedding width {d}",
            w.shape()
        )));
    }
    if let Some(b) = bias {
        b.expect_shape(&[c])?;
    }
    check_labels(labels, n, c)?;

    let inv_n = T::one() / T::from_usize(n.max(1)).unwrap();
    let wd = w.data();
    let row_norms: Vec<T> = wd.chunks(d).map(norm).collect();
    let mut gx = Tensor::zeros(&[n, d]);
    let mut gw = Tensor::zeros(&[c, d]);
    let mut gb = Tensor::zeros(&[c]);
    let mut per_sample = Vec::with_capacity(n);
    let mut z = vec![T::zero(); c + num_virtual];

    for (i, (xi, &y)) in x.data().chunks(d).zip(labels).enumerate() {
        let x_norm = norm(xi);
        if num_virtual == 1 && !(x_norm > T::zero()) {
            return Err(Error::SingularEmbedding(i));
        }
        for (j, zj) in z.iter_mut().take(c).enumerate() {
            let dot: T = xi.iter().zip(&wd[j * d..(j + 1) * d]).map(|(&a, &b)| a * b).sum();
            *zj = dot + bias.map_or(T::zero(), |b| b.data()[j]);
        }
        if num_virtual == 1 {
            z[c] = row_norms[y] * x_norm;
        }
        let (lse, probs) = log_softmax_parts(&z);
        per_sample.push(lse - z[y]);

        // dL/dz, already scaled by 1/N.
        let dz: Vec<T> = probs
            .iter()
            .enumerate()
            .map(|(j, &p)| (if j == y { p - T::one() } else { p }) * inv_n)
            .collect();

        let gxi = &mut gx.data_mut()[i * d..(i + 1) * d];
        for j in 0..c {
            let wj = &wd[j * d..(j + 1) * d];
            for (g, &wv) in gxi.iter_mut().zip(wj) {
                *g = *g + dz[j] * wv;
            }
        }
        if num_virtual == 1 {
            // d(‖W_y‖‖x‖)/dx = ‖W_y‖ x/‖x‖
            let s = dz[c] * row_norms[y] / x_norm;
            for (g, &xv) in gxi.iter_mut().zip(xi) {
                *g = *g + s * xv;
            }
        }

        let gwd = gw.data_mut();
        for j in 0..c {
            for (g, &xv) in gwd[j * d..(j + 1) * d].iter_mut().zip(xi) {
                *g = *g + dz[j] * xv;
            }
        }
        if num_virtual == 1 && row_norms[y] > T::zero() {
            // d(‖W_y‖‖x‖)/dW_y = ‖x‖ W_y/‖W_y‖; zero subgradient at W_y = 0.
            let s = dz[c] * x_norm / row_norms[y];
            for (g, &wv) in gwd[y * d..(y + 1) * d]
                .iter_mut()
                .zip(&wd[y * d..(y + 1) * d])
            {
                *g = *g + s * wv;
            }
        }
        for (g, &v) in gb.data_mut().iter_mut().zip(&dz[..c]) {
            *g = *g + v;
        }
    }

    let loss = per_sample.iter().copied().sum::<T>() * inv_n;
    Ok(LossOutput {
        loss,
        per_sample,
        grad_input: gx,
        grad_weight: Some(gw),
        grad_bias: bias.map(|_| gb),
    })
}
