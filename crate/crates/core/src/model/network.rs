use super::config::NetworkConfig;
use super::params::{HeadParams, ParamSet};
use super::se::{se_apply, se_backward, se_excitation, SeCache};
use crate::error::{Error, Result};
use crate::loss::{softmax, softmax_ce, virtual_softmax_loss};
use crate::ndcore::{
    conv2d_backward, conv2d_forward, fc_backward, fc_forward, gap_backward, gap_forward, relu,
    relu_backward, Real, Tensor,
};

#[derive(Clone, Debug)]
pub struct ForwardTrace<T = f32> {
    /// Pooled feature fed to the classifier, `[N, D]`.
    pub embedding: Tensor<T>,
    /// Real-class logits, `[N, C]`.
    pub logits: Tensor<T>,
    /// Excitation gates `[N, C_embed]`, when the SE block is present.
    pub se_weights: Option<Tensor<T>>,
}

/// Activations retained for backpropagation.
struct Activations<T> {
    input: Tensor<T>,
    conv1_pre: Tensor<T>,
    conv1_out: Tensor<T>,
    se: Option<SeCache<T>>,
    block1_out: Tensor<T>,
    conv2_pre: Tensor<T>,
    conv2_out: Tensor<T>,
    conv3_pre: Tensor<T>,
    conv3_out: Tensor<T>,
    embedding: Tensor<T>,
}

fn check_batch<T: Real>(cfg: &NetworkConfig, batch: &Tensor<T>) -> Result<()> {
    batch.expect_rank(4, "network input")?;
    let s = batch.shape();
    if s[1] != cfg.input_hw || s[2] != cfg.input_hw || s[3] != cfg.energy_channels {
        return Err(Error::Dimension(format!(
            "network expects [N,{hw},{hw},{c}], got {s:?}",
            hw = cfg.input_hw,
            c = cfg.energy_channels
        )));
    }
    Ok(())
}

fn run<T: Real>(cfg: &NetworkConfig, params: &ParamSet<T>, batch: &Tensor<T>) -> Result<Activations<T>> {
    cfg.validate()?;
    params.check_shapes(cfg)?;
    check_batch(cfg, batch)?;

    let conv1_pre = conv2d_forward(batch, &params.conv1)?;
    let conv1_out = relu(&conv1_pre);
    let (se, block1_out) = match &params.se {
        Some(p) => {
            let cache = se_excitation(&conv1_out, p)?;
            let out = se_apply(&conv1_out, &cache.omega)?;
            (Some(cache), out)
        }
        None => (None, conv1_out.clone()),
    };
    let conv2_pre = conv2d_forward(&block1_out, &params.conv2)?;
    let conv2_out = relu(&conv2_pre);
    let conv3_pre = conv2d_forward(&conv2_out, &params.conv3)?;
    let conv3_out = relu(&conv3_pre);
    let embedding = gap_forward(&conv3_out)?;
    Ok(Activations {
        input: batch.clone(),
        conv1_pre,
        conv1_out,
        se,
        block1_out,
        conv2_pre,
        conv2_out,
        conv3_pre,
        conv3_out,
        embedding,
    })
}

fn head_logits<T: Real>(head: &HeadParams<T>, embedding: &Tensor<T>) -> Result<Tensor<T>> {
    fc_forward(embedding, &head.weight, &head.bias)
}

/// conv1 (1x1) → relu → SE → conv2 (3x3/2) → relu → conv3 (3x3/2) → relu → GAP → head.
///
/// There is no dropout or batch normalization, so `train_mode` does not change
/// the numerics; it is accepted to keep call sites explicit.
pub fn forward<T: Real>(
    cfg: &NetworkConfig,
    params: &ParamSet<T>,
    batch: &Tensor<T>,
    _train_mode: bool,
) -> Result<ForwardTrace<T>> {
    let acts = run(cfg, params, batch)?;
    let logits = head_logits(&params.head, &acts.embedding)?;
    Ok(ForwardTrace {
        logits,
        se_weights: acts.se.map(|c| c.omega),
        embedding: acts.embedding,
    })
}

/// Softmax over the real-class logits only.
pub fn predict_proba<T: Real>(cfg: &NetworkConfig, params: &ParamSet<T>, batch: &Tensor<T>) -> Result<Tensor<T>> {
    softmax(&forward(cfg, params, batch, false)?.logits)
}

/// Class probabilities for a single `[H,W,C]` volume.
pub fn predict<T: Real>(cfg: &NetworkConfig, params: &ParamSet<T>, volume: &Tensor<T>) -> Result<Vec<T>> {
    let mut shape = vec![1];
    shape.extend_from_slice(volume.shape());
    let batch = volume.clone().reshape(&shape)?;
    Ok(predict_proba(cfg, params, &batch)?.into_data())
}

/// Loss value alongside a gradient for every parameter.
#[derive(Clone, Debug)]
pub struct GradPair<T = f32> {
    /// Data loss plus weight-decay penalty.
    pub value: T,
    pub data_loss: T,
    pub grads: ParamSet<T>,
}

/// Mean loss over `batch` and its gradient. Uses the virtual-class loss when
/// `cfg.num_virtual == 1`, plain cross-entropy otherwise, plus `l2_lambda·Σw²`
/// over convolution kernels.
pub fn loss_and_grads<T: Real>(
    cfg: &NetworkConfig,
    params: &ParamSet<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    l2_lambda: T,
) -> Result<GradPair<T>> {
    let acts = run(cfg, params, batch)?;
    let mut grads = params.zeros_like();

    let (data_loss, g_embed) = if cfg.num_virtual == 0 {
        let logits = head_logits(&params.head, &acts.embedding)?;
        let out = softmax_ce(&logits, labels)?;
        let fc = fc_backward(&acts.embedding, &params.head.weight, &params.head.bias, &out.grad_input)?;
        grads.head.weight = fc.weight;
        grads.head.bias = fc.bias;
        (out.loss, fc.input)
    } else {
        let out = virtual_softmax_loss(
            &acts.embedding,
            &params.head.weight,
            Some(&params.head.bias),
            labels,
            cfg.num_virtual,
        )?;
        grads.head.weight = out.grad_weight.expect("weight gradient");
        grads.head.bias = out.grad_bias.expect("bias gradient");
        (out.loss, out.grad_input)
    };

    let g = gap_backward(acts.conv3_out.shape(), &g_embed)?;
    let g = relu_backward(&acts.conv3_pre, &g)?;
    let c3 = conv2d_backward(&acts.conv2_out, &params.conv3, &g)?;
    grads.conv3.weights = c3.weights;
    grads.conv3.bias = c3.bias;

    let g = relu_backward(&acts.conv2_pre, &c3.input)?;
    let c2 = conv2d_backward(&acts.block1_out, &params.conv2, &g)?;
    grads.conv2.weights = c2.weights;
    grads.conv2.bias = c2.bias;

    let g = match (&params.se, &acts.se) {
        (Some(p), Some(cache)) => {
            let (gx, gse) = se_backward(&acts.conv1_out, p, cache, &c2.input)?;
            grads.se = Some(gse);
            gx
        }
        _ => c2.input,
    };
    let g = relu_backward(&acts.conv1_pre, &g)?;
    let c1 = conv2d_backward(&acts.input, &params.conv1, &g)?;
    grads.conv1.weights = c1.weights;
    grads.conv1.bias = c1.bias;

    let (penalty, l2_grads) = params.l2_penalty(l2_lambda);
    grads.axpy(T::one(), &l2_grads)?;

    Ok(GradPair {
        value: data_loss + penalty,
        data_loss,
        grads,
    })
}

/// [`loss_and_grads`] evaluated in chunks of at most `chunk` samples and
/// recombined into the full-batch mean. Summation order is fixed, so the result
/// depends only on `chunk`, never on scheduling.
pub fn loss_and_grads_chunked<T: Real>(
    cfg: &NetworkConfig,
    params: &ParamSet<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    l2_lambda: T,
    chunk: usize,
) -> Result<GradPair<T>> {
    let n = batch.shape().first().copied().unwrap_or(0);
    if n == 0 {
        return Err(Error::Data("empty batch".into()));
    }
    let chunk = chunk.max(1);
    if n <= chunk {
        return loss_and_grads(cfg, params, batch, labels, l2_lambda);
    }
    let per = batch.len() / n;
    let mut sample_shape = batch.shape().to_vec();
    let mut total_grads = params.zeros_like();
    let mut data_loss = T::zero();
    let n_t = T::from_usize(n).unwrap();
    for start in (0..n).step_by(chunk) {
        let end = (start + chunk).min(n);
        sample_shape[0] = end - start;
        let part = Tensor::from_vec(&sample_shape, batch.data()[start * per..end * per].to_vec())?;
        let gp = loss_and_grads(cfg, params, &part, &labels[start..end], T::zero())?;
        let w = T::from_usize(end - start).unwrap() / n_t;
        data_loss = data_loss + w * gp.data_loss;
        total_grads.axpy(w, &gp.grads)?;
    }
    let (penalty, l2_grads) = params.l2_penalty(l2_lambda);
    total_grads.axpy(T::one(), &l2_grads)?;
    Ok(GradPair {
        value: data_loss + penalty,
        data_loss,
        grads: total_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(cfg: &NetworkConfig, se: bool) -> ParamSet<f64> {
        ParamSet::init(cfg, se, &mut ChaCha8Rng::seed_from_u64(7)).unwrap()
    }

    fn random_batch(cfg: &NetworkConfig, n: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [n, cfg.input_hw, cfg.input_hw, cfg.energy_channels];
        let len = shape.iter().product();
        Tensor::from_vec(&shape, (0..len).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn spatial_trace_through_network() {
        let cfg = NetworkConfig::miniature(12);
        let p = params(&cfg, true);
        let acts = run(&cfg, &p, &random_batch(&cfg, 1, 1)).unwrap();
        assert_eq!(acts.conv1_out.shape(), &[1, 12, 12, 16]);
        assert_eq!(acts.conv2_out.shape(), &[1, 6, 6, 12]);
        assert_eq!(acts.conv3_out.shape(), &[1, 3, 3, 12]);
        assert_eq!(acts.embedding.shape(), &[1, 12]);
    }

    #[test]
    fn zero_input_zero_biases_gives_zero_logits() {
        let cfg = NetworkConfig::miniature(8);
        let p = params(&cfg, true);
        let x = Tensor::zeros(&[2, 8, 8, 11]);
        let tr = forward(&cfg, &p, &x, false).unwrap();
        assert!(tr.logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn se_gates_inside_unit_interval() {
        let cfg = NetworkConfig::miniature(8);
        let p = params(&cfg, true);
        let tr = forward(&cfg, &p, &random_batch(&cfg, 3, 2), true).unwrap();
        let w = tr.se_weights.unwrap();
        assert_eq!(w.shape(), &[3, 16]);
        assert!(w.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn disabled_se_skips_reexcitation() {
        let cfg = NetworkConfig::miniature(8);
        let with = params(&cfg, true);
        let mut without = with.clone();
        without.se = None;
        let x = random_batch(&cfg, 2, 3);
        let a = forward(&cfg, &without, &x, false).unwrap();
        assert!(a.se_weights.is_none());
        // Manual pipeline without the gating step.
        let h = relu(&conv2d_forward(&x, &with.conv1).unwrap());
        let h = relu(&conv2d_forward(&h, &with.conv2).unwrap());
        let h = relu(&conv2d_forward(&h, &with.conv3).unwrap());
        let logits = fc_forward(&gap_forward(&h).unwrap(), &with.head.weight, &with.head.bias).unwrap();
        assert_eq!(a.logits, logits);
        let b = forward(&cfg, &with, &x, false).unwrap();
        assert_ne!(a.logits, b.logits);
    }

    #[test]
    fn inference_is_bitwise_deterministic() {
        let cfg = NetworkConfig::miniature(8);
        let p = params(&cfg, true).cast::<f32>();
        let x = random_batch(&cfg, 2, 4).cast::<f32>();
        let a = forward(&cfg, &p, &x, false).unwrap();
        let b = forward(&cfg, &p, &x, false).unwrap();
        assert_eq!(
            a.logits.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.logits.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn predict_sums_to_one() {
        let cfg = NetworkConfig::miniature(8);
        let p = params(&cfg, true);
        let x = random_batch(&cfg, 1, 5);
        let vol = x.clone().reshape(&[8, 8, 11]).unwrap();
        let probs = predict(&cfg, &p, &vol).unwrap();
        assert_eq!(probs.len(), 3);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn chunked_matches_full_batch() {
        let cfg = NetworkConfig::miniature(8);
        let p = params(&cfg, true);
        let x = random_batch(&cfg, 5, 6);
        let labels = [0, 1, 2, 1, 0];
        let full = loss_and_grads(&cfg, &p, &x, &labels, 0.01).unwrap();
        let chunked = loss_and_grads_chunked(&cfg, &p, &x, &labels, 0.01, 2).unwrap();
        assert!((full.value - chunked.value).abs() < 1e-12);
        for ((_, a), (_, b)) in full.grads.named().iter().zip(chunked.grads.named()) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn grads_mirror_param_shapes() {
        let cfg = NetworkConfig::miniature(8);
        for se in [true, false] {
            let p = params(&cfg, se);
            let gp = loss_and_grads(&cfg, &p, &random_batch(&cfg, 2, 8), &[0, 2], 0.01).unwrap();
            let a = p.named();
            let b = gp.grads.named();
            assert_eq!(a.len(), b.len());
            for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
                assert_eq!(na, nb);
                assert_eq!(ta.shape(), tb.shape());
            }
        }
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let cfg = NetworkConfig::miniature(8);
        let p = params(&cfg, true);
        let x = Tensor::zeros(&[1, 9, 9, 11]);
        assert!(matches!(forward(&cfg, &p, &x, false), Err(Error::Dimension(_))));
    }
}
