use rand::Rng;

use super::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::ndcore::{l2_penalty, xavier_uniform, ConvKernel, Real, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct SeParams<T = f32> {
    /// `[bottleneck, C]`
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    /// `[C, bottleneck]`
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<T = f32> {
    /// `[num_classes, D]`, one row per real class.
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Every learnable tensor of the network. Also used as the gradient container,
/// since gradients share parameter shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T = f32> {
    pub conv1: ConvKernel<T>,
    /// `None` when the squeeze-and-excitation block is ablated.
    pub se: Option<SeParams<T>>,
    pub conv2: ConvKernel<T>,
    pub conv3: ConvKernel<T>,
    pub head: HeadParams<T>,
}

/// Stable names for every tensor, in serialization order.
pub const PARAM_NAMES: [&str; 12] = [
    "conv1.weight",
    "conv1.bias",
    "se.w1",
    "se.b1",
    "se.w2",
    "se.b2",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "head.weight",
    "head.bias",
];

impl<T: Real> ParamSet<T> {
    /// Xavier-uniform weights, zero biases. Draw order is fixed so a given rng
    /// state always yields the same network.
    pub fn init<R: Rng + ?Sized>(cfg: &NetworkConfig, se_enabled: bool, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let conv = |rng: &mut R, k: usize, cin: usize, cout: usize, stride: usize| -> Result<ConvKernel<T>> {
            let w = xavier_uniform(k * k * cin, k * k * cout, &[k, k, cin, cout], rng)?;
            ConvKernel::new(w, Tensor::zeros(&[cout]), stride)
        };
        let conv1 = conv(rng, 1, cfg.energy_channels, cfg.embed_channels, 1)?;
        let se = if se_enabled {
            let (c, r) = (cfg.embed_channels, cfg.se_bottleneck);
            Some(SeParams {
                w1: xavier_uniform(c, r, &[r, c], rng)?,
                b1: Tensor::zeros(&[r]),
                w2: xavier_uniform(r, c, &[c, r], rng)?,
                b2: Tensor::zeros(&[c]),
            })
        } else {
            None
        };
        let conv2 = conv(rng, 3, cfg.embed_channels, cfg.block2_channels, 2)?;
        let conv3 = conv(rng, 3, cfg.block2_channels, cfg.block3_channels, 2)?;
        let d = cfg.embedding_dim();
        let head = HeadParams {
            weight: xavier_uniform(d, cfg.num_classes, &[cfg.num_classes, d], rng)?,
            bias: Tensor::zeros(&[cfg.num_classes]),
        };
        Ok(Self {
            conv1,
            se,
            conv2,
            conv3,
            head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor<T>| Tensor::zeros(t.shape());
        let zk = |k: &ConvKernel<T>| ConvKernel {
            weights: z(&k.weights),
            bias: z(&k.bias),
            stride: k.stride,
        };
        Self {
            conv1: zk(&self.conv1),
            se: self.se.as_ref().map(|s| SeParams {
                w1: z(&s.w1),
                b1: z(&s.b1),
                w2: z(&s.w2),
                b2: z(&s.b2),
            }),
            conv2: zk(&self.conv2),
            conv3: zk(&self.conv3),
            head: HeadParams {
                weight: z(&self.head.weight),
                bias: z(&self.head.bias),
            },
        }
    }

    /// `(name, tensor)` pairs in a fixed order; SE entries are skipped when absent.
    pub fn named(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut v = vec![
            (PARAM_NAMES[0], &self.conv1.weights),
            (PARAM_NAMES[1], &self.conv1.bias),
        ];
        if let Some(se) = &self.se {
            v.extend([
                (PARAM_NAMES[2], &se.w1),
                (PARAM_NAMES[3], &se.b1),
                (PARAM_NAMES[4], &se.w2),
                (PARAM_NAMES[5], &se.b2),
            ]);
        }
        v.extend([
            (PARAM_NAMES[6], &self.conv2.weights),
            (PARAM_NAMES[7], &self.conv2.bias),
            (PARAM_NAMES[8], &self.conv3.weights),
            (PARAM_NAMES[9], &self.conv3.bias),
            (PARAM_NAMES[10], &self.head.weight),
            (PARAM_NAMES[11], &self.head.bias),
        ]);
        v
    }

    pub fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        let mut v = vec![
            (PARAM_NAMES[0], &mut self.conv1.weights),
            (PARAM_NAMES[1], &mut self.conv1.bias),
        ];
        if let Some(se) = &mut self.se {
            v.extend([
                (PARAM_NAMES[2], &mut se.w1),
                (PARAM_NAMES[3], &mut se.b1),
                (PARAM_NAMES[4], &mut se.w2),
                (PARAM_NAMES[5], &mut se.b2),
            ]);
        }
        v.extend([
            (PARAM_NAMES[6], &mut self.conv2.weights),
            (PARAM_NAMES[7], &mut self.conv2.bias),
            (PARAM_NAMES[8], &mut self.conv3.weights),
            (PARAM_NAMES[9], &mut self.conv3.bias),
            (PARAM_NAMES[10], &mut self.head.weight),
            (PARAM_NAMES[11], &mut self.head.bias),
        ]);
        v
    }

    /// Rebuilds a parameter set from named tensors, e.g. after reading a checkpoint.
    pub fn from_named(cfg: &NetworkConfig, mut tensors: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut take = |name: &str| -> Option<Tensor<T>> {
            let pos = tensors.iter().position(|(n, _)| n == name)?;
            Some(tensors.swap_remove(pos).1)
        };
        let mut need = |name: &str| {
            take(name).ok_or_else(|| Error::Data(format!("missing parameter tensor {name}")))
        };
        let conv1 = ConvKernel::new(need("conv1.weight")?, need("conv1.bias")?, 1)?;
        let se = match need("se.w1") {
            Ok(w1) => Some(SeParams {
                w1,
                b1: need("se.b1")?,
                w2: need("se.w2")?,
                b2: need("se.b2")?,
            }),
            Err(_) => None,
        };
        let conv2 = ConvKernel::new(need("conv2.weight")?, need("conv2.bias")?, 2)?;
        let conv3 = ConvKernel::new(need("conv3.weight")?, need("conv3.bias")?, 2)?;
        let head = HeadParams {
            weight: need("head.weight")?,
            bias: need("head.bias")?,
        };
        let params = Self {
            conv1,
            se,
            conv2,
            conv3,
            head,
        };
        params.check_shapes(cfg)?;
        Ok(params)
    }

    pub fn check_shapes(&self, cfg: &NetworkConfig) -> Result<()> {
        let (c_e, c2, c3) = (cfg.embed_channels, cfg.block2_channels, cfg.block3_channels);
        self.conv1
            .weights
            .expect_shape(&[1, 1, cfg.energy_channels, c_e])?;
        self.conv1.bias.expect_shape(&[c_e])?;
        if let Some(se) = &self.se {
            let r = cfg.se_bottleneck;
            se.w1.expect_shape(&[r, c_e])?;
            se.b1.expect_shape(&[r])?;
            se.w2.expect_shape(&[c_e, r])?;
            se.b2.expect_shape(&[c_e])?;
        }
        self.conv2.weights.expect_shape(&[3, 3, c_e, c2])?;
        self.conv2.bias.expect_shape(&[c2])?;
        self.conv3.weights.expect_shape(&[3, 3, c2, c3])?;
        self.conv3.bias.expect_shape(&[c3])?;
        self.head.weight.expect_shape(&[cfg.num_classes, c3])?;
        self.head.bias.expect_shape(&[cfg.num_classes])?;
        if self.conv1.stride != 1 || self.conv2.stride != 2 || self.conv3.stride != 2 {
            return Err(Error::Dimension("unexpected conv strides".into()));
        }
        Ok(())
    }

    /// Per-layer scalar counts.
    pub fn census(&self) -> Vec<(&'static str, usize)> {
        let mut v = vec![("conv1", self.conv1.param_count())];
        if let Some(se) = &self.se {
            v.push(("se.fc1", se.w1.len() + se.b1.len()));
            v.push(("se.fc2", se.w2.len() + se.b2.len()));
        }
        v.push(("conv2", self.conv2.param_count()));
        v.push(("conv3", self.conv3.param_count()));
        v.push(("head", self.head.weight.len() + self.head.bias.len()));
        v
    }

    pub fn param_census(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// Weight-decay term over convolution kernel weights only (biases, SE and head
    /// layers are not decayed). Returns the penalty and its gradient as a
    /// parameter-shaped set.
    pub fn l2_penalty(&self, lambda: T) -> (T, ParamSet<T>) {
        let (p, g) = l2_penalty(
            &[
                &self.conv1.weights,
                &self.conv2.weights,
                &self.conv3.weights,
            ],
            lambda,
        );
        let mut grads = self.zeros_like();
        let mut it = g.into_iter();
        grads.conv1.weights = it.next().unwrap();
        grads.conv2.weights = it.next().unwrap();
        grads.conv3.weights = it.next().unwrap();
        (p, grads)
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn axpy(&mut self, alpha: T, other: &ParamSet<T>) -> Result<()> {
        let theirs = other.named();
        let mine = self.named_mut();
        if mine.len() != theirs.len() {
            return Err(Error::Dimension("parameter sets differ in layout".into()));
        }
        for ((_, a), (_, b)) in mine.into_iter().zip(theirs) {
            a.axpy(alpha, b)?;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        let ck = |k: &ConvKernel<T>| ConvKernel {
            weights: k.weights.cast(),
            bias: k.bias.cast(),
            stride: k.stride,
        };
        ParamSet {
            conv1: ck(&self.conv1),
            se: self.se.as_ref().map(|s| SeParams {
                w1: s.w1.cast(),
                b1: s.b1.cast(),
                w2: s.w2.cast(),
                b2: s.b2.cast(),
            }),
            conv2: ck(&self.conv2),
            conv3: ck(&self.conv3),
            head: HeadParams {
                weight: self.head.weight.cast(),
                bias: self.head.bias.cast(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn init(cfg: &NetworkConfig, se: bool) -> ParamSet<f32> {
        ParamSet::init(cfg, se, &mut ChaCha8Rng::seed_from_u64(42)).unwrap()
    }

    #[test]
    fn conv1_census() {
        let p = init(&NetworkConfig::default(), true);
        assert_eq!(p.conv1.param_count(), 11 * 16 + 16);
        assert_eq!(p.conv1.param_count(), 192);
    }

    #[test]
    fn default_census_matches_layer_formulas() {
        let cfg = NetworkConfig::default();
        let p = init(&cfg, true);
        let (ci, ce, c2, c3, r, k) = (11, 16, 12, 12, 4, 3);
        let expected = (ci * ce + ce)
            + (r * ce + r)
            + (ce * r + ce)
            + (9 * ce * c2 + c2)
            + (9 * c2 * c3 + c3)
            + (k * c3 + k);
        assert_eq!(expected, 3427);
        assert_eq!(p.param_census(), expected);
        assert_eq!(p.census().iter().map(|(_, n)| n).sum::<usize>(), expected);
        assert!(p.param_census() < 20_000);
    }

    #[test]
    fn wider_embedding_increases_count() {
        let base = NetworkConfig::default();
        let wide = NetworkConfig {
            embed_channels: 32,
            ..base.clone()
        };
        assert!(init(&wide, true).param_census() > init(&base, true).param_census());
    }

    #[test]
    fn se_ablation_drops_se_params() {
        let cfg = NetworkConfig::default();
        assert_eq!(init(&cfg, true).param_census() - init(&cfg, false).param_census(), 148);
    }

    #[test]
    fn named_round_trip() {
        let cfg = NetworkConfig::default();
        for se in [true, false] {
            let p = init(&cfg, se);
            let named = p
                .named()
                .into_iter()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect();
            assert_eq!(ParamSet::from_named(&cfg, named).unwrap(), p);
        }
    }

    #[test]
    fn l2_touches_only_conv_weights() {
        let p = init(&NetworkConfig::miniature(8), true);
        let (pen, g) = p.l2_penalty(0.01);
        let expected = 0.01
            * (p.conv1.weights.sum_squares()
                + p.conv2.weights.sum_squares()
                + p.conv3.weights.sum_squares());
        assert!((pen - expected).abs() < 1e-6);
        assert!(g.head.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.se.as_ref().unwrap().w1.data().iter().all(|&v| v == 0.0));
        assert_eq!(g.conv2.weights.data()[5], 0.02 * p.conv2.weights.data()[5]);
    }
}
