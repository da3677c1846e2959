//! The four CAN modules: encoder (backbone plus contrastive and additive
//! heads), sampler wiring, decoder and classifier.

mod checkpoint;
mod heads;
mod mlp;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry};
pub use heads::{AdditiveHead, ContrastiveHead};
pub use mlp::{BackboneNet, ClassifierNet, DecoderNet, Mlp};

use crate::error::{Error, Result};
use crate::numkit::{AffineLayer, Matrix, RandomSource};
use crate::samplers::{gaussian_reparam_batch, relaxed_bernoulli, GaussNoise, GumbelPair};

/// Architecture of a CAN model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub features: usize,
    pub classes: usize,
    /// Dimension `D` of the quality variable.
    pub quality_dim: usize,
    pub backbone_hidden: Vec<usize>,
    pub contrastive_hidden: usize,
    pub additive_hidden: usize,
    pub decoder_hidden: Vec<usize>,
}

impl NetworkConfig {
    pub fn new(features: usize, classes: usize) -> Self {
        NetworkConfig {
            features,
            classes,
            quality_dim: 4,
            backbone_hidden: vec![64, 64],
            contrastive_hidden: 32,
            additive_hidden: 32,
            decoder_hidden: vec![32, 32],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.features,
            self.classes,
            self.quality_dim,
            self.contrastive_hidden,
            self.additive_hidden,
        ];
        if widths.contains(&0) || self.backbone_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::invalid(format!("network widths must be positive: {self:?}")));
        }
        Ok(())
    }

    fn backbone_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.features];
        dims.extend(&self.backbone_hidden);
        dims.push(self.classes);
        dims
    }

    fn decoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.classes + self.quality_dim];
        dims.extend(&self.decoder_hidden);
        dims.push(self.classes);
        dims
    }
}

/// Parameter groups of the model. The first four are the groups the
/// gradient derivation names; the backbone is the shared encoder trunk that
/// produces `ŷ` and is trained by the signals of both encoder heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamGroup {
    Classifier,
    Additive,
    Contrastive,
    Decoder,
    Backbone,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::Classifier,
        ParamGroup::Additive,
        ParamGroup::Contrastive,
        ParamGroup::Decoder,
        ParamGroup::Backbone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Classifier => "classifier",
            ParamGroup::Additive => "additive",
            ParamGroup::Contrastive => "contrastive",
            ParamGroup::Decoder => "decoder",
            ParamGroup::Backbone => "backbone",
        }
    }

    /// Conventional weight symbol: W_C, W_L, W_Q, W_N, W_B.
    pub fn symbol(self) -> &'static str {
        match self {
            ParamGroup::Classifier => "W_C",
            ParamGroup::Additive => "W_L",
            ParamGroup::Contrastive => "W_Q",
            ParamGroup::Decoder => "W_N",
            ParamGroup::Backbone => "W_B",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn layer_names(self, n: usize) -> Vec<String> {
        match self {
            ParamGroup::Contrastive => vec!["shared".into(), "to_gauss".into()],
            ParamGroup::Additive => vec!["from_label".into(), "from_prior".into(), "out".into()],
            _ => (0..n).map(|i| format!("layer{i}")).collect(),
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// All trainable parameters of a CAN model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: NetworkConfig,
    pub backbone: BackboneNet,
    pub contrastive: ContrastiveHead,
    pub additive: AdditiveHead,
    pub decoder: DecoderNet,
    pub classifier: ClassifierNet,
}

impl ModelParams {
    /// Glorot initialization; every group draws from its own sub-stream of
    /// `seed`, so e.g. the classifier init is independent of the widths of the
    /// other groups.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = RandomSource::new(seed);
        let stream = |g: ParamGroup| root.fork(100 + g.index() as u64);
        let c = &config;
        let backbone = Mlp::new(&c.backbone_dims(), &mut stream(ParamGroup::Backbone));
        let contrastive = ContrastiveHead::new(
            c.classes,
            c.contrastive_hidden,
            c.quality_dim,
            &mut stream(ParamGroup::Contrastive),
        );
        let additive = AdditiveHead::new(c.classes, c.additive_hidden, &mut stream(ParamGroup::Additive));
        let decoder = Mlp::new(&c.decoder_dims(), &mut stream(ParamGroup::Decoder));
        let classifier = Mlp::new(&c.backbone_dims(), &mut stream(ParamGroup::Classifier));
        Ok(ModelParams {
            config,
            backbone,
            contrastive,
            additive,
            decoder,
            classifier,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self, group: ParamGroup) -> Vec<&AffineLayer> {
        match group {
            ParamGroup::Classifier => self.classifier.layers().iter().collect(),
            ParamGroup::Additive => self.additive.layers().to_vec(),
            ParamGroup::Contrastive => self.contrastive.layers().to_vec(),
            ParamGroup::Decoder => self.decoder.layers().iter().collect(),
            ParamGroup::Backbone => self.backbone.layers().iter().collect(),
        }
    }

    pub fn layers_mut(&mut self, group: ParamGroup) -> Vec<&mut AffineLayer> {
        match group {
            ParamGroup::Classifier => self.classifier.layers_mut().iter_mut().collect(),
            ParamGroup::Additive => self.additive.layers_mut().into_iter().collect(),
            ParamGroup::Contrastive => self.contrastive.layers_mut().into_iter().collect(),
            ParamGroup::Decoder => self.decoder.layers_mut().iter_mut().collect(),
            ParamGroup::Backbone => self.backbone.layers_mut().iter_mut().collect(),
        }
    }

    /// Every layer, groups in [`ParamGroup::ALL`] order.
    pub fn all_layers_mut(&mut self) -> Vec<&mut AffineLayer> {
        let mut out: Vec<&mut AffineLayer> = self.classifier.layers_mut().iter_mut().collect();
        out.extend(self.additive.layers_mut());
        out.extend(self.contrastive.layers_mut());
        out.extend(self.decoder.layers_mut().iter_mut());
        out.extend(self.backbone.layers_mut().iter_mut());
        out
    }

    /// `(name, layer)` pairs in a stable order, e.g. `additive.from_prior`.
    pub fn named_layers(&self) -> Vec<(String, &AffineLayer)> {
        let mut out = Vec::new();
        for g in ParamGroup::ALL {
            let layers = self.layers(g);
            for (name, layer) in g.layer_names(layers.len()).into_iter().zip(layers) {
                out.push((format!("{}.{}", g.name(), name), layer));
            }
        }
        out
    }

    pub fn param_count(&self, group: ParamGroup) -> usize {
        self.layers(group).iter().map(|l| l.param_count()).sum()
    }

    /// Deterministic encoder outputs `(ŷ, q_z, μ, logσ²)` without caching.
    pub fn encode(&self, x: &Matrix, y: &Matrix) -> Result<Encoding> {
        self.check_inputs(x, y)?;
        let y_hat = self.backbone.apply(x)?;
        let q_z = self.additive.apply(y, &y_hat)?;
        let (mu, logvar) = self.contrastive.apply(y, &y_hat)?;
        Ok(Encoding { y_hat, q_z, mu, logvar })
    }

    fn check_inputs(&self, x: &Matrix, y: &Matrix) -> Result<()> {
        x.expect_shape("model_forward (x)", (x.rows(), self.config.features))?;
        y.expect_shape("model_forward (y)", (x.rows(), self.config.classes))?;
        Ok(())
    }
}

/// Deterministic encoder outputs for one batch.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub y_hat: Matrix,
    pub q_z: Matrix,
    pub mu: Matrix,
    pub logvar: Matrix,
}

/// Parameter-free noise consumed by one stochastic pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleNoise {
    pub gumbel: GumbelPair,
    pub gauss: GaussNoise,
}

impl SampleNoise {
    pub fn draw(rng: &mut RandomSource, batch: usize, classes: usize, quality_dim: usize) -> Self {
        let gumbel = GumbelPair::draw(rng, batch, classes);
        let gauss = GaussNoise::draw(rng, batch, quality_dim);
        SampleNoise { gumbel, gauss }
    }
}

/// Everything produced by one stochastic forward pass.
#[derive(Debug, Clone)]
pub struct ForwardRecord {
    pub y_hat: Matrix,
    pub q_z: Matrix,
    pub mu: Matrix,
    pub logvar: Matrix,
    pub z: Matrix,
    pub s: Matrix,
    pub p_y: Matrix,
    pub p_z: Matrix,
    pub noise: SampleNoise,
    pub tau: f64,
}

pub fn backbone_forward(net: &mut BackboneNet, x: &Matrix) -> Result<Matrix> {
    net.forward(x)
}

pub fn contrastive_forward(head: &mut ContrastiveHead, y: &Matrix, y_hat: &Matrix) -> Result<(Matrix, Matrix)> {
    head.forward(y, y_hat)
}

pub fn additive_forward(head: &mut AdditiveHead, y: &Matrix, y_hat: &Matrix) -> Result<Matrix> {
    head.forward(y, y_hat)
}

/// Bernoulli parameters of `P(y|z,s)`; the decoder input is `[z | s]`.
pub fn decode(net: &mut DecoderNet, z: &Matrix, s: &Matrix) -> Result<Matrix> {
    net.forward(&z.hstack(s)?)
}

/// `P(z=1|x)` per class.
pub fn classify(net: &mut ClassifierNet, x: &Matrix) -> Result<Matrix> {
    net.forward(x)
}

/// One full stochastic pass (N = 1) with fresh noise from `rng`.
pub fn model_forward(
    params: &mut ModelParams,
    x: &Matrix,
    y: &Matrix,
    tau: f64,
    rng: &mut RandomSource,
) -> Result<ForwardRecord> {
    let c = params.config();
    let noise = SampleNoise::draw(rng, x.rows(), c.classes, c.quality_dim);
    model_forward_with_noise(params, x, y, tau, noise)
}

/// Stochastic pass with caller-supplied noise; used with frozen noise for
/// finite-difference checks.
pub fn model_forward_with_noise(
    params: &mut ModelParams,
    x: &Matrix,
    y: &Matrix,
    tau: f64,
    noise: SampleNoise,
) -> Result<ForwardRecord> {
    params.check_inputs(x, y)?;
    let y_hat = backbone_forward(&mut params.backbone, x)?;
    let q_z = additive_forward(&mut params.additive, y, &y_hat)?;
    let (mu, logvar) = contrastive_forward(&mut params.contrastive, y, &y_hat)?;
    let z = relaxed_bernoulli(&q_z, &noise.gumbel, tau)?;
    let s = gaussian_reparam_batch(&mu, &logvar, &noise.gauss)?;
    let p_y = decode(&mut params.decoder, &z, &s)?;
    let p_z = classify(&mut params.classifier, x)?;
    Ok(ForwardRecord {
        y_hat,
        q_z,
        mu,
        logvar,
        z,
        s,
        p_y,
        p_z,
        noise,
        tau,
    })
}
