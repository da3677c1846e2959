use crate::error::{Error, Result};
use crate::numkit::{sigmoid, Activation, AffineLayer, LayerGrad, Matrix, RandomSource};

/// Stack of affine layers with ReLU between them and a sigmoid head.
///
/// Serves as the backbone (prior judgement `ŷ`), the classifier `P(z|x)` and
/// the decoder `P(y|z,s)`; they differ only in dimensions and parameters.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<AffineLayer>,
    hidden_pre: Vec<Matrix>,
    output: Option<Matrix>,
}

pub type BackboneNet = Mlp;
pub type ClassifierNet = Mlp;
pub type DecoderNet = Mlp;

impl Mlp {
    /// `dims = [in, h1, ..., out]`, Glorot-initialized.
    pub fn new(dims: &[usize], rng: &mut RandomSource) -> Self {
        assert!(dims.len() >= 2, "an Mlp needs at least input and output dims");
        let layers = dims.windows(2).map(|w| AffineLayer::glorot(w[0], w[1], rng)).collect();
        Self::from_layers(layers).expect("consecutive dims chain by construction")
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims.windows(2).map(|w| AffineLayer::zeros(w[0], w[1])).collect();
        Self::from_layers(layers).expect("consecutive dims chain by construction")
    }

    pub fn from_layers(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an Mlp needs at least one layer"));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("layer {} input {}", i + 1, w[0].out_dim()),
                    w[1].in_dim(),
                ));
            }
        }
        Ok(Mlp {
            layers,
            hidden_pre: Vec::new(),
            output: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    /// Forward pass that caches everything [`backward`](Self::backward) needs.
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        self.hidden_pre.clear();
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let pre = layer.forward(&h)?;
            if i < last {
                h = Activation::Relu.forward(&pre)?;
                self.hidden_pre.push(pre);
            } else {
                h = pre.map(sigmoid);
            }
        }
        self.output = Some(h.clone());
        Ok(h)
    }

    /// Forward pass without caching.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let pre = layer.apply(&h)?;
            h = if i < last {
                pre.map(|v| v.max(0.0))
            } else {
                pre.map(sigmoid)
            };
        }
        Ok(h)
    }

    /// Backpropagates a gradient w.r.t. the sigmoid output.
    ///
    /// Returns the gradient w.r.t. the input and one [`LayerGrad`] per layer.
    pub fn backward(&self, grad_out: &Matrix) -> Result<(Matrix, Vec<LayerGrad>)> {
        let out = self.output.as_ref().ok_or(Error::MissingCache("Mlp::backward"))?;
        let mut g = grad_out.zip_map(out, |g, p| g * p * (1.0 - p))?;
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let (g_in, lg) = self.layers[i].backward(&g)?;
            grads.push(lg);
            g = if i > 0 {
                Activation::Relu.backward(&self.hidden_pre[i - 1], &g_in)?
            } else {
                g_in
            };
        }
        grads.reverse();
        Ok((g, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_half() {
        let net = Mlp::zeros(&[3, 5, 2]);
        let out = net.apply(&Matrix::filled(4, 3, 1.7)).unwrap();
        assert_eq!(out.shape(), (4, 2));
        assert!(out.as_slice().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn saturating_single_layer() {
        let layer = AffineLayer::new(Matrix::filled(1, 1, 100.0), vec![0.0]).unwrap();
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let out = net.apply(&Matrix::filled(1, 1, 1.0)).unwrap();
        assert!((out[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_and_apply_agree() {
        let mut rng = RandomSource::new(4);
        let mut net = Mlp::new(&[3, 6, 4, 2], &mut rng);
        let x = Matrix::from_fn(5, 3, |r, c| (r as f64 - c as f64) * 0.3);
        assert_eq!(net.forward(&x).unwrap(), net.apply(&x).unwrap());
    }

    #[test]
    fn backward_needs_forward() {
        let net = Mlp::zeros(&[2, 2]);
        assert!(net.backward(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn mismatched_layers_rejected() {
        let layers = vec![AffineLayer::zeros(2, 3), AffineLayer::zeros(4, 1)];
        assert!(Mlp::from_layers(layers).is_err());
    }
}
