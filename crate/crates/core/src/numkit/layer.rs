use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::rng::RandomSource;
use crate::error::{Error, Result};

/// Fully-connected layer `out = W·in + b`, applied row-wise to a batch.
///
/// The forward pass caches its input so that a subsequent [`backward`]
/// can form the weight gradient.
///
/// [`backward`]: AffineLayer::backward
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineLayer {
    weights: Matrix,
    bias: Vec<f64>,
    #[serde(skip)]
    cached_input: Option<Matrix>,
}

/// Gradients for one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &AffineLayer) -> Self {
        LayerGrad {
            weights: Matrix::zeros(layer.out_dim(), layer.in_dim()),
            bias: vec![0.0; layer.out_dim()],
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.as_slice().iter().chain(&self.bias).copied()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights.as_mut_slice().iter_mut().chain(&mut self.bias)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn scale(&mut self, k: f64) {
        self.values_mut().for_each(|v| *v *= k);
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: f64, other: &LayerGrad) -> Result<()> {
        self.weights.axpy(k, &other.weights)?;
        if self.bias.len() != other.bias.len() {
            return Err(Error::shape("LayerGrad::axpy", self.bias.len(), other.bias.len()));
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += k * b;
        }
        Ok(())
    }
}

impl AffineLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(
                "AffineLayer::new",
                format!("bias of length {}", weights.rows()),
                format!("bias of length {}", bias.len()),
            ));
        }
        Ok(AffineLayer {
            weights,
            bias,
            cached_input: None,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        AffineLayer {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            cached_input: None,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut RandomSource) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Matrix::from_fn(out_dim, in_dim, |_, _| rng.uniform_range(-limit, limit));
        AffineLayer {
            weights,
            bias: vec![0.0; out_dim],
            cached_input: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.as_slice().iter().chain(&self.bias).copied()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights.as_mut_slice().iter_mut().chain(&mut self.bias)
    }

    pub fn has_cache(&self) -> bool {
        self.cached_input.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cached_input = None;
    }

    /// Forward pass; caches `input` for the next backward.
    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        let out = self.apply(input)?;
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    /// Forward pass without touching the cache.
    pub fn apply(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "affine_forward",
                format!("batch x {}", self.in_dim()),
                format!("{}x{}", input.rows(), input.cols()),
            ));
        }
        let mut out = Matrix::zeros(input.rows(), self.out_dim());
        for (b, x) in input.row_iter().enumerate() {
            let out_row = out.row_mut(b);
            for (o, slot) in out_row.iter_mut().enumerate() {
                let w = self.weights.row(o);
                *slot = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Backward pass against the cached input.
    ///
    /// Returns `(grad_input, grads)` with `grad_input = grad_out · W`,
    /// `grad_w = grad_outᵀ · input` and `grad_b` the column sums of `grad_out`.
    pub fn backward(&self, grad_out: &Matrix) -> Result<(Matrix, LayerGrad)> {
        let input = self
            .cached_input
            .as_ref()
            .ok_or(Error::MissingCache("affine_backward"))?;
        grad_out.expect_shape("affine_backward", (input.rows(), self.out_dim()))?;

        let mut grad_w = Matrix::zeros(self.out_dim(), self.in_dim());
        let mut grad_in = Matrix::zeros(input.rows(), self.in_dim());
        for b in 0..input.rows() {
            let x = input.row(b);
            let g = grad_out.row(b);
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                for (gw, &xi) in grad_w.row_mut(o).iter_mut().zip(x) {
                    *gw += go * xi;
                }
                for (gi, &w) in grad_in.row_mut(b).iter_mut().zip(self.weights.row(o)) {
                    *gi += go * w;
                }
            }
        }
        Ok((
            grad_in,
            LayerGrad {
                weights: grad_w,
                bias: grad_out.column_sums(),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(rows: &[&[f64]], bias: &[f64]) -> AffineLayer {
        AffineLayer::new(Matrix::from_rows(rows).unwrap(), bias.to_vec()).unwrap()
    }

    #[test]
    fn identity_passthrough() {
        let mut l = AffineLayer::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let out = l.forward(&Matrix::from_rows(&[[1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn bias_only() {
        let mut l = layer(&[&[0.0, 0.0]], &[3.0]);
        let out = l.forward(&Matrix::from_rows(&[[-7.0, 11.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[3.0]);
    }

    #[test]
    fn hand_arithmetic() {
        let mut l = layer(&[&[1.0, 1.0]], &[0.0]);
        let out = l.forward(&Matrix::from_rows(&[[2.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[5.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut l = AffineLayer::zeros(3, 2);
        let err = l.forward(&Matrix::zeros(1, 2)).unwrap_err();
        assert!(err.to_string().contains("batch x 3"), "{err}");
    }

    #[test]
    fn backward_identity_and_outer_product() {
        let mut l = AffineLayer::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        l.forward(&Matrix::from_rows(&[[4.0, 5.0]]).unwrap()).unwrap();
        let (gin, _) = l.backward(&Matrix::from_rows(&[[1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(gin.as_slice(), &[1.0, 0.0]);

        let mut l = layer(&[&[0.5]], &[0.0]);
        l.forward(&Matrix::from_rows(&[[2.0]]).unwrap()).unwrap();
        let (_, g) = l.backward(&Matrix::from_rows(&[[3.0]]).unwrap()).unwrap();
        assert_eq!(g.weights.as_slice(), &[6.0]);
        assert_eq!(g.bias, vec![3.0]);
    }

    #[test]
    fn backward_without_forward_is_rejected() {
        let l = AffineLayer::zeros(2, 2);
        assert!(matches!(l.backward(&Matrix::zeros(1, 2)), Err(Error::MissingCache(_))));
    }

    #[test]
    fn backward_rejects_wrong_grad_shape() {
        let mut l = AffineLayer::zeros(2, 3);
        l.forward(&Matrix::zeros(4, 2)).unwrap();
        assert!(l.backward(&Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = RandomSource::new(3);
        let l = AffineLayer::glorot(10, 6, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(l.weights().as_slice().iter().all(|w| w.abs() <= limit));
        assert!(l.bias().iter().all(|&b| b == 0.0));
    }
}
