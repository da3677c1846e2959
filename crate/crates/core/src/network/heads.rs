use crate::error::{Error, Result};
use crate::numkit::{sigmoid, Activation, AffineLayer, LayerGrad, Matrix, RandomSource};

fn same_shape(op: &'static str, y: &Matrix, y_hat: &Matrix) -> Result<()> {
    if y.shape() != y_hat.shape() {
        return Err(Error::shape(
            op,
            format!("y and ŷ of equal shape {}x{}", y.rows(), y.cols()),
            format!("ŷ {}x{}", y_hat.rows(), y_hat.cols()),
        ));
    }
    Ok(())
}

/// Contrastive layer: `(μ, logσ²) = f_t(f_s(y) − f_s(ŷ))`.
///
/// `f_s` is a single affine+ReLU map applied to both inputs with the same
/// weights; both rows go through it as one stacked batch so that the layer
/// keeps a single cache.
#[derive(Debug, Clone)]
pub struct ContrastiveHead {
    shared: AffineLayer,
    to_gauss: AffineLayer,
    shared_pre: Option<Matrix>,
}

impl ContrastiveHead {
    pub fn new(classes: usize, hidden: usize, quality_dim: usize, rng: &mut RandomSource) -> Self {
        ContrastiveHead {
            shared: AffineLayer::glorot(classes, hidden, rng),
            to_gauss: AffineLayer::glorot(hidden, 2 * quality_dim, rng),
            shared_pre: None,
        }
    }

    pub fn from_layers(shared: AffineLayer, to_gauss: AffineLayer) -> Result<Self> {
        if shared.out_dim() != to_gauss.in_dim() || to_gauss.out_dim() % 2 != 0 {
            return Err(Error::shape(
                "ContrastiveHead::from_layers",
                format!("f_t: {} -> 2D", shared.out_dim()),
                format!("{} -> {}", to_gauss.in_dim(), to_gauss.out_dim()),
            ));
        }
        Ok(ContrastiveHead {
            shared,
            to_gauss,
            shared_pre: None,
        })
    }

    pub fn quality_dim(&self) -> usize {
        self.to_gauss.out_dim() / 2
    }

    pub fn layers(&self) -> [&AffineLayer; 2] {
        [&self.shared, &self.to_gauss]
    }

    pub fn layers_mut(&mut self) -> [&mut AffineLayer; 2] {
        [&mut self.shared, &mut self.to_gauss]
    }

    /// Returns `(μ, logσ²)`, batch×D each.
    pub fn forward(&mut self, y: &Matrix, y_hat: &Matrix) -> Result<(Matrix, Matrix)> {
        same_shape("contrastive_forward", y, y_hat)?;
        let pre = self.shared.forward(&y.vstack(y_hat)?)?;
        let act = Activation::Relu.forward(&pre)?;
        let (from_y, from_hat) = act.split_rows(y.rows());
        let out = self.to_gauss.forward(&from_y.sub(&from_hat)?)?;
        self.shared_pre = Some(pre);
        Ok(out.split_cols(self.quality_dim()))
    }

    pub fn apply(&self, y: &Matrix, y_hat: &Matrix) -> Result<(Matrix, Matrix)> {
        same_shape("contrastive_forward", y, y_hat)?;
        let embed = |m: &Matrix| self.shared.apply(m).map(|p| p.map(|v| v.max(0.0)));
        let diff = embed(y)?.sub(&embed(y_hat)?)?;
        Ok(self.to_gauss.apply(&diff)?.split_cols(self.quality_dim()))
    }

    /// Returns the gradient w.r.t. `ŷ` and `[shared, to_gauss]` layer grads.
    pub fn backward(&self, g_mu: &Matrix, g_logvar: &Matrix) -> Result<(Matrix, Vec<LayerGrad>)> {
        let pre = self
            .shared_pre
            .as_ref()
            .ok_or(Error::MissingCache("contrastive_backward"))?;
        let (g_diff, g_to_gauss) = self.to_gauss.backward(&g_mu.hstack(g_logvar)?)?;
        let g_stack = g_diff.vstack(&g_diff.scale(-1.0))?;
        let g_pre = Activation::Relu.backward(pre, &g_stack)?;
        let (g_in, g_shared) = self.shared.backward(&g_pre)?;
        let (_, g_y_hat) = g_in.split_rows(g_mu.rows());
        Ok((g_y_hat, vec![g_shared, g_to_gauss]))
    }
}

/// Additive layer: `q(z=1|x,y) = sigmoid(f'_t(f_ns1(y) + f_ns2(ŷ)))`.
#[derive(Debug, Clone)]
pub struct AdditiveHead {
    from_label: AffineLayer,
    from_prior: AffineLayer,
    out: AffineLayer,
    q: Option<Matrix>,
}

impl AdditiveHead {
    pub fn new(classes: usize, hidden: usize, rng: &mut RandomSource) -> Self {
        AdditiveHead {
            from_label: AffineLayer::glorot(classes, hidden, rng),
            from_prior: AffineLayer::glorot(classes, hidden, rng),
            out: AffineLayer::glorot(hidden, classes, rng),
            q: None,
        }
    }

    pub fn from_layers(from_label: AffineLayer, from_prior: AffineLayer, out: AffineLayer) -> Result<Self> {
        let ok = from_label.in_dim() == from_prior.in_dim()
            && from_label.out_dim() == from_prior.out_dim()
            && out.in_dim() == from_label.out_dim()
            && out.out_dim() == from_label.in_dim();
        if !ok {
            return Err(Error::shape(
                "AdditiveHead::from_layers",
                "K -> H, K -> H, H -> K",
                format!(
                    "{} -> {}, {} -> {}, {} -> {}",
                    from_label.in_dim(),
                    from_label.out_dim(),
                    from_prior.in_dim(),
                    from_prior.out_dim(),
                    out.in_dim(),
                    out.out_dim()
                ),
            ));
        }
        Ok(AdditiveHead {
            from_label,
            from_prior,
            out,
            q: None,
        })
    }

    pub fn layers(&self) -> [&AffineLayer; 3] {
        [&self.from_label, &self.from_prior, &self.out]
    }

    pub fn layers_mut(&mut self) -> [&mut AffineLayer; 3] {
        [&mut self.from_label, &mut self.from_prior, &mut self.out]
    }

    pub fn forward(&mut self, y: &Matrix, y_hat: &Matrix) -> Result<Matrix> {
        same_shape("additive_forward", y, y_hat)?;
        let h = self.from_label.forward(y)?.add(&self.from_prior.forward(y_hat)?)?;
        let q = self.out.forward(&h)?.map(sigmoid);
        self.q = Some(q.clone());
        Ok(q)
    }

    pub fn apply(&self, y: &Matrix, y_hat: &Matrix) -> Result<Matrix> {
        same_shape("additive_forward", y, y_hat)?;
        let h = self.from_label.apply(y)?.add(&self.from_prior.apply(y_hat)?)?;
        Ok(self.out.apply(&h)?.map(sigmoid))
    }

    /// Returns the gradient w.r.t. `ŷ` and `[from_label, from_prior, out]`
    /// layer grads, given the gradient w.r.t. `q`.
    pub fn backward(&self, g_q: &Matrix) -> Result<(Matrix, Vec<LayerGrad>)> {
        let q = self.q.as_ref().ok_or(Error::MissingCache("additive_backward"))?;
        let g_logit = g_q.zip_map(q, |g, p| g * p * (1.0 - p))?;
        let (g_h, g_out) = self.out.backward(&g_logit)?;
        let (_, g_label) = self.from_label.backward(&g_h)?;
        let (g_y_hat, g_prior) = self.from_prior.backward(&g_h)?;
        Ok((g_y_hat, vec![g_label, g_prior, g_out]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(rng: &mut RandomSource, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.uniform01())
    }

    #[test]
    fn contrastive_identical_inputs_give_bias() {
        let mut rng = RandomSource::new(1);
        let mut head = ContrastiveHead::new(4, 8, 3, &mut rng);
        for (i, b) in head.to_gauss.bias_mut().iter_mut().enumerate() {
            *b = i as f64 * 0.25 - 0.5;
        }
        let bias = head.to_gauss.bias().to_vec();
        for _ in 0..3 {
            let y = rand_matrix(&mut rng, 5, 4);
            let (mu, lv) = head.forward(&y, &y).unwrap();
            for r in 0..5 {
                assert_eq!(mu.row(r), &bias[..3]);
                assert_eq!(lv.row(r), &bias[3..]);
            }
        }
    }

    #[test]
    fn contrastive_zero_output_layer() {
        let mut rng = RandomSource::new(2);
        let shared = AffineLayer::glorot(3, 5, &mut rng);
        let mut head = ContrastiveHead::from_layers(shared, AffineLayer::zeros(5, 4)).unwrap();
        let (mu, lv) = head
            .forward(&rand_matrix(&mut rng, 2, 3), &rand_matrix(&mut rng, 2, 3))
            .unwrap();
        assert!(mu.as_slice().iter().chain(lv.as_slice()).all(|&v| v == 0.0));
    }

    #[test]
    fn contrastive_swap_negates_preactivation() {
        // Positive f_s weights and nonnegative inputs keep every ReLU active,
        // so f_s is linear and swapping y, ŷ flips the sign of the difference.
        let mut rng = RandomSource::new(3);
        let shared =
            AffineLayer::new(Matrix::from_fn(6, 3, |_, _| rng.uniform_range(0.1, 1.0)), vec![0.05; 6]).unwrap();
        let to_gauss = AffineLayer::glorot(6, 4, &mut rng);
        let head = ContrastiveHead::from_layers(shared, to_gauss).unwrap();
        let y = rand_matrix(&mut rng, 4, 3);
        let y_hat = rand_matrix(&mut rng, 4, 3);
        let (mu_a, lv_a) = head.apply(&y, &y_hat).unwrap();
        let (mu_b, lv_b) = head.apply(&y_hat, &y).unwrap();
        for (a, b) in mu_a.as_slice().iter().zip(mu_b.as_slice()) {
            assert!((a + b).abs() < 1e-12);
        }
        for (a, b) in lv_a.as_slice().iter().zip(lv_b.as_slice()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_zero_params_give_half() {
        let mut head = AdditiveHead::from_layers(
            AffineLayer::zeros(3, 4),
            AffineLayer::zeros(3, 4),
            AffineLayer::zeros(4, 3),
        )
        .unwrap();
        let q = head
            .forward(&Matrix::filled(2, 3, 1.0), &Matrix::filled(2, 3, 0.2))
            .unwrap();
        assert!(q.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn additive_rows_are_independent() {
        let mut rng = RandomSource::new(5);
        let head = AdditiveHead::new(3, 6, &mut rng);
        let y = rand_matrix(&mut rng, 4, 3);
        let y_hat = rand_matrix(&mut rng, 4, 3);
        let q = head.apply(&y, &y_hat).unwrap();
        assert!(q.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        let perm = [2, 0, 3, 1];
        let qp = head.apply(&y.select_rows(&perm), &y_hat.select_rows(&perm)).unwrap();
        assert_eq!(qp, q.select_rows(&perm));
    }

    #[test]
    fn heads_reject_shape_mismatch() {
        let mut rng = RandomSource::new(6);
        let mut c = ContrastiveHead::new(3, 4, 2, &mut rng);
        let mut a = AdditiveHead::new(3, 4, &mut rng);
        let y = Matrix::zeros(2, 3);
        let bad = Matrix::zeros(3, 3);
        assert!(c.forward(&y, &bad).is_err());
        assert!(a.forward(&y, &bad).is_err());
    }
}
