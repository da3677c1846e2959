use crate::error::{Error, Result};
use crate::network::{ForwardRecord, ModelParams, ParamGroup};
use crate::numkit::{LayerGrad, Matrix};
use crate::objective::{bernoulli_kl_mi_grad_p, bernoulli_kl_mi_grad_q, cross_entropy_grad, gaussian_kl_mi_grads};
use crate::samplers::gumbel_softmax_binary_grad;

/// Gradients laid out exactly like [`ModelParams`]: one list of
/// [`LayerGrad`]s per [`ParamGroup`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    groups: Vec<Vec<LayerGrad>>,
}

impl GradientBundle {
    pub fn zeros_like(params: &ModelParams) -> Self {
        GradientBundle {
            groups: ParamGroup::ALL
                .iter()
                .map(|&g| params.layers(g).into_iter().map(LayerGrad::zeros_like).collect())
                .collect(),
        }
    }

    pub fn group(&self, g: ParamGroup) -> &[LayerGrad] {
        &self.groups[g.index()]
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> &mut Vec<LayerGrad> {
        &mut self.groups[g.index()]
    }

    pub fn set_group(&mut self, g: ParamGroup, grads: Vec<LayerGrad>) {
        self.groups[g.index()] = grads;
    }

    pub fn values(&self, g: ParamGroup) -> impl Iterator<Item = f64> + '_ {
        self.group(g).iter().flat_map(|l| l.values())
    }

    pub fn is_finite(&self, g: ParamGroup) -> bool {
        self.group(g).iter().all(LayerGrad::is_finite)
    }

    pub fn scale(&mut self, k: f64) {
        self.groups.iter_mut().flatten().for_each(|l| l.scale(k));
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: f64, other: &GradientBundle) -> Result<()> {
        for (a, b) in self.groups.iter_mut().flatten().zip(other.groups.iter().flatten()) {
            a.axpy(k, b)?;
        }
        Ok(())
    }

    /// Checks that every gradient matches the shape of its parameter.
    pub fn check_against(&self, params: &ModelParams) -> Result<()> {
        for g in ParamGroup::ALL {
            let layers = params.layers(g);
            let grads = self.group(g);
            let ok = layers.len() == grads.len()
                && layers
                    .iter()
                    .zip(grads)
                    .all(|(l, gr)| gr.weights.shape() == l.weights().shape() && gr.bias.len() == l.bias().len());
            if !ok {
                return Err(Error::shape(
                    "GradientBundle",
                    format!("gradients shaped like group `{g}`"),
                    "mismatched layers",
                ));
            }
        }
        Ok(())
    }
}

/// Reverse-mode gradient of `total_loss` w.r.t. every parameter group.
///
/// Pathwise terms flow through the relaxed label sample and the
/// reparameterized quality sample; the KL-with-entropy terms are
/// differentiated in closed form. The classifier receives only the
/// KL-vs-posterior signal, with `q_z` treated as a constant there.
pub fn backward_full(params: &ModelParams, record: &ForwardRecord, y: &Matrix, lambda: f64) -> Result<GradientBundle> {
    let k = params.config().classes;
    let mut out = GradientBundle::zeros_like(params);

    // decoder: reconstruction term
    let g_py = cross_entropy_grad(&record.p_y, y)?;
    let (g_dec_in, g_dec) = params.decoder.backward(&g_py)?;
    out.set_group(ParamGroup::Decoder, g_dec);
    let (g_z, g_s) = g_dec_in.split_cols(k);

    // additive head: through z = g(γ; q) plus the closed-form KL term
    let mut g_q = bernoulli_kl_mi_grad_q(&record.q_z, &record.p_z, lambda)?;
    {
        let gz = g_z.as_slice();
        let q = record.q_z.as_slice();
        let g0 = record.noise.gumbel.g0.as_slice();
        let g1 = record.noise.gumbel.g1.as_slice();
        for (i, gq) in g_q.as_mut_slice().iter_mut().enumerate() {
            *gq += gz[i] * gumbel_softmax_binary_grad(q[i], g0[i], g1[i], record.tau);
        }
    }
    let (g_yhat_add, g_add) = params.additive.backward(&g_q)?;
    out.set_group(ParamGroup::Additive, g_add);

    // contrastive head: through s = μ + σ ⊙ ζ plus the closed-form KL term
    let (kl_mu, kl_lv) = gaussian_kl_mi_grads(&record.mu, &record.logvar, lambda);
    let g_mu = g_s.add(&kl_mu)?;
    let std_zeta = record
        .logvar
        .zip_map(&record.noise.gauss.zeta, |lv, z| 0.5 * (0.5 * lv).exp() * z)?;
    let g_lv = g_s.hadamard(&std_zeta)?.add(&kl_lv)?;
    let (g_yhat_con, g_con) = params.contrastive.backward(&g_mu, &g_lv)?;
    out.set_group(ParamGroup::Contrastive, g_con);

    // shared backbone
    let g_yhat = g_yhat_add.add(&g_yhat_con)?;
    let (_, g_bb) = params.backbone.backward(&g_yhat)?;
    out.set_group(ParamGroup::Backbone, g_bb);

    // classifier: KL(q ‖ P) as a function of P
    let g_pz = bernoulli_kl_mi_grad_p(&record.q_z, &record.p_z)?;
    let (_, g_cls) = params.classifier.backward(&g_pz)?;
    out.set_group(ParamGroup::Classifier, g_cls);

    Ok(out)
}

/// Classifier gradient of the cross-entropy between `P(z|x)` and the noisy
/// labels, used as the auxiliary signal in [`anneal_mix`].
pub fn classifier_ce_grad(params: &ModelParams, record: &ForwardRecord, y: &Matrix) -> Result<Vec<LayerGrad>> {
    let g = cross_entropy_grad(&record.p_z, y)?;
    Ok(params.classifier.backward(&g)?.1)
}

/// `(1 − ρ)·elbo + ρ·ce`, layer by layer.
pub fn anneal_mix(elbo: &[LayerGrad], ce: &[LayerGrad], rho: f64) -> Result<Vec<LayerGrad>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("ρ must lie in [0, 1], got {rho}")));
    }
    if elbo.len() != ce.len() {
        return Err(Error::shape("anneal_mix", elbo.len(), ce.len()));
    }
    elbo.iter()
        .zip(ce)
        .map(|(e, c)| {
            let mut mixed = e.clone();
            mixed.scale(1.0 - rho);
            mixed.axpy(rho, c)?;
            Ok(mixed)
        })
        .collect()
}
