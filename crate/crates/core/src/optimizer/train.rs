use crate::config::TrainingConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{model_forward, ClassifierNet, ModelParams, ParamGroup};
use crate::numkit::{LayerGrad, RandomSource};
use crate::objective::{aux_cross_entropy, cross_entropy_grad, total_loss, LossRecord};
use crate::samplers::DecaySchedule;

use super::backward::{anneal_mix, backward_full, classifier_ce_grad, GradientBundle};

/// Position in a run together with the schedules that depend on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainState {
    pub step: u64,
    pub epoch: usize,
    pub base_lr: f64,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub tau: DecaySchedule,
    pub rho: DecaySchedule,
}

impl TrainState {
    pub fn new(cfg: &TrainingConfig) -> Self {
        TrainState {
            step: 0,
            epoch: 0,
            base_lr: cfg.base_lr,
            lr_decay_every: cfg.lr_decay_every,
            lr_decay_factor: cfg.lr_decay_factor,
            tau: cfg.tau,
            rho: cfg.rho,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau.value(self.step)
    }

    pub fn rho(&self) -> f64 {
        self.rho.value(self.step)
    }
}

/// `base_lr · factor^{−⌊epoch / every⌋}`.
pub fn lr_at(state: &TrainState) -> f64 {
    let drops = (state.epoch / state.lr_decay_every) as i32;
    state.base_lr * state.lr_decay_factor.powi(-drops)
}

fn apply_update(layers: Vec<&mut crate::numkit::AffineLayer>, grads: &[LayerGrad], lr: f64) {
    for (layer, g) in layers.into_iter().zip(grads) {
        for (p, d) in layer.values_mut().zip(g.values()) {
            *p -= lr * d;
        }
    }
}

/// `θ ← θ − lr·∇θ` for every group. Nothing is updated if any group has a
/// non-finite gradient.
pub fn sgd_step(params: &mut ModelParams, grads: &GradientBundle, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be >= 0, got {lr}")));
    }
    grads.check_against(params)?;
    if let Some(g) = ParamGroup::ALL.into_iter().find(|&g| !grads.is_finite(g)) {
        return Err(Error::NonFiniteGradient(g.name()));
    }
    for g in ParamGroup::ALL {
        apply_update(params.layers_mut(g), grads.group(g), lr);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LossRecord>,
    pub state: TrainState,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub classifier: ClassifierNet,
    pub log: Vec<LossRecord>,
    pub state: TrainState,
}

fn check_run(ds: &Dataset, cfg: &TrainingConfig) -> Result<()> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    ds.validate()
}

fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size)
}

/// One gradient step on a mini-batch; returns the loss averaged over the
/// Monte-Carlo samples.
pub fn train_step(
    params: &mut ModelParams,
    ds: &Dataset,
    idx: &[usize],
    cfg: &TrainingConfig,
    state: &TrainState,
    noise: &mut RandomSource,
) -> Result<LossRecord> {
    let x = ds.features.select_rows(idx);
    let y = ds.noisy_labels.select_rows(idx);
    let (tau, rho, lr) = (state.tau(), state.rho(), lr_at(state));

    let mut grads = GradientBundle::zeros_like(params);
    let mut ce = Vec::new();
    let mut sums = [0.0; 5];
    let n = cfg.samples as f64;
    for _ in 0..cfg.samples {
        let record = model_forward(params, &x, &y, tau, noise)?;
        let loss = total_loss(&record, &y, cfg.lambda)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {}", state.step)));
        }
        for (s, v) in sums
            .iter_mut()
            .zip([loss.recon, loss.kl_z, loss.kl_s, loss.total, loss.aux_ce])
        {
            *s += v / n;
        }
        grads.axpy(1.0 / n, &backward_full(params, &record, &y, cfg.lambda)?)?;
        if ce.is_empty() {
            ce = classifier_ce_grad(params, &record, &y)?;
        }
    }
    let mixed = anneal_mix(grads.group(ParamGroup::Classifier), &ce, rho)?;
    grads.set_group(ParamGroup::Classifier, mixed);
    sgd_step(params, &grads, lr)?;

    let [recon, kl_z, kl_s, total, aux_ce] = sums;
    Ok(LossRecord {
        step: state.step,
        recon,
        kl_z,
        kl_s,
        total,
        aux_ce,
        tau,
        rho,
        lr,
    })
}

/// End-to-end training on the noisy labels of `ds`. Each epoch visits the
/// rows in a freshly shuffled order; the last partial batch is kept.
pub fn train(ds: &Dataset, cfg: &TrainingConfig) -> Result<TrainOutcome> {
    check_run(ds, cfg)?;
    let net = cfg.arch.network(ds.feature_dim(), ds.classes());
    let mut params = ModelParams::new(net, cfg.seed)?;
    let root = RandomSource::new(cfg.seed);
    let mut shuffler = root.fork(1);
    let mut noise = root.fork(2);
    let mut state = TrainState::new(cfg);
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        shuffler.shuffle(&mut order);
        for idx in batches(&order, cfg.batch_size) {
            log.push(train_step(&mut params, ds, idx, cfg, &state, &mut noise)?);
            state.step += 1;
        }
    }
    Ok(TrainOutcome { params, log, state })
}

/// Plain classifier trained with cross-entropy on the noisy labels. It
/// starts from the same initialization as the CAN classifier and sees the
/// same batch order and learning-rate schedule.
pub fn train_baseline(ds: &Dataset, cfg: &TrainingConfig) -> Result<BaselineOutcome> {
    check_run(ds, cfg)?;
    let net = cfg.arch.network(ds.feature_dim(), ds.classes());
    let mut classifier = ModelParams::new(net, cfg.seed)?.classifier;
    let mut shuffler = RandomSource::new(cfg.seed).fork(1);
    let mut state = TrainState::new(cfg);
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        shuffler.shuffle(&mut order);
        for idx in batches(&order, cfg.batch_size) {
            let x = ds.features.select_rows(idx);
            let y = ds.noisy_labels.select_rows(idx);
            let lr = lr_at(&state);
            let p = classifier.forward(&x)?;
            let ce = aux_cross_entropy(&p, &y)?;
            let (_, grads) = classifier.backward(&cross_entropy_grad(&p, &y)?)?;
            if !grads.iter().all(LayerGrad::is_finite) {
                return Err(Error::NonFiniteGradient(ParamGroup::Classifier.name()));
            }
            apply_update(classifier.layers_mut().iter_mut().collect(), &grads, lr);
            log.push(LossRecord {
                step: state.step,
                recon: 0.0,
                kl_z: 0.0,
                kl_s: 0.0,
                total: ce,
                aux_ce: ce,
                tau: state.tau(),
                rho: state.rho(),
                lr,
            });
            state.step += 1;
        }
    }
    Ok(BaselineOutcome { classifier, log, state })
}
