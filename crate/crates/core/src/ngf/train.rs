//! Training loop shared by the factorized model and the baseline: batch
//! size one, optional gradient accumulation, ADAM with a one-cycle
//! schedule, per-epoch history.

use super::baseline::DirectRegressor;
use super::model::{NgfModel, PredictionBundle};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::harness::metrics::relative_l2;
use crate::nncore::{Adam, GradAccumulator, OneCycle, ParamSet, Tape};
use crate::problems::ProblemInstance;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub max_lr: f64,
    pub lambda: f64,
    /// Micro-batches averaged per optimizer step.
    pub accum: usize,
    /// Shuffling seed (model init has its own seed).
    pub seed: u64,
    /// Evaluate split errors every epoch; costs one feature pass plus the
    /// per-instance applications.
    pub track_history: bool,
    /// Global-norm gradient clip applied to the averaged gradients before
    /// the optimizer step; `None` disables.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            max_lr: 1e-4,
            lambda: 1.0,
            accum: 1,
            seed: 0,
            track_history: true,
            clip_norm: Some(10.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_rel_l2: Option<f64>,
    pub test_rel_l2: Option<f64>,
}

/// The two trainable models expose the same loss/predict surface to the
/// trainer.
pub trait TrainableModel {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn coord_features(&self, domain: &Domain) -> Vec<f64>;
    /// Builds one instance's loss graph. Returns the tape, the scalar
    /// loss, and the loss value; parameter-leaf gradients are read back in
    /// parameter order.
    fn instance_loss(
        &self,
        domain: &Domain,
        coord_feats: &[f64],
        inst: &ProblemInstance,
        lambda: f64,
    ) -> (Tape, Vec<crate::nncore::Var>, f64);
    /// Full-vertex predictions for a batch of instances.
    fn predict_batch(
        &self,
        domain: &Domain,
        coord_feats: &[f64],
        insts: &[&ProblemInstance],
    ) -> Vec<Vec<f64>>;
}

impl TrainableModel for NgfModel {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn coord_features(&self, domain: &Domain) -> Vec<f64> {
        NgfModel::coord_features(self, domain)
    }

    fn instance_loss(
        &self,
        domain: &Domain,
        coord_feats: &[f64],
        inst: &ProblemInstance,
        lambda: f64,
    ) -> (Tape, Vec<crate::nncore::Var>, f64) {
        let mut tape = Tape::new();
        let fwd = self.forward_taped(&mut tape, coord_feats, domain.n_vertices());
        let loss = self.loss_taped(&mut tape, &fwd, domain, inst, lambda);
        let value = tape.value(loss)[0];
        tape.backward(loss);
        (tape, fwd.leaves, value)
    }

    fn predict_batch(
        &self,
        domain: &Domain,
        _coord_feats: &[f64],
        insts: &[&ProblemInstance],
    ) -> Vec<Vec<f64>> {
        // Features depend only on geometry: one backbone pass serves every
        // instance.
        let feat = self.features(domain);
        insts
            .iter()
            .map(|inst| {
                let PredictionBundle { u, .. } =
                    NgfModel::predict_from_features(&feat, domain, &inst.f, &inst.h);
                u
            })
            .collect()
    }
}

impl TrainableModel for DirectRegressor {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn coord_features(&self, domain: &Domain) -> Vec<f64> {
        DirectRegressor::coord_features(self, domain)
    }

    fn instance_loss(
        &self,
        domain: &Domain,
        coord_feats: &[f64],
        inst: &ProblemInstance,
        _lambda: f64,
    ) -> (Tape, Vec<crate::nncore::Var>, f64) {
        let inputs = self.assemble_inputs(domain, coord_feats, &inst.f, &inst.h);
        let mut tape = Tape::new();
        let (leaves, u_pred) = self.forward_taped(&mut tape, &inputs, domain.n_vertices());
        let u_true = tape.leaf([domain.n_vertices(), 1], inst.u.clone());
        let loss = tape.mse(u_pred, u_true);
        let value = tape.value(loss)[0];
        tape.backward(loss);
        (tape, leaves, value)
    }

    fn predict_batch(
        &self,
        domain: &Domain,
        coord_feats: &[f64],
        insts: &[&ProblemInstance],
    ) -> Vec<Vec<f64>> {
        insts
            .iter()
            .map(|inst| {
                let inputs = self.assemble_inputs(domain, coord_feats, &inst.f, &inst.h);
                let mut tape = Tape::new();
                let (_, u) = self.forward_taped(&mut tape, &inputs, domain.n_vertices());
                tape.value(u).to_vec()
            })
            .collect()
    }
}

fn clip_global_norm(grads: &mut [Vec<f64>], clip: f64) {
    let norm: f64 = grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > clip {
        let scale = clip / norm;
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
}

/// Mean relative L2 over a split.
pub fn mean_split_error<M: TrainableModel>(
    model: &M,
    domain: &Domain,
    coord_feats: &[f64],
    insts: &[&ProblemInstance],
) -> Result<f64> {
    if insts.is_empty() {
        return Ok(f64::NAN);
    }
    let preds = model.predict_batch(domain, coord_feats, insts);
    let mut total = 0.0;
    for (inst, pred) in insts.iter().zip(&preds) {
        total += relative_l2(&inst.u, pred)?;
    }
    Ok(total / insts.len() as f64)
}

/// Trains in place. Deterministic given the config seed and the model's
/// init seed; instance order reshuffles every epoch.
pub fn train<M: TrainableModel>(
    model: &mut M,
    domain: &Domain,
    train_set: &[&ProblemInstance],
    test_set: &[&ProblemInstance],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    assert!(cfg.accum >= 1, "accumulation must be at least 1");
    if cfg.epochs == 0 || train_set.is_empty() {
        return Ok(Vec::new());
    }
    let coord_feats = model.coord_features(domain);
    let steps_per_epoch = train_set.len().div_ceil(cfg.accum);
    let total_steps = cfg.epochs * steps_per_epoch;
    let mut adam = Adam::new(OneCycle::new(cfg.max_lr, total_steps), model.params());
    let mut accumulator = GradAccumulator::new(model.params());
    let mut shuffle_rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.accum) {
            for &idx in chunk {
                let inst = train_set[idx];
                let (tape, leaves, loss_value) =
                    model.instance_loss(domain, &coord_feats, inst, cfg.lambda);
                if !loss_value.is_finite() {
                    return Err(Error::DivergedTraining { epoch });
                }
                epoch_loss += loss_value;
                let grads: Vec<Vec<f64>> =
                    leaves.iter().map(|&v| tape.grad(v).to_vec()).collect();
                accumulator.add(&grads);
            }
            let mut mean = accumulator.take_mean();
            if let Some(clip) = cfg.clip_norm {
                clip_global_norm(&mut mean, clip);
            }
            adam.step(model.params_mut(), &mean);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let (train_err, test_err) = if cfg.track_history {
            (
                Some(mean_split_error(model, domain, &coord_feats, train_set)?),
                Some(mean_split_error(model, domain, &coord_feats, test_set)?),
            )
        } else {
            (None, None)
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            train_rel_l2: train_err,
            test_rel_l2: test_err,
        });
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngf::model::NgfConfig;
    use crate::problems::{domain_for, generate_dataset, PdeFamily};

    fn tiny_config(seed: u64) -> NgfConfig {
        NgfConfig {
            feature_dim: 8,
            blocks: 1,
            fourier_freqs: 2,
            prod_freqs: 2,
            psi_scale: 0.1,
            phi_gain: 1.0,
            mass_bias: -2.0,
            seed,
        }
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let domain = domain_for(PdeFamily::Poisson2d, 5).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 2, 1, 1).unwrap();
        let train_set = ds.split_instances(crate::problems::Split::Train);
        let test_set = ds.split_instances(crate::problems::Split::Test);
        let mut model = NgfModel::new(tiny_config(1), 2);
        let before = model.params.clone();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let history = train(&mut model, &domain, &train_set, &test_set, &cfg).unwrap();
        assert!(history.is_empty());
        assert_eq!(model.params, before);
    }

    #[test]
    fn training_is_deterministic() {
        let domain = domain_for(PdeFamily::Poisson2d, 5).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 3, 2, 4).unwrap();
        let train_set = ds.split_instances(crate::problems::Split::Train);
        let test_set = ds.split_instances(crate::problems::Split::Test);
        let cfg = TrainConfig { epochs: 3, max_lr: 1e-3, ..Default::default() };

        let run = || {
            let mut model = NgfModel::new(tiny_config(7), 2);
            let history = train(&mut model, &domain, &train_set, &test_set, &cfg).unwrap();
            (model.params, history)
        };
        let (p1, h1) = run();
        let (p2, h2) = run();
        assert_eq!(p1, p2);
        for (a, b) in h1.iter().zip(&h2) {
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.train_rel_l2.unwrap().to_bits(), b.train_rel_l2.unwrap().to_bits());
        }
    }

    #[test]
    fn loss_decreases_on_tiny_problem() {
        let domain = domain_for(PdeFamily::Poisson2d, 5).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 2, 1, 9).unwrap();
        let train_set = ds.split_instances(crate::problems::Split::Train);
        let test_set = ds.split_instances(crate::problems::Split::Test);
        let mut model = NgfModel::new(tiny_config(3), 2);
        let cfg = TrainConfig { epochs: 30, max_lr: 3e-3, ..Default::default() };
        let history = train(&mut model, &domain, &train_set, &test_set, &cfg).unwrap();
        let first = history.first().unwrap().train_loss;
        let last = history.last().unwrap().train_loss;
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn gradient_accumulation_equals_mean_gradient_step() {
        // One optimizer step over k identical instances with accum = k
        // must match a single step on that instance.
        let domain = domain_for(PdeFamily::Poisson2d, 5).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 1, 0, 12).unwrap();
        let inst = &ds.instances[0];
        let insts: Vec<&crate::problems::ProblemInstance> = vec![inst, inst, inst, inst];
        let single: Vec<&crate::problems::ProblemInstance> = vec![inst];

        let cfg_acc = TrainConfig {
            epochs: 1,
            accum: 4,
            max_lr: 1e-3,
            track_history: false,
            ..Default::default()
        };
        let cfg_one = TrainConfig {
            epochs: 1,
            accum: 1,
            max_lr: 1e-3,
            track_history: false,
            ..Default::default()
        };

        let mut m1 = NgfModel::new(tiny_config(5), 2);
        train(&mut m1, &domain, &insts, &[], &cfg_acc).unwrap();
        let mut m2 = NgfModel::new(tiny_config(5), 2);
        train(&mut m2, &domain, &single, &[], &cfg_one).unwrap();

        for (a, b) in m1.params.iter().zip(m2.params.iter()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12, "{}: {x} vs {y}", a.name);
            }
        }
    }
}
