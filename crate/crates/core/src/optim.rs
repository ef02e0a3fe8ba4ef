//! Xavier initialization, Adam, step learning-rate decay and the epoch loop.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::compute_metrics;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::Tensor;

/// Uniform samples in `±√(6 / (fan_in + fan_out))` for a `fan_in × fan_out` weight.
pub fn xavier_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let bound = xavier_bound(fan_in, fan_out);
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..=bound))
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates for every parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v) = params
            .into_iter()
            .map(|p| (Tensor::zeros(p.rows(), p.cols()), Tensor::zeros(p.rows(), p.cols())))
            .unzip();
        AdamState { m, v, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    /// One bias-corrected Adam update. Parameters are left untouched when any
    /// gradient is non-finite.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Domain(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::shape("adam_step", p.shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient for parameter {i}")));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.01,
            decay_factor: 0.5,
            decay_every: 50,
            epochs: 200,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// `lr0 · decay_factor^⌊epoch / decay_every⌋`.
pub fn lr_schedule(config: &TrainConfig, epoch: usize) -> f64 {
    let stages = epoch / config.decay_every.max(1);
    config.lr0 * config.decay_factor.powi(stages as i32)
}

/// Feature matrices paired with class indices.
#[derive(Clone, Debug, Default)]
pub struct LabeledSet<'a> {
    pub features: Vec<&'a Tensor>,
    pub labels: Vec<usize>,
}

impl<'a> LabeledSet<'a> {
    pub fn new(features: Vec<&'a Tensor>, labels: Vec<usize>) -> Self {
        LabeledSet { features, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub train_wa: f64,
    pub val_wa: Option<f64>,
    pub val_ua: Option<f64>,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,lr,mean_loss,train_wa,val_wa,val_ua";
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        write!(
            f,
            "{},{},{:.8},{:.6},{},{}",
            self.epoch,
            self.lr,
            self.mean_loss,
            self.train_wa,
            opt(self.val_wa),
            opt(self.val_ua)
        )
    }
}

fn check_set(model: &ModelParams, set: &LabeledSet<'_>, what: &str) -> Result<()> {
    let c = model.config();
    if set.features.len() != set.labels.len() {
        return Err(Error::Data(format!(
            "{what}: {} feature matrices but {} labels",
            set.features.len(),
            set.labels.len()
        )));
    }
    for (i, (x, &y)) in set.features.iter().zip(&set.labels).enumerate() {
        if x.shape() != (c.nodes, c.input_dim) {
            return Err(Error::Data(format!(
                "{what}: sample {i} has shape {:?}, model expects {:?}",
                x.shape(),
                (c.nodes, c.input_dim)
            )));
        }
        if y >= c.num_classes {
            return Err(Error::Data(format!(
                "{what}: sample {i} label {y} outside 0..{}",
                c.num_classes
            )));
        }
    }
    Ok(())
}

/// Predicted labels for every sample, evaluated in chunks.
pub fn predict_labels(model: &ModelParams, features: &[&Tensor], chunk: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(features.len());
    for part in features.chunks(chunk.max(1)) {
        out.extend(model.forward_batch(part)?.into_iter().map(|p| p.label));
    }
    Ok(out)
}

/// Trains `model` in place with seeded mini-batch Adam.
pub fn train(
    model: &mut ModelParams,
    data: &LabeledSet<'_>,
    config: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    train_with(model, data, config, None, |_| {})
}

/// [`train`] with an optional validation set scored after every epoch and a
/// callback receiving each log record as it is produced.
pub fn train_with(
    model: &mut ModelParams,
    data: &LabeledSet<'_>,
    config: &TrainConfig,
    validation: Option<&LabeledSet<'_>>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    check_set(model, data, "training set")?;
    if let Some(v) = validation {
        check_set(model, v, "validation set")?;
    }

    let classes = model.config().num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(model.tensors());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = lr_schedule(config, epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut predicted = Vec::with_capacity(data.len());
        let mut truth = Vec::with_capacity(data.len());
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<&Tensor> = batch.iter().map(|&i| data.features[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let out = model.loss_and_gradients(&xs, &ys)?;
            if !out.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    step,
                    message: format!("loss is {}", out.loss),
                });
            }
            loss_sum += out.loss * batch.len() as f64;
            for r in 0..out.logits.rows() {
                predicted.push(crate::model::Prediction::from_logits(out.logits.row(r)).label);
            }
            truth.extend_from_slice(&ys);
            adam.step(model.tensors_mut(), &out.grads, lr)
                .map_err(|e| Error::Training {
                    epoch,
                    step,
                    message: e.to_string(),
                })?;
        }
        let train_wa = compute_metrics(&predicted, &truth, classes)?.wa;
        let (val_wa, val_ua) = match validation {
            Some(v) if !v.is_empty() => {
                let preds = predict_labels(model, &v.features, 64)?;
                let m = compute_metrics(&preds, &v.labels, classes)?;
                (Some(m.wa), Some(m.ua))
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch,
            lr,
            mean_loss: loss_sum / data.len() as f64,
            train_wa,
            val_wa,
            val_ua,
        };
        on_epoch(&record);
        log.push(record);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_bounds() {
        assert!((xavier_bound(35, 110) - (6.0f64 / 145.0).sqrt()).abs() < 1e-15);
        assert!((xavier_bound(35, 110) - 0.2034).abs() < 1e-4);
        assert!((xavier_bound(1, 1) - 3f64.sqrt()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = xavier_init(35, 110, &mut rng);
        assert!(w.max_abs() <= xavier_bound(35, 110));
        let mut rng2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(w, xavier_init(35, 110, &mut rng2));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Tensor::row_vector(&[1.0]);
        let mut adam = AdamState::new([&p]);
        adam.step(vec![&mut p], &[Tensor::row_vector(&[0.5])], 0.01).unwrap();
        let expect = 1.0 - 0.01 * (0.5 / (0.5 + 1e-8));
        assert!((p.get(0, 0) - expect).abs() < 1e-15);
        assert!((p.get(0, 0) - 0.99).abs() < 1e-9);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = Tensor::from_rows(&[[0.3, -2.0], [5.0, 1e-3]]);
        let before = p.clone();
        let mut adam = AdamState::new([&p]);
        for _ in 0..100 {
            adam.step(vec![&mut p], &[Tensor::zeros(2, 2)], 0.01).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.steps(), 100);
    }

    #[test]
    fn adam_rejects_nan_gradient() {
        let mut p = Tensor::row_vector(&[1.0, 2.0]);
        let mut adam = AdamState::new([&p]);
        let g = Tensor::row_vector(&[f64::NAN, 0.0]);
        assert!(matches!(
            adam.step(vec![&mut p], &[g], 0.01),
            Err(Error::Numeric(_))
        ));
        assert_eq!(p.data(), &[1.0, 2.0]);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn schedule_values() {
        let c = TrainConfig::default();
        assert_eq!(lr_schedule(&c, 0), 0.01);
        assert_eq!(lr_schedule(&c, 49), 0.01);
        assert_eq!(lr_schedule(&c, 50), 0.005);
        assert_eq!(lr_schedule(&c, 149), 0.0025);
        assert_eq!(lr_schedule(&c, 150), 0.00125);
    }
}
