//! Mini-batch training with Adam and a full evaluation pass after every epoch.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{backward, build, forward, predict, ArchSpec, ModelParams};
use crate::tensor::{AdamConfig, AdamState, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.adam;
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate {lr} must be finite and >= 0"
            )));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config(format!(
                "adam betas ({beta1}, {beta2}) must lie in [0, 1)"
            )));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Config(format!("adam eps {eps} must be positive")));
        }
        Ok(())
    }
}

/// Metrics recorded after one epoch. Validation fields are `None` when the
/// validation set is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

impl EpochRecord {
    /// The progress line printed during training.
    pub fn progress_line(&self, epochs: usize) -> String {
        let val = self
            .val_accuracy
            .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
        format!(
            "epoch {}/{} train_loss={:.6} val_acc={}",
            self.epoch, epochs, self.train_loss, val
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalPass {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Fails with a configuration error if `data` cannot be fed to a model of `spec`.
pub fn check_compatible(spec: &ArchSpec, data: &Dataset) -> Result<()> {
    if data.max_len != spec.max_len {
        return Err(Error::Config(format!(
            "max_len mismatch: data has {}, model expects {}",
            data.max_len, spec.max_len
        )));
    }
    if data.num_classes != spec.num_classes {
        return Err(Error::Config(format!(
            "class count mismatch: data has {}, model expects {}",
            data.num_classes, spec.num_classes
        )));
    }
    data.validate(Some(spec.num_ids()))
}

/// Mean cross-entropy, accuracy and predicted classes over `data`.
pub fn evaluate_pass(params: &ModelParams, spec: &ArchSpec, data: &Dataset) -> Result<EvalPass> {
    if data.is_empty() {
        return Err(Error::Argument("cannot evaluate an empty data set".into()));
    }
    check_compatible(spec, data)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(data.len());
    for ex in &data.examples {
        let (class, probs) = predict(params, spec, &ex.ids)?;
        loss -= probs[ex.label].max(1e-12).ln();
        correct += usize::from(class == ex.label);
        predictions.push(class);
    }
    let n = data.len() as f64;
    Ok(EvalPass {
        loss: loss / n,
        accuracy: correct as f64 / n,
        predictions,
    })
}

/// Trains `params` and returns them with one record per epoch. Shuffling
/// draws from `cfg.seed`.
///
/// Each batch gradient is the mean of per-example gradients, summed in batch
/// order. `on_epoch` sees every record as soon as it is computed.
pub fn train<F>(
    params: ModelParams,
    spec: &ArchSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    on_epoch: F,
) -> Result<(ModelParams, Vec<EpochRecord>)>
where
    F: FnMut(&EpochRecord),
{
    train_with_rng(params, spec, train_set, val_set, cfg, &mut Rng::new(cfg.seed), on_epoch)
}

/// Builds a model and trains it. Initialization and shuffling draw from one
/// stream seeded with `cfg.seed`.
pub fn fit<F>(
    spec: &ArchSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    on_epoch: F,
) -> Result<(ModelParams, Vec<EpochRecord>)>
where
    F: FnMut(&EpochRecord),
{
    let mut rng = Rng::new(cfg.seed);
    let params = build(spec, &mut rng)?;
    train_with_rng(params, spec, train_set, val_set, cfg, &mut rng, on_epoch)
}

fn train_with_rng<F>(
    mut params: ModelParams,
    spec: &ArchSpec,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    rng: &mut Rng,
    mut on_epoch: F,
) -> Result<(ModelParams, Vec<EpochRecord>)>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    spec.validate()?;
    params.check_shapes(spec)?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    check_compatible(spec, train_set)?;
    check_compatible(spec, val_set)?;

    let mut adam = AdamState::new(params.param_count(), cfg.adam);
    let mut grad = ModelParams::zeros(spec);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle_each_epoch {
            rng.shuffle(&mut order);
        }
        for batch in order.chunks(cfg.batch_size) {
            for t in grad.tensors_mut() {
                t.fill(0.0);
            }
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &train_set.examples[i];
                let onehot = ex.onehot(spec.num_classes);
                let (probs, cache) = forward(&params, spec, &ex.ids)?;
                backward(&params, spec, &cache, &probs, &onehot)?
                    .accumulate_into(&mut grad, scale)?;
            }
            let grads: Vec<_> = grad
                .tensors()
                .into_iter()
                .map(|(_, g)| g.as_slice())
                .collect();
            adam.step_segments(
                params
                    .tensors_mut()
                    .into_iter()
                    .map(|p| p.as_mut_slice())
                    .zip(grads),
            )?;
        }

        let on_train = evaluate_pass(&params, spec, train_set)?;
        let on_val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate_pass(&params, spec, val_set)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss: on_train.loss,
            train_accuracy: on_train.accuracy,
            val_loss: on_val.as_ref().map(|v| v.loss),
            val_accuracy: on_val.as_ref().map(|v| v.accuracy),
        };
        on_epoch(&record);
        records.push(record);
    }
    Ok((params, records))
}

/// Curves CSV: `epoch,train_loss,train_acc,val_loss,val_acc`, six decimals.
/// Missing validation values are left empty.
pub fn write_curves_to<W: Write>(records: &[EpochRecord], mut out: W) -> Result<()> {
    writeln!(out, "epoch,train_loss,train_acc,val_loss,val_acc")?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for r in records {
        writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            opt(r.val_loss),
            opt(r.val_accuracy)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_curves(records: &[EpochRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_curves_to(records, std::io::BufWriter::new(file))
}
