use alloc::vec;
use alloc::vec::Vec;

use super::network::{AdamConfig, Network, Workspace};
use super::scalar::Scalar;
use crate::dataset::{Dataset, SplitKind, CHANNELS};
use crate::error::{invalid, Error, Result};
use crate::numerics::Rng;

/// Records per forward pass when only predicting.
pub const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Seeds the per-epoch shuffles (stream 1); initialisation uses stream 0.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 32, epochs: 100, adam: AdamConfig::default(), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid!("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid!("epochs must be at least 1"));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite())
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || a.epsilon <= 0.0
        {
            return Err(invalid!("bad Adam hyperparameters {a:?}"));
        }
        Ok(())
    }

    /// Generator for the network's initial weights.
    pub fn init_rng(&self) -> Rng {
        Rng::stream(self.seed, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean squared error over the epoch's training minibatches.
    pub train_loss: f64,
    /// Mean squared error over the full validation split after the epoch.
    pub val_loss: f64,
    /// Seconds since training started; only measured with the `std` feature.
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Copies records into a `[channel][batch][position]` buffer.
pub fn gather_batch<T: Scalar>(dataset: &Dataset, records: &[usize], out: &mut [T]) {
    let n = dataset.meta.n;
    let b = records.len();
    for (slot, &r) in records.iter().enumerate() {
        let f = dataset.record(r).features;
        for c in 0..CHANNELS {
            let dst = &mut out[(c * b + slot) * n..(c * b + slot + 1) * n];
            for (d, &s) in dst.iter_mut().zip(&f[c * n..(c + 1) * n]) {
                *d = T::of(s as f64);
            }
        }
    }
}

fn check_shape<T: Scalar>(net: &Network<T>, dataset: &Dataset) -> Result<()> {
    let spec = net.spec();
    if spec.input_channels != CHANNELS || spec.input_len != dataset.meta.n {
        return Err(invalid!(
            "network expects {}x{} inputs but records are {CHANNELS}x{}",
            spec.input_channels,
            spec.input_len,
            dataset.meta.n
        ));
    }
    Ok(())
}

/// Trains `network` in place with minibatch Adam.
///
/// Each epoch reshuffles the training records, walks them in batches of
/// `batch_size` (the last batch may be smaller) and then measures the loss on
/// the whole validation split.
pub fn train<T: Scalar>(
    network: &mut Network<T>,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<History> {
    train_with(network, dataset, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<T: Scalar>(
    network: &mut Network<T>,
    dataset: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History> {
    config.validate()?;
    check_shape(network, dataset)?;
    let mut order = dataset.split_records(SplitKind::Train)?;
    let val = dataset.split_records(SplitKind::Val)?;
    if order.is_empty() || val.is_empty() {
        return Err(invalid!("training needs non-empty train and validation splits"));
    }
    #[cfg(feature = "std")]
    let start = std::time::Instant::now();

    let mut rng = Rng::stream(config.seed, 1);
    let mut ws = network.workspace();
    let mut grad = vec![T::zero(); network.param_count()];
    let mut targets: Vec<T> = Vec::with_capacity(config.batch_size);
    let mut dout: Vec<T> = Vec::with_capacity(config.batch_size);
    let width = network.input_width();
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        let mut sq_sum = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let b = chunk.len();
            gather_batch(dataset, chunk, ws.input_mut(b, width));
            network.forward_workspace(&mut ws)?;
            targets.clear();
            targets.extend(chunk.iter().map(|&r| T::of(dataset.targets()[r] as f64)));
            let preds = ws.predictions();
            let scale = T::of(2.0 / b as f64);
            let mut batch_sq = 0.0;
            dout.clear();
            for (&p, &t) in preds.iter().zip(&targets) {
                let d = p - t;
                batch_sq += d.f64() * d.f64();
                dout.push(d * scale);
            }
            if !batch_sq.is_finite() {
                return Err(Error::DivergedTraining { epoch, batch: bi + 1 });
            }
            sq_sum += batch_sq;
            network.backward(&mut ws, &dout, &mut grad, false)?;
            network.adam_step(&grad, &config.adam)?;
        }
        let val_loss = mse_of(&predict_with(network, &mut ws, dataset, &val)?, dataset, &val);
        if !val_loss.is_finite() {
            return Err(Error::DivergedTraining { epoch, batch: 0 });
        }
        #[cfg(feature = "std")]
        let wall_time = Some(start.elapsed().as_secs_f64());
        #[cfg(not(feature = "std"))]
        let wall_time = None;
        let rec = EpochRecord { epoch, train_loss: sq_sum / order.len() as f64, val_loss, wall_time };
        on_epoch(&rec);
        history.epochs.push(rec);
    }
    Ok(history)
}

fn mse_of(preds: &[f64], dataset: &Dataset, records: &[usize]) -> f64 {
    let t = dataset.targets();
    let s: f64 = preds.iter().zip(records).map(|(p, &r)| {
            let d = p - t[r] as f64;
            d * d
        }).sum();
    s / records.len() as f64
}

fn predict_with<T: Scalar>(
    network: &Network<T>,
    ws: &mut Workspace<T>,
    dataset: &Dataset,
    records: &[usize],
) -> Result<Vec<f64>> {
    let width = network.input_width();
    let mut out = Vec::with_capacity(records.len());
    for chunk in records.chunks(EVAL_CHUNK) {
        gather_batch(dataset, chunk, ws.input_mut(chunk.len(), width));
        network.forward_workspace(ws)?;
        out.extend(ws.predictions().iter().map(|p| p.f64()));
    }
    Ok(out)
}

/// Predictions for the given records, evaluated in fixed chunks of
/// [`EVAL_CHUNK`] (in parallel with the `parallel` feature; the result does
/// not depend on the thread count).
pub fn predict<T: Scalar>(network: &Network<T>, dataset: &Dataset, records: &[usize]) -> Result<Vec<f64>> {
    check_shape(network, dataset)?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let parts = records
            .par_chunks(EVAL_CHUNK)
            .map(|c| predict_with(network, &mut network.workspace(), dataset, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.concat())
    }
    #[cfg(not(feature = "parallel"))]
    predict_with(network, &mut network.workspace(), dataset, records)
}

/// Error summary of predictions against record targets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RmseReport {
    /// RMSE over all records.
    pub overall: f64,
    /// RMSE per time index, pooled over samples (and β); `NaN` for time
    /// indices with no records.
    pub per_time_bin: Vec<f64>,
    /// Mean of the per-time-bin RMSEs.
    pub time_averaged: f64,
    /// Mean prediction per time index.
    pub mean_prediction: Vec<f64>,
    /// Mean target per time index.
    pub mean_target: Vec<f64>,
}

/// RMSE of `predictions[i]` against record `records[i]`.
pub fn rmse_report(dataset: &Dataset, records: &[usize], predictions: &[f64]) -> Result<RmseReport> {
    if records.is_empty() {
        return Err(invalid!("cannot evaluate an empty split"));
    }
    if records.len() != predictions.len() {
        return Err(invalid!("{} records but {} predictions", records.len(), predictions.len()));
    }
    let t = dataset.meta.t.max(1);
    let mut sq = vec![0.0; t];
    let mut count = vec![0usize; t];
    let mut psum = vec![0.0; t];
    let mut tsum = vec![0.0; t];
    let mut total = 0.0;
    for (&r, &p) in records.iter().zip(predictions) {
        let rec = dataset.record(r);
        let k = rec.time_index as usize;
        let d = p - rec.target as f64;
        sq[k] += d * d;
        total += d * d;
        count[k] += 1;
        psum[k] += p;
        tsum[k] += rec.target as f64;
    }
    let per = |v: &[f64], f: fn(f64) -> f64| -> Vec<f64> {
        v.iter().zip(&count).map(|(s, &c)| if c == 0 { f64::NAN } else { f(s / c as f64) }).collect()
    };
    let per_time_bin = per(&sq, libm::sqrt);
    let filled: Vec<f64> = per_time_bin.iter().copied().filter(|x| !x.is_nan()).collect();
    Ok(RmseReport {
        overall: libm::sqrt(total / records.len() as f64),
        time_averaged: filled.iter().sum::<f64>() / filled.len() as f64,
        per_time_bin,
        mean_prediction: per(&psum, |x| x),
        mean_target: per(&tsum, |x| x),
    })
}

/// Test-style evaluation of `network` on one split.
pub fn evaluate_rmse<T: Scalar>(
    network: &Network<T>,
    dataset: &Dataset,
    split: SplitKind,
) -> Result<RmseReport> {
    let records = dataset.split_records(split)?;
    if records.is_empty() {
        return Err(invalid!("split {split:?} is empty"));
    }
    let preds = predict(network, dataset, &records)?;
    rmse_report(dataset, &records, &preds)
}

/// Mean of the training targets.
pub fn train_target_mean(dataset: &Dataset) -> Result<f64> {
    let train = dataset.split_records(SplitKind::Train)?;
    if train.is_empty() {
        return Err(invalid!("training split is empty"));
    }
    Ok(train.iter().map(|&r| dataset.targets()[r] as f64).sum::<f64>() / train.len() as f64)
}

/// RMSE of the constant predictor that always outputs the training-target
/// mean.
pub fn baseline_rmse(dataset: &Dataset, split: SplitKind) -> Result<RmseReport> {
    let mean = train_target_mean(dataset)?;
    let records = dataset.split_records(split)?;
    rmse_report(dataset, &records, &vec![mean; records.len()])
}
