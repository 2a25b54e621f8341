//! Mini-batch SGD, evaluation and finite-difference gradient checking.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{check_len, Error, Result};
use crate::fft::OpCounter;
use crate::network::{argmax, Network};
use crate::scalar::{Precision, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 5, batch_size: 32, seed: 0, precision: Precision::Double }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidValue(format!("learning rate {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidValue("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Accuracy on the evaluation set (or the training set when none was given).
    pub accuracy: f64,
    /// Training time of this epoch, excluding evaluation.
    pub wall_seconds: f64,
    pub real_mults: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub accuracy: f64,
    pub wall_seconds: f64,
    pub ops: OpCounter,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// Columns `epoch,loss,accuracy,wall_seconds,real_mults`, one row per epoch.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "loss", "accuracy", "wall_seconds", "real_mults"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.accuracy.to_string(),
                e.wall_seconds.to_string(),
                e.real_mults.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mini-batch SGD over shuffled samples.
///
/// Each step applies `θ ← θ − lr·mean(g)`, with the batch gradients summed
/// in sample-index order. Shuffling draws from `cfg.seed` only.
pub fn train<T: Scalar>(net: &mut Network<T>, data: &Dataset<T>, eval: Option<&Dataset<T>>, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidShape("empty training set".into()));
    }
    check_len(net.input_len(), data.sample_len())?;
    if data.classes() > net.classes() {
        return Err(Error::InvalidShape(format!("{} classes for {} logits", data.classes(), net.classes())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = T::of(cfg.learning_rate);
    let mut report = TrainReport { epochs: Vec::new(), accuracy: 0.0, wall_seconds: 0.0, ops: OpCounter::new() };
    let mut grad_sum = vec![T::zero(); net.param_count()];

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut ops = OpCounter::new();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut sorted = batch.to_vec();
            sorted.sort_unstable();
            grad_sum.fill(T::zero());
            for &i in &sorted {
                let g = net.gradients(data.sample(i), data.label(i), &mut ops)?;
                let loss = g.loss.widen();
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                loss_sum += loss;
                for (acc, v) in grad_sum.iter_mut().zip(&g.params) {
                    *acc += *v;
                }
            }
            let scale = T::one() / T::of(sorted.len() as f64);
            grad_sum.iter_mut().for_each(|g| *g *= scale);
            net.sgd_step(&grad_sum, lr)?;
        }
        let wall_seconds = start.elapsed().as_secs_f64();
        let accuracy = evaluate(net, eval.unwrap_or(data))?;
        report.wall_seconds += wall_seconds;
        report.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy,
            wall_seconds,
            real_mults: ops.real_mults,
        });
        report.ops += ops;
        report.accuracy = accuracy;
    }
    Ok(report)
}

/// Fraction of samples whose largest logit (first on ties) matches the label.
pub fn evaluate<T: Scalar>(net: &Network<T>, data: &Dataset<T>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidShape("empty evaluation set".into()));
    }
    check_len(net.input_len(), data.sample_len())?;
    let mut correct = 0usize;
    for i in 0..data.len() {
        if argmax(&net.forward(data.sample(i))?) == data.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Magnitude below which gradient comparisons fall back to absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradEntry>,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

/// Central differences `(L(θ+h) − L(θ−h)) / 2h` for every parameter,
/// compared with the analytic gradient.
pub fn grad_check(net: &Network<f64>, x: &[f64], label: usize, h: f64, tolerance: f64) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidValue(format!("step {h}")));
    }
    let analytic = net.gradients(x, label, &mut OpCounter::new())?.params;
    let mut probe = net.clone();
    let mut entries = Vec::with_capacity(analytic.len());
    for (index, &a) in analytic.iter().enumerate() {
        let original = net.parameter(index).expect("index within parameter count");
        probe.set_parameter(index, original + h)?;
        let up = probe.loss(x, label)?;
        probe.set_parameter(index, original - h)?;
        let down = probe.loss(x, label)?;
        probe.set_parameter(index, original)?;
        let numeric = (up - down) / (2.0 * h);
        entries.push(GradEntry { index, analytic: a, numeric, rel_error: relative_error(a, numeric) });
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    let max_abs_error = entries.iter().map(|e| (e.analytic - e.numeric).abs()).fold(0.0, f64::max);
    Ok(GradCheckReport { entries, max_rel_error, max_abs_error, passed: max_rel_error < tolerance })
}
