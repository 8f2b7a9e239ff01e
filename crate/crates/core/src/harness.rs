//! Training loop, evaluation, metric export and the four-way comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::{ActivationKind, TangmaParams};
use crate::autodiff::Graph;
use crate::data::{self, Dataset, SplitSpec, SyntheticShape};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::loss;
use crate::model::{Architecture, Model, ModelSpec};
use crate::optim::Adam;
use crate::tensor::Tensor;

/// Trace points used when the epoch is long enough for them.
pub const DEFAULT_TRACE_BATCHES: [usize; 2] = [130, 260];

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Kaggle-style CSV, optionally gzip-compressed.
    MnistCsv(PathBuf),
    /// Directory holding the CIFAR-10 binary batches.
    Cifar10Dir(PathBuf),
    /// Generated class-separable images.
    Synthetic { shape: SyntheticShape, samples: usize },
}

impl DataSource {
    pub fn architecture(&self) -> Architecture {
        match self {
            DataSource::MnistCsv(_)
            | DataSource::Synthetic {
                shape: SyntheticShape::MnistLike,
                ..
            } => Architecture::Mnist,
            DataSource::Cifar10Dir(_)
            | DataSource::Synthetic {
                shape: SyntheticShape::CifarLike,
                ..
            } => Architecture::Cifar10,
        }
    }

    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::MnistCsv(path) => data::load_mnist_csv(path),
            DataSource::Cifar10Dir(dir) => data::load_cifar10_binary(dir),
            DataSource::Synthetic { shape, samples } => {
                Ok(data::synthetic_dataset(*samples, data::NUM_CLASSES, seed, *shape))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub activation: ActivationKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    /// Where metrics.csv, params.csv and model.ckpt go, if anywhere.
    pub output_dir: Option<PathBuf>,
    /// 1-based batch indices at which Tangma's `(alpha, gamma)` is recorded.
    /// `None` means 130 and 260, or the midpoint and last batch when an
    /// epoch is shorter than 260 batches.
    pub trace_batches: Option<Vec<usize>>,
    /// Use only this many samples (drawn with the run seed) before splitting.
    pub subset: Option<usize>,
    pub per_site_tangma: bool,
}

impl RunConfig {
    pub fn new(data: DataSource, activation: ActivationKind) -> Self {
        Self {
            data,
            activation,
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.001,
            seed: 42,
            train_fraction: 0.8,
            output_dir: None,
            trace_batches: None,
            subset: None,
            per_site_tangma: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        SplitSpec::new(self.train_fraction, self.seed)?;
        if let Some(t) = &self.trace_batches {
            if t.contains(&0) {
                return Err(Error::Config("trace batch indices are 1-based".into()));
            }
            if t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "trace batch indices {t:?} must be strictly ascending"
                )));
            }
        }
        if self.subset == Some(0) {
            return Err(Error::Config("subset must be at least 1 sample".into()));
        }
        Ok(())
    }

    fn model_spec(&self, activation: ActivationKind) -> ModelSpec {
        let mut spec = ModelSpec::new(self.data.architecture(), activation).with_seed(self.seed);
        spec.per_site_tangma = self.per_site_tangma;
        spec
    }

    /// Loads, subsets and splits the configured data.
    pub fn load_split(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let mut d = self.data.load(self.seed)?;
        if let Some(n) = self.subset {
            d = d.subset(n, self.seed);
        }
        let (train, val) = data::split(&d, &SplitSpec::new(self.train_fraction, self.seed)?);
        if train.is_empty() || val.is_empty() {
            return Err(Error::Config(format!(
                "split of {} samples leaves {} train / {} validation",
                d.len(),
                train.len(),
                val.len()
            )));
        }
        Ok((train, val))
    }
}

/// Metrics of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the epoch's batch losses.
    pub train_loss: f64,
    pub val_loss: f64,
    /// Percent.
    pub val_accuracy: f64,
    /// Wall time of training plus validation, in seconds.
    pub epoch_time: f64,
}

/// Tangma's `(alpha, gamma)` right after the given batch's update.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTraceRecord {
    pub epoch: usize,
    /// 1-based index within the epoch.
    pub batch: usize,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub activation: ActivationKind,
    pub epochs: Vec<EpochRecord>,
    pub traces: Vec<ParamTraceRecord>,
    /// Every batch loss, per epoch.
    pub batch_losses: Vec<Vec<f64>>,
    pub model: Model<f32>,
}

impl RunOutput {
    pub fn last(&self) -> &EpochRecord {
        self.epochs.last().expect("a run has at least one epoch")
    }

    pub fn mean_epoch_time(&self) -> f64 {
        self.epochs.iter().map(|e| e.epoch_time).sum::<f64>() / self.epochs.len() as f64
    }
}

/// Anything that maps an image batch to `B×10` logits.
pub trait Classifier {
    fn logits(&self, images: &Tensor<f32>) -> Result<Tensor<f32>>;
}

impl Classifier for Model<f32> {
    fn logits(&self, images: &Tensor<f32>) -> Result<Tensor<f32>> {
        Model::logits(self, images)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Sample-weighted mean cross-entropy.
    pub loss: f64,
    /// Percent.
    pub accuracy: f64,
}

/// Eval-mode pass over every sample of `d`.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, d: &Dataset, batch_size: usize) -> Result<Evaluation> {
    if d.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let mut total_loss = 0.0;
    let mut hits = 0usize;
    for batch in data::batches(d, batch_size, false, 0, 0)? {
        let z = model.logits(&batch.images)?;
        let n = batch.labels.len();
        total_loss += loss::cross_entropy(&z, &batch.labels)? as f64 * n as f64;
        hits += loss::predict(&z)?
            .iter()
            .zip(&batch.labels)
            .filter(|(p, t)| p == t)
            .count();
    }
    Ok(Evaluation {
        loss: total_loss / d.len() as f64,
        accuracy: 100.0 * hits as f64 / d.len() as f64,
    })
}

/// Resolves the trace indices for an epoch of `num_batches`.
pub fn trace_points(configured: Option<&[usize]>, num_batches: usize) -> Vec<usize> {
    match configured {
        Some(t) => t.to_vec(),
        None if num_batches >= DEFAULT_TRACE_BATCHES[1] => DEFAULT_TRACE_BATCHES.to_vec(),
        None => {
            let mut t = vec![num_batches.div_ceil(2), num_batches];
            t.dedup();
            t.retain(|&b| b > 0);
            t
        }
    }
}

/// Loads the data and trains one model.
pub fn train_run(cfg: &RunConfig) -> Result<RunOutput> {
    let (train, val) = cfg.load_split()?;
    let out = train_on(cfg, cfg.activation, &train, &val)?;
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out)
}

/// Writes metrics.csv, params.csv (Tangma only) and model.ckpt into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    export_metrics(&out.epochs, &out.traces, dir)?;
    out.model.save(dir.join("model.ckpt"))
}

/// Trains on an already split dataset. Every batch runs zero-grad, a
/// train-mode forward, the loss, backward and one Adam step; each epoch
/// ends with an eval-mode validation pass.
pub fn train_on(cfg: &RunConfig, activation: ActivationKind, train: &Dataset, val: &Dataset) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg.model_spec(activation);
    let input = spec.architecture.input_shape();
    if train.sample_shape() != input || val.sample_shape() != input {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: train.sample_shape().to_vec(),
            right: input.to_vec(),
        });
    }
    let mut model = Model::<f32>::new(spec)?;
    let mut adam = Adam::new(cfg.learning_rate);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let num_batches = train.len().div_ceil(cfg.batch_size);
    let mut trace = trace_points(cfg.trace_batches.as_deref(), num_batches);
    if activation == ActivationKind::Tangma {
        for &b in trace.iter().filter(|&&b| b > num_batches) {
            log::warn!("trace batch {b} skipped: an epoch has only {num_batches} batches");
        }
    }
    trace.retain(|&b| b <= num_batches);

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut traces = Vec::new();
    let mut batch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut losses = Vec::with_capacity(num_batches);
        for (i, batch) in data::batches(train, cfg.batch_size, true, cfg.seed, epoch)?.enumerate() {
            let index = i + 1;
            model.params_mut().zero_grads();
            let mut g = Graph::new();
            let x = g.input(batch.images);
            let z = model.forward(&mut g, x, Mode::Train, &mut dropout_rng)?;
            let l = g.cross_entropy(z, &batch.labels)?;
            let value = g.value(l).item()? as f64;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: index,
                    loss: value,
                });
            }
            g.backward(l, model.params_mut())?;
            adam.step(model.params_mut())?;
            losses.push(value);

            if trace.contains(&index) {
                if let Some(TangmaParams { alpha, gamma }) = model.tangma_params().first().copied() {
                    traces.push(ParamTraceRecord {
                        epoch,
                        batch: index,
                        alpha: alpha as f64,
                        gamma: gamma as f64,
                    });
                }
            }
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        let v = evaluate(&model, val, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss: v.loss,
            val_accuracy: v.accuracy,
            epoch_time: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "{activation} epoch {epoch}: train loss {:.4}, val loss {:.4}, val acc {:.2}%, {:.1}s",
            record.train_loss,
            record.val_loss,
            record.val_accuracy,
            record.epoch_time
        );
        epochs.push(record);
        batch_losses.push(losses);
    }
    Ok(RunOutput {
        activation,
        epochs,
        traces,
        batch_losses,
        model,
    })
}

/// `metrics.csv` contents.
pub fn metrics_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_accuracy,epoch_time_s\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{:.4}",
            r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.epoch_time
        );
    }
    s
}

/// `params.csv` contents.
pub fn params_csv(traces: &[ParamTraceRecord]) -> String {
    let mut s = String::from("epoch,batch,alpha,gamma\n");
    for t in traces {
        let _ = writeln!(s, "{},{},{:.4},{:.4}", t.epoch, t.batch, t.alpha, t.gamma);
    }
    s
}

/// Writes `metrics.csv`, and `params.csv` when there are traces. A stale
/// `params.csv` from an earlier run is removed otherwise.
pub fn export_metrics(records: &[EpochRecord], traces: &[ParamTraceRecord], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics = dir.join("metrics.csv");
    fs::write(&metrics, metrics_csv(records)).map_err(|e| Error::io(&metrics, e))?;
    let params = dir.join("params.csv");
    if traces.is_empty() {
        if params.exists() {
            fs::remove_file(&params).map_err(|e| Error::io(&params, e))?;
        }
    } else {
        fs::write(&params, params_csv(traces)).map_err(|e| Error::io(&params, e))?;
    }
    Ok(())
}

/// Trains every activation in turn on one shared split. With an output
/// directory, each run's files go to a subdirectory named after it.
pub fn compare(cfg: &RunConfig, activations: &[ActivationKind]) -> Result<Vec<RunOutput>> {
    let (train, val) = cfg.load_split()?;
    let mut runs = Vec::with_capacity(activations.len());
    for &act in activations {
        let out = train_on(cfg, act, &train, &val)?;
        if let Some(dir) = &cfg.output_dir {
            write_outputs(&out, &dir.join(act.name()))?;
        }
        runs.push(out);
    }
    Ok(runs)
}

/// Final-epoch summary across runs.
pub fn summary_table(runs: &[RunOutput]) -> String {
    let mut s = format!(
        "{:<10} {:>24} {:>15} {:>17} {:>19}\n",
        "Activation", "Final Val Accuracy (%)", "Final Val Loss", "Final Train Loss", "Avg Epoch Time (s)"
    );
    for r in runs {
        let last = r.last();
        let _ = writeln!(
            s,
            "{:<10} {:>24.2} {:>15.4} {:>17.4} {:>19.2}",
            r.activation.label(),
            last.val_accuracy,
            last.val_loss,
            last.train_loss,
            r.mean_epoch_time()
        );
    }
    s
}

/// Writes the summary table as CSV.
pub fn summary_csv(runs: &[RunOutput]) -> String {
    let mut s = String::from("activation,final_val_accuracy,final_val_loss,final_train_loss,avg_epoch_time_s\n");
    for r in runs {
        let last = r.last();
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{:.4}",
            r.activation.name(),
            last.val_accuracy,
            last.val_loss,
            last.train_loss,
            r.mean_epoch_time()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: usize) -> EpochRecord {
        EpochRecord {
            epoch,
            train_loss: 0.123456,
            val_loss: 0.0363,
            val_accuracy: 99.09,
            epoch_time: 3.45,
        }
    }

    #[test]
    fn trace_point_defaults() {
        assert_eq!(trace_points(None, 750), vec![130, 260]);
        assert_eq!(trace_points(None, 260), vec![130, 260]);
        assert_eq!(trace_points(None, 125), vec![63, 125]);
        assert_eq!(trace_points(None, 1), vec![1]);
        assert_eq!(trace_points(Some(&[5]), 750), vec![5]);
    }

    #[test]
    fn config_validation() {
        let base = RunConfig::new(
            DataSource::Synthetic {
                shape: SyntheticShape::MnistLike,
                samples: 10,
            },
            ActivationKind::Relu,
        );
        assert!(base.validate().is_ok());
        for bad in [
            RunConfig {
                epochs: 0,
                ..base.clone()
            },
            RunConfig {
                batch_size: 0,
                ..base.clone()
            },
            RunConfig {
                learning_rate: f64::NAN,
                ..base.clone()
            },
            RunConfig {
                train_fraction: 1.5,
                ..base.clone()
            },
            RunConfig {
                trace_batches: Some(vec![260, 130]),
                ..base.clone()
            },
            RunConfig {
                trace_batches: Some(vec![0, 1]),
                ..base.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn metrics_csv_format() {
        let records: Vec<EpochRecord> = (1..=10).map(record).collect();
        let csv = metrics_csv(&records);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "epoch,train_loss,val_loss,val_accuracy,epoch_time_s");
        assert_eq!(lines[1], "1,0.1235,0.0363,99.0900,3.4500");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn params_csv_format() {
        let traces: Vec<ParamTraceRecord> = (1..=10)
            .flat_map(|e| {
                [130, 260].map(|b| ParamTraceRecord {
                    epoch: e,
                    batch: b,
                    alpha: 0.2805,
                    gamma: 0.1336,
                })
            })
            .collect();
        let csv = params_csv(&traces);
        assert_eq!(csv.lines().count(), 21);
        assert_eq!(csv.lines().nth(1).unwrap(), "1,130,0.2805,0.1336");
    }

    #[test]
    fn export_skips_params_without_traces() {
        let dir = tempfile::tempdir().unwrap();
        let trace = ParamTraceRecord {
            epoch: 1,
            batch: 1,
            alpha: 0.0,
            gamma: 0.0,
        };
        export_metrics(&[record(1)], &[trace], dir.path()).unwrap();
        assert!(dir.path().join("params.csv").exists());
        export_metrics(&[record(1)], &[], dir.path()).unwrap();
        assert!(dir.path().join("metrics.csv").exists());
        assert!(!dir.path().join("params.csv").exists());
    }

    struct Fixed(Vec<f32>);

    impl Classifier for Fixed {
        fn logits(&self, images: &Tensor<f32>) -> Result<Tensor<f32>> {
            let b = images.shape()[0];
            Tensor::new([b, 10], self.0.iter().copied().cycle().take(b * 10).collect())
        }
    }

    struct Oracle<'a>(&'a Dataset);

    impl Classifier for Oracle<'_> {
        // looks the label up by matching pixels, then puts a large logit on it
        fn logits(&self, images: &Tensor<f32>) -> Result<Tensor<f32>> {
            let len: usize = images.shape()[1..].iter().product();
            let all = self.0.images().data();
            let mut out = vec![0.0; images.shape()[0] * 10];
            for (i, img) in images.data().chunks_exact(len).enumerate() {
                let j = all.chunks_exact(len).position(|c| c == img).unwrap();
                out[i * 10 + self.0.labels()[j]] = 50.0;
            }
            Tensor::new([images.shape()[0], 10], out)
        }
    }

    #[test]
    fn evaluate_oracles() {
        let d = data::synthetic_dataset(37, 10, 4, SyntheticShape::MnistLike);
        let e = evaluate(&Oracle(&d), &d, 8).unwrap();
        assert_eq!(e.accuracy, 100.0);
        assert!(e.loss < 1e-10);

        let u = evaluate(&Fixed(vec![0.0; 10]), &d, 8).unwrap();
        assert!((u.loss - 10f64.ln()).abs() < 1e-6);
        assert!((0.0..=100.0).contains(&u.accuracy));
    }

    #[test]
    fn evaluate_is_batching_invariant() {
        let d = data::synthetic_dataset(53, 10, 6, SyntheticShape::MnistLike);
        let logits: Vec<f32> = (0..10).map(|i| (i as f32 * 0.37).sin()).collect();
        let model = Fixed(logits);
        let one = evaluate(&model, &d, 53).unwrap();
        for b in [1, 7, 16, 100] {
            let many = evaluate(&model, &d, b).unwrap();
            assert_eq!(many.accuracy, one.accuracy);
            assert!((many.loss - one.loss).abs() < 1e-6);
        }
    }

    #[test]
    fn summary_lists_every_run() {
        let model = Model::<f32>::new(ModelSpec::new(Architecture::Mnist, ActivationKind::Relu)).unwrap();
        let run = RunOutput {
            activation: ActivationKind::Gelu,
            epochs: vec![record(1), record(2)],
            traces: vec![],
            batch_losses: vec![],
            model,
        };
        let t = summary_table(std::slice::from_ref(&run));
        assert!(t.contains("GELU"));
        assert!(t.contains("99.09"));
        assert_eq!(summary_csv(&[run]).lines().count(), 2);
    }
}
