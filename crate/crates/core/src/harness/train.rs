use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batches::{epoch_seed, make_batches, Batch};
use super::extract::extract_source;
use super::metrics::Metrics;
use super::{HarnessError, TrainConfig};
use crate::corpus::Label;
use crate::model::{
    adam_step, backward_into, forward, init_params, predict_label, AdamState, Checkpoint, Gradients, ModelError,
    ModelParams,
};
use crate::pathmine::{encode_bag, sample_seed, EncodedBag, MiningLimits, Vocabulary};

/// Samples per gradient chunk. Chunks are reduced in order, so results do
/// not depend on the worker count.
const CHUNK: usize = 32;

type NoRng = ChaCha8Rng;

/// One line of the per-epoch metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_precision: f64,
    pub val_recall: f64,
    pub val_f1: f64,
}

impl EpochRecord {
    fn new(epoch: usize, train_loss: f64, m: &Metrics) -> Self {
        Self {
            epoch,
            train_loss,
            val_accuracy: m.accuracy,
            val_precision: m.precision,
            val_recall: m.recall,
            val_f1: m.f1,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "epoch {:>3}  loss {:.6}  val acc {:.4}  prec {:.4}  rec {:.4}  f1 {:.4}",
            self.epoch, self.train_loss, self.val_accuracy, self.val_precision, self.val_recall, self.val_f1
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// 0 when no epoch ran and the initial parameters were kept.
    pub best_epoch: usize,
    pub best_metrics: Metrics,
    pub log: Vec<EpochRecord>,
}

/// Class probabilities for each bag, inference mode.
pub fn score_bags(params: &ModelParams, bags: &[EncodedBag]) -> Result<Vec<[f64; 2]>, ModelError> {
    bags.par_iter().map(|b| forward::<NoRng>(params, &b.contexts, None).map(|t| t.probs)).collect()
}

fn metrics_for(params: &ModelParams, bags: &[EncodedBag]) -> Result<Metrics, ModelError> {
    let probs = score_bags(params, bags)?;
    Ok(Metrics::from_predictions(bags.iter().zip(&probs).map(|(b, q)| (b.label, predict_label(q)))))
}

/// Confusion metrics of `checkpoint` on `bags`, which must have been
/// encoded with the vocabulary whose digest is `vocab_digest`.
pub fn evaluate(bags: &[EncodedBag], checkpoint: &Checkpoint, vocab_digest: &str) -> Result<Metrics, ModelError> {
    checkpoint.check_vocab(vocab_digest)?;
    metrics_for(&checkpoint.params, bags)
}

fn batch_gradients(
    params: &ModelParams,
    batch: &Batch,
    labels: &[Label],
    dropout: f64,
    seed: u64,
) -> Result<(Gradients, f64), ModelError> {
    let weight = 1.0 / batch.len() as f64;
    let rows: Vec<usize> = (0..batch.len()).collect();
    let partials: Vec<Result<(Gradients, f64), ModelError>> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = Gradients::zeros(params.dim);
            let mut loss = 0.0;
            for &row in chunk {
                let idx = batch.indices[row];
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, idx as u64));
                let dropout = (dropout > 0.0).then_some((dropout, &mut rng));
                let trace = forward(params, batch.row(row), dropout)?;
                loss += trace.loss(labels[idx]);
                backward_into(&trace, labels[idx], params, weight, &mut grads);
            }
            Ok((grads, loss))
        })
        .collect();
    let mut total = Gradients::zeros(params.dim);
    let mut loss = 0.0;
    for partial in partials {
        let (g, l) = partial?;
        total.add(&g);
        loss += l;
    }
    Ok((total, loss))
}

fn checkpoint_meta(config: &TrainConfig, epoch: usize, metrics: &Metrics) -> serde_json::Value {
    serde_json::json!({ "config": config, "epoch": epoch, "validation": metrics })
}

/// Trains for `config.epochs` epochs and keeps the parameters of the epoch
/// with the highest validation F1 (earliest epoch on ties).
pub fn train(
    train: &[EncodedBag],
    valid: &[EncodedBag],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    if train.is_empty() && config.epochs > 0 {
        return Err(HarnessError::EmptyTrainingSet);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Internal(e.to_string()))?;
    pool.install(|| train_inner(train, valid, vocab, config))
}

fn train_inner(
    train: &[EncodedBag],
    valid: &[EncodedBag],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainOutcome, HarnessError> {
    let digest = vocab.digest();
    let mut params = init_params(vocab.values.len(), vocab.paths.len(), config.embedding_size, config.seed);
    let mut adam = AdamState::new(&params, config.adam());
    let labels: Vec<Label> = train.iter().map(|b| b.label).collect();

    let initial = metrics_for(&params, valid)?;
    let mut best = TrainOutcome {
        checkpoint: Checkpoint {
            params: params.clone(),
            adam: adam.clone(),
            vocab_digest: digest.clone(),
            meta: checkpoint_meta(config, 0, &initial),
        },
        best_epoch: 0,
        best_metrics: initial,
        log: Vec::with_capacity(config.epochs),
    };

    for epoch in 1..=config.epochs {
        let seed = epoch_seed(config.seed, epoch);
        let mut loss_sum = 0.0;
        for batch in make_batches(train, config.batch_size, Some(seed)) {
            let (grads, loss) = batch_gradients(&params, &batch, &labels, config.dropout_rate, seed)?;
            loss_sum += loss;
            adam_step(&mut params, &grads, &mut adam);
        }
        let metrics = metrics_for(&params, valid)?;
        let record = EpochRecord::new(epoch, loss_sum / train.len() as f64, &metrics);
        log::info!("{}", record.to_text());
        if best.best_epoch == 0 || metrics.f1 > best.best_metrics.f1 {
            best.checkpoint = Checkpoint {
                params: params.clone(),
                adam: adam.clone(),
                vocab_digest: digest.clone(),
                meta: checkpoint_meta(config, epoch, &metrics),
            };
            best.best_epoch = epoch;
            best.best_metrics = metrics;
        }
        best.log.push(record);
    }
    Ok(best)
}

/// Outcome of scoring a single function.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Scored { label: Label, prob_vuln: f64 },
    Unscorable { category: String, reason: String },
}

/// Parses, mines and scores one function. Unparseable input and empty bags
/// come back as [`Prediction::Unscorable`].
pub fn predict(
    source: &str,
    checkpoint: &Checkpoint,
    vocab: &Vocabulary,
    limits: &MiningLimits,
) -> Result<Prediction, ModelError> {
    checkpoint.check_vocab(&vocab.digest())?;
    // The label is a placeholder; encoding ignores it for scoring.
    let bag = match extract_source(source, 0, Label::Safe, limits) {
        Ok(bag) => bag,
        Err(skip) => return Ok(Prediction::Unscorable { category: skip.category, reason: skip.reason }),
    };
    let encoded = encode_bag(&bag, vocab);
    let q = forward::<NoRng>(&checkpoint.params, &encoded.contexts, None)?.probs;
    Ok(Prediction::Scored { label: predict_label(&q), prob_vuln: q[Label::Vuln.index()] })
}
