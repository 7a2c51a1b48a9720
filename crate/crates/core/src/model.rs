//! Trainable span extractor used as the reference model.
//!
//! The model is a bag-of-embeddings pointer scorer: the query tokens
//! (attribute, values and knowledge token) are mean-pooled, passed through a
//! `tanh` projection into a query summary `q`, and every title position is
//! scored by `q . (head * embed(token))` with separate start and end heads.
//! Position 0 is scored from the `[CLS]` embedding and predicting `(0, 0)`
//! means NULL. Any stronger encoder can replace it behind [`SpanExtractor`];
//! the input construction is what carries the method.

use crate::error::{Error, Result};
use crate::knowledge::{DropoutConfig, KnowledgeBase};
use crate::querybuild::{make_mixed_batch, BatchSpec, Budgets, EncodedInput, Role, Variant};
use crate::rng::{self, SplitMix64};
use crate::scalar::Scalar;
use crate::spanlabel::LabeledExample;
use crate::tokenize::{Vocabulary, PAD_ID, SEEN_ID, UNK_ID, UNSEEN_ID};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Interface every span extractor implements: one training pass over a set
/// of prepared batches, and deterministic prediction of `(begin, end)`.
pub trait SpanExtractor {
    fn train(&mut self, batches: &[Vec<EncodedInput>]) -> Result<f64>;
    fn predict(&self, input: &EncodedInput) -> (usize, usize);
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 32,
            seed: 0,
            dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".to_string()));
        }
        if self.dim < 2 {
            return Err(Error::Config("embedding dimension must be at least 2".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".to_string()));
        }
        Ok(())
    }
}

/// Flat gradient buffer matching the parameter layout.
struct Grads<F> {
    embed: Vec<F>,
    touched: Vec<u32>,
    query_w: Vec<F>,
    start_head: Vec<F>,
    end_head: Vec<F>,
}

impl<F: Scalar> Grads<F> {
    fn new(vocab_size: usize, dim: usize) -> Self {
        Self {
            embed: vec![F::zero(); vocab_size * dim],
            touched: Vec::new(),
            query_w: vec![F::zero(); dim * dim],
            start_head: vec![F::zero(); dim],
            end_head: vec![F::zero(); dim],
        }
    }

    fn clear(&mut self, dim: usize) {
        for &t in &self.touched {
            let base = t as usize * dim;
            for v in &mut self.embed[base..base + dim] {
                *v = F::zero();
            }
        }
        self.touched.clear();
        self.query_w.iter_mut().for_each(|v| *v = F::zero());
        self.start_head.iter_mut().for_each(|v| *v = F::zero());
        self.end_head.iter_mut().for_each(|v| *v = F::zero());
    }
}

/// Pointer model parameters plus AdaGrad state. Generic over the scalar
/// type; `f64` is the pipeline default.
pub struct PointerModel<F: Scalar> {
    dim: usize,
    vocab_size: usize,
    /// Embedding table, row-major `vocab_size x dim`.
    embed: Vec<F>,
    /// Query projection, row-major `dim x dim`: `z_j = sum_k w[j,k] m_k`.
    query_w: Vec<F>,
    start_head: Vec<F>,
    end_head: Vec<F>,
    learning_rate: F,
    acc_embed: Vec<F>,
    acc_w: Vec<F>,
    acc_start: Vec<F>,
    acc_end: Vec<F>,
    scratch: Grads<F>,
}

const ADAGRAD_EPS: f64 = 1e-8;
const INIT_RANGE: f64 = 0.1;

impl<F: Scalar> PointerModel<F> {
    /// Fresh model with parameters uniform in `[-0.1, 0.1]` from the seed.
    pub fn new(vocab_size: usize, dim: usize, learning_rate: f64, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut init = |n: usize| -> Vec<F> {
            (0..n)
                .map(|_| F::cast((rng.next_f64() * 2.0 - 1.0) * INIT_RANGE))
                .collect()
        };
        let embed = init(vocab_size * dim);
        let query_w = init(dim * dim);
        let start_head = init(dim);
        let end_head = init(dim);
        Self {
            dim,
            vocab_size,
            embed,
            query_w,
            start_head,
            end_head,
            learning_rate: F::cast(learning_rate),
            acc_embed: vec![F::zero(); vocab_size * dim],
            acc_w: vec![F::zero(); dim * dim],
            acc_start: vec![F::zero(); dim],
            acc_end: vec![F::zero(); dim],
            scratch: Grads::new(vocab_size, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn embed_row(&self, id: u32) -> &[F] {
        let id = if (id as usize) < self.vocab_size { id } else { UNK_ID };
        let base = id as usize * self.dim;
        &self.embed[base..base + self.dim]
    }

    fn safe_id(&self, id: u32) -> u32 {
        if (id as usize) < self.vocab_size {
            id
        } else {
            UNK_ID
        }
    }

    /// Positions scored by the pointer heads: `[CLS]` then the title tokens.
    fn position_ids(input: &EncodedInput) -> impl Iterator<Item = u32> + '_ {
        std::iter::once(input.ids[0]).chain(input.title_ids().iter().copied())
    }

    /// Query tokens pooled into the summary: attribute and value roles plus
    /// the knowledge token; `[PAD]` contributes nothing.
    fn query_ids(input: &EncodedInput) -> impl Iterator<Item = u32> + '_ {
        input
            .ids
            .iter()
            .zip(&input.roles)
            .filter(|(&id, &role)| {
                id != PAD_ID
                    && (role == Role::Attr
                        || role == Role::Value
                        || id == SEEN_ID
                        || id == UNSEEN_ID)
            })
            .map(|(&id, _)| id)
    }

    fn query_summary(&self, input: &EncodedInput) -> (Vec<F>, Vec<F>, usize) {
        let d = self.dim;
        let mut mean = vec![F::zero(); d];
        let mut count = 0usize;
        for id in Self::query_ids(input) {
            let row = self.embed_row(id);
            for k in 0..d {
                mean[k] += row[k];
            }
            count += 1;
        }
        if count > 0 {
            let inv = F::cast(1.0 / count as f64);
            for v in &mut mean {
                *v *= inv;
            }
        }
        let mut q = vec![F::zero(); d];
        for j in 0..d {
            let mut z = F::zero();
            let row = &self.query_w[j * d..(j + 1) * d];
            for k in 0..d {
                z += row[k] * mean[k];
            }
            q[j] = z.tanh();
        }
        (q, mean, count)
    }

    /// Start and end logits over positions `0..=n` for a title of `n`
    /// tokens.
    pub fn forward(&self, input: &EncodedInput) -> (Vec<F>, Vec<F>) {
        let d = self.dim;
        let (q, _, _) = self.query_summary(input);
        let mut qa = vec![F::zero(); d];
        let mut qb = vec![F::zero(); d];
        for k in 0..d {
            qa[k] = q[k] * self.start_head[k];
            qb[k] = q[k] * self.end_head[k];
        }
        let n = input.title_len;
        let mut start = Vec::with_capacity(n + 1);
        let mut end = Vec::with_capacity(n + 1);
        for id in Self::position_ids(input) {
            let row = self.embed_row(id);
            let mut s = F::zero();
            let mut t = F::zero();
            for k in 0..d {
                s += qa[k] * row[k];
                t += qb[k] * row[k];
            }
            start.push(s);
            end.push(t);
        }
        (start, end)
    }

    /// Joint argmax over valid pairs `begin <= end`; ties resolve to the
    /// smallest begin, then the smallest end. `(0, 0)` means NULL.
    pub fn predict_span(&self, input: &EncodedInput) -> (usize, usize) {
        let (start, end) = self.forward(input);
        let mut best = (0usize, 0usize);
        let mut best_score = F::neg_infinity();
        for b in 0..start.len() {
            for e in b..end.len() {
                let score = start[b] + end[e];
                if score > best_score {
                    best_score = score;
                    best = (b, e);
                }
            }
        }
        best
    }

    /// Accumulates the loss and gradients of one input into `grads`,
    /// pre-scaled by `scale` (the batch-mean factor).
    fn accumulate(&self, input: &EncodedInput, scale: f64, grads: &mut Grads<F>) -> f64 {
        let d = self.dim;
        let scale = F::cast(scale);
        let (q, mean, count) = self.query_summary(input);
        let (start, end) = self.forward(input);

        let (start_probs, loss_s) = softmax_and_nll(&start, input.gold_begin);
        let (end_probs, loss_e) = softmax_and_nll(&end, input.gold_end);

        // d(loss)/d(logit) for both heads.
        let mut ds = start_probs;
        ds[input.gold_begin] = ds[input.gold_begin] - F::one();
        let mut dt = end_probs;
        dt[input.gold_end] = dt[input.gold_end] - F::one();

        // Sa_k = sum_i ds_i * E[p_i, k]; Sb analogous.
        let mut sa = vec![F::zero(); d];
        let mut sb = vec![F::zero(); d];
        for (i, id) in Self::position_ids(input).enumerate() {
            let row = self.embed_row(id);
            for k in 0..d {
                sa[k] += ds[i] * row[k];
                sb[k] += dt[i] * row[k];
            }
        }

        // Head and query-summary gradients.
        let mut dq = vec![F::zero(); d];
        for k in 0..d {
            grads.start_head[k] += scale * q[k] * sa[k];
            grads.end_head[k] += scale * q[k] * sb[k];
            dq[k] = scale * (self.start_head[k] * sa[k] + self.end_head[k] * sb[k]);
        }

        // Position-token embedding gradients.
        for (i, id) in Self::position_ids(input).enumerate() {
            let id = self.safe_id(id);
            grads.touched.push(id);
            let base = id as usize * d;
            for k in 0..d {
                grads.embed[base + k] += scale * q[k] * (ds[i] * self.start_head[k] + dt[i] * self.end_head[k]);
            }
        }

        // Back through tanh and the projection.
        let mut dm = vec![F::zero(); d];
        for j in 0..d {
            let dz = dq[j] * (F::one() - q[j] * q[j]);
            let row = j * d;
            for k in 0..d {
                grads.query_w[row + k] += dz * mean[k];
                dm[k] += dz * self.query_w[row + k];
            }
        }

        // Query-token embedding gradients (mean pooling spreads dm evenly).
        if count > 0 {
            let inv = F::cast(1.0 / count as f64);
            for id in Self::query_ids(input) {
                let id = self.safe_id(id);
                grads.touched.push(id);
                let base = id as usize * d;
                for k in 0..d {
                    grads.embed[base + k] += dm[k] * inv;
                }
            }
        }

        (loss_s + loss_e).as_f64()
    }

    /// Mean loss and flat gradients over a batch, without updating
    /// parameters. The gradient layout matches [`param_count`]: embedding
    /// table, projection, start head, end head.
    pub fn batch_gradients(&self, batch: &[EncodedInput]) -> (f64, Vec<F>) {
        assert!(!batch.is_empty(), "batch must be non-empty");
        let mut grads = Grads::new(self.vocab_size, self.dim);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for input in batch {
            loss += self.accumulate(input, scale, &mut grads) * scale;
        }
        let mut flat = grads.embed;
        flat.extend_from_slice(&grads.query_w);
        flat.extend_from_slice(&grads.start_head);
        flat.extend_from_slice(&grads.end_head);
        (loss, flat)
    }

    /// Mean loss over a batch without touching parameters.
    pub fn batch_loss(&self, batch: &[EncodedInput]) -> f64 {
        assert!(!batch.is_empty(), "batch must be non-empty");
        let mut loss = 0.0;
        for input in batch {
            let (start, end) = self.forward(input);
            let (_, ls) = softmax_and_nll(&start, input.gold_begin);
            let (_, le) = softmax_and_nll(&end, input.gold_end);
            loss += (ls + le).as_f64();
        }
        loss / batch.len() as f64
    }

    /// One gradient step on a batch (AdaGrad per-parameter scaling).
    /// Returns the batch mean loss; a non-finite loss aborts.
    pub fn train_batch(&mut self, batch: &[EncodedInput]) -> Result<f64> {
        let mut grads = std::mem::replace(&mut self.scratch, Grads::new(0, 0));
        grads.clear(self.dim);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for input in batch {
            loss += self.accumulate(input, scale, &mut grads) * scale;
        }
        if !loss.is_finite() {
            self.scratch = grads;
            return Err(Error::Diverged(format!("batch loss is {loss}")));
        }

        let lr = self.learning_rate;
        let eps = F::cast(ADAGRAD_EPS);
        grads.touched.sort_unstable();
        grads.touched.dedup();
        for &t in &grads.touched {
            let base = t as usize * self.dim;
            for k in base..base + self.dim {
                let g = grads.embed[k];
                self.acc_embed[k] += g * g;
                self.embed[k] = self.embed[k] - lr * g / (self.acc_embed[k].sqrt() + eps);
            }
        }
        for k in 0..self.query_w.len() {
            let g = grads.query_w[k];
            self.acc_w[k] += g * g;
            self.query_w[k] = self.query_w[k] - lr * g / (self.acc_w[k].sqrt() + eps);
        }
        for k in 0..self.dim {
            let g = grads.start_head[k];
            self.acc_start[k] += g * g;
            self.start_head[k] = self.start_head[k] - lr * g / (self.acc_start[k].sqrt() + eps);
            let g = grads.end_head[k];
            self.acc_end[k] += g * g;
            self.end_head[k] = self.end_head[k] - lr * g / (self.acc_end[k].sqrt() + eps);
        }
        self.scratch = grads;
        Ok(loss)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.embed.len() + self.query_w.len() + self.start_head.len() + self.end_head.len()
    }

    /// Reads one parameter by flat index (layout as in
    /// [`Self::batch_gradients`]).
    pub fn param(&self, index: usize) -> F {
        let e = self.embed.len();
        let w = self.query_w.len();
        let s = self.start_head.len();
        if index < e {
            self.embed[index]
        } else if index < e + w {
            self.query_w[index - e]
        } else if index < e + w + s {
            self.start_head[index - e - w]
        } else {
            self.end_head[index - e - w - s]
        }
    }

    /// Writes one parameter by flat index.
    pub fn set_param(&mut self, index: usize, value: F) {
        let e = self.embed.len();
        let w = self.query_w.len();
        let s = self.start_head.len();
        if index < e {
            self.embed[index] = value;
        } else if index < e + w {
            self.query_w[index - e] = value;
        } else if index < e + w + s {
            self.start_head[index - e - w] = value;
        } else {
            self.end_head[index - e - w - s] = value;
        }
    }

    /// Sets every parameter to zero (uniform logits everywhere).
    pub fn zero_params(&mut self) {
        self.embed.iter_mut().for_each(|v| *v = F::zero());
        self.query_w.iter_mut().for_each(|v| *v = F::zero());
        self.start_head.iter_mut().for_each(|v| *v = F::zero());
        self.end_head.iter_mut().for_each(|v| *v = F::zero());
    }

    /// Serializes parameters with a version header, the vocabulary hash and
    /// the variant/budget configuration the model was trained with. Values
    /// are stored as little-endian `f64`, which round-trips `f32` exactly.
    pub fn save(
        &self,
        path: &Path,
        vocab_hash: &[u8; 32],
        variant: &Variant,
        budgets: &Budgets,
    ) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(vocab_hash)?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        out.write_all(&(self.vocab_size as u64).to_le_bytes())?;
        out.write_all(&[
            variant.vals as u8,
            variant.drop as u8,
            variant.mixing as u8,
        ])?;
        for b in [budgets.max_title, budgets.plain_query, budgets.vals_query] {
            out.write_all(&(b as u64).to_le_bytes())?;
        }
        for slice in [&self.embed, &self.query_w, &self.start_head, &self.end_head] {
            for v in slice.iter() {
                out.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Loads parameters, refusing a file written against a different
    /// vocabulary. Optimizer state is not persisted; a loaded model predicts
    /// or resumes training with fresh accumulators.
    pub fn load(
        path: &Path,
        vocab_hash: &[u8; 32],
        learning_rate: f64,
    ) -> Result<(Self, Variant, Budgets)> {
        let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Data(format!(
                "{} is not a pointer model file",
                path.display()
            )));
        }
        let mut stored_hash = [0u8; 32];
        input.read_exact(&mut stored_hash)?;
        if &stored_hash != vocab_hash {
            return Err(Error::VocabMismatch(format!(
                "{} was trained with a different vocabulary",
                path.display()
            )));
        }
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf)?;
        let dim = u64::from_le_bytes(u64buf) as usize;
        input.read_exact(&mut u64buf)?;
        let vocab_size = u64::from_le_bytes(u64buf) as usize;
        let mut flags = [0u8; 3];
        input.read_exact(&mut flags)?;
        let variant = Variant {
            vals: flags[0] != 0,
            drop: flags[1] != 0,
            mixing: flags[2] != 0,
        };
        let mut budget_vals = [0usize; 3];
        for b in &mut budget_vals {
            input.read_exact(&mut u64buf)?;
            *b = u64::from_le_bytes(u64buf) as usize;
        }
        let budgets = Budgets {
            max_title: budget_vals[0],
            plain_query: budget_vals[1],
            vals_query: budget_vals[2],
        };
        let mut read_params = |n: usize| -> Result<Vec<F>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                input.read_exact(&mut u64buf)?;
                out.push(F::cast(f64::from_le_bytes(u64buf)));
            }
            Ok(out)
        };
        let embed = read_params(vocab_size * dim)?;
        let query_w = read_params(dim * dim)?;
        let start_head = read_params(dim)?;
        let end_head = read_params(dim)?;
        let model = Self {
            dim,
            vocab_size,
            embed,
            query_w,
            start_head,
            end_head,
            learning_rate: F::cast(learning_rate),
            acc_embed: vec![F::zero(); vocab_size * dim],
            acc_w: vec![F::zero(); dim * dim],
            acc_start: vec![F::zero(); dim],
            acc_end: vec![F::zero(); dim],
            scratch: Grads::new(vocab_size, dim),
        };
        Ok((model, variant, budgets))
    }
}

const MAGIC: &[u8; 8] = b"AVEXPM01";

impl<F: Scalar> SpanExtractor for PointerModel<F> {
    fn train(&mut self, batches: &[Vec<EncodedInput>]) -> Result<f64> {
        let mut total = 0.0;
        for batch in batches {
            total += self.train_batch(batch)?;
        }
        Ok(total / batches.len().max(1) as f64)
    }

    fn predict(&self, input: &EncodedInput) -> (usize, usize) {
        self.predict_span(input)
    }
}

/// Softmax probabilities and the negative log likelihood of `gold`.
fn softmax_and_nll<F: Scalar>(logits: &[F], gold: usize) -> (Vec<F>, F) {
    let max = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut probs: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: F = probs.iter().copied().sum();
    for p in &mut probs {
        *p = *p / sum;
    }
    let nll = sum.ln() - (logits[gold] - max);
    (probs, nll)
}

/// Cross-entropy of the start position plus cross-entropy of the end
/// position for one input's logits.
pub fn loss<F: Scalar>(start_logits: &[F], end_logits: &[F], gold: (usize, usize)) -> F {
    let (_, ls) = softmax_and_nll(start_logits, gold.0);
    let (_, le) = softmax_and_nll(end_logits, gold.1);
    ls + le
}

/// Runs the full training loop: per epoch, shuffles the examples, rebuilds
/// the encoded batches (knowledge dropout redrawn per batch) and performs
/// one pass. Returns the per-epoch mean losses. Deterministic given the
/// config seed.
pub fn train<M: SpanExtractor>(
    model: &mut M,
    examples: &[LabeledExample],
    kb: &KnowledgeBase,
    variant: &Variant,
    dropout: &DropoutConfig,
    budgets: &Budgets,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    variant.validate()?;
    let spec = BatchSpec {
        batch_size: config.batch_size,
        mixing: variant.mixing,
    };
    spec.validate()?;
    if examples.is_empty() {
        return Err(Error::Data("no training examples".to_string()));
    }

    let sources = spec.sources_per_batch();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        let mut epoch_rng = SplitMix64::derive(config.seed, 0x5EED_0000 + epoch as u64);
        rng::shuffle(&mut order, &mut epoch_rng);
        let mut batches = Vec::with_capacity(order.len() / sources + 1);
        for (batch_ix, chunk) in order.chunks(sources).enumerate() {
            let members: Vec<LabeledExample> =
                chunk.iter().map(|&i| examples[i].clone()).collect();
            let mut batch_rng =
                SplitMix64::derive(config.seed, (epoch as u64) << 32 | batch_ix as u64);
            batches.push(make_mixed_batch(
                &members,
                kb,
                variant,
                dropout,
                budgets,
                vocab,
                &mut batch_rng,
            ));
        }
        let mean_loss = model.train(&batches).map_err(|e| match e {
            Error::Diverged(msg) => Error::Diverged(format!("epoch {epoch}: {msg}")),
            other => other,
        })?;
        trace.push(mean_loss);
    }
    Ok(trace)
}
