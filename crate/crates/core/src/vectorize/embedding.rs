//! Skip-gram with negative sampling over subword-enriched word
//! representations.
//!
//! A word is the set of its own row (when in the vocabulary) plus one
//! hashed bucket row per character n-gram of `<word>`. The input vector is
//! the mean of those rows, and gradients flow back to each row scaled by
//! `1 / rows`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{l2_normalize, FeatureSpace, FeatureVector};
use crate::error::{Error, Result};
use crate::rng::{self, StageRng};

const MAGIC: &[u8; 8] = b"ABSAEMB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub window: usize,
    pub epochs: usize,
    pub lr: f64,
    pub negatives: usize,
    pub min_count: u64,
    pub bucket_count: u32,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 100,
            min_n: 3,
            max_n: 6,
            window: 5,
            epochs: 5,
            lr: 0.05,
            negatives: 5,
            min_count: 5,
            bucket_count: 1 << 21,
        }
    }
}

pub fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Character n-grams of `<word>` for every n in `min_n..=max_n`.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let chars: Vec<char> = format!("<{word}>").chars().collect();
    let mut out = Vec::new();
    for n in min_n..=max_n {
        if n == 0 || n > chars.len() {
            continue;
        }
        for start in 0..=chars.len() - n {
            out.push(chars[start..start + n].iter().collect());
        }
    }
    out
}

/// Loss and gradient of one skip-gram example.
#[derive(Debug, Clone)]
pub struct SgnsGradient<T> {
    pub loss: T,
    /// Gradient with respect to the input (hidden) vector.
    pub hidden: Vec<T>,
    /// Gradient with respect to each output vector.
    pub outputs: Vec<Vec<T>>,
}

fn log_sigmoid<T: Float>(x: T) -> T {
    if x > T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Negative-sampling loss `-log σ(u₊·h) - Σ log σ(-u₋·h)` and its gradient.
/// `labels[i]` is true for the positive (observed context) output.
pub fn sgns_loss_and_gradient<T: Float>(hidden: &[T], outputs: &[&[T]], labels: &[bool]) -> SgnsGradient<T> {
    let mut loss = T::zero();
    let mut grad_hidden = vec![T::zero(); hidden.len()];
    let mut grad_outputs = Vec::with_capacity(outputs.len());
    for (out, &label) in outputs.iter().zip(labels) {
        let score = dot(out, hidden);
        let (target, l) = if label {
            (T::one(), log_sigmoid(score))
        } else {
            (T::zero(), log_sigmoid(-score))
        };
        loss = loss - l;
        let coeff = sigmoid(score) - target;
        for (g, &u) in grad_hidden.iter_mut().zip(out.iter()) {
            *g = *g + coeff * u;
        }
        grad_outputs.push(hidden.iter().map(|&h| coeff * h).collect());
    }
    SgnsGradient {
        loss,
        hidden: grad_hidden,
        outputs: grad_outputs,
    }
}

/// Gradient of the skip-gram loss with respect to the subword rows that
/// make up the input vector, and the output vectors.
#[derive(Debug, Clone)]
pub struct SubwordGradient<T> {
    pub loss: T,
    pub rows: Vec<Vec<T>>,
    pub outputs: Vec<Vec<T>>,
}

/// Loss and gradients with the input vector formed as the mean of `rows`.
pub fn subword_objective<T: Float>(rows: &[&[T]], outputs: &[&[T]], labels: &[bool]) -> SubwordGradient<T> {
    let dim = rows[0].len();
    let scale = T::one() / T::from(rows.len()).expect("row count fits");
    let mut hidden = vec![T::zero(); dim];
    for row in rows {
        for (h, &x) in hidden.iter_mut().zip(row.iter()) {
            *h = *h + x;
        }
    }
    hidden.iter_mut().for_each(|h| *h = *h * scale);
    let g = sgns_loss_and_gradient(&hidden, outputs, labels);
    let per_row: Vec<T> = g.hidden.iter().map(|&x| x * scale).collect();
    SubwordGradient {
        loss: g.loss,
        rows: vec![per_row; rows.len()],
        outputs: g.outputs,
    }
}

/// Cumulative unigram^0.75 distribution for drawing negatives.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    pub fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeTable { cumulative }
    }

    pub fn sample(&self, rng: &mut StageRng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng::unit(rng) * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Row storage the SGD loop reads and updates.
trait Rows {
    fn read(&self, row: usize, out: &mut [f32]);
    fn add(&mut self, row: usize, scale: f32, v: &[f32]);
}

struct DenseRows<'a> {
    data: &'a mut [f32],
    dim: usize,
}

impl Rows for DenseRows<'_> {
    fn read(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    fn add(&mut self, row: usize, scale: f32, v: &[f32]) {
        for (x, &d) in self.data[row * self.dim..(row + 1) * self.dim].iter_mut().zip(v) {
            *x += scale * d;
        }
    }
}

/// Lock-free shared rows for multi-worker training. Concurrent updates may
/// overwrite each other, which asynchronous SGD tolerates.
struct SharedRows<'a> {
    data: &'a [AtomicU32],
    dim: usize,
}

impl Rows for SharedRows<'_> {
    fn read(&self, row: usize, out: &mut [f32]) {
        for (o, a) in out.iter_mut().zip(&self.data[row * self.dim..(row + 1) * self.dim]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add(&mut self, row: usize, scale: f32, v: &[f32]) {
        for (a, &d) in self.data[row * self.dim..(row + 1) * self.dim].iter().zip(v) {
            let x = f32::from_bits(a.load(Ordering::Relaxed)) + scale * d;
            a.store(x.to_bits(), Ordering::Relaxed);
        }
    }
}

fn to_atomic(v: Vec<f32>) -> Vec<AtomicU32> {
    v.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect()
}

fn from_atomic(v: Vec<AtomicU32>) -> Vec<f32> {
    v.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
}

/// Immutable inputs shared by every worker.
struct TrainSetup<'a> {
    sentences: &'a [Vec<u32>],
    subwords: &'a [Vec<u32>],
    negatives: &'a NegativeTable,
    params: &'a EmbeddingParams,
    total_tokens: u64,
}

/// Per-worker scratch buffers and RNG.
struct Worker {
    rng: StageRng,
    hidden: Vec<f32>,
    row_buf: Vec<f32>,
    out_bufs: Vec<Vec<f32>>,
    out_ids: Vec<usize>,
    labels: Vec<bool>,
}

impl Worker {
    fn new(rng: StageRng, dim: usize, negatives: usize) -> Self {
        Worker {
            rng,
            hidden: vec![0.0; dim],
            row_buf: vec![0.0; dim],
            out_bufs: vec![vec![0.0; dim]; negatives + 1],
            out_ids: Vec::with_capacity(negatives + 1),
            labels: Vec::with_capacity(negatives + 1),
        }
    }

    /// Trains on one sentence; returns (loss sum, example count).
    fn sentence<I: Rows, O: Rows>(
        &mut self,
        setup: &TrainSetup<'_>,
        sentence: &[u32],
        lr: f32,
        input: &mut I,
        output: &mut O,
    ) -> (f64, u64) {
        let params = setup.params;
        let vocab = setup.subwords.len();
        let (mut loss, mut examples) = (0.0, 0);
        for (pos, &target) in sentence.iter().enumerate() {
            let span = 1 + rng::index(&mut self.rng, params.window.max(1));
            let lo = pos.saturating_sub(span);
            let hi = (pos + span).min(sentence.len() - 1);
            for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                if ctx_pos == pos {
                    continue;
                }
                let context = context as usize;
                self.out_ids.clear();
                self.labels.clear();
                self.out_ids.push(context);
                self.labels.push(true);
                if vocab > 1 {
                    while self.out_ids.len() < params.negatives + 1 {
                        let neg = setup.negatives.sample(&mut self.rng);
                        if neg != context {
                            self.out_ids.push(neg);
                            self.labels.push(false);
                        }
                    }
                }
                loss += self.step(setup.subwords[target as usize].as_slice(), lr, input, output);
                examples += 1;
            }
        }
        (loss, examples)
    }

    fn step<I: Rows, O: Rows>(&mut self, rows: &[u32], lr: f32, input: &mut I, output: &mut O) -> f64 {
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
        for &r in rows {
            input.read(r as usize, &mut self.row_buf);
            for (h, &x) in self.hidden.iter_mut().zip(&self.row_buf) {
                *h += x;
            }
        }
        let scale = 1.0 / rows.len() as f32;
        self.hidden.iter_mut().for_each(|h| *h *= scale);

        for (buf, &id) in self.out_bufs.iter_mut().zip(&self.out_ids) {
            output.read(id, buf);
        }
        let outs: Vec<&[f32]> = self.out_bufs[..self.out_ids.len()]
            .iter()
            .map(Vec::as_slice)
            .collect();
        let grad = sgns_loss_and_gradient(&self.hidden, &outs, &self.labels);
        for (id, g) in self.out_ids.iter().zip(&grad.outputs) {
            output.add(*id, -lr, g);
        }
        for &r in rows {
            input.add(r as usize, -lr * scale, &grad.hidden);
        }
        f64::from(grad.loss)
    }
}

/// Incremental skip-gram trainer. Single-worker runs are bit-reproducible
/// for a fixed seed.
pub struct EmbeddingTrainer {
    params: EmbeddingParams,
    seed: u64,
    vocab: Vec<String>,
    subwords: Vec<Vec<u32>>,
    sentences: Vec<Vec<u32>>,
    negatives: NegativeTable,
    input: Vec<f32>,
    output: Vec<f32>,
    processed: u64,
    total_tokens: u64,
    worker: Worker,
}

impl EmbeddingTrainer {
    pub fn new(corpus: &[Vec<String>], params: &EmbeddingParams, seed: u64) -> Result<Self> {
        if params.dim == 0 || params.min_n == 0 || params.min_n > params.max_n || params.bucket_count == 0 {
            return Err(Error::invalid(format!("invalid embedding parameters {params:?}")));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in corpus {
            for token in doc {
                *counts.entry(token).or_default() += 1;
            }
        }
        let mut vocab: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= params.min_count)
            .collect();
        if vocab.is_empty() {
            return Err(Error::Insufficient(format!(
                "empty effective vocabulary (no token occurs at least {} times)",
                params.min_count
            )));
        }
        vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let index: HashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (*t, i as u32))
            .collect();
        let sentences: Vec<Vec<u32>> = corpus
            .iter()
            .map(|doc| doc.iter().filter_map(|t| index.get(t.as_str()).copied()).collect::<Vec<_>>())
            .filter(|s: &Vec<u32>| !s.is_empty())
            .collect();
        let model_shape = EmbeddingModel::shape_only(params, seed, Vec::new());
        let subwords = vocab
            .iter()
            .enumerate()
            .map(|(i, (t, _))| {
                let mut rows = vec![i as u32];
                rows.extend(
                    model_shape
                        .ngram_buckets(t)
                        .map(|b| (vocab.len() as u64 + u64::from(b)) as u32),
                );
                rows
            })
            .collect();
        let negatives = NegativeTable::new(&vocab.iter().map(|v| v.1).collect::<Vec<_>>());

        let rows = vocab.len() + params.bucket_count as usize;
        let mut init_rng = rng::stream(seed, 0);
        let bound = 1.0 / params.dim as f64;
        let input = (0..rows * params.dim)
            .map(|_| ((rng::unit(&mut init_rng) * 2.0 - 1.0) * bound) as f32)
            .collect();
        let output = vec![0.0; vocab.len() * params.dim];
        let tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
        Ok(EmbeddingTrainer {
            params: params.clone(),
            seed,
            vocab: vocab.into_iter().map(|(t, _)| t.to_string()).collect(),
            subwords,
            sentences,
            negatives,
            input,
            output,
            processed: 0,
            total_tokens: tokens * params.epochs.max(1) as u64,
            worker: Worker::new(rng::stream(seed, 1), params.dim, params.negatives),
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    fn learning_rate(&self, processed: u64) -> f32 {
        let progress = (processed as f64 / self.total_tokens.max(1) as f64).min(1.0);
        (self.params.lr * (1.0 - progress)) as f32
    }

    /// Trains on sentences `range` in order; returns the mean example loss.
    pub fn train_range(&mut self, range: std::ops::Range<usize>) -> f64 {
        let setup = TrainSetup {
            sentences: &self.sentences,
            subwords: &self.subwords,
            negatives: &self.negatives,
            params: &self.params,
            total_tokens: self.total_tokens,
        };
        let dim = self.params.dim;
        let mut input = DenseRows { data: &mut self.input, dim };
        let mut output = DenseRows { data: &mut self.output, dim };
        let (mut loss, mut examples) = (0.0, 0);
        for s in range {
            let lr = {
                let progress = (self.processed as f64 / setup.total_tokens.max(1) as f64).min(1.0);
                (self.params.lr * (1.0 - progress)) as f32
            };
            let (l, n) = self
                .worker
                .sentence(&setup, &setup.sentences[s], lr, &mut input, &mut output);
            loss += l;
            examples += n;
            self.processed += setup.sentences[s].len() as u64;
        }
        if examples == 0 {
            0.0
        } else {
            loss / examples as f64
        }
    }

    pub fn train_epoch(&mut self) -> f64 {
        self.train_range(0..self.sentences.len())
    }

    /// Runs one epoch with `workers` threads sharing the matrices without
    /// locks. Results are not bit-reproducible when `workers > 1`.
    pub fn train_epoch_parallel(&mut self, workers: usize, epoch: usize) {
        if workers <= 1 {
            self.train_epoch();
            return;
        }
        let dim = self.params.dim;
        let input = to_atomic(std::mem::take(&mut self.input));
        let output = to_atomic(std::mem::take(&mut self.output));
        let processed = AtomicU64::new(self.processed);
        let setup = TrainSetup {
            sentences: &self.sentences,
            subwords: &self.subwords,
            negatives: &self.negatives,
            params: &self.params,
            total_tokens: self.total_tokens,
        };
        let chunk = self.sentences.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for w in 0..workers {
                let (setup, input, output, processed) = (&setup, &input, &output, &processed);
                let stream = 2 + (epoch * workers + w) as u64;
                let seed = self.seed;
                scope.spawn(move || {
                    let mut worker = Worker::new(rng::stream(seed, stream), dim, setup.params.negatives);
                    let mut input = SharedRows { data: input, dim };
                    let mut output = SharedRows { data: output, dim };
                    let lo = (w * chunk).min(setup.sentences.len());
                    let hi = ((w + 1) * chunk).min(setup.sentences.len());
                    for sentence in &setup.sentences[lo..hi] {
                        let done = processed.load(Ordering::Relaxed);
                        let progress = (done as f64 / setup.total_tokens.max(1) as f64).min(1.0);
                        let lr = (setup.params.lr * (1.0 - progress)) as f32;
                        worker.sentence(setup, sentence, lr, &mut input, &mut output);
                        processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                    }
                });
            }
        });
        self.processed = processed.into_inner();
        self.input = from_atomic(input);
        self.output = from_atomic(output);
    }

    /// Mean loss over fixed (target, context, negatives) examples, without
    /// updating anything.
    pub fn probe_loss(&self, examples: &[(usize, usize, Vec<usize>)]) -> f64 {
        let dim = self.params.dim;
        let row = |m: &[f32], i: usize| m[i * dim..(i + 1) * dim].to_vec();
        let mut total = 0.0;
        for (target, context, negs) in examples {
            let rows: Vec<Vec<f32>> = self.subwords[*target].iter().map(|&r| row(&self.input, r as usize)).collect();
            let row_refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
            let mut outs = vec![row(&self.output, *context)];
            outs.extend(negs.iter().map(|&n| row(&self.output, n)));
            let out_refs: Vec<&[f32]> = outs.iter().map(Vec::as_slice).collect();
            let mut labels = vec![false; out_refs.len()];
            labels[0] = true;
            total += f64::from(subword_objective(&row_refs, &out_refs, &labels).loss);
        }
        total / examples.len().max(1) as f64
    }

    pub fn current_learning_rate(&self) -> f32 {
        self.learning_rate(self.processed)
    }

    pub fn finish(self) -> EmbeddingModel {
        let mut model = EmbeddingModel::shape_only(&self.params, self.seed, self.vocab);
        model.input = self.input;
        model
    }

    /// Full training run: `params.epochs` passes over the corpus.
    pub fn train(corpus: &[Vec<String>], params: &EmbeddingParams, seed: u64, workers: usize) -> Result<EmbeddingModel> {
        let mut trainer = EmbeddingTrainer::new(corpus, params, seed)?;
        for epoch in 0..params.epochs {
            if workers > 1 {
                trainer.train_epoch_parallel(workers, epoch);
            } else {
                trainer.train_epoch();
            }
        }
        Ok(trainer.finish())
    }
}

/// Trained subword embeddings (input vectors only).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    min_n: usize,
    max_n: usize,
    bucket_count: u32,
    seed: u64,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// (vocab + buckets) x dim, row-major.
    input: Vec<f32>,
}

impl EmbeddingModel {
    fn shape_only(params: &EmbeddingParams, seed: u64, vocab: Vec<String>) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EmbeddingModel {
            dim: params.dim,
            min_n: params.min_n,
            max_n: params.max_n,
            bucket_count: params.bucket_count,
            seed,
            vocab,
            index,
            input: Vec::new(),
        }
    }

    /// Builds a model from explicit rows: `vocab.len() + bucket_count` rows
    /// of `dim` values.
    pub fn from_rows(
        dim: usize,
        min_n: usize,
        max_n: usize,
        bucket_count: u32,
        vocab: Vec<String>,
        rows: Vec<f32>,
    ) -> Result<Self> {
        if rows.len() != (vocab.len() + bucket_count as usize) * dim {
            return Err(Error::invalid(format!(
                "expected {} row values, got {}",
                (vocab.len() + bucket_count as usize) * dim,
                rows.len()
            )));
        }
        let params = EmbeddingParams {
            dim,
            min_n,
            max_n,
            bucket_count,
            ..EmbeddingParams::default()
        };
        let mut model = EmbeddingModel::shape_only(&params, 0, vocab);
        model.input = rows;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bucket_count(&self) -> u32 {
        self.bucket_count
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    fn ngram_buckets<'a>(&'a self, word: &str) -> impl Iterator<Item = u32> + 'a {
        char_ngrams(word, self.min_n, self.max_n)
            .into_iter()
            .map(move |g| fnv1a32(g.as_bytes()) % self.bucket_count)
    }

    /// Matrix rows composing `word`: its own row if known, then one bucket
    /// row per n-gram.
    pub fn subword_rows(&self, word: &str) -> Vec<usize> {
        let mut rows = Vec::new();
        if let Some(&i) = self.index.get(word) {
            rows.push(i);
        }
        let base = self.vocab.len();
        rows.extend(self.ngram_buckets(word).map(|b| base + b as usize));
        rows
    }

    fn row(&self, r: usize) -> &[f32] {
        &self.input[r * self.dim..(r + 1) * self.dim]
    }

    /// Mean of the word's subword rows; `None` when it has none.
    pub fn word_vector(&self, word: &str) -> Option<Vec<f64>> {
        let rows = self.subword_rows(word);
        if rows.is_empty() {
            return None;
        }
        let mut v = vec![0.0; self.dim];
        for r in &rows {
            for (acc, &x) in v.iter_mut().zip(self.row(*r)) {
                *acc += f64::from(x);
            }
        }
        let n = rows.len() as f64;
        v.iter_mut().for_each(|x| *x /= n);
        Some(v)
    }

    /// L2-normalized mean of the document's word vectors.
    pub fn embed_review(&self, doc: &[String]) -> FeatureVector {
        let mut values = vec![0.0; self.dim];
        let mut words = 0usize;
        for token in doc {
            if let Some(v) = self.word_vector(token) {
                for (acc, x) in values.iter_mut().zip(v) {
                    *acc += x;
                }
                words += 1;
            }
        }
        if words > 0 {
            values.iter_mut().for_each(|x| *x /= words as f64);
            l2_normalize(&mut values);
        }
        FeatureVector {
            space: FeatureSpace::Embedding,
            values,
        }
    }

    /// Top-`k` vocabulary words by cosine similarity to `token`, excluding
    /// the token itself; ties resolve lexicographically.
    pub fn nearest_neighbors(&self, token: &str, k: usize) -> Vec<(String, f64)> {
        let Some(query) = self.word_vector(token) else {
            return Vec::new();
        };
        let qn = super::l2_norm(&query);
        let mut scored: Vec<(String, f64)> = self
            .vocab
            .iter()
            .filter(|w| w.as_str() != token)
            .map(|w| {
                let v = self.word_vector(w).expect("vocabulary words have rows");
                let denom = qn * super::l2_norm(&v);
                let sim = if denom > 0.0 {
                    query.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / denom
                } else {
                    0.0
                };
                (w.clone(), sim)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        for v in [
            self.dim as u32,
            self.vocab.len() as u32,
            self.bucket_count,
            self.min_n as u32,
            self.max_n as u32,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.seed.to_le_bytes())?;
        for token in &self.vocab {
            out.write_all(&(token.len() as u32).to_le_bytes())?;
            out.write_all(token.as_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.dim * 4 * 1024);
        for chunk in self.input.chunks(self.dim * 1024) {
            buf.clear();
            for x in chunk {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |m: &str| Error::invalid(format!("embedding model: {m}"));
        let io = |e: std::io::Error| Error::invalid(format!("embedding model: {e}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u32s = [0u32; 5];
        for v in &mut u32s {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(io)?;
            *v = u32::from_le_bytes(b);
        }
        let [dim, vocab_size, bucket_count, min_n, max_n] = u32s;
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8).map_err(io)?;
        let seed = u64::from_le_bytes(b8);
        let mut vocab = Vec::with_capacity(vocab_size as usize);
        for _ in 0..vocab_size {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(io)?;
            let mut token = vec![0u8; u32::from_le_bytes(b) as usize];
            input.read_exact(&mut token).map_err(io)?;
            vocab.push(String::from_utf8(token).map_err(|_| bad("token is not UTF-8"))?);
        }
        let n = (vocab_size as usize + bucket_count as usize) * dim as usize;
        let mut bytes = vec![0u8; n * 4];
        input.read_exact(&mut bytes).map_err(io)?;
        let rows = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut model = EmbeddingModel::from_rows(
            dim as usize,
            min_n as usize,
            max_n as usize,
            bucket_count,
            vocab,
            rows,
        )?;
        model.seed = seed;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        EmbeddingModel::read_from(BufReader::new(file))
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn digest(&self) -> String {
        struct HashWriter(Sha256);
        impl Write for HashWriter {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0.update(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let mut w = HashWriter(Sha256::new());
        self.write_to(&mut w).expect("hashing cannot fail");
        w.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_model(rows: &[[f32; 2]], vocab: &[&str]) -> EmbeddingModel {
        // One bucket, zeroed, shared by every n-gram; n-grams disabled by
        // making min_n exceed any word length.
        let mut data: Vec<f32> = rows.iter().flatten().copied().collect();
        data.extend([0.0, 0.0]);
        EmbeddingModel::from_rows(2, 50, 50, 1, vocab.iter().map(|s| s.to_string()).collect(), data).unwrap()
    }

    #[test]
    fn ngrams_of_cat() {
        let mut grams = char_ngrams("cat", 3, 6);
        grams.sort();
        let mut expected = vec!["<ca", "cat", "at>", "<cat", "cat>", "<cat>"];
        expected.sort();
        assert_eq!(grams, expected);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a32(b""), 0x811c_9dc5);
        assert_eq!(fnv1a32(b"a"), 0xe40c_292c);
        assert_eq!(fnv1a32(b"foobar"), 0xbf9c_f968);
    }

    #[test]
    fn embed_toy_rows() {
        let model = toy_model(&[[3.0, 0.0], [1.0, 2.0]], &["w1", "w2"]);
        let single = model.embed_review(&["w1".into()]);
        assert_eq!(single.values, vec![1.0, 0.0]);

        // Mean (2, 1) normalized by sqrt(5).
        let pair = model.embed_review(&["w1".into(), "w2".into()]);
        assert_abs_diff_eq!(pair.values[0], 2.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(pair.values[1], 1.0 / 5f64.sqrt(), epsilon = 1e-12);

        let empty = model.embed_review(&[]);
        assert_eq!(empty.values, vec![0.0, 0.0]);
    }

    #[test]
    fn nearest_neighbor_examples() {
        let dup = toy_model(&[[1.0, 2.0], [1.0, 2.0], [-2.0, 1.0]], &["w", "w_copy", "z"]);
        let nn = dup.nearest_neighbors("w", 1);
        assert_eq!(nn[0].0, "w_copy");
        assert_abs_diff_eq!(nn[0].1, 1.0, epsilon = 1e-12);

        let ortho = toy_model(&[[1.0, 0.0], [0.0, 1.0], [0.0, -3.0]], &["q", "a", "b"]);
        for (_, sim) in ortho.nearest_neighbors("q", 5) {
            assert_abs_diff_eq!(sim, 0.0, epsilon = 1e-12);
        }
        // Equal similarity: lexicographic order.
        assert_eq!(ortho.nearest_neighbors("q", 2)[0].0, "a");
    }

    #[test]
    fn nearest_neighbors_match_brute_force_angles() {
        let angles = [0.0f64, 0.3, 1.2, 2.5];
        let rows: Vec<[f32; 2]> = angles.iter().map(|a| [a.cos() as f32, a.sin() as f32]).collect();
        let model = toy_model(&rows, &["q", "x", "y", "z"]);
        let nn = model.nearest_neighbors("q", 3);
        let got: Vec<&str> = nn.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(got, ["x", "y", "z"]);
        for ((_, sim), a) in nn.iter().zip(&angles[1..]) {
            assert_abs_diff_eq!(*sim, a.cos(), epsilon = 1e-6);
        }
    }

    #[test]
    fn empty_effective_vocabulary() {
        let corpus = vec![vec!["only".to_string(); 4]];
        let err = EmbeddingTrainer::new(&corpus, &EmbeddingParams::default(), 1).err().unwrap();
        assert!(err.to_string().contains("empty effective vocabulary"));
    }

    fn small_params() -> EmbeddingParams {
        EmbeddingParams {
            dim: 16,
            bucket_count: 1 << 10,
            min_count: 1,
            epochs: 2,
            ..EmbeddingParams::default()
        }
    }

    fn small_corpus() -> Vec<Vec<String>> {
        (0..60)
            .map(|i| {
                let words: &[&str] = if i % 2 == 0 {
                    &["waiter", "friendly", "attentive", "staff"]
                } else {
                    &["pasta", "delicious", "fresh", "sauce"]
                };
                words.iter().map(|s| s.to_string()).collect()
            })
            .collect()
    }

    #[test]
    fn single_worker_training_is_deterministic() {
        let corpus = small_corpus();
        let a = EmbeddingTrainer::train(&corpus, &small_params(), 9, 1).unwrap();
        let b = EmbeddingTrainer::train(&corpus, &small_params(), 9, 1).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = EmbeddingTrainer::train(&corpus, &small_params(), 10, 1).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn multi_worker_training_produces_finite_vectors() {
        let model = EmbeddingTrainer::train(&small_corpus(), &small_params(), 3, 4).unwrap();
        assert!(model.input.iter().all(|x| x.is_finite()));
        assert_eq!(model.vocab().len(), 8);
    }

    #[test]
    fn binary_round_trip() {
        let model = EmbeddingTrainer::train(&small_corpus(), &small_params(), 2, 1).unwrap();
        let mut bytes = Vec::new();
        model.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"ABSAEMB1");
        let back = EmbeddingModel::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, model);
        assert!(EmbeddingModel::read_from(&bytes[..20]).is_err());
    }

    #[test]
    fn neighbors_reflect_cooccurrence() {
        let params = EmbeddingParams {
            epochs: 10,
            ..small_params()
        };
        let model = EmbeddingTrainer::train(&small_corpus(), &params, 4, 1).unwrap();
        let nn = model.nearest_neighbors("waiter", 3);
        let names: Vec<&str> = nn.iter().map(|(w, _)| w.as_str()).collect();
        for w in ["friendly", "attentive", "staff"] {
            assert!(names.contains(&w), "{names:?}");
        }
    }
}
