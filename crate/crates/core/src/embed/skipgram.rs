use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusKind, EmbedError, EmbeddingMatrix};

/// Context radius around a centre token, or the whole sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowValue", into = "WindowValue")]
pub enum ContextWindow {
    Radius(usize),
    Full,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WindowValue {
    Radius(usize),
    Name(String),
}

impl TryFrom<WindowValue> for ContextWindow {
    type Error = String;

    fn try_from(v: WindowValue) -> Result<Self, Self::Error> {
        match v {
            WindowValue::Radius(r) => Ok(Self::Radius(r)),
            WindowValue::Name(s) if s.eq_ignore_ascii_case("full") => Ok(Self::Full),
            WindowValue::Name(s) => Err(format!("window must be a radius or \"full\", got {s:?}")),
        }
    }
}

impl From<ContextWindow> for WindowValue {
    fn from(w: ContextWindow) -> Self {
        match w {
            ContextWindow::Radius(r) => WindowValue::Radius(r),
            ContextWindow::Full => WindowValue::Name("full".into()),
        }
    }
}

impl ContextWindow {
    /// Context positions for the centre at `i` in a sequence of length `len`.
    fn bounds(self, i: usize, len: usize) -> (usize, usize) {
        match self {
            Self::Full => (0, len),
            Self::Radius(r) => (i.saturating_sub(r), (i + r + 1).min(len)),
        }
    }
}

/// Every `(centre, context)` token pair a sequence contributes.
pub fn positive_pairs(seq: &[u32], window: ContextWindow) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for i in 0..seq.len() {
        let (lo, hi) = window.bounds(i, seq.len());
        pairs.extend((lo..hi).filter(|&j| j != i).map(|j| (seq[i], seq[j])));
    }
    pairs
}

fn pair_count(seq_len: usize, window: ContextWindow) -> u64 {
    (0..seq_len)
        .map(|i| {
            let (lo, hi) = window.bounds(i, seq_len);
            (hi - lo - 1) as u64
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: ContextWindow,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub final_lr: f32,
    pub seed: u64,
    /// 1 is the deterministic path; more workers share parameters without locks
    /// and give run-dependent results.
    pub workers: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            window: ContextWindow::Radius(5),
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            final_lr: 1e-4,
            seed: 0,
            workers: 1,
        }
    }
}

impl SkipGramConfig {
    pub fn packages() -> Self {
        Self { window: ContextWindow::Full, ..Self::default() }
    }

    pub fn validate(&self, kind: CorpusKind) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.to_string()));
        if self.dim == 0 || self.negatives == 0 || self.epochs == 0 || self.workers == 0 {
            return bad("dim, negatives, epochs and workers must be positive");
        }
        if !(self.initial_lr > 0.0 && self.final_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        match (self.window, kind) {
            (ContextWindow::Radius(0), _) => bad("window radius must be positive"),
            (ContextWindow::Full, CorpusKind::Walks) => bad("a full window is only meaningful for package sequences"),
            _ => Ok(()),
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Negative-sampling loss `-ln s(u.v) - sum_i ln s(-u.n_i)` for centre `u`,
/// context `v` and negatives `n_i`, with its exact gradient.
pub fn skipgram_loss_and_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> Result<LossGrad, EmbedError> {
    let d = center.len();
    for v in std::iter::once(context).chain(negatives.iter().copied()) {
        if v.len() != d {
            return Err(EmbedError::DimensionMismatch { expected: d, found: v.len() });
        }
    }
    let pos = dot(center, context);
    let mut loss = softplus(-pos);
    let g_pos = sigmoid(pos) - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|x| g_pos * x).collect();
    let grad_context = center.iter().map(|x| g_pos * x).collect();
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = dot(center, neg);
        loss += softplus(s);
        let g = sigmoid(s);
        for (gc, n) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += g * n;
        }
        grad_negs.push(center.iter().map(|x| g * x).collect());
    }
    Ok(LossGrad { loss, center: grad_center, context: grad_context, negatives: grad_negs })
}

/// Dot product with eight independent partial sums, which lets the compiler
/// vectorise the loop.
#[inline]
fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// One target of a training pair: updates `output` in place, accumulates the
/// centre update into `center_delta` and returns this term's loss. `label` is
/// 1 for the observed context and 0 for a negative.
#[inline]
pub(crate) fn target_step(input: &[f32], output: &mut [f32], label: f32, lr: f32, center_delta: &mut [f32]) -> f64 {
    let score = dot_f32(input, output);
    let s = f64::from(score);
    let loss = if label > 0.5 { softplus(-s) } else { softplus(s) };
    let g = (label - sigmoid(s) as f32) * lr;
    for ((delta, out), inp) in center_delta.iter_mut().zip(output.iter_mut()).zip(input) {
        *delta += g * *out;
        *out += g * inp;
    }
    loss
}

/// Alias-free sampler over `count^0.75`.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-pair loss observed during each epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs_per_epoch: u64,
}

pub fn train_skipgram(corpus: &Corpus, cfg: &SkipGramConfig) -> Result<EmbeddingMatrix, EmbedError> {
    train_skipgram_with_report(corpus, cfg).map(|(m, _)| m)
}

/// Skip-gram with negative sampling.
///
/// Input vectors start uniform in `[-0.5/d, 0.5/d)` and output vectors at
/// zero. The learning rate decays linearly from `initial_lr` to `final_lr`
/// over all pairs of all epochs. Negatives that coincide with the observed
/// context are skipped rather than redrawn.
pub fn train_skipgram_with_report(
    corpus: &Corpus,
    cfg: &SkipGramConfig,
) -> Result<(EmbeddingMatrix, TrainReport), EmbedError> {
    cfg.validate(corpus.kind)?;
    if corpus.tokens.is_empty() || corpus.sequences.iter().all(|s| s.is_empty()) {
        return Err(EmbedError::EmptyCorpus);
    }
    let vocab = corpus.tokens.len();
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input: Vec<f32> = (0..vocab * d).map(|_| (rng.random::<f32>() - 0.5) / d as f32).collect();
    let output = vec![0.0f32; vocab * d];
    let table = NegativeTable::new(&corpus.token_counts());
    let pairs_per_epoch: u64 = corpus.sequences.iter().map(|s| pair_count(s.len(), cfg.window)).sum();
    if pairs_per_epoch == 0 {
        return Err(EmbedError::EmptyCorpus);
    }

    let (input, epoch_losses) = if cfg.workers == 1 {
        train_single(corpus, cfg, input, output, &table, pairs_per_epoch, &mut rng)
    } else {
        train_shared(corpus, cfg, input, output, &table, pairs_per_epoch)
    };
    let matrix = EmbeddingMatrix::new(corpus.tokens.clone(), d, input)?;
    Ok((matrix, TrainReport { epoch_losses, pairs_per_epoch }))
}

fn learning_rate(cfg: &SkipGramConfig, processed: u64, total: u64) -> f32 {
    let progress = (processed as f64 / total as f64).min(1.0);
    (f64::from(cfg.initial_lr) - f64::from(cfg.initial_lr - cfg.final_lr) * progress) as f32
}

fn train_single(
    corpus: &Corpus,
    cfg: &SkipGramConfig,
    mut input: Vec<f32>,
    mut output: Vec<f32>,
    table: &NegativeTable,
    pairs_per_epoch: u64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f32>, Vec<f64>) {
    let d = cfg.dim;
    let total = pairs_per_epoch * cfg.epochs as u64;
    let mut processed = 0u64;
    let mut delta = vec![0.0f32; d];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for seq in &corpus.sequences {
            for i in 0..seq.len() {
                let (lo, hi) = cfg.window.bounds(i, seq.len());
                let c = seq[i] as usize;
                for j in (lo..hi).filter(|&j| j != i) {
                    let lr = learning_rate(cfg, processed, total);
                    processed += 1;
                    let ctx = seq[j] as usize;
                    delta.iter_mut().for_each(|x| *x = 0.0);
                    let center = &input[c * d..(c + 1) * d];
                    let mut loss = target_step(center, &mut output[ctx * d..(ctx + 1) * d], 1.0, lr, &mut delta);
                    for _ in 0..cfg.negatives {
                        let t = table.sample(rng) as usize;
                        if t == ctx {
                            continue;
                        }
                        loss += target_step(center, &mut output[t * d..(t + 1) * d], 0.0, lr, &mut delta);
                    }
                    for (x, dx) in input[c * d..(c + 1) * d].iter_mut().zip(&delta) {
                        *x += dx;
                    }
                    loss_sum += loss;
                }
            }
        }
        epoch_losses.push(loss_sum / pairs_per_epoch as f64);
    }
    (input, epoch_losses)
}

struct SharedRows {
    cells: Vec<AtomicU32>,
    dim: usize,
}

impl SharedRows {
    fn new(values: Vec<f32>, dim: usize) -> Self {
        Self { cells: values.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect(), dim }
    }

    fn load(&self, row: usize, buf: &mut [f32]) {
        for (b, cell) in buf.iter_mut().zip(&self.cells[row * self.dim..(row + 1) * self.dim]) {
            *b = f32::from_bits(cell.load(Ordering::Relaxed));
        }
    }

    fn store(&self, row: usize, buf: &[f32]) {
        for (b, cell) in buf.iter().zip(&self.cells[row * self.dim..(row + 1) * self.dim]) {
            cell.store(b.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f32> {
        self.cells.into_iter().map(|c| f32::from_bits(c.into_inner())).collect()
    }
}

fn train_shared(
    corpus: &Corpus,
    cfg: &SkipGramConfig,
    input: Vec<f32>,
    output: Vec<f32>,
    table: &NegativeTable,
    pairs_per_epoch: u64,
) -> (Vec<f32>, Vec<f64>) {
    let d = cfg.dim;
    let input = SharedRows::new(input, d);
    let output = SharedRows::new(output, d);
    let processed = AtomicU64::new(0);
    let total = pairs_per_epoch * cfg.epochs as u64;
    let chunk = corpus.sequences.len().div_ceil(cfg.workers);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let loss_sum: f64 = std::thread::scope(|scope| {
            let handles: Vec<_> = corpus
                .sequences
                .chunks(chunk.max(1))
                .enumerate()
                .map(|(w, seqs)| {
                    let (input, output, processed) = (&input, &output, &processed);
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                        rng.set_stream(((epoch * cfg.workers + w) as u64) + 1);
                        let mut center = vec![0.0f32; d];
                        let mut target = vec![0.0f32; d];
                        let mut delta = vec![0.0f32; d];
                        let mut loss_sum = 0.0;
                        for seq in seqs {
                            for i in 0..seq.len() {
                                let (lo, hi) = cfg.window.bounds(i, seq.len());
                                let c = seq[i] as usize;
                                for j in (lo..hi).filter(|&j| j != i) {
                                    let lr = learning_rate(cfg, processed.fetch_add(1, Ordering::Relaxed), total);
                                    let ctx = seq[j] as usize;
                                    input.load(c, &mut center);
                                    delta.iter_mut().for_each(|x| *x = 0.0);
                                    output.load(ctx, &mut target);
                                    let mut loss = target_step(&center, &mut target, 1.0, lr, &mut delta);
                                    output.store(ctx, &target);
                                    for _ in 0..cfg.negatives {
                                        let t = table.sample(&mut rng) as usize;
                                        if t == ctx {
                                            continue;
                                        }
                                        output.load(t, &mut target);
                                        loss += target_step(&center, &mut target, 0.0, lr, &mut delta);
                                        output.store(t, &target);
                                    }
                                    for (x, dx) in center.iter_mut().zip(&delta) {
                                        *x += dx;
                                    }
                                    input.store(c, &center);
                                    loss_sum += loss;
                                }
                            }
                        }
                        loss_sum
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training worker panicked")).sum()
        });
        epoch_losses.push(loss_sum / pairs_per_epoch as f64);
    }
    (input.into_vec(), epoch_losses)
}
