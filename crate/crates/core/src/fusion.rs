//! Toy-scale conditioning of query tokens on biomechanical context.
//!
//! A residual multi-head cross-attention block lets a small autoregressive
//! token model consult context tokens (standing in for the morphometric
//! context rows) while predicting its stream. The block is numerically
//! verified, not a text generator: the vocabulary is a handful of control
//! and word tokens, the decoder is a single linear head, and training runs
//! a copy task — emit the feedback token exactly when a violation flag is
//! present in the context. The loss is autoregressive cross-entropy with
//! continuation tokens down-weighted by α so the model learns to speak up
//! rather than defer forever.
//!
//! Attention scores scale by 1/√d of the model dimension, not the per-head
//! dimension; gradients for every projection and the embedding table are
//! exact and checked against central finite differences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Projection-matrix init gain.
pub const XAVIER_GAIN: f64 = 0.1;
/// Embedding and decoder-head init gains; larger than the projections so
/// the context signal survives the two small value/output products.
pub const EMBED_GAIN: f64 = 2.0;
pub const DECODER_GAIN: f64 = 2.0;
/// Continuation-token weight in the training loss.
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_LR: f64 = 2e-5;
pub const DEFAULT_BATCH: usize = 8;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

/// Toy vocabulary. `<next>` is the continuation token; `<feedback>` is what
/// the model must emit when the context carries `<flag>`.
pub const VOCAB: [&str; 8] = [
    "<next>",
    "<feedback>",
    "<flag>",
    "<bos>",
    "rep",
    "go",
    "hold",
    "set",
];
pub const TOK_NEXT: usize = 0;
pub const TOK_FEEDBACK: usize = 1;
pub const TOK_FLAG: usize = 2;
pub const TOK_BOS: usize = 3;
pub const WORD_TOKENS: std::ops::Range<usize> = 4..8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    Continuation,
    Feedback,
}

/// Per-vocabulary-id loss classes: only `<next>` is a continuation token.
pub fn default_class_map() -> Vec<TokenClass> {
    (0..VOCAB.len())
        .map(|id| {
            if id == TOK_NEXT {
                TokenClass::Continuation
            } else {
                TokenClass::Feedback
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossAttnBlock {
    pub heads: usize,
    pub d_model: usize,
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
    pub w_o: Mat,
}

pub struct BlockGrads {
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
    pub w_o: Mat,
}

struct AttnCache {
    queries: Mat,
    context: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Vec<Mat>,
    heads_out: Mat,
}

impl CrossAttnBlock {
    pub fn init<R: Rng>(d_model: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::Schema(format!(
                "model dim {d_model} not divisible into {heads} heads"
            )));
        }
        Ok(CrossAttnBlock {
            heads,
            d_model,
            w_q: Mat::xavier_uniform(d_model, d_model, XAVIER_GAIN, rng),
            w_k: Mat::xavier_uniform(d_model, d_model, XAVIER_GAIN, rng),
            w_v: Mat::xavier_uniform(d_model, d_model, XAVIER_GAIN, rng),
            w_o: Mat::xavier_uniform(d_model, d_model, XAVIER_GAIN, rng),
        })
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    fn check_shapes(&self, queries: &Mat, context: &Mat) -> Result<()> {
        if queries.cols != self.d_model {
            return Err(Error::DimMismatch {
                expected: self.d_model,
                got: queries.cols,
            });
        }
        if context.cols != self.d_model {
            return Err(Error::DimMismatch {
                expected: self.d_model,
                got: context.cols,
            });
        }
        if queries.rows == 0 || context.rows == 0 {
            return Err(Error::EmptySeries);
        }
        if !queries.is_finite() || !context.is_finite() {
            return Err(Error::NonFinite("attention input".into()));
        }
        Ok(())
    }

    fn forward_cached(&self, queries: &Mat, context: &Mat) -> Result<(Mat, AttnCache)> {
        self.check_shapes(queries, context)?;
        let d_k = self.head_dim();
        let scale = 1.0 / (self.d_model as f64).sqrt();
        let q = queries.matmul(&self.w_q);
        let k = context.matmul(&self.w_k);
        let v = context.matmul(&self.w_v);
        let mut heads_out = Mat::zeros(queries.rows, self.d_model);
        let mut attn = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = q.col_slice(h * d_k, d_k);
            let kh = k.col_slice(h * d_k, d_k);
            let vh = v.col_slice(h * d_k, d_k);
            let scores = qh.matmul(&kh.transpose()).scale(scale);
            let a = softmax_rows(&scores);
            heads_out.set_col_slice(h * d_k, &a.matmul(&vh));
            attn.push(a);
        }
        let out = queries.add(&heads_out.matmul(&self.w_o));
        Ok((
            out,
            AttnCache {
                queries: queries.clone(),
                context: context.clone(),
                q,
                k,
                v,
                attn,
                heads_out,
            },
        ))
    }

    /// Residual cross-attention: queries + softmax(QKᵀ/√d)·V·Wᵒ.
    pub fn forward(&self, queries: &Mat, context: &Mat) -> Result<Mat> {
        Ok(self.forward_cached(queries, context)?.0)
    }

    /// Per-head attention matrices (rows: queries, cols: context tokens).
    pub fn attention(&self, queries: &Mat, context: &Mat) -> Result<Vec<Mat>> {
        Ok(self.forward_cached(queries, context)?.1.attn)
    }

    fn backward(&self, cache: &AttnCache, d_out: &Mat) -> (BlockGrads, Mat, Mat) {
        let d_k = self.head_dim();
        let scale = 1.0 / (self.d_model as f64).sqrt();
        let mut d_queries = d_out.clone();
        let d_heads = d_out.matmul(&self.w_o.transpose());
        let dw_o = cache.heads_out.transpose().matmul(d_out);
        let mut dq = Mat::zeros(cache.q.rows, self.d_model);
        let mut dk = Mat::zeros(cache.k.rows, self.d_model);
        let mut dv = Mat::zeros(cache.v.rows, self.d_model);
        for h in 0..self.heads {
            let qh = cache.q.col_slice(h * d_k, d_k);
            let kh = cache.k.col_slice(h * d_k, d_k);
            let vh = cache.v.col_slice(h * d_k, d_k);
            let a = &cache.attn[h];
            let d_hh = d_heads.col_slice(h * d_k, d_k);
            let d_a = d_hh.matmul(&vh.transpose());
            dv.set_col_slice(h * d_k, &a.transpose().matmul(&d_hh));
            let mut d_scores = Mat::zeros(a.rows, a.cols);
            for r in 0..a.rows {
                let dot: f64 = (0..a.cols).map(|c| d_a.at(r, c) * a.at(r, c)).sum();
                for c in 0..a.cols {
                    d_scores.set(r, c, a.at(r, c) * (d_a.at(r, c) - dot));
                }
            }
            dq.set_col_slice(h * d_k, &d_scores.matmul(&kh).scale(scale));
            dk.set_col_slice(h * d_k, &d_scores.transpose().matmul(&qh).scale(scale));
        }
        let dw_q = cache.queries.transpose().matmul(&dq);
        let dw_k = cache.context.transpose().matmul(&dk);
        let dw_v = cache.context.transpose().matmul(&dv);
        d_queries.add_assign(&dq.matmul(&self.w_q.transpose()));
        let mut d_context = dk.matmul(&self.w_k.transpose());
        d_context.add_assign(&dv.matmul(&self.w_v.transpose()));
        (
            BlockGrads {
                w_q: dw_q,
                w_k: dw_k,
                w_v: dw_v,
                w_o: dw_o,
            },
            d_queries,
            d_context,
        )
    }
}

fn softmax_rows(scores: &Mat) -> Mat {
    let mut out = scores.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Autoregressive cross-entropy with continuation targets weighted by α.
///
/// `logits` has one row per prediction step; `targets` the matching token
/// ids; `class_map` assigns each vocabulary id a class. Returns the summed
/// weighted loss and its gradient w.r.t. the logits.
pub fn weighted_ce(
    logits: &Mat,
    targets: &[usize],
    class_map: &[TokenClass],
    alpha: f64,
) -> Result<(f64, Mat)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Schema(format!("alpha {alpha} outside (0, 1]")));
    }
    if logits.cols != class_map.len() {
        return Err(Error::DimMismatch {
            expected: class_map.len(),
            got: logits.cols,
        });
    }
    if logits.rows != targets.len() {
        return Err(Error::DimMismatch {
            expected: logits.rows,
            got: targets.len(),
        });
    }
    let vocab = logits.cols;
    let mut loss = 0.0;
    let mut grad = Mat::zeros(logits.rows, vocab);
    for (t, target) in targets.iter().enumerate() {
        if *target >= vocab {
            return Err(Error::BadToken {
                id: *target,
                vocab,
            });
        }
        let w = match class_map[*target] {
            TokenClass::Continuation => alpha,
            TokenClass::Feedback => 1.0,
        };
        let row = logits.row(t);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += w * (log_z - row[*target]);
        for c in 0..vocab {
            let p = (row[c] - log_z).exp();
            let indicator = if c == *target { 1.0 } else { 0.0 };
            grad.set(t, c, w * (p - indicator));
        }
    }
    Ok((loss, grad))
}

/// The full toy model: token embeddings, the attention block, and a linear
/// decoder head over the vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionModel {
    pub embed: Mat,
    pub block: CrossAttnBlock,
    pub w_dec: Mat,
    pub b_dec: Mat,
}

pub struct FusionGrads {
    pub embed: Mat,
    pub block: BlockGrads,
    pub w_dec: Mat,
    pub b_dec: Mat,
}

impl FusionModel {
    pub fn init<R: Rng>(d_model: usize, heads: usize, rng: &mut R) -> Result<Self> {
        let vocab = VOCAB.len();
        Ok(FusionModel {
            embed: Mat::xavier_uniform(vocab, d_model, EMBED_GAIN, rng),
            block: CrossAttnBlock::init(d_model, heads, rng)?,
            w_dec: Mat::xavier_uniform(d_model, vocab, DECODER_GAIN, rng),
            b_dec: Mat::zeros(1, vocab),
        })
    }

    fn embed_rows(&self, tokens: &[usize]) -> Result<Mat> {
        let vocab = self.embed.rows;
        let mut out = Mat::zeros(tokens.len(), self.embed.cols);
        for (i, tok) in tokens.iter().enumerate() {
            if *tok >= vocab {
                return Err(Error::BadToken { id: *tok, vocab });
            }
            out.row_mut(i).copy_from_slice(self.embed.row(*tok));
        }
        Ok(out)
    }

    /// Teacher-forced logits for every input position.
    pub fn logits(&self, tokens: &[usize], context: &[usize]) -> Result<Mat> {
        let x = self.embed_rows(tokens)?;
        let m = self.embed_rows(context)?;
        let z = self.block.forward(&x, &m)?;
        Ok(z.matmul(&self.w_dec).add_row_broadcast(&self.b_dec))
    }

    /// Loss of predicting `tokens[1..]` from the prefix, with gradients for
    /// every parameter.
    pub fn loss_and_grads(
        &self,
        tokens: &[usize],
        context: &[usize],
        class_map: &[TokenClass],
        alpha: f64,
    ) -> Result<(f64, FusionGrads)> {
        if tokens.len() < 2 {
            return Err(Error::TooShort {
                len: tokens.len(),
                min: 2,
            });
        }
        let x = self.embed_rows(tokens)?;
        let m = self.embed_rows(context)?;
        let (z, cache) = self.block.forward_cached(&x, &m)?;
        let logits = z.matmul(&self.w_dec).add_row_broadcast(&self.b_dec);
        let steps = tokens.len() - 1;
        let pred_logits = Mat::from_vec(
            steps,
            logits.cols,
            logits.data[..steps * logits.cols].to_vec(),
        );
        let (loss, d_pred) = weighted_ce(&pred_logits, &tokens[1..], class_map, alpha)?;
        let mut d_logits = Mat::zeros(logits.rows, logits.cols);
        for r in 0..steps {
            d_logits.row_mut(r).copy_from_slice(d_pred.row(r));
        }
        let dw_dec = z.transpose().matmul(&d_logits);
        let db_dec = d_logits.col_sum();
        let dz = d_logits.matmul(&self.w_dec.transpose());
        let (block_grads, dx, dm) = self.block.backward(&cache, &dz);
        let mut d_embed = Mat::zeros(self.embed.rows, self.embed.cols);
        for (i, tok) in tokens.iter().enumerate() {
            for c in 0..d_embed.cols {
                let cur = d_embed.at(*tok, c);
                d_embed.set(*tok, c, cur + dx.at(i, c));
            }
        }
        for (j, tok) in context.iter().enumerate() {
            for c in 0..d_embed.cols {
                let cur = d_embed.at(*tok, c);
                d_embed.set(*tok, c, cur + dm.at(j, c));
            }
        }
        Ok((
            loss,
            FusionGrads {
                embed: d_embed,
                block: block_grads,
                w_dec: dw_dec,
                b_dec: db_dec,
            },
        ))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let model: FusionModel = serde_json::from_str(json)?;
        if model.block.heads == 0 || model.block.d_model % model.block.heads != 0 {
            return Err(Error::Schema("fusion checkpoint has inconsistent head split".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Adam with decoupled weight decay, one moment pair per parameter tensor.
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    moments: Vec<(Mat, Mat)>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            moments: shapes
                .iter()
                .map(|(r, c)| (Mat::zeros(*r, *c), Mat::zeros(*r, *c)))
                .collect(),
        }
    }

    /// One update over parallel (parameter, gradient, decay?) triples.
    pub fn step(&mut self, params: &mut [(&mut Mat, &Mat, bool)]) {
        assert_eq!(params.len(), self.moments.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((param, grad, decay), (m, v)) in params.iter_mut().zip(&mut self.moments) {
            for i in 0..param.data.len() {
                let g = grad.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * g;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m.data[i] / bc1;
                let v_hat = v.data[i] / bc2;
                let mut update = self.lr * m_hat / (v_hat.sqrt() + self.eps);
                if *decay {
                    update += self.lr * self.weight_decay * param.data[i];
                }
                param.data[i] -= update;
            }
        }
    }
}

/// One copy-task sample: a three-token stream and two context tokens.
/// The final token is `<feedback>` exactly when `<flag>` is in the context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionSample {
    pub tokens: Vec<usize>,
    pub context: Vec<usize>,
    pub violated: bool,
}

/// Seeded copy-task sampler; `p_violation` sets the feedback frequency.
/// The stream prefix is fixed so the final-token decision can only come
/// from attending to the context.
pub fn make_copy_task<R: Rng>(n: usize, p_violation: f64, rng: &mut R) -> Vec<FusionSample> {
    (0..n)
        .map(|_| {
            let violated = rng.random::<f64>() < p_violation;
            let filler = rng.random_range(WORD_TOKENS);
            let mut context = if violated {
                vec![TOK_FLAG, filler]
            } else {
                vec![rng.random_range(WORD_TOKENS), filler]
            };
            if rng.random::<bool>() {
                context.swap(0, 1);
            }
            let y = if violated { TOK_FEEDBACK } else { TOK_NEXT };
            FusionSample {
                tokens: vec![TOK_BOS, WORD_TOKENS.start, y],
                context,
                violated,
            }
        })
        .collect()
}

/// Fraction of samples whose final-token prediction is exactly right.
pub fn copy_task_accuracy(model: &FusionModel, samples: &[FusionSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for s in samples {
        let logits = model.logits(&s.tokens, &s.context)?;
        let row = logits.row(s.tokens.len() - 2);
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if argmax == *s.tokens.last().unwrap() {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Recall on the feedback class: of the violated samples, how many predict
/// `<feedback>` at the final step.
pub fn feedback_recall(model: &FusionModel, samples: &[FusionSample]) -> Result<f64> {
    let violated: Vec<&FusionSample> = samples.iter().filter(|s| s.violated).collect();
    if violated.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for s in &violated {
        let logits = model.logits(&s.tokens, &s.context)?;
        let row = logits.row(s.tokens.len() - 2);
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if argmax == TOK_FEEDBACK {
            hits += 1;
        }
    }
    Ok(hits as f64 / violated.len() as f64)
}

/// Stage-2 training: seeded init, AdamW over minibatches of the copy task.
/// Returns the model and the per-step mean batch loss.
pub fn train_fusion(
    dataset: &[FusionSample],
    steps: usize,
    d_model: usize,
    heads: usize,
    lr: f64,
    alpha: f64,
    seed: u64,
) -> Result<(FusionModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = FusionModel::init(d_model, heads, &mut rng)?;
    let class_map = default_class_map();
    let vocab = VOCAB.len();
    let mut opt = AdamW::new(
        lr,
        DEFAULT_WEIGHT_DECAY,
        &[
            (vocab, d_model),
            (d_model, d_model),
            (d_model, d_model),
            (d_model, d_model),
            (d_model, d_model),
            (d_model, vocab),
            (1, vocab),
        ],
    );
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut batch_loss = 0.0;
        let mut acc: Option<FusionGrads> = None;
        for _ in 0..DEFAULT_BATCH {
            let sample = &dataset[rng.random_range(0..dataset.len())];
            let (loss, grads) =
                model.loss_and_grads(&sample.tokens, &sample.context, &class_map, alpha)?;
            batch_loss += loss;
            match &mut acc {
                None => acc = Some(grads),
                Some(a) => {
                    a.embed.add_assign(&grads.embed);
                    a.block.w_q.add_assign(&grads.block.w_q);
                    a.block.w_k.add_assign(&grads.block.w_k);
                    a.block.w_v.add_assign(&grads.block.w_v);
                    a.block.w_o.add_assign(&grads.block.w_o);
                    a.w_dec.add_assign(&grads.w_dec);
                    a.b_dec.add_assign(&grads.b_dec);
                }
            }
        }
        let mut grads = acc.unwrap();
        let scale = 1.0 / DEFAULT_BATCH as f64;
        grads.embed = grads.embed.scale(scale);
        grads.block.w_q = grads.block.w_q.scale(scale);
        grads.block.w_k = grads.block.w_k.scale(scale);
        grads.block.w_v = grads.block.w_v.scale(scale);
        grads.block.w_o = grads.block.w_o.scale(scale);
        grads.w_dec = grads.w_dec.scale(scale);
        grads.b_dec = grads.b_dec.scale(scale);
        opt.step(&mut [
            (&mut model.embed, &grads.embed, true),
            (&mut model.block.w_q, &grads.block.w_q, true),
            (&mut model.block.w_k, &grads.block.w_k, true),
            (&mut model.block.w_v, &grads.block.w_v, true),
            (&mut model.block.w_o, &grads.block.w_o, true),
            (&mut model.w_dec, &grads.w_dec, true),
            (&mut model.b_dec, &grads.b_dec, false),
        ]);
        losses.push(batch_loss / DEFAULT_BATCH as f64);
    }
    Ok((model, losses))
}
