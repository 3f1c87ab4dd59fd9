//! Exercise-specific joint selection.
//!
//! A small trainable scorer maps an exercise descriptor vector to one
//! importance score per joint; the top K=12 joints are selected once per
//! session and expanded to their DoF blocks. Without a visual backbone the
//! descriptor is synthetic but documented: a one-hot exercise id
//! concatenated with coarse statistics of the representative joint's
//! trajectory. The scorer is a 3-layer MLP (rectifier hiddens, logistic
//! output) trained with class-balanced binary cross-entropy and plain
//! gradient descent; once trained it is frozen for the session.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::skeleton::{Joint, JOINT_COUNT};

pub const HIDDEN1: usize = 512;
pub const HIDDEN2: usize = 256;
/// Probability clamp inside the cross-entropy, keeping log() finite.
pub const BCE_EPS: f64 = 1e-7;
/// Joints kept per session.
pub const TOP_K: usize = 12;
/// Hidden-unit dropout applied during training only.
pub const DROPOUT_RATE: f64 = 0.1;

/// Exercises the descriptor one-hot covers, in slot order.
pub const EXERCISE_IDS: [&str; 5] = ["squat", "pushup", "plank", "lunge", "high_knees"];
pub const DESCRIPTOR_STAT_COUNT: usize = 8;

/// Input width of the default descriptor layout.
pub fn descriptor_len() -> usize {
    EXERCISE_IDS.len() + DESCRIPTOR_STAT_COUNT
}

/// Coarse statistics of one angle trajectory: mean, population std, min,
/// max, range, mean |Δ|, max |Δ|, and zero-crossing rate about the mean.
pub fn trajectory_stats(series: &[f64]) -> Result<[f64; DESCRIPTOR_STAT_COUNT]> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut abs_sum, mut abs_max, mut crossings) = (0.0_f64, 0.0_f64, 0usize);
    for pair in series.windows(2) {
        let d = pair[1] - pair[0];
        abs_sum += d.abs();
        abs_max = abs_max.max(d.abs());
        if (pair[0] - mean).signum() != (pair[1] - mean).signum() {
            crossings += 1;
        }
    }
    let steps = (series.len() - 1).max(1) as f64;
    Ok([
        mean,
        var.sqrt(),
        min,
        max,
        max - min,
        abs_sum / steps,
        abs_max,
        crossings as f64 / steps,
    ])
}

/// Builds the scorer input: one-hot exercise slot then trajectory stats.
pub fn descriptor(exercise_id: &str, series: &[f64]) -> Result<Vec<f64>> {
    let slot = EXERCISE_IDS
        .iter()
        .position(|id| *id == exercise_id)
        .ok_or_else(|| Error::UnknownExercise(exercise_id.to_string()))?;
    let mut out = vec![0.0; descriptor_len()];
    out[slot] = 1.0;
    out[EXERCISE_IDS.len()..].copy_from_slice(&trajectory_stats(series)?);
    Ok(out)
}

/// Canonical 12-joint label sets shipped with the engine; also exported as
/// a data file for the training CLI.
pub fn label_table() -> Vec<(&'static str, [Joint; TOP_K])> {
    use Joint::*;
    vec![
        (
            "squat",
            [
                Pelvis, RightHip, RightKnee, RightAnkle, RightSubtalar, LeftHip, LeftKnee,
                LeftAnkle, LeftSubtalar, Lumbar, Thorax, Head,
            ],
        ),
        (
            "pushup",
            [
                Pelvis, RightHip, LeftHip, Lumbar, Thorax, Head, RightScapula, RightShoulder,
                RightElbow, LeftScapula, LeftShoulder, LeftElbow,
            ],
        ),
        (
            "plank",
            [
                Pelvis, RightHip, RightKnee, RightAnkle, RightSubtalar, LeftHip, LeftKnee,
                LeftAnkle, LeftSubtalar, Lumbar, Thorax, Head,
            ],
        ),
        (
            "lunge",
            [
                Pelvis, RightHip, RightKnee, RightAnkle, RightSubtalar, LeftHip, LeftKnee,
                LeftAnkle, LeftSubtalar, Lumbar, Thorax, Head,
            ],
        ),
        (
            "high_knees",
            [
                Pelvis, RightHip, RightKnee, RightAnkle, LeftHip, LeftKnee, LeftAnkle, Lumbar,
                Thorax, Head, RightShoulder, LeftShoulder,
            ],
        ),
    ]
}

/// Expands a joint list into a 24-slot membership mask.
pub fn label_mask(joints: &[Joint]) -> [bool; JOINT_COUNT] {
    let mut mask = [false; JOINT_COUNT];
    for j in joints {
        mask[j.index()] = true;
    }
    mask
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SalienceScorer {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
    pub w3: Mat,
    pub b3: Mat,
}

struct ForwardCache {
    x: Mat,
    z1: Mat,
    h1: Mat,
    z2: Mat,
    h2: Mat,
    s: Vec<f64>,
}

pub struct ScorerGrads {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
    pub w3: Mat,
    pub b3: Mat,
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl SalienceScorer {
    pub fn zeros(input_dim: usize) -> Self {
        SalienceScorer {
            w1: Mat::zeros(input_dim, HIDDEN1),
            b1: Mat::zeros(1, HIDDEN1),
            w2: Mat::zeros(HIDDEN1, HIDDEN2),
            b2: Mat::zeros(1, HIDDEN2),
            w3: Mat::zeros(HIDDEN2, JOINT_COUNT),
            b3: Mat::zeros(1, JOINT_COUNT),
        }
    }

    /// Seeded init: uniform Xavier with rectifier gain √2 on the hidden
    /// layers so activations keep their scale through depth, unit gain on
    /// the logistic output layer.
    pub fn init<R: Rng>(input_dim: usize, rng: &mut R) -> Self {
        let gain = std::f64::consts::SQRT_2;
        SalienceScorer {
            w1: Mat::xavier_uniform(input_dim, HIDDEN1, gain, rng),
            b1: Mat::zeros(1, HIDDEN1),
            w2: Mat::xavier_uniform(HIDDEN1, HIDDEN2, gain, rng),
            b2: Mat::zeros(1, HIDDEN2),
            w3: Mat::xavier_uniform(HIDDEN2, JOINT_COUNT, 1.0, rng),
            b3: Mat::zeros(1, JOINT_COUNT),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.w1.cols == HIDDEN1
            && self.b1.rows == 1
            && self.b1.cols == HIDDEN1
            && self.w2.rows == HIDDEN1
            && self.w2.cols == HIDDEN2
            && self.b2.rows == 1
            && self.b2.cols == HIDDEN2
            && self.w3.rows == HIDDEN2
            && self.w3.cols == JOINT_COUNT
            && self.b3.rows == 1
            && self.b3.cols == JOINT_COUNT
            && self.w1.data.len() == self.w1.rows * HIDDEN1;
        if !ok {
            return Err(Error::Schema("scorer checkpoint has inconsistent shapes".into()));
        }
        let finite = [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
            .iter()
            .all(|m| m.is_finite());
        if !finite {
            return Err(Error::NonFinite("scorer weights".into()));
        }
        Ok(())
    }

    fn forward(&self, features: &[f64], dropout: Option<(&[f64], &[f64])>) -> Result<ForwardCache> {
        if features.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scorer input".into()));
        }
        let x = Mat::from_vec(1, features.len(), features.to_vec());
        let z1 = x.matmul(&self.w1).add_row_broadcast(&self.b1);
        let mut h1 = z1.map(relu);
        if let Some((m1, _)) = dropout {
            for (h, m) in h1.data.iter_mut().zip(m1) {
                *h *= m;
            }
        }
        let z2 = h1.matmul(&self.w2).add_row_broadcast(&self.b2);
        let mut h2 = z2.map(relu);
        if let Some((_, m2)) = dropout {
            for (h, m) in h2.data.iter_mut().zip(m2) {
                *h *= m;
            }
        }
        let z3 = h2.matmul(&self.w3).add_row_broadcast(&self.b3);
        let s = z3.data.iter().map(|v| sigmoid(*v)).collect();
        Ok(ForwardCache { x, z1, h1, z2, h2, s })
    }

    /// Evaluation-mode forward: 24 importance scores, each in (0, 1).
    pub fn score(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(features, None)?.s)
    }

    /// Loss and parameter gradients for one example. `dropout` carries
    /// pre-scaled keep masks for the two hidden layers when training.
    pub fn loss_and_grads(
        &self,
        features: &[f64],
        labels: &[bool; JOINT_COUNT],
        dropout: Option<(&[f64], &[f64])>,
    ) -> Result<(f64, ScorerGrads)> {
        let cache = self.forward(features, dropout)?;
        let (loss, dloss_ds) = bce_loss(&cache.s, labels);
        let mut dz3 = Mat::zeros(1, JOINT_COUNT);
        for j in 0..JOINT_COUNT {
            let s = cache.s[j];
            let clamped = s < BCE_EPS || s > 1.0 - BCE_EPS;
            dz3.data[j] = if clamped { 0.0 } else { dloss_ds[j] * s * (1.0 - s) };
        }
        let dw3 = cache.h2.transpose().matmul(&dz3);
        let db3 = dz3.clone();
        let dh2 = dz3.matmul(&self.w3.transpose());
        let mut dz2 = dh2;
        for (g, z) in dz2.data.iter_mut().zip(&cache.z2.data) {
            if *z <= 0.0 {
                *g = 0.0;
            }
        }
        if let Some((_, m2)) = dropout {
            for (g, m) in dz2.data.iter_mut().zip(m2) {
                *g *= m;
            }
        }
        let dw2 = cache.h1.transpose().matmul(&dz2);
        let db2 = dz2.clone();
        let dh1 = dz2.matmul(&self.w2.transpose());
        let mut dz1 = dh1;
        for (g, z) in dz1.data.iter_mut().zip(&cache.z1.data) {
            if *z <= 0.0 {
                *g = 0.0;
            }
        }
        if let Some((m1, _)) = dropout {
            for (g, m) in dz1.data.iter_mut().zip(m1) {
                *g *= m;
            }
        }
        let dw1 = cache.x.transpose().matmul(&dz1);
        let db1 = dz1.clone();
        Ok((
            loss,
            ScorerGrads {
                w1: dw1,
                b1: db1,
                w2: dw2,
                b2: db2,
                w3: dw3,
                b3: db3,
            },
        ))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let scorer: SalienceScorer = serde_json::from_str(json)?;
        scorer.validate()?;
        Ok(scorer)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Class-balanced binary cross-entropy over the 24 joint scores.
///
/// Per-class weights are inversely proportional to class frequency in the
/// label vector (each present class contributes half the total weight);
/// when only one class appears both weights fall back to 1. Probabilities
/// clamp to [ε, 1−ε]. Returns the loss and dL/ds per score.
pub fn bce_loss(scores: &[f64], labels: &[bool; JOINT_COUNT]) -> (f64, Vec<f64>) {
    debug_assert_eq!(scores.len(), JOINT_COUNT);
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = JOINT_COUNT - n_pos;
    let (w_pos, w_neg) = if n_pos == 0 || n_neg == 0 {
        (1.0, 1.0)
    } else {
        (
            JOINT_COUNT as f64 / (2.0 * n_pos as f64),
            JOINT_COUNT as f64 / (2.0 * n_neg as f64),
        )
    };
    let mut loss = 0.0;
    let mut grad = vec![0.0; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let p = scores[j].clamp(BCE_EPS, 1.0 - BCE_EPS);
        let clamped = scores[j] < BCE_EPS || scores[j] > 1.0 - BCE_EPS;
        if labels[j] {
            loss += -w_pos * p.ln();
            grad[j] = if clamped { 0.0 } else { -w_pos / p };
        } else {
            loss += -w_neg * (1.0 - p).ln();
            grad[j] = if clamped { 0.0 } else { w_neg / (1.0 - p) };
        }
    }
    (loss, grad)
}

/// The frozen per-session joint choice with its DoF expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSelection {
    /// Exactly K joints, in canonical skeleton order.
    pub joints: Vec<Joint>,
    /// Union of the selected joints' DoF blocks, ascending.
    pub dofs: Vec<usize>,
}

/// Picks the K highest-scoring joints; equal scores break toward the
/// lower joint index. The selection is computed once per session.
pub fn select_topk(scores: &[f64], k: usize) -> Result<JointSelection> {
    if scores.len() != JOINT_COUNT {
        return Err(Error::DimMismatch {
            expected: JOINT_COUNT,
            got: scores.len(),
        });
    }
    if k == 0 || k > JOINT_COUNT {
        return Err(Error::BadK { k, max: JOINT_COUNT });
    }
    let mut order: Vec<usize> = (0..JOINT_COUNT).collect();
    order.sort_by(|a, b| {
        scores[*b]
            .partial_cmp(&scores[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut picked: Vec<usize> = order[..k].to_vec();
    picked.sort_unstable();
    let joints: Vec<Joint> = picked.iter().map(|i| Joint::from_index(*i).unwrap()).collect();
    let dofs = joints.iter().flat_map(|j| j.dof_range()).collect();
    Ok(JointSelection { joints, dofs })
}

/// One labelled training example: descriptor features plus the salient
/// joint set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SalienceExample {
    pub features: Vec<f64>,
    pub labels: Vec<Joint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SalienceDataset {
    pub schema: u32,
    pub examples: Vec<SalienceExample>,
}

impl SalienceDataset {
    pub fn from_json_str(json: &str) -> Result<Self> {
        let ds: SalienceDataset = serde_json::from_str(json)?;
        if ds.schema != 1 {
            return Err(Error::Schema(format!("unsupported dataset schema {}", ds.schema)));
        }
        if ds.examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = ds.examples[0].features.len();
        for ex in &ds.examples {
            if ex.features.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: ex.features.len(),
                });
            }
        }
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

fn dropout_masks<R: Rng>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let keep = 1.0 - DROPOUT_RATE;
    let mask = |rng: &mut R, n: usize| {
        (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    };
    (mask(rng, HIDDEN1), mask(rng, HIDDEN2))
}

/// One pass over the dataset in order, descending each example's gradient
/// at the fixed rate as it is visited; returns the mean pre-update loss.
/// Dropout masks are drawn fresh per example from `rng`.
pub fn train_epoch<R: Rng>(
    scorer: &mut SalienceScorer,
    dataset: &[(Vec<f64>, [bool; JOINT_COUNT])],
    lr: f64,
    rng: &mut R,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut loss_sum = 0.0;
    for (features, labels) in dataset {
        let (m1, m2) = dropout_masks(rng);
        let (loss, grads) = scorer.loss_and_grads(features, labels, Some((&m1, &m2)))?;
        loss_sum += loss;
        scorer.w1.add_scaled(&grads.w1, -lr);
        scorer.b1.add_scaled(&grads.b1, -lr);
        scorer.w2.add_scaled(&grads.w2, -lr);
        scorer.b2.add_scaled(&grads.b2, -lr);
        scorer.w3.add_scaled(&grads.w3, -lr);
        scorer.b3.add_scaled(&grads.b3, -lr);
    }
    Ok(loss_sum / dataset.len() as f64)
}

/// Stage-1 training: seeded init, fixed-rate full-batch gradient descent.
/// Returns the trained scorer and the per-epoch mean loss curve.
pub fn train_salience(
    dataset: &[(Vec<f64>, [bool; JOINT_COUNT])],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<(SalienceScorer, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scorer = SalienceScorer::init(dataset[0].0.len(), &mut rng);
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        losses.push(train_epoch(&mut scorer, dataset, lr, &mut rng)?);
    }
    Ok((scorer, losses))
}

/// Fraction of (example, joint) pairs where thresholding the score at 0.5
/// reproduces the label.
pub fn per_joint_accuracy(
    scorer: &SalienceScorer,
    dataset: &[(Vec<f64>, [bool; JOINT_COUNT])],
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for (features, labels) in dataset {
        let scores = scorer.score(features)?;
        for j in 0..JOINT_COUNT {
            if (scores[j] >= 0.5) == labels[j] {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (dataset.len() * JOINT_COUNT) as f64)
}

/// Parses a labels file: `{"schema":1,"labels":{"squat":["pelvis",...]}}`.
pub fn labels_from_json(json: &str) -> Result<BTreeMap<String, Vec<Joint>>> {
    #[derive(Deserialize)]
    struct LabelFile {
        schema: u32,
        labels: BTreeMap<String, Vec<Joint>>,
    }
    let file: LabelFile = serde_json::from_str(json)?;
    if file.schema != 1 {
        return Err(Error::Schema(format!("unsupported labels schema {}", file.schema)));
    }
    for (exercise, joints) in &file.labels {
        if joints.is_empty() {
            return Err(Error::Schema(format!("empty label set for {exercise}")));
        }
    }
    Ok(file.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixed_input(dim: usize) -> Vec<f64> {
        (0..dim).map(|i| ((i as f64) * 0.37).sin()).collect()
    }

    #[test]
    fn zero_weights_score_one_half_everywhere() {
        let scorer = SalienceScorer::zeros(13);
        let scores = scorer.score(&fixed_input(13)).unwrap();
        assert!(scores.iter().all(|s| *s == 0.5));
    }

    #[test]
    fn scores_stay_strictly_inside_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scorer = SalienceScorer::init(13, &mut rng);
        let scores = scorer.score(&fixed_input(13)).unwrap();
        assert!(scores.iter().all(|s| 0.0 < *s && *s < 1.0));
    }

    #[test]
    fn forward_matches_a_straight_line_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scorer = SalienceScorer::init(13, &mut rng);
        let x = fixed_input(13);

        let mut h1 = vec![0.0_f64; HIDDEN1];
        for j in 0..HIDDEN1 {
            let mut acc = scorer.b1.at(0, j);
            for i in 0..13 {
                acc += x[i] * scorer.w1.at(i, j);
            }
            h1[j] = acc.max(0.0);
        }
        let mut h2 = vec![0.0_f64; HIDDEN2];
        for j in 0..HIDDEN2 {
            let mut acc = scorer.b2.at(0, j);
            for i in 0..HIDDEN1 {
                acc += h1[i] * scorer.w2.at(i, j);
            }
            h2[j] = acc.max(0.0);
        }
        let mut expected = vec![0.0_f64; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            let mut acc = scorer.b3.at(0, j);
            for i in 0..HIDDEN2 {
                acc += h2[i] * scorer.w3.at(i, j);
            }
            expected[j] = 1.0 / (1.0 + (-acc).exp());
        }

        let scores = scorer.score(&x).unwrap();
        for (a, b) in scores.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_input_width_is_a_dim_mismatch() {
        let scorer = SalienceScorer::zeros(13);
        assert!(matches!(
            scorer.score(&fixed_input(10)),
            Err(Error::DimMismatch { expected: 13, got: 10 })
        ));
    }

    #[test]
    fn topk_takes_the_largest_scores() {
        let mut scores = vec![0.1; JOINT_COUNT];
        for (rank, idx) in [3usize, 7, 11, 20].iter().enumerate() {
            scores[*idx] = 0.9 - rank as f64 * 0.01;
        }
        let sel = select_topk(&scores, 4).unwrap();
        let indices: Vec<usize> = sel.joints.iter().map(|j| j.index()).collect();
        assert_eq!(indices, vec![3, 7, 11, 20]);
    }

    #[test]
    fn equal_scores_break_ties_toward_low_indices() {
        let scores = vec![0.5; JOINT_COUNT];
        let sel = select_topk(&scores, 3).unwrap();
        let indices: Vec<usize> = sel.joints.iter().map(|j| j.index()).collect();
        assert_eq!(indices, vec![0, 1, 2]);
    }

    #[test]
    fn bad_k_is_rejected() {
        let scores = vec![0.5; JOINT_COUNT];
        assert!(matches!(select_topk(&scores, 0), Err(Error::BadK { .. })));
        assert!(matches!(select_topk(&scores, 25), Err(Error::BadK { .. })));
        assert!(select_topk(&scores, 24).is_ok());
    }

    #[test]
    fn dof_expansion_is_the_union_of_blocks() {
        let mut scores = vec![0.0; JOINT_COUNT];
        scores[Joint::RightKnee.index()] = 1.0;
        scores[Joint::Lumbar.index()] = 0.9;
        let sel = select_topk(&scores, 2).unwrap();
        assert_eq!(sel.dofs, vec![6, 17, 18, 19]);
    }

    #[test]
    fn removing_a_joint_removes_exactly_its_block() {
        let mut scores = vec![0.0; JOINT_COUNT];
        scores[Joint::RightKnee.index()] = 1.0;
        scores[Joint::Lumbar.index()] = 0.9;
        scores[Joint::Pelvis.index()] = 0.8;
        let with = select_topk(&scores, 3).unwrap();
        let without = select_topk(&scores, 2).unwrap();
        let dropped: Vec<usize> = with
            .dofs
            .iter()
            .filter(|d| !without.dofs.contains(d))
            .cloned()
            .collect();
        let expected: Vec<usize> = Joint::Pelvis.dof_range().collect();
        assert_eq!(dropped, expected);
    }

    #[test]
    fn half_scores_give_the_closed_form_loss() {
        let scores = vec![0.5; JOINT_COUNT];
        let mut labels = [false; JOINT_COUNT];
        for j in 0..7 {
            labels[j] = true;
        }
        let (loss, _) = bce_loss(&scores, &labels);
        assert!((loss - 24.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let all_false = [false; JOINT_COUNT];
        let (loss2, _) = bce_loss(&scores, &all_false);
        assert!((loss2 - 24.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_cost_almost_nothing() {
        let mut labels = [false; JOINT_COUNT];
        let mut scores = vec![0.0; JOINT_COUNT];
        for j in 0..12 {
            labels[j] = true;
            scores[j] = 1.0;
        }
        let (loss, _) = bce_loss(&scores, &labels);
        let bound = 24.0 * (-(1.0 - BCE_EPS).ln());
        assert!(loss <= bound + 1e-15, "loss {loss} bound {bound}");
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dim = 9;
        for _ in 0..10 {
            let scorer = SalienceScorer::init(dim, &mut rng);
            let features: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut labels = [false; JOINT_COUNT];
            for l in labels.iter_mut() {
                *l = rng.random::<f64>() < 0.5;
            }
            let (_, grads) = scorer.loss_and_grads(&features, &labels, None).unwrap();

            let h = 1e-5;
            let mut worst: f64 = 0.0;
            for _ in 0..8 {
                let which = rng.random_range(0..3usize);
                let analytic_mat = match which {
                    0 => &grads.w1,
                    1 => &grads.w2,
                    _ => &grads.w3,
                };
                let idx = rng.random_range(0..analytic_mat.data.len());
                let analytic = analytic_mat.data[idx];
                let mut plus = scorer.clone();
                let mut minus = scorer.clone();
                match which {
                    0 => {
                        plus.w1.data[idx] += h;
                        minus.w1.data[idx] -= h;
                    }
                    1 => {
                        plus.w2.data[idx] += h;
                        minus.w2.data[idx] -= h;
                    }
                    _ => {
                        plus.w3.data[idx] += h;
                        minus.w3.data[idx] -= h;
                    }
                }
                let (lp, _) = plus.loss_and_grads(&features, &labels, None).unwrap();
                let (lm, _) = minus.loss_and_grads(&features, &labels, None).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-8);
                worst = worst.max((analytic - fd).abs() / denom);
            }
            assert!(worst <= 1e-4, "max relative error {worst}");
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let dataset = demo_dataset();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scorer = SalienceScorer::init(dataset[0].0.len(), &mut rng);
        let json_before = scorer.to_json_string().unwrap();
        train_epoch(&mut scorer, &dataset, 0.0, &mut rng).unwrap();
        assert_eq!(scorer.to_json_string().unwrap(), json_before);
    }

    #[test]
    fn an_extra_zero_rate_epoch_changes_nothing() {
        let dataset = demo_dataset();
        let (a, _) = train_salience(&dataset, 3, 0.3, 17).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut b = SalienceScorer::init(dataset[0].0.len(), &mut rng);
        for _ in 0..3 {
            train_epoch(&mut b, &dataset, 0.3, &mut rng).unwrap();
        }
        train_epoch(&mut b, &dataset, 0.0, &mut rng).unwrap();
        assert_eq!(
            a.to_json_string().unwrap(),
            b.to_json_string().unwrap()
        );
    }

    fn demo_dataset() -> Vec<(Vec<f64>, [bool; JOINT_COUNT])> {
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (slot, (exercise, joints)) in label_table().into_iter().enumerate() {
            let _ = exercise;
            for _ in 0..6 {
                let series: Vec<f64> = (0..90)
                    .map(|t| {
                        (t as f64 * (0.05 + slot as f64 * 0.03)).sin() * (0.4 + slot as f64 * 0.1)
                            + rng.random_range(-0.02..0.02)
                    })
                    .collect();
                let mut features = vec![0.0; descriptor_len()];
                features[slot] = 1.0;
                features[EXERCISE_IDS.len()..]
                    .copy_from_slice(&trajectory_stats(&series).unwrap());
                out.push((features, label_mask(&joints)));
            }
        }
        out
    }

    #[test]
    fn training_separates_the_descriptor_dataset() {
        let dataset = demo_dataset();
        let (scorer, losses) = train_salience(&dataset, 150, 0.05, 7).unwrap();

        let accuracy = per_joint_accuracy(&scorer, &dataset).unwrap();
        assert!(accuracy >= 0.95, "accuracy {accuracy}");

        let window = 10;
        let early: f64 = losses[..window].iter().sum::<f64>() / window as f64;
        let late: f64 = losses[losses.len() - window..].iter().sum::<f64>() / window as f64;
        assert!(late < early, "smoothed loss should fall: {early} -> {late}");

        for (slot, (exercise, joints)) in label_table().into_iter().enumerate() {
            let example = dataset
                .iter()
                .find(|(f, _)| f[slot] == 1.0)
                .unwrap_or_else(|| panic!("no example for {exercise}"));
            let scores = scorer.score(&example.0).unwrap();
            let sel = select_topk(&scores, TOP_K).unwrap();
            let mut expected: Vec<Joint> = joints.to_vec();
            expected.sort_by_key(|j| j.index());
            assert_eq!(sel.joints, expected, "top-12 mismatch for {exercise}");
        }
    }

    #[test]
    fn descriptor_concatenates_one_hot_and_stats() {
        let series: Vec<f64> = (0..50).map(|t| (t as f64 * 0.2).sin()).collect();
        let d = descriptor("pushup", &series).unwrap();
        assert_eq!(d.len(), descriptor_len());
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 1.0);
        let stats = trajectory_stats(&series).unwrap();
        assert_eq!(&d[EXERCISE_IDS.len()..], &stats[..]);
        assert!(matches!(
            descriptor("deadlift", &series),
            Err(Error::UnknownExercise(_))
        ));
    }

    #[test]
    fn stats_match_hand_values_on_a_ramp() {
        let series = vec![0.0, 1.0, 2.0, 3.0];
        let s = trajectory_stats(&series).unwrap();
        assert_eq!(s[0], 1.5);
        assert!((s[1] - (1.25_f64).sqrt()).abs() < 1e-12);
        assert_eq!(s[2], 0.0);
        assert_eq!(s[3], 3.0);
        assert_eq!(s[4], 3.0);
        assert_eq!(s[5], 1.0);
        assert_eq!(s[6], 1.0);
        assert!((s[7] - 1.0 / 3.0).abs() < 1e-12, "one crossing of the mean");
    }

    #[test]
    fn checkpoint_round_trips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let scorer = SalienceScorer::init(13, &mut rng);
        let json = scorer.to_json_string().unwrap();
        let back = SalienceScorer::from_json_str(&json).unwrap();
        assert_eq!(scorer.score(&fixed_input(13)).unwrap(), back.score(&fixed_input(13)).unwrap());
    }

    #[test]
    fn label_file_parses_and_matches_the_builtin_table() {
        let table = label_table();
        let mut labels = serde_json::Map::new();
        for (exercise, joints) in &table {
            let ids: Vec<serde_json::Value> = joints
                .iter()
                .map(|j| serde_json::Value::String(j.id().to_string()))
                .collect();
            labels.insert(exercise.to_string(), serde_json::Value::Array(ids));
        }
        let file = serde_json::json!({"schema": 1, "labels": labels});
        let parsed = labels_from_json(&file.to_string()).unwrap();
        assert_eq!(parsed.len(), table.len());
        assert_eq!(parsed["squat"].len(), TOP_K);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn topk_is_invariant_under_increasing_transforms(
            seed in 0u64..1000, k in 1usize..=24,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..JOINT_COUNT).map(|_| rng.random::<f64>()).collect();
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).atan() + 2.0).collect();
            let a = select_topk(&scores, k).unwrap();
            let b = select_topk(&transformed, k).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn topk_agrees_with_a_full_sort_oracle(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..JOINT_COUNT).map(|_| rng.random::<f64>()).collect();
            let sel = select_topk(&scores, TOP_K).unwrap();
            let mut ranked: Vec<usize> = (0..JOINT_COUNT).collect();
            ranked.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap());
            let mut expected: Vec<usize> = ranked[..TOP_K].to_vec();
            expected.sort_unstable();
            let got: Vec<usize> = sel.joints.iter().map(|j| j.index()).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn loss_is_nonnegative_and_gradient_signs_point_at_labels(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..JOINT_COUNT)
                .map(|_| rng.random_range(0.05..0.95))
                .collect();
            let mut labels = [false; JOINT_COUNT];
            for l in labels.iter_mut() {
                *l = rng.random::<f64>() < 0.4;
            }
            let (loss, grad) = bce_loss(&scores, &labels);
            prop_assert!(loss >= 0.0);
            for j in 0..JOINT_COUNT {
                if labels[j] {
                    prop_assert!(grad[j] < 0.0, "raising a positive's score lowers loss");
                } else {
                    prop_assert!(grad[j] > 0.0);
                }
            }
        }
    }
}
