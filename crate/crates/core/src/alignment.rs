//! Time normalization of user repetitions against a reference trajectory and
//! the four-component cycle quality score.
//!
//! A detected repetition is resampled onto the reference's frame count with
//! the affine index map that hits both endpoints, then compared to the
//! reference over the selected DoF columns: cosine similarity of z-scored
//! profiles, per-DoF Pearson correlation, velocity (frame difference)
//! alignment, and range-of-motion ratio. The weighted blend of the four is
//! the cycle quality.

use crate::cycles::CycleRecord;
use crate::error::{Error, Result};

/// Weights of the four quality components, in blend order: cosine, Pearson,
/// velocity, amplitude.
pub const QUALITY_WEIGHTS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

/// A user repetition resampled onto the reference timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedCycle {
    /// `n_ref` rows, one per reference index; one column per selected DoF.
    pub rows: Vec<Vec<f64>>,
    /// Source span and target length of the affine index map.
    pub i_s: usize,
    pub i_e: usize,
    pub n_ref: usize,
    /// The repetition this alignment came from.
    pub source: CycleRecord,
}

/// Resamples the cycle's span of each DoF column onto `n_ref` samples.
///
/// Reference index `k` (1-based, `1..=n_ref`) maps to the source position
/// `phi(k) = i_s + (k-1) * (i_e - i_s) / (n_ref - 1)`, evaluated by linear
/// interpolation between the floor and ceiling frames. The first and last
/// rows equal the boundary frames exactly.
pub fn resample(columns: &[&[f64]], cycle: &CycleRecord, n_ref: usize) -> Result<AlignedCycle> {
    if cycle.i_s >= cycle.i_e {
        return Err(Error::DegenerateCycle(format!(
            "cycle [{}, {}] has no extent",
            cycle.i_s, cycle.i_e
        )));
    }
    if n_ref < 2 {
        return Err(Error::BadReference(n_ref));
    }
    for column in columns {
        if column.len() <= cycle.i_e {
            return Err(Error::DimMismatch {
                expected: cycle.i_e + 1,
                got: column.len(),
            });
        }
    }
    let span = (cycle.i_e - cycle.i_s) as f64;
    let mut rows = Vec::with_capacity(n_ref);
    for k in 1..=n_ref {
        let phi = cycle.i_s as f64 + (k - 1) as f64 * span / (n_ref - 1) as f64;
        let lo = phi.floor() as usize;
        let hi = phi.ceil() as usize;
        let frac = phi - lo as f64;
        let mut row = Vec::with_capacity(columns.len());
        for column in columns {
            row.push(column[lo] + frac * (column[hi.min(cycle.i_e)] - column[lo]));
        }
        rows.push(row);
    }
    Ok(AlignedCycle {
        rows,
        i_s: cycle.i_s,
        i_e: cycle.i_e,
        n_ref,
        source: cycle.clone(),
    })
}

/// The four quality components and their weighted blend, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub sim_cos: f64,
    pub sim_pearson: f64,
    pub sim_vel: f64,
    pub sim_amp: f64,
    pub s_cycle: f64,
}

/// Scores an aligned user repetition against reference columns.
///
/// `user` and `reference` are row-major matrices with the same shape:
/// one row per reference index, one column per selected DoF.
pub fn quality_score(user: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<QualityScore> {
    if user.len() != reference.len() || user.is_empty() {
        return Err(Error::DimMismatch {
            expected: reference.len(),
            got: user.len(),
        });
    }
    let dofs = user[0].len();
    if dofs == 0 || reference[0].len() != dofs {
        return Err(Error::DimMismatch {
            expected: dofs.max(1),
            got: reference[0].len(),
        });
    }

    let user_cols = to_columns(user);
    let ref_cols = to_columns(reference);

    let sim_cos = zscore_cosine(&user_cols, &ref_cols);
    let sim_pearson = mean_pearson(&user_cols, &ref_cols);
    let user_diff: Vec<Vec<f64>> = user_cols.iter().map(|c| diff(c)).collect();
    let ref_diff: Vec<Vec<f64>> = ref_cols.iter().map(|c| diff(c)).collect();
    let sim_vel = zscore_cosine(&user_diff, &ref_diff);
    let sim_amp = mean_rom_ratio(&user_cols, &ref_cols);

    let blend = QUALITY_WEIGHTS[0] * sim_cos
        + QUALITY_WEIGHTS[1] * sim_pearson
        + QUALITY_WEIGHTS[2] * sim_vel
        + QUALITY_WEIGHTS[3] * sim_amp;
    Ok(QualityScore {
        sim_cos,
        sim_pearson,
        sim_vel,
        sim_amp,
        s_cycle: blend.clamp(0.0, 1.0),
    })
}

/// Index of the highest-quality cycle; earliest wins ties.
pub fn best_cycle(scores: &[QualityScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, score) in scores.iter().enumerate() {
        if best.is_none_or(|b| score.s_cycle > scores[b].s_cycle) {
            best = Some(i);
        }
    }
    best
}

fn to_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dofs = rows[0].len();
    (0..dofs)
        .map(|d| rows.iter().map(|r| r[d]).collect())
        .collect()
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

fn population_std(series: &[f64], mean: f64) -> f64 {
    (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / series.len() as f64).sqrt()
}

fn diff(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Z-scores each column, concatenates, and takes the clamped cosine
/// similarity. A column with zero spread z-scores to zeros; if that leaves a
/// whole side at zero norm, two zero sides agree perfectly and one does not
/// agree at all.
fn zscore_cosine(a_cols: &[Vec<f64>], b_cols: &[Vec<f64>]) -> f64 {
    let a: Vec<f64> = a_cols.iter().flat_map(|c| zscore(c)).collect();
    let b: Vec<f64> = b_cols.iter().flat_map(|c| zscore(c)).collect();
    let norm_a = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_a == 0.0 && norm_b == 0.0 {
        return 1.0;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    (dot / (norm_a * norm_b)).clamp(0.0, 1.0)
}

fn zscore(series: &[f64]) -> Vec<f64> {
    let m = mean(series);
    let s = population_std(series, m);
    if s == 0.0 {
        return vec![0.0; series.len()];
    }
    series.iter().map(|v| (v - m) / s).collect()
}

/// Per-DoF Pearson correlation averaged across DoFs, clamped to `[0, 1]`.
/// A pair where either side is constant contributes 1 when both are constant
/// with equal means and 0 otherwise.
fn mean_pearson(a_cols: &[Vec<f64>], b_cols: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (a, b) in a_cols.iter().zip(b_cols) {
        let (ma, mb) = (mean(a), mean(b));
        let (sa, sb) = (population_std(a, ma), population_std(b, mb));
        total += if sa == 0.0 || sb == 0.0 {
            if sa == 0.0 && sb == 0.0 && (ma - mb).abs() <= 1e-9 {
                1.0
            } else {
                0.0
            }
        } else {
            let cov = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / a.len() as f64;
            cov / (sa * sb)
        };
    }
    (total / a_cols.len() as f64).clamp(0.0, 1.0)
}

/// Mean over DoFs of the range-of-motion ratio `min(rom_a, rom_b) /
/// max(rom_a, rom_b)`, with two zero ranges agreeing perfectly and a zero
/// range against a moving one not agreeing at all.
fn mean_rom_ratio(a_cols: &[Vec<f64>], b_cols: &[Vec<f64>]) -> f64 {
    let rom = |c: &[f64]| {
        let max = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    };
    let mut total = 0.0;
    for (a, b) in a_cols.iter().zip(b_cols) {
        let (ra, rb) = (rom(a), rom(b));
        total += if ra == 0.0 && rb == 0.0 {
            1.0
        } else if ra == 0.0 || rb == 0.0 {
            0.0
        } else {
            ra.min(rb) / ra.max(rb)
        };
    }
    total / a_cols.len() as f64
}
