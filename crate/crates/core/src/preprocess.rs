//! Frame ingestion, temporal windowing, Gaussian smoothing, and body-shape
//! handling.
//!
//! The input is a 30 fps stream of [`AngleFrame`]s. Downstream consumers see
//! two views of it: per-DoF scalar series smoothed with a Gaussian kernel,
//! and sparse [`KinematicWindow`]s of 12 frames sampled at 4 Hz ending at an
//! anchor frame. Body shape arrives either as per-frame coefficient vectors
//! that get pooled and mapped to measurements, or as direct measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Pose, DOF_COUNT};

/// Number of body-shape coefficients per frame.
pub const BETA_COUNT: usize = 10;

/// Number of frames in a full kinematic window.
pub const WINDOW_LEN: usize = 12;

/// Source-frame spacing of the window grid: 4 Hz sampled from a 30 fps clock.
pub const WINDOW_STRIDE: f64 = 30.0 / 4.0;

/// One ingested frame: pose, optional shape coefficients, and tracking
/// confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleFrame {
    /// Frame index on the 30 fps clock.
    pub t: usize,
    /// 46 Euler angles in radians.
    pub q: Pose,
    /// Shape coefficients, when the tracker produced them for this frame.
    pub beta: Option<[f64; BETA_COUNT]>,
    /// Tracking confidence in `[0, 1]`.
    pub confidence: f64,
}

impl AngleFrame {
    pub fn new(
        t: usize,
        q: Pose,
        beta: Option<[f64; BETA_COUNT]>,
        confidence: f64,
    ) -> Result<AngleFrame> {
        for (d, v) in q.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("frame {t}, dof {d}")));
            }
            if v.abs() > std::f64::consts::PI {
                return Err(Error::Schema(format!(
                    "frame {t}, dof {d}: angle {v} outside [-pi, pi]"
                )));
            }
        }
        if let Some(beta) = &beta {
            for (i, b) in beta.iter().enumerate() {
                if !b.is_finite() {
                    return Err(Error::NonFinite(format!("frame {t}, beta {i}")));
                }
            }
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Schema(format!(
                "frame {t}: confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(AngleFrame {
            t,
            q,
            beta,
            confidence,
        })
    }
}

#[derive(Deserialize)]
struct RawFrame {
    t: usize,
    q: Vec<f64>,
    #[serde(default)]
    beta: Option<Vec<f64>>,
    conf: f64,
}

/// Parses one JSON-Lines stream record,
/// `{"t":int,"q":[46 floats],"beta":[10 floats]?,"conf":float}`.
/// `line` is the 1-based line number used in error messages.
pub fn parse_frame_line(text: &str, line: usize) -> Result<AngleFrame> {
    let raw: RawFrame = serde_json::from_str(text).map_err(|e| Error::StreamFormat {
        line,
        msg: e.to_string(),
    })?;
    if raw.q.len() != DOF_COUNT {
        return Err(Error::StreamFormat {
            line,
            msg: format!("q has {} entries, expected {DOF_COUNT}", raw.q.len()),
        });
    }
    let mut q = [0.0; DOF_COUNT];
    q.copy_from_slice(&raw.q);
    let beta = match raw.beta {
        None => None,
        Some(b) => {
            if b.len() != BETA_COUNT {
                return Err(Error::StreamFormat {
                    line,
                    msg: format!("beta has {} entries, expected {BETA_COUNT}", b.len()),
                });
            }
            let mut arr = [0.0; BETA_COUNT];
            arr.copy_from_slice(&b);
            Some(arr)
        }
    };
    AngleFrame::new(raw.t, q, beta, raw.conf).map_err(|e| Error::StreamFormat {
        line,
        msg: e.to_string(),
    })
}

/// Serializes a frame to its JSON-Lines form (no trailing newline).
pub fn frame_to_line(frame: &AngleFrame) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("t".into(), serde_json::json!(frame.t));
    obj.insert("q".into(), serde_json::json!(frame.q.to_vec()));
    if let Some(beta) = &frame.beta {
        obj.insert("beta".into(), serde_json::json!(beta.to_vec()));
    }
    obj.insert("conf".into(), serde_json::json!(frame.confidence));
    serde_json::Value::Object(obj).to_string()
}

/// A sparse window of recent pose history: up to 12 frames sampled at 4 Hz
/// from the 30 fps stream, ending at the anchor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicWindow {
    /// Sampled frames in strictly increasing time order.
    pub frames: Vec<AngleFrame>,
    /// Mean of the shape coefficients of window frames that carry them, or
    /// `None` when no window frame has any.
    pub beta_bar: Option<[f64; BETA_COUNT]>,
    /// Anchor frame index the window ends at.
    pub t_end: usize,
    /// Set when the window is shorter than 12 distinct frames, either because
    /// the stream has not run long enough yet or because frames were dropped.
    pub warm_up: bool,
}

impl KinematicWindow {
    /// Feature vector: the window's poses flattened frame-major. Short
    /// warm-up windows are front-padded by repeating the oldest frame so the
    /// dimension is always `12 * 46`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(WINDOW_LEN * DOF_COUNT);
        let pad = WINDOW_LEN - self.frames.len();
        for _ in 0..pad {
            out.extend_from_slice(&self.frames[0].q);
        }
        for frame in &self.frames {
            out.extend_from_slice(&frame.q);
        }
        out
    }
}

/// Sample grid for a window anchored at `t_end`: nearest frame index to
/// `t_end - k * 7.5` for `k = 11..0`, rounding ties toward the older frame.
/// Entries before the start of the stream are reported as negative.
pub fn window_grid(t_end: usize) -> [i64; WINDOW_LEN] {
    let mut grid = [0i64; WINDOW_LEN];
    for (slot, k) in (0..WINDOW_LEN).rev().enumerate() {
        let exact = t_end as f64 - k as f64 * WINDOW_STRIDE;
        grid[slot] = (exact - 0.5).ceil() as i64;
    }
    grid
}

/// Builds the kinematic window ending at `t_end` from the buffered stream.
///
/// `stream` holds retained frames in strictly increasing `t` order, possibly
/// with gaps where frames were dropped. Each grid point takes the most recent
/// frame at or before it; grid points before the first buffered frame clamp
/// to it. Duplicate picks collapse, so the window can be shorter than 12
/// frames, in which case it is flagged as a warm-up window. Causal: frames
/// after `t_end` are never consulted.
pub fn make_window(stream: &[AngleFrame], t_end: usize) -> Result<KinematicWindow> {
    if stream.is_empty() {
        return Err(Error::EmptySeries);
    }
    let t_first = stream[0].t as i64;
    let grid = window_grid(t_end);
    let mut frames: Vec<AngleFrame> = Vec::with_capacity(WINDOW_LEN);
    let mut clamped = false;
    for &g in &grid {
        let g = if g < t_first {
            clamped = true;
            t_first
        } else {
            g
        };
        let pick = match stream.binary_search_by_key(&g, |f| f.t as i64) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let frame = &stream[pick];
        if frames.last().map(|f| f.t) != Some(frame.t) {
            frames.push(frame.clone());
        }
    }
    let warm_up = clamped || frames.len() < WINDOW_LEN;
    let beta_bar = pool_beta(&frames);
    Ok(KinematicWindow {
        frames,
        beta_bar,
        t_end,
        warm_up,
    })
}

/// Mean of the shape coefficients of frames that carry them.
fn pool_beta(frames: &[AngleFrame]) -> Option<[f64; BETA_COUNT]> {
    let mut sum = [0.0; BETA_COUNT];
    let mut n = 0usize;
    for frame in frames {
        if let Some(beta) = &frame.beta {
            for (s, b) in sum.iter_mut().zip(beta) {
                *s += b;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    for s in sum.iter_mut() {
        *s /= n as f64;
    }
    Some(sum)
}

/// Gaussian-smooths a scalar series.
///
/// The kernel is truncated at four standard deviations and renormalized to
/// sum to one; boundaries use reflect padding, so constants pass through
/// unchanged. Output length equals input length.
pub fn gaussian_smooth(series: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    assert!(sigma > 0.0, "sigma must be positive");
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let n = series.len() as i64;
    let mut out = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        let mut acc = 0.0;
        for (j, w) in kernel.iter().enumerate() {
            let p = i as i64 + j as i64 - radius as i64;
            acc += w * series[reflect_index(p, n)];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Normalized Gaussian kernel of standard deviation `sigma`, truncated at
/// `radius = floor(4 * sigma + 0.5)` taps on each side.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma + 0.5).floor() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for j in -radius..=radius {
        let x = j as f64 / sigma;
        kernel.push((-0.5 * x * x).exp());
    }
    let total: f64 = kernel.iter().sum();
    for w in kernel.iter_mut() {
        *w /= total;
    }
    kernel
}

/// Maps an out-of-range index into `0..n` by reflecting across the array
/// edges, mirroring between the boundary samples and their nearest neighbors
/// (`d c b a | a b c d | d c b a`).
fn reflect_index(p: i64, n: i64) -> usize {
    let m = p.rem_euclid(2 * n);
    if m < n {
        m as usize
    } else {
        (2 * n - 1 - m) as usize
    }
}

/// Standard deviation, in frames, of the smoothing kernel applied to every
/// angle series before peak detection, scoring, and constraint evaluation.
pub const SMOOTH_SIGMA: f64 = 2.0;

/// Incrementally maintained Gaussian-smoothed view of a growing series.
///
/// After each [`StreamingSmoother::push`], `smoothed()` equals
/// `gaussian_smooth` applied to the whole series pushed so far, bit for bit.
/// Only the trailing `radius + 1` entries can still change when more samples
/// arrive; everything older is final.
#[derive(Debug, Clone)]
pub struct StreamingSmoother {
    raw: Vec<f64>,
    smoothed: Vec<f64>,
    kernel: Vec<f64>,
}

impl StreamingSmoother {
    pub fn new(sigma: f64) -> StreamingSmoother {
        StreamingSmoother {
            raw: Vec::new(),
            smoothed: Vec::new(),
            kernel: gaussian_kernel(sigma),
        }
    }

    pub fn push(&mut self, value: f64) {
        self.raw.push(value);
        self.smoothed.push(0.0);
        let radius = self.kernel.len() / 2;
        let n = self.raw.len() as i64;
        let start = self.raw.len().saturating_sub(radius + 1);
        for i in start..self.raw.len() {
            let mut acc = 0.0;
            for (j, w) in self.kernel.iter().enumerate() {
                let p = i as i64 + j as i64 - radius as i64;
                acc += w * self.raw[reflect_index(p, n)];
            }
            self.smoothed[i] = acc;
        }
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn smoothed(&self) -> &[f64] {
        &self.smoothed
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Smooths every DoF column of a pose series, returning columns.
pub fn smooth_pose_series(poses: &[Pose], sigma: f64) -> Result<Vec<Vec<f64>>> {
    if poses.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut columns = Vec::with_capacity(DOF_COUNT);
    let mut scratch = Vec::with_capacity(poses.len());
    for d in 0..DOF_COUNT {
        scratch.clear();
        scratch.extend(poses.iter().map(|p| p[d]));
        columns.push(gaussian_smooth(&scratch, sigma)?);
    }
    Ok(columns)
}

/// Five body measurements used to ground coaching advice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphometricProfile {
    pub height_m: f64,
    pub mass_kg: f64,
    pub chest_m: f64,
    pub waist_m: f64,
    pub hip_m: f64,
}

impl MorphometricProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("height_m", self.height_m),
            ("mass_kg", self.mass_kg),
            ("chest_m", self.chest_m),
            ("waist_m", self.waist_m),
            ("hip_m", self.hip_m),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::MorphOutOfRange(format!("{name} = {v}")));
            }
        }
        if !(0.5..=2.5).contains(&self.height_m) {
            return Err(Error::MorphOutOfRange(format!(
                "height_m = {} outside [0.5, 2.5]",
                self.height_m
            )));
        }
        Ok(())
    }

    /// Parses the direct-measurement JSON form,
    /// `{"height_m":..,"mass_kg":..,"chest_m":..,"waist_m":..,"hip_m":..}`.
    pub fn from_json_str(json: &str) -> Result<MorphometricProfile> {
        let profile: MorphometricProfile = serde_json::from_str(json)?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Affine map from pooled shape coefficients to a measurement profile.
///
/// Stands in for mesh-based virtual measurement: `profile = base + M * beta`.
/// The bundled constants give a plausible adult profile at `beta = 0` and
/// gentle per-coefficient adjustments; they are calibration data, not
/// anatomy.
#[derive(Debug, Clone)]
pub struct MorphStub {
    pub base: [f64; 5],
    /// Rows in profile-field order (height, mass, chest, waist, hip).
    pub matrix: [[f64; BETA_COUNT]; 5],
}

impl Default for MorphStub {
    fn default() -> MorphStub {
        MorphStub {
            base: [1.72, 68.0, 0.95, 0.80, 0.96],
            matrix: [
                [0.060, 0.005, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [4.50, 2.80, 1.10, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.010, 0.025, 0.008, 0.004, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.008, 0.030, 0.010, 0.0, 0.003, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.009, 0.028, 0.006, 0.0, 0.0, 0.002, 0.0, 0.0, 0.0, 0.0],
            ],
        }
    }
}

impl MorphStub {
    pub fn apply(&self, beta_bar: &[f64; BETA_COUNT]) -> Result<MorphometricProfile> {
        let mut values = self.base;
        for (row, value) in values.iter_mut().enumerate() {
            for (b, m) in beta_bar.iter().zip(&self.matrix[row]) {
                *value += b * m;
            }
        }
        let profile = MorphometricProfile {
            height_m: values[0],
            mass_kg: values[1],
            chest_m: values[2],
            waist_m: values[3],
            hip_m: values[4],
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// Maps pooled shape coefficients to measurements via the bundled stub.
pub fn morphometrics_from_beta(beta_bar: &[f64; BETA_COUNT]) -> Result<MorphometricProfile> {
    MorphStub::default().apply(beta_bar)
}
