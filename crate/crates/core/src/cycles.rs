//! Repetition detection on the representative joint's angle series.
//!
//! Repetitive and alternating exercises are segmented by prominence-filtered
//! peak detection: a repetition is the span between two adjacent retained
//! valleys that bracket exactly one retained peak. Alternating exercises
//! additionally split each repetition into side phases at zero crossings of
//! the mean-removed signal. Static exercises are segmented into sustained
//! holds by thresholding a rolling standard deviation.
//!
//! All detectors expect the series to be smoothed upstream (the streaming
//! detector does this itself); they never smooth internally.

use crate::error::{Error, Result};
use crate::preprocess::{StreamingSmoother, SMOOTH_SIGMA};
use crate::skeleton::CycleMode;

/// Minimum topographic prominence, in radians, for a retained extremum.
pub const P_MIN_RAD: f64 = 0.1;

/// Minimum spacing, in frames, between retained extrema of the same kind.
pub const D_MIN_FRAMES: usize = 5;

/// Repetition length bounds, in frames: 0.8 s to 5.0 s at 30 fps.
pub const MIN_CYCLE_FRAMES: usize = 24;
pub const MAX_CYCLE_FRAMES: usize = 150;

/// Trailing window length, in frames, for the rolling standard deviation
/// used by static-hold detection.
pub const HOLD_WINDOW: usize = 10;

/// Minimum length, in frames, of a quiet run that counts as a hold.
pub const HOLD_MIN_FRAMES: usize = 10;

/// Percentile of the rolling standard deviations used as the quiet
/// threshold.
pub const HOLD_PERCENTILE: f64 = 30.0;

/// Frames a detected repetition must age before the streaming detector
/// emits it, insulating emission against boundary effects near the stream
/// head.
pub const EMIT_CONFIRM_FRAMES: usize = 24;

/// Side label of one phase of an alternating repetition. The mapping from
/// signal sign to body side is conventional: the phase where the
/// mean-removed representative signal starts non-negative is labeled
/// `Right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSide {
    Right,
    Left,
}

impl PhaseSide {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseSide::Right => "right",
            PhaseSide::Left => "left",
        }
    }

    fn opposite(self) -> PhaseSide {
        match self {
            PhaseSide::Right => PhaseSide::Left,
            PhaseSide::Left => PhaseSide::Right,
        }
    }
}

/// One phase of an alternating repetition: an inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub start: usize,
    pub end: usize,
    pub side: PhaseSide,
}

/// One detected repetition or hold, in source-frame indices (inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub i_s: usize,
    pub i_e: usize,
    pub kind: CycleMode,
    /// Side phases partitioning `[i_s, i_e]`; present for alternating
    /// repetitions once phases have been attached.
    pub phases: Option<Vec<Phase>>,
    /// 1-based ordinal in time order.
    pub rep_index: usize,
}

impl CycleRecord {
    /// Number of frames the record spans, inclusive of both ends.
    pub fn len(&self) -> usize {
        self.i_e - self.i_s + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Retained extrema of a series: peak and valley indices with the
/// topographic prominence of each.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<usize>,
    pub peak_prominences: Vec<f64>,
    pub valleys: Vec<usize>,
    pub valley_prominences: Vec<f64>,
}

/// Finds prominence-filtered, distance-pruned peaks and valleys.
///
/// A peak is an interior local maximum (plateaus collapse to their middle
/// sample). Its prominence is its height above the key saddle: on each side
/// the series is scanned to the nearest strictly higher sample, taking the
/// minimum along the way; if both sides find higher ground the prominence
/// base is the higher of the two minima, if only one side does its minimum
/// alone is the base, and a peak with no higher ground anywhere stands on
/// the lowest sample either side reaches. Peaks with prominence below
/// `p_min` are discarded; the rest are pruned so retained peaks are at
/// least `d_min` frames apart, resolving conflicts in favor of higher
/// prominence (earlier index on ties). Valleys are the peaks of the negated
/// series.
pub fn find_peaks(series: &[f64], p_min: f64, d_min: usize) -> Result<PeakSet> {
    if series.len() < 3 {
        return Err(Error::TooShort {
            len: series.len(),
            min: 3,
        });
    }
    let (peaks, peak_prominences) = retained_maxima(series, p_min, d_min);
    let negated: Vec<f64> = series.iter().map(|v| -v).collect();
    let (valleys, valley_prominences) = retained_maxima(&negated, p_min, d_min);
    Ok(PeakSet {
        peaks,
        peak_prominences,
        valleys,
        valley_prominences,
    })
}

fn retained_maxima(series: &[f64], p_min: f64, d_min: usize) -> (Vec<usize>, Vec<f64>) {
    let candidates = local_maxima(series);
    let with_prominence: Vec<(usize, f64)> = candidates
        .into_iter()
        .map(|i| (i, prominence(series, i)))
        .filter(|&(_, p)| p >= p_min)
        .collect();
    prune_by_distance(with_prominence, d_min)
}

/// Interior local maxima; a flat plateau reports its middle sample. Runs
/// touching either end of the series do not count.
fn local_maxima(series: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = series.len();
    let mut i = 1;
    while i + 1 < n {
        if series[i] > series[i - 1] {
            let mut j = i;
            while j + 1 < n && series[j + 1] == series[i] {
                j += 1;
            }
            if j + 1 < n && series[j + 1] < series[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Topographic prominence of the local maximum at `peak`.
fn prominence(series: &[f64], peak: usize) -> f64 {
    let height = series[peak];
    let mut left_min = f64::INFINITY;
    let mut left_closed = false;
    for i in (0..peak).rev() {
        if series[i] > height {
            left_closed = true;
            break;
        }
        left_min = left_min.min(series[i]);
    }
    let mut right_min = f64::INFINITY;
    let mut right_closed = false;
    for &v in &series[peak + 1..] {
        if v > height {
            right_closed = true;
            break;
        }
        right_min = right_min.min(v);
    }
    let base = match (left_closed, right_closed) {
        (true, true) => left_min.max(right_min),
        (true, false) => left_min,
        (false, true) => right_min,
        (false, false) => left_min.min(right_min),
    };
    height - base
}

/// Keeps a maximal subset of candidates spaced at least `d_min` apart,
/// giving higher-prominence candidates priority (earlier index on ties).
/// Returns indices and prominences in index order.
fn prune_by_distance(candidates: Vec<(usize, f64)>, d_min: usize) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .1
            .partial_cmp(&candidates[a].1)
            .unwrap()
            .then(candidates[a].0.cmp(&candidates[b].0))
    });
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for idx in order {
        let (i, p) = candidates[idx];
        if kept.iter().all(|&(k, _)| i.abs_diff(k) >= d_min) {
            kept.push((i, p));
        }
    }
    kept.sort_by_key(|&(i, _)| i);
    kept.into_iter().unzip()
}

/// Segments a smoothed representative-joint series into repetitions.
///
/// A repetition spans two adjacent retained valleys that bracket exactly one
/// retained peak; spans outside the repetition length bounds are dropped.
/// Adjacent repetitions share their boundary valley frame. Returns an empty
/// list when the series is too short to analyze or contains no repetitions.
pub fn segment_cycles(series: &[f64], mode: CycleMode) -> Vec<CycleRecord> {
    debug_assert!(mode != CycleMode::StaticHold);
    let Ok(peak_set) = find_peaks(series, P_MIN_RAD, D_MIN_FRAMES) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for pair in peak_set.valleys.windows(2) {
        let (v0, v1) = (pair[0], pair[1]);
        let interior = peak_set
            .peaks
            .iter()
            .filter(|&&p| p > v0 && p < v1)
            .count();
        let len = v1 - v0 + 1;
        if interior == 1 && (MIN_CYCLE_FRAMES..=MAX_CYCLE_FRAMES).contains(&len) {
            out.push(CycleRecord {
                i_s: v0,
                i_e: v1,
                kind: mode,
                phases: None,
                rep_index: out.len() + 1,
            });
        }
    }
    out
}

/// Splits one repetition of an alternating exercise into side phases.
///
/// The cycle's slice of `series` has its mean removed; maximal runs of equal
/// sign become phases, except leading and trailing runs shorter than 3
/// frames, which merge into their neighbor. Sides alternate starting from
/// the sign of the first run: non-negative start maps to `Right`.
pub fn segment_phases(series: &[f64], cycle: &CycleRecord) -> Result<Vec<Phase>> {
    let slice = &series[cycle.i_s..=cycle.i_e];
    let mean = slice.iter().sum::<f64>() / slice.len() as f64;
    let positive: Vec<bool> = slice.iter().map(|&v| v - mean >= 0.0).collect();
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    for (i, &sign) in positive.iter().enumerate() {
        match runs.last_mut() {
            Some((_, end, s)) if *s == sign => *end = i,
            _ => runs.push((i, i, sign)),
        }
    }
    if runs.len() <= 1 {
        return Err(Error::DegenerateCycle(format!(
            "no zero crossing in [{}, {}]",
            cycle.i_s, cycle.i_e
        )));
    }
    while runs.len() > 1 && runs[0].1 - runs[0].0 + 1 < 3 {
        let (start, _, _) = runs.remove(0);
        runs[0].0 = start;
    }
    while runs.len() > 1 && runs[runs.len() - 1].1 - runs[runs.len() - 1].0 + 1 < 3 {
        let (_, end, _) = runs.pop().unwrap();
        runs.last_mut().unwrap().1 = end;
    }
    if runs.len() <= 1 {
        return Err(Error::DegenerateCycle(format!(
            "single phase left in [{}, {}]",
            cycle.i_s, cycle.i_e
        )));
    }
    let mut side = if runs[0].2 {
        PhaseSide::Right
    } else {
        PhaseSide::Left
    };
    let mut phases = Vec::with_capacity(runs.len());
    for (start, end, _) in runs {
        phases.push(Phase {
            start: cycle.i_s + start,
            end: cycle.i_s + end,
            side,
        });
        side = side.opposite();
    }
    Ok(phases)
}

/// Trailing rolling standard deviation (population) over windows of `w`
/// frames; entry `k` describes source frames `k ..= k + w - 1`.
pub fn rolling_std(series: &[f64], w: usize) -> Result<Vec<f64>> {
    if series.len() < w {
        return Err(Error::TooShort {
            len: series.len(),
            min: w,
        });
    }
    let mut out = Vec::with_capacity(series.len() - w + 1);
    for window in series.windows(w) {
        let mean = window.iter().sum::<f64>() / w as f64;
        let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64;
        out.push(var.sqrt());
    }
    Ok(out)
}

/// Segments a static exercise into sustained holds.
///
/// A frame is quiet when the rolling standard deviation of the trailing
/// 10-frame window ending at it is at or below the 30th percentile of all
/// such deviations. Maximal quiet runs of at least 10 frames become holds;
/// hold lengths are not subject to the repetition length bounds.
pub fn detect_static_hold(series: &[f64]) -> Result<Vec<CycleRecord>> {
    let stds = rolling_std(series, HOLD_WINDOW)?;
    let mut sorted = stds.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let epsilon = percentile(&sorted, HOLD_PERCENTILE);
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (k, &std) in stds.iter().chain(std::iter::once(&f64::INFINITY)).enumerate() {
        if std <= epsilon {
            run_start.get_or_insert(k);
        } else if let Some(start) = run_start.take() {
            let len = k - start;
            if len >= HOLD_MIN_FRAMES {
                out.push(CycleRecord {
                    i_s: start + HOLD_WINDOW - 1,
                    i_e: k - 1 + HOLD_WINDOW - 1,
                    kind: CycleMode::StaticHold,
                    phases: None,
                    rep_index: out.len() + 1,
                });
            }
        }
    }
    Ok(out)
}

/// Linear-interpolation percentile of an ascending-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Incremental repetition detector over a growing raw angle series.
///
/// Each pushed sample is smoothed in place; cycle detection then reruns on
/// the smoothed prefix and any repetition whose closing valley has aged
/// [`EMIT_CONFIRM_FRAMES`] frames is emitted, in time order, exactly once.
/// Because detection is a pure function of the smoothed prefix and old
/// samples never change retroactively, the emitted records match what batch
/// detection finds on the full series. Static-hold mode needs the global
/// deviation distribution, so its holds only appear from
/// [`StreamingCycleDetector::finalize`].
#[derive(Debug, Clone)]
pub struct StreamingCycleDetector {
    mode: CycleMode,
    smoother: StreamingSmoother,
    emitted: usize,
}

impl StreamingCycleDetector {
    pub fn new(mode: CycleMode) -> StreamingCycleDetector {
        StreamingCycleDetector {
            mode,
            smoother: StreamingSmoother::new(SMOOTH_SIGMA),
            emitted: 0,
        }
    }

    /// The smoothed series over everything pushed so far.
    pub fn smoothed(&self) -> &[f64] {
        self.smoother.smoothed()
    }

    pub fn len(&self) -> usize {
        self.smoother.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smoother.is_empty()
    }

    /// Ingests the next raw sample and returns repetitions that became
    /// final with it.
    pub fn push(&mut self, value: f64) -> Vec<CycleRecord> {
        self.smoother.push(value);
        if self.mode == CycleMode::StaticHold {
            return Vec::new();
        }
        let t = self.smoother.len() - 1;
        let cycles = segment_cycles(self.smoother.smoothed(), self.mode);
        let mut out = Vec::new();
        while self.emitted < cycles.len()
            && cycles[self.emitted].i_e + EMIT_CONFIRM_FRAMES <= t
        {
            out.push(self.attach_phases(cycles[self.emitted].clone()));
            self.emitted += 1;
        }
        out
    }

    /// Flushes every remaining repetition (or, in static-hold mode, all
    /// holds) at end of stream.
    pub fn finalize(&mut self) -> Vec<CycleRecord> {
        if self.mode == CycleMode::StaticHold {
            return detect_static_hold(self.smoother.smoothed()).unwrap_or_default();
        }
        let cycles = segment_cycles(self.smoother.smoothed(), self.mode);
        let out: Vec<CycleRecord> = cycles[self.emitted.min(cycles.len())..]
            .iter()
            .map(|c| self.attach_phases(c.clone()))
            .collect();
        self.emitted = cycles.len();
        out
    }

    fn attach_phases(&self, mut cycle: CycleRecord) -> CycleRecord {
        if self.mode == CycleMode::Alternating {
            cycle.phases = segment_phases(self.smoother.smoothed(), &cycle).ok();
        }
        cycle
    }
}

/// Batch counterpart of the streaming detector: smooths the raw series and
/// segments it according to the exercise's cycle mode.
pub fn detect_cycles(raw_series: &[f64], mode: CycleMode) -> Result<Vec<CycleRecord>> {
    let smoothed = crate::preprocess::gaussian_smooth(raw_series, SMOOTH_SIGMA)?;
    match mode {
        CycleMode::StaticHold => detect_static_hold(&smoothed),
        _ => {
            let mut cycles = segment_cycles(&smoothed, mode);
            if mode == CycleMode::Alternating {
                for cycle in cycles.iter_mut() {
                    cycle.phases = segment_phases(&smoothed, cycle).ok();
                }
            }
            Ok(cycles)
        }
    }
}
