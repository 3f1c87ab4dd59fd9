//! Per-cycle evaluation of biomechanical form constraints.
//!
//! Each constraint bounds one statistic of one joint over a detected cycle.
//! Static joints are checked for stability: the population variance of the
//! primary DoF across the cycle, in squared degrees. Dynamic joints are
//! checked at the cycle's key frame, the extremum of the representative DoF
//! (the deepest point of a squat): either the absolute angle there or its
//! deviation from the reference trajectory's own key frame. A bound `[l, u]`
//! is violated exactly when the statistic falls strictly below `l` or
//! strictly above `u`; boundary values pass.

use serde::Serialize;

use crate::cycles::CycleRecord;
use crate::error::{Error, Result};
use crate::skeleton::{Constraint, ConstraintKind, Joint, KeyFrameRule};

/// Whether a constraint checks a stability statistic or a key-frame one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    Static,
    Dynamic,
}

/// Outcome of checking one constraint over one cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResult {
    pub joint: Joint,
    pub class: ConstraintClass,
    pub kind: ConstraintKind,
    /// The measured statistic: degrees for key-frame kinds, squared degrees
    /// for variance.
    pub delta: f64,
    pub lo: f64,
    pub hi: f64,
    pub violated: bool,
    /// Source frame the statistic was read at, for key-frame kinds.
    pub key_frame: Option<usize>,
    /// Signed distance from the statistic to the nearest bound when
    /// violated, zero otherwise. Positive means the statistic must rise.
    pub correction: f64,
}

fn apply_bounds(delta: f64, lo: f64, hi: f64) -> (bool, f64) {
    if delta < lo {
        (true, lo - delta)
    } else if delta > hi {
        (true, hi - delta)
    } else {
        (false, 0.0)
    }
}

/// Checks a static joint's stability over the cycle.
///
/// `series` is the joint's primary-DoF angle series in radians over the
/// whole session; the statistic is the population variance of its
/// `[i_s, i_e]` slice converted to degrees.
pub fn eval_static(
    constraint: &Constraint,
    cycle: &CycleRecord,
    series: &[f64],
) -> Result<ConstraintResult> {
    debug_assert_eq!(constraint.kind, ConstraintKind::Variance);
    if cycle.i_e >= series.len() || cycle.i_s > cycle.i_e {
        return Err(Error::EmptyCycle);
    }
    let slice = &series[cycle.i_s..=cycle.i_e];
    let mean = slice.iter().sum::<f64>() / slice.len() as f64;
    let delta = slice
        .iter()
        .map(|v| (v - mean).to_degrees().powi(2))
        .sum::<f64>()
        / slice.len() as f64;
    let (violated, correction) = apply_bounds(delta, constraint.lo, constraint.hi);
    Ok(ConstraintResult {
        joint: constraint.joint,
        class: ConstraintClass::Static,
        kind: constraint.kind,
        delta,
        lo: constraint.lo,
        hi: constraint.hi,
        violated,
        key_frame: None,
        correction,
    })
}

/// Frame index of the cycle's key extremum of `series` within
/// `[i_s, i_e]`; earliest frame wins ties.
pub fn key_frame_index(series: &[f64], i_s: usize, i_e: usize, rule: KeyFrameRule) -> Result<usize> {
    if i_s > i_e || i_e >= series.len() {
        return Err(Error::NoKeyFrame);
    }
    let mut best = i_s;
    for i in i_s + 1..=i_e {
        let better = match rule {
            KeyFrameRule::CycleMin => series[i] < series[best],
            KeyFrameRule::CycleMax => series[i] > series[best],
        };
        if better {
            best = i;
        }
    }
    Ok(best)
}

/// Checks a dynamic joint at the cycle's key frame.
///
/// The key frame is the extremum of `user_rep_series` (the representative
/// joint's primary DoF) within the cycle. For the absolute-angle kind the
/// statistic is the joint's angle there in degrees. For the deviation kind
/// it is the absolute difference, in degrees, from the reference joint
/// column at the reference's own key frame, located by the same extremum
/// rule over the whole reference; `reference` carries the joint column and
/// the representative column.
pub fn eval_dynamic(
    constraint: &Constraint,
    cycle: &CycleRecord,
    user_joint_series: &[f64],
    user_rep_series: &[f64],
    reference: Option<(&[f64], &[f64])>,
    rule: KeyFrameRule,
) -> Result<ConstraintResult> {
    debug_assert_ne!(constraint.kind, ConstraintKind::Variance);
    let i_key = key_frame_index(user_rep_series, cycle.i_s, cycle.i_e, rule)?;
    if i_key >= user_joint_series.len() {
        return Err(Error::NoKeyFrame);
    }
    let user_deg = user_joint_series[i_key].to_degrees();
    let delta = match constraint.kind {
        ConstraintKind::KeyFrameAngle => user_deg,
        ConstraintKind::KeyFrameDeviation => {
            let (ref_joint, ref_rep) = reference.ok_or_else(|| {
                Error::Schema(format!(
                    "deviation constraint on {} needs a reference trajectory",
                    constraint.joint.id()
                ))
            })?;
            let ref_key = key_frame_index(ref_rep, 0, ref_rep.len().saturating_sub(1), rule)?;
            (user_deg - ref_joint[ref_key].to_degrees()).abs()
        }
        ConstraintKind::Variance => unreachable!("gated by debug_assert"),
    };
    let (violated, correction) = apply_bounds(delta, constraint.lo, constraint.hi);
    Ok(ConstraintResult {
        joint: constraint.joint,
        class: ConstraintClass::Dynamic,
        kind: constraint.kind,
        delta,
        lo: constraint.lo,
        hi: constraint.hi,
        violated,
        key_frame: Some(i_key),
        correction,
    })
}
