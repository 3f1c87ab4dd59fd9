//! Synthetic session generator and bundled exercise catalog.
//!
//! Sessions are built from rule-based motion profiles: every moving DoF
//! traces half-sine arcs between rest angles, stationary joints carry a
//! small phase-locked sway, and seeded Gaussian noise is layered on top.
//! Repetition boundaries are exact by construction (arcs meet at sharp
//! single-frame valleys), so each session ships its own ground truth:
//! cycle spans, injected errors, and the timestamps where feedback is due.
//!
//! Error injection works backwards from the exercise's constraint table:
//! a key-frame injection rescales the offending joint's arc so the
//! measured angle lands `magnitude` degrees past the violated bound, and a
//! wobble injection adds an oscillation whose standard deviation exceeds
//! the stability bound by `magnitude` degrees. Clean repetitions satisfy
//! every constraint by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{AngleFrame, BETA_COUNT};
use crate::skeleton::{
    Constraint, ConstraintKind, CycleMode, ExerciseConfig, Joint, KeyFrameRule, Pose,
    ReferenceTrajectory, DOF_COUNT, FPS,
};

/// Degrees an injection lands past the violated bound at minimum.
pub const MIN_ERROR_MARGIN_DEG: f64 = 2.0;
/// Default overshoot for injected errors.
pub const DEFAULT_ERROR_MAGNITUDE_DEG: f64 = 4.0;
/// Sway amplitude on stationary joints, degrees.
const STATIC_SWAY_DEG: f64 = 1.5;
/// Wobble oscillation frequency, Hz.
const WOBBLE_HZ: f64 = 3.0;
/// Seconds a static-hold wobble lasts.
const WOBBLE_DURATION_S: f64 = 1.0;

/// What kind of form error to inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    /// Rescale one repetition's arc so the key-frame statistic breaks its
    /// bound.
    KeyFrame,
    /// Shake a stationary joint past its variance bound.
    Wobble,
}

/// One planned error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    /// 1-based repetition to corrupt; ignored for static holds.
    #[serde(default)]
    pub rep: usize,
    pub kind: InjectionKind,
    /// Target joint; defaults to the first constraint of the matching
    /// kind in the exercise's table.
    #[serde(default)]
    pub joint: Option<Joint>,
    /// Degrees past the violated bound; must be at least 2.
    #[serde(default = "default_magnitude")]
    pub magnitude_deg: f64,
    /// Wobble onset in seconds, for static holds.
    #[serde(default)]
    pub at_s: Option<f64>,
}

fn default_magnitude() -> f64 {
    DEFAULT_ERROR_MAGNITUDE_DEG
}

/// Error plan file: `{"schema":1,"errors":[...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorPlan {
    pub schema: u32,
    pub errors: Vec<InjectionSpec>,
}

impl ErrorPlan {
    pub fn from_json_str(json: &str) -> Result<ErrorPlan> {
        let plan: ErrorPlan = serde_json::from_str(json)?;
        if plan.schema != 1 {
            return Err(Error::Schema(format!(
                "unsupported error-plan schema {}",
                plan.schema
            )));
        }
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<ErrorPlan> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Full parameterization of one synthetic session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub exercise_id: String,
    /// Repetition count; for static holds, ignored in favor of
    /// `duration_s`.
    pub reps: usize,
    /// Seconds per repetition.
    pub period_s: f64,
    /// Lead-in/lead-out rest, seconds.
    pub rest_s: f64,
    /// Per-frame Gaussian noise standard deviation, degrees.
    pub noise_deg: f64,
    /// Hold length for static exercises, seconds.
    pub duration_s: f64,
    /// Attach body-shape coefficients to every frame.
    pub with_morph: bool,
    pub errors: Vec<InjectionSpec>,
    pub seed: u64,
}

impl SessionSpec {
    pub fn new(exercise_id: &str, reps: usize) -> SessionSpec {
        SessionSpec {
            exercise_id: exercise_id.to_string(),
            reps,
            period_s: 2.0,
            rest_s: 0.7,
            noise_deg: 0.5,
            duration_s: 10.0,
            with_morph: true,
            errors: Vec::new(),
            seed: 7,
        }
    }
}

/// Ground truth for one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCycle {
    /// 1-based repetition ordinal.
    pub rep: usize,
    /// Inclusive frame span.
    pub i_s: usize,
    pub i_e: usize,
    /// Whether an error was injected into this repetition.
    pub corrupted: bool,
}

/// A generated session with its ground truth attached.
#[derive(Debug, Clone)]
pub struct SyntheticSession {
    pub spec: SessionSpec,
    pub frames: Vec<AngleFrame>,
    pub truth_cycles: Vec<TruthCycle>,
    /// Seconds at which corrective feedback is due, one per injection.
    pub truth_feedback_s: Vec<f64>,
}

impl SyntheticSession {
    /// The session as a JSON-Lines stream, one frame per line.
    pub fn stream_text(&self) -> String {
        let mut out = String::new();
        for frame in &self.frames {
            out.push_str(&crate::preprocess::frame_to_line(frame));
            out.push('\n');
        }
        out
    }

    pub fn write_stream(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.stream_text())?;
        Ok(())
    }

    /// Truth timestamps as JSON lines, `{"t_s":..}` each.
    pub fn truth_text(&self) -> String {
        let mut out = String::new();
        for t in &self.truth_feedback_s {
            out.push_str(&format!("{{\"t_s\":{t}}}\n"));
        }
        out
    }

    pub fn write_truth(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.truth_text())?;
        Ok(())
    }
}

/// Which raises of an alternating exercise a DoF moves in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activation {
    /// Every repetition (all repetitive-mode DoFs).
    Both,
    /// Right-side raises only.
    Right,
    /// Left-side raises only.
    Left,
    /// Every raise, with the sign flipping per side.
    Signed,
}

/// One moving DoF: rest angle plus arc amplitude, degrees.
#[derive(Debug, Clone, Copy)]
struct MovingDof {
    dof: usize,
    base_deg: f64,
    amp_deg: f64,
    activation: Activation,
}

/// Rule-based description of how an exercise is performed.
struct MotionProfile {
    config: ExerciseConfig,
    moving: Vec<MovingDof>,
    /// Rest angles for DoFs not listed in `moving`, degrees.
    rest_pose: [f64; DOF_COUNT],
}

pub const EXERCISES: [&str; 5] = ["squat", "pushup", "plank", "lunge", "high_knees"];

fn config(
    id: &str,
    mode: CycleMode,
    representative: Joint,
    rule: KeyFrameRule,
    statics: &[Joint],
    dynamics: &[Joint],
    constraints: Vec<Constraint>,
) -> ExerciseConfig {
    ExerciseConfig {
        schema: 1,
        exercise_id: id.to_string(),
        cycle_mode: mode,
        representative_joint: representative,
        key_frame_rule: rule,
        static_joints: statics.to_vec(),
        dynamic_joints: dynamics.to_vec(),
        constraints,
        reference_id: format!("{id}_ref"),
        min_confidence: 0.5,
    }
}

fn c(joint: Joint, kind: ConstraintKind, lo: f64, hi: f64) -> Constraint {
    Constraint { joint, kind, lo, hi }
}

fn profile(exercise_id: &str) -> Result<MotionProfile> {
    use ConstraintKind::{KeyFrameAngle, KeyFrameDeviation, Variance};
    use Joint::*;
    let rest_pose = [0.0; DOF_COUNT];
    let both = |dof: usize, base: f64, amp: f64| MovingDof {
        dof,
        base_deg: base,
        amp_deg: amp,
        activation: Activation::Both,
    };
    match exercise_id {
        "squat" => Ok(MotionProfile {
            config: config(
                "squat",
                CycleMode::Repetitive,
                RightKnee,
                KeyFrameRule::CycleMax,
                &[Pelvis, Lumbar, Thorax, Head],
                &[
                    RightHip, LeftHip, RightKnee, LeftKnee, RightAnkle, LeftAnkle,
                    RightSubtalar, LeftSubtalar,
                ],
                vec![
                    c(RightKnee, KeyFrameAngle, 90.0, 150.0),
                    c(LeftKnee, KeyFrameAngle, 90.0, 150.0),
                    c(RightHip, KeyFrameDeviation, 0.0, 15.0),
                    c(LeftHip, KeyFrameDeviation, 0.0, 15.0),
                    c(RightAnkle, KeyFrameDeviation, 0.0, 10.0),
                    c(LeftAnkle, KeyFrameDeviation, 0.0, 10.0),
                    c(Lumbar, Variance, 0.0, 25.0),
                    c(Thorax, Variance, 0.0, 25.0),
                ],
            ),
            moving: vec![
                both(RightKnee.primary_dof(), 10.0, 90.0),
                both(LeftKnee.primary_dof(), 10.0, 90.0),
                both(RightHip.primary_dof(), 5.0, 80.0),
                both(LeftHip.primary_dof(), 5.0, 80.0),
                both(RightAnkle.primary_dof(), 5.0, 25.0),
                both(LeftAnkle.primary_dof(), 5.0, 25.0),
                both(RightSubtalar.primary_dof(), 2.0, 8.0),
                both(LeftSubtalar.primary_dof(), 2.0, 8.0),
            ],
            rest_pose,
        }),
        "pushup" => Ok(MotionProfile {
            config: config(
                "pushup",
                CycleMode::Repetitive,
                RightElbow,
                KeyFrameRule::CycleMax,
                &[Pelvis, Lumbar, Thorax, Head],
                &[
                    RightScapula, LeftScapula, RightShoulder, LeftShoulder, RightElbow,
                    LeftElbow,
                ],
                vec![
                    c(RightElbow, KeyFrameAngle, 80.0, 150.0),
                    c(LeftElbow, KeyFrameAngle, 80.0, 150.0),
                    c(RightShoulder, KeyFrameDeviation, 0.0, 15.0),
                    c(LeftShoulder, KeyFrameDeviation, 0.0, 15.0),
                    c(Pelvis, Variance, 0.0, 25.0),
                    c(Lumbar, Variance, 0.0, 25.0),
                ],
            ),
            moving: vec![
                both(RightElbow.primary_dof(), 10.0, 85.0),
                both(LeftElbow.primary_dof(), 10.0, 85.0),
                both(RightShoulder.primary_dof(), 15.0, 40.0),
                both(LeftShoulder.primary_dof(), 15.0, 40.0),
                both(RightScapula.primary_dof(), 3.0, 10.0),
                both(LeftScapula.primary_dof(), 3.0, 10.0),
            ],
            rest_pose,
        }),
        "plank" => Ok(MotionProfile {
            config: config(
                "plank",
                CycleMode::StaticHold,
                Pelvis,
                KeyFrameRule::CycleMax,
                &[
                    Pelvis, Lumbar, Thorax, Head, RightHip, LeftHip, RightKnee,
                    LeftKnee,
                ],
                &[],
                vec![
                    c(Pelvis, Variance, 0.0, 25.0),
                    c(Lumbar, Variance, 0.0, 25.0),
                    c(RightHip, Variance, 0.0, 25.0),
                    c(LeftHip, Variance, 0.0, 25.0),
                ],
            ),
            moving: Vec::new(),
            rest_pose: {
                let mut pose = rest_pose;
                pose[Pelvis.primary_dof()] = 10.0;
                pose[RightShoulder.primary_dof()] = 70.0;
                pose[LeftShoulder.primary_dof()] = 70.0;
                pose[RightElbow.primary_dof()] = 85.0;
                pose[LeftElbow.primary_dof()] = 85.0;
                pose
            },
        }),
        "lunge" => Ok(MotionProfile {
            config: config(
                "lunge",
                CycleMode::Repetitive,
                RightKnee,
                KeyFrameRule::CycleMax,
                &[Pelvis, Lumbar, Thorax, Head],
                &[RightHip, LeftHip, RightKnee, LeftKnee, RightAnkle, LeftAnkle],
                vec![
                    c(RightKnee, KeyFrameAngle, 85.0, 150.0),
                    c(LeftKnee, KeyFrameAngle, 70.0, 150.0),
                    c(RightHip, KeyFrameDeviation, 0.0, 20.0),
                    c(LeftHip, KeyFrameDeviation, 0.0, 20.0),
                    c(Lumbar, Variance, 0.0, 25.0),
                    c(Thorax, Variance, 0.0, 25.0),
                ],
            ),
            moving: vec![
                both(RightKnee.primary_dof(), 10.0, 85.0),
                both(LeftKnee.primary_dof(), 8.0, 75.0),
                both(RightHip.primary_dof(), 5.0, 60.0),
                both(LeftHip.primary_dof(), 2.0, 25.0),
                both(RightAnkle.primary_dof(), 5.0, 20.0),
                both(LeftAnkle.primary_dof(), 3.0, 15.0),
            ],
            rest_pose,
        }),
        "high_knees" => Ok(MotionProfile {
            config: config(
                "high_knees",
                CycleMode::Alternating,
                Pelvis,
                KeyFrameRule::CycleMax,
                &[Lumbar, Thorax, Head],
                &[
                    Pelvis, RightHip, LeftHip, RightKnee, LeftKnee, RightAnkle, LeftAnkle,
                    RightShoulder, LeftShoulder,
                ],
                vec![
                    c(RightKnee, KeyFrameAngle, 60.0, 130.0),
                    c(Lumbar, Variance, 0.0, 25.0),
                    c(Thorax, Variance, 0.0, 25.0),
                ],
            ),
            moving: vec![
                MovingDof {
                    dof: Pelvis.primary_dof(),
                    base_deg: 0.0,
                    amp_deg: 25.0,
                    activation: Activation::Signed,
                },
                MovingDof {
                    dof: RightHip.primary_dof(),
                    base_deg: 5.0,
                    amp_deg: 75.0,
                    activation: Activation::Right,
                },
                MovingDof {
                    dof: LeftHip.primary_dof(),
                    base_deg: 5.0,
                    amp_deg: 75.0,
                    activation: Activation::Left,
                },
                MovingDof {
                    dof: RightKnee.primary_dof(),
                    base_deg: 10.0,
                    amp_deg: 80.0,
                    activation: Activation::Right,
                },
                MovingDof {
                    dof: LeftKnee.primary_dof(),
                    base_deg: 10.0,
                    amp_deg: 80.0,
                    activation: Activation::Left,
                },
                MovingDof {
                    dof: RightAnkle.primary_dof(),
                    base_deg: 5.0,
                    amp_deg: 15.0,
                    activation: Activation::Right,
                },
                MovingDof {
                    dof: LeftAnkle.primary_dof(),
                    base_deg: 5.0,
                    amp_deg: 15.0,
                    activation: Activation::Left,
                },
                MovingDof {
                    dof: RightShoulder.primary_dof(),
                    base_deg: 5.0,
                    amp_deg: 30.0,
                    activation: Activation::Left,
                },
                MovingDof {
                    dof: LeftShoulder.primary_dof(),
                    base_deg: 5.0,
                    amp_deg: 30.0,
                    activation: Activation::Right,
                },
            ],
            rest_pose,
        }),
        _ => Err(Error::UnknownExercise(exercise_id.to_string())),
    }
}

/// The bundled configuration for one of the five built-in exercises.
pub fn builtin_config(exercise_id: &str) -> Result<ExerciseConfig> {
    let config = profile(exercise_id)?.config;
    config.validate()?;
    Ok(config)
}

/// Per-DoF sway so stationary joints are never perfectly constant: a small
/// sine locked to the repetition phase, zero at both ends.
fn sway(dof: usize, u: f64) -> f64 {
    let harmonics = 1.0 + (dof % 2) as f64;
    STATIC_SWAY_DEG * (std::f64::consts::PI * 2.0 * harmonics * u).sin()
}

/// Angle of one DoF at phase `u` of a raise, degrees. `side` is +1 for
/// right-side raises of an alternating exercise.
fn raise_angle(m: &MovingDof, u: f64, side: i8, amp_override: Option<f64>) -> f64 {
    let amp = amp_override.unwrap_or(m.amp_deg);
    let arc = (std::f64::consts::PI * u).sin();
    match (m.activation, side) {
        (Activation::Both, _) => m.base_deg + amp * arc,
        (Activation::Signed, s) => m.base_deg + f64::from(s) * amp * arc,
        (Activation::Right, 1) | (Activation::Left, -1) => m.base_deg + amp * arc,
        _ => m.base_deg,
    }
}

/// One contiguous segment of the session timeline.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: usize,
    len: usize,
    /// +1 right raise, -1 left raise, 0 rest.
    side: i8,
    /// Fraction of the full arc amplitude (lead-in/out arcs use less).
    amp_frac: f64,
    /// Arc-phase range this segment sweeps; frame `i` is at
    /// `u0 + (u1 - u0) * i / len`.
    u0: f64,
    u1: f64,
    /// 1-based repetition this segment belongs to, 0 for none.
    rep: usize,
}

impl Segment {
    fn phase(&self, i: usize) -> f64 {
        self.u0 + (self.u1 - self.u0) * i as f64 / self.len as f64
    }
}

struct Timeline {
    segments: Vec<Segment>,
    total_frames: usize,
    /// Valley frames bracketing repetitions, `reps + 1` entries.
    boundaries: Vec<usize>,
}

/// Lays out the session timeline.
///
/// Repetitive sessions never dip below the boundary-valley level outside
/// the repetitions: they open at a small held flexion, descend through a
/// half arc into the first valley, and close by ascending back to the
/// hold. Arc slopes at the junctions match the repetition slopes exactly
/// (amplitude and sweep rate scale together), so smoothing does not
/// displace the boundary valleys, and no rest frame sits deeper than a
/// valley where it could masquerade as one.
fn layout(mode: CycleMode, reps: usize, period: usize, rest: usize) -> Timeline {
    let mut segments = Vec::new();
    let mut t = 0;
    let mut boundaries = Vec::new();
    match mode {
        CycleMode::Repetitive => {
            let half = (period / 6).max(4);
            let frac = 2.0 * half as f64 / period as f64;
            segments.push(Segment {
                start: t,
                len: rest,
                side: 1,
                amp_frac: frac,
                u0: 0.5,
                u1: 0.5,
                rep: 0,
            });
            t += rest;
            segments.push(Segment {
                start: t,
                len: half,
                side: 1,
                amp_frac: frac,
                u0: 0.5,
                u1: 1.0,
                rep: 0,
            });
            t += half;
            for rep in 1..=reps {
                boundaries.push(t);
                segments.push(Segment {
                    start: t,
                    len: period,
                    side: 1,
                    amp_frac: 1.0,
                    u0: 0.0,
                    u1: 1.0,
                    rep,
                });
                t += period;
            }
            boundaries.push(t);
            segments.push(Segment {
                start: t,
                len: half,
                side: 1,
                amp_frac: frac,
                u0: 0.0,
                u1: 0.5,
                rep: 0,
            });
            t += half;
            segments.push(Segment {
                start: t,
                len: rest,
                side: 1,
                amp_frac: frac,
                u0: 0.5,
                u1: 0.5,
                rep: 0,
            });
            t += rest;
        }
        CycleMode::Alternating => {
            t = rest;
            let half = (period / 2).max(12);
            let lead = half;
            segments.push(Segment {
                start: t,
                len: lead,
                side: -1,
                amp_frac: 1.0 / 3.0,
                u0: 0.0,
                u1: 1.0,
                rep: 0,
            });
            boundaries.push(t + lead / 2);
            t += lead;
            for rep in 1..=reps {
                segments.push(Segment {
                    start: t,
                    len: half,
                    side: 1,
                    amp_frac: 1.0,
                    u0: 0.0,
                    u1: 1.0,
                    rep,
                });
                t += half;
                segments.push(Segment {
                    start: t,
                    len: half,
                    side: -1,
                    amp_frac: 1.0,
                    u0: 0.0,
                    u1: 1.0,
                    rep,
                });
                boundaries.push(t + half / 2);
                t += half;
            }
            t += rest;
        }
        CycleMode::StaticHold => {}
    }
    Timeline {
        segments,
        total_frames: t,
        boundaries,
    }
}

/// Resolves an injection's target constraint within the config.
fn resolve_target<'a>(
    config: &'a ExerciseConfig,
    injection: &InjectionSpec,
) -> Result<&'a Constraint> {
    let wanted_kinds: &[ConstraintKind] = match injection.kind {
        InjectionKind::KeyFrame => &[
            ConstraintKind::KeyFrameAngle,
            ConstraintKind::KeyFrameDeviation,
        ],
        InjectionKind::Wobble => &[ConstraintKind::Variance],
    };
    let candidates: Vec<&Constraint> = wanted_kinds
        .iter()
        .flat_map(|k| config.constraints_of(*k))
        .collect();
    let found = match injection.joint {
        Some(joint) => candidates.iter().find(|c| c.joint == joint),
        None => candidates.first(),
    };
    found.copied().ok_or_else(|| {
        Error::BadSessionSpec(format!(
            "no {:?} constraint to inject against in {}",
            injection.kind, config.exercise_id
        ))
    })
}

fn validate_spec(spec: &SessionSpec, config: &ExerciseConfig) -> Result<()> {
    if config.cycle_mode != CycleMode::StaticHold && spec.reps == 0 {
        return Err(Error::BadSessionSpec("reps must be at least 1".into()));
    }
    if !(spec.period_s.is_finite() && spec.period_s > 0.0) {
        return Err(Error::BadSessionSpec(format!(
            "period {} s is not positive",
            spec.period_s
        )));
    }
    if !(0.0..=5.0).contains(&spec.noise_deg) {
        return Err(Error::BadSessionSpec(format!(
            "noise std {} degrees outside [0, 5]",
            spec.noise_deg
        )));
    }
    for injection in &spec.errors {
        if injection.magnitude_deg < MIN_ERROR_MARGIN_DEG {
            return Err(Error::BadSessionSpec(format!(
                "injection magnitude {} below the {} degree minimum",
                injection.magnitude_deg, MIN_ERROR_MARGIN_DEG
            )));
        }
        match config.cycle_mode {
            CycleMode::StaticHold => {
                if injection.kind == InjectionKind::KeyFrame {
                    return Err(Error::BadSessionSpec(
                        "key-frame injection on a static hold".into(),
                    ));
                }
                let at = injection.at_s.ok_or_else(|| {
                    Error::BadSessionSpec("static-hold wobble needs at_s".into())
                })?;
                if !(at.is_finite() && at >= 0.0 && at + WOBBLE_DURATION_S <= spec.duration_s)
                {
                    return Err(Error::BadSessionSpec(format!(
                        "wobble at {at} s does not fit a {} s hold",
                        spec.duration_s
                    )));
                }
            }
            _ => {
                if injection.rep == 0 || injection.rep > spec.reps {
                    return Err(Error::BadSessionSpec(format!(
                        "injection rep {} outside 1..={}",
                        injection.rep, spec.reps
                    )));
                }
            }
        }
        resolve_target(config, injection)?;
    }
    Ok(())
}

/// Key-frame amplitude override for a corrupted repetition: the arc is
/// rescaled so the measured statistic lands `magnitude` degrees past the
/// violated bound (below `lo` when the band floor is positive, above `hi`
/// otherwise).
fn injected_amp(target: &Constraint, m: &MovingDof, magnitude: f64) -> f64 {
    match target.kind {
        ConstraintKind::KeyFrameAngle => {
            let angle = if target.lo > 0.0 {
                target.lo - magnitude
            } else {
                target.hi + magnitude
            };
            angle - m.base_deg
        }
        ConstraintKind::KeyFrameDeviation => m.amp_deg + target.hi + magnitude,
        ConstraintKind::Variance => unreachable!("wobbles do not rescale arcs"),
    }
}

/// Builds a session from its spec. Deterministic: the same spec yields a
/// byte-identical stream.
pub fn generate_session(spec: &SessionSpec) -> Result<SyntheticSession> {
    let profile = profile(&spec.exercise_id)?;
    let config = &profile.config;
    validate_spec(spec, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_deg.max(1e-12)).expect("std validated");

    let period = (spec.period_s * FPS).round() as usize;
    let rest = (spec.rest_s * FPS).round() as usize;
    let timeline = match config.cycle_mode {
        CycleMode::StaticHold => Timeline {
            segments: Vec::new(),
            total_frames: (spec.duration_s * FPS).round() as usize,
            boundaries: Vec::new(),
        },
        mode => layout(mode, spec.reps, period, rest),
    };

    let mut rest_pose = profile.rest_pose;
    for m in &profile.moving {
        rest_pose[m.dof] = m.base_deg;
    }
    let mut series = vec![rest_pose; timeline.total_frames];
    for segment in &timeline.segments {
        for i in 0..segment.len {
            let u = i as f64 / segment.len as f64;
            let frame = &mut series[segment.start + i];
            for m in &profile.moving {
                frame[m.dof] = raise_angle(m, u, segment.side, None)
                    .max(-175.0)
                    .min(175.0)
                    * segment.amp_frac
                    + m.base_deg * (1.0 - segment.amp_frac);
            }
            if segment.rep > 0 {
                for dof in 0..DOF_COUNT {
                    if !profile.moving.iter().any(|m| m.dof == dof) {
                        frame[dof] += sway(dof, u);
                    }
                }
            }
        }
    }

    let mut corrupted = vec![false; spec.reps + 1];
    let mut truth_feedback_s = Vec::new();
    for injection in &spec.errors {
        let target = resolve_target(config, injection)?;
        match (config.cycle_mode, injection.kind) {
            (CycleMode::StaticHold, _) => {
                let at = injection.at_s.expect("validated");
                let start = (at * FPS).round() as usize;
                let len = (WOBBLE_DURATION_S * FPS).round() as usize;
                let amp = std::f64::consts::SQRT_2
                    * (target.hi.max(0.0).sqrt() + injection.magnitude_deg);
                let dof = target.joint.primary_dof();
                for i in 0..len.min(timeline.total_frames.saturating_sub(start)) {
                    let t = (start + i) as f64 / FPS;
                    series[start + i][dof] +=
                        amp * (std::f64::consts::TAU * WOBBLE_HZ * t).sin();
                }
                truth_feedback_s.push(at + WOBBLE_DURATION_S);
            }
            (_, InjectionKind::Wobble) => {
                let amp = std::f64::consts::SQRT_2
                    * (target.hi.max(0.0).sqrt() + injection.magnitude_deg);
                let dof = target.joint.primary_dof();
                for segment in &timeline.segments {
                    if segment.rep != injection.rep {
                        continue;
                    }
                    for i in 0..segment.len {
                        let t = (segment.start + i) as f64 / FPS;
                        series[segment.start + i][dof] +=
                            amp * (std::f64::consts::TAU * WOBBLE_HZ * t).sin();
                    }
                }
                corrupted[injection.rep] = true;
                truth_feedback_s
                    .push(timeline.boundaries[injection.rep] as f64 / FPS);
            }
            (_, InjectionKind::KeyFrame) => {
                let m = profile
                    .moving
                    .iter()
                    .find(|m| m.dof == target.joint.primary_dof())
                    .ok_or_else(|| {
                        Error::BadSessionSpec(format!(
                            "{} does not move in {}",
                            target.joint.id(),
                            config.exercise_id
                        ))
                    })?;
                let amp = injected_amp(target, m, injection.magnitude_deg);
                for segment in &timeline.segments {
                    if segment.rep != injection.rep || segment.side == 0 {
                        continue;
                    }
                    for i in 0..segment.len {
                        let u = i as f64 / segment.len as f64;
                        series[segment.start + i][m.dof] =
                            raise_angle(m, u, segment.side, Some(amp));
                    }
                }
                corrupted[injection.rep] = true;
                truth_feedback_s
                    .push(timeline.boundaries[injection.rep] as f64 / FPS);
            }
        }
    }
    truth_feedback_s.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let beta = if spec.with_morph {
        let mut b = [0.0; BETA_COUNT];
        for v in &mut b {
            *v = rng.random_range(-1.0..1.0);
        }
        Some(b)
    } else {
        None
    };

    let mut frames = Vec::with_capacity(timeline.total_frames);
    for (t, pose_deg) in series.iter().enumerate() {
        let mut q: Pose = [0.0; DOF_COUNT];
        for (d, angle) in pose_deg.iter().enumerate() {
            q[d] = (angle + noise.sample(&mut rng)).clamp(-179.0, 179.0).to_radians();
        }
        frames.push(AngleFrame::new(t, q, beta, 1.0)?);
    }

    let truth_cycles = match config.cycle_mode {
        CycleMode::StaticHold => vec![TruthCycle {
            rep: 1,
            i_s: 0,
            i_e: timeline.total_frames.saturating_sub(1),
            corrupted: !spec.errors.is_empty(),
        }],
        _ => timeline
            .boundaries
            .windows(2)
            .enumerate()
            .map(|(i, pair)| TruthCycle {
                rep: i + 1,
                i_s: pair[0],
                i_e: pair[1],
                corrupted: corrupted[i + 1],
            })
            .collect(),
    };

    Ok(SyntheticSession {
        spec: spec.clone(),
        frames,
        truth_cycles,
        truth_feedback_s,
    })
}

/// Builds the canonical single-repetition reference for an exercise.
///
/// One noise-free cycle sampled at the configured period; for alternating
/// exercises the cycle runs left-bottom to left-bottom so it matches what
/// the detector reports.
pub fn build_reference(exercise_id: &str, period_s: f64) -> Result<ReferenceTrajectory> {
    let profile = profile(exercise_id)?;
    let period = (period_s * FPS).round() as usize;
    let n = period + 1;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let u = k as f64 / period as f64;
        let mut q: Pose = [0.0; DOF_COUNT];
        for (dof, slot) in q.iter_mut().enumerate() {
            let angle = match profile.config.cycle_mode {
                CycleMode::StaticHold => profile.rest_pose[dof],
                CycleMode::Repetitive => {
                    match profile.moving.iter().find(|m| m.dof == dof) {
                        Some(m) => raise_angle(m, u, 1, None),
                        None => profile.rest_pose[dof] + sway(dof, u),
                    }
                }
                CycleMode::Alternating => {
                    match profile.moving.iter().find(|m| m.dof == dof) {
                        Some(m) => alternating_reference_angle(m, u),
                        None => profile.rest_pose[dof] + sway(dof, u),
                    }
                }
            };
            *slot = angle.to_radians();
        }
        frames.push(q);
    }
    ReferenceTrajectory::new(exercise_id, FPS, frames)
}

/// Alternating reference over one full cycle `u ∈ [0,1]`: left bottom at
/// both ends, right raise centered at `u = 0.5`.
fn alternating_reference_angle(m: &MovingDof, u: f64) -> f64 {
    match m.activation {
        Activation::Signed => {
            m.base_deg - m.amp_deg * (std::f64::consts::TAU * u).cos()
        }
        Activation::Right | Activation::Both => {
            if (0.25..0.75).contains(&u) {
                let local = (u - 0.25) / 0.5;
                raise_angle(
                    &MovingDof {
                        activation: Activation::Both,
                        ..*m
                    },
                    local,
                    1,
                    None,
                )
            } else {
                m.base_deg
            }
        }
        Activation::Left => {
            let local = if u < 0.25 {
                (u + 0.25) / 0.5
            } else if u >= 0.75 {
                (u - 0.75) / 0.5
            } else {
                return m.base_deg;
            };
            raise_angle(
                &MovingDof {
                    activation: Activation::Both,
                    ..*m
                },
                local,
                1,
                None,
            )
        }
    }
}
