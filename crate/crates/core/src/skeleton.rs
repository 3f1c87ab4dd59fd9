//! Kinematic layout, exercise configuration, and reference trajectories.
//!
//! The pose model is a 24-joint skeleton whose rotational degrees of freedom
//! flatten into a single 46-dimensional Euler-angle vector per frame, in
//! radians. The flattened order is fixed: pelvis (3), right leg (7), left leg
//! (7), spine and head (9), right arm (10), left arm (10). Every joint owns a
//! contiguous block of indices, and the blocks partition `0..46` exactly.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of rotational degrees of freedom in one flattened pose vector.
pub const DOF_COUNT: usize = 46;

/// Number of anatomical joints in the skeleton.
pub const JOINT_COUNT: usize = 24;

/// Frame rate all trajectories are expressed in, frames per second.
pub const FPS: f64 = 30.0;

/// One pose vector: 46 Euler angles in radians, in canonical flattened order.
pub type Pose = [f64; DOF_COUNT];

/// Which side of the body a joint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Center,
    Right,
    Left,
}

/// Anatomical joints in canonical order. The discriminant of each variant is
/// its row index in per-joint tables and matches the flattened DoF layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Pelvis,
    RightHip,
    RightKnee,
    RightAnkle,
    RightSubtalar,
    RightMtp,
    LeftHip,
    LeftKnee,
    LeftAnkle,
    LeftSubtalar,
    LeftMtp,
    Lumbar,
    Thorax,
    Head,
    RightScapula,
    RightShoulder,
    RightElbow,
    RightForearm,
    RightWrist,
    LeftScapula,
    LeftShoulder,
    LeftElbow,
    LeftForearm,
    LeftWrist,
}

struct JointDef {
    id: &'static str,
    display: &'static str,
    side: Side,
    dof_start: usize,
    dof_len: usize,
}

const JOINT_DEFS: [JointDef; JOINT_COUNT] = [
    JointDef { id: "pelvis", display: "pelvis", side: Side::Center, dof_start: 0, dof_len: 3 },
    JointDef { id: "right_hip", display: "right hip", side: Side::Right, dof_start: 3, dof_len: 3 },
    JointDef { id: "right_knee", display: "right knee", side: Side::Right, dof_start: 6, dof_len: 1 },
    JointDef { id: "right_ankle", display: "right ankle", side: Side::Right, dof_start: 7, dof_len: 1 },
    JointDef { id: "right_subtalar", display: "right subtalar", side: Side::Right, dof_start: 8, dof_len: 1 },
    JointDef { id: "right_mtp", display: "right toes", side: Side::Right, dof_start: 9, dof_len: 1 },
    JointDef { id: "left_hip", display: "left hip", side: Side::Left, dof_start: 10, dof_len: 3 },
    JointDef { id: "left_knee", display: "left knee", side: Side::Left, dof_start: 13, dof_len: 1 },
    JointDef { id: "left_ankle", display: "left ankle", side: Side::Left, dof_start: 14, dof_len: 1 },
    JointDef { id: "left_subtalar", display: "left subtalar", side: Side::Left, dof_start: 15, dof_len: 1 },
    JointDef { id: "left_mtp", display: "left toes", side: Side::Left, dof_start: 16, dof_len: 1 },
    JointDef { id: "lumbar", display: "lumbar spine", side: Side::Center, dof_start: 17, dof_len: 3 },
    JointDef { id: "thorax", display: "thorax", side: Side::Center, dof_start: 20, dof_len: 3 },
    JointDef { id: "head", display: "head", side: Side::Center, dof_start: 23, dof_len: 3 },
    JointDef { id: "right_scapula", display: "right scapula", side: Side::Right, dof_start: 26, dof_len: 3 },
    JointDef { id: "right_shoulder", display: "right shoulder", side: Side::Right, dof_start: 29, dof_len: 3 },
    JointDef { id: "right_elbow", display: "right elbow", side: Side::Right, dof_start: 32, dof_len: 1 },
    JointDef { id: "right_forearm", display: "right forearm", side: Side::Right, dof_start: 33, dof_len: 1 },
    JointDef { id: "right_wrist", display: "right wrist", side: Side::Right, dof_start: 34, dof_len: 2 },
    JointDef { id: "left_scapula", display: "left scapula", side: Side::Left, dof_start: 36, dof_len: 3 },
    JointDef { id: "left_shoulder", display: "left shoulder", side: Side::Left, dof_start: 39, dof_len: 3 },
    JointDef { id: "left_elbow", display: "left elbow", side: Side::Left, dof_start: 42, dof_len: 1 },
    JointDef { id: "left_forearm", display: "left forearm", side: Side::Left, dof_start: 43, dof_len: 1 },
    JointDef { id: "left_wrist", display: "left wrist", side: Side::Left, dof_start: 44, dof_len: 2 },
];

struct DofDef {
    name: &'static str,
    display: &'static str,
    joint: Joint,
}

const DOF_DEFS: [DofDef; DOF_COUNT] = [
    DofDef { name: "pelvis_tilt", display: "tilt", joint: Joint::Pelvis },
    DofDef { name: "pelvis_list", display: "list", joint: Joint::Pelvis },
    DofDef { name: "pelvis_rotation", display: "rotation", joint: Joint::Pelvis },
    DofDef { name: "hip_flexion_r", display: "flexion", joint: Joint::RightHip },
    DofDef { name: "hip_adduction_r", display: "adduction", joint: Joint::RightHip },
    DofDef { name: "hip_rotation_r", display: "rotation", joint: Joint::RightHip },
    DofDef { name: "knee_angle_r", display: "flexion", joint: Joint::RightKnee },
    DofDef { name: "ankle_angle_r", display: "flexion", joint: Joint::RightAnkle },
    DofDef { name: "subtalar_angle_r", display: "inversion", joint: Joint::RightSubtalar },
    DofDef { name: "mtp_angle_r", display: "flexion", joint: Joint::RightMtp },
    DofDef { name: "hip_flexion_l", display: "flexion", joint: Joint::LeftHip },
    DofDef { name: "hip_adduction_l", display: "adduction", joint: Joint::LeftHip },
    DofDef { name: "hip_rotation_l", display: "rotation", joint: Joint::LeftHip },
    DofDef { name: "knee_angle_l", display: "flexion", joint: Joint::LeftKnee },
    DofDef { name: "ankle_angle_l", display: "flexion", joint: Joint::LeftAnkle },
    DofDef { name: "subtalar_angle_l", display: "inversion", joint: Joint::LeftSubtalar },
    DofDef { name: "mtp_angle_l", display: "flexion", joint: Joint::LeftMtp },
    DofDef { name: "lumbar_bending", display: "bending", joint: Joint::Lumbar },
    DofDef { name: "lumbar_extension", display: "extension", joint: Joint::Lumbar },
    DofDef { name: "lumbar_twist", display: "twist", joint: Joint::Lumbar },
    DofDef { name: "thorax_bending", display: "bending", joint: Joint::Thorax },
    DofDef { name: "thorax_extension", display: "extension", joint: Joint::Thorax },
    DofDef { name: "thorax_twist", display: "twist", joint: Joint::Thorax },
    DofDef { name: "head_bending", display: "bending", joint: Joint::Head },
    DofDef { name: "head_extension", display: "extension", joint: Joint::Head },
    DofDef { name: "head_twist", display: "twist", joint: Joint::Head },
    DofDef { name: "scapula_abduction_r", display: "abduction", joint: Joint::RightScapula },
    DofDef { name: "scapula_elevation_r", display: "elevation", joint: Joint::RightScapula },
    DofDef { name: "scapula_upward_rot_r", display: "upward rotation", joint: Joint::RightScapula },
    DofDef { name: "shoulder_flexion_r", display: "flexion", joint: Joint::RightShoulder },
    DofDef { name: "shoulder_adduction_r", display: "adduction", joint: Joint::RightShoulder },
    DofDef { name: "shoulder_rotation_r", display: "rotation", joint: Joint::RightShoulder },
    DofDef { name: "elbow_flexion_r", display: "flexion", joint: Joint::RightElbow },
    DofDef { name: "pro_sup_r", display: "pronation", joint: Joint::RightForearm },
    DofDef { name: "wrist_flexion_r", display: "flexion", joint: Joint::RightWrist },
    DofDef { name: "wrist_deviation_r", display: "deviation", joint: Joint::RightWrist },
    DofDef { name: "scapula_abduction_l", display: "abduction", joint: Joint::LeftScapula },
    DofDef { name: "scapula_elevation_l", display: "elevation", joint: Joint::LeftScapula },
    DofDef { name: "scapula_upward_rot_l", display: "upward rotation", joint: Joint::LeftScapula },
    DofDef { name: "shoulder_flexion_l", display: "flexion", joint: Joint::LeftShoulder },
    DofDef { name: "shoulder_adduction_l", display: "adduction", joint: Joint::LeftShoulder },
    DofDef { name: "shoulder_rotation_l", display: "rotation", joint: Joint::LeftShoulder },
    DofDef { name: "elbow_flexion_l", display: "flexion", joint: Joint::LeftElbow },
    DofDef { name: "pro_sup_l", display: "pronation", joint: Joint::LeftForearm },
    DofDef { name: "wrist_flexion_l", display: "flexion", joint: Joint::LeftWrist },
    DofDef { name: "wrist_deviation_l", display: "deviation", joint: Joint::LeftWrist },
];

impl Joint {
    /// All joints in canonical order.
    pub const ALL: [Joint; JOINT_COUNT] = [
        Joint::Pelvis,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::RightAnkle,
        Joint::RightSubtalar,
        Joint::RightMtp,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::LeftSubtalar,
        Joint::LeftMtp,
        Joint::Lumbar,
        Joint::Thorax,
        Joint::Head,
        Joint::RightScapula,
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightForearm,
        Joint::RightWrist,
        Joint::LeftScapula,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftForearm,
        Joint::LeftWrist,
    ];

    /// Canonical row index, `0..24`.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Stable identifier used in configuration files, e.g. `right_knee`.
    pub fn id(self) -> &'static str {
        JOINT_DEFS[self.index()].id
    }

    /// Human-readable name used in rendered text, e.g. `right knee`.
    pub fn display(self) -> &'static str {
        JOINT_DEFS[self.index()].display
    }

    pub fn side(self) -> Side {
        JOINT_DEFS[self.index()].side
    }

    /// The contiguous block of flattened DoF indices this joint owns.
    pub fn dof_range(self) -> Range<usize> {
        let def = &JOINT_DEFS[self.index()];
        def.dof_start..def.dof_start + def.dof_len
    }

    pub fn dof_count(self) -> usize {
        JOINT_DEFS[self.index()].dof_len
    }

    /// The single DoF that summarizes this joint's motion: the first index of
    /// its block, which is the flexion axis for every multi-axis limb joint.
    pub fn primary_dof(self) -> usize {
        JOINT_DEFS[self.index()].dof_start
    }

    pub fn from_index(index: usize) -> Result<Joint> {
        Joint::ALL
            .get(index)
            .copied()
            .ok_or(Error::BadJointCount(index))
    }
}

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Joint> {
        Joint::ALL
            .iter()
            .copied()
            .find(|j| j.id() == s)
            .ok_or_else(|| Error::UnknownJoint(s.to_string()))
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Stable name of a flattened DoF index, e.g. index 6 is `knee_angle_r`.
pub fn dof_name(index: usize) -> &'static str {
    DOF_DEFS[index].name
}

/// Human-readable axis name of a DoF, e.g. index 6 is `flexion`.
pub fn dof_display(index: usize) -> &'static str {
    DOF_DEFS[index].display
}

/// The joint that owns a flattened DoF index.
pub fn dof_joint(index: usize) -> Joint {
    DOF_DEFS[index].joint
}

/// How repetitions are delimited for an exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleMode {
    /// Both sides move together; one valley-peak-valley arc per repetition.
    Repetitive,
    /// Sides alternate; repetitions are half-cycles split at zero crossings.
    Alternating,
    /// No repetitions; the exercise is one sustained position.
    StaticHold,
}

impl CycleMode {
    /// The serialized name, e.g. `static_hold`.
    pub fn as_str(self) -> &'static str {
        match self {
            CycleMode::Repetitive => "repetitive",
            CycleMode::Alternating => "alternating",
            CycleMode::StaticHold => "static_hold",
        }
    }
}

/// Which extremum of the representative DoF marks the key frame of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyFrameRule {
    CycleMin,
    CycleMax,
}

/// Kind of statistic a form constraint bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Variance of the primary DoF over the cycle, in squared degrees.
    /// Applies to joints expected to stay still.
    Variance,
    /// Absolute angle of the primary DoF at the key frame, in degrees.
    KeyFrameAngle,
    /// Absolute difference from the reference angle at the key frame, in
    /// degrees.
    KeyFrameDeviation,
}

/// One form constraint: the bounded statistic must lie in `[lo, hi]`.
///
/// Units depend on `kind`: squared degrees for `variance`, degrees otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub joint: Joint,
    pub kind: ConstraintKind,
    pub lo: f64,
    pub hi: f64,
}

/// Validated per-exercise configuration.
///
/// Loaded from a JSON file with a `schema` field (currently version 1).
/// Serialization is canonical: field order is fixed and reloading a dump
/// yields an identical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExerciseConfig {
    pub schema: u32,
    pub exercise_id: String,
    pub cycle_mode: CycleMode,
    /// Joint whose primary DoF drives cycle segmentation.
    pub representative_joint: Joint,
    pub key_frame_rule: KeyFrameRule,
    /// Joints expected to stay still during a repetition.
    pub static_joints: Vec<Joint>,
    /// Joints expected to move during a repetition.
    pub dynamic_joints: Vec<Joint>,
    pub constraints: Vec<Constraint>,
    /// Name of the reference trajectory this exercise is scored against.
    pub reference_id: String,
    /// Frames with tracking confidence below this are dropped on ingest.
    pub min_confidence: f64,
}

impl ExerciseConfig {
    pub fn from_json_str(json: &str) -> Result<ExerciseConfig> {
        let config: ExerciseConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExerciseConfig> {
        let text = std::fs::read_to_string(path)?;
        ExerciseConfig::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serializes");
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(Error::Schema(format!(
                "unsupported schema version {}, expected 1",
                self.schema
            )));
        }
        if self.exercise_id.is_empty() {
            return Err(Error::Schema("exercise_id must be non-empty".into()));
        }
        if self.reference_id.is_empty() && self.cycle_mode != CycleMode::StaticHold {
            return Err(Error::Schema("reference_id must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::Schema(format!(
                "min_confidence {} outside [0, 1]",
                self.min_confidence
            )));
        }
        let statics: BTreeSet<Joint> = self.static_joints.iter().copied().collect();
        let dynamics: BTreeSet<Joint> = self.dynamic_joints.iter().copied().collect();
        if statics.len() != self.static_joints.len() || dynamics.len() != self.dynamic_joints.len()
        {
            return Err(Error::Schema("duplicate joint in joint lists".into()));
        }
        if let Some(j) = statics.intersection(&dynamics).next() {
            return Err(Error::Schema(format!(
                "joint {} listed as both static and dynamic",
                j.id()
            )));
        }
        if self.cycle_mode != CycleMode::StaticHold && dynamics.is_empty() {
            return Err(Error::Schema(
                "cycle modes with repetitions need at least one dynamic joint".into(),
            ));
        }
        for c in &self.constraints {
            if c.lo > c.hi {
                return Err(Error::InvertedBound {
                    joint: c.joint.id().to_string(),
                    lo: c.lo,
                    hi: c.hi,
                });
            }
            if !c.lo.is_finite() || !c.hi.is_finite() {
                return Err(Error::NonFinite(format!("bound for {}", c.joint.id())));
            }
            match c.kind {
                ConstraintKind::Variance => {
                    if !statics.contains(&c.joint) {
                        return Err(Error::Schema(format!(
                            "variance constraint on {} which is not a static joint",
                            c.joint.id()
                        )));
                    }
                }
                ConstraintKind::KeyFrameAngle | ConstraintKind::KeyFrameDeviation => {
                    if !dynamics.contains(&c.joint) {
                        return Err(Error::Schema(format!(
                            "key-frame constraint on {} which is not a dynamic joint",
                            c.joint.id()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Constraints of the given kind, in file order.
    pub fn constraints_of(&self, kind: ConstraintKind) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(move |c| c.kind == kind)
    }
}

/// A canonical single-repetition trajectory an exercise is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub exercise_id: String,
    pub fps: f64,
    pub frames: Vec<Pose>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceSidecar {
    exercise_id: String,
    fps: f64,
}

impl ReferenceTrajectory {
    pub fn new(exercise_id: &str, fps: f64, frames: Vec<Pose>) -> Result<ReferenceTrajectory> {
        if frames.len() < 2 {
            return Err(Error::BadReference(frames.len()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::NonFinite("fps".into()));
        }
        for (t, frame) in frames.iter().enumerate() {
            for (d, v) in frame.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("frame {t}, dof {d}")));
                }
            }
        }
        Ok(ReferenceTrajectory {
            exercise_id: exercise_id.to_string(),
            fps,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One DoF as a time series.
    pub fn dof_series(&self, dof: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[dof]).collect()
    }

    /// Writes `<path>` as CSV and an `exercise_id`/`fps` sidecar next to it
    /// with the same stem and a `.json` extension.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("frame");
        for d in 0..DOF_COUNT {
            out.push_str(&format!(",dof_{d:02}"));
        }
        out.push('\n');
        for (t, frame) in self.frames.iter().enumerate() {
            out.push_str(&t.to_string());
            for v in frame {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        std::fs::write(csv_path, out)?;
        let sidecar = ReferenceSidecar {
            exercise_id: self.exercise_id.clone(),
            fps: self.fps,
        };
        let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        json.push('\n');
        std::fs::write(sidecar_path(csv_path), json)?;
        Ok(())
    }

    /// Loads a CSV written by [`ReferenceTrajectory::save`], including its
    /// sidecar.
    pub fn load(csv_path: &Path) -> Result<ReferenceTrajectory> {
        let text = std::fs::read_to_string(csv_path)?;
        let sidecar_text = std::fs::read_to_string(sidecar_path(csv_path))?;
        let sidecar: ReferenceSidecar = serde_json::from_str(&sidecar_text)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Schema("empty reference CSV".into()))?;
        let mut expected = String::from("frame");
        for d in 0..DOF_COUNT {
            expected.push_str(&format!(",dof_{d:02}"));
        }
        if header != expected {
            return Err(Error::Schema(format!(
                "bad reference CSV header: `{header}`"
            )));
        }
        let mut frames = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let frame_no: usize = fields
                .next()
                .unwrap()
                .parse()
                .map_err(|_| bad_row(i, "frame index"))?;
            if frame_no != frames.len() {
                return Err(bad_row(i, "frame indices must start at 0 and increase by 1"));
            }
            let mut frame = [0.0; DOF_COUNT];
            for slot in frame.iter_mut() {
                let field = fields.next().ok_or_else(|| bad_row(i, "too few columns"))?;
                *slot = field.parse().map_err(|_| bad_row(i, "bad float"))?;
            }
            if fields.next().is_some() {
                return Err(bad_row(i, "too many columns"));
            }
            frames.push(frame);
        }
        ReferenceTrajectory::new(&sidecar.exercise_id, sidecar.fps, frames)
    }
}

fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

fn bad_row(line: usize, msg: &str) -> Error {
    Error::StreamFormat {
        line: line + 1,
        msg: msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_blocks_partition_all_dofs() {
        let mut covered = [false; DOF_COUNT];
        for joint in Joint::ALL {
            let range = joint.dof_range();
            assert!(!range.is_empty(), "{joint} owns no DoFs");
            for d in range {
                assert!(!covered[d], "dof {d} owned twice");
                covered[d] = true;
            }
        }
        assert!(covered.iter().all(|&c| c), "some DoF unowned");
    }

    #[test]
    fn primary_dof_lies_in_its_block() {
        for joint in Joint::ALL {
            assert!(joint.dof_range().contains(&joint.primary_dof()));
        }
    }

    #[test]
    fn primary_dof_picks_the_flexion_axis() {
        assert_eq!(Joint::RightKnee.primary_dof(), 6);
        assert_eq!(Joint::LeftKnee.primary_dof(), 13);
        assert_eq!(Joint::RightHip.primary_dof(), 3);
        assert_eq!(Joint::LeftElbow.primary_dof(), 42);
        assert_eq!(Joint::Lumbar.primary_dof(), 17);
        assert_eq!(dof_name(6), "knee_angle_r");
        assert_eq!(dof_display(6), "flexion");
    }

    #[test]
    fn dof_tables_agree_with_joint_blocks() {
        for d in 0..DOF_COUNT {
            assert!(dof_joint(d).dof_range().contains(&d));
        }
        let mut names: Vec<&str> = (0..DOF_COUNT).map(dof_name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), DOF_COUNT, "dof names must be unique");
    }

    #[test]
    fn joint_ids_round_trip() {
        for joint in Joint::ALL {
            assert_eq!(joint.id().parse::<Joint>().unwrap(), joint);
            assert_eq!(Joint::from_index(joint.index()).unwrap(), joint);
        }
        assert!(matches!(
            "spleen".parse::<Joint>(),
            Err(Error::UnknownJoint(_))
        ));
        assert!(Joint::from_index(24).is_err());
    }

    #[test]
    fn serde_names_match_ids() {
        for joint in Joint::ALL {
            let json = serde_json::to_string(&joint).unwrap();
            assert_eq!(json, format!("\"{}\"", joint.id()));
            let back: Joint = serde_json::from_str(&json).unwrap();
            assert_eq!(back, joint);
        }
    }

    fn squat_config_json() -> &'static str {
        r#"{
            "schema": 1,
            "exercise_id": "squat",
            "cycle_mode": "repetitive",
            "representative_joint": "right_knee",
            "key_frame_rule": "cycle_min",
            "static_joints": ["pelvis", "lumbar", "thorax", "head"],
            "dynamic_joints": [
                "right_hip", "left_hip", "right_knee", "left_knee",
                "right_ankle", "left_ankle", "right_subtalar", "left_subtalar"
            ],
            "constraints": [
                {"joint": "right_knee", "kind": "key_frame_angle", "lo": 90.0, "hi": 150.0},
                {"joint": "left_knee", "kind": "key_frame_angle", "lo": 90.0, "hi": 150.0},
                {"joint": "lumbar", "kind": "variance", "lo": 0.0, "hi": 25.0}
            ],
            "reference_id": "squat",
            "min_confidence": 0.5
        }"#
    }

    #[test]
    fn squat_config_loads() {
        let config = ExerciseConfig::from_json_str(squat_config_json()).unwrap();
        assert_eq!(config.exercise_id, "squat");
        assert_eq!(config.cycle_mode, CycleMode::Repetitive);
        assert_eq!(config.representative_joint, Joint::RightKnee);
        assert_eq!(config.key_frame_rule, KeyFrameRule::CycleMin);
        assert_eq!(config.dynamic_joints.len(), 8);
        assert_eq!(
            config
                .constraints_of(ConstraintKind::KeyFrameAngle)
                .count(),
            2
        );
    }

    #[test]
    fn config_serialization_round_trips() {
        let config = ExerciseConfig::from_json_str(squat_config_json()).unwrap();
        let dumped = config.to_json_string();
        let reloaded = ExerciseConfig::from_json_str(&dumped).unwrap();
        assert_eq!(reloaded, config);
        assert_eq!(reloaded.to_json_string(), dumped);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let json = squat_config_json().replace(
            r#""lo": 90.0, "hi": 150.0"#,
            r#""lo": 150.0, "hi": 90.0"#,
        );
        assert!(matches!(
            ExerciseConfig::from_json_str(&json),
            Err(Error::InvertedBound { .. })
        ));
    }

    #[test]
    fn unknown_joints_are_rejected() {
        let json = squat_config_json().replace("right_subtalar", "right_femur");
        assert!(ExerciseConfig::from_json_str(&json).is_err());
    }

    #[test]
    fn overlapping_joint_lists_are_rejected() {
        let json = squat_config_json().replace(
            r#""static_joints": ["pelvis", "lumbar", "thorax", "head"]"#,
            r#""static_joints": ["pelvis", "lumbar", "thorax", "right_knee"]"#,
        );
        let err = ExerciseConfig::from_json_str(&json).unwrap_err();
        assert!(err.to_string().contains("both static and dynamic"), "{err}");
    }

    #[test]
    fn variance_constraint_must_target_static_joint() {
        let json = squat_config_json().replace(
            r#"{"joint": "lumbar", "kind": "variance", "lo": 0.0, "hi": 25.0}"#,
            r#"{"joint": "right_knee", "kind": "variance", "lo": 0.0, "hi": 25.0}"#,
        );
        let err = ExerciseConfig::from_json_str(&json).unwrap_err();
        assert!(err.to_string().contains("not a static joint"), "{err}");
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let json = squat_config_json().replace(r#""schema": 1"#, r#""schema": 2"#);
        let err = ExerciseConfig::from_json_str(&json).unwrap_err();
        assert!(err.to_string().contains("schema"), "{err}");
    }

    #[test]
    fn reference_round_trips_through_csv() {
        let mut frames = Vec::new();
        for t in 0..30 {
            let mut frame = [0.0; DOF_COUNT];
            for (d, v) in frame.iter_mut().enumerate() {
                *v = (t as f64 * 0.1 + d as f64 * 0.01).sin() * 1.234_567_890_123;
            }
            frames.push(frame);
        }
        let reference = ReferenceTrajectory::new("squat", FPS, frames).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("squat.csv");
        reference.save(&csv).unwrap();
        let loaded = ReferenceTrajectory::load(&csv).unwrap();
        assert_eq!(loaded, reference);
    }

    #[test]
    fn reference_csv_header_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("broken.csv");
        std::fs::write(&csv, "frame,dof_0,dof_1\n0,1.0,2.0\n").unwrap();
        std::fs::write(dir.path().join("broken.json"), r#"{"exercise_id":"x","fps":30.0}"#)
            .unwrap();
        assert!(ReferenceTrajectory::load(&csv).is_err());
    }

    #[test]
    fn reference_rejects_non_finite_and_short_input() {
        let frames = vec![[0.0; DOF_COUNT]; 1];
        assert!(matches!(
            ReferenceTrajectory::new("x", FPS, frames),
            Err(Error::BadReference(1))
        ));
        let mut frames = vec![[0.0; DOF_COUNT]; 4];
        frames[2][7] = f64::NAN;
        assert!(matches!(
            ReferenceTrajectory::new("x", FPS, frames),
            Err(Error::NonFinite(_))
        ));
    }
}
