//! Rendering of numeric analysis state into coaching-prompt text.
//!
//! The downstream language model receives a plain-text context block built
//! from three parts: a motion section (current pose angles plus any form
//! issues), a body-shape section, and a trailing `<language_tokens>` marker
//! where generation begins. All numeric formatting here is part of the
//! serialized interface: angles floor toward negative infinity to whole
//! degrees, body measurements keep two decimals, and variance statistics
//! surface as whole-degree standard deviations. Reference parsers for each
//! section keep the formats honest: rendering then parsing must recover the
//! rendered numbers exactly.

use serde::Serialize;

use crate::constraints::ConstraintResult;
use crate::error::{Error, Result};
use crate::preprocess::MorphometricProfile;
use crate::skeleton::{ConstraintKind, Joint};

/// Emitted in place of the body-shape line when no shape coefficients have
/// arrived.
pub const NO_MORPH_WARNING: &str =
    "Warning: no body-shape data; morphometric context unavailable.";

/// Marker appended after the context block; generation starts after it.
pub const LANGUAGE_TOKENS_MARKER: &str = "<language_tokens>";

/// Prefix line flagging that the analysis window was not yet full.
pub const WARMUP_TAG: &str = "[warmup]";

/// Renders the body-shape sentence. Two decimals per measurement.
pub fn render_morph(profile: &MorphometricProfile) -> String {
    format!(
        "User body: height {:.2} m, mass {:.2} kg, chest {:.2} m, waist {:.2} m, hips {:.2} m.",
        profile.height_m, profile.mass_kg, profile.chest_m, profile.waist_m, profile.hip_m
    )
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn floor_deg(value: f64) -> i64 {
    value.floor() as i64
}

/// Renders one violated constraint as a coaching clause, e.g.
/// `Right knee flexion insufficient (85° detected, 90° required)`.
///
/// Variance statistics are converted to standard deviations in whole
/// degrees so the text speaks in angles, not squared angles.
pub fn render_violation(result: &ConstraintResult) -> String {
    let joint_name = capitalize(result.joint.display());
    let measure = match result.kind {
        ConstraintKind::Variance => "variance".to_string(),
        _ => crate::skeleton::dof_display(result.joint.primary_dof()).to_string(),
    };
    let insufficient = result.delta < result.lo;
    let direction = if insufficient { "insufficient" } else { "excessive" };
    let bound = if insufficient { result.lo } else { result.hi };
    let (detected, required) = match result.kind {
        ConstraintKind::Variance => (floor_deg(result.delta.sqrt()), floor_deg(bound.sqrt())),
        _ => (floor_deg(result.delta), floor_deg(bound)),
    };
    format!(
        "{} {} {} ({}\u{b0} detected, {}\u{b0} required)",
        joint_name, measure, direction, detected, required
    )
}

/// Renders the motion section: a pose line in canonical joint order, then
/// a form-issues line listing violated constraints or `none`.
///
/// `pose` holds (joint, primary-DoF angle in radians) pairs; input order
/// does not matter. Only violated entries of `results` are listed.
pub fn render_motion(pose: &[(Joint, f64)], results: &[ConstraintResult]) -> String {
    let mut ordered: Vec<&(Joint, f64)> = pose.iter().collect();
    ordered.sort_by_key(|(joint, _)| joint.index());
    let pose_parts: Vec<String> = ordered
        .iter()
        .map(|(joint, rad)| format!("{} {}\u{b0}", joint.display(), floor_deg(rad.to_degrees())))
        .collect();
    let issues: Vec<String> = results
        .iter()
        .filter(|r| r.violated)
        .map(render_violation)
        .collect();
    let issue_text = if issues.is_empty() {
        "none".to_string()
    } else {
        issues.join("; ")
    };
    format!(
        "Current pose: {}\nForm issues: {}",
        pose_parts.join(", "),
        issue_text
    )
}

/// Everything the engine hands to the language side for one feedback
/// moment, with the rendered text alongside the raw numbers it came from.
#[derive(Debug, Clone, Serialize)]
pub struct ContextBundle {
    /// Frame index the bundle describes.
    pub t: usize,
    /// (joint display name, floored degrees) in canonical order.
    pub pose_state: Vec<(String, i64)>,
    /// Constraint outcomes for the most recent completed cycle.
    pub violations: Vec<ConstraintResult>,
    pub morph_text: Option<String>,
    pub motion_text: String,
    pub warm_up: bool,
}

impl ContextBundle {
    pub fn new(
        t: usize,
        pose: &[(Joint, f64)],
        violations: Vec<ConstraintResult>,
        morph: Option<&MorphometricProfile>,
        warm_up: bool,
    ) -> Self {
        let mut ordered: Vec<(Joint, f64)> = pose.to_vec();
        ordered.sort_by_key(|(joint, _)| joint.index());
        let pose_state = ordered
            .iter()
            .map(|(joint, rad)| (joint.display().to_string(), floor_deg(rad.to_degrees())))
            .collect();
        let motion_text = render_motion(pose, &violations);
        ContextBundle {
            t,
            pose_state,
            violations,
            morph_text: morph.map(render_morph),
            motion_text,
            warm_up,
        }
    }

    /// Assembles the full prompt string:
    /// optional `[warmup]` line, motion section, body-shape line (or the
    /// missing-data warning), then the generation marker.
    pub fn prompt(&self) -> String {
        let mut out = String::new();
        if self.warm_up {
            out.push_str(WARMUP_TAG);
            out.push('\n');
        }
        out.push_str(&self.motion_text);
        out.push('\n');
        match &self.morph_text {
            Some(line) => out.push_str(line),
            None => out.push_str(NO_MORPH_WARNING),
        }
        out.push('\n');
        out.push_str(LANGUAGE_TOKENS_MARKER);
        out
    }
}

fn parse_field(part: &str, label: &str, unit: &str) -> Result<f64> {
    let body = part
        .strip_prefix(label)
        .and_then(|r| r.strip_prefix(' '))
        .and_then(|r| r.strip_suffix(unit))
        .and_then(|r| r.strip_suffix(' '))
        .ok_or_else(|| Error::Schema(format!("bad morph field: {part:?}")))?;
    body.parse::<f64>()
        .map_err(|_| Error::Schema(format!("bad morph number: {body:?}")))
}

/// Parses a line produced by [`render_morph`] back into a profile.
pub fn parse_morph(line: &str) -> Result<MorphometricProfile> {
    let body = line
        .strip_prefix("User body: ")
        .and_then(|r| r.strip_suffix('.'))
        .ok_or_else(|| Error::Schema(format!("bad morph line: {line:?}")))?;
    let parts: Vec<&str> = body.split(", ").collect();
    if parts.len() != 5 {
        return Err(Error::Schema(format!(
            "expected 5 morph fields, got {}",
            parts.len()
        )));
    }
    Ok(MorphometricProfile {
        height_m: parse_field(parts[0], "height", "m")?,
        mass_kg: parse_field(parts[1], "mass", "kg")?,
        chest_m: parse_field(parts[2], "chest", "m")?,
        waist_m: parse_field(parts[3], "waist", "m")?,
        hip_m: parse_field(parts[4], "hips", "m")?,
    })
}

/// Parses text produced by [`render_motion`]: returns the (display name,
/// degrees) pose entries and the individual form-issue clauses (empty when
/// the sentinel `none` was rendered).
pub fn parse_motion(text: &str) -> Result<(Vec<(String, i64)>, Vec<String>)> {
    let (pose_line, issues_line) = text
        .split_once('\n')
        .ok_or_else(|| Error::Schema("motion text is not two lines".into()))?;
    let pose_body = pose_line
        .strip_prefix("Current pose: ")
        .ok_or_else(|| Error::Schema(format!("bad pose line: {pose_line:?}")))?;
    let mut pose = Vec::new();
    for part in pose_body.split(", ") {
        let (name, angle) = part
            .rsplit_once(' ')
            .ok_or_else(|| Error::Schema(format!("bad pose entry: {part:?}")))?;
        let digits = angle
            .strip_suffix('\u{b0}')
            .ok_or_else(|| Error::Schema(format!("pose entry missing degree sign: {part:?}")))?;
        let value = digits
            .parse::<i64>()
            .map_err(|_| Error::Schema(format!("bad pose angle: {digits:?}")))?;
        pose.push((name.to_string(), value));
    }
    let issues_body = issues_line
        .strip_prefix("Form issues: ")
        .ok_or_else(|| Error::Schema(format!("bad issues line: {issues_line:?}")))?;
    let issues = if issues_body == "none" {
        Vec::new()
    } else {
        issues_body.split("; ").map(str::to_string).collect()
    };
    Ok((pose, issues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintClass;
    use proptest::prelude::*;

    fn profile() -> MorphometricProfile {
        MorphometricProfile {
            height_m: 1.78,
            mass_kg: 73.22,
            chest_m: 1.0,
            waist_m: 0.83,
            hip_m: 0.98,
        }
    }

    fn knee_violation() -> ConstraintResult {
        ConstraintResult {
            joint: Joint::RightKnee,
            class: ConstraintClass::Dynamic,
            kind: ConstraintKind::KeyFrameAngle,
            delta: 85.0,
            lo: 90.0,
            hi: 150.0,
            violated: true,
            key_frame: Some(30),
            correction: 5.0,
        }
    }

    fn lumbar_violation() -> ConstraintResult {
        ConstraintResult {
            joint: Joint::Lumbar,
            class: ConstraintClass::Static,
            kind: ConstraintKind::Variance,
            delta: 144.0,
            lo: 0.0,
            hi: 25.0,
            violated: true,
            key_frame: None,
            correction: -119.0,
        }
    }

    #[test]
    fn morph_line_matches_expected_layout() {
        assert_eq!(
            render_morph(&profile()),
            "User body: height 1.78 m, mass 73.22 kg, chest 1.00 m, waist 0.83 m, hips 0.98 m."
        );
    }

    #[test]
    fn two_decimal_rounding_is_half_to_even() {
        let p = MorphometricProfile {
            height_m: 1.745,
            mass_kg: 70.125,
            chest_m: 0.955,
            waist_m: 0.8,
            hip_m: 0.9,
        };
        let line = render_morph(&p);
        assert!(line.contains("mass 70.12 kg"), "{line}");
    }

    #[test]
    fn shallow_knee_renders_the_coaching_clause() {
        assert_eq!(
            render_violation(&knee_violation()),
            "Right knee flexion insufficient (85\u{b0} detected, 90\u{b0} required)"
        );
    }

    #[test]
    fn variance_renders_as_whole_degree_std() {
        assert_eq!(
            render_violation(&lumbar_violation()),
            "Lumbar spine variance excessive (12\u{b0} detected, 5\u{b0} required)"
        );
    }

    #[test]
    fn pose_angles_floor_toward_negative_infinity() {
        let pose = vec![
            (Joint::RightKnee, 90.0_f64.to_radians()),
            (Joint::LeftKnee, 90.9_f64.to_radians()),
            (Joint::RightHip, (-0.1_f64).to_radians()),
        ];
        let text = render_motion(&pose, &[]);
        assert_eq!(
            text,
            "Current pose: right hip -1\u{b0}, right knee 90\u{b0}, left knee 90\u{b0}\n\
             Form issues: none"
        );
    }

    #[test]
    fn pose_entries_sort_by_canonical_joint_index() {
        let pose = vec![
            (Joint::LeftKnee, 1.0),
            (Joint::Pelvis, 0.1),
            (Joint::RightKnee, 1.2),
        ];
        let text = render_motion(&pose, &[]);
        let pose_line = text.lines().next().unwrap();
        let pelvis = pose_line.find("pelvis").unwrap();
        let right = pose_line.find("right knee").unwrap();
        let left = pose_line.find("left knee").unwrap();
        assert!(pelvis < right && right < left);
    }

    #[test]
    fn multiple_issues_join_with_semicolons() {
        let pose = vec![(Joint::RightKnee, 1.5)];
        let text = render_motion(&pose, &[knee_violation(), lumbar_violation()]);
        let issues = text.lines().nth(1).unwrap();
        assert_eq!(
            issues,
            "Form issues: Right knee flexion insufficient (85\u{b0} detected, 90\u{b0} required); \
             Lumbar spine variance excessive (12\u{b0} detected, 5\u{b0} required)"
        );
    }

    #[test]
    fn non_violated_results_are_not_listed() {
        let mut ok = knee_violation();
        ok.delta = 95.0;
        ok.violated = false;
        ok.correction = 0.0;
        let text = render_motion(&[(Joint::RightKnee, 1.6)], &[ok]);
        assert!(text.ends_with("Form issues: none"));
    }

    #[test]
    fn prompt_stacks_sections_in_order() {
        let bundle = ContextBundle::new(
            120,
            &[(Joint::RightKnee, 1.5)],
            vec![knee_violation()],
            Some(&profile()),
            false,
        );
        let prompt = bundle.prompt();
        let lines: Vec<&str> = prompt.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("Current pose: "));
        assert!(lines[1].starts_with("Form issues: "));
        assert!(lines[2].starts_with("User body: "));
        assert_eq!(lines[3], LANGUAGE_TOKENS_MARKER);
    }

    #[test]
    fn missing_morph_renders_the_warning_line() {
        let bundle = ContextBundle::new(5, &[(Joint::Pelvis, 0.0)], vec![], None, false);
        let prompt = bundle.prompt();
        assert!(prompt.contains(NO_MORPH_WARNING));
        assert!(!prompt.contains("User body"));
    }

    #[test]
    fn warmup_flag_prefixes_a_tag_line() {
        let warm = ContextBundle::new(5, &[(Joint::Pelvis, 0.0)], vec![], None, true);
        assert!(warm.prompt().starts_with("[warmup]\nCurrent pose: "));
        let ready = ContextBundle::new(50, &[(Joint::Pelvis, 0.0)], vec![], None, false);
        assert!(ready.prompt().starts_with("Current pose: "));
    }

    #[test]
    fn morph_parse_back_recovers_rendered_values() {
        let line = render_morph(&profile());
        let parsed = parse_morph(&line).unwrap();
        assert_eq!(render_morph(&parsed), line);
        assert_eq!(parsed.height_m, 1.78);
        assert_eq!(parsed.mass_kg, 73.22);
        assert_eq!(parsed.chest_m, 1.0);
    }

    #[test]
    fn motion_parse_back_recovers_pose_and_issues() {
        let pose = vec![
            (Joint::RightKnee, 1.55),
            (Joint::Lumbar, -0.02),
            (Joint::LeftMtp, 0.3),
        ];
        let text = render_motion(&pose, &[knee_violation()]);
        let (entries, issues) = parse_motion(&text).unwrap();
        assert_eq!(
            entries,
            vec![
                ("right knee".to_string(), floor_deg(1.55_f64.to_degrees())),
                ("left toes".to_string(), floor_deg(0.3_f64.to_degrees())),
                ("lumbar spine".to_string(), floor_deg((-0.02_f64).to_degrees())),
            ]
        );
        assert_eq!(issues, vec![render_violation(&knee_violation())]);
    }

    #[test]
    fn sentinel_parses_to_no_issues() {
        let text = render_motion(&[(Joint::Pelvis, 0.2)], &[]);
        let (_, issues) = parse_motion(&text).unwrap();
        assert!(issues.is_empty());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_morph("User body height 1.78 m").is_err());
        assert!(parse_motion("Current pose: right knee 90").is_err());
        assert!(parse_motion("no newline here").is_err());
    }

    proptest! {
        #[test]
        fn floored_angle_brackets_the_true_angle(rad in -3.1f64..3.1) {
            let text = render_motion(&[(Joint::RightKnee, rad)], &[]);
            let (entries, _) = parse_motion(&text).unwrap();
            let rendered = entries[0].1 as f64;
            let true_deg = rad.to_degrees();
            prop_assert!(rendered <= true_deg && true_deg < rendered + 1.0);
        }

        #[test]
        fn morph_render_parse_render_is_identity(
            height in 0.6f64..2.4,
            mass in 30.0f64..150.0,
            chest in 0.5f64..1.5,
            waist in 0.4f64..1.4,
            hip in 0.5f64..1.5,
        ) {
            let p = MorphometricProfile {
                height_m: height,
                mass_kg: mass,
                chest_m: chest,
                waist_m: waist,
                hip_m: hip,
            };
            let line = render_morph(&p);
            let reparsed = parse_morph(&line).unwrap();
            prop_assert_eq!(render_morph(&reparsed), line);
        }

        #[test]
        fn motion_render_parse_is_lossless_for_rendered_degrees(
            angles in proptest::collection::vec(-3.0f64..3.0, 1..6),
        ) {
            let joints = [
                Joint::Pelvis,
                Joint::RightHip,
                Joint::RightKnee,
                Joint::LeftHip,
                Joint::LeftKnee,
                Joint::Lumbar,
            ];
            let pose: Vec<(Joint, f64)> = angles
                .iter()
                .enumerate()
                .map(|(i, a)| (joints[i], *a))
                .collect();
            let text = render_motion(&pose, &[]);
            let (entries, _) = parse_motion(&text).unwrap();
            prop_assert_eq!(entries.len(), pose.len());
            for ((name, deg), (joint, rad)) in entries.iter().zip({
                let mut sorted = pose.clone();
                sorted.sort_by_key(|(j, _)| j.index());
                sorted
            }) {
                prop_assert_eq!(name.as_str(), joint.display());
                prop_assert_eq!(*deg, floor_deg(rad.to_degrees()));
            }
        }
    }
}
